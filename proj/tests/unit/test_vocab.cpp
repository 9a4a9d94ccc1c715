#include <doctest.h>

#include "mprl/error.hpp"
#include "mprl/rng.hpp"
#include "mprl/vocab.hpp"

using namespace mprl;

TEST_CASE("standard vocabulary structure") {
  const Vocab& v = Vocab::standard();
  CHECK(v.size() == 74);
  CHECK(v.pad_id() == 72);
  CHECK(v.eos_id() == 73);
  CHECK(v.id_of('0') == 0);
  CHECK(v.id_of('9') == 9);
  CHECK(v.id_of('a') == 10);
  CHECK(v.id_of('A') == 36);
  CHECK(v.id_of(' ') == 62);
  CHECK(v.id_of('/') == 71);

  // exactly four non-Rest tokens
  int non_rest = 0;
  for (int t = 0; t < v.size(); ++t)
    if (v.to_abstract(t) != AbstractClass::Rest) ++non_rest;
  CHECK(non_rest == 4);
  CHECK(v.to_abstract(v.pad_id()) == AbstractClass::Rest);
  CHECK(v.to_abstract(v.eos_id()) == AbstractClass::Rest);
}

TEST_CASE("encode: lookups, empty input, unknown character") {
  const Vocab& v = Vocab::standard();
  std::vector<int> ids = v.encode("3+4");
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == v.id_of('3'));
  CHECK(ids[1] == v.id_of('+'));
  CHECK(ids[2] == v.id_of('4'));

  CHECK(v.encode("").empty());

  try {
    v.encode("3 \xc3\xb7 4");  // division sign
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Vocabulary);
  }
}

TEST_CASE("decode: inverse of encode, PAD suppression, range check") {
  const Vocab& v = Vocab::standard();
  CHECK(v.decode(std::vector<int>{v.id_of('7')}) == "7");
  CHECK(v.decode(std::vector<int>{v.pad_id(), v.id_of('7')}) == "7");
  CHECK(v.decode(std::vector<int>{v.id_of('7'), v.eos_id()}) == "7");

  try {
    v.decode(std::vector<int>{v.size()});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
}

TEST_CASE("encode/decode round trip on random vocabulary strings") {
  const Vocab& v = Vocab::standard();
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    int len = static_cast<int>(rng.below(40));
    for (int i = 0; i < len; ++i) {
      int id = static_cast<int>(rng.below(static_cast<uint64_t>(v.pad_id())));  // printable ids
      text += v.symbols()[static_cast<size_t>(id)];
    }
    CHECK(v.decode(v.encode(text)) == text);
  }
}

TEST_CASE("abstract class mapping and its inverse") {
  const Vocab& v = Vocab::standard();
  CHECK(v.to_abstract(v.id_of('+')) == AbstractClass::Plus);
  CHECK(v.to_abstract(v.id_of('-')) == AbstractClass::Minus);
  CHECK(v.to_abstract(v.id_of('*')) == AbstractClass::Times);
  CHECK(v.to_abstract(v.id_of('/')) == AbstractClass::Div);
  CHECK(v.to_abstract(v.id_of('a')) == AbstractClass::Rest);

  CHECK(v.from_abstract(AbstractClass::Times) == v.id_of('*'));
  CHECK(v.from_abstract(v.to_abstract(v.id_of('/'))) == v.id_of('/'));

  // round trip across every operator token
  for (int t = 0; t < v.size(); ++t) {
    AbstractClass c = v.to_abstract(t);
    if (c != AbstractClass::Rest) CHECK(v.from_abstract(c) == t);
  }

  try {
    v.from_abstract(AbstractClass::Rest);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }

  try {
    v.to_abstract(-1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
}

TEST_CASE("vocabulary rebuilds from its symbol listing") {
  const Vocab& v = Vocab::standard();
  Vocab rebuilt = Vocab::from_symbols(v.symbols());
  CHECK(rebuilt.size() == v.size());
  CHECK(rebuilt.pad_id() == v.pad_id());
  CHECK(rebuilt.eos_id() == v.eos_id());
  CHECK(rebuilt.encode("Sam has 3 pens.") == v.encode("Sam has 3 pens."));
}
