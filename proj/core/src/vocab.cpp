#include "mprl/vocab.hpp"

#include <algorithm>

#include "mprl/error.hpp"

namespace mprl {

namespace {
constexpr const char* kPadSymbol = "<pad>";
constexpr const char* kEosSymbol = "<eos>";
}  // namespace

const char* abstract_class_name(AbstractClass c) {
  switch (c) {
    case AbstractClass::Plus: return "Plus";
    case AbstractClass::Minus: return "Minus";
    case AbstractClass::Times: return "Times";
    case AbstractClass::Div: return "Div";
    case AbstractClass::Rest: return "Rest";
  }
  return "?";
}

void Vocab::index_symbols() {
  std::fill(std::begin(char_to_id_), std::end(char_to_id_), -1);
  pad_id_ = eos_id_ = -1;
  for (int i = 0; i < size(); ++i) {
    const std::string& s = symbols_[static_cast<size_t>(i)];
    if (s == kPadSymbol) {
      require(pad_id_ < 0, ErrorKind::Config, "duplicate <pad> symbol");
      pad_id_ = i;
    } else if (s == kEosSymbol) {
      require(eos_id_ < 0, ErrorKind::Config, "duplicate <eos> symbol");
      eos_id_ = i;
    } else {
      require(s.size() == 1, ErrorKind::Config, "multi-character symbol in vocabulary: " + s);
      unsigned char c = static_cast<unsigned char>(s[0]);
      require(char_to_id_[c] < 0, ErrorKind::Config, "duplicate symbol in vocabulary: " + s);
      char_to_id_[c] = i;
      switch (s[0]) {
        case '+': operator_ids_[0] = i; break;
        case '-': operator_ids_[1] = i; break;
        case '*': operator_ids_[2] = i; break;
        case '/': operator_ids_[3] = i; break;
        default: break;
      }
    }
  }
  require(pad_id_ >= 0 && eos_id_ >= 0, ErrorKind::Config, "vocabulary missing PAD or EOS");
  for (int id : operator_ids_)
    require(id >= 0, ErrorKind::Config, "vocabulary missing an operator symbol");
}

const Vocab& Vocab::standard() {
  static const Vocab instance = [] {
    Vocab v;
    for (char c = '0'; c <= '9'; ++c) v.symbols_.emplace_back(1, c);
    for (char c = 'a'; c <= 'z'; ++c) v.symbols_.emplace_back(1, c);
    for (char c = 'A'; c <= 'Z'; ++c) v.symbols_.emplace_back(1, c);
    for (char c : {' ', '.', ',', '?', '=', '#', '+', '-', '*', '/'}) v.symbols_.emplace_back(1, c);
    v.symbols_.emplace_back(kPadSymbol);
    v.symbols_.emplace_back(kEosSymbol);
    v.index_symbols();
    return v;
  }();
  return instance;
}

Vocab Vocab::from_symbols(const std::vector<std::string>& symbols) {
  Vocab v;
  v.symbols_ = symbols;
  v.index_symbols();
  return v;
}

bool Vocab::contains(char c) const { return char_to_id_[static_cast<unsigned char>(c)] >= 0; }

int Vocab::id_of(char c) const {
  int id = char_to_id_[static_cast<unsigned char>(c)];
  require(id >= 0, ErrorKind::Vocabulary,
          std::string("character not in vocabulary: '") + c + "'");
  return id;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(id_of(c));
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    require(id >= 0 && id < size(), ErrorKind::Index, "decode: token id out of range");
    if (id == pad_id_ || id == eos_id_) continue;
    out += symbols_[static_cast<size_t>(id)];
  }
  return out;
}

bool Vocab::encodable(std::string_view text) const {
  return std::all_of(text.begin(), text.end(), [&](char c) { return contains(c); });
}

AbstractClass Vocab::to_abstract(int token) const {
  require(token >= 0 && token < size(), ErrorKind::Index, "to_abstract: token id out of range");
  for (int k = 0; k < 4; ++k)
    if (operator_ids_[k] == token) return static_cast<AbstractClass>(k);
  return AbstractClass::Rest;
}

int Vocab::from_abstract(AbstractClass c) const {
  require(c != AbstractClass::Rest, ErrorKind::Contract,
          "from_abstract: the inverse mapping is undefined for Rest");
  return operator_ids_[static_cast<int>(c)];
}

}  // namespace mprl
