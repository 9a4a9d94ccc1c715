#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mprl {

/// The five-way token abstraction: the four arithmetic operators plus a
/// catch-all for every other token.
enum class AbstractClass : uint8_t { Plus = 0, Minus = 1, Times = 2, Div = 3, Rest = 4 };

constexpr int kNumAbstractClasses = 5;

const char* abstract_class_name(AbstractClass c);

/// Fixed character-level vocabulary. One token per character, so each
/// operator is exactly one token and the class mapping is unambiguous.
///
/// Symbol order: digits 0-9, a-z, A-Z, space, '.', ',', '?', '=', '#',
/// '+', '-', '*', '/', then the PAD and EOS specials.
class Vocab {
 public:
  /// The build-time vocabulary (74 symbols).
  static const Vocab& standard();

  /// Rebuild from a checkpoint's symbol listing. Specials are spelled
  /// "<pad>" and "<eos>"; every other symbol must be a single character.
  static Vocab from_symbols(const std::vector<std::string>& symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  int pad_id() const { return pad_id_; }
  int eos_id() const { return eos_id_; }

  bool contains(char c) const;
  int id_of(char c) const;  // Vocabulary error naming the character

  std::vector<int> encode(std::string_view text) const;
  /// Inverse of encode; PAD and EOS render as empty.
  std::string decode(std::span<const int> ids) const;
  bool encodable(std::string_view text) const;

  AbstractClass to_abstract(int token) const;      // Index error when out of range
  int from_abstract(AbstractClass c) const;        // Contract error for Rest

  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  Vocab() = default;
  void index_symbols();

  std::vector<std::string> symbols_;
  int pad_id_ = -1;
  int eos_id_ = -1;
  int char_to_id_[256];
  int operator_ids_[4] = {-1, -1, -1, -1};  // Plus, Minus, Times, Div
};

}  // namespace mprl
