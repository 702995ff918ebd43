#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hwgen {

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// Ordered glyph set. Label 0 is reserved for the CTC blank; character i of
// the set has label i + 1.
class Alphabet {
 public:
  static constexpr int kBlank = 0;

  Alphabet() = default;
  explicit Alphabet(std::u32string characters);
  static Alphabet from_utf8(std::string_view characters);
  // Upper/lowercase letters, digits, space and basic punctuation.
  static Alphabet standard();

  // Number of characters, blank excluded.
  int size() const { return static_cast<int>(chars_.size()); }
  // Characters plus blank.
  int num_classes() const { return size() + 1; }

  // Label of `c`, or -1 when not in the alphabet.
  int label_of(char32_t c) const;
  char32_t symbol(int label) const;

  // UTF-8 text to labels; unknown symbols raise DataError naming the
  // offending code-point position.
  std::vector<int> encode(std::string_view utf8) const;
  std::string decode(std::span<const int> labels) const;
  std::string utf8() const { return utf8_encode(chars_); }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.chars_ == b.chars_; }

 private:
  std::u32string chars_;
  std::unordered_map<char32_t, int> index_;
};

}  // namespace hwgen
