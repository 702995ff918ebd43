#include "hwgen/alphabet.hpp"

#include "hwgen/error.hpp"

namespace hwgen {

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto b = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F;
      extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F;
      extra = 2;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07;
      extra = 3;
    } else {
      throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (extra > 0 && i + extra >= s.size()) {
      throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (int k = 1; k <= extra; ++k) {
      auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) throw DataError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (c & 0x3F);
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

Alphabet::Alphabet(std::u32string characters) : chars_(std::move(characters)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (!index_.emplace(chars_[i], static_cast<int>(i) + 1).second) {
      throw UsageError("alphabet contains a duplicate symbol");
    }
  }
}

Alphabet Alphabet::from_utf8(std::string_view characters) { return Alphabet(utf8_decode(characters)); }

Alphabet Alphabet::standard() {
  return from_utf8(
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?'\"-()&#/");
}

int Alphabet::label_of(char32_t c) const {
  auto it = index_.find(c);
  return it == index_.end() ? -1 : it->second;
}

char32_t Alphabet::symbol(int label) const {
  if (label < 1 || label > size()) throw DataError("label " + std::to_string(label) + " outside alphabet");
  return chars_[static_cast<std::size_t>(label - 1)];
}

std::vector<int> Alphabet::encode(std::string_view utf8) const {
  std::u32string cps = utf8_decode(utf8);
  std::vector<int> labels;
  labels.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    int l = label_of(cps[i]);
    if (l < 0) {
      throw DataError("symbol '" + utf8_encode(std::u32string(1, cps[i])) + "' at position " +
                      std::to_string(i) + " is not in the alphabet");
    }
    labels.push_back(l);
  }
  return labels;
}

std::string Alphabet::decode(std::span<const int> labels) const {
  std::u32string out;
  for (int l : labels) out.push_back(symbol(l));
  return utf8_encode(out);
}

}  // namespace hwgen
