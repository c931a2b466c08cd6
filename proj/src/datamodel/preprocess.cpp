#include "fcmf/datamodel/preprocess.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include <algorithm>

#include "fcmf/errors.hpp"

namespace fcmf::data {

namespace {

icu::UnicodeString normalize(const icu::UnicodeString& text, bool compose) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm =
      compose ? icu::Normalizer2::getNFCInstance(status) : icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) throw ConfigError("ICU normalizer unavailable");
  icu::UnicodeString out = norm->normalize(text, status);
  if (U_FAILURE(status)) throw DataError("Unicode normalization failed");
  return out;
}

std::string utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::vector<std::string> split_ascii(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Steps up to and including the whitespace split.
std::vector<std::string> normalize_and_split(std::string_view raw) {
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  text = normalize(text, true);
  text.toLower(icu::Locale::getRoot());
  text = normalize(text, true);

  // Collapse whitespace runs to one space, then drop remaining control characters.
  icu::UnicodeString cleaned;
  bool in_space = false;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      if (!in_space) cleaned.append(static_cast<UChar>(' '));
      in_space = true;
      continue;
    }
    in_space = false;
    if (u_charType(c) == U_CONTROL_CHAR) continue;
    cleaned.append(c);
  }
  // Removing a control character can bring a base letter next to its combining mark.
  return split_ascii(utf8(normalize(cleaned, true)));
}

}  // namespace

std::string to_nfc(std::string_view s) {
  return utf8(normalize(icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size()))), true));
}

std::string to_nfd(std::string_view s) {
  return utf8(normalize(icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size()))), false));
}

std::vector<std::string> preprocess(std::string_view raw, const PreprocessOptions& options) {
  if (!options.enabled) return split_ascii(raw);

  std::vector<std::string> tokens = normalize_and_split(raw);

  if (!options.replacements.empty()) {
    std::map<std::string, std::vector<std::string>> table;
    for (const auto& [from, to] : options.replacements) {
      const auto key = normalize_and_split(from);
      if (key.size() == 1) table[key.front()] = normalize_and_split(to);
    }
    std::vector<std::string> replaced;
    for (auto& t : tokens) {
      auto it = table.find(t);
      if (it == table.end()) {
        replaced.push_back(std::move(t));
      } else {
        replaced.insert(replaced.end(), it->second.begin(), it->second.end());
      }
    }
    tokens = std::move(replaced);
  }

  if (!options.lexicon.empty()) {
    std::vector<std::vector<std::string>> entries;
    std::size_t longest = 0;
    for (const auto& e : options.lexicon) {
      auto words = normalize_and_split(e);
      if (words.size() >= 2) {
        longest = std::max(longest, words.size());
        entries.push_back(std::move(words));
      }
    }
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < tokens.size();) {
      std::size_t best = 1;
      for (const auto& words : entries) {
        if (words.size() <= best || i + words.size() > tokens.size()) continue;
        if (std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          best = words.size();
        }
      }
      std::string joined = tokens[i];
      for (std::size_t j = 1; j < best; ++j) joined += "_" + tokens[i + j];
      merged.push_back(std::move(joined));
      i += best;
    }
    tokens = std::move(merged);
  }
  return tokens;
}

}  // namespace fcmf::data
