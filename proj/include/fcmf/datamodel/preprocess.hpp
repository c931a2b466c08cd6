#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fcmf::data {

struct PreprocessOptions {
  // When false only ASCII whitespace splitting is applied (the no-preprocessing ablation).
  bool enabled = true;
  // Optional token -> replacement text table (abbreviations, misspellings).
  // No built-in defaults.
  std::map<std::string, std::string> replacements;
  // Multi-word lexicon for longest-match segmentation. Empty disables merging.
  std::vector<std::string> lexicon;
};

// NFC -> lowercase -> whitespace collapse -> control-character strip -> split
// -> replacements -> longest-match merge (joined with '_').
std::vector<std::string> preprocess(std::string_view raw, const PreprocessOptions& options = {});

// Unicode helpers shared with the synthetic generator.
std::string to_nfc(std::string_view utf8);
std::string to_nfd(std::string_view utf8);

}  // namespace fcmf::data
