#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fcmf/datamodel/types.hpp"

namespace fcmf::data {

// Reserved block, fixed ids:
//   0 <s>, 1 <pad>, 2 </s>, 3 <unk>, 4..9 aspect tokens in canonical order.
// Regular tokens start at kFirstRegularId.
class Vocabulary {
 public:
  static constexpr std::int32_t kBos = 0;
  static constexpr std::int32_t kPad = 1;
  static constexpr std::int32_t kSep = 2;
  static constexpr std::int32_t kUnk = 3;
  static constexpr std::int32_t kFirstAspectId = 4;
  static constexpr std::int32_t kFirstRegularId = kFirstAspectId + static_cast<std::int32_t>(kNumAspects);

  Vocabulary();

  // Tokens ordered by descending frequency, ties broken lexicographically.
  static Vocabulary build(const std::vector<MultimodalSample>& samples, std::size_t min_count = 1);

  std::int32_t add(const std::string& token);
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  static std::int32_t aspect_id(AspectCategory a) {
    return kFirstAspectId + static_cast<std::int32_t>(index_of(a));
  }
  std::size_t size() const { return tokens_.size(); }

  // One regular token per line; line i (0-based) has id kFirstRegularId + i.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

}  // namespace fcmf::data
