#include "fcmf/datamodel/types.hpp"

namespace fcmf::data {

namespace {
constexpr std::array<std::string_view, kNumAspects> kAspectNames{"Location", "Food",    "Room",
                                                                 "Facilities", "Service", "PublicArea"};
constexpr std::array<std::string_view, kNumAspects> kAspectTokens{"location",   "food",    "room",
                                                                  "facilities", "service", "public_area"};
constexpr std::array<std::string_view, kNumLabels> kLabelNames{"none", "negative", "neutral", "positive"};
}  // namespace

std::string_view aspect_name(AspectCategory a) { return kAspectNames[index_of(a)]; }
std::string_view aspect_token(AspectCategory a) { return kAspectTokens[index_of(a)]; }

std::optional<AspectCategory> parse_aspect(std::string_view name) {
  for (auto a : kAspects) {
    if (aspect_name(a) == name) return a;
  }
  if (name == "Public Area") return AspectCategory::PublicArea;
  return std::nullopt;
}

std::string_view label_name(SentimentLabel l) { return kLabelNames[index_of(l)]; }

std::optional<SentimentLabel> parse_label(std::string_view name) {
  for (auto l : kLabels) {
    if (label_name(l) == name) return l;
  }
  return std::nullopt;
}

std::optional<std::string> box_violation(const Box& b) {
  constexpr double slack = 1e-12;
  if (!(b.x >= 0.0)) return "x < 0";
  if (!(b.y >= 0.0)) return "y < 0";
  if (!(b.w > 0.0)) return "w <= 0";
  if (!(b.h > 0.0)) return "h <= 0";
  if (b.x + b.w > 1.0 + slack) return "x+w > 1";
  if (b.y + b.h > 1.0 + slack) return "y+h > 1";
  return std::nullopt;
}

}  // namespace fcmf::data
