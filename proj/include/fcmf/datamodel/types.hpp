#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fcmf::data {

inline constexpr std::size_t kNumAspects = 6;
inline constexpr std::size_t kNumLabels = 4;
inline constexpr std::size_t kMaxImages = 7;  // K_max
inline constexpr std::size_t kMaxRois = 4;    // J_max
inline constexpr std::size_t kGridCells = 49;
inline constexpr std::size_t kFeatureDim = 2048;

// Canonical order; the enum value is the index used everywhere.
enum class AspectCategory : std::uint8_t { Location, Food, Room, Facilities, Service, PublicArea };

// Same numbering as the annotation scheme: 0 irrelevant, 1 negative, 2 neutral, 3 positive.
enum class SentimentLabel : std::uint8_t { None, Negative, Neutral, Positive };

inline constexpr std::array<AspectCategory, kNumAspects> kAspects{
    AspectCategory::Location, AspectCategory::Food,    AspectCategory::Room,
    AspectCategory::Facilities, AspectCategory::Service, AspectCategory::PublicArea};

inline constexpr std::array<SentimentLabel, kNumLabels> kLabels{
    SentimentLabel::None, SentimentLabel::Negative, SentimentLabel::Neutral, SentimentLabel::Positive};

constexpr std::size_t index_of(AspectCategory a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index_of(SentimentLabel l) { return static_cast<std::size_t>(l); }

// JSON spelling: "Location", ..., "PublicArea".
std::string_view aspect_name(AspectCategory a);
// Token used inside auxiliary sentences: "location", ..., "public_area".
std::string_view aspect_token(AspectCategory a);
// Accepts the JSON spelling and "Public Area".
std::optional<AspectCategory> parse_aspect(std::string_view name);

std::string_view label_name(SentimentLabel l);
std::optional<SentimentLabel> parse_label(std::string_view name);

// Normalized (x, y, w, h) with the origin at the top-left corner.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

// Describes the first violated box invariant, or nullopt for a valid box.
std::optional<std::string> box_violation(const Box& b);

struct RoI {
  std::string feature_ref;
  Box box;
  std::optional<AspectCategory> category;
  bool operator==(const RoI&) const = default;
};

struct ImageEntry {
  std::string feature_ref;
  std::optional<std::vector<AspectCategory>> categories;
  std::vector<RoI> rois;
  bool operator==(const ImageEntry&) const = default;
};

struct MultimodalSample {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::vector<ImageEntry> images;
  // Sparse: absent aspects are None and None is never stored.
  std::map<AspectCategory, SentimentLabel> labels;

  SentimentLabel label(AspectCategory a) const {
    auto it = labels.find(a);
    return it == labels.end() ? SentimentLabel::None : it->second;
  }
  bool operator==(const MultimodalSample&) const = default;
};

}  // namespace fcmf::data
