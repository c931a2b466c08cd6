#include "fcmf/datamodel/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "fcmf/errors.hpp"

namespace fcmf::data {

Vocabulary::Vocabulary() {
  for (const char* t : {"<s>", "<pad>", "</s>", "<unk>"}) add(t);
  for (auto a : kAspects) add(std::string(aspect_token(a)));
}

std::int32_t Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const std::vector<MultimodalSample>& samples, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples)
    for (const auto& t : s.tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : ordered) {
    if (n >= min_count) v.add(tok);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (std::size_t i = kFirstRegularId; i < tokens_.size(); ++i) os << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto expected = v.size();
    if (static_cast<std::size_t>(v.add(line)) != expected) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate token '" + line + "'");
    }
  }
  return v;
}

}  // namespace fcmf::data
