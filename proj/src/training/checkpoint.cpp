#include <fstream>

#include "fcmf/datamodel/fcmt.hpp"
#include "fcmf/errors.hpp"
#include "fcmf/training/training.hpp"

namespace fcmf::training {

namespace {

constexpr const char* kFormat = "fcmf-checkpoint";

std::vector<std::uint32_t> dims_of(const num::Shape& s) { return {s.begin(), s.end()}; }

void write_record(std::ostream& os, const num::Shape& shape, std::span<const double> values) {
  const auto dims = dims_of(shape);
  data::write_fcmt(os, dims, values);
}

std::vector<double> read_record(std::istream& is, const num::Shape& shape, const std::string& name) {
  auto rec = data::read_fcmt_f64(is);
  if (rec.dims != dims_of(shape)) throw DataError("checkpoint tensor " + name + " has unexpected shape");
  return std::move(rec.values);
}

nlohmann::ordered_json history_json(const std::vector<HistoryRow>& rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"epoch", r.epoch},
                   {"split", r.split},
                   {"loss", r.loss},
                   {"macro_p", r.macro.precision},
                   {"macro_r", r.macro.recall},
                   {"macro_f1", r.macro.f1}});
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto params = ckpt.model.params();

  nlohmann::ordered_json m;
  m["format"] = kFormat;
  m["tool_version"] = FCMF_VERSION;
  m["config"] = ckpt.model.config.to_json();
  m["config_hash"] = ckpt.model.config.hash();
  m["seed"] = ckpt.state.seed;
  m["next_epoch"] = ckpt.state.next_epoch;
  m["best_dev_f1"] = ckpt.state.best_dev_f1;
  m["best_epoch"] = ckpt.state.best_epoch;
  m["rng_states"] = ckpt.state.rng_states;
  m["adam"] = {{"steps", ckpt.state.adam_steps},
               {"lr", ckpt.model.config.learning_rate},
               {"beta1", ckpt.model.config.beta1},
               {"beta2", ckpt.model.config.beta2},
               {"eps", ckpt.model.config.adam_eps},
               {"has_moments", !ckpt.state.adam_m.empty()}};
  auto index = nlohmann::ordered_json::array();
  for (const auto& [name, t] : params) index.push_back({{"name", name}, {"shape", t.shape()}});
  m["tensors"] = index;
  m["heads"] = ckpt.model.heads.has_value();
  m["vocab_size"] = ckpt.model.vocab.size();
  m["history"] = history_json(ckpt.state.history);

  {
    std::ofstream os(dir / "params.fcmt", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir / "params.fcmt").string());
    for (const auto& [name, t] : params) write_record(os, t.shape(), t.data());
    if (!ckpt.state.adam_m.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) write_record(os, params[i].second.shape(), ckpt.state.adam_m[i]);
      for (std::size_t i = 0; i < params.size(); ++i) write_record(os, params[i].second.shape(), ckpt.state.adam_v[i]);
    }
  }
  if (ckpt.model.heads) {
    num::ParamList hp;
    ckpt.model.heads->collect(hp, "heads");
    std::ofstream os(dir / "heads.fcmt", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir / "heads.fcmt").string());
    for (const auto& [name, t] : hp) write_record(os, t.shape(), t.data());
  }
  ckpt.model.vocab.save(dir / "vocab.txt");
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << m.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw IoError("cannot open checkpoint manifest in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != kFormat) throw DataError(dir.string() + " is not a checkpoint directory");

  const TrainConfig config = TrainConfig::from_json(m.at("config"));
  if (config.hash() != m.at("config_hash").get<std::string>()) throw DataError("checkpoint config hash mismatch");
  Checkpoint c{FcmfModel::init(config, data::Vocabulary::load(dir / "vocab.txt"), 0), {}};
  c.state.seed = m.at("seed").get<std::uint64_t>();
  c.state.next_epoch = m.at("next_epoch").get<std::size_t>();
  c.state.best_dev_f1 = m.at("best_dev_f1").get<double>();
  c.state.best_epoch = m.at("best_epoch").get<std::size_t>();
  c.state.rng_states = m.at("rng_states").get<std::map<std::string, std::string>>();
  c.state.adam_steps = m.at("adam").at("steps").get<std::uint64_t>();
  for (const auto& r : m.at("history")) {
    c.state.history.push_back({r.at("epoch").get<std::size_t>(), r.at("split").get<std::string>(),
                               r.at("loss").get<double>(),
                               {r.at("macro_p").get<double>(), r.at("macro_r").get<double>(), r.at("macro_f1").get<double>()}});
  }

  const auto params = c.model.params();
  const auto& index = m.at("tensors");
  if (index.size() != params.size()) throw DataError("checkpoint tensor count does not match the config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (index[i].at("name").get<std::string>() != params[i].first) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is " + index[i].at("name").get<std::string>() +
                      ", expected " + params[i].first);
    }
  }
  std::ifstream is(dir / "params.fcmt", std::ios::binary);
  if (!is) throw IoError("cannot open " + (dir / "params.fcmt").string());
  for (const auto& [name, t] : params) {
    auto values = read_record(is, t.shape(), name);
    Tensor h = t;
    std::copy(values.begin(), values.end(), h.data().begin());
  }
  if (m.at("adam").value("has_moments", false)) {
    for (const auto& [name, t] : params) c.state.adam_m.push_back(read_record(is, t.shape(), name));
    for (const auto& [name, t] : params) c.state.adam_v.push_back(read_record(is, t.shape(), name));
  }
  if (m.value("heads", false)) {
    c.model.heads = perception::CategoryHeads::zeros();
    num::ParamList hp;
    c.model.heads->collect(hp, "heads");
    std::ifstream hs(dir / "heads.fcmt", std::ios::binary);
    if (!hs) throw IoError("cannot open " + (dir / "heads.fcmt").string());
    for (const auto& [name, t] : hp) {
      auto values = read_record(hs, t.shape(), name);
      Tensor h = t;
      std::copy(values.begin(), values.end(), h.data().begin());
    }
  }
  return c;
}

}  // namespace fcmf::training

namespace fcmf::training {

void save_heads(const perception::CategoryHeads& heads, const std::filesystem::path& dir,
                const nlohmann::ordered_json& manifest_extra) {
  std::filesystem::create_directories(dir);
  num::ParamList hp;
  heads.collect(hp, "heads");
  {
    std::ofstream os(dir / "heads.fcmt", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir / "heads.fcmt").string());
    for (const auto& [name, t] : hp) write_record(os, t.shape(), t.data());
  }
  nlohmann::ordered_json m;
  m["format"] = "fcmf-heads";
  m["tool_version"] = FCMF_VERSION;
  auto index = nlohmann::ordered_json::array();
  for (const auto& [name, t] : hp) index.push_back({{"name", name}, {"shape", t.shape()}});
  m["tensors"] = index;
  if (manifest_extra.is_object()) {
    for (const auto& [k, v] : manifest_extra.items()) m[k] = v;
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << m.dump(1) << '\n';
}

perception::CategoryHeads load_heads(const std::filesystem::path& dir) {
  auto heads = perception::CategoryHeads::zeros();
  num::ParamList hp;
  heads.collect(hp, "heads");
  std::ifstream is(dir / "heads.fcmt", std::ios::binary);
  if (!is) throw IoError("cannot open " + (dir / "heads.fcmt").string());
  for (const auto& [name, t] : hp) {
    auto values = read_record(is, t.shape(), name);
    Tensor h = t;
    std::copy(values.begin(), values.end(), h.data().begin());
  }
  return heads;
}

}  // namespace fcmf::training
