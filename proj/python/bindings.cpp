#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fcmf/cli/cli.hpp"
#include "fcmf/datamodel/synthetic.hpp"
#include "fcmf/errors.hpp"
#include "fcmf/metrics/metrics.hpp"
#include "fcmf/training/training.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace fcmf;

namespace {

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

py::dict synth(const fs::path& out_dir, std::uint64_t seed, std::size_t n_samples, double implicit_rate,
               double noise, double image_rate, double irrelevant_image_rate) {
  data::SyntheticConfig c;
  c.seed = seed;
  c.n_samples = n_samples;
  c.implicit_rate = implicit_rate;
  c.noise = noise;
  c.image_rate = image_rate;
  c.irrelevant_image_rate = irrelevant_image_rate;
  const auto r = data::generate_synthetic(c, out_dir);
  py::dict d;
  d["train"] = r.train.size();
  d["dev"] = r.dev.size();
  d["test"] = r.test.size();
  return d;
}

std::vector<training::PreparedSample> load_prepared(const fs::path& file, const training::TrainConfig& cfg,
                                                    const perception::CategoryHeads* heads) {
  const auto ds = data::load_dataset(file, training::load_options(cfg));
  data::FeatureStore store(ds.base_dir);
  return training::prepare_samples(ds.samples, store, cfg, heads);
}

// Trains one seed on <data_dir>/{train,dev}.jsonl and returns a JSON summary.
std::string train(const fs::path& data_dir, const std::string& config_json, std::uint64_t seed,
                  const std::string& checkpoint_dir) {
  py::gil_scoped_release release;
  const auto cfg = config_json.empty() ? training::TrainConfig{}
                                       : training::TrainConfig::from_json(nlohmann::json::parse(config_json));
  cfg.validate();
  const auto lo = training::load_options(cfg);
  const auto train_ds = data::load_dataset(data_dir / "train.jsonl", lo);
  const auto vocab = data::Vocabulary::build(train_ds.samples, cfg.min_count);
  data::FeatureStore store(data_dir);
  const auto train_set = training::prepare_samples(train_ds.samples, store, cfg);
  const auto dev_set = load_prepared(data_dir / "dev.jsonl", cfg, nullptr);
  const auto r = training::train(train_set, dev_set, cfg, vocab, seed);
  nlohmann::ordered_json j{{"seed", seed}, {"best_epoch", r.best_epoch}, {"dev_macro_f1", r.best_dev_f1}};
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& h : r.history) hist.push_back({{"epoch", h.epoch}, {"split", h.split}, {"loss", h.loss}, {"macro_f1", h.macro.f1}});
  j["history"] = hist;
  if (fs::exists(data_dir / "test.jsonl")) {
    const auto test_set = load_prepared(data_dir / "test.jsonl", cfg, nullptr);
    j["test_macro_f1"] = training::evaluate_model(r.best.model, test_set).report.macro.f1;
  }
  if (!checkpoint_dir.empty()) training::save_checkpoint(r.best, checkpoint_dir);
  return j.dump();
}

py::list predict(const fs::path& checkpoint_dir, const fs::path& data_file) {
  std::vector<training::PreparedSample> samples;
  training::Evaluation ev;
  {
    py::gil_scoped_release release;
    const auto ckpt = training::load_checkpoint(checkpoint_dir);
    samples = load_prepared(data_file, ckpt.model.config, ckpt.model.heads ? &*ckpt.model.heads : nullptr);
    ev = training::evaluate_model(ckpt.model, samples);
  }
  py::list out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    py::dict row;
    row["id"] = samples[i].id;
    py::dict labels, probs;
    for (std::size_t a = 0; a < data::kNumAspects; ++a) {
      const auto aspect = std::string(data::aspect_name(static_cast<data::AspectCategory>(a)));
      labels[aspect.c_str()] =
          std::string(data::label_name(static_cast<data::SentimentLabel>(ev.predictions[i].labels[a])));
      probs[aspect.c_str()] = ev.predictions[i].probs[a];
    }
    row["labels"] = labels;
    row["probs"] = probs;
    out.append(row);
  }
  return out;
}

py::dict macro_prf1(const std::vector<int>& gold, const std::vector<int>& pred, std::size_t num_classes) {
  const auto r = metrics::macro_prf1(gold, pred, num_classes);
  py::dict d;
  d["precision"] = r.macro.precision;
  d["recall"] = r.macro.recall;
  d["f1"] = r.macro.f1;
  return d;
}

double iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  return metrics::iou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
}

py::dict grad_check(std::size_t dim, std::size_t layers, std::size_t heads, std::size_t samples, double tol,
                    std::uint64_t seed) {
  training::ModelGradCheckOptions o;
  o.dim = dim;
  o.layers = layers;
  o.heads = heads;
  o.samples = samples;
  o.tol = tol;
  o.seed = seed;
  const auto r = training::model_grad_check(o);
  py::dict d;
  d["passed"] = r.passed;
  d["max_rel_error"] = r.max_rel_error;
  d["coordinates"] = r.entries.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fine-grained multimodal aspect sentiment model";
  m.attr("__version__") = FCMF_VERSION;

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("run_cli", &run_cli, py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");
  m.def("generate_synthetic", &synth, py::arg("out_dir"), py::arg("seed") = 7, py::arg("n_samples") = 400,
        py::arg("implicit_rate") = 0.3, py::arg("noise") = 0.1, py::arg("image_rate") = 0.4,
        py::arg("irrelevant_image_rate") = 0.2);
  m.def("default_config_json", [] { return training::TrainConfig{}.to_json().dump(); });
  m.def("train_json", &train, py::arg("data_dir"), py::arg("config_json") = "", py::arg("seed") = 1,
        py::arg("checkpoint_dir") = "");
  m.def("predict", &predict, py::arg("checkpoint_dir"), py::arg("data_file"));
  m.def("macro_prf1", &macro_prf1, py::arg("gold"), py::arg("pred"), py::arg("num_classes"));
  m.def("cohen_kappa", &metrics::cohen_kappa, py::arg("a"), py::arg("b"));
  m.def("iou", &iou, py::arg("a"), py::arg("b"), "Boxes as (x, y, w, h).");
  m.def("model_grad_check", &grad_check, py::arg("dim") = 8, py::arg("layers") = 1, py::arg("heads") = 2,
        py::arg("samples") = 100, py::arg("tol") = 1e-4, py::arg("seed") = 1);
}
