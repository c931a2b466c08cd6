// Acceptance run: one PASS/FAIL line per criterion.
#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "fcmf/cli/cli.hpp"
#include "fcmf/datamodel/synthetic.hpp"
#include "fcmf/metrics/metrics.hpp"
#include "fcmf/numerics/ops.hpp"
#include "fcmf/numerics/tape.hpp"
#include "fcmf/training/training.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace fcmf;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::set<int> only;
  double lr = 0.0;           // 0 keeps the default learning rate
  std::size_t epochs = 50;
  std::size_t ablation_seeds = 3;
  std::string work;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---- 1 ----

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  training::ModelGradCheckOptions o;  // d=8, L=1, K=2, J=2, N=6, dropout off, 100 coordinates, tol 1e-4
  const auto rep = training::model_grad_check(o);
  const double secs = seconds_since(t0);
  const bool ok = rep.passed && rep.entries.size() >= 100 && secs < 60.0;
  return {ok, "max_rel_error=" + sci(rep.max_rel_error) + " coordinates=" +
                  std::to_string(rep.entries.size()) + " time=" + fmt(secs, 2) + "s (tol 1e-4, limit 60s)"};
}

// ---- 2 ----

num::Tensor from(const oracle::Matrix& m) {
  return num::Tensor(num::Shape{m.size(), m[0].size()}, oracle::flatten(m));
}

Outcome kernel_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  auto dim = [&](std::size_t lo, std::size_t hi) { return lo + gen() % (hi - lo + 1); };
  double worst[4] = {0, 0, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    const auto a = oracle::random_matrix(gen, dim(1, 8), dim(1, 8));
    const auto b = oracle::random_matrix(gen, a[0].size(), dim(1, 8));
    const auto c = num::matmul(from(a), from(b));
    worst[0] = std::max(worst[0], oracle::max_abs_diff({c.data().begin(), c.data().end()},
                                                       oracle::flatten(oracle::matmul(a, b))));
  }
  for (int t = 0; t < 1000; ++t) {
    const auto x = oracle::random_matrix(gen, dim(1, 6), dim(1, 10), -3.0, 3.0);
    const auto s = num::softmax(from(x));
    std::vector<double> expect;
    for (const auto& r : x) {
      const auto e = oracle::softmax(r);
      expect.insert(expect.end(), e.begin(), e.end());
    }
    worst[1] = std::max(worst[1], oracle::max_abs_diff({s.data().begin(), s.data().end()}, expect));
  }
  for (int t = 0; t < 1000; ++t) {
    const std::size_t heads = dim(1, 3), dh = dim(1, 3), nq = dim(1, 5), nk = dim(1, 6);
    const auto q = oracle::random_matrix(gen, nq, heads * dh);
    const auto k = oracle::random_matrix(gen, nk, heads * dh);
    const auto v = oracle::random_matrix(gen, nk, heads * dh);
    num::KeyMask mask(nk, 0);
    std::vector<int> m(nk, 0);
    for (std::size_t j = 1; j < nk; ++j)
      if (gen() % 3 == 0) mask[j] = m[j] = 1;
    const auto out = num::attention(from(q), from(k), from(v), mask, heads);
    worst[2] = std::max(worst[2], oracle::max_abs_diff({out.data().begin(), out.data().end()},
                                                       oracle::flatten(oracle::attention(q, k, v, m, heads))));
  }
  for (int t = 0; t < 1000; ++t) {
    const auto x = oracle::random_matrix(gen, dim(1, 6), dim(2, 12), -2.0, 2.0);
    const std::size_t c = x[0].size();
    const num::Tensor gamma(num::Shape{c}, 1.0), beta(num::Shape{c}, 0.0);
    const auto y = num::layernorm(from(x), gamma, beta, 1e-12);
    worst[3] = std::max(worst[3], oracle::max_abs_diff({y.data().begin(), y.data().end()},
                                                       oracle::flatten(oracle::layernorm(x, 1e-12))));
  }
  const double secs = seconds_since(t0);
  bool ok = secs < 30.0;
  for (double w : worst) ok = ok && w <= 1e-12;
  return {ok, "max|diff| matmul=" + sci(worst[0]) + " softmax=" + sci(worst[1]) +
                  " attention=" + sci(worst[2]) + " layernorm=" + sci(worst[3]) +
                  " time=" + fmt(secs, 2) + "s (tol 1e-12, limit 30s)"};
}

// ---- 3 ----

Outcome metric_oracles() {
  std::mt19937_64 gen(31);
  double worst_macro = 0, worst_kappa = 0, worst_iou = 0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(gen() % 4);
    const std::size_t n = 1 + gen() % 30;
    std::vector<int> g(n), p(n), classes;
    for (auto& x : g) x = static_cast<int>(gen() % static_cast<unsigned>(k));
    for (auto& x : p) x = static_cast<int>(gen() % static_cast<unsigned>(k));
    for (int c = 0; c < k; ++c) classes.push_back(c);
    const auto r = metrics::macro_prf1(g, p, static_cast<std::size_t>(k));
    const auto o = oracle::brute_macro(g, p, k, classes);
    worst_macro = std::max({worst_macro, std::abs(r.macro.f1 - o.f), std::abs(r.macro.precision - o.p),
                            std::abs(r.macro.recall - o.r)});
    worst_kappa = std::max(worst_kappa, std::abs(metrics::cohen_kappa(g, p) - oracle::brute_kappa(g, p)));
    std::uniform_real_distribution<double> pos(-2, 2), ext(0.05, 3);
    const data::Box a{pos(gen), pos(gen), ext(gen), ext(gen)}, b{pos(gen), pos(gen), ext(gen), ext(gen)};
    worst_iou = std::max(worst_iou, std::abs(metrics::iou(a, b) - oracle::brute_iou(a, b)));
  }
  const double f1 = metrics::macro_prf1({0, 0, 1, 1}, {0, 1, 1, 1}, 2).macro.f1;
  const double kappa = metrics::cohen_kappa({0, 0, 1}, {0, 1, 1});
  const double iou = metrics::iou({0, 0, 2, 2}, {1, 1, 2, 2});
  const bool examples =
      std::abs(f1 - 11.0 / 15.0) < 1e-15 && std::abs(kappa - 0.4) < 1e-15 && std::abs(iou - 1.0 / 7.0) < 1e-15;
  const bool ok = examples && worst_macro <= 1e-12 && worst_kappa <= 1e-12 && worst_iou <= 1e-12;
  std::ostringstream os;
  os << std::setprecision(17) << "macro-F1 example=" << f1 << " kappa example=" << kappa << " IoU example=" << iou
     << " max|diff| macro=" << worst_macro << " kappa=" << worst_kappa << " iou=" << worst_iou;
  return {ok, os.str()};
}

// ---- 4, 5 ----

struct SynthSplits {
  std::vector<training::PreparedSample> train, dev, test;
  data::Vocabulary vocab;
};

SynthSplits prepare(const fs::path& dir, const training::TrainConfig& cfg) {
  const auto lo = training::load_options(cfg);
  const auto tr = data::load_dataset(dir / "train.jsonl", lo);
  const auto dv = data::load_dataset(dir / "dev.jsonl", lo);
  const auto te = data::load_dataset(dir / "test.jsonl", lo);
  SynthSplits s;
  s.vocab = data::Vocabulary::build(tr.samples, cfg.min_count);
  data::FeatureStore store(dir);
  s.train = training::prepare_samples(tr.samples, store, cfg);
  s.dev = training::prepare_samples(dv.samples, store, cfg);
  s.test = training::prepare_samples(te.samples, store, cfg);
  return s;
}

training::TrainConfig base_config(const Options& o) {
  training::TrainConfig cfg;  // lr 3e-5, batch 4, dropout 0.1, 12 heads, max_len 170
  cfg.epochs = o.epochs;
  if (o.lr > 0) cfg.learning_rate = o.lr;
  return cfg;
}

struct RunResult {
  double dev_f1 = 0, test_f1 = 0, seconds = 0;
};

RunResult train_once(const SynthSplits& s, const training::TrainConfig& cfg, std::uint64_t seed,
                     const fs::path& log_dir, const std::string& tag) {
  const auto t0 = Clock::now();
  const auto r = training::train(s.train, s.dev, cfg, s.vocab, seed);
  RunResult out;
  out.seconds = seconds_since(t0);
  out.dev_f1 = r.best_dev_f1;
  out.test_f1 = training::evaluate_model(r.best.model, s.test).report.macro.f1;
  if (!log_dir.empty()) {
    fs::create_directories(log_dir);
    std::ofstream os(log_dir / (tag + "_seed" + std::to_string(seed) + "_history.csv"));
    training::write_history_csv(os, r.history);
  }
  std::cerr << "  " << tag << " seed " << seed << ": best dev macro-F1 " << fmt(out.dev_f1) << " (epoch "
            << r.best_epoch << "), test macro-F1 " << fmt(out.test_f1) << ", " << fmt(out.seconds, 1) << "s\n";
  return out;
}

struct Learnability {
  Outcome outcome;
  RunResult full_seed1;
};

Learnability learnability(const fs::path& data_dir, const Options& o, const fs::path& log_dir) {
  const auto cfg = base_config(o);
  const auto s = prepare(data_dir, cfg);
  const auto run = train_once(s, cfg, 1, log_dir, "full");

  const auto majority = training::majority_labels(s.train);
  std::vector<std::array<int, data::kNumAspects>> gold, pred;
  for (const auto& x : s.test) {
    gold.push_back(x.targets);
    pred.push_back(majority);
  }
  const double base = metrics::evaluate_predictions(gold, pred, cfg.eval).macro.f1;
  const bool ok = run.test_f1 >= 0.90 && base <= 0.40 && run.seconds < 15 * 60.0;
  return {{ok, "held-out macro-F1=" + fmt(run.test_f1) + " (need >= 0.90) majority baseline=" + fmt(base) +
                   " (need <= 0.40) time=" + fmt(run.seconds, 1) + "s (limit 900s) lr=" +
                   fmt(cfg.learning_rate, 6) + " epochs=" + std::to_string(cfg.epochs) + " d=" +
                   std::to_string(cfg.dim) + " L=" + std::to_string(cfg.layers)},
          run};
}

Outcome ablation_direction(const fs::path& data_dir, const Options& o, const fs::path& log_dir,
                           const RunResult* full_seed1) {
  const auto cfg = base_config(o);
  auto geo = cfg;
  geo.ablation.no_geometric = true;
  auto aux = cfg;
  aux.ablation.no_aux_categories = true;
  const auto s_full = prepare(data_dir, cfg);
  const auto s_geo = prepare(data_dir, geo);
  const auto s_aux = prepare(data_dir, aux);
  double full = 0, no_geo = 0, no_aux = 0;
  for (std::uint64_t seed = 1; seed <= o.ablation_seeds; ++seed) {
    full += (seed == 1 && full_seed1) ? full_seed1->dev_f1 : train_once(s_full, cfg, seed, log_dir, "full").dev_f1;
    no_geo += train_once(s_geo, geo, seed, log_dir, "no_geometric").dev_f1;
    no_aux += train_once(s_aux, aux, seed, log_dir, "no_aux_categories").dev_f1;
  }
  const double n = static_cast<double>(o.ablation_seeds);
  full /= n;
  no_geo /= n;
  no_aux /= n;
  const bool ok = full >= no_geo && no_geo >= no_aux && full - no_aux >= 0.10;
  return {ok, "mean dev macro-F1 over " + std::to_string(o.ablation_seeds) + " seeds: full=" + fmt(full) +
                  " no_geometric=" + fmt(no_geo) + " no_aux_categories=" + fmt(no_aux) +
                  " (need full >= no_geometric >= no_aux_categories, full - no_aux_categories >= 0.10)"};
}

// ---- 6 ----

training::PreparedSample shrink(const training::PreparedSample& s) {
  auto out = s;
  const std::size_t real = s.visual.real_images();
  out.visual.images.resize(real);
  out.visual.image_mask.resize(real);
  for (auto& img : out.visual.images) {
    const auto j = static_cast<std::size_t>(std::count(img.roi_mask.begin(), img.roi_mask.end(), 0));
    img.roi_mask.resize(j);
  }
  return out;
}

Outcome invariance(const fs::path& data_dir) {
  training::TrainConfig cfg;
  cfg.init_std = 0.2;
  const auto s = prepare(data_dir, cfg);
  const auto model = training::FcmfModel::init(cfg, s.vocab, 11);
  num::Tape::Pause pause;
  double pad_diff = 0, perm_diff = 0;
  std::size_t checked = 0;
  for (const auto& x : s.train) {
    const std::size_t real = x.visual.real_images();
    if (real == 0) continue;
    const auto padded = num::softmax(training::forward_sample(model, x, {}));
    const auto bare = num::softmax(training::forward_sample(model, shrink(x), {}));
    for (std::size_t i = 0; i < padded.size(); ++i) pad_diff = std::max(pad_diff, std::abs(padded[i] - bare[i]));
    if (real >= 2) {
      auto p = x;
      std::reverse(p.visual.images.begin(), p.visual.images.begin() + static_cast<std::ptrdiff_t>(real));
      const auto permuted = num::softmax(training::forward_sample(model, p, {}));
      for (std::size_t i = 0; i < padded.size(); ++i)
        perm_diff = std::max(perm_diff, std::abs(padded[i] - permuted[i]));
    }
    if (++checked == 40) break;
  }
  const bool ok = checked > 0 && pad_diff <= 1e-12 && perm_diff < 1e-9;
  std::ostringstream os;
  os << "samples=" << checked << " padding max|diff|=" << pad_diff << " (tol 1e-12) permutation max|diff|=" << perm_diff
     << " (tol 1e-9)";
  return {ok, os.str()};
}

// ---- 7 ----

Outcome determinism(const fs::path& work) {
  const auto data = work / "det_data";
  std::ostringstream sink;
  auto cli = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  if (cli({"synth", "--seed", "7", "--n", "60", "--out", data.string()}) != 0) return {false, "synth failed"};
  const auto a = work / "det_a", b = work / "det_b";
  if (cli({"train", "--data", data.string(), "--out", a.string(), "--epochs", "3", "--seeds", "1,2", "--d", "24",
           "--heads", "12", "--layers", "1", "--quiet"}) != 0)
    return {false, "first train failed: " + sink.str()};
  if (cli({"train", "--data", data.string(), "--config", (a / "manifest.json").string(), "--out", b.string(),
           "--quiet"}) != 0)
    return {false, "second train failed: " + sink.str()};
  std::size_t files = 0, ckpt = 0, csv = 0;
  bool same = true;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    ++files;
    ckpt += e.path().filename() == "params.fcmt";
    csv += e.path().extension() == ".csv";
    same = same && fs::exists(b / rel) && testutil::slurp(e.path()) == testutil::slurp(b / rel);
  }
  same = same && testutil::same_tree(a, b);
  return {same && ckpt > 0 && csv > 0, std::to_string(files) + " files compared (" + std::to_string(ckpt) +
                                           " checkpoint blobs, " + std::to_string(csv) + " CSVs), byte-identical=" +
                                           (same ? "yes" : "no")};
}

// ---- 8 ----

Outcome category_heads(const fs::path& work) {
  data::SyntheticConfig sc;
  sc.seed = 7;
  sc.n_samples = 400;
  sc.noise = 0.0;
  const auto dir = work / "heads_data";
  const auto syn = data::generate_synthetic(sc, dir);
  data::FeatureStore store(dir);
  const auto heads = perception::train_category_heads(syn.train, store, {});
  const auto acc = perception::evaluate_category_heads(heads, syn.test, store);
  const bool ok = acc.image_accuracy == 1.0 && acc.roi_accuracy == 1.0 && acc.images > 0 && acc.rois > 0;
  return {ok, "held-out image accuracy=" + fmt(acc.image_accuracy) + " over " + std::to_string(acc.images) +
                  " images, RoI accuracy=" + fmt(acc.roi_accuracy) + " over " + std::to_string(acc.rois) + " RoIs"};
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  std::vector<int> only;
  CLI::App app("fcmf acceptance run");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--lr", o.lr, "Override the learning rate of criteria 4 and 5 (diagnostic)");
  app.add_option("--epochs", o.epochs, "Epochs for criteria 4 and 5")->check(CLI::Range(1, 50));
  app.add_option("--ablation-seeds", o.ablation_seeds, "Seeds averaged in criterion 5");
  app.add_option("--work", o.work, "Keep intermediate artifacts in this directory");
  CLI11_PARSE(app, argc, argv);
  o.only.insert(only.begin(), only.end());
  auto want = [&](int c) { return o.only.empty() || o.only.count(c) > 0; };

  std::optional<testutil::TempDir> tmp;
  fs::path work = o.work;
  if (work.empty()) {
    tmp.emplace("acceptance");
    work = tmp->path();
  }
  fs::create_directories(work);
  const fs::path logs = o.work.empty() ? fs::path() : work / "histories";

  const fs::path synth_dir = work / "synthetic";
  if (want(4) || want(5) || want(6)) {
    data::SyntheticConfig sc;  // seed 7, n 400, implicit_rate 0.3, noise 0.1
    data::generate_synthetic(sc, synth_dir);
  }
  if (o.lr > 0) std::cout << "note: learning rate overridden to " << o.lr << " for criteria 4 and 5\n";

  int passed = 0, ran = 0;
  auto report = [&](int id, const std::string& name, const Outcome& r) {
    ++ran;
    passed += r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << r.detail << std::endl;
  };
  auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!want(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "gradient integrity", gradient_integrity);
  guarded(2, "kernel oracles", kernel_oracles);
  guarded(3, "metric oracles", metric_oracles);
  std::optional<RunResult> full_seed1;
  guarded(4, "learnability", [&] {
    auto l = learnability(synth_dir, o, logs);
    full_seed1 = l.full_seed1;
    return l.outcome;
  });
  guarded(5, "ablation direction",
          [&] { return ablation_direction(synth_dir, o, logs, full_seed1 ? &*full_seed1 : nullptr); });
  guarded(6, "masking and order invariance", [&] { return invariance(synth_dir); });
  guarded(7, "determinism", [&] { return determinism(work); });
  guarded(8, "category heads", [&] { return category_heads(work); });

  std::cout << passed << "/" << ran << " criteria passed" << std::endl;
  return passed == ran ? 0 : 1;
}
