#include "fcmf/cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "fcmf/datamodel/dataset.hpp"
#include "fcmf/datamodel/stats.hpp"
#include "fcmf/datamodel/synthetic.hpp"
#include "fcmf/errors.hpp"
#include "fcmf/metrics/metrics.hpp"
#include "fcmf/training/training.hpp"

namespace fcmf::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string default_out() {
  if (const char* env = std::getenv("FCMF_OUT"); env && *env) return env;
  return "fcmf_out";
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot open config " + p.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

// A manifest written by this tool carries the resolved config under "config".
nlohmann::json config_section(const nlohmann::json& j) {
  if (j.is_object() && j.contains("config") && j.contains("command")) return j["config"];
  return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const ordered_json& config,
                    const ordered_json& extra = ordered_json::object()) {
  fs::create_directories(dir);
  ordered_json m;
  m["command"] = command;
  m["tool_version"] = FCMF_VERSION;
  m["config"] = config;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << m.dump(1) << '\n';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

template <typename T>
void override_if(const CLI::Option* opt, T& target, const T& value) {
  if (opt->count() > 0) target = value;
}

// ---- synth ----

struct SynthArgs {
  std::string config_path, out = default_out();
  std::uint64_t seed = 7;
  std::size_t n = 400;
  double implicit_rate = 0.3, noise = 0.1, image_rate = 0.4, irrelevant_rate = 0.2;
  CLI::Option *o_seed, *o_n, *o_implicit, *o_noise, *o_image, *o_irrelevant;
};

ordered_json synth_json(const data::SyntheticConfig& c) {
  return {{"seed", c.seed},
          {"n_samples", c.n_samples},
          {"implicit_rate", c.implicit_rate},
          {"noise", c.noise},
          {"image_rate", c.image_rate},
          {"irrelevant_image_rate", c.irrelevant_image_rate},
          {"dev_fraction", c.dev_fraction},
          {"test_fraction", c.test_fraction}};
}

int do_synth(const SynthArgs& a, std::ostream& out) {
  data::SyntheticConfig c;
  if (!a.config_path.empty()) {
    const auto j = config_section(read_json_file(a.config_path));
    c.seed = j.value("seed", c.seed);
    c.n_samples = j.value("n_samples", c.n_samples);
    c.implicit_rate = j.value("implicit_rate", c.implicit_rate);
    c.noise = j.value("noise", c.noise);
    c.image_rate = j.value("image_rate", c.image_rate);
    c.irrelevant_image_rate = j.value("irrelevant_image_rate", c.irrelevant_image_rate);
    c.dev_fraction = j.value("dev_fraction", c.dev_fraction);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
  }
  override_if(a.o_seed, c.seed, a.seed);
  override_if(a.o_n, c.n_samples, a.n);
  override_if(a.o_implicit, c.implicit_rate, a.implicit_rate);
  override_if(a.o_noise, c.noise, a.noise);
  override_if(a.o_image, c.image_rate, a.image_rate);
  override_if(a.o_irrelevant, c.irrelevant_image_rate, a.irrelevant_rate);
  const auto r = data::generate_synthetic(c, a.out);
  write_manifest(a.out, "synth", synth_json(c), {{"seed", c.seed}});
  out << "wrote " << r.train.size() << " train, " << r.dev.size() << " dev, " << r.test.size() << " test samples to "
      << a.out << '\n';
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string config_path, data_dir, heads_dir, out = default_out();
  double lr = 3e-5, dropout = 0.1, clip = 1.0;
  std::size_t batch = 4, epochs = 50, heads = 12, dim = 72, layers = 2, max_len = 170, threads = 1;
  std::vector<std::uint64_t> seeds;
  bool no_clip = false, no_aux = false, no_geo = false, no_visual = false, no_pre = false, flat = false,
       exclude_none = false, unshared_cm = false, quiet = false;
  CLI::Option *o_lr, *o_dropout, *o_clip, *o_batch, *o_epochs, *o_heads, *o_dim, *o_layers, *o_max_len, *o_seeds;
};

training::TrainConfig resolve_train_config(const TrainArgs& a) {
  training::TrainConfig c;
  if (!a.config_path.empty()) c = training::TrainConfig::from_json(config_section(read_json_file(a.config_path)), c);
  override_if(a.o_lr, c.learning_rate, a.lr);
  override_if(a.o_dropout, c.dropout, a.dropout);
  override_if(a.o_clip, c.clip_norm, a.clip);
  override_if(a.o_batch, c.batch_size, a.batch);
  override_if(a.o_epochs, c.epochs, a.epochs);
  override_if(a.o_heads, c.heads, a.heads);
  override_if(a.o_dim, c.dim, a.dim);
  override_if(a.o_layers, c.layers, a.layers);
  override_if(a.o_max_len, c.max_len, a.max_len);
  override_if(a.o_seeds, c.seeds, a.seeds);
  if (a.no_clip) c.clip_norm = 0.0;
  if (a.no_aux) c.ablation.no_aux_categories = true;
  if (a.no_geo) c.ablation.no_geometric = true;
  if (a.no_visual) c.ablation.no_visual_features = true;
  if (a.no_pre) c.ablation.no_preprocess = true;
  if (a.flat) c.eval.flat = true;
  if (a.exclude_none) c.eval.exclude_none = true;
  if (a.unshared_cm) c.share_cm = false;
  c.validate();
  return c;
}

void write_predictions_csv(std::ostream& os, const std::vector<training::PreparedSample>& samples,
                           const std::vector<training::Prediction>& preds) {
  os.precision(17);
  os << "id,aspect,gold,pred,p_none,p_negative,p_neutral,p_positive\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (auto a : data::kAspects) {
      const auto ai = data::index_of(a);
      os << samples[i].id << ',' << data::aspect_name(a) << ','
         << data::label_name(static_cast<data::SentimentLabel>(samples[i].targets[ai])) << ','
         << data::label_name(static_cast<data::SentimentLabel>(preds[i].labels[ai]));
      for (double p : preds[i].probs[ai]) os << ',' << p;
      os << '\n';
    }
  }
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = resolve_train_config(a);
  const fs::path data_dir = a.data_dir;
  const auto lo = training::load_options(cfg);
  const auto train_ds = data::load_dataset(data_dir / "train.jsonl", lo);
  const auto dev_ds = data::load_dataset(data_dir / "dev.jsonl", lo);
  std::optional<data::Dataset> test_ds;
  if (fs::exists(data_dir / "test.jsonl")) test_ds = data::load_dataset(data_dir / "test.jsonl", lo);

  std::optional<perception::CategoryHeads> heads;
  if (!a.heads_dir.empty()) heads = training::load_heads(a.heads_dir);
  const auto vocab = data::Vocabulary::build(train_ds.samples, cfg.min_count);

  std::vector<training::PreparedSample> train_set, dev_set, test_set;
  {
    data::FeatureStore store(data_dir);
    const auto* hp = heads ? &*heads : nullptr;
    train_set = training::prepare_samples(train_ds.samples, store, cfg, hp);
    dev_set = training::prepare_samples(dev_ds.samples, store, cfg, hp);
    if (test_ds) test_set = training::prepare_samples(test_ds->samples, store, cfg, hp);
  }

  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  ordered_json seeds_summary = ordered_json::array();
  double dev_sum = 0, test_sum = 0;
  for (auto seed : cfg.seeds) {
    const auto start = std::chrono::steady_clock::now();
    training::TrainHooks hooks;
    if (!a.quiet) {
      hooks.on_epoch = [&](std::size_t epoch, const std::vector<training::HistoryRow>& rows) {
        out << "seed " << seed << " epoch " << epoch;
        for (const auto& r : rows) out << "  " << r.split << " loss " << r.loss << " macro-F1 " << r.macro.f1;
        out << std::endl;
        return true;
      };
    }
    auto result = training::train(train_set, dev_set, cfg, vocab, seed, nullptr, hooks);
    if (heads) result.best.model.heads = result.last.model.heads = heads;
    const fs::path sd = out_dir / ("seed_" + std::to_string(seed));
    training::save_checkpoint(result.best, sd / "best");
    training::save_checkpoint(result.last, sd / "last");
    {
      auto os = open_out(sd / "history.csv");
      training::write_history_csv(os, result.history);
    }
    ordered_json entry{{"seed", seed}, {"best_epoch", result.best_epoch}, {"dev_macro_f1", result.best_dev_f1}};
    dev_sum += result.best_dev_f1;
    if (!test_set.empty()) {
      const auto ev = training::evaluate_model(result.best.model, test_set, a.threads);
      auto os = open_out(sd / "test_report.csv");
      metrics::write_report_csv(os, ev.report);
      entry["test_macro_f1"] = ev.report.macro.f1;
      test_sum += ev.report.macro.f1;
    }
    seeds_summary.push_back(entry);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "seed " << seed << ": best dev macro-F1 " << result.best_dev_f1 << " at epoch " << result.best_epoch
        << " (" << secs << " s)\n";
  }
  const double n = static_cast<double>(cfg.seeds.size());
  ordered_json summary{{"seeds", seeds_summary}, {"mean_dev_macro_f1", dev_sum / n}};
  if (!test_set.empty()) summary["mean_test_macro_f1"] = test_sum / n;
  {
    auto os = open_out(out_dir / "summary.json");
    os << summary.dump(1) << '\n';
  }
  write_manifest(out_dir, "train", cfg.to_json(),
                 {{"config_hash", cfg.hash()}, {"seed", cfg.seeds}, {"data", a.data_dir}, {"category_heads", a.heads_dir}});
  out << "mean dev macro-F1 over " << cfg.seeds.size() << " seed(s): " << dev_sum / n << '\n';
  if (!test_set.empty()) out << "mean test macro-F1: " << test_sum / n << '\n';
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, data_file, heads_dir, out = default_out();
  std::size_t threads = 1;
  bool flat = false, exclude_none = false;
};

int do_eval(const EvalArgs& a, std::ostream& out) {
  auto ckpt = training::load_checkpoint(a.checkpoint);
  auto& model = ckpt.model;
  if (a.flat) model.config.eval.flat = true;
  if (a.exclude_none) model.config.eval.exclude_none = true;
  if (!a.heads_dir.empty()) model.heads = training::load_heads(a.heads_dir);
  const auto ds = data::load_dataset(a.data_file, training::load_options(model.config));
  std::vector<training::PreparedSample> samples;
  {
    data::FeatureStore store(ds.base_dir);
    samples = training::prepare_samples(ds.samples, store, model.config, model.heads ? &*model.heads : nullptr);
  }
  const auto ev = training::evaluate_model(model, samples, a.threads);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "report.csv");
    metrics::write_report_csv(os, ev.report);
  }
  {
    auto os = open_out(dir / "report.json");
    auto j = metrics::report_to_json(ev.report);
    j["loss"] = ev.loss;
    os << j.dump(1) << '\n';
  }
  {
    auto os = open_out(dir / "predictions.csv");
    write_predictions_csv(os, samples, ev.predictions);
  }
  write_manifest(dir, "eval", model.config.to_json(),
                 {{"checkpoint", a.checkpoint}, {"data", a.data_file}, {"seed", ckpt.state.seed}});
  out << "macro P " << ev.report.macro.precision << " R " << ev.report.macro.recall << " F1 " << ev.report.macro.f1
      << " over " << ev.report.pairs << " (sample, aspect) pairs\n";
  return kExitOk;
}

// ---- gradcheck ----

struct GradArgs {
  training::ModelGradCheckOptions o;
  std::string out = default_out();
};

int do_gradcheck(const GradArgs& a, std::ostream& out) {
  const auto rep = training::model_grad_check(a.o);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "gradcheck.csv");
    os.precision(17);
    os << "param,index,analytic,numeric,rel_error\n";
    for (const auto& e : rep.entries)
      os << e.param << ',' << e.index << ',' << e.analytic << ',' << e.numeric << ',' << e.rel_error << '\n';
  }
  write_manifest(dir, "gradcheck",
                 {{"d", a.o.dim},
                  {"layers", a.o.layers},
                  {"heads", a.o.heads},
                  {"images", a.o.images},
                  {"rois", a.o.rois},
                  {"tokens", a.o.tokens},
                  {"samples", a.o.samples},
                  {"tol", a.o.tol},
                  {"eps", a.o.eps}},
                 {{"seed", a.o.seed}});
  if (!rep.diagnostic.empty()) out << rep.diagnostic << '\n';
  out << (rep.passed ? "PASS" : "FAIL") << " max relative error " << rep.max_rel_error << " over "
      << rep.entries.size() << " coordinates (tol " << a.o.tol << ")\n";
  return rep.passed ? kExitOk : kExitFailure;
}

// ---- agree ----

struct AgreeArgs {
  std::vector<std::string> files;
  std::string out = default_out();
};

int do_agree(const AgreeArgs& a, std::ostream& out) {
  std::vector<fs::path> files(a.files.begin(), a.files.end());
  const auto rounds = metrics::agreement_report(files);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "agreement.csv");
    metrics::write_agreement_csv(os, rounds);
  }
  write_manifest(dir, "agree", {{"files", a.files}, {"threshold", metrics::kAgreementThreshold}});
  metrics::write_agreement_csv(out, rounds);
  for (const auto& r : rounds)
    if (r.flagged) out << r.name << " is below " << metrics::kAgreementThreshold << '\n';
  return kExitOk;
}

// ---- stats ----

struct StatsArgs {
  std::vector<std::string> files;
  std::size_t top = 50;
  bool no_check = false;
  std::string out = default_out();
};

int do_stats(const StatsArgs& a, std::ostream& out) {
  data::LoadOptions lo;
  lo.check_features = !a.no_check;
  std::vector<data::MultimodalSample> all;
  for (const auto& f : a.files) {
    auto ds = data::load_dataset(f, lo);
    all.insert(all.end(), ds.samples.begin(), ds.samples.end());
  }
  const auto st = data::dataset_stats(all, a.top);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "stats.csv");
    data::write_stats_csv(os, st);
  }
  write_manifest(dir, "stats", {{"files", a.files}, {"top", a.top}, {"check_features", !a.no_check}});
  out << st.reviews << " reviews, mean length " << st.mean_tokens << ", aspects/review " << st.mean_aspects << ", "
      << st.images << " images, " << st.rois << " RoIs\n";
  return kExitOk;
}

// ---- heads-train ----

struct HeadsArgs {
  std::string data_dir, out = default_out();
  perception::HeadTrainOptions o;
};

int do_heads(const HeadsArgs& a, std::ostream& out) {
  const fs::path data_dir = a.data_dir;
  const auto train_ds = data::load_dataset(data_dir / "train.jsonl");
  std::optional<data::Dataset> dev_ds;
  if (fs::exists(data_dir / "dev.jsonl")) dev_ds = data::load_dataset(data_dir / "dev.jsonl");
  data::FeatureStore store(data_dir);
  std::vector<double> losses;
  const auto heads = perception::train_category_heads(train_ds.samples, store, a.o, &losses);
  const auto tr = perception::evaluate_category_heads(heads, train_ds.samples, store);
  const fs::path dir = a.out;
  ordered_json acc{{"train", {{"image_accuracy", tr.image_accuracy}, {"roi_accuracy", tr.roi_accuracy}}}};
  std::optional<perception::HeadAccuracy> dv;
  if (dev_ds) {
    dv = perception::evaluate_category_heads(heads, dev_ds->samples, store);
    acc["dev"] = {{"image_accuracy", dv->image_accuracy}, {"roi_accuracy", dv->roi_accuracy}};
  }
  training::save_heads(heads, dir,
                       {{"command", "heads-train"},
                        {"config", {{"epochs", a.o.epochs}, {"lr", a.o.lr}, {"seed", a.o.seed}}},
                        {"data", a.data_dir},
                        {"accuracy", acc}});
  {
    auto os = open_out(dir / "heads_history.csv");
    os.precision(17);
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) os << e + 1 << ',' << losses[e] << '\n';
  }
  {
    auto os = open_out(dir / "accuracy.csv");
    os << "split,image_accuracy,roi_accuracy,images,rois\n";
    os << "train," << tr.image_accuracy << ',' << tr.roi_accuracy << ',' << tr.images << ',' << tr.rois << '\n';
    if (dv) os << "dev," << dv->image_accuracy << ',' << dv->roi_accuracy << ',' << dv->images << ',' << dv->rois << '\n';
  }
  out << "image accuracy train " << tr.image_accuracy;
  if (dv) out << " dev " << dv->image_accuracy;
  out << "; RoI accuracy train " << tr.roi_accuracy;
  if (dv) out << " dev " << dv->roi_accuracy;
  out << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("FCMF multimodal aspect-category sentiment analysis", "fcmf");
  app.require_subcommand(1);
  app.set_version_flag("--version", FCMF_VERSION);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic dataset");
  synth->add_option("--config", sa.config_path, "JSON config or manifest");
  sa.o_seed = synth->add_option("--seed", sa.seed, "Random seed");
  sa.o_n = synth->add_option("--n", sa.n, "Number of samples");
  sa.o_implicit = synth->add_option("--implicit-rate", sa.implicit_rate, "Per-sample probability of an image-only aspect");
  sa.o_noise = synth->add_option("--noise", sa.noise, "Feature noise standard deviation");
  sa.o_image = synth->add_option("--image-rate", sa.image_rate, "Probability of an image for explicit aspects");
  sa.o_irrelevant = synth->add_option("--irrelevant-rate", sa.irrelevant_rate, "Probability of an unrelated image");
  synth->add_option("--out", sa.out, "Output directory")->envname("FCMF_OUT");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train FCMF on a dataset directory");
  train->add_option("--data", ta.data_dir, "Directory with train.jsonl, dev.jsonl and optional test.jsonl")->required();
  train->add_option("--config", ta.config_path, "JSON config or manifest");
  ta.o_lr = train->add_option("--lr", ta.lr, "Learning rate");
  ta.o_batch = train->add_option("--batch", ta.batch, "Batch size");
  ta.o_epochs = train->add_option("--epochs", ta.epochs, "Epochs");
  ta.o_seeds = train->add_option("--seeds", ta.seeds, "Seeds")->delimiter(',');
  ta.o_heads = train->add_option("--heads", ta.heads, "Attention heads");
  ta.o_dim = train->add_option("--d", ta.dim, "Hidden size");
  ta.o_layers = train->add_option("--layers", ta.layers, "Encoder layers");
  ta.o_max_len = train->add_option("--max-len", ta.max_len, "Maximum auxiliary sequence length");
  ta.o_dropout = train->add_option("--dropout", ta.dropout, "Dropout rate");
  ta.o_clip = train->add_option("--clip", ta.clip, "Gradient clipping global norm");
  train->add_flag("--no-clip", ta.no_clip, "Disable gradient clipping");
  train->add_flag("--no-aux-categories", ta.no_aux, "Ablation: empty image/RoI category segments");
  train->add_flag("--no-geometric", ta.no_geo, "Ablation: drop the geometric RoI branch");
  train->add_flag("--no-visual-features", ta.no_visual, "Ablation: drop image and RoI features");
  train->add_flag("--no-preprocess", ta.no_pre, "Ablation: whitespace split only");
  train->add_flag("--flat-macro", ta.flat, "Macro over pooled pairs instead of per aspect");
  train->add_flag("--exclude-none", ta.exclude_none, "Leave the none class out of macro averages");
  train->add_flag("--unshared-cm", ta.unshared_cm, "One CM-attention block per image slot");
  train->add_option("--category-heads", ta.heads_dir, "Category heads directory for samples without gold categories");
  train->add_option("--threads", ta.threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);
  train->add_flag("--quiet", ta.quiet, "No per-epoch progress");
  train->add_option("--out", ta.out, "Output directory")->envname("FCMF_OUT");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a JSONL file");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", ea.data_file, "Dataset JSONL file")->required();
  eval->add_option("--category-heads", ea.heads_dir, "Category heads directory");
  eval->add_option("--threads", ea.threads, "Worker threads")->check(CLI::PositiveNumber);
  eval->add_flag("--flat-macro", ea.flat, "Macro over pooled pairs instead of per aspect");
  eval->add_flag("--exclude-none", ea.exclude_none, "Leave the none class out of macro averages");
  eval->add_option("--out", ea.out, "Output directory")->envname("FCMF_OUT");

  GradArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  grad->add_option("--d", ga.o.dim, "Hidden size");
  grad->add_option("--layers", ga.o.layers, "Encoder layers");
  grad->add_option("--heads", ga.o.heads, "Attention heads");
  grad->add_option("--images", ga.o.images, "Image slots");
  grad->add_option("--rois", ga.o.rois, "RoIs per image");
  grad->add_option("--tokens", ga.o.tokens, "Context tokens");
  grad->add_option("--samples", ga.o.samples, "Sampled coordinates");
  grad->add_option("--tol", ga.o.tol, "Relative tolerance");
  grad->add_option("--eps", ga.o.eps, "Finite-difference step");
  grad->add_option("--seed", ga.o.seed, "Seed");
  grad->add_option("--out", ga.out, "Output directory")->envname("FCMF_OUT");

  AgreeArgs aa;
  auto* agree = app.add_subcommand("agree", "Inter-annotator agreement over paired round files");
  agree->add_option("files", aa.files, "Annotation files: round1_a round1_b [round2_a round2_b ...]")->required();
  agree->add_option("--out", aa.out, "Output directory")->envname("FCMF_OUT");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Dataset statistics and token frequencies");
  stats->add_option("files", st.files, "Dataset JSONL files")->required();
  stats->add_option("--top", st.top, "Number of most frequent tokens");
  stats->add_flag("--no-check-features", st.no_check, "Skip feature file validation");
  stats->add_option("--out", st.out, "Output directory")->envname("FCMF_OUT");

  HeadsArgs ha;
  auto* heads = app.add_subcommand("heads-train", "Train the image and RoI category heads");
  heads->add_option("--data", ha.data_dir, "Directory with train.jsonl and optional dev.jsonl")->required();
  heads->add_option("--epochs", ha.o.epochs, "Full-batch epochs");
  heads->add_option("--lr", ha.o.lr, "Adam learning rate");
  heads->add_option("--seed", ha.o.seed, "Seed");
  heads->add_option("--out", ha.out, "Output directory")->envname("FCMF_OUT");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << FCMF_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (*synth) return do_synth(sa, out);
    if (*train) return do_train(ta, out);
    if (*eval) return do_eval(ea, out);
    if (*grad) return do_gradcheck(ga, out);
    if (*agree) return do_agree(aa, out);
    if (*stats) return do_stats(st, out);
    if (*heads) return do_heads(ha, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitInvalid;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fcmf::cli
