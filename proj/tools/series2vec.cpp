// series2vec command-line front end: pretrain | probe | finetune | ablate | rank.
//
// Config precedence: command-line flags > --config JSON file > built-in
// defaults. Every command echoes its fully-resolved configuration to stdout
// and (when --out is set) to <out>/config.json; the echo is itself a valid
// --config file. Exit codes: 0 success, 2 usage/config error, 1 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "series2vec/series2vec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Opts {
  std::string data;
  std::string out;
  std::string config_path;
  std::string checkpoint;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  double gamma = 0.0;
  double lr = 1e-3;
  bool lr_set = false;  // finetune drops to 1e-4 unless lr came from flag/config
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t finetune_epochs = 10;
  std::size_t patience = 10;
  bool no_attention = false;
  bool no_spectral = false;
  bool no_temporal = false;
  bool no_normalize = false;
  std::vector<std::size_t> labels_per_class;
  std::size_t repeats = 5;
  double test_fraction = 0.3;
  std::vector<std::string> metrics_files;  // rank positionals
};

std::vector<std::size_t> parse_grid(const std::string& s) {
  std::vector<std::size_t> out;
  std::string tok;
  std::istringstream in(s);
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(tok, &pos);
    s2v::check_arg(pos == tok.size(), "labels-per-class: bad integer '" + tok + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  s2v::check_arg(!out.empty(), "labels-per-class: empty grid");
  return out;
}

void apply_config_file(Opts& o, const std::string& path) {
  std::ifstream in(path);
  s2v::check_arg(in.good(), "config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON (" +
                                std::string(e.what()) + ")");
  }
  s2v::check_arg(j.is_object(), "config: top level must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "command") continue;  // informational in echoes
      else if (key == "data") o.data = val.get<std::string>();
      else if (key == "out") o.out = val.get<std::string>();
      else if (key == "checkpoint") o.checkpoint = val.get<std::string>();
      else if (key == "seed") o.seed = val.get<std::uint64_t>();
      else if (key == "alpha") o.alpha = val.get<double>();
      else if (key == "gamma") o.gamma = val.get<double>();
      else if (key == "lr") { o.lr = val.get<double>(); o.lr_set = true; }
      else if (key == "batch_size") o.batch_size = val.get<std::size_t>();
      else if (key == "epochs") o.epochs = val.get<std::size_t>();
      else if (key == "finetune_epochs") o.finetune_epochs = val.get<std::size_t>();
      else if (key == "patience") o.patience = val.get<std::size_t>();
      else if (key == "no_attention") o.no_attention = val.get<bool>();
      else if (key == "no_spectral") o.no_spectral = val.get<bool>();
      else if (key == "no_temporal") o.no_temporal = val.get<bool>();
      else if (key == "no_normalize") o.no_normalize = val.get<bool>();
      else if (key == "labels_per_class") {
        o.labels_per_class.clear();
        if (val.is_string()) o.labels_per_class = parse_grid(val.get<std::string>());
        else for (const auto& g : val) o.labels_per_class.push_back(g.get<std::size_t>());
      }
      else if (key == "repeats") o.repeats = val.get<std::size_t>();
      else if (key == "test_fraction") o.test_fraction = val.get<double>();
      else if (key == "threads") continue;  // echoed for the record, env-controlled
      else throw std::invalid_argument("config: unknown field '" + key + "'");
    } catch (const json::exception&) {
      throw std::invalid_argument("config: field '" + key + "' has the wrong type");
    }
  }
}

json resolved_config(const Opts& o, const std::string& command) {
  json j;
  j["command"] = command;
  j["data"] = o.data;
  j["out"] = o.out;
  if (!o.checkpoint.empty()) j["checkpoint"] = o.checkpoint;
  j["seed"] = o.seed;
  j["alpha"] = o.alpha;
  j["gamma"] = o.gamma;
  j["lr"] = o.lr;
  j["batch_size"] = o.batch_size;
  j["epochs"] = o.epochs;
  if (command == "finetune") j["finetune_epochs"] = o.finetune_epochs;
  j["patience"] = o.patience;
  j["no_attention"] = o.no_attention;
  j["no_spectral"] = o.no_spectral;
  j["no_temporal"] = o.no_temporal;
  j["no_normalize"] = o.no_normalize;
  j["labels_per_class"] = o.labels_per_class;
  j["repeats"] = o.repeats;
  j["test_fraction"] = o.test_fraction;
  j["threads"] = s2v::worker_threads();
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  s2v::check_runtime(out.good(), "cannot write '" + path + "'");
  out << text;
  s2v::check_runtime(out.good(), "write failed for '" + path + "'");
}

void echo_config(const Opts& o, const std::string& command) {
  const std::string doc = resolved_config(o, command).dump(2) + "\n";
  std::cout << doc;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(o.out + "/config.json", doc);
  }
}

/// `synth:<kind>[:key=value,...]` with keys classes, per_class, length,
/// channels, noise, seed (seed defaults to --seed).
s2v::Dataset make_synth_from_spec(const std::string& spec, std::uint64_t default_seed) {
  std::vector<std::string> parts;
  std::string tok;
  std::istringstream in(spec);
  while (std::getline(in, tok, ':')) parts.push_back(tok);
  s2v::check_arg(parts.size() >= 2 && parts.size() <= 3 && parts[0] == "synth",
                 "data: bad synthetic spec '" + spec +
                     "' (expected synth:<kind>[:key=value,...])");
  const s2v::SyntheticKind kind = s2v::synthetic_kind_from_string(parts[1]);
  std::size_t classes = 3, per_class = 100, length = 64, channels = 1;
  double noise = 0.1;
  std::uint64_t seed = default_seed;
  if (parts.size() == 3) {
    std::istringstream kv(parts[2]);
    while (std::getline(kv, tok, ',')) {
      const auto eq = tok.find('=');
      s2v::check_arg(eq != std::string::npos, "data: bad synthetic option '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "classes") classes = std::stoull(val);
        else if (key == "per_class") per_class = std::stoull(val);
        else if (key == "length") length = std::stoull(val);
        else if (key == "channels") channels = std::stoull(val);
        else if (key == "noise") noise = std::stod(val);
        else if (key == "seed") seed = std::stoull(val);
        else throw std::invalid_argument("data: unknown synthetic option '" + key + "'");
      } catch (const std::invalid_argument&) {
        throw;
      } catch (const std::exception&) {
        throw std::invalid_argument("data: bad value for synthetic option '" + key + "'");
      }
    }
  }
  return s2v::make_synthetic(kind, classes, per_class, length, channels, noise, seed);
}

s2v::Dataset resolve_dataset(const Opts& o) {
  s2v::check_arg(!o.data.empty(), "data: --data is required");
  s2v::Dataset ds;
  if (o.data.rfind("synth:", 0) == 0) {
    ds = make_synth_from_spec(o.data, o.seed);
    if (!o.no_normalize) s2v::znormalize(ds);
  } else if (fs::is_directory(o.data)) {
    ds = s2v::load_csv_dir(o.data, !o.no_normalize);
  } else if (fs::exists(o.data) && o.data.size() > 3 &&
             o.data.substr(o.data.size() - 3) == ".ts") {
    ds = s2v::load_ts_sktime(o.data, !o.no_normalize);
  } else {
    throw std::invalid_argument(
        "data: '" + o.data +
        "' is not a dataset directory, a .ts file, or a synth: spec");
  }
  return ds;
}

s2v::TrainConfig train_config(const Opts& o) {
  s2v::TrainConfig tc;
  tc.batch_size = o.batch_size;
  tc.epochs = o.epochs;
  tc.lr = o.lr;
  tc.patience = o.patience;
  tc.seed = o.seed;
  tc.use_attention = !o.no_attention;
  tc.use_spectral = !o.no_spectral;
  tc.use_temporal = !o.no_temporal;
  tc.dtw.alpha = o.alpha;
  tc.dtw.gamma = o.gamma;
  tc.validate();
  return tc;
}

std::string checkpoint_prefix(const std::string& arg) {
  s2v::check_arg(!arg.empty(), "checkpoint: --checkpoint is required");
  std::string p = arg;
  for (const char* ext : {".bin", ".json"}) {
    const std::string e(ext);
    if (p.size() > e.size() && p.substr(p.size() - e.size()) == e)
      p = p.substr(0, p.size() - e.size());
  }
  s2v::check_arg(fs::exists(p + ".bin") && fs::exists(p + ".json"),
                 "checkpoint: missing '" + p + ".bin' or '" + p + ".json'");
  return p;
}

int cmd_pretrain(const Opts& o) {
  s2v::check_arg(!o.out.empty(), "out: --out is required for pretrain");
  const s2v::Dataset ds = resolve_dataset(o);
  const s2v::TrainConfig tc = train_config(o);
  echo_config(o, "pretrain");
  s2v::PretrainResult res = s2v::pretrain(ds, tc);
  s2v::save_checkpoint(res.state, o.out + "/checkpoint");
  s2v::save_history(res.history, o.out + "/history.json");
  std::cout << "pretrained " << res.history.size() << " epoch(s) on " << ds.size()
            << " samples";
  if (res.best_epoch) {
    std::cout << "; best epoch " << res.best_epoch << " (val loss "
              << res.best_val_loss << ")";
  }
  std::cout << "\nwrote " << o.out << "/checkpoint.{bin,json} and " << o.out
            << "/history.json\n";
  return 0;
}

json probe_json(const s2v::ProbeResult& r, const std::string& dataset_name,
                std::size_t n_train, std::size_t n_test) {
  json j;
  j["dataset"] = dataset_name;
  j["accuracy"] = r.accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  const std::size_t C = r.per_class_accuracy.size();
  json conf = json::array();
  for (std::size_t a = 0; a < C; ++a) {
    json row = json::array();
    for (std::size_t b = 0; b < C; ++b) row.push_back(r.confusion[a * C + b]);
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["probe_iterations"] = r.iterations;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  return j;
}

int cmd_probe(const Opts& o) {
  s2v::check_arg(!o.out.empty(), "out: --out is required for probe");
  const std::string prefix = checkpoint_prefix(o.checkpoint);
  s2v::Dataset ds = resolve_dataset(o);
  s2v::check_arg(ds.labels.has_value(), "probe: dataset has no labels");
  echo_config(o, "probe");
  s2v::ModelState state = s2v::load_checkpoint(prefix);
  s2v::check_arg(ds.channels() == state.input_channels,
                 "probe: dataset has " + std::to_string(ds.channels()) +
                     " channels but the checkpoint expects " +
                     std::to_string(state.input_channels));
  s2v::check_arg(o.test_fraction > 0.0 && o.test_fraction < 1.0,
                 "test_fraction: must lie in (0, 1)");
  const s2v::SplitResult sp =
      s2v::split(ds, 1.0 - o.test_fraction, 0.0, o.test_fraction, o.seed, true);
  s2v::check_arg(sp.train.size() >= 1 && sp.test.size() >= 1,
                 "probe: split produced an empty train or test set");
  const s2v::NdArray train_reps = s2v::extract_representations(sp.train, state);
  const s2v::NdArray test_reps = s2v::extract_representations(sp.test, state);
  const s2v::ProbeResult pr = s2v::linear_probe(train_reps, *sp.train.labels,
                                                test_reps, *sp.test.labels);
  json j = probe_json(pr, ds.meta.name, sp.train.size(), sp.test.size());
  write_text(o.out + "/metrics.json", j.dump(2) + "\n");
  std::cout << "probe accuracy " << pr.accuracy << " (" << sp.train.size()
            << " train, " << sp.test.size() << " test)\nwrote " << o.out
            << "/metrics.json\n";
  if (!o.labels_per_class.empty()) {
    const auto curve =
        s2v::low_label_curve(train_reps, *sp.train.labels, test_reps,
                             *sp.test.labels, o.labels_per_class, o.repeats, o.seed);
    std::ostringstream csv;
    csv << "labels_per_class,mean_accuracy,std_accuracy\n";
    for (const auto& pt : curve)
      csv << pt.n_per_class << ',' << pt.mean_accuracy << ',' << pt.std_accuracy
          << '\n';
    write_text(o.out + "/low_label_curve.csv", csv.str());
    std::cout << "wrote " << o.out << "/low_label_curve.csv (" << curve.size()
              << " grid points x " << o.repeats << " repeats)\n";
  }
  return 0;
}

int cmd_finetune(const Opts& o) {
  s2v::check_arg(!o.out.empty(), "out: --out is required for finetune");
  const std::string prefix = checkpoint_prefix(o.checkpoint);
  s2v::Dataset ds = resolve_dataset(o);
  s2v::check_arg(ds.labels.has_value(), "finetune: dataset has no labels");
  echo_config(o, "finetune");
  const s2v::ModelState start = s2v::load_checkpoint(prefix);
  s2v::check_arg(ds.channels() == start.input_channels,
                 "finetune: dataset has " + std::to_string(ds.channels()) +
                     " channels but the checkpoint expects " +
                     std::to_string(start.input_channels));
  s2v::check_arg(o.test_fraction > 0.0 && o.test_fraction < 1.0,
                 "test_fraction: must lie in (0, 1)");
  const s2v::SplitResult sp =
      s2v::split(ds, 1.0 - o.test_fraction, 0.0, o.test_fraction, o.seed, true);
  s2v::check_arg(sp.train.size() >= 1 && sp.test.size() >= 1,
                 "finetune: split produced an empty train or test set");
  s2v::FinetuneResult ft = s2v::finetune(sp.train, start, o.finetune_epochs, o.lr,
                                         o.seed, o.batch_size);

  // Head accuracy on the held-out split.
  const s2v::NdArray test_reps = s2v::extract_representations(sp.test, ft.state);
  const std::size_t C = ft.head_b.numel(), D = test_reps.size(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sp.test.size(); ++i) {
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      double s = ft.head_b[c];
      for (std::size_t k = 0; k < D; ++k) s += test_reps[i * D + k] * ft.head_w[k * C + c];
      if (s > best_v) { best_v = s; best = c; }
    }
    if (best == (*sp.test.labels)[i]) ++hits;
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(sp.test.size());

  s2v::save_checkpoint(ft.state, o.out + "/checkpoint");
  json j;
  j["dataset"] = ds.meta.name;
  j["accuracy"] = acc;
  j["epochs"] = o.finetune_epochs;
  j["epoch_losses"] = ft.epoch_losses;
  j["n_train"] = sp.train.size();
  j["n_test"] = sp.test.size();
  write_text(o.out + "/metrics.json", j.dump(2) + "\n");
  {
    json h;
    h["weights_shape"] = {D, C};
    h["weights"] = std::vector<double>(ft.head_w.data().begin(), ft.head_w.data().end());
    h["bias"] = std::vector<double>(ft.head_b.data().begin(), ft.head_b.data().end());
    write_text(o.out + "/head.json", h.dump() + "\n");
  }
  std::cout << "finetune accuracy " << acc << " after " << o.finetune_epochs
            << " epoch(s)\nwrote " << o.out << "/checkpoint.{bin,json}, metrics.json, head.json\n";
  return 0;
}

int cmd_ablate(const Opts& o) {
  s2v::check_arg(!o.out.empty(), "out: --out is required for ablate");
  s2v::check_arg(!o.no_attention && !o.no_spectral && !o.no_temporal,
                 "ablate: --no-attention/--no-spectral/--no-temporal are chosen by "
                 "the ablation grid and cannot be forced");
  s2v::Dataset ds = resolve_dataset(o);
  s2v::check_arg(ds.labels.has_value(), "ablate: dataset has no labels");
  train_config(o);  // surface config problems before the first run
  echo_config(o, "ablate");
  s2v::check_arg(o.test_fraction > 0.0 && o.test_fraction < 1.0,
                 "test_fraction: must lie in (0, 1)");
  const s2v::SplitResult sp =
      s2v::split(ds, 1.0 - o.test_fraction, 0.0, o.test_fraction, o.seed, true);
  s2v::check_arg(sp.train.size() >= 2 && sp.test.size() >= 1,
                 "ablate: split produced an unusable train or test set");

  struct Variant {
    const char* key;
    bool att, spec, temp;
  };
  const Variant variants[] = {{"full", true, true, true},
                              {"no_attention", false, true, true},
                              {"no_spectral", true, false, true},
                              {"no_temporal", true, true, false}};
  json table;
  std::cout << "variant         accuracy   (seed " << o.seed << ")\n";
  for (const Variant& v : variants) {
    s2v::TrainConfig tc = train_config(o);
    tc.use_attention = v.att;
    tc.use_spectral = v.spec;
    tc.use_temporal = v.temp;
    s2v::PretrainResult res = s2v::pretrain(sp.train, tc);
    const s2v::NdArray train_reps = s2v::extract_representations(sp.train, res.state);
    const s2v::NdArray test_reps = s2v::extract_representations(sp.test, res.state);
    const double acc = s2v::linear_probe(train_reps, *sp.train.labels, test_reps,
                                         *sp.test.labels)
                           .accuracy;
    table[v.key] = acc;
    std::ostringstream line;
    line.setf(std::ios::left);
    line.width(16);
    line << v.key;
    std::cout << line.str() << acc << '\n';
  }
  write_text(o.out + "/ablation.json", table.dump(2) + "\n");
  std::cout << "wrote " << o.out << "/ablation.json\n";
  return 0;
}

int cmd_rank(const Opts& o) {
  s2v::check_arg(o.metrics_files.size() >= 2, "rank: need at least 2 metrics files");
  std::vector<std::string> models;
  std::vector<std::vector<std::string>> keys_per_model;
  std::vector<json> docs;
  for (const std::string& path : o.metrics_files) {
    std::ifstream in(path);
    s2v::check_arg(in.good(), "rank: cannot open '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw std::invalid_argument("rank: '" + path + "' is not valid JSON (" +
                                  std::string(e.what()) + ")");
    }
    s2v::check_arg(j.is_object() && j.contains("model") && j.contains("datasets") &&
                       j["datasets"].is_object(),
                   "rank: '" + path + "' must look like "
                   "{\"model\": name, \"datasets\": {name: accuracy, ...}}");
    models.push_back(j["model"].get<std::string>());
    std::vector<std::string> keys;
    for (const auto& [k, v] : j["datasets"].items()) {
      (void)v;
      keys.push_back(k);
    }
    std::sort(keys.begin(), keys.end());
    keys_per_model.push_back(std::move(keys));
    docs.push_back(std::move(j));
  }
  for (std::size_t i = 1; i < keys_per_model.size(); ++i)
    s2v::check_arg(keys_per_model[i] == keys_per_model[0],
                   "rank: dataset keys in '" + o.metrics_files[i] +
                       "' do not match '" + o.metrics_files[0] + "'");
  const std::vector<std::string>& datasets = keys_per_model[0];
  std::vector<std::vector<double>> acc(models.size(),
                                       std::vector<double>(datasets.size()));
  for (std::size_t m = 0; m < models.size(); ++m)
    for (std::size_t d = 0; d < datasets.size(); ++d)
      acc[m][d] = docs[m]["datasets"][datasets[d]].get<double>();
  const std::vector<double> ranks = s2v::average_rank(acc);

  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
  std::cout << "model                     mean_rank\n";
  json out_models = json::array();
  for (std::size_t i : order) {
    std::ostringstream line;
    line.setf(std::ios::left);
    line.width(26);
    line << models[i];
    std::cout << line.str() << ranks[i] << '\n';
    json jm;
    jm["model"] = models[i];
    jm["mean_rank"] = ranks[i];
    out_models.push_back(jm);
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    json j;
    j["datasets"] = datasets;
    j["models"] = out_models;
    write_text(o.out + "/rank.json", j.dump(2) + "\n");
    std::cout << "wrote " << o.out << "/rank.json\n";
  }
  return 0;
}

/// Peek at argv for --config so file values load before flag parsing
/// (flags must win over the file).
std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

void add_shared_flags(CLI::App* cmd, Opts& o, bool wants_data) {
  if (wants_data)
    cmd->add_option("--data", o.data,
                    "dataset: CSV directory, .ts file, or synth:<kind>[:k=v,...]");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "root seed for all randomness");
  cmd->add_option("--config", o.config_path, "JSON config file (flags override it)");
  cmd->add_option("--alpha", o.alpha, "Gaussian weighting strength for Soft-DTW");
  cmd->add_option("--gamma", o.gamma, "Soft-DTW smoothing temperature (0 = hard min)");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_flag("--no-attention", o.no_attention, "drop the batch-attention block");
  cmd->add_flag("--no-spectral", o.no_spectral, "drop the frequency branch");
  cmd->add_flag("--no-temporal", o.no_temporal, "drop the time branch");
  cmd->add_flag("--no-normalize", o.no_normalize, "skip per-sample z-normalization");
  cmd->add_option("--lr", o.lr, "learning rate");
}

int run(int argc, char** argv) {
  Opts o;
  if (auto cfg = find_config_arg(argc, argv)) apply_config_file(o, *cfg);

  CLI::App app{"series2vec: similarity-preserving self-supervised time-series representations"};
  app.require_subcommand(1);

  std::string grid_arg;
  auto* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  add_shared_flags(pre, o, true);
  pre->add_option("--epochs", o.epochs, "pretraining epochs");
  pre->add_option("--patience", o.patience, "early-stopping patience (epochs)");

  auto* prb = app.add_subcommand("probe", "linear probe on frozen representations");
  add_shared_flags(prb, o, true);
  prb->add_option("--checkpoint", o.checkpoint, "checkpoint prefix (or .bin/.json path)");
  prb->add_option("--labels-per-class", grid_arg,
                  "comma-separated low-label grid, e.g. 5,10,20,50,100");
  prb->add_option("--repeats", o.repeats, "resamples per grid point");
  prb->add_option("--test-fraction", o.test_fraction, "held-out fraction for the probe");

  auto* fin = app.add_subcommand("finetune", "supervised fine-tuning from a checkpoint");
  add_shared_flags(fin, o, true);
  fin->add_option("--checkpoint", o.checkpoint, "checkpoint prefix (or .bin/.json path)");
  fin->add_option("--epochs", o.finetune_epochs, "fine-tuning epochs");
  fin->add_option("--test-fraction", o.test_fraction, "held-out fraction for evaluation");

  auto* abl = app.add_subcommand("ablate", "full / no_attention / no_spectral / no_temporal");
  add_shared_flags(abl, o, true);
  abl->add_option("--epochs", o.epochs, "pretraining epochs per variant");
  abl->add_option("--patience", o.patience, "early-stopping patience (epochs)");
  abl->add_option("--test-fraction", o.test_fraction, "held-out fraction for the probes");

  auto* rnk = app.add_subcommand("rank", "average rank across per-model metrics files");
  rnk->add_option("--out", o.out, "output directory");
  rnk->add_option("files", o.metrics_files,
                  "metrics JSONs: {\"model\": name, \"datasets\": {name: accuracy}}");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!grid_arg.empty()) o.labels_per_class = parse_grid(grid_arg);

  if (pre->parsed()) return cmd_pretrain(o);
  if (prb->parsed()) return cmd_probe(o);
  if (fin->parsed()) {
    if (fin->count("--lr") > 0) o.lr_set = true;
    if (!o.lr_set) o.lr = 1e-4;  // gentler default for supervised fine-tuning
    return cmd_finetune(o);
  }
  if (abl->parsed()) return cmd_ablate(o);
  if (rnk->parsed()) return cmd_rank(o);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
