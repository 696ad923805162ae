// End-to-end checks of the command-line tool: spawns the real binary
// (path injected as S2V_CLI_PATH) against tiny synthetic datasets.
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTinyData = "synth:tones:classes=2,per_class=8,length=16";

struct CliDir {
  fs::path dir;
  explicit CliDir(const std::string& tag) {
    dir = fs::temp_directory_path() /
          ("s2v_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~CliDir() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const {
    return (dir / leaf).string();
  }
};

int run_cli(const std::string& args, const std::string& log,
            const std::string& env_prefix = "") {
  const std::string cmd =
      env_prefix + "\"" + S2V_CLI_PATH + "\" " + args + " > \"" + log + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string pretrain_args(const std::string& out_dir,
                          const std::string& extra = "") {
  return std::string("pretrain --data ") + kTinyData +
         " --out \"" + out_dir + "\" --epochs 2 --batch-size 8 --seed 3" + extra;
}

}  // namespace

TEST_CASE("cli: pretrain writes checkpoint, history, and config echo", "[cli]") {
  CliDir tmp("pretrain");
  REQUIRE(run_cli(pretrain_args(tmp / "run1"), tmp / "log1.txt") == 0);
  for (const char* f : {"checkpoint.bin", "checkpoint.json", "history.json",
                        "config.json"})
    REQUIRE(fs::exists(fs::path(tmp / "run1") / f));

  const json cfg = slurp_json(tmp / "run1/config.json");
  REQUIRE(cfg.at("command") == "pretrain");
  REQUIRE(cfg.at("seed") == 3);
  REQUIRE(cfg.at("epochs") == 2);

  const json hist = slurp_json(tmp / "run1/history.json");
  REQUIRE(hist.is_array());
  REQUIRE(hist.size() >= 1);
  REQUIRE(hist[0].contains("train_loss"));
  REQUIRE(hist[0].contains("val_loss"));

  SECTION("reruns and thread counts do not change a single byte") {
    REQUIRE(run_cli(pretrain_args(tmp / "run2"), tmp / "log2.txt") == 0);
    REQUIRE(slurp(tmp / "run1/checkpoint.bin") == slurp(tmp / "run2/checkpoint.bin"));
    REQUIRE(slurp(tmp / "run1/history.json") == slurp(tmp / "run2/history.json"));

    REQUIRE(run_cli(pretrain_args(tmp / "run4"), tmp / "log4.txt",
                    "SERIES2VEC_THREADS=4 ") == 0);
    REQUIRE(slurp(tmp / "run1/checkpoint.bin") == slurp(tmp / "run4/checkpoint.bin"));
  }

  SECTION("a different seed changes the checkpoint") {
    REQUIRE(run_cli(std::string("pretrain --data ") + kTinyData + " --out \"" +
                        (tmp / "run5") + "\" --epochs 2 --batch-size 8 --seed 4",
                    tmp / "log5.txt") == 0);
    REQUIRE(slurp(tmp / "run1/checkpoint.bin") != slurp(tmp / "run5/checkpoint.bin"));
  }
}

TEST_CASE("cli: pairwise loss rejects batch size 1", "[cli]") {
  CliDir tmp("batch1");
  REQUIRE(run_cli(std::string("pretrain --data ") + kTinyData + " --out \"" +
                      (tmp / "out") + "\" --epochs 1 --batch-size 1",
                  tmp / "log.txt") == 2);
  const std::string log = slurp(tmp / "log.txt");
  REQUIRE(log.find("pairwise") != std::string::npos);
}

TEST_CASE("cli: probe evaluates a checkpoint and writes metrics", "[cli]") {
  CliDir tmp("probe");
  REQUIRE(run_cli(pretrain_args(tmp / "pre"), tmp / "log_pre.txt") == 0);
  const std::string ckpt = tmp / "pre/checkpoint";

  REQUIRE(run_cli(std::string("probe --data ") + kTinyData + " --checkpoint \"" +
                      ckpt + "\" --out \"" + (tmp / "probe1") + "\" --seed 3",
                  tmp / "log_probe.txt") == 0);
  const json m = slurp_json(tmp / "probe1/metrics.json");
  REQUIRE(m.at("accuracy").get<double>() >= 0.0);
  REQUIRE(m.at("accuracy").get<double>() <= 1.0);
  REQUIRE(m.at("n_train").get<int>() + m.at("n_test").get<int>() == 16);
  REQUIRE(m.at("confusion").size() == m.at("per_class_accuracy").size());

  SECTION("low-label grid adds a csv") {
    REQUIRE(run_cli(std::string("probe --data ") + kTinyData +
                        " --checkpoint \"" + ckpt + "\" --out \"" +
                        (tmp / "probe2") +
                        "\" --seed 3 --labels-per-class 2,3 --repeats 2",
                    tmp / "log_curve.txt") == 0);
    const std::string csv = slurp(tmp / "probe2/low_label_curve.csv");
    REQUIRE(csv.rfind("labels_per_class,mean_accuracy,std_accuracy\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
    REQUIRE(csv.find("\n2,") != std::string::npos);
    REQUIRE(csv.find("\n3,") != std::string::npos);
  }

  SECTION("accepting .bin/.json spellings of the prefix") {
    REQUIRE(run_cli(std::string("probe --data ") + kTinyData +
                        " --checkpoint \"" + ckpt + ".bin\" --out \"" +
                        (tmp / "probe3") + "\" --seed 3",
                    tmp / "log_bin.txt") == 0);
  }

  SECTION("missing checkpoint is a usage error") {
    REQUIRE(run_cli(std::string("probe --data ") + kTinyData +
                        " --checkpoint \"" + (tmp / "nope") + "\" --out \"" +
                        (tmp / "probe4") + "\" --seed 3",
                    tmp / "log_missing.txt") == 2);
  }

  SECTION("channel mismatch is a usage error") {
    REQUIRE(run_cli(std::string("probe --data ") +
                        "synth:tones:classes=2,per_class=8,length=16,channels=2" +
                        " --checkpoint \"" + ckpt + "\" --out \"" +
                        (tmp / "probe5") + "\" --seed 3",
                    tmp / "log_chan.txt") == 2);
    const std::string log = slurp(tmp / "log_chan.txt");
    REQUIRE(log.find("channels") != std::string::npos);
  }
}

TEST_CASE("cli: finetune trains a head and defaults to the gentler lr", "[cli]") {
  CliDir tmp("finetune");
  REQUIRE(run_cli(pretrain_args(tmp / "pre"), tmp / "log_pre.txt") == 0);
  const std::string ckpt = tmp / "pre/checkpoint";

  REQUIRE(run_cli(std::string("finetune --data ") + kTinyData +
                      " --checkpoint \"" + ckpt + "\" --out \"" + (tmp / "ft") +
                      "\" --epochs 2 --seed 3",
                  tmp / "log_ft.txt") == 0);
  for (const char* f : {"checkpoint.bin", "checkpoint.json", "metrics.json",
                        "head.json", "config.json"})
    REQUIRE(fs::exists(fs::path(tmp / "ft") / f));
  const json cfg = slurp_json(tmp / "ft/config.json");
  REQUIRE(cfg.at("lr").get<double>() == 1e-4);
  REQUIRE(cfg.at("finetune_epochs") == 2);
  const json m = slurp_json(tmp / "ft/metrics.json");
  REQUIRE(m.at("epoch_losses").size() == 2);
  REQUIRE(m.at("accuracy").get<double>() >= 0.0);
  REQUIRE(m.at("accuracy").get<double>() <= 1.0);

  SECTION("an explicit --lr wins over the finetune default") {
    REQUIRE(run_cli(std::string("finetune --data ") + kTinyData +
                        " --checkpoint \"" + ckpt + "\" --out \"" + (tmp / "ft2") +
                        "\" --epochs 1 --seed 3 --lr 0.002",
                    tmp / "log_ft2.txt") == 0);
    REQUIRE(slurp_json(tmp / "ft2/config.json").at("lr").get<double>() == 0.002);
  }
}

TEST_CASE("cli: ablate runs the four fixed variants", "[cli]") {
  CliDir tmp("ablate");
  REQUIRE(run_cli(std::string("ablate --data ") +
                      "synth:tones:classes=2,per_class=6,length=16" +
                      " --out \"" + (tmp / "abl") +
                      "\" --epochs 1 --batch-size 4 --seed 1",
                  tmp / "log.txt") == 0);
  const json a = slurp_json(tmp / "abl/ablation.json");
  REQUIRE(a.size() == 4);
  for (const char* key : {"full", "no_attention", "no_spectral", "no_temporal"}) {
    REQUIRE(a.contains(key));
    REQUIRE(a.at(key).get<double>() >= 0.0);
    REQUIRE(a.at(key).get<double>() <= 1.0);
  }

  SECTION("forcing an ablation flag on the grid command is rejected") {
    REQUIRE(run_cli(std::string("ablate --data ") + kTinyData + " --out \"" +
                        (tmp / "abl2") + "\" --epochs 1 --no-spectral",
                    tmp / "log2.txt") == 2);
  }
}

TEST_CASE("cli: rank orders models by mean rank", "[cli]") {
  CliDir tmp("rank");
  write_file(tmp / "a.json",
             R"({"model": "alpha", "datasets": {"d1": 0.9, "d2": 0.9}})");
  write_file(tmp / "b.json",
             R"({"model": "beta", "datasets": {"d2": 0.85, "d1": 0.7}})");
  REQUIRE(run_cli("rank --out \"" + (tmp / "out") + "\" \"" + (tmp / "a.json") +
                      "\" \"" + (tmp / "b.json") + "\"",
                  tmp / "log.txt") == 0);
  const json r = slurp_json(tmp / "out/rank.json");
  REQUIRE(r.at("models").size() == 2);
  REQUIRE(r.at("models")[0].at("model") == "alpha");
  REQUIRE(r.at("models")[0].at("mean_rank").get<double>() == 1.0);
  REQUIRE(r.at("models")[1].at("mean_rank").get<double>() == 2.0);

  SECTION("dataset key sets must agree") {
    write_file(tmp / "c.json",
               R"({"model": "gamma", "datasets": {"d1": 0.5, "d3": 0.5}})");
    REQUIRE(run_cli("rank \"" + (tmp / "a.json") + "\" \"" + (tmp / "c.json") +
                        "\"",
                    tmp / "log2.txt") == 2);
  }

  SECTION("a single file cannot be ranked") {
    REQUIRE(run_cli("rank \"" + (tmp / "a.json") + "\"", tmp / "log3.txt") == 2);
  }
}

TEST_CASE("cli: config file loads under flags, and the echo round-trips",
          "[cli]") {
  CliDir tmp("config");
  write_file(tmp / "cfg.json", std::string(R"({
  "alpha": 0.25,
  "seed": 9,
  "epochs": 1,
  "batch_size": 8,
  "data": ")") + kTinyData + "\"\n}\n");

  // flag --seed must beat the file's seed; everything else comes from the file
  REQUIRE(run_cli("pretrain --config \"" + (tmp / "cfg.json") + "\" --seed 4 --out \"" +
                      (tmp / "run") + "\"",
                  tmp / "log.txt") == 0);
  const json cfg = slurp_json(tmp / "run/config.json");
  REQUIRE(cfg.at("seed") == 4);
  REQUIRE(cfg.at("alpha").get<double>() == 0.25);
  REQUIRE(cfg.at("epochs") == 1);
  REQUIRE(cfg.at("batch_size") == 8);

  // the echoed config is itself a valid --config and reproduces the run
  REQUIRE(run_cli("pretrain --config \"" + (tmp / "run/config.json") +
                      "\" --out \"" + (tmp / "run2") + "\"",
                  tmp / "log2.txt") == 0);
  REQUIRE(slurp(tmp / "run/checkpoint.bin") == slurp(tmp / "run2/checkpoint.bin"));

  SECTION("unknown config fields are usage errors") {
    write_file(tmp / "bad.json", R"({"bogus": 1})");
    REQUIRE(run_cli("pretrain --config \"" + (tmp / "bad.json") + "\" --out \"" +
                        (tmp / "run3") + "\" --data " + kTinyData,
                    tmp / "log3.txt") == 2);
    const std::string log = slurp(tmp / "log3.txt");
    REQUIRE(log.find("bogus") != std::string::npos);
  }

  SECTION("malformed JSON is a usage error") {
    write_file(tmp / "broken.json", "{ not json");
    REQUIRE(run_cli("pretrain --config \"" + (tmp / "broken.json") +
                        "\" --out \"" + (tmp / "run4") + "\" --data " + kTinyData,
                    tmp / "log4.txt") == 2);
  }
}

TEST_CASE("cli: usage and data errors exit with code 2", "[cli]") {
  CliDir tmp("usage");
  REQUIRE(run_cli("--help", tmp / "h.txt") == 0);
  REQUIRE(slurp(tmp / "h.txt").find("pretrain") != std::string::npos);

  REQUIRE(run_cli("", tmp / "none.txt") == 2);             // subcommand required
  REQUIRE(run_cli("frobnicate", tmp / "unk.txt") == 2);    // unknown subcommand
  REQUIRE(run_cli("pretrain --epochs 1", tmp / "nodata.txt") == 2);  // no --data/--out
  REQUIRE(run_cli(std::string("pretrain --data synth:sines --out \"") +
                      (tmp / "o1") + "\" --epochs 1",
                  tmp / "kind.txt") == 2);  // unknown synthetic kind
  REQUIRE(run_cli(std::string("pretrain --data /no/such/path --out \"") +
                      (tmp / "o2") + "\" --epochs 1",
                  tmp / "path.txt") == 2);
  REQUIRE(run_cli(std::string("probe --data ") + kTinyData + " --out \"" +
                      (tmp / "o3") + "\"",
                  tmp / "nockpt.txt") == 2);  // checkpoint required
}
