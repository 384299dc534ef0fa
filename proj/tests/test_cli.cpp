#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#ifndef HOIKIT_CLI_PATH
#error "tests need HOIKIT_CLI_PATH pointing at the command-line binary"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hoikit_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path sink = scratch / "cli_capture.txt";
  const std::string cmd =
      std::string(HOIKIT_CLI_PATH) + " " + args + " > " + sink.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  if (raw != -1 && WIFEXITED(raw)) r.exit_code = WEXITSTATUS(raw);
  r.output = slurp(sink);
  return r;
}

// a small dataset plus a matching run configuration, shared by the pipeline tests
struct Corpus {
  TempDir dir;
  fs::path data, config;

  Corpus() : dir("cli_corpus") {
    data = dir.path / "data";
    auto gen = run_cli("gen-data --seed 3 --images 4 --verbs 2 --objects 2 "
                       "--grid-h 6 --grid-w 6 --grid-c 4 --out " + data.string(),
                       dir.path);
    REQUIRE(gen.exit_code == 0);
    config = dir.path / "run.cfg";
    std::ofstream out(config);
    out << "precision = \"float64\"\n"
        << "[dims]\ntoken = 8\npair = 12\nhidden = 12\n"
        << "[layers]\nencoder = 1\nalign_self = 1\n"
        << "[train]\nbatch_size = 2\n";
  }
};

}  // namespace

TEST_CASE("cli help exits cleanly and lists every subcommand") {
  TempDir dir("cli_help");
  auto r = run_cli("--help", dir.path);
  REQUIRE(r.exit_code == 0);
  for (const char* name : {"gen-data", "train", "eval", "probe", "report"})
    REQUIRE(r.output.find(name) != std::string::npos);
}

TEST_CASE("cli rejects unknown subcommands with the usage exit code") {
  TempDir dir("cli_badcmd");
  auto r = run_cli("frobnicate", dir.path);
  REQUIRE(r.exit_code == 2);
  REQUIRE(r.output.find("Usage") != std::string::npos);

  auto missing = run_cli("gen-data", dir.path);  // --out is required
  REQUIRE(missing.exit_code == 2);
}

TEST_CASE("cli dataset generation is reproducible byte for byte") {
  TempDir dir("cli_gen");
  const std::string flags = "gen-data --seed 11 --images 3 --verbs 2 --objects 2 "
                            "--grid-h 5 --grid-w 5 --grid-c 3 --out ";
  auto a = run_cli(flags + (dir.path / "a").string(), dir.path);
  auto b = run_cli(flags + (dir.path / "b").string(), dir.path);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(a.output.find("wrote 3 scenes") != std::string::npos);
  for (const char* name : {"scenes.jsonl", "gt.jsonl", "manifest.json"}) {
    REQUIRE(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
    REQUIRE_FALSE(slurp(dir.path / "a" / name).empty());
  }
}

TEST_CASE("cli pipeline trains, checkpoints, and evaluates end to end") {
  Corpus c;
  const fs::path ckpt = c.dir.path / "model.ckpt";
  const fs::path metrics = c.dir.path / "metrics.jsonl";

  auto tr = run_cli("train --config " + c.config.string() + " --data " + c.data.string() +
                        " --out " + ckpt.string() + " --steps 4 --log " + metrics.string(),
                    c.dir.path);
  REQUIRE(tr.exit_code == 0);
  REQUIRE(tr.output.find("ran 4 steps") != std::string::npos);
  REQUIRE(fs::exists(ckpt));

  std::istringstream lines(slurp(metrics));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    REQUIRE(j.at("step") == ++count);
  }
  REQUIRE(count == 4);

  const fs::path result = c.dir.path / "eval.json";
  auto ev = run_cli("eval --config " + c.config.string() + " --ckpt " + ckpt.string() +
                        " --data " + c.data.string() + " --out " + result.string(),
                    c.dir.path);
  REQUIRE(ev.exit_code == 0);
  REQUIRE(ev.output.find("mAP full") != std::string::npos);

  auto j = nlohmann::json::parse(slurp(result));
  REQUIRE(j.at("scenario") == "s2");
  REQUIRE(j.at("classes_evaluated").get<int>() > 0);
  REQUIRE(j.at("map_full").get<double>() >= 0.0);
  REQUIRE(j.at("map_full").get<double>() <= 1.0);
  REQUIRE(j.at("per_class").size() == j.at("classes_evaluated").get<std::size_t>());

  auto ko = run_cli("eval --config " + c.config.string() + " --ckpt " + ckpt.string() +
                        " --data " + c.data.string() + " --scenario s1 --setting ko",
                    c.dir.path);
  REQUIRE(ko.exit_code == 0);
  REQUIRE(ko.output.find("scenario=s1 setting=ko") != std::string::npos);

  const fs::path prdir = c.dir.path / "pr";
  auto pr = run_cli("eval --config " + c.config.string() + " --ckpt " + ckpt.string() +
                        " --data " + c.data.string() + " --pr-plot " + prdir.string(),
                    c.dir.path);
  REQUIRE(pr.exit_code == 0);
  int svgs = 0;
  for (const auto& entry : fs::directory_iterator(prdir)) {
    ++svgs;
    const auto body = slurp(entry.path());
    REQUIRE(body.find("<svg") == 0);
  }
  REQUIRE(svgs == j.at("classes_evaluated").get<int>());
}

TEST_CASE("cli eval validates its argument combinations") {
  Corpus c;
  auto neither = run_cli("eval --gt " + (c.data / "gt.jsonl").string(), c.dir.path);
  REQUIRE(neither.exit_code == 2);
  REQUIRE(neither.output.find("pass exactly one of --dets or --ckpt") != std::string::npos);

  auto both = run_cli("eval --dets x.jsonl --ckpt y.ckpt --data " + c.data.string(), c.dir.path);
  REQUIRE(both.exit_code == 2);

  auto no_data = run_cli("eval --ckpt y.ckpt", c.dir.path);
  REQUIRE(no_data.exit_code == 2);
  REQUIRE(no_data.output.find("--ckpt needs --data") != std::string::npos);

  const fs::path empty_dets = c.dir.path / "empty.jsonl";
  std::ofstream(empty_dets).close();
  auto bad_scenario = run_cli("eval --dets " + empty_dets.string() + " --gt " +
                                  (c.data / "gt.jsonl").string() + " --scenario s3",
                              c.dir.path);
  REQUIRE(bad_scenario.exit_code == 2);
  REQUIRE(bad_scenario.output.find("scenario must be s1 or s2") != std::string::npos);
}

TEST_CASE("cli refuses a checkpoint written under a different configuration") {
  Corpus c;
  const fs::path ckpt = c.dir.path / "model.ckpt";
  auto tr = run_cli("train --config " + c.config.string() + " --data " + c.data.string() +
                        " --out " + ckpt.string() + " --steps 1",
                    c.dir.path);
  REQUIRE(tr.exit_code == 0);

  const fs::path other = c.dir.path / "other.cfg";
  {
    std::ofstream out(other);
    out << "precision = \"float64\"\nseed = 99\n"
        << "[dims]\ntoken = 8\npair = 12\nhidden = 12\n"
        << "[layers]\nencoder = 1\nalign_self = 1\n"
        << "[train]\nbatch_size = 2\n";
  }
  auto ev = run_cli("eval --config " + other.string() + " --ckpt " + ckpt.string() + " --data " +
                        c.data.string(),
                    c.dir.path);
  REQUIRE(ev.exit_code == 2);
  REQUIRE(ev.output.find("checkpoint was written under a different configuration") !=
          std::string::npos);
}

TEST_CASE("cli maps config errors and runtime errors to distinct exit codes") {
  Corpus c;
  const fs::path bad = c.dir.path / "bad.cfg";
  {
    std::ofstream out(bad);
    out << "[dims]\nwidth = 8\n";  // no such key
  }
  auto cfg_err = run_cli("train --config " + bad.string() + " --data " + c.data.string() +
                             " --out " + (c.dir.path / "x.ckpt").string(),
                         c.dir.path);
  REQUIRE(cfg_err.exit_code == 2);
  REQUIRE(cfg_err.output.find("unknown config key") != std::string::npos);

  auto no_data = run_cli("train --data " + (c.dir.path / "absent").string() + " --out " +
                             (c.dir.path / "y.ckpt").string(),
                         c.dir.path);
  REQUIRE(no_data.exit_code == 3);

  auto no_dets = run_cli("eval --dets " + (c.dir.path / "absent.jsonl").string() + " --gt " +
                             (c.data / "gt.jsonl").string(),
                         c.dir.path);
  REQUIRE(no_dets.exit_code == 3);
}

TEST_CASE("cli probe prints deterministic similarity listings") {
  Corpus c;
  const std::string flags = "probe --config " + c.config.string() + " --data " + c.data.string() +
                            " --image 0 --metric cosine";
  auto a = run_cli(flags, c.dir.path);
  auto b = run_cli(flags, c.dir.path);
  REQUIRE(a.exit_code == 0);
  REQUIRE(a.output.find("image 0:") != std::string::npos);
  REQUIRE(a.output == b.output);

  auto humans = run_cli(flags + " --humans-only", c.dir.path);
  REQUIRE(humans.exit_code == 0);

  auto bad_metric = run_cli("probe --data " + c.data.string() + " --metric manhattan", c.dir.path);
  REQUIRE(bad_metric.exit_code == 2);
  REQUIRE(bad_metric.output.find("unknown similarity metric") != std::string::npos);

  auto bad_image = run_cli("probe --data " + c.data.string() + " --image 999", c.dir.path);
  REQUIRE(bad_image.exit_code == 2);
  REQUIRE(bad_image.output.find("no scene with image id 999") != std::string::npos);
}

TEST_CASE("cli report renders one svg per scene") {
  Corpus c;
  const fs::path out = c.dir.path / "report";
  auto r = run_cli("report --data " + c.data.string() + " --out " + out.string(), c.dir.path);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.output.find("wrote 4 scene renderings") != std::string::npos);
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d.svg", i);
    const auto body = slurp(out / name);
    REQUIRE(body.find("<svg") == 0);
    REQUIRE(body.find("</svg>") != std::string::npos);
  }
}
