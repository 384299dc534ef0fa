// Command-line front end: synthetic data generation, training, evaluation,
// token similarity probes, and SVG scene reports.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hoikit/hoikit.hpp"

namespace {

using namespace hoikit;

struct GenArgs {
  std::uint64_t seed = 0;
  int images = 16, verbs = 3, objects = 2;
  int grid_h = 10, grid_w = 10, grid_c = 8;
  double amplitude = 12.0, noise = 0.05, interaction_prob = 1.0;
  std::string out;
};

struct TrainArgs {
  std::string config, data, out, log_path;
  int steps = 0;
};

struct EvalArgs {
  std::string config, dets, ckpt, data, gt, manifest, out, pr_plot;
  std::string scenario = "s2", setting = "default";
  int rare_cutoff = 10;
};

struct ProbeArgs {
  std::string config, data, metric = "cosine";
  int image = 0;
  bool humans_only = false;
};

struct ReportArgs {
  std::string data, dets, out;
};

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? default_config() : parse_config_file(path);
}

template <class T>
MockDetector<T> build_detector(const RunConfig& cfg, const SyntheticDataset<T>& ds) {
  MockDetectorConfig dc;
  dc.num_queries = cfg.num_queries;
  dc.token_dim = cfg.token_dim;
  dc.num_classes = ds.cfg.num_objects + 1;
  dc.jitter_sigma = cfg.jitter;
  dc.confidence_floor = cfg.confidence_floor;
  dc.token_mode = cfg.token_mode == "full" ? TokenMode::full : TokenMode::position_only;
  dc.seed = cfg.seed;
  MockDetector<T> det(dc);
  for (const auto& scene : ds.scenes) det.register_scene(scene.features.image_id, scene.instances);
  return det;
}

int cmd_gen_data(const GenArgs& a) {
  DatasetConfig dc;
  dc.seed = a.seed;
  dc.num_images = a.images;
  dc.num_verbs = a.verbs;
  dc.num_objects = a.objects;
  dc.grid_h = a.grid_h;
  dc.grid_w = a.grid_w;
  dc.grid_c = a.grid_c;
  dc.amplitude = a.amplitude;
  dc.noise_sigma = a.noise;
  dc.interaction_prob = a.interaction_prob;
  const auto ds = generate_dataset<double>(dc);
  std::filesystem::create_directories(a.out);
  save_dataset(ds, a.out);
  int interactions = 0;
  for (const auto& s : ds.scenes) interactions += int(s.annotations.size());
  std::printf("wrote %d scenes (%d interactions, %d verbs, %d object classes) to %s\n",
              dc.num_images, interactions, dc.num_verbs, dc.num_objects, a.out.c_str());
  return 0;
}

template <class T>
int run_train(const RunConfig& cfg, const TrainArgs& a) {
  auto ds = load_dataset<T>(a.data);
  auto det = build_detector(cfg, ds);
  StubTextEncoder<T> enc(ds.vocab.size(), cfg.pair_dim, cfg.max_text_length, cfg.seed);
  HoiModel<T> model(cfg, ds.cfg.grid_c, ds.cfg.num_verbs);
  const auto prepared = prepare_images(ds, det, enc);

  TrainOptions opts;
  opts.steps_override = a.steps;
  std::ofstream log;
  if (!a.log_path.empty()) {
    log.open(a.log_path);
    if (!log) throw ConfigError("cannot write metrics log: " + a.log_path);
    opts.metrics_out = &log;
  }
  const auto result = train_model(model, prepared, opts);
  save_checkpoint(a.out, model.params(), cfg.precision, cfg.hash());
  std::printf("ran %d steps; final loss %.6f; checkpoint %s\n", result.steps_run,
              result.log.empty() ? 0.0 : result.log.back().loss_total, a.out.c_str());
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  return cfg.precision == "float64" ? run_train<double>(cfg, a) : run_train<float>(cfg, a);
}

template <class T>
std::vector<DetRecord> infer_detections(const RunConfig& cfg, const EvalArgs& a) {
  auto ds = load_dataset<T>(a.data);
  auto det = build_detector(cfg, ds);
  StubTextEncoder<T> enc(ds.vocab.size(), cfg.pair_dim, cfg.max_text_length, cfg.seed);
  HoiModel<T> model(cfg, ds.cfg.grid_c, ds.cfg.num_verbs);
  const auto header = load_checkpoint(a.ckpt, model.params());
  if (header.config_hash != cfg.hash())
    throw ConfigError("checkpoint was written under a different configuration");
  return run_inference(model, prepare_images(ds, det, enc));
}

int cmd_eval(const EvalArgs& a) {
  if (a.dets.empty() == a.ckpt.empty())
    throw ConfigError("pass exactly one of --dets or --ckpt");
  if (!a.ckpt.empty() && a.data.empty())
    throw ConfigError("--ckpt needs --data to run inference on");
  std::string gt_path = a.gt;
  if (gt_path.empty()) {
    if (a.data.empty()) throw ConfigError("pass --gt (or --data holding gt.jsonl)");
    gt_path = a.data + "/gt.jsonl";
  }

  std::vector<DetRecord> dets;
  if (!a.dets.empty()) {
    dets = read_detections_file(a.dets);
  } else {
    const RunConfig cfg = load_run_config(a.config);
    dets = cfg.precision == "float64" ? infer_detections<double>(cfg, a)
                                      : infer_detections<float>(cfg, a);
  }
  const auto gts = read_ground_truth_file(gt_path);

  EvalConfig ec;
  if (a.scenario == "s1")
    ec.scenario = Scenario::s1;
  else if (a.scenario == "s2")
    ec.scenario = Scenario::s2;
  else
    throw ConfigError("scenario must be s1 or s2");
  if (a.setting == "default")
    ec.setting = Setting::default_images;
  else if (a.setting == "ko")
    ec.setting = Setting::known_object_images;
  else
    throw ConfigError("setting must be default or ko");
  ec.rare_cutoff = a.rare_cutoff;
  ec.keep_pr_curves = !a.pr_plot.empty();
  std::string manifest = a.manifest;
  if (manifest.empty() && !a.data.empty()) manifest = a.data + "/manifest.json";
  if (!manifest.empty() && std::filesystem::exists(manifest)) {
    std::ifstream mf(manifest);
    nlohmann::json m;
    mf >> m;
    for (const auto& jc : m.at("train_counts"))
      ec.train_counts[{jc.at("object_class").get<int>(), jc.at("verb").get<int>()}] =
          jc.at("count").get<int>();
  }

  const EvalResult r = evaluate(dets, gts, ec);
  std::printf("scenario=%s setting=%s\n", a.scenario.c_str(), a.setting.c_str());
  std::printf("mAP full    %.6f  (%d classes)\n", r.map_full, r.classes_evaluated);
  std::printf("mAP rare    %.6f  (%d classes)\n", r.map_rare, r.classes_rare);
  std::printf("mAP nonrare %.6f  (%d classes)\n", r.map_nonrare, r.classes_nonrare);

  if (!a.out.empty()) {
    nlohmann::json j;
    j["scenario"] = a.scenario;
    j["setting"] = a.setting;
    j["map_full"] = r.map_full;
    j["map_rare"] = r.map_rare;
    j["map_nonrare"] = r.map_nonrare;
    j["classes_evaluated"] = r.classes_evaluated;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& c : r.per_class) {
      nlohmann::json jc;
      jc["object_class"] = c.object_class;
      jc["verb"] = c.verb;
      jc["ap"] = c.ap;
      jc["num_gt"] = c.num_gt;
      jc["num_dets"] = c.num_dets;
      jc["rare"] = c.rare;
      per.push_back(jc);
    }
    j["per_class"] = per;
    write_text_file(a.out, j.dump(2) + "\n");
  }
  if (!a.pr_plot.empty()) {
    std::filesystem::create_directories(a.pr_plot);
    for (const auto& c : r.per_class) {
      char name[64];
      std::snprintf(name, sizeof name, "pr_c%02d_v%02d.svg", c.object_class, c.verb);
      write_text_file(a.pr_plot + "/" + name, render_pr_svg(c));
    }
  }
  return 0;
}

int cmd_probe(const ProbeArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  auto ds = load_dataset<double>(a.data);
  auto det = build_detector(cfg, ds);
  const SyntheticScene<double>* scene = nullptr;
  for (const auto& s : ds.scenes)
    if (s.features.image_id == a.image) scene = &s;
  if (!scene) throw ConfigError("no scene with image id " + std::to_string(a.image));
  const auto d = det.detect(scene->features);
  const auto metric = parse_similarity_metric(a.metric);
  const auto entries = similarity_report(d, metric, a.humans_only);
  std::printf("image %d: %d detections, %zu pairs (%s)\n", a.image, d.size(), entries.size(),
              a.metric.c_str());
  for (const auto& e : entries)
    std::printf("  (%d, %d) classes (%d, %d) %s=%.6f\n", e.row_a, e.row_b, e.class_a, e.class_b,
                a.metric.c_str(), e.value);
  return 0;
}

int cmd_report(const ReportArgs& a) {
  auto ds = load_dataset<double>(a.data);
  std::vector<DetRecord> dets;
  if (!a.dets.empty()) dets = read_detections_file(a.dets);
  std::filesystem::create_directories(a.out);
  for (const auto& scene : ds.scenes) {
    char name[64];
    std::snprintf(name, sizeof name, "scene_%03d.svg", scene.features.image_id);
    write_text_file(a.out + "/" + name, render_scene_svg(scene, dets));
  }
  std::printf("wrote %zu scene renderings to %s\n", ds.scenes.size(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"human-object interaction toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic dataset");
  g->add_option("--seed", gen.seed, "dataset seed");
  g->add_option("--images", gen.images, "number of scenes");
  g->add_option("--verbs", gen.verbs, "verb vocabulary size");
  g->add_option("--objects", gen.objects, "object category count (humans excluded)");
  g->add_option("--grid-h", gen.grid_h, "feature grid height");
  g->add_option("--grid-w", gen.grid_w, "feature grid width");
  g->add_option("--grid-c", gen.grid_c, "feature grid channels");
  g->add_option("--amplitude", gen.amplitude, "planted pattern strength");
  g->add_option("--noise", gen.noise, "background noise sigma");
  g->add_option("--interaction-prob", gen.interaction_prob, "chance an eligible pair interacts");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on a generated dataset");
  t->add_option("--config", tr.config, "run configuration file");
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--steps", tr.steps, "cap the number of optimizer steps");
  t->add_option("--log", tr.log_path, "metrics JSONL path");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate detections against ground truth");
  e->add_option("--config", ev.config, "run configuration file (with --ckpt)");
  e->add_option("--dets", ev.dets, "detections JSONL");
  e->add_option("--ckpt", ev.ckpt, "checkpoint to run inference with");
  e->add_option("--data", ev.data, "dataset directory (with --ckpt)");
  e->add_option("--gt", ev.gt, "ground-truth JSONL");
  e->add_option("--manifest", ev.manifest, "dataset manifest for training counts");
  e->add_option("--scenario", ev.scenario, "s1 or s2");
  e->add_option("--setting", ev.setting, "default or ko");
  e->add_option("--rare-cutoff", ev.rare_cutoff, "training-sample cutoff for the rare split");
  e->add_option("--out", ev.out, "write the result as JSON");
  e->add_option("--pr-plot", ev.pr_plot, "write per-class PR curves (SVG) into this directory");

  ProbeArgs pr;
  auto* p = app.add_subcommand("probe", "token similarity diagnostics");
  p->add_option("--config", pr.config, "run configuration file");
  p->add_option("--data", pr.data, "dataset directory")->required();
  p->add_option("--image", pr.image, "image id to probe");
  p->add_option("--metric", pr.metric, "cosine or euclidean");
  p->add_flag("--humans-only", pr.humans_only, "restrict to human-human pairs");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "render scenes as SVG overlays");
  r->add_option("--data", rp.data, "dataset directory")->required();
  r->add_option("--dets", rp.dets, "detections JSONL to overlay");
  r->add_option("--out", rp.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    std::cerr << err.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (p->parsed()) return cmd_probe(pr);
    if (r->parsed()) return cmd_report(rp);
  } catch (const hoikit::ConfigError& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
  return 0;
}
