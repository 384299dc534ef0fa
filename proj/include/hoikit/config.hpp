#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hoikit/core/rng.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/reasoning.hpp"

namespace hoikit {

// Every run-time knob in one place. Defaults are the shipping configuration;
// a config file only needs the keys it wants to change.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string precision = "float32";  // "float64" is the test-mode setting

  // widths
  int token_dim = 32;   // detector token / re-mined cue width
  int pair_dim = 64;    // fused pair representation width
  int hidden_dim = 64;  // q/k projection width in aligner and reasoner attention

  // depths
  int encoder_layers = 2;
  int reasoner_layers = 1;
  int align_self_layers = 2;
  int align_cross_layers = 1;

  LossWeights weights;

  double focal_gamma = 0.2;
  double focal_beta = 0.5;  // parsed and carried; no objective term reads it

  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool cosine_decay = true;

  int batch_size = 8;
  int epochs = 20;
  double iou_threshold = 0.5;

  int num_queries = 16;
  double jitter = 0.0;
  double confidence_floor = 0.2;
  std::string token_mode = "full";  // or "position_only"

  std::string align_input = "attended";  // or "raw"

  int pos_max = 32;
  bool learned_pos = true;
  double score_exponent = 1.0;
  int max_text_length = 16;

  // ablation switches
  bool no_alignment = false;     // drop every text-alignment loss
  bool no_remine = false;        // drop the re-mining stage (and its cue branch)
  bool no_word = false;          // drop both word-level losses
  bool no_sentence = false;      // drop both sentence-level losses
  bool no_cue_transfer = false;  // drop transfer into the re-mined cues
  bool no_out_transfer = false;  // drop transfer into the reasoning stream

  void validate() const {
    if (precision != "float32" && precision != "float64")
      throw ConfigError("precision must be \"float32\" or \"float64\"");
    if (token_dim < 1 || pair_dim < 1 || hidden_dim < 1)
      throw ConfigError("model widths must be positive");
    if (encoder_layers < 0 || reasoner_layers < 0 || align_self_layers < 0)
      throw ConfigError("layer counts must be >= 0");
    if (align_cross_layers < 1) throw ConfigError("align_cross layers must be >= 1");
    weights.validate();
    if (focal_gamma < 0.0) throw ConfigError("focal gamma must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
      throw ConfigError("iou threshold must lie in (0, 1]");
    if (num_queries < 1) throw ConfigError("num_queries must be >= 1");
    if (jitter < 0.0) throw ConfigError("jitter must be >= 0");
    if (confidence_floor < 0.0 || confidence_floor >= 1.0)
      throw ConfigError("confidence floor must lie in [0, 1)");
    if (token_mode != "full" && token_mode != "position_only")
      throw ConfigError("token_mode must be \"full\" or \"position_only\"");
    if (align_input != "attended" && align_input != "raw")
      throw ConfigError("align input must be \"attended\" or \"raw\"");
    if (pos_max < 1) throw ConfigError("pos_max must be >= 1");
    if (score_exponent < 0.0) throw ConfigError("score exponent must be >= 0");
    if (max_text_length < 5) throw ConfigError("max text length must be >= 5");
  }

  // Stable text image of the config; the checkpoint stores its hash so a
  // mismatched load fails loudly.
  std::string canonical_dump() const {
    std::ostringstream os;
    os.precision(17);
    os << "align_cross_layers=" << align_cross_layers << "\n"
       << "align_input=" << align_input << "\n"
       << "align_self_layers=" << align_self_layers << "\n"
       << "adam_beta1=" << adam_beta1 << "\n"
       << "adam_beta2=" << adam_beta2 << "\n"
       << "adam_eps=" << adam_eps << "\n"
       << "batch_size=" << batch_size << "\n"
       << "confidence_floor=" << confidence_floor << "\n"
       << "cosine_decay=" << (cosine_decay ? 1 : 0) << "\n"
       << "encoder_layers=" << encoder_layers << "\n"
       << "epochs=" << epochs << "\n"
       << "focal_beta=" << focal_beta << "\n"
       << "focal_gamma=" << focal_gamma << "\n"
       << "hidden_dim=" << hidden_dim << "\n"
       << "iou_threshold=" << iou_threshold << "\n"
       << "jitter=" << jitter << "\n"
       << "learned_pos=" << (learned_pos ? 1 : 0) << "\n"
       << "lr=" << lr << "\n"
       << "max_text_length=" << max_text_length << "\n"
       << "no_alignment=" << (no_alignment ? 1 : 0) << "\n"
       << "no_cue_transfer=" << (no_cue_transfer ? 1 : 0) << "\n"
       << "no_out_transfer=" << (no_out_transfer ? 1 : 0) << "\n"
       << "no_remine=" << (no_remine ? 1 : 0) << "\n"
       << "no_sentence=" << (no_sentence ? 1 : 0) << "\n"
       << "no_word=" << (no_word ? 1 : 0) << "\n"
       << "num_queries=" << num_queries << "\n"
       << "pair_dim=" << pair_dim << "\n"
       << "pos_max=" << pos_max << "\n"
       << "precision=" << precision << "\n"
       << "reasoner_layers=" << reasoner_layers << "\n"
       << "score_exponent=" << score_exponent << "\n"
       << "seed=" << seed << "\n"
       << "token_dim=" << token_dim << "\n"
       << "token_mode=" << token_mode << "\n"
       << "w_hoi=" << weights.hoi << "\n"
       << "w_sentence_cue=" << weights.sentence_cue << "\n"
       << "w_sentence_out=" << weights.sentence_out << "\n"
       << "w_word_cue=" << weights.word_cue << "\n"
       << "w_word_out=" << weights.word_out << "\n";
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical_dump()); }
};

namespace detail {

struct ConfigValue {
  enum class Kind { string, number, boolean } kind;
  std::string str;
  double num = 0.0;
  bool flag = false;
  int line = 0;
};

inline ConfigValue parse_value(const std::string& raw, int line) {
  ConfigValue v;
  v.line = line;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = ConfigValue::Kind::string;
    v.str = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.flag = raw == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value \"" + raw + "\"");
  }
  v.kind = ConfigValue::Kind::number;
  return v;
}

inline int as_int(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::number || v.num != double(long(v.num)))
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " must be an integer");
  return int(long(v.num));
}

inline double as_double(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::number)
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " must be a number");
  return v.num;
}

inline bool as_bool(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::boolean)
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " must be true or false");
  return v.flag;
}

inline std::string as_string(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::string)
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " must be a quoted string");
  return v.str;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment, respecting quoted strings.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

}  // namespace detail

// Applies a parsed "section.key = value" table onto a RunConfig. Shared by
// the file parser and any programmatic override path; unknown keys fail.
inline void apply_config_entries(RunConfig& cfg,
                                 const std::vector<std::pair<std::string, detail::ConfigValue>>& entries,
                                 bool* seed_was_set = nullptr) {
  using detail::ConfigValue;
  using detail::as_bool;
  using detail::as_double;
  using detail::as_int;
  using detail::as_string;
  for (const auto& [key, v] : entries) {
    if (key == "seed") {
      if (v.kind != ConfigValue::Kind::number || v.num < 0 || v.num != double(std::uint64_t(v.num)))
        throw ConfigError("line " + std::to_string(v.line) + ": seed must be a non-negative integer");
      cfg.seed = std::uint64_t(v.num);
      if (seed_was_set) *seed_was_set = true;
    } else if (key == "precision") cfg.precision = as_string(v, key);
    else if (key == "dims.token") cfg.token_dim = as_int(v, key);
    else if (key == "dims.pair") cfg.pair_dim = as_int(v, key);
    else if (key == "dims.hidden") cfg.hidden_dim = as_int(v, key);
    else if (key == "layers.encoder") cfg.encoder_layers = as_int(v, key);
    else if (key == "layers.reasoner") cfg.reasoner_layers = as_int(v, key);
    else if (key == "layers.align_self") cfg.align_self_layers = as_int(v, key);
    else if (key == "layers.align_cross") cfg.align_cross_layers = as_int(v, key);
    else if (key == "loss_weights.hoi") cfg.weights.hoi = as_double(v, key);
    else if (key == "loss_weights.sentence_out") cfg.weights.sentence_out = as_double(v, key);
    else if (key == "loss_weights.word_out") cfg.weights.word_out = as_double(v, key);
    else if (key == "loss_weights.sentence_cue") cfg.weights.sentence_cue = as_double(v, key);
    else if (key == "loss_weights.word_cue") cfg.weights.word_cue = as_double(v, key);
    else if (key == "focal.gamma") cfg.focal_gamma = as_double(v, key);
    else if (key == "focal.beta") cfg.focal_beta = as_double(v, key);
    else if (key == "optim.lr") cfg.lr = as_double(v, key);
    else if (key == "optim.beta1") cfg.adam_beta1 = as_double(v, key);
    else if (key == "optim.beta2") cfg.adam_beta2 = as_double(v, key);
    else if (key == "optim.eps") cfg.adam_eps = as_double(v, key);
    else if (key == "optim.cosine_decay") cfg.cosine_decay = as_bool(v, key);
    else if (key == "train.batch_size") cfg.batch_size = as_int(v, key);
    else if (key == "train.epochs") cfg.epochs = as_int(v, key);
    else if (key == "train.iou_threshold") cfg.iou_threshold = as_double(v, key);
    else if (key == "detector.num_queries") cfg.num_queries = as_int(v, key);
    else if (key == "detector.jitter") cfg.jitter = as_double(v, key);
    else if (key == "detector.confidence_floor") cfg.confidence_floor = as_double(v, key);
    else if (key == "detector.token_mode") cfg.token_mode = as_string(v, key);
    else if (key == "align.input") cfg.align_input = as_string(v, key);
    else if (key == "model.pos_max") cfg.pos_max = as_int(v, key);
    else if (key == "model.learned_pos") cfg.learned_pos = as_bool(v, key);
    else if (key == "model.score_exponent") cfg.score_exponent = as_double(v, key);
    else if (key == "model.max_text_length") cfg.max_text_length = as_int(v, key);
    else if (key == "ablations.no_alignment") cfg.no_alignment = as_bool(v, key);
    else if (key == "ablations.no_remine") cfg.no_remine = as_bool(v, key);
    else if (key == "ablations.no_word") cfg.no_word = as_bool(v, key);
    else if (key == "ablations.no_sentence") cfg.no_sentence = as_bool(v, key);
    else if (key == "ablations.no_cue_transfer") cfg.no_cue_transfer = as_bool(v, key);
    else if (key == "ablations.no_out_transfer") cfg.no_out_transfer = as_bool(v, key);
    else
      throw ConfigError("line " + std::to_string(v.line) + ": unknown config key \"" + key + "\"");
  }
}

// Reads a config in a small TOML subset: [sections], key = value scalars
// (quoted strings, numbers, true/false), and # comments. Every key must be
// known. The HOIKIT_SEED environment variable supplies the seed when the
// file does not set one.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  bool seed_set = false;
  std::vector<std::pair<std::string, detail::ConfigValue>> entries;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string raw = detail::trim(s.substr(eq + 1));
    if (key.empty() || raw.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string full = section.empty() ? key : section + "." + key;
    entries.emplace_back(full, detail::parse_value(raw, lineno));
  }
  apply_config_entries(cfg, entries, &seed_set);
  if (!seed_set) {
    if (const char* env = std::getenv("HOIKIT_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError("HOIKIT_SEED is not a valid seed: " + std::string(env));
      }
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline RunConfig default_config() { return parse_config_text(""); }

}  // namespace hoikit
