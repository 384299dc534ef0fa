#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoikit/core/nn.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

inline constexpr const char* kCheckpointMagic = "HOIKIT-CKPT-1";

namespace detail {

inline void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = (unsigned char)((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline double read_f64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw ConfigError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

// Format: magic line, one JSON header line (parameter names, shapes, scalar
// type, config hash), then each parameter's values as little-endian float64
// in the store's creation order.
template <class T>
inline void save_checkpoint(const std::string& path, const ParamStore<T>& store,
                            const std::string& precision, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  nlohmann::json header;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& name : store.names()) {
    const auto& t = store.get(name);
    nlohmann::json p;
    p["name"] = name;
    p["shape"] = t.shape;
    params.push_back(p);
  }
  header["params"] = params;
  header["precision"] = precision;
  header["config_hash"] = config_hash;
  out << kCheckpointMagic << "\n" << header.dump() << "\n";
  for (const auto& name : store.names()) {
    const auto& t = store.get(name);
    for (const auto& v : *t.data) detail::write_f64_le(out, double(v));
  }
}

struct CheckpointHeader {
  std::vector<std::string> names;
  std::vector<std::vector<int>> shapes;
  std::string precision;
  std::uint64_t config_hash = 0;
};

inline CheckpointHeader read_checkpoint_header(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw ConfigError("not a checkpoint file");
  std::string header_line;
  if (!std::getline(in, header_line)) throw ConfigError("checkpoint header missing");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint header: ") + e.what());
  }
  CheckpointHeader h;
  for (const auto& p : header.at("params")) {
    h.names.push_back(p.at("name").get<std::string>());
    h.shapes.push_back(p.at("shape").get<std::vector<int>>());
  }
  h.precision = header.at("precision").get<std::string>();
  h.config_hash = header.at("config_hash").get<std::uint64_t>();
  return h;
}

// Loads values into an already-built store; the parameter inventory must
// match exactly so a checkpoint never silently drops onto a different model.
template <class T>
inline CheckpointHeader load_checkpoint(const std::string& path, ParamStore<T>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  const CheckpointHeader h = read_checkpoint_header(in);
  const auto names = store.names();
  if (h.names.size() != names.size())
    throw ConfigError("checkpoint holds " + std::to_string(h.names.size()) +
                      " parameters, model has " + std::to_string(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (h.names[i] != names[i])
      throw ConfigError("checkpoint parameter mismatch: " + h.names[i] + " vs " + names[i]);
    auto& t = store.get(names[i]);
    if (h.shapes[i] != t.shape) throw ConfigError("checkpoint shape mismatch for " + names[i]);
    for (auto& v : *t.data) v = T(detail::read_f64_le(in));
  }
  return h;
}

}  // namespace hoikit
