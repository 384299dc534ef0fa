#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hoikit/dataset.hpp"
#include "hoikit/evaluation.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {
namespace svg {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return std::string(buf);
}

inline std::string rect(double x, double y, double w, double h, const std::string& style) {
  return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" " + style + "/>\n";
}

inline std::string text_at(double x, double y, const std::string& s, int size = 11) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"monospace\" font-size=\"" +
         std::to_string(size) + "\">" + s + "</text>\n";
}

}  // namespace svg

// Scene overlay: grid magnitude heat map as gray squares, annotation boxes in
// green, detections in orange (humans solid, objects dashed). Pure string
// assembly, so the output is identical across runs.
template <class T>
inline std::string render_scene_svg(const SyntheticScene<T>& scene,
                                    const std::vector<DetRecord>& dets, int side_px = 360) {
  const int H = scene.features.grid.shape[0];
  const int W = scene.features.grid.shape[1];
  const int C = scene.features.grid.shape[2];
  const double cell_w = double(side_px) / W, cell_h = double(side_px) / H;

  double max_mag = 1e-9;
  std::vector<double> mag(std::size_t(H) * W, 0.0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      double acc = 0.0;
      for (int ch = 0; ch < C; ++ch) {
        const double v = double(scene.features.grid.at(i, j, ch));
        acc += v * v;
      }
      mag[std::size_t(i) * W + j] = std::sqrt(acc);
      max_mag = std::max(max_mag, mag[std::size_t(i) * W + j]);
    }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side_px << "\" height=\""
     << (side_px + 20) << "\" viewBox=\"0 0 " << side_px << " " << (side_px + 20) << "\">\n";
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const int shade = 255 - int(200.0 * mag[std::size_t(i) * W + j] / max_mag);
      char style[96];
      std::snprintf(style, sizeof style, "fill=\"rgb(%d,%d,%d)\"", shade, shade, shade);
      os << svg::rect(j * cell_w, i * cell_h, cell_w + 0.5, cell_h + 0.5, style);
    }
  auto box_rect = [&](const Box& b, const std::string& style) {
    return svg::rect(b.x1 * side_px, b.y1 * side_px, (b.x2 - b.x1) * side_px,
                     (b.y2 - b.y1) * side_px, style);
  };
  for (const auto& ann : scene.annotations) {
    os << box_rect(ann.human_box, "fill=\"none\" stroke=\"#2a2\" stroke-width=\"2\"");
    if (!ann.object_box.is_null())
      os << box_rect(ann.object_box,
                     "fill=\"none\" stroke=\"#2a2\" stroke-width=\"2\" stroke-dasharray=\"6,3\"");
  }
  for (const auto& d : dets) {
    if (d.image_id != scene.features.image_id) continue;
    os << box_rect(d.human_box, "fill=\"none\" stroke=\"#e80\" stroke-width=\"1.5\"");
    if (!d.object_box.is_null())
      os << box_rect(d.object_box,
                     "fill=\"none\" stroke=\"#e80\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"");
  }
  os << svg::text_at(4, side_px + 14,
                     "image " + std::to_string(scene.features.image_id) + ", " +
                         std::to_string(scene.annotations.size()) + " interactions");
  os << "</svg>\n";
  return os.str();
}

// Precision-recall staircase for one evaluated class.
inline std::string render_pr_svg(const ClassResult& cls, int side_px = 320) {
  const double pad = 34.0, plot = side_px - 2 * pad;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side_px << "\" height=\""
     << side_px << "\" viewBox=\"0 0 " << side_px << " " << side_px << "\">\n";
  os << svg::rect(pad, pad, plot, plot, "fill=\"#fff\" stroke=\"#888\"");
  for (int g = 1; g < 4; ++g) {
    const double t = pad + plot * g / 4.0;
    os << "<line x1=\"" << svg::num(pad) << "\" y1=\"" << svg::num(t) << "\" x2=\""
       << svg::num(pad + plot) << "\" y2=\"" << svg::num(t)
       << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    os << "<line x1=\"" << svg::num(t) << "\" y1=\"" << svg::num(pad) << "\" x2=\""
       << svg::num(t) << "\" y2=\"" << svg::num(pad + plot)
       << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
  }
  if (!cls.pr.empty()) {
    std::ostringstream pts;
    pts << svg::num(pad) << "," << svg::num(pad + plot * (1.0 - cls.pr.front().second));
    for (const auto& [recall, precision] : cls.pr)
      pts << " " << svg::num(pad + plot * recall) << ","
          << svg::num(pad + plot * (1.0 - precision));
    os << "<polyline points=\"" << pts.str()
       << "\" fill=\"none\" stroke=\"#06c\" stroke-width=\"2\"/>\n";
  }
  char label[128];
  std::snprintf(label, sizeof label, "class %d verb %d  ap=%.4f  gt=%d", cls.object_class,
                cls.verb, cls.ap, cls.num_gt);
  os << svg::text_at(pad, pad - 10, label);
  os << svg::text_at(pad + plot / 2 - 18, side_px - 8, "recall");
  os << svg::text_at(4, pad + plot / 2, "prec", 10);
  os << "</svg>\n";
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write " + path);
  out << content;
}

}  // namespace hoikit
