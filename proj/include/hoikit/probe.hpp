#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hoikit/core/tensor.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

enum class SimilarityMetric { cosine, euclidean };

inline SimilarityMetric parse_similarity_metric(const std::string& name) {
  if (name == "cosine") return SimilarityMetric::cosine;
  if (name == "euclidean") return SimilarityMetric::euclidean;
  throw ConfigError("unknown similarity metric: " + name);
}

template <class T>
inline double cosine_similarity(const Tensor<T>& tokens, int a, int b) {
  if (tokens.ndim() != 2) throw ShapeError("token matrix must be 2-d");
  const int n = tokens.shape[0], d = tokens.shape[1];
  if (a < 0 || a >= n || b < 0 || b >= n) throw ShapeError("token row out of range");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < d; ++k) {
    const double x = double(tokens.at(a, k)), y = double(tokens.at(b, k));
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0)
    throw SimilarityError("cosine similarity undefined for a zero-norm token");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

template <class T>
inline double euclidean_distance(const Tensor<T>& tokens, int a, int b) {
  if (tokens.ndim() != 2) throw ShapeError("token matrix must be 2-d");
  const int n = tokens.shape[0], d = tokens.shape[1];
  if (a < 0 || a >= n || b < 0 || b >= n) throw ShapeError("token row out of range");
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = double(tokens.at(a, k)) - double(tokens.at(b, k));
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

struct SimilarityEntry {
  int row_a = 0, row_b = 0;
  int class_a = 0, class_b = 0;
  double value = 0.0;
};

// All unordered pairs of detection tokens under one metric. Cosine entries
// are sorted most-similar first, distances smallest first; ties fall back to
// the (row_a, row_b) index order so the report is reproducible.
template <class T>
inline std::vector<SimilarityEntry> similarity_report(const EntityDetectionSet<T>& det,
                                                      SimilarityMetric metric,
                                                      bool humans_only = false) {
  std::vector<SimilarityEntry> out;
  const int n = det.size();
  for (int a = 0; a < n; ++a) {
    if (humans_only && det.class_labels[std::size_t(a)] != kHumanClass) continue;
    for (int b = a + 1; b < n; ++b) {
      if (humans_only && det.class_labels[std::size_t(b)] != kHumanClass) continue;
      SimilarityEntry e;
      e.row_a = a;
      e.row_b = b;
      e.class_a = det.class_labels[std::size_t(a)];
      e.class_b = det.class_labels[std::size_t(b)];
      e.value = metric == SimilarityMetric::cosine ? cosine_similarity(det.tokens, a, b)
                                                   : euclidean_distance(det.tokens, a, b);
      out.push_back(e);
    }
  }
  const bool descending = metric == SimilarityMetric::cosine;
  std::stable_sort(out.begin(), out.end(), [descending](const auto& x, const auto& y) {
    if (x.value != y.value) return descending ? x.value > y.value : x.value < y.value;
    if (x.row_a != y.row_a) return x.row_a < y.row_a;
    return x.row_b < y.row_b;
  });
  return out;
}

}  // namespace hoikit
