#pragma once

#include <algorithm>
#include <vector>

#include "hoikit/errors.hpp"
#include "hoikit/geometry.hpp"

namespace hoikit {

// Ground-truth interaction: one human/object pair and every verb that links
// them. Verbs are kept sorted and unique so serialization and matching are
// order-independent.
struct TripletAnnotation {
  Box human_box;
  Box object_box;
  int object_class = 0;
  std::vector<int> verbs;
  bool occluded_object = false;

  void normalize() {
    std::sort(verbs.begin(), verbs.end());
    verbs.erase(std::unique(verbs.begin(), verbs.end()), verbs.end());
  }

  void validate(int num_verbs, int num_object_classes) const {
    if (!human_box.valid()) throw DomainError("annotation human box invalid");
    if (!occluded_object && !object_box.valid())
      throw DomainError("annotation object box invalid");
    if (occluded_object && !object_box.is_null() && !object_box.valid())
      throw DomainError("occluded annotation object box must be null or valid");
    if (object_class < 0 || object_class >= num_object_classes)
      throw DomainError("annotation object class out of range");
    if (verbs.empty()) throw DomainError("annotation has no verbs");
    for (int v : verbs)
      if (v < 0 || v >= num_verbs) throw DomainError("annotation verb out of range");
  }
};

}  // namespace hoikit
