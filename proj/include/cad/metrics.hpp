#pragma once

#include <optional>
#include <vector>

#include "cad/tensor.hpp"

namespace cad {

// All metrics compare the binary masks {pred == class_id} and {truth == class_id}.

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dsc(const LabelMap& pred, const LabelMap& truth, int class_id);

/// |A∩B| / |A∪B|; 1.0 when both masks are empty.
double jaccard(const LabelMap& pred, const LabelMap& truth, int class_id);

/// 95th percentile (linear interpolation) of the pooled directed distances
/// between the two mask boundaries. Throws UndefinedMetric if a mask is empty.
double hd95(const LabelMap& pred, const LabelMap& truth, int class_id);

/// Mean of the pooled directed boundary distances.
double asd(const LabelMap& pred, const LabelMap& truth, int class_id);

/// Pooled directed distances A→B followed by B→A, brute force, in pixels.
std::vector<double> boundary_distances(const LabelMap& pred, const LabelMap& truth, int class_id);

/// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

struct MetricReport {
  int class_id = 1;
  double dsc = 0.0;
  double jaccard = 0.0;
  std::optional<double> hd95;  ///< missing when either mask is empty
  std::optional<double> asd;
};

MetricReport evaluate(const LabelMap& pred, const LabelMap& truth, int class_id);

}  // namespace cad
