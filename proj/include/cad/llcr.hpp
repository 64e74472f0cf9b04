#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cad/grid.hpp"
#include "cad/tensor.hpp"

namespace cad {

/// Patch coordinate (row, col). Ordering is row-major.
struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Patch offset relative to a bounding-box origin.
struct Offset {
  int drow = 0;
  int dcol = 0;
  auto operator<=>(const Offset&) const = default;
};

/// 4-connected set of patches. `members` keeps admission order; `offsets` is
/// sorted row-major.
struct Region {
  std::vector<Cell> members;
  Cell seed;
  Cell bbox_origin;
  std::vector<Offset> offsets;

  bool empty() const noexcept { return members.empty(); }
  std::size_t size() const noexcept { return members.size(); }
  /// Members sorted row-major, for set comparisons.
  std::vector<Cell> sorted_members() const;
};

struct Placement {
  Cell anchor;
  std::vector<Offset> offsets;
  double mean_confidence = 0.0;

  bool operator==(const Placement&) const = default;
};

enum class Direction { WeakToStrong, StrongToWeak };

const char* to_string(Direction d) noexcept;

/// Audit entry for one replacement. WeakToStrong means the low region lives in
/// the strong view and is filled from the weak view.
struct DisplacementRecord {
  Direction direction = Direction::WeakToStrong;
  Region region;
  std::optional<Placement> placement;
  double c_threshold = 0.0;
  int r_threshold = 0;
  long iteration = 0;
  std::vector<double> member_confidence;  ///< C̃ of each member, admission order
};

/// Priority-driven growth from the global-min patch: the lowest queued patch is
/// admitted while |region| < r_threshold; qualifying (C̃ ≤ c_threshold)
/// 4-neighbours are queued. Ties resolve to the smallest row-major index.
Region find_largest_low_confidence_region(const PatchGrid& grid, double c_threshold,
                                          int r_threshold);

/// Builds a Region (origin + offsets) from an arbitrary non-empty member list.
Region make_region(std::vector<Cell> members);

/// Offsets of the region relative to its bounding-box origin.
std::vector<Offset> shape_offsets(const Region& region);

/// Every in-bounds anchor for the shape, in row-major order.
std::vector<Cell> enumerate_placements(std::span<const Offset> offsets, std::size_t grid_rows,
                                       std::size_t grid_cols);

/// Mean normalized confidence of the shape anchored at `anchor`.
double placement_mean(const PatchGrid& grid, std::span<const Offset> offsets, Cell anchor);

/// Highest-mean placement; ties go to the smallest row-major anchor.
std::optional<Placement> best_placement(const PatchGrid& other, std::span<const Offset> offsets);

/// Up to k placements sorted by descending mean (row-major among equals).
std::vector<Placement> top_placements(const PatchGrid& other, std::span<const Offset> offsets,
                                      std::size_t k);

/// Mean per-pixel KL(softmax(low) ‖ softmax(candidate)) over the region
/// footprint, with pixels matched by offset and position inside the patch.
double region_kl(const Tensor& low_logits, const Region& region, const Tensor& other_logits,
                 const Placement& candidate, const GridSpec& spec);

/// Picks the candidate with the smallest region_kl; ties keep the earlier
/// (higher-confidence) candidate.
Placement kl_select_placement(const Tensor& low_logits, const Region& region,
                              const Tensor& other_logits, std::span<const Placement> candidates,
                              const GridSpec& spec);

/// Copies source patch blocks at placement into target patch blocks at region,
/// across every leading channel. Pixels outside the footprint are untouched.
Tensor apply_replacement(const Tensor& target, const Tensor& source, const Region& region,
                         const Placement& placement, const GridSpec& spec);
LabelMap apply_replacement(const LabelMap& target, const LabelMap& source, const Region& region,
                           const Placement& placement, const GridSpec& spec);

/// Region occupying the placement's footprint (used for the mirrored swap).
Region region_at(const Placement& placement);

/// H×W mask with 1 on the region's pixel footprint.
std::vector<std::uint8_t> footprint_mask(const Region& region, const GridSpec& spec);

}  // namespace cad
