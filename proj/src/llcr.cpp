#include "cad/llcr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <string>
#include <utility>

#include "cad/error.hpp"
#include "cad/losses.hpp"

namespace cad {

const char* to_string(Direction d) noexcept {
  return d == Direction::WeakToStrong ? "weak_to_strong" : "strong_to_weak";
}

std::vector<Cell> Region::sorted_members() const {
  auto out = members;
  std::sort(out.begin(), out.end());
  return out;
}

Region find_largest_low_confidence_region(const PatchGrid& grid, double c_threshold,
                                          int r_threshold) {
  if (r_threshold <= 0) throw Error(ErrorCode::InvalidThreshold, "r_threshold must be >= 1");
  if (!(c_threshold >= 0.0 && c_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidThreshold, "c_threshold must lie in [0, 1]");
  }
  if (!grid.is_normalized()) throw Error(ErrorCode::InvalidInput, "grid is not normalized");

  const auto rows = static_cast<int>(grid.rows());
  const auto cols = static_cast<int>(grid.cols());
  const auto& score = grid.normalized;

  // Heap entries are (C̃, row-major index); std::greater makes it a min-heap
  // with the index breaking ties.
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<char> admitted(score.size(), 0);

  const int seed =
      static_cast<int>(std::distance(score.begin(), std::min_element(score.begin(), score.end())));
  Region region;
  region.seed = {seed / cols, seed % cols};
  // Only reachable for grids that skipped normalize(): keeps seed ∈ members.
  if (score[seed] > c_threshold) return region;
  heap.emplace(score[seed], seed);

  std::vector<Cell> members;
  const auto cap = static_cast<std::size_t>(r_threshold);
  while (!heap.empty() && members.size() < cap) {
    const int p = heap.top().second;
    heap.pop();
    if (admitted[p] || score[p] > c_threshold) continue;
    admitted[p] = 1;
    members.push_back({p / cols, p % cols});
    const int r = p / cols;
    const int c = p % cols;
    const int neighbours[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& n : neighbours) {
      if (n[0] < 0 || n[0] >= rows || n[1] < 0 || n[1] >= cols) continue;
      const int q = n[0] * cols + n[1];
      if (!admitted[q] && score[q] <= c_threshold) heap.emplace(score[q], q);
    }
  }

  region = make_region(std::move(members));
  region.seed = {seed / cols, seed % cols};
  return region;
}

Region make_region(std::vector<Cell> members) {
  if (members.empty()) throw Error(ErrorCode::EmptyRegion, "region has no members");
  Region region;
  region.seed = members.front();
  region.members = std::move(members);
  region.offsets = shape_offsets(region);
  int r0 = region.members.front().row;
  int c0 = region.members.front().col;
  for (const auto& m : region.members) {
    r0 = std::min(r0, m.row);
    c0 = std::min(c0, m.col);
  }
  region.bbox_origin = {r0, c0};
  return region;
}

std::vector<Offset> shape_offsets(const Region& region) {
  if (region.members.empty()) throw Error(ErrorCode::EmptyRegion, "region has no members");
  int r0 = region.members.front().row;
  int c0 = region.members.front().col;
  for (const auto& m : region.members) {
    r0 = std::min(r0, m.row);
    c0 = std::min(c0, m.col);
  }
  std::vector<Offset> offsets;
  offsets.reserve(region.members.size());
  for (const auto& m : region.members) offsets.push_back({m.row - r0, m.col - c0});
  std::sort(offsets.begin(), offsets.end());
  return offsets;
}

std::vector<Cell> enumerate_placements(std::span<const Offset> offsets, std::size_t grid_rows,
                                       std::size_t grid_cols) {
  std::vector<Cell> anchors;
  if (offsets.empty()) return anchors;
  int max_dr = 0;
  int max_dc = 0;
  for (const auto& o : offsets) {
    max_dr = std::max(max_dr, o.drow);
    max_dc = std::max(max_dc, o.dcol);
  }
  const int span_r = static_cast<int>(grid_rows) - max_dr;
  const int span_c = static_cast<int>(grid_cols) - max_dc;
  if (span_r <= 0 || span_c <= 0) return anchors;
  anchors.reserve(static_cast<std::size_t>(span_r * span_c));
  for (int r = 0; r < span_r; ++r) {
    for (int c = 0; c < span_c; ++c) anchors.push_back({r, c});
  }
  return anchors;
}

double placement_mean(const PatchGrid& grid, std::span<const Offset> offsets, Cell anchor) {
  double sum = 0.0;
  for (const auto& o : offsets) {
    sum += grid.norm_at(static_cast<std::size_t>(anchor.row + o.drow),
                        static_cast<std::size_t>(anchor.col + o.dcol));
  }
  return sum / static_cast<double>(offsets.size());
}

std::optional<Placement> best_placement(const PatchGrid& other, std::span<const Offset> offsets) {
  if (!other.is_normalized()) throw Error(ErrorCode::InvalidInput, "grid is not normalized");
  std::optional<Placement> best;
  for (const auto& anchor : enumerate_placements(offsets, other.rows(), other.cols())) {
    const double mean = placement_mean(other, offsets, anchor);
    if (!best || mean > best->mean_confidence) {
      best = Placement{anchor, {offsets.begin(), offsets.end()}, mean};
    }
  }
  return best;
}

std::vector<Placement> top_placements(const PatchGrid& other, std::span<const Offset> offsets,
                                      std::size_t k) {
  if (!other.is_normalized()) throw Error(ErrorCode::InvalidInput, "grid is not normalized");
  std::vector<Placement> all;
  for (const auto& anchor : enumerate_placements(offsets, other.rows(), other.cols())) {
    all.push_back(
        {anchor, {offsets.begin(), offsets.end()}, placement_mean(other, offsets, anchor)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Placement& a, const Placement& b) {
    return a.mean_confidence > b.mean_confidence;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

namespace {

void check_spatial(const Tensor& t, const GridSpec& spec, const char* what) {
  if (t.rank() < 2 || t.rank() > 3) {
    throw Error(ErrorCode::Shape, std::string(what) + " must be H×W or C×H×W");
  }
  if (t.height() != spec.image_h() || t.width() != spec.image_w()) {
    throw Error(ErrorCode::Shape, std::string(what) + " spatial dims differ from grid spec");
  }
}

void check_footprint(Cell origin, std::span<const Offset> offsets, const GridSpec& spec,
                     const char* what) {
  for (const auto& o : offsets) {
    const int r = origin.row + o.drow;
    const int c = origin.col + o.dcol;
    if (r < 0 || c < 0 || r >= static_cast<int>(spec.grid_rows()) ||
        c >= static_cast<int>(spec.grid_cols())) {
      throw Error(ErrorCode::Bounds, std::string(what) + " footprint leaves the grid");
    }
  }
}

// Calls fn(dst_pixel_index, src_pixel_index) for every pixel of every offset.
template <typename Fn>
void for_each_pixel_pair(const Region& region, const Placement& placement, const GridSpec& spec,
                         Fn&& fn) {
  const std::size_t ph = spec.patch_px_h();
  const std::size_t pw = spec.patch_px_w();
  const std::size_t width = spec.image_w();
  for (const auto& o : region.offsets) {
    const auto dst_r = static_cast<std::size_t>(region.bbox_origin.row + o.drow);
    const auto dst_c = static_cast<std::size_t>(region.bbox_origin.col + o.dcol);
    const auto src_r = static_cast<std::size_t>(placement.anchor.row + o.drow);
    const auto src_c = static_cast<std::size_t>(placement.anchor.col + o.dcol);
    for (std::size_t dy = 0; dy < ph; ++dy) {
      for (std::size_t dx = 0; dx < pw; ++dx) {
        fn((dst_r * ph + dy) * width + dst_c * pw + dx,
           (src_r * ph + dy) * width + src_c * pw + dx);
      }
    }
  }
}

void check_pair(const Region& region, const Placement& placement, const GridSpec& spec) {
  if (region.empty()) return;
  if (placement.offsets != region.offsets) {
    throw Error(ErrorCode::Shape, "placement shape differs from region shape");
  }
  check_footprint(region.bbox_origin, region.offsets, spec, "region");
  check_footprint(placement.anchor, placement.offsets, spec, "placement");
}

}  // namespace

double region_kl(const Tensor& low_logits, const Region& region, const Tensor& other_logits,
                 const Placement& candidate, const GridSpec& spec) {
  if (low_logits.rank() != 3 || low_logits.shape() != other_logits.shape()) {
    throw Error(ErrorCode::Shape, "KL selection needs matching C×H×W logits");
  }
  check_spatial(low_logits, spec, "logits");
  check_pair(region, candidate, spec);
  if (region.empty()) throw Error(ErrorCode::EmptyRegion, "KL over an empty region");

  const std::size_t k = low_logits.dim(0);
  const std::size_t pixels = low_logits.dim(1) * low_logits.dim(2);
  std::vector<double> zl(k), zh(k), pl(k), qh(k);
  auto softmax_into = [k](std::span<const double> z, std::span<double> out) {
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += (out[c] = std::exp(z[c] - peak));
    for (std::size_t c = 0; c < k; ++c) out[c] /= total;
  };

  double sum = 0.0;
  std::size_t count = 0;
  for_each_pixel_pair(region, candidate, spec, [&](std::size_t dst, std::size_t src) {
    for (std::size_t c = 0; c < k; ++c) {
      zl[c] = low_logits[c * pixels + dst];
      zh[c] = other_logits[c * pixels + src];
    }
    softmax_into(zl, pl);
    softmax_into(zh, qh);
    sum += kl_divergence(pl, qh);
    ++count;
  });
  return sum / static_cast<double>(count);
}

Placement kl_select_placement(const Tensor& low_logits, const Region& region,
                              const Tensor& other_logits, std::span<const Placement> candidates,
                              const GridSpec& spec) {
  if (candidates.empty()) throw Error(ErrorCode::NoPlacement, "no candidate placements");
  std::size_t best = 0;
  double best_kl = region_kl(low_logits, region, other_logits, candidates[0], spec);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double kl = region_kl(low_logits, region, other_logits, candidates[i], spec);
    if (kl < best_kl) {
      best_kl = kl;
      best = i;
    }
  }
  return candidates[best];
}

Tensor apply_replacement(const Tensor& target, const Tensor& source, const Region& region,
                         const Placement& placement, const GridSpec& spec) {
  if (target.shape() != source.shape())
    throw Error(ErrorCode::Shape, "target/source shapes differ");
  check_spatial(target, spec, "target");
  Tensor out = target;
  if (region.empty()) return out;
  check_pair(region, placement, spec);

  const std::size_t channels = target.rank() == 3 ? target.dim(0) : 1;
  const std::size_t plane = spec.image_h() * spec.image_w();
  auto src = source.data();
  auto dst = out.data();
  for_each_pixel_pair(region, placement, spec, [&](std::size_t d, std::size_t s) {
    for (std::size_t ch = 0; ch < channels; ++ch) dst[ch * plane + d] = src[ch * plane + s];
  });
  return out;
}

LabelMap apply_replacement(const LabelMap& target, const LabelMap& source, const Region& region,
                           const Placement& placement, const GridSpec& spec) {
  if (target.height() != source.height() || target.width() != source.width()) {
    throw Error(ErrorCode::Shape, "target/source label maps differ in shape");
  }
  if (target.height() != spec.image_h() || target.width() != spec.image_w()) {
    throw Error(ErrorCode::Shape, "label map dims differ from grid spec");
  }
  LabelMap out = target;
  if (region.empty()) return out;
  check_pair(region, placement, spec);
  auto src = source.labels();
  auto dst = out.labels();
  for_each_pixel_pair(region, placement, spec,
                      [&](std::size_t d, std::size_t s) { dst[d] = src[s]; });
  return out;
}

Region region_at(const Placement& placement) {
  std::vector<Cell> members;
  members.reserve(placement.offsets.size());
  for (const auto& o : placement.offsets) {
    members.push_back({placement.anchor.row + o.drow, placement.anchor.col + o.dcol});
  }
  return make_region(std::move(members));
}

std::vector<std::uint8_t> footprint_mask(const Region& region, const GridSpec& spec) {
  std::vector<std::uint8_t> mask(spec.image_h() * spec.image_w(), 0);
  if (region.empty()) return mask;
  check_footprint(region.bbox_origin, region.offsets, spec, "region");
  Placement self{region.bbox_origin, region.offsets, 0.0};
  for_each_pixel_pair(region, self, spec, [&](std::size_t d, std::size_t) { mask[d] = 1; });
  return mask;
}

}  // namespace cad
