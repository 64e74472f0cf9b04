// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cad/dte.hpp"
#include "cad/grid.hpp"
#include "cad/harness.hpp"
#include "cad/llcr.hpp"
#include "cad/losses.hpp"
#include "cad/metrics.hpp"
#include "oracles.hpp"

using namespace cad;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  template <typename Describe>
  void expect(bool cond, Describe&& describe) {
    if (!cond && ok) detail = describe();
    ok = ok && cond;
  }
};

/// Exact equality with the closure when it fits under the cap, otherwise a
/// connected subset of exactly `cap` cells. Flat masks keep the 5M-case sweep fast.
bool region_matches_closure(const Region& region, const std::set<Cell>& closure, int rows, int cols,
                            int cap) {
  std::vector<char> in_closure(static_cast<std::size_t>(rows * cols), 0);
  for (const auto& c : closure) in_closure[c.row * cols + c.col] = 1;
  std::vector<char> in_region(in_closure.size(), 0);
  for (const auto& m : region.members) {
    const int i = m.row * cols + m.col;
    if (in_region[i] || !in_closure[i]) return false;
    in_region[i] = 1;
  }
  const std::size_t expected = std::min(closure.size(), static_cast<std::size_t>(cap));
  if (region.members.size() != expected) return false;
  if (region.members.empty()) return true;

  std::vector<char> seen(in_region.size(), 0);
  std::vector<int> stack{region.members.front().row * cols + region.members.front().col};
  seen[stack.back()] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int r = i / cols, c = i % cols;
    const int next[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& n : next) {
      if (n[0] < 0 || n[0] >= rows || n[1] < 0 || n[1] >= cols) continue;
      const int j = n[0] * cols + n[1];
      if (in_region[j] && !seen[j]) {
        seen[j] = 1;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  return reached == region.members.size();
}

Outcome c1_bfs_oracle() {
  Outcome o;
  const double levels[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  const double thresholds[] = {0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0};
  const int caps[] = {1, 2, 4, 9};
  std::vector<double> values(9);
  long checked = 0;
  for (int code = 0; code < (1 << 18); ++code) {
    for (int i = 0; i < 9; ++i) values[i] = levels[(code >> (2 * i)) & 3];
    const PatchGrid g = grid_from_normalized(3, 3, values);
    for (double thr : thresholds) {
      const auto closure = oracle::flood_closure(values, 3, 3, thr);
      for (int cap : caps) {
        const auto region = find_largest_low_confidence_region(g, thr, cap);
        o.expect(region_matches_closure(region, closure, 3, 3, cap),
                 [&] { return fmt::format("3x3 grid #{} thr={} cap={}", code, thr, cap); });
        ++checked;
      }
    }
  }

  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    PatchGrid g{GridSpec(5, 5, 5, 5), std::vector<double>(25), {}};
    for (auto& v : g.raw) v = u(rng);
    g = normalize(g);
    const double thr = u(rng);
    const int cap = 1 + trial % 25;
    const auto closure = oracle::flood_closure(g.normalized, 5, 5, thr);
    const auto region = find_largest_low_confidence_region(g, thr, cap);
    o.expect(region_matches_closure(region, closure, 5, 5, cap),
             [&] { return fmt::format("5x5 trial {}", trial); });
    ++checked;
  }
  if (o.ok) o.detail = fmt::format("{} searches", checked);
  return o;
}

Outcome c2_placement_optimality() {
  Outcome o;
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size_dist(1, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    PatchGrid g{GridSpec(16, 16, 16, 16), std::vector<double>(256), {}};
    for (auto& v : g.raw) v = u(rng);
    g = normalize(g);
    const auto cells = oracle::random_connected_shape(rng, size_dist(rng), 6);
    const auto offsets = shape_offsets(make_region(cells));
    const auto best = best_placement(g, offsets);
    const auto scan = oracle::exhaustive_scan(g.normalized, 16, 16, offsets);
    o.expect(best.has_value(), [&] { return fmt::format("trial {} found no placement", trial); });
    if (!best) continue;
    for (double m : scan.all_means) {
      o.expect(best->mean_confidence >= m - 1e-12,
               [&] { return fmt::format("trial {} not optimal", trial); });
    }
    o.expect(std::abs(best->mean_confidence - scan.mean) <= 1e-12,
             [&] { return fmt::format("trial {} mean differs from scan", trial); });
  }
  if (o.ok) o.detail = "1000 grids";
  return o;
}

Outcome c3_dte_constants() {
  Outcome o;
  const ThresholdSchedule s;
  const auto t0 = thresholds_at(s, 0.0);
  o.expect(t0.c_threshold == 0.01 && t0.r_threshold == 1,
           [&] { return std::string("t = 0 thresholds"); });
  const auto inf = thresholds_at(s, 1e9);
  o.expect(std::abs(inf.c_threshold - 0.75) <= 1e-12 && inf.r_threshold == 16,
           [&] { return std::string("limits"); });
  o.expect(std::abs(ramp(s, s.beta) - (1.0 - std::exp(-1.0))) <= 1e-12,
           [&] { return std::string("ramp at beta"); });
  Thresholds prev = t0;
  for (long t = 1; t <= static_cast<long>(10 * s.beta); ++t) {
    const auto cur = thresholds_at(s, static_cast<double>(t));
    o.expect(cur.c_threshold >= prev.c_threshold && cur.r_threshold >= prev.r_threshold,
             [&] { return fmt::format("non-monotone at t = {}", t); });
    prev = cur;
  }
  if (o.ok) o.detail = fmt::format("c(10β)={:.6f} r(10β)={}", prev.c_threshold, prev.r_threshold);
  return o;
}

Outcome c4_losses() {
  Outcome o;
  std::mt19937_64 rng(4004);
  const auto labels = oracle::random_labels(rng, 4, 4, 3);
  const auto target = OneHotLabels::from_labels(labels);
  Tensor perfect({3, 4, 4}, 0.0);
  for (std::size_t i = 0; i < 16; ++i)
    perfect[static_cast<std::size_t>(labels.labels()[i]) * 16 + i] = 30.0;
  const Tensor probs = softmax(perfect);
  o.expect(dice_loss(probs, target) < 1e-4, [&] { return std::string("perfect dice"); });
  o.expect(ce_loss(probs, target) < 1e-4, [&] { return std::string("perfect ce"); });
  o.expect(mt_loss(perfect, target) < 1e-4, [&] { return std::string("perfect mt"); });

  for (std::size_t k = 2; k <= 6; ++k) {
    const Tensor uniform({k, 3, 3}, 1.0 / static_cast<double>(k));
    const auto lk = oracle::random_labels(rng, 3, 3, static_cast<int>(k));
    o.expect(std::abs(ce_loss(uniform, OneHotLabels::from_labels(lk)) -
                      std::log(static_cast<double>(k))) <= 1e-9,
             [&] { return fmt::format("uniform ce K={}", k); });
  }

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor logits = oracle::random_tensor(rng, {2, 4, 4});
    const auto t = OneHotLabels::from_labels(oracle::random_labels(rng, 4, 4, 2));
    for (auto kind : {LossKind::Dice, LossKind::CrossEntropy, LossKind::MeanTeacher}) {
      const Tensor analytic = loss_gradient(kind, logits, t);
      const Tensor numeric = oracle::finite_difference(
          logits, [&](const Tensor& z) { return loss_value(kind, z, t); });
      const double err = oracle::relative_error(analytic, numeric);
      worst = std::max(worst, err);
      o.expect(err < 1e-4,
               [&] { return fmt::format("gradient trial {} rel err {:.3g}", trial, err); });
    }
  }
  if (o.ok) o.detail = fmt::format("worst gradient rel err {:.2e}", worst);
  return o;
}

Outcome c5_replacement() {
  Outcome o;
  std::mt19937_64 rng(5005);
  const GridSpec spec(8, 8, 32, 32);
  std::uniform_int_distribution<int> size_dist(1, 6);
  std::uniform_int_distribution<int> cell(0, 7);
  int done = 0;
  while (done < 200) {
    const auto shape = oracle::random_connected_shape(rng, size_dist(rng), 3);
    const Cell at{cell(rng), cell(rng)};
    const Cell anchor{cell(rng), cell(rng)};
    std::vector<Cell> members;
    bool fits = true;
    for (const auto& c : shape) {
      members.push_back({at.row + c.row, at.col + c.col});
      fits = fits && members.back().row < 8 && members.back().col < 8;
    }
    if (!fits) continue;
    const Region region = make_region(members);
    const Placement placement{anchor, region.offsets, 0.0};
    const Region mirrored = region_at(placement);
    bool disjoint = true;
    for (const auto& m : mirrored.members) {
      disjoint = disjoint && m.row < 8 && m.col < 8 &&
                 std::find(members.begin(), members.end(), m) == members.end();
    }
    if (!disjoint) continue;
    ++done;

    const Tensor a = oracle::random_tensor(rng, {2, 32, 32});
    const Tensor b = oracle::random_tensor(rng, {2, 32, 32});
    const Tensor a1 = apply_replacement(a, b, region, placement, spec);
    const Placement back{region.bbox_origin, region.offsets, 0.0};
    const Tensor b1 = apply_replacement(b, a, mirrored, back, spec);

    const auto mask = footprint_mask(region, spec);
    for (std::size_t ch = 0; ch < 2; ++ch) {
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i])
          o.expect(a1[ch * mask.size() + i] == a[ch * mask.size() + i],
                   [&] { return std::string("locality"); });
      }
    }
    std::vector<Cell> src;
    for (const auto& off : region.offsets)
      src.push_back({anchor.row + off.drow, anchor.col + off.dcol});
    std::vector<Cell> dst;
    for (const auto& off : region.offsets) {
      dst.push_back({region.bbox_origin.row + off.drow, region.bbox_origin.col + off.dcol});
    }
    const auto expected =
        oracle::copy_patches({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()},
                             2, 32, 32, 4, 4, dst, src);
    o.expect(std::vector<double>(a1.data().begin(), a1.data().end()) == expected,
             [&] { return std::string("pixel copy"); });
    o.expect(apply_replacement(a1, b1, region, placement, spec) == a,
             [&] { return std::string("double swap restores a"); });
    o.expect(apply_replacement(b1, a1, mirrored, back, spec) == b,
             [&] { return std::string("double swap restores b"); });
  }
  if (o.ok) o.detail = "200 disjoint pairs";
  return o;
}

LabelMap mask_from(std::size_t h, std::size_t w, const std::vector<Cell>& pixels) {
  std::vector<std::int32_t> ids(h * w, 0);
  for (const auto& p : pixels)
    ids[static_cast<std::size_t>(p.row) * w + static_cast<std::size_t>(p.col)] = 1;
  return LabelMap(h, w, std::move(ids), 2);
}

Outcome c6_metrics() {
  Outcome o;
  std::mt19937_64 rng(6006);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int32_t> pa(16 * 16), pb(16 * 16);
    for (auto& v : pa) v = coin(rng);
    for (auto& v : pb) v = coin(rng);
    const LabelMap a(16, 16, pa, 2), b(16, 16, pb, 2);
    const double d = dsc(a, b, 1);
    const double j = jaccard(a, b, 1);
    o.expect(std::abs(d - 2.0 * j / (1.0 + j)) <= 1e-12,
             [&] { return fmt::format("identity trial {}", trial); });
  }
  for (int shift = 1; shift <= 6; ++shift) {
    const auto p = mask_from(12, 12, {{2, 2}});
    const auto horizontal = mask_from(12, 12, {{2, 2 + shift}});
    const auto vertical = mask_from(12, 12, {{2 + shift, 2}});
    for (const auto* q : {&horizontal, &vertical}) {
      o.expect(hd95(p, *q, 1) == shift && asd(p, *q, 1) == shift,
               [&] { return fmt::format("shift {} distance", shift); });
    }
  }
  const auto m = mask_from(10, 10, {{3, 3}, {3, 4}, {4, 3}, {4, 4}, {5, 4}});
  const auto r = evaluate(m, m, 1);
  o.expect(r.dsc == 1.0 && r.jaccard == 1.0 && r.hd95 == 0.0 && r.asd == 0.0,
           [&] { return std::string("identical masks"); });
  if (o.ok) o.detail = "200 random pairs";
  return o;
}

Outcome c7_demo() {
  Outcome o;
  const std::uint64_t seed = 42;
  const long iterations = 300;
  const auto ds = default_demo_dataset(seed);
  const auto cfg = default_demo_config(seed, iterations);
  const auto first = train_demo(ds, cfg, iterations);
  const auto second = train_demo(ds, cfg, iterations);
  o.expect(to_jsonl(first) == to_jsonl(second), [&] { return std::string("runs differ"); });

  Thresholds prev{-1.0, 0};
  for (const auto& r : first.records) {
    o.expect(r.thresholds.c_threshold >= prev.c_threshold &&
                 r.thresholds.r_threshold >= prev.r_threshold,
             [&] { return fmt::format("thresholds decrease at t = {}", r.t); });
    prev = r.thresholds;
    for (const auto* rec : {&r.weak_to_strong, &r.strong_to_weak}) {
      o.expect(rec->c_threshold == r.thresholds.c_threshold &&
                   rec->r_threshold == r.thresholds.r_threshold,
               [&] { return fmt::format("record thresholds at t = {}", r.t); });
      o.expect(rec->region.size() <= static_cast<std::size_t>(r.thresholds.r_threshold),
               [&] { return fmt::format("region too large at t = {}", r.t); });
      for (double c : rec->member_confidence) {
        o.expect(c <= r.thresholds.c_threshold,
                 [&] { return fmt::format("member above threshold at t = {}", r.t); });
      }
    }
  }
  const double start = first.records.front().heldout_dsc;
  const double end = first.final_eval.dsc;
  o.expect(end > start, [&] { return fmt::format("dsc {:.4f} -> {:.4f}", start, end); });
  if (o.ok) o.detail = fmt::format("held-out dsc {:.4f} -> {:.4f}", start, end);
  return o;
}

Outcome c8_kl() {
  Outcome o;
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  const double kl = kl_divergence(p, q);
  o.expect(std::abs(kl - 0.143841) <= 1e-6, [&] { return fmt::format("kl = {:.9f}", kl); });

  std::mt19937_64 rng(8008);
  const GridSpec spec(4, 4, 8, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor low = oracle::random_tensor(rng, {3, 8, 8});
    Tensor other = oracle::random_tensor(rng, {3, 8, 8});
    const Region region = make_region({{0, 0}, {1, 0}});
    const Placement exact{{2, 3}, region.offsets, 0.0};
    other = apply_replacement(other, low, region_at(exact),
                              {region.bbox_origin, region.offsets, 0.0}, spec);
    const std::vector<Placement> candidates{{{0, 1}, region.offsets, 0.9},
                                            {{1, 2}, region.offsets, 0.8},
                                            exact,
                                            {{0, 3}, region.offsets, 0.1}};
    o.expect(std::abs(region_kl(low, region, other, exact, spec)) <= 1e-12,
             [&] { return std::string("zero kl candidate"); });
    o.expect(kl_select_placement(low, region, other, candidates, spec).anchor == exact.anchor,
             [&] { return fmt::format("trial {} picked another candidate", trial); });
  }
  if (o.ok) o.detail = fmt::format("kl = {:.6f}", kl);
  return o;
}

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"C1", "region search matches flood-fill oracle", 10.0, c1_bfs_oracle},
      {"C2", "best placement is optimal", 10.0, c2_placement_optimality},
      {"C3", "threshold schedule constants", 0.0, c3_dte_constants},
      {"C4", "loss values and gradients", 0.0, c4_losses},
      {"C5", "replacement locality and double swap", 0.0, c5_replacement},
      {"C6", "metric identities", 0.0, c6_metrics},
      {"C7", "end-to-end demo", 120.0, c7_demo},
      {"C8", "KL placement variant", 0.0, c8_kl},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = fmt::format("exception: {}", e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.ok = false;
      o.detail += fmt::format(" (over {:.0f} s budget)", c.budget_s);
    }
    failures += !o.ok;
    std::printf("%s %s %s: %s [%.2f s]\n", o.ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
