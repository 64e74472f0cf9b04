#include "cad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cad/error.hpp"

namespace cad {

namespace {

struct Point {
  int y;
  int x;
};

void check_inputs(const LabelMap& pred, const LabelMap& truth, int class_id) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw Error(ErrorCode::Shape, "prediction and truth label maps differ in shape");
  }
  const int classes = std::max(pred.num_classes(), truth.num_classes());
  if (class_id < 0 || class_id >= classes) {
    throw Error(ErrorCode::InvalidInput, "class id " + std::to_string(class_id) + " is invalid");
  }
}

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap count_overlap(const LabelMap& pred, const LabelMap& truth, int class_id) {
  Overlap o;
  auto p = pred.labels();
  auto t = truth.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_a = p[i] == class_id;
    const bool in_b = t[i] == class_id;
    o.a += in_a;
    o.b += in_b;
    o.both += in_a && in_b;
  }
  return o;
}

// Mask pixels with at least one 4-neighbour outside the mask; the image
// border counts as outside.
std::vector<Point> boundary(const LabelMap& labels, int class_id) {
  const int h = static_cast<int>(labels.height());
  const int w = static_cast<int>(labels.width());
  auto inside = [&](int y, int x) {
    return y >= 0 && y < h && x >= 0 && x < w && labels.at(y, x) == class_id;
  };
  std::vector<Point> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!inside(y, x)) continue;
      if (!inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1)) {
        out.push_back({y, x});
      }
    }
  }
  return out;
}

void append_directed(const std::vector<Point>& from, const std::vector<Point>& to,
                     std::vector<double>& out) {
  for (const auto& a : from) {
    long best = std::numeric_limits<long>::max();
    for (const auto& b : to) {
      const long dy = a.y - b.y;
      const long dx = a.x - b.x;
      best = std::min(best, dy * dy + dx * dx);
    }
    out.push_back(std::sqrt(static_cast<double>(best)));
  }
}

}  // namespace

double dsc(const LabelMap& pred, const LabelMap& truth, int class_id) {
  check_inputs(pred, truth, class_id);
  const auto o = count_overlap(pred, truth, class_id);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double jaccard(const LabelMap& pred, const LabelMap& truth, int class_id) {
  check_inputs(pred, truth, class_id);
  const auto o = count_overlap(pred, truth, class_id);
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

std::vector<double> boundary_distances(const LabelMap& pred, const LabelMap& truth, int class_id) {
  check_inputs(pred, truth, class_id);
  const auto a = boundary(pred, class_id);
  const auto b = boundary(truth, class_id);
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::UndefinedMetric, "surface distance needs two non-empty masks");
  }
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  append_directed(a, b, out);
  append_directed(b, a, out);
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::UndefinedMetric, "percentile of nothing");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

double hd95(const LabelMap& pred, const LabelMap& truth, int class_id) {
  return percentile(boundary_distances(pred, truth, class_id), 95.0);
}

double asd(const LabelMap& pred, const LabelMap& truth, int class_id) {
  const auto d = boundary_distances(pred, truth, class_id);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

MetricReport evaluate(const LabelMap& pred, const LabelMap& truth, int class_id) {
  MetricReport r;
  r.class_id = class_id;
  r.dsc = dsc(pred, truth, class_id);
  r.jaccard = jaccard(pred, truth, class_id);
  try {
    const auto d = boundary_distances(pred, truth, class_id);
    r.hd95 = percentile(d, 95.0);
    r.asd = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedMetric) throw;
  }
  return r;
}

}  // namespace cad
