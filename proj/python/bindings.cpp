#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>
#include <vector>

#include "cad/dte.hpp"
#include "cad/error.hpp"
#include "cad/grid.hpp"
#include "cad/harness.hpp"
#include "cad/llcr.hpp"
#include "cad/losses.hpp"
#include "cad/metrics.hpp"

namespace py = pybind11;
using namespace cad;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

LabelMap to_labels(const IntArray& a, int num_classes) {
  if (a.ndim() != 2) throw Error(ErrorCode::Shape, "label maps must be 2-D");
  std::vector<std::int32_t> ids(a.data(), a.data() + a.size());
  if (num_classes <= 0) {
    num_classes = 2;
    for (auto v : ids) num_classes = std::max(num_classes, v + 1);
  }
  return LabelMap(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  std::move(ids), num_classes);
}

PatchGrid grid_of(const DoubleArray& normalized) {
  if (normalized.ndim() != 2) throw Error(ErrorCode::Shape, "patch grids must be 2-D");
  return grid_from_normalized(
      static_cast<std::size_t>(normalized.shape(0)), static_cast<std::size_t>(normalized.shape(1)),
      std::vector<double>(normalized.data(), normalized.data() + normalized.size()));
}

std::vector<Cell> to_cells(const std::vector<std::pair<int, int>>& cells) {
  std::vector<Cell> out;
  for (const auto& [r, c] : cells) out.push_back({r, c});
  return out;
}

std::vector<std::pair<int, int>> from_cells(const std::vector<Cell>& cells) {
  std::vector<std::pair<int, int>> out;
  for (const auto& c : cells) out.emplace_back(c.row, c.col);
  return out;
}

OneHotLabels onehot(const IntArray& labels, int num_classes) {
  return OneHotLabels::from_labels(to_labels(labels, num_classes));
}

}  // namespace

PYBIND11_MODULE(_cad, m) {
  m.doc() = "Bindings for the cad_core library";
  py::register_exception<Error>(m, "CadError", PyExc_ValueError);

  m.def("softmax", [](const DoubleArray& logits) { return to_numpy(softmax(to_tensor(logits))); });

  m.def(
      "confidence_grid",
      [](const DoubleArray& logits, std::size_t grid_rows, std::size_t grid_cols) {
        const Tensor t = to_tensor(logits);
        const PatchGrid g =
            confidence_grid(t, GridSpec(grid_rows, grid_cols, t.height(), t.width()));
        py::array_t<double> raw({grid_rows, grid_cols}), norm({grid_rows, grid_cols});
        std::copy(g.raw.begin(), g.raw.end(), raw.mutable_data());
        std::copy(g.normalized.begin(), g.normalized.end(), norm.mutable_data());
        return py::make_tuple(raw, norm);
      },
      py::arg("logits"), py::arg("grid_rows") = 16, py::arg("grid_cols") = 16,
      "Raw and min-max normalized patch confidence of K×H×W logits.");

  m.def(
      "find_region",
      [](const DoubleArray& normalized, double c_threshold, int r_threshold) {
        return from_cells(
            find_largest_low_confidence_region(grid_of(normalized), c_threshold, r_threshold)
                .members);
      },
      py::arg("normalized"), py::arg("c_threshold"), py::arg("r_threshold"),
      "Members of the low-confidence region in admission order.");

  m.def(
      "best_placement",
      [](const DoubleArray& normalized,
         const std::vector<std::pair<int, int>>& members) -> std::optional<py::tuple> {
        const Region region = make_region(to_cells(members));
        const auto p = best_placement(grid_of(normalized), region.offsets);
        if (!p) return std::nullopt;
        return py::make_tuple(py::make_tuple(p->anchor.row, p->anchor.col), p->mean_confidence);
      },
      py::arg("normalized"), py::arg("members"),
      "((row, col), mean) of the highest-confidence anchor for the region's shape, or None.");

  m.def(
      "apply_replacement",
      [](const DoubleArray& target, const DoubleArray& source,
         const std::vector<std::pair<int, int>>& members, std::pair<int, int> anchor,
         std::size_t grid_rows, std::size_t grid_cols) {
        const Tensor t = to_tensor(target);
        const Region region = make_region(to_cells(members));
        const Placement placement{{anchor.first, anchor.second}, region.offsets, 0.0};
        const GridSpec spec(grid_rows, grid_cols, t.height(), t.width());
        return to_numpy(apply_replacement(t, to_tensor(source), region, placement, spec));
      },
      py::arg("target"), py::arg("source"), py::arg("members"), py::arg("anchor"),
      py::arg("grid_rows") = 16, py::arg("grid_cols") = 16);

  m.def(
      "ramp",
      [](double t, double beta) {
        ThresholdSchedule s;
        s.beta = beta;
        return ramp(s, t);
      },
      py::arg("t"), py::arg("beta") = ThresholdSchedule{}.beta);

  m.def(
      "thresholds_at",
      [](double t, double c_min, double c_max, int r_min, int r_max, double beta) {
        const ThresholdSchedule s{c_min, c_max, r_min, r_max, beta};
        const auto th = thresholds_at(s, t);
        return py::make_tuple(th.c_threshold, th.r_threshold);
      },
      py::arg("t"), py::arg("c_min") = 0.01, py::arg("c_max") = 0.75, py::arg("r_min") = 1,
      py::arg("r_max") = 16, py::arg("beta") = 1000.0);

  m.def(
      "dice_loss",
      [](const DoubleArray& probs, const IntArray& labels) {
        const Tensor p = to_tensor(probs);
        return dice_loss(p, onehot(labels, static_cast<int>(p.dim(0))));
      },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "ce_loss",
      [](const DoubleArray& probs, const IntArray& labels) {
        const Tensor p = to_tensor(probs);
        return ce_loss(p, onehot(labels, static_cast<int>(p.dim(0))));
      },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "mt_loss",
      [](const DoubleArray& logits, const IntArray& labels) {
        const Tensor z = to_tensor(logits);
        return mt_loss(z, onehot(labels, static_cast<int>(z.dim(0))));
      },
      py::arg("logits"), py::arg("labels"));
  m.def(
      "cps_loss",
      [](const DoubleArray& a, const DoubleArray& b) {
        return cps_loss(to_tensor(a), to_tensor(b));
      },
      py::arg("logits_a"), py::arg("logits_b"));
  m.def("kl_divergence", [](const std::vector<double>& p, const std::vector<double>& q) {
    return kl_divergence(p, q);
  });

  auto metric = [&m](const char* name, auto fn) {
    m.def(
        name,
        [fn](const IntArray& pred, const IntArray& truth, int class_id) {
          const LabelMap p0 = to_labels(pred, 0);
          const LabelMap t0 = to_labels(truth, 0);
          const int k = std::max({p0.num_classes(), t0.num_classes(), class_id + 1});
          return fn(to_labels(pred, k), to_labels(truth, k), class_id);
        },
        py::arg("pred"), py::arg("truth"), py::arg("class_id") = 1);
  };
  metric("dsc", [](const LabelMap& a, const LabelMap& b, int c) { return dsc(a, b, c); });
  metric("jaccard", [](const LabelMap& a, const LabelMap& b, int c) { return jaccard(a, b, c); });
  metric("hd95", [](const LabelMap& a, const LabelMap& b, int c) { return hd95(a, b, c); });
  metric("asd", [](const LabelMap& a, const LabelMap& b, int c) { return asd(a, b, c); });

  m.def(
      "train_demo",
      [](std::uint64_t seed, long iterations) {
        std::string log;
        {
          py::gil_scoped_release release;
          log = to_jsonl(train_demo(default_demo_dataset(seed),
                                    default_demo_config(seed, iterations), iterations));
        }
        return log;
      },
      py::arg("seed") = 42, py::arg("iterations") = 300,
      "Runs the synthetic demo and returns its JSON-lines training log.");
}
