#include "cad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cad/error.hpp"
#include "cad/grid.hpp"

namespace cad {

namespace {

void check_pair(const Tensor& pred, const OneHotLabels& target) {
  if (pred.shape() != target.tensor().shape()) {
    throw Error(ErrorCode::Shape, "prediction and target shapes differ");
  }
}

double pixel_count(const Tensor& t) { return static_cast<double>(t.dim(1) * t.dim(2)); }

// Chain rule through the per-pixel softmax: dz_c = p_c (g_c − Σ_k g_k p_k).
Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs) {
  const std::size_t k = probs.dim(0);
  const std::size_t pixels = probs.dim(1) * probs.dim(2);
  Tensor out(probs.shape());
  for (std::size_t px = 0; px < pixels; ++px) {
    double dot = 0.0;
    for (std::size_t c = 0; c < k; ++c) dot += grad_probs[c * pixels + px] * probs[c * pixels + px];
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t i = c * pixels + px;
      out[i] = probs[i] * (grad_probs[i] - dot);
    }
  }
  return out;
}

Tensor dice_grad_probs(const Tensor& probs, const OneHotLabels& target) {
  const auto t = target.tensor().data();
  const auto p = probs.data();
  const double inter = std::inner_product(t.begin(), t.end(), p.begin(), 0.0);
  const double denom = std::accumulate(t.begin(), t.end(), 0.0) +
                       std::accumulate(p.begin(), p.end(), 0.0) + kDiceSmooth;
  const double numer = 2.0 * inter + kDiceSmooth;
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = -(2.0 * t[i] * denom - numer) / (denom * denom);
  }
  return g;
}

Tensor ce_grad_probs(const Tensor& probs, const OneHotLabels& target) {
  const auto t = target.tensor().data();
  const double n = pixel_count(probs);
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -t[i] / (std::max(probs[i], kLogFloor) * n);
  return g;
}

}  // namespace

double dice_loss(const Tensor& pred_probs, const OneHotLabels& target) {
  check_pair(pred_probs, target);
  const auto t = target.tensor().data();
  const auto p = pred_probs.data();
  const double inter = std::inner_product(t.begin(), t.end(), p.begin(), 0.0);
  const double denom =
      std::accumulate(t.begin(), t.end(), 0.0) + std::accumulate(p.begin(), p.end(), 0.0);
  return std::max(0.0, 1.0 - (2.0 * inter + kDiceSmooth) / (denom + kDiceSmooth));
}

double ce_loss(const Tensor& pred_probs, const OneHotLabels& target) {
  check_pair(pred_probs, target);
  const auto t = target.tensor().data();
  double sum = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0) sum -= t[i] * std::log(std::max(pred_probs[i], kLogFloor));
  }
  return sum / pixel_count(pred_probs);
}

double mt_loss(const Tensor& pred_logits, const OneHotLabels& target) {
  const Tensor probs = softmax(pred_logits);
  return dice_loss(probs, target) + ce_loss(probs, target);
}

double cps_loss(const Tensor& logits_a, const Tensor& logits_b) {
  if (logits_a.shape() != logits_b.shape())
    throw Error(ErrorCode::Shape, "CPS logits differ in shape");
  return dice_loss(softmax(logits_a), OneHotLabels::from_argmax(logits_b));
}

double cad_loss(const Tensor& logits_a, const Tensor& logits_b) {
  return cps_loss(logits_a, logits_b);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorCode::NotADistribution, "distributions differ in length");
  }
  auto check = [](std::span<const double> d) {
    double total = 0.0;
    for (double v : d) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NotADistribution, "bad entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-4) {
      throw Error(ErrorCode::NotADistribution, "sum " + std::to_string(total) + " is not 1");
    }
  };
  check(p);
  check(q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], kLogFloor));
  }
  return std::max(kl, 0.0);
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "dice") return LossKind::Dice;
  if (name == "ce") return LossKind::CrossEntropy;
  if (name == "mt") return LossKind::MeanTeacher;
  throw Error(ErrorCode::UnsupportedLoss, "unknown loss '" + std::string(name) + "'");
}

Tensor loss_gradient(LossKind kind, const Tensor& pred_logits, const OneHotLabels& target) {
  check_pair(pred_logits, target);
  const Tensor probs = softmax(pred_logits);
  switch (kind) {
    case LossKind::Dice:
      return softmax_backward(probs, dice_grad_probs(probs, target));
    case LossKind::CrossEntropy:
      return softmax_backward(probs, ce_grad_probs(probs, target));
    case LossKind::MeanTeacher: {
      Tensor g = dice_grad_probs(probs, target);
      const Tensor ce = ce_grad_probs(probs, target);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ce[i];
      return softmax_backward(probs, g);
    }
  }
  throw Error(ErrorCode::UnsupportedLoss, "unsupported loss selector");
}

double loss_value(LossKind kind, const Tensor& pred_logits, const OneHotLabels& target) {
  const Tensor probs = softmax(pred_logits);
  switch (kind) {
    case LossKind::Dice:
      return dice_loss(probs, target);
    case LossKind::CrossEntropy:
      return ce_loss(probs, target);
    case LossKind::MeanTeacher:
      return dice_loss(probs, target) + ce_loss(probs, target);
  }
  throw Error(ErrorCode::UnsupportedLoss, "unsupported loss selector");
}

LossReport total_loss(const LossComponents& c) {
  auto take = [](const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorCode::MissingComponent, std::string(name) + " is missing");
    if (!std::isfinite(*v))
      throw Error(ErrorCode::Divergence, std::string(name) + " is not finite");
    if (*v < 0.0) throw Error(ErrorCode::InvalidInput, std::string(name) + " is negative");
    return *v;
  };
  LossReport r;
  r.l_mt1 = take(c.mt1, "l_mt1");
  r.l_mt2 = take(c.mt2, "l_mt2");
  r.l_cps1 = take(c.cps1, "l_cps1");
  r.l_cps2 = take(c.cps2, "l_cps2");
  r.l_cad1 = take(c.cad1, "l_cad1");
  r.l_cad2 = take(c.cad2, "l_cad2");
  r.l_1 = r.l_mt1 + r.l_cps1 + r.l_cad1;
  r.l_2 = r.l_mt2 + r.l_cps2 + r.l_cad2;
  r.l_total = r.l_1 + r.l_2;
  return r;
}

}  // namespace cad
