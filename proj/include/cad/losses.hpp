#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "cad/tensor.hpp"

namespace cad {

inline constexpr double kDiceSmooth = 1e-5;
inline constexpr double kLogFloor = 1e-12;

/// 1 − (2·Σ t·p + ε) / (Σ t + Σ p + ε), summed jointly over classes and pixels.
double dice_loss(const Tensor& pred_probs, const OneHotLabels& target);

/// Pixel-averaged −Σ_c t_c·ln(p_c + 1e-12).
double ce_loss(const Tensor& pred_probs, const OneHotLabels& target);

/// dice + ce on softmax(pred_logits).
double mt_loss(const Tensor& pred_logits, const OneHotLabels& target);

/// Dice of softmax(a) against the argmax one-hot of b; b is a constant target.
double cps_loss(const Tensor& logits_a, const Tensor& logits_b);

/// Same form as cps_loss, evaluated on logits of displaced inputs.
double cad_loss(const Tensor& logits_a, const Tensor& logits_b);

/// Σ p·ln(p/q) with 0·ln(0/q) = 0 and q floored at 1e-12.
double kl_divergence(std::span<const double> p, std::span<const double> q);

enum class LossKind { Dice, CrossEntropy, MeanTeacher };

LossKind parse_loss_kind(std::string_view name);

/// ∂loss/∂logits through the softmax, for a constant one-hot target.
Tensor loss_gradient(LossKind kind, const Tensor& pred_logits, const OneHotLabels& target);

/// Evaluates the selected loss on logits (softmax applied internally).
double loss_value(LossKind kind, const Tensor& pred_logits, const OneHotLabels& target);

struct LossComponents {
  std::optional<double> mt1, mt2, cps1, cps2, cad1, cad2;
};

struct LossReport {
  double l_mt1 = 0, l_mt2 = 0;
  double l_cps1 = 0, l_cps2 = 0;
  double l_cad1 = 0, l_cad2 = 0;
  double l_1 = 0, l_2 = 0, l_total = 0;
};

/// Sums the six components into per-student and overall totals. Every
/// component must be present, finite and non-negative.
LossReport total_loss(const LossComponents& components);

}  // namespace cad
