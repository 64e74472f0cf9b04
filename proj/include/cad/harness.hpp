#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cad/dte.hpp"
#include "cad/grid.hpp"
#include "cad/llcr.hpp"
#include "cad/losses.hpp"
#include "cad/metrics.hpp"
#include "cad/tensor.hpp"

namespace cad {

/// Per-pixel linear classifier over (intensity, x, y, 1); x and y are scaled
/// to [-1, 1]. Stands in for a segmentation network at desk scale.
class ToyPredictor {
 public:
  static constexpr std::size_t kFeatures = 4;

  ToyPredictor() = default;
  ToyPredictor(int num_classes, std::vector<double> weights);
  static ToyPredictor random(int num_classes, std::mt19937_64& rng, double scale = 0.5);

  int num_classes() const noexcept { return num_classes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }

  /// K×H×W logits for an H×W image.
  Tensor logits(const Tensor& image) const;
  /// Adds ∂loss/∂weights given ∂loss/∂logits on `image`.
  void accumulate_gradient(const Tensor& image, const Tensor& grad_logits,
                           std::span<double> grad_weights) const;

  bool operator==(const ToyPredictor&) const = default;

 private:
  int num_classes_ = 0;
  std::vector<double> weights_;  // K × kFeatures, row-major
};

/// teacher ← decay·teacher + (1 − decay)·mean(student_a, student_b).
ToyPredictor ema_update(const ToyPredictor& teacher, const ToyPredictor& student_a,
                        const ToyPredictor& student_b, double decay);

struct IterationConfig {
  GridSpec grid{16, 16, 64, 64};
  ThresholdSchedule schedule{};
  double ema_decay = 0.99;
  bool kl_mode = false;
  std::size_t k_top = 5;
  std::uint64_t seed = 42;
};

/// Generator parameters of one synthetic disk, in pixel units.
struct Disk {
  double center_y = 0.0;
  double center_x = 0.0;
  double radius = 0.0;
  int class_id = 1;
};

struct LabeledSample {
  Tensor image;
  LabelMap labels;
  std::vector<Disk> disks;  ///< empty for real data
};

struct Dataset {
  std::vector<LabeledSample> labeled;
  std::vector<Tensor> unlabeled;

  bool empty() const noexcept { return labeled.empty() && unlabeled.empty(); }
};

/// Bright disk on a noisy background per image; labels mark the disk.
/// Bit-identical for the same arguments.
Dataset synth_dataset(std::uint64_t seed, std::size_t labeled, std::size_t unlabeled,
                      std::size_t height, std::size_t width, int num_classes = 2);

/// Everything one CAD iteration produces. Logits are kept for the trainer.
struct CadStep {
  Tensor x_w_prime;
  Tensor x_s_prime;
  DisplacementRecord weak_to_strong;  ///< low region in the strong view
  DisplacementRecord strong_to_weak;  ///< low region in the weak view
  LossReport report;                  ///< MT terms use teacher pseudo-labels

  Tensor logits_w, logits_s;
  Tensor logits_w_prime, logits_s_prime;
  OneHotLabels pseudo_labels;
};

/// One iteration of the displacement pipeline on an unlabeled weak/strong pair:
/// confidence grids for both students, thresholds at t, region search and
/// placement in both directions, replacement, re-prediction and the loss stack.
CadStep cad_step(const Tensor& x_w, const Tensor& x_s, const ToyPredictor& f1,
                 const ToyPredictor& f2, const ToyPredictor& teacher, const IterationConfig& cfg,
                 long t);

struct DemoConfig {
  IterationConfig iteration{};
  double learning_rate = 0.5;
  std::size_t heldout = 8;
  double strong_noise = 0.1;
  double strong_scale_min = 0.8;
  double strong_scale_max = 1.2;
};

/// Demo defaults: 64×64 images, 16×16 grid, beta = iterations / 5.
DemoConfig default_demo_config(std::uint64_t seed, long iterations);
/// Demo data: 2 labeled + 16 unlabeled 64×64 synthetic images.
Dataset default_demo_dataset(std::uint64_t seed);

struct IterationRecord {
  long t = 0;
  Thresholds thresholds;
  LossReport losses;
  DisplacementRecord weak_to_strong;
  DisplacementRecord strong_to_weak;
  double heldout_dsc = 0.0;  ///< student 1, before this iteration's update
  double heldout_dsc_teacher = 0.0;
};

struct FinalEval {
  double dsc = 0.0;
  double jaccard = 0.0;
  std::optional<double> hd95;
  std::optional<double> asd;
  double dsc_teacher = 0.0;
};

struct TrainingLog {
  std::vector<IterationRecord> records;
  FinalEval final_eval;
  ToyPredictor f1, f2, teacher;
};

/// Gradient-descent training of two students plus an EMA teacher with a CAD
/// step every iteration. Deterministic in (dataset, cfg, iterations).
TrainingLog train_demo(const Dataset& dataset, const DemoConfig& cfg, long iterations);

/// Held-out split matching a demo seed.
Dataset heldout_split(std::uint64_t seed, std::size_t count, std::size_t height, std::size_t width,
                      int num_classes = 2);

/// Mean held-out metrics of a predictor on class 1.
FinalEval evaluate_predictor(const ToyPredictor& model, const Dataset& heldout);

/// One JSON object per iteration, then a summary line.
std::string to_jsonl(const TrainingLog& log);

}  // namespace cad
