#include "cad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <string>

#include "cad/error.hpp"

namespace cad {

// ---------------------------------------------------------------- predictor

ToyPredictor::ToyPredictor(int num_classes, std::vector<double> weights)
    : num_classes_(num_classes), weights_(std::move(weights)) {
  if (num_classes_ < 2) throw Error(ErrorCode::InvalidClassCount, "predictor needs >= 2 classes");
  if (weights_.size() != static_cast<std::size_t>(num_classes_) * kFeatures) {
    throw Error(ErrorCode::Shape, "predictor weights must be K × 4");
  }
}

ToyPredictor ToyPredictor::random(int num_classes, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> w(static_cast<std::size_t>(num_classes) * kFeatures);
  for (auto& v : w) v = dist(rng);
  return ToyPredictor(num_classes, std::move(w));
}

namespace {

double axis_coord(std::size_t i, std::size_t n) {
  return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
}

void check_image(const Tensor& image) {
  if (image.rank() != 2) throw Error(ErrorCode::Shape, "predictor input must be an H×W image");
}

}  // namespace

Tensor ToyPredictor::logits(const Tensor& image) const {
  check_image(image);
  const std::size_t h = image.dim(0);
  const std::size_t w = image.dim(1);
  const auto k = static_cast<std::size_t>(num_classes_);
  Tensor out({k, h, w});
  for (std::size_t c = 0; c < k; ++c) {
    const double* wc = &weights_[c * kFeatures];
    for (std::size_t y = 0; y < h; ++y) {
      const double fy = axis_coord(y, h);
      for (std::size_t x = 0; x < w; ++x) {
        out.at(c, y, x) = wc[0] * image.at(y, x) + wc[1] * axis_coord(x, w) + wc[2] * fy + wc[3];
      }
    }
  }
  return out;
}

void ToyPredictor::accumulate_gradient(const Tensor& image, const Tensor& grad_logits,
                                       std::span<double> grad_weights) const {
  check_image(image);
  const std::size_t h = image.dim(0);
  const std::size_t w = image.dim(1);
  const auto k = static_cast<std::size_t>(num_classes_);
  if (grad_logits.shape() != std::vector<std::size_t>{k, h, w} ||
      grad_weights.size() != weights_.size()) {
    throw Error(ErrorCode::Shape, "gradient buffers do not match the predictor");
  }
  for (std::size_t c = 0; c < k; ++c) {
    double g[kFeatures] = {0, 0, 0, 0};
    for (std::size_t y = 0; y < h; ++y) {
      const double fy = axis_coord(y, h);
      for (std::size_t x = 0; x < w; ++x) {
        const double d = grad_logits.at(c, y, x);
        g[0] += d * image.at(y, x);
        g[1] += d * axis_coord(x, w);
        g[2] += d * fy;
        g[3] += d;
      }
    }
    for (std::size_t f = 0; f < kFeatures; ++f) grad_weights[c * kFeatures + f] += g[f];
  }
}

ToyPredictor ema_update(const ToyPredictor& teacher, const ToyPredictor& student_a,
                        const ToyPredictor& student_b, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "EMA decay outside [0, 1]");
  if (teacher.weights().size() != student_a.weights().size() ||
      teacher.weights().size() != student_b.weights().size()) {
    throw Error(ErrorCode::Shape, "EMA weight shapes differ");
  }
  std::vector<double> w(teacher.weights().begin(), teacher.weights().end());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double mean = 0.5 * (student_a.weights()[i] + student_b.weights()[i]);
    w[i] = decay * w[i] + (1.0 - decay) * mean;
  }
  return ToyPredictor(teacher.num_classes(), std::move(w));
}

// ------------------------------------------------------------------ dataset

namespace {

struct SynthImage {
  Tensor image;
  LabelMap labels;
  std::vector<Disk> disks;
};

SynthImage synth_image(std::mt19937_64& rng, std::size_t h, std::size_t w, int num_classes) {
  const double short_side = static_cast<double>(std::min(h, w));
  std::uniform_real_distribution<double> radius_dist(short_side / 8.0, short_side / 4.0);
  std::normal_distribution<double> noise(0.0, 0.1);

  Tensor image({h, w}, 0.2);
  std::vector<std::int32_t> ids(h * w, 0);
  std::vector<Disk> disks;
  for (int cls = 1; cls < num_classes; ++cls) {
    const double r = radius_dist(rng);
    std::uniform_real_distribution<double> cy(r, static_cast<double>(h) - r);
    std::uniform_real_distribution<double> cx(r, static_cast<double>(w) - r);
    const double y0 = cy(rng);
    const double x0 = cx(rng);
    const double intensity = 0.2 + 0.6 * cls / (num_classes - 1);
    disks.push_back({y0, x0, r, cls});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = static_cast<double>(y) + 0.5 - y0;
        const double dx = static_cast<double>(x) + 0.5 - x0;
        if (dy * dy + dx * dx <= r * r) {
          ids[y * w + x] = cls;
          image.at(y, x) = intensity;
        }
      }
    }
  }
  for (std::size_t i = 0; i < image.size(); ++i) image[i] += noise(rng);
  return {std::move(image), LabelMap(h, w, std::move(ids), num_classes), std::move(disks)};
}

}  // namespace

Dataset synth_dataset(std::uint64_t seed, std::size_t labeled, std::size_t unlabeled,
                      std::size_t height, std::size_t width, int num_classes) {
  if (num_classes < 2)
    throw Error(ErrorCode::InvalidClassCount, "synthetic data needs >= 2 classes");
  if (height == 0 || width == 0)
    throw Error(ErrorCode::Shape, "synthetic images need positive dims");
  std::mt19937_64 rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < labeled; ++i) {
    auto s = synth_image(rng, height, width, num_classes);
    ds.labeled.push_back({std::move(s.image), std::move(s.labels), std::move(s.disks)});
  }
  for (std::size_t i = 0; i < unlabeled; ++i) {
    ds.unlabeled.push_back(synth_image(rng, height, width, num_classes).image);
  }
  return ds;
}

Dataset heldout_split(std::uint64_t seed, std::size_t count, std::size_t height, std::size_t width,
                      int num_classes) {
  return synth_dataset(seed ^ 0x9e3779b97f4a7c15ULL, count, 0, height, width, num_classes);
}

DemoConfig default_demo_config(std::uint64_t seed, long iterations) {
  DemoConfig cfg;
  cfg.iteration.seed = seed;
  cfg.iteration.schedule.beta = default_beta(iterations);
  return cfg;
}

Dataset default_demo_dataset(std::uint64_t seed) { return synth_dataset(seed, 2, 16, 64, 64); }

// ----------------------------------------------------------------- cad step

namespace {

DisplacementRecord displace_direction(Direction direction, const PatchGrid& low_grid,
                                      const PatchGrid& high_grid, const Tensor& low_logits,
                                      const Tensor& high_logits, const Thresholds& th,
                                      const IterationConfig& cfg, long t) {
  DisplacementRecord rec;
  rec.direction = direction;
  rec.c_threshold = th.c_threshold;
  rec.r_threshold = th.r_threshold;
  rec.iteration = t;
  rec.region = find_largest_low_confidence_region(low_grid, th.c_threshold, th.r_threshold);
  if (rec.region.empty()) return rec;
  for (const auto& m : rec.region.members) {
    rec.member_confidence.push_back(
        low_grid.norm_at(static_cast<std::size_t>(m.row), static_cast<std::size_t>(m.col)));
  }
  if (cfg.kl_mode) {
    const auto candidates = top_placements(high_grid, rec.region.offsets, cfg.k_top);
    if (!candidates.empty()) {
      rec.placement =
          kl_select_placement(low_logits, rec.region, high_logits, candidates, cfg.grid);
    }
  } else {
    rec.placement = best_placement(high_grid, rec.region.offsets);
  }
  return rec;
}

Tensor replace_with(const Tensor& target, const Tensor& source, const DisplacementRecord& rec,
                    const GridSpec& spec) {
  if (!rec.placement) return target;
  return apply_replacement(target, source, rec.region, *rec.placement, spec);
}

}  // namespace

CadStep cad_step(const Tensor& x_w, const Tensor& x_s, const ToyPredictor& f1,
                 const ToyPredictor& f2, const ToyPredictor& teacher, const IterationConfig& cfg,
                 long t) {
  if (x_w.shape() != x_s.shape())
    throw Error(ErrorCode::Shape, "weak and strong views differ in shape");
  if (x_w.rank() != 2 || x_w.dim(0) != cfg.grid.image_h() || x_w.dim(1) != cfg.grid.image_w()) {
    throw Error(ErrorCode::GridMismatch, "views do not match the grid spec");
  }
  cfg.schedule.validate();

  Tensor logits_w = f1.logits(x_w);
  Tensor logits_s = f2.logits(x_s);
  const PatchGrid grid_w = confidence_grid(logits_w, cfg.grid);
  const PatchGrid grid_s = confidence_grid(logits_s, cfg.grid);
  const Thresholds th = thresholds_at(cfg.schedule, static_cast<double>(t));

  auto w2s =
      displace_direction(Direction::WeakToStrong, grid_s, grid_w, logits_s, logits_w, th, cfg, t);
  auto s2w =
      displace_direction(Direction::StrongToWeak, grid_w, grid_s, logits_w, logits_s, th, cfg, t);
  Tensor x_s_prime = replace_with(x_s, x_w, w2s, cfg.grid);
  Tensor x_w_prime = replace_with(x_w, x_s, s2w, cfg.grid);

  Tensor logits_w_prime = f1.logits(x_w_prime);
  Tensor logits_s_prime = f2.logits(x_s_prime);
  OneHotLabels pseudo = OneHotLabels::from_argmax(teacher.logits(x_w));

  LossComponents parts;
  parts.mt1 = mt_loss(logits_w, pseudo);
  parts.mt2 = mt_loss(logits_s, pseudo);
  parts.cps1 = cps_loss(logits_w, logits_s);
  parts.cps2 = cps_loss(logits_s, logits_w);
  parts.cad1 = cad_loss(logits_w_prime, logits_s_prime);
  parts.cad2 = cad_loss(logits_s_prime, logits_w_prime);

  return CadStep{std::move(x_w_prime), std::move(x_s_prime),      std::move(w2s),
                 std::move(s2w),       total_loss(parts),         std::move(logits_w),
                 std::move(logits_s),  std::move(logits_w_prime), std::move(logits_s_prime),
                 std::move(pseudo)};
}

// ----------------------------------------------------------------- training

FinalEval evaluate_predictor(const ToyPredictor& model, const Dataset& heldout) {
  FinalEval out;
  if (heldout.labeled.empty()) return out;
  double hd_sum = 0.0, asd_sum = 0.0;
  std::size_t hd_count = 0;
  for (const auto& s : heldout.labeled) {
    const LabelMap pred = argmax_labels(model.logits(s.image));
    const auto m = evaluate(pred, s.labels, 1);
    out.dsc += m.dsc;
    out.jaccard += m.jaccard;
    if (m.hd95) {
      hd_sum += *m.hd95;
      asd_sum += *m.asd;
      ++hd_count;
    }
  }
  const auto n = static_cast<double>(heldout.labeled.size());
  out.dsc /= n;
  out.jaccard /= n;
  if (hd_count > 0) {
    out.hd95 = hd_sum / static_cast<double>(hd_count);
    out.asd = asd_sum / static_cast<double>(hd_count);
  }
  return out;
}

namespace {

double mean_dsc(const ToyPredictor& model, const Dataset& heldout) {
  if (heldout.labeled.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : heldout.labeled) {
    sum += dsc(argmax_labels(model.logits(s.image)), s.labels, 1);
  }
  return sum / static_cast<double>(heldout.labeled.size());
}

Tensor strong_view(const Tensor& image, std::mt19937_64& rng, const DemoConfig& cfg) {
  std::uniform_real_distribution<double> scale_dist(cfg.strong_scale_min, cfg.strong_scale_max);
  std::normal_distribution<double> noise(0.0, cfg.strong_noise);
  const double scale = scale_dist(rng);
  Tensor out = image;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = out[i] * scale + (cfg.strong_noise > 0.0 ? noise(rng) : 0.0);
  }
  return out;
}

void descend(ToyPredictor& model, std::span<const double> grad, double lr) {
  auto w = model.weights();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
}

void check_finite(const LossReport& r, long t) {
  if (!std::isfinite(r.l_total)) {
    throw Error(ErrorCode::Divergence, "non-finite loss at iteration " + std::to_string(t));
  }
}

}  // namespace

TrainingLog train_demo(const Dataset& dataset, const DemoConfig& cfg, long iterations) {
  if (dataset.labeled.empty())
    throw Error(ErrorCode::InvalidConfig, "training needs labeled samples");
  if (iterations < 1) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 1");
  if (!(cfg.learning_rate >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "learning rate must be >= 0");
  cfg.iteration.schedule.validate();

  const auto& first = dataset.labeled.front();
  const std::size_t h = first.image.dim(0);
  const std::size_t w = first.image.dim(1);
  const int k = first.labels.num_classes();
  const auto& icfg = cfg.iteration;
  if (h != icfg.grid.image_h() || w != icfg.grid.image_w()) {
    throw Error(ErrorCode::GridMismatch, "dataset images do not match the grid spec");
  }

  std::mt19937_64 init_rng(icfg.seed);
  TrainingLog log;
  log.f1 = ToyPredictor::random(k, init_rng);
  log.f2 = ToyPredictor::random(k, init_rng);
  log.teacher = ema_update(log.f1, log.f1, log.f2, 0.0);
  const Dataset heldout = heldout_split(icfg.seed, cfg.heldout, h, w, k);

  const auto& unlabeled = dataset.unlabeled;
  std::vector<double> g1(log.f1.weights().size()), g2(g1.size());
  for (long t = 0; t < iterations; ++t) {
    std::seed_seq seq{icfg.seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(seq);

    const auto& sample = dataset.labeled[static_cast<std::size_t>(t) % dataset.labeled.size()];
    const Tensor& x_u =
        unlabeled.empty()
            ? dataset.labeled[static_cast<std::size_t>(t) % dataset.labeled.size()].image
            : unlabeled[static_cast<std::size_t>(t) % unlabeled.size()];
    const Tensor x_w = x_u;
    const Tensor x_s = strong_view(x_u, rng, cfg);
    const Tensor& xl_w = sample.image;
    const Tensor xl_s = strong_view(sample.image, rng, cfg);
    const OneHotLabels truth = OneHotLabels::from_labels(sample.labels);

    IterationRecord rec;
    rec.t = t;
    rec.thresholds = thresholds_at(icfg.schedule, static_cast<double>(t));
    rec.heldout_dsc = mean_dsc(log.f1, heldout);
    rec.heldout_dsc_teacher = mean_dsc(log.teacher, heldout);

    CadStep step = cad_step(x_w, x_s, log.f1, log.f2, log.teacher, icfg, t);
    const Tensor sup_logits1 = log.f1.logits(xl_w);
    const Tensor sup_logits2 = log.f2.logits(xl_s);

    LossComponents parts;
    parts.mt1 = mt_loss(sup_logits1, truth) + step.report.l_mt1;
    parts.mt2 = mt_loss(sup_logits2, truth) + step.report.l_mt2;
    parts.cps1 = step.report.l_cps1;
    parts.cps2 = step.report.l_cps2;
    parts.cad1 = step.report.l_cad1;
    parts.cad2 = step.report.l_cad2;
    rec.losses = total_loss(parts);
    check_finite(rec.losses, t);

    const OneHotLabels cps_target1 = OneHotLabels::from_argmax(step.logits_s);
    const OneHotLabels cps_target2 = OneHotLabels::from_argmax(step.logits_w);
    const OneHotLabels cad_target1 = OneHotLabels::from_argmax(step.logits_s_prime);
    const OneHotLabels cad_target2 = OneHotLabels::from_argmax(step.logits_w_prime);

    std::fill(g1.begin(), g1.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    log.f1.accumulate_gradient(xl_w, loss_gradient(LossKind::MeanTeacher, sup_logits1, truth), g1);
    log.f1.accumulate_gradient(
        x_w, loss_gradient(LossKind::MeanTeacher, step.logits_w, step.pseudo_labels), g1);
    log.f1.accumulate_gradient(x_w, loss_gradient(LossKind::Dice, step.logits_w, cps_target1), g1);
    log.f1.accumulate_gradient(step.x_w_prime,
                               loss_gradient(LossKind::Dice, step.logits_w_prime, cad_target1), g1);

    log.f2.accumulate_gradient(xl_s, loss_gradient(LossKind::MeanTeacher, sup_logits2, truth), g2);
    log.f2.accumulate_gradient(
        x_s, loss_gradient(LossKind::MeanTeacher, step.logits_s, step.pseudo_labels), g2);
    log.f2.accumulate_gradient(x_s, loss_gradient(LossKind::Dice, step.logits_s, cps_target2), g2);
    log.f2.accumulate_gradient(step.x_s_prime,
                               loss_gradient(LossKind::Dice, step.logits_s_prime, cad_target2), g2);

    descend(log.f1, g1, cfg.learning_rate);
    descend(log.f2, g2, cfg.learning_rate);
    log.teacher = ema_update(log.teacher, log.f1, log.f2, icfg.ema_decay);

    rec.weak_to_strong = std::move(step.weak_to_strong);
    rec.strong_to_weak = std::move(step.strong_to_weak);
    log.records.push_back(std::move(rec));
  }

  log.final_eval = evaluate_predictor(log.f1, heldout);
  log.final_eval.dsc_teacher = mean_dsc(log.teacher, heldout);
  return log;
}

// ------------------------------------------------------------------ logging

namespace {

nlohmann::ordered_json record_json(const DisplacementRecord& rec) {
  nlohmann::ordered_json j;
  j["direction"] = to_string(rec.direction);
  j["region_size"] = rec.region.size();
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : rec.region.members) members.push_back({m.row, m.col});
  j["region"] = members;
  if (rec.placement) {
    j["placement"] = {rec.placement->anchor.row, rec.placement->anchor.col};
    j["placement_mean"] = rec.placement->mean_confidence;
  } else {
    j["placement"] = nullptr;
  }
  return j;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string to_jsonl(const TrainingLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    nlohmann::ordered_json j;
    j["t"] = r.t;
    j["c_threshold"] = r.thresholds.c_threshold;
    j["r_threshold"] = r.thresholds.r_threshold;
    j["l_mt1"] = r.losses.l_mt1;
    j["l_mt2"] = r.losses.l_mt2;
    j["l_cps1"] = r.losses.l_cps1;
    j["l_cps2"] = r.losses.l_cps2;
    j["l_cad1"] = r.losses.l_cad1;
    j["l_cad2"] = r.losses.l_cad2;
    j["l_1"] = r.losses.l_1;
    j["l_2"] = r.losses.l_2;
    j["l_total"] = r.losses.l_total;
    j["heldout_dsc"] = r.heldout_dsc;
    j["heldout_dsc_teacher"] = r.heldout_dsc_teacher;
    j["weak_to_strong"] = record_json(r.weak_to_strong);
    j["strong_to_weak"] = record_json(r.strong_to_weak);
    out += j.dump();
    out += '\n';
  }
  nlohmann::ordered_json s;
  s["summary"] = true;
  s["iterations"] = log.records.size();
  s["final_dsc"] = log.final_eval.dsc;
  s["final_jaccard"] = log.final_eval.jaccard;
  s["final_hd95"] = optional_json(log.final_eval.hd95);
  s["final_asd"] = optional_json(log.final_eval.asd);
  s["final_dsc_teacher"] = log.final_eval.dsc_teacher;
  s["f1"] = std::vector<double>(log.f1.weights().begin(), log.f1.weights().end());
  s["f2"] = std::vector<double>(log.f2.weights().begin(), log.f2.weights().end());
  s["teacher"] = std::vector<double>(log.teacher.weights().begin(), log.teacher.weights().end());
  out += s.dump();
  out += '\n';
  return out;
}

}  // namespace cad
