#include "cli.hpp"

#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cad/dte.hpp"
#include "cad/error.hpp"
#include "cad/grid.hpp"
#include "cad/harness.hpp"
#include "cad/io.hpp"
#include "cad/llcr.hpp"
#include "cad/losses.hpp"
#include "cad/metrics.hpp"

namespace fs = std::filesystem;

namespace cad::cli {

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("cad", sink);
  logger->set_pattern("[cad] %l: %v");
  logger->set_level(spdlog::level::info);
  if (const char* env = std::getenv("CAD_LOG_LEVEL")) {
    const std::string level = env;
    if (level == "error") logger->set_level(spdlog::level::err);
    if (level == "debug") logger->set_level(spdlog::level::debug);
  }
  logger->flush_on(spdlog::level::debug);
  return logger;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Shape:
    case ErrorCode::GridMismatch:
    case ErrorCode::Bounds:
      return kShapeError;
    default:
      return kInputError;
  }
}

nlohmann::ordered_json record_json(const DisplacementRecord& rec) {
  nlohmann::ordered_json j;
  j["direction"] = to_string(rec.direction);
  j["iteration"] = rec.iteration;
  j["c_threshold"] = rec.c_threshold;
  j["r_threshold"] = rec.r_threshold;
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : rec.region.members) members.push_back({m.row, m.col});
  j["region"] = members;
  j["seed"] = {rec.region.seed.row, rec.region.seed.col};
  j["bbox_origin"] = {rec.region.bbox_origin.row, rec.region.bbox_origin.col};
  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& o : rec.region.offsets) offsets.push_back({o.drow, o.dcol});
  j["offsets"] = offsets;
  if (rec.placement) {
    j["placement"] = {rec.placement->anchor.row, rec.placement->anchor.col};
    j["placement_mean"] = rec.placement->mean_confidence;
  } else {
    j["placement"] = nullptr;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out << text;
}

std::vector<std::uint8_t> mask_pixels(const Region& region, const GridSpec& spec) {
  auto mask = footprint_mask(region, spec);
  for (auto& v : mask) v = v ? 255 : 0;
  return mask;
}

// ------------------------------------------------------------------ displace

struct DisplaceArgs {
  std::string weak, strong, weak_image, strong_image, out_dir;
  std::size_t grid = 16;
  double c_thr = 0.75;
  int r_thr = 16;
  bool kl = false;
  std::size_t k_top = 5;
};

DisplacementRecord locate(Direction dir, const PatchGrid& low, const PatchGrid& high,
                          const Tensor& low_logits, const Tensor& high_logits,
                          const DisplaceArgs& a, const GridSpec& spec) {
  DisplacementRecord rec;
  rec.direction = dir;
  rec.c_threshold = a.c_thr;
  rec.r_threshold = a.r_thr;
  rec.region = find_largest_low_confidence_region(low, a.c_thr, a.r_thr);
  if (rec.region.empty()) return rec;
  if (a.kl) {
    const auto candidates = top_placements(high, rec.region.offsets, a.k_top);
    if (!candidates.empty()) {
      rec.placement = kl_select_placement(low_logits, rec.region, high_logits, candidates, spec);
    }
  } else {
    rec.placement = best_placement(high, rec.region.offsets);
  }
  return rec;
}

int cmd_displace(const DisplaceArgs& a, std::ostream& out, spdlog::logger& log) {
  const Tensor weak = io::read_tensor(a.weak);
  const Tensor strong = io::read_tensor(a.strong);
  if (weak.rank() != 3 || weak.shape() != strong.shape()) {
    throw Error(ErrorCode::Shape, "weak and strong logits must be K×H×W with identical shapes");
  }
  const GridSpec spec(a.grid, a.grid, weak.dim(1), weak.dim(2));
  log.debug("grid {}x{} over {}x{} px", a.grid, a.grid, weak.dim(1), weak.dim(2));

  std::optional<Tensor> weak_img, strong_img;
  if (!a.weak_image.empty() || !a.strong_image.empty()) {
    if (a.weak_image.empty() || a.strong_image.empty()) {
      throw Error(ErrorCode::InvalidInput, "--weak-image and --strong-image go together");
    }
    weak_img = io::read_tensor(a.weak_image);
    strong_img = io::read_tensor(a.strong_image);
    if (weak_img->shape() != strong_img->shape() || weak_img->height() != spec.image_h() ||
        weak_img->width() != spec.image_w()) {
      throw Error(ErrorCode::Shape, "images must match the logits' spatial dims");
    }
  }

  const PatchGrid grid_w = confidence_grid(weak, spec);
  const PatchGrid grid_s = confidence_grid(strong, spec);
  const auto w2s = locate(Direction::WeakToStrong, grid_s, grid_w, strong, weak, a, spec);
  const auto s2w = locate(Direction::StrongToWeak, grid_w, grid_s, weak, strong, a, spec);

  auto swap = [&](const Tensor& target, const Tensor& source, const DisplacementRecord& rec) {
    return rec.placement ? apply_replacement(target, source, rec.region, *rec.placement, spec)
                         : target;
  };

  fs::create_directories(a.out_dir);
  const fs::path dir = a.out_dir;
  io::write_file(dir / "weak_prime.cadt", io::from_tensor(swap(weak, strong, s2w)));
  io::write_file(dir / "strong_prime.cadt", io::from_tensor(swap(strong, weak, w2s)));
  if (weak_img) {
    io::write_file(dir / "weak_image_prime.cadt",
                   io::from_tensor(swap(*weak_img, *strong_img, s2w)));
    io::write_file(dir / "strong_image_prime.cadt",
                   io::from_tensor(swap(*strong_img, *weak_img, w2s)));
  }
  io::write_pgm(dir / "mask_weak.pgm", spec.image_h(), spec.image_w(),
                mask_pixels(s2w.region, spec));
  io::write_pgm(dir / "mask_strong.pgm", spec.image_h(), spec.image_w(),
                mask_pixels(w2s.region, spec));

  nlohmann::ordered_json doc;
  doc["grid"] = {spec.grid_rows(), spec.grid_cols()};
  doc["patch_px"] = {spec.patch_px_h(), spec.patch_px_w()};
  doc["kl"] = a.kl;
  doc["records"] = {record_json(w2s), record_json(s2w)};
  write_text(dir / "displacement.json", doc.dump(2) + "\n");

  out << fmt::format(
      "weak_to_strong region_size={} placement={}\n", w2s.region.size(),
      w2s.placement ? fmt::format("{},{}", w2s.placement->anchor.row, w2s.placement->anchor.col)
                    : "none");
  out << fmt::format(
      "strong_to_weak region_size={} placement={}\n", s2w.region.size(),
      s2w.placement ? fmt::format("{},{}", s2w.placement->anchor.row, s2w.placement->anchor.col)
                    : "none");
  log.info("wrote displacement outputs to {}", a.out_dir);
  return kOk;
}

// ------------------------------------------------------------------ schedule

struct ScheduleArgs {
  ThresholdSchedule sched;
  std::optional<double> beta;
  long iters = 100;
};

int cmd_schedule(const ScheduleArgs& a, std::ostream& out) {
  if (a.iters < 1) throw Error(ErrorCode::InvalidConfig, "--iters must be >= 1");
  ThresholdSchedule s = a.sched;
  s.beta = a.beta ? *a.beta : default_beta(a.iters);
  s.validate();
  out << "t,psi,c_threshold,r_threshold\n";
  for (long t = 0; t < a.iters; ++t) {
    const double td = static_cast<double>(t);
    const auto th = thresholds_at(s, td);
    out << fmt::format("{},{:.9f},{:.9f},{}\n", t, ramp(s, td), th.c_threshold, th.r_threshold);
  }
  return kOk;
}

// ---------------------------------------------------------------------- demo

struct DemoArgs {
  std::uint64_t seed = 42;
  long iters = 300;
  std::string out;
  std::size_t labeled = 2, unlabeled = 16, size = 64, grid = 16;
  std::optional<double> beta;
  std::optional<double> lr;
  bool kl = false;
  std::size_t k_top = 5;
};

int cmd_demo(const DemoArgs& a, std::ostream& out, spdlog::logger& log) {
  if (a.iters < 1) throw Error(ErrorCode::InvalidConfig, "--iters must be >= 1");
  DemoConfig cfg = default_demo_config(a.seed, a.iters);
  cfg.iteration.grid = GridSpec(a.grid, a.grid, a.size, a.size);
  cfg.iteration.kl_mode = a.kl;
  cfg.iteration.k_top = a.k_top;
  if (a.beta) cfg.iteration.schedule.beta = *a.beta;
  if (a.lr) cfg.learning_rate = *a.lr;

  const Dataset ds = synth_dataset(a.seed, a.labeled, a.unlabeled, a.size, a.size);
  log.debug("training {} iterations on {} labeled + {} unlabeled", a.iters, a.labeled, a.unlabeled);
  const TrainingLog result = train_demo(ds, cfg, a.iters);
  write_text(a.out, to_jsonl(result));

  const auto& first = result.records.front();
  out << fmt::format("iterations={} initial_dsc={:.6f} final_dsc={:.6f} final_dsc_teacher={:.6f}\n",
                     result.records.size(), first.heldout_dsc, result.final_eval.dsc,
                     result.final_eval.dsc_teacher);
  log.info("wrote training log to {}", a.out);
  return kOk;
}

// ------------------------------------------------------------------- metrics

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string("missing");
}

int cmd_metrics(const std::string& pred_path, const std::string& truth_path,
                std::optional<int> class_id, const std::string& format, std::ostream& out) {
  const LabelMap pred0 = io::read_labels(pred_path);
  const LabelMap truth0 = io::read_labels(truth_path);
  const int k = std::max(pred0.num_classes(), truth0.num_classes());
  const LabelMap pred = io::read_labels(pred_path, k);
  const LabelMap truth = io::read_labels(truth_path, k);
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw Error(ErrorCode::Shape, "prediction and truth label maps differ in shape");
  }

  std::vector<int> classes;
  if (class_id) {
    classes.push_back(*class_id);
  } else {
    for (int c = 1; c < k; ++c) classes.push_back(c);
  }
  for (int c : classes) {
    const auto m = evaluate(pred, truth, c);
    if (format == "json") {
      nlohmann::ordered_json j;
      j["class"] = c;
      j["dsc"] = m.dsc;
      j["jaccard"] = m.jaccard;
      j["hd95"] = m.hd95 ? nlohmann::json(*m.hd95) : nlohmann::json(nullptr);
      j["asd"] = m.asd ? nlohmann::json(*m.asd) : nlohmann::json(nullptr);
      out << j.dump() << "\n";
    } else {
      out << fmt::format("class={} dsc={:.6f} jaccard={:.6f} hd95={} asd={}\n", c, m.dsc, m.jaccard,
                         fmt_opt(m.hd95), fmt_opt(m.asd));
    }
  }
  return kOk;
}

// -------------------------------------------------------------------- losses

int cmd_losses(const std::string& a_path, const std::string& b_path, const std::string& target_path,
               const std::string& format, std::ostream& out) {
  const Tensor a = io::read_tensor(a_path);
  const Tensor b = io::read_tensor(b_path);
  if (a.rank() != 3 || a.shape() != b.shape()) {
    throw Error(ErrorCode::Shape, "--a and --b must be K×H×W logits of identical shape");
  }
  const LabelMap target = io::read_labels(target_path, static_cast<int>(a.dim(0)));
  if (target.height() != a.dim(1) || target.width() != a.dim(2)) {
    throw Error(ErrorCode::Shape, "target label map does not match the logits");
  }
  const OneHotLabels onehot = OneHotLabels::from_labels(target);
  const Tensor pa = softmax(a);
  const Tensor pb = softmax(b);

  nlohmann::ordered_json j;
  j["dice_a"] = dice_loss(pa, onehot);
  j["ce_a"] = ce_loss(pa, onehot);
  j["mt_a"] = mt_loss(a, onehot);
  j["dice_b"] = dice_loss(pb, onehot);
  j["ce_b"] = ce_loss(pb, onehot);
  j["mt_b"] = mt_loss(b, onehot);
  j["cps_ab"] = cps_loss(a, b);
  j["cps_ba"] = cps_loss(b, a);
  if (format == "json") {
    out << j.dump() << "\n";
  } else {
    for (const auto& [key, value] : j.items()) {
      out << fmt::format("{}={:.9f}\n", key, value.get<double>());
    }
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto logger = make_logger(err);

  CLI::App app{"Confidence-aware adaptive displacement engine"};
  app.require_subcommand(1);

  DisplaceArgs displace;
  auto* sub_displace =
      app.add_subcommand("displace", "Swap low-confidence regions between two views");
  sub_displace->add_option("--weak", displace.weak, "Weak-view logits (K×H×W CADT)")->required();
  sub_displace->add_option("--strong", displace.strong, "Strong-view logits (K×H×W CADT)")
      ->required();
  sub_displace->add_option("--weak-image", displace.weak_image,
                           "Optional weak-view image to displace");
  sub_displace->add_option("--strong-image", displace.strong_image, "Optional strong-view image");
  sub_displace->add_option("--grid", displace.grid, "Patches per side")->check(CLI::PositiveNumber);
  sub_displace->add_option("--c-thr", displace.c_thr, "Confidence threshold in [0,1]");
  sub_displace->add_option("--r-thr", displace.r_thr, "Maximum region size in patches");
  sub_displace->add_flag("--kl", displace.kl, "Select among top-K placements by KL divergence");
  sub_displace->add_option("--k-top", displace.k_top, "Candidates for --kl")
      ->check(CLI::PositiveNumber);
  sub_displace->add_option("--out-dir", displace.out_dir, "Output directory")->required();

  ScheduleArgs schedule;
  auto* sub_schedule = app.add_subcommand("schedule", "Print the threshold schedule");
  sub_schedule->add_option("--c-min", schedule.sched.c_min);
  sub_schedule->add_option("--c-max", schedule.sched.c_max);
  sub_schedule->add_option("--r-min", schedule.sched.r_min);
  sub_schedule->add_option("--r-max", schedule.sched.r_max);
  sub_schedule->add_option("--beta", schedule.beta, "Ramp time constant (default iters/5)");
  sub_schedule->add_option("--iters", schedule.iters);

  DemoArgs demo;
  auto* sub_demo = app.add_subcommand("demo", "Run the synthetic two-student training demo");
  sub_demo->add_option("--seed", demo.seed);
  sub_demo->add_option("--iters", demo.iters);
  sub_demo->add_option("--out", demo.out, "Training log (JSON lines)")->required();
  sub_demo->add_option("--labeled", demo.labeled);
  sub_demo->add_option("--unlabeled", demo.unlabeled);
  sub_demo->add_option("--size", demo.size, "Image side in pixels");
  sub_demo->add_option("--grid", demo.grid, "Patches per side")->check(CLI::PositiveNumber);
  sub_demo->add_option("--beta", demo.beta);
  sub_demo->add_option("--lr", demo.lr);
  sub_demo->add_flag("--kl", demo.kl);
  sub_demo->add_option("--k-top", demo.k_top)->check(CLI::PositiveNumber);

  std::string pred_path, truth_path, metrics_format = "text";
  std::optional<int> metrics_class;
  auto* sub_metrics = app.add_subcommand("metrics", "DSC, Jaccard, 95HD and ASD of two label maps");
  sub_metrics->add_option("--pred", pred_path)->required();
  sub_metrics->add_option("--truth", truth_path)->required();
  sub_metrics->add_option("--class", metrics_class, "Single class to report");
  sub_metrics->add_option("--format", metrics_format)->check(CLI::IsMember({"text", "json"}));

  std::string a_path, b_path, target_path, losses_format = "text";
  auto* sub_losses =
      app.add_subcommand("losses", "Dice, CE, MT and CPS losses of two logit tensors");
  sub_losses->add_option("--a", a_path)->required();
  sub_losses->add_option("--b", b_path)->required();
  sub_losses->add_option("--target", target_path)->required();
  sub_losses->add_option("--format", losses_format)->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    logger->error("{}", e.what());
    return kInputError;
  }

  try {
    if (*sub_displace) return cmd_displace(displace, out, *logger);
    if (*sub_schedule) return cmd_schedule(schedule, out);
    if (*sub_demo) return cmd_demo(demo, out, *logger);
    if (*sub_metrics) return cmd_metrics(pred_path, truth_path, metrics_class, metrics_format, out);
    if (*sub_losses) return cmd_losses(a_path, b_path, target_path, losses_format, out);
  } catch (const Error& e) {
    logger->error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    logger->error("{}", e.what());
    return kInputError;
  }
  return kInputError;
}

}  // namespace cad::cli
