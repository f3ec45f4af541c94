#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "handcloud/folding.hpp"
#include "handcloud/hand.hpp"
#include "handcloud/templates.hpp"

namespace handcloud {

// ============================================================================
// Synthetic scenes
// ============================================================================

/// Fixed random Fourier features of the 15 flexion angles, standing in for an
/// image encoder: z_k = cos(w_k . theta + b_k).
class LatentEncoder {
 public:
  static constexpr std::size_t kInput = kDigitCount * kPhalanxCount;

  explicit LatentEncoder(std::uint64_t seed, double frequency_scale = 1.0)
      : weights_(kLatentDim, kInput), phase_(kLatentDim) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < weights_.size(); ++i) weights_.data()[i] = rng.normal(0.0, frequency_scale);
    for (Eigen::Index i = 0; i < phase_.size(); ++i) phase_[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  LatentCode encode(const DigitArray& flexion) const {
    Eigen::VectorXd theta(kInput);
    for (std::size_t d = 0; d < kDigitCount; ++d)
      for (std::size_t p = 0; p < kPhalanxCount; ++p) theta[static_cast<Eigen::Index>(d * kPhalanxCount + p)] = flexion[d][p];
    return LatentCode(((weights_ * theta + phase_).array().cos()).matrix());
  }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd phase_;
};

struct SyntheticScene {
  DigitArray flexion{};
  PointCloud cloud;  ///< labeled, in the normalized hand frame
  HandPose joints{};  ///< normalized hand frame
  LatentCode latent;
};

struct SceneSetConfig {
  std::size_t count = 200;
  ComponentBudget budget = default_budget(600);
  std::uint64_t seed = 0;
};

struct SceneSet {
  std::vector<SyntheticScene> scenes;
  Normalization frame;  ///< millimeters -> normalized units
};

/// Frame of the open rest hand: zero centroid, unit max radius.
inline Normalization canonical_hand_frame() {
  const PointCloud dense = sample_mesh_surface(hand_surface_mesh(), 8192, 0);
  return Normalization::fit(dense.points);
}

/// Random curl per digit with per-joint jitter, clamped to the valid range.
inline DigitArray random_flexion(Rng& rng) {
  constexpr double deg = std::numbers::pi / 180.0;
  constexpr std::array<std::array<double, 3>, kDigitCount> max_flex = {
      {{35 * deg, 45 * deg, 40 * deg}, {75 * deg, 95 * deg, 65 * deg}, {75 * deg, 95 * deg, 65 * deg},
       {75 * deg, 95 * deg, 65 * deg}, {75 * deg, 95 * deg, 65 * deg}}};
  DigitArray out{};
  for (std::size_t d = 0; d < kDigitCount; ++d) {
    const double curl = rng.uniform();
    for (std::size_t p = 0; p < kPhalanxCount; ++p) {
      const double jitter = rng.uniform(-10.0, 10.0) * deg;
      out[d][p] = std::clamp(curl * max_flex[d][p] + jitter, -std::numbers::pi / 2, std::numbers::pi);
    }
  }
  return out;
}

inline SceneSet make_scenes(const SceneSetConfig& config) {
  SceneSet set;
  set.frame = canonical_hand_frame();
  const LatentEncoder encoder(derive_seed(config.seed, 0xE4C0DE));
  Rng rng(derive_seed(config.seed, 0x5CE4E));
  set.scenes.reserve(config.count);
  for (std::size_t s = 0; s < config.count; ++s) {
    SyntheticScene scene;
    scene.flexion = random_flexion(rng);
    SyntheticHandSpec spec;
    spec.flexion = scene.flexion;
    const SyntheticHand hand = build_synthetic_hand(spec);
    const PointCloud raw = sample_components(visible_shell(hand), config.budget, derive_seed(config.seed, 1000 + s));
    scene.cloud = set.frame.apply(raw);
    for (std::size_t j = 0; j < kJointCount; ++j) scene.joints[j] = set.frame.apply(hand.joints[j]);
    scene.latent = encoder.encode(scene.flexion);
    set.scenes.push_back(std::move(scene));
  }
  return set;
}

// ============================================================================
// Training
// ============================================================================

struct TrainerConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  LossMode mode = LossMode::GlobalOnly;

  void validate() const {
    if (!(learning_rate > 0.0)) fail_usage("learning rate must be positive");
    if (batch_size < 1) fail_usage("batch size must be at least 1");
    if (!(weight_decay >= 0.0)) fail_usage("weight decay must be non-negative");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown mean;  ///< mean over scenes, as seen during the epoch
};

struct EvaluationSummary {
  double mean_cd = 0.0;            ///< mean over scenes of the Chamfer distance
  double mean_emd_per_point = 0.0; ///< mean over scenes of EMD / N
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  EvaluationSummary final_metrics;
};

inline EvaluationSummary evaluate(const FoldingDecoder& decoder, const std::vector<SyntheticScene>& scenes) {
  std::vector<double> cd(scenes.size()), emd(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t s) {
    const PointCloud pred = decoder.decode(scenes[s].latent);
    cd[s] = chamfer_distance(scenes[s].cloud, pred);
    emd[s] = earth_movers_distance(scenes[s].cloud, pred).first / static_cast<double>(pred.size());
  }, 1);
  EvaluationSummary out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    out.mean_cd += cd[s];
    out.mean_emd_per_point += emd[s];
  }
  out.mean_cd /= static_cast<double>(scenes.size());
  out.mean_emd_per_point /= static_cast<double>(scenes.size());
  return out;
}

namespace detail {

inline void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  for (std::size_t c = 0; c < kComponentCount; ++c) {
    acc.cd_local[c] += x.cd_local[c];
    acc.emd_local[c] += x.emd_local[c];
  }
  acc.cd_global += x.cd_global;
  acc.emd_global += x.emd_global;
  acc.total += x.total;
}

inline void scale(LossBreakdown& acc, double s) {
  for (std::size_t c = 0; c < kComponentCount; ++c) {
    acc.cd_local[c] *= s;
    acc.emd_local[c] *= s;
  }
  acc.cd_global *= s;
  acc.emd_global *= s;
  acc.total *= s;
}

}  // namespace detail

/**
 * Mini-batch ADAM on the point-cloud loss. Each epoch visits the scenes in a
 * seeded random order; a batch gradient is the mean of per-scene gradients,
 * summed in batch order. Assignment potentials persist per scene across
 * epochs as warm starts.
 */
template <typename Progress>
TrainLog train(FoldingDecoder& decoder, const std::vector<SyntheticScene>& scenes, const TrainerConfig& config,
               Progress&& progress) {
  config.validate();
  if (scenes.empty()) fail_usage("training needs at least one scene");
  nn::Adam adam(decoder.parameter_count(), {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<LossWarmStart> warm(scenes.size());
  TrainLog log;
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    LossBreakdown epoch_sum;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<LossAndGradient> results(end - start);
      parallel_for(end - start, [&](std::size_t k) {
        const std::size_t s = order[start + k];
        results[k] = loss_and_gradients(decoder, scenes[s].latent, scenes[s].cloud, config.mode, &warm[s]);
      });
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(decoder.parameter_count()));
      for (const auto& r : results) {
        if (!std::isfinite(r.loss.total) || !r.gradient.allFinite())
          fail_numerical("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                         std::to_string(r.loss.total) + ")");
        grad += r.gradient;
        detail::accumulate(epoch_sum, r.loss);
      }
      grad /= static_cast<double>(results.size());
      adam.step(decoder.parameters(), std::move(grad));
    }
    detail::scale(epoch_sum, 1.0 / static_cast<double>(scenes.size()));
    log.epochs.push_back({epoch, epoch_sum});
    progress(log.epochs.back());
  }
  log.final_metrics = evaluate(decoder, scenes);
  return log;
}

inline TrainLog train(FoldingDecoder& decoder, const std::vector<SyntheticScene>& scenes, const TrainerConfig& config) {
  return train(decoder, scenes, config, [](const EpochRecord&) {});
}

struct PoseTrainLog {
  std::vector<double> epoch_loss;  ///< mean L2 pose loss per epoch
  double final_mpjpe = 0.0;        ///< normalized units
};

/// Pose-stage training: defaults follow the reconstruction schedule but with lr 1e-4.
inline PoseTrainLog train_pose(PoseDecoder& decoder, const std::vector<SyntheticScene>& scenes,
                               TrainerConfig config) {
  config.validate();
  if (scenes.empty()) fail_usage("training needs at least one scene");
  nn::Adam adam(decoder.parameter_count(), {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  PoseTrainLog log;
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0x9053 + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(decoder.parameter_count()));
      for (std::size_t k = start; k < end; ++k) {
        const auto [loss, g] = decoder.loss_and_gradients(scenes[order[k]].latent, scenes[order[k]].joints);
        if (!std::isfinite(loss)) fail_numerical("pose training diverged at epoch " + std::to_string(epoch));
        total += loss;
        grad += g;
      }
      grad /= static_cast<double>(end - start);
      adam.step(decoder.parameters(), std::move(grad));
    }
    log.epoch_loss.push_back(total / static_cast<double>(scenes.size()));
  }
  double err = 0.0;
  for (const auto& s : scenes) err += mpjpe(decoder.predict(s.latent), s.joints);
  log.final_mpjpe = err / static_cast<double>(scenes.size());
  return log;
}

}  // namespace handcloud
