#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handcloud/metrics.hpp"
#include "handcloud/nn.hpp"
#include "handcloud/parallel.hpp"
#include "handcloud/templates.hpp"

namespace handcloud {

inline constexpr std::size_t kLatentDim = 512;

struct LatentCode {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(kLatentDim);

  LatentCode() = default;
  explicit LatentCode(Eigen::VectorXd v) : values(std::move(v)) {
    if (values.size() != static_cast<Eigen::Index>(kLatentDim))
      fail_data("latent code must have 512 entries, got " + std::to_string(values.size()));
    if (!values.allFinite()) fail_data("latent code has non-finite entries");
  }

  static LatentCode random(Rng& rng) {
    Eigen::VectorXd v(kLatentDim);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    return LatentCode(std::move(v));
  }
};

// ============================================================================
// Folding decoder
// ============================================================================

/**
 * Two folding stages that move template points under a latent code:
 *
 *   q   = p + f1(p, z)
 *   out = p + f2(q, z)
 *
 * f1 and f2 are `nn::ConditionedMlp`s. A LocalHand3D template gets one
 * independent pair of stages per component; otherwise one pair covers all
 * points. Output layers start at zero, so a fresh decoder returns its
 * template unchanged.
 */
class FoldingDecoder {
 public:
  static constexpr std::size_t kDefaultHidden = 128;

  explicit FoldingDecoder(Template tmpl, std::size_t hidden = kDefaultHidden)
      : template_(std::move(tmpl)), stage_(3, kLatentDim, hidden, 3) {
    if (template_.points.empty()) fail_data("decoder template is empty");
    if (!template_.points.has_labels()) fail_data("decoder template must be labeled");
    if (hidden == 0) fail_usage("hidden width must be positive");
    if (template_.kind == TemplateKind::LocalHand3D) {
      for (ComponentId c : kAllComponents) {
        auto idx = template_.points.indices_of(c);
        if (!idx.empty()) blocks_.push_back({std::move(idx), 0, {}});
      }
    } else {
      std::vector<std::size_t> all(template_.points.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      blocks_.push_back({std::move(all), 0, {}});
    }
    const std::size_t per_stage = stage_.parameter_count();
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b].offset = 2 * b * per_stage;
      const auto n = static_cast<Eigen::Index>(blocks_[b].points.size());
      blocks_[b].input.resize(3, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const Point3& p = template_.points.points[blocks_[b].points[static_cast<std::size_t>(k)]];
        blocks_[b].input.col(k) << p.x, p.y, p.z;
      }
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * blocks_.size() * per_stage));
  }

  /// Random hidden layers. Output layers are zero unless `zero_output` is false.
  void initialize(std::uint64_t seed, bool zero_output = true) {
    Rng rng(seed);
    const std::size_t per_stage = stage_.parameter_count();
    for (std::size_t s = 0; s < 2 * blocks_.size(); ++s)
      stage_.initialize(params_.data() + s * per_stage, rng, zero_output);
  }

  const Template& templ() const { return template_; }
  std::size_t hidden() const { return stage_.hidden_dim(); }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  struct Trace {
    struct Block {
      nn::ConditionedMlp::Cache stage1, stage2;
      nn::Matrix folded;  // q
    };
    std::vector<Block> blocks;
    PointCloud output;
  };

  PointCloud decode(const LatentCode& z) const {
    Trace trace;
    forward(z, trace);
    return std::move(trace.output);
  }

  void forward(const LatentCode& z, Trace& trace) const {
    check_latent(z);
    const std::size_t per_stage = stage_.parameter_count();
    trace.blocks.resize(blocks_.size());
    trace.output = template_.points;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Block& block = blocks_[b];
      auto& t = trace.blocks[b];
      const double* p1 = params_.data() + block.offset;
      const double* p2 = p1 + per_stage;
      t.folded = block.input + stage_.forward(p1, block.input, z.values, t.stage1);
      const nn::Matrix out = block.input + stage_.forward(p2, t.folded, z.values, t.stage2);
      for (std::size_t k = 0; k < block.points.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        trace.output.points[block.points[k]] = {out(0, c), out(1, c), out(2, c)};
      }
    }
  }

  /// Adds d loss / d params to `grad` given d loss / d output point (3 x N,
  /// columns in template order).
  void backward(const LatentCode& z, const Trace& trace, const nn::Matrix& d_points,
                Eigen::VectorXd& grad) const {
    const std::size_t per_stage = stage_.parameter_count();
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Block& block = blocks_[b];
      const auto& t = trace.blocks[b];
      nn::Matrix d_out(3, static_cast<Eigen::Index>(block.points.size()));
      for (std::size_t k = 0; k < block.points.size(); ++k)
        d_out.col(static_cast<Eigen::Index>(k)) = d_points.col(static_cast<Eigen::Index>(block.points[k]));
      const double* p1 = params_.data() + block.offset;
      const double* p2 = p1 + per_stage;
      double* g1 = grad.data() + block.offset;
      double* g2 = g1 + per_stage;
      const nn::Matrix d_folded = stage_.backward(p2, t.folded, z.values, t.stage2, d_out, g2);
      stage_.backward(p1, block.input, z.values, t.stage1, d_folded, g1);
    }
  }

 private:
  struct Block {
    std::vector<std::size_t> points;
    std::size_t offset = 0;
    nn::Matrix input;
  };

  static void check_latent(const LatentCode& z) {
    if (z.values.size() != static_cast<Eigen::Index>(kLatentDim))
      fail_data("latent dimension mismatch: expected 512, got " + std::to_string(z.values.size()));
  }

  Template template_;
  nn::ConditionedMlp stage_;
  std::vector<Block> blocks_;
  Eigen::VectorXd params_;
};

// ============================================================================
// Point-cloud loss with gradients
// ============================================================================

/// Warm-start potentials for the seven assignment problems of one sample
/// (six components, then global).
struct LossWarmStart {
  std::array<AssignmentWarmStart, kComponentCount + 1> problems;
};

namespace detail {

// Adds the Chamfer term between gt[gi] and pred[pi] and its gradient into
// d_pred (columns indexed by pred point). Matches are the current nearest
// neighbors.
inline double chamfer_with_gradient(const PointCloud& gt, const std::vector<std::size_t>& gi,
                                    const PointCloud& pred, const std::vector<std::size_t>& pi,
                                    nn::Matrix& d_pred) {
  std::vector<Point3> g, p;
  g.reserve(gi.size());
  p.reserve(pi.size());
  for (std::size_t i : gi) g.push_back(gt.points[i]);
  for (std::size_t i : pi) p.push_back(pred.points[i]);
  const NearestNeighborIndex g_index(g), p_index(p);
  const double ng = static_cast<double>(g.size());
  const double np = static_cast<double>(p.size());

  double gt_sum = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a) {
    const auto [j, sq] = p_index.nearest_squared(g[a]);
    gt_sum += sq;
    const Point3 d = (p[j] - g[a]) * (2.0 / ng);
    d_pred.col(static_cast<Eigen::Index>(pi[j])) += Eigen::Vector3d(d.x, d.y, d.z);
  }
  double pred_sum = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const auto [j, sq] = g_index.nearest_squared(p[b]);
    pred_sum += sq;
    const Point3 d = (p[b] - g[j]) * (2.0 / np);
    d_pred.col(static_cast<Eigen::Index>(pi[b])) += Eigen::Vector3d(d.x, d.y, d.z);
  }
  return gt_sum / ng + pred_sum / np;
}

// EMD term with the optimal assignment held fixed; the subgradient at a
// coincident pair is zero.
inline double emd_with_gradient(const PointCloud& gt, const std::vector<std::size_t>& gi,
                                const PointCloud& pred, const std::vector<std::size_t>& pi,
                                nn::Matrix& d_pred, AssignmentWarmStart* warm) {
  std::vector<Point3> g, p;
  for (std::size_t i : gi) g.push_back(gt.points[i]);
  for (std::size_t i : pi) p.push_back(pred.points[i]);
  const Assignment a = solve_assignment(pairwise_distances(p, g), warm);
  for (std::size_t b = 0; b < p.size(); ++b) {
    const Point3 diff = p[b] - g[a.mapping[b]];
    const double len = norm(diff);
    if (len > 0.0) {
      const Point3 d = diff / len;
      d_pred.col(static_cast<Eigen::Index>(pi[b])) += Eigen::Vector3d(d.x, d.y, d.z);
    }
  }
  return a.total_cost;
}

}  // namespace detail

/// Loss breakdown for pred against gt, and d loss / d pred as a 3 x N matrix.
inline LossBreakdown point_loss_with_gradient(const PointCloud& gt, const PointCloud& pred, LossMode mode,
                                              nn::Matrix& d_pred, LossWarmStart* warm = nullptr) {
  require_non_empty(gt);
  if (gt.size() != pred.size()) fail_data("EMD requires equal cardinality");
  d_pred = nn::Matrix::Zero(3, static_cast<Eigen::Index>(pred.size()));
  LossBreakdown out;
  if (mode == LossMode::LocalGlobal) {
    if (!gt.has_labels() || !pred.has_labels()) fail_data("combined loss requires labeled clouds");
    for (ComponentId c : kAllComponents) {
      const auto gi = gt.indices_of(c);
      const auto pi = pred.indices_of(c);
      if (gi.size() != pi.size())
        fail_data("per-component cardinality mismatch for " + std::string(component_name(c)));
      if (gi.empty()) continue;
      out.cd_local[index_of(c)] = detail::chamfer_with_gradient(gt, gi, pred, pi, d_pred);
      out.emd_local[index_of(c)] = detail::emd_with_gradient(
          gt, gi, pred, pi, d_pred, warm ? &warm->problems[index_of(c)] : nullptr);
    }
  }
  std::vector<std::size_t> all(gt.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  out.cd_global = detail::chamfer_with_gradient(gt, all, pred, all, d_pred);
  out.emd_global = detail::emd_with_gradient(gt, all, pred, all, d_pred,
                                             warm ? &warm->problems[kComponentCount] : nullptr);
  out.total = out.sum_terms();
  return out;
}

struct LossAndGradient {
  LossBreakdown loss;
  Eigen::VectorXd gradient;
};

inline LossAndGradient loss_and_gradients(const FoldingDecoder& decoder, const LatentCode& z, const PointCloud& gt,
                                          LossMode mode, LossWarmStart* warm = nullptr) {
  FoldingDecoder::Trace trace;
  decoder.forward(z, trace);
  for (const Point3& p : trace.output.points)
    if (!is_finite(p)) fail_numerical("decoder produced a non-finite point");
  nn::Matrix d_points;
  LossAndGradient out;
  out.loss = point_loss_with_gradient(gt, trace.output, mode, d_points, warm);
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(decoder.parameter_count()));
  decoder.backward(z, trace, d_points, out.gradient);
  return out;
}

// ============================================================================
// Pose decoder
// ============================================================================

/// z -> 128 -> 128 -> 63, reshaped to 21 joints.
class PoseDecoder {
 public:
  static constexpr std::size_t kHidden = 128;
  static constexpr std::size_t kOutput = 3 * kJointCount;

  explicit PoseDecoder(std::size_t hidden = kHidden)
      : mlp_(0, kLatentDim, hidden, kOutput),
        params_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mlp_.parameter_count()))) {}

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    mlp_.initialize(params_.data(), rng, false);
  }

  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  HandPose predict(const LatentCode& z) const {
    nn::ConditionedMlp::Cache cache;
    return to_pose(mlp_.forward(params_.data(), nn::Matrix(0, 1), z.values, cache));
  }

  /// L = |J_pred - J_gt|_2 over all 63 coordinates, with its exact gradient.
  std::pair<double, Eigen::VectorXd> loss_and_gradients(const LatentCode& z, const HandPose& gt) const {
    nn::ConditionedMlp::Cache cache;
    const nn::Matrix none(0, 1);
    const nn::Matrix out = mlp_.forward(params_.data(), none, z.values, cache);
    nn::Matrix residual(kOutput, 1);
    for (std::size_t j = 0; j < kJointCount; ++j)
      for (int a = 0; a < 3; ++a)
        residual(static_cast<Eigen::Index>(3 * j + a), 0) = out(static_cast<Eigen::Index>(3 * j + a), 0) - gt[j][a];
    const double loss = residual.norm();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    if (loss > 0.0) mlp_.backward(params_.data(), none, z.values, cache, residual / loss, grad.data());
    return {loss, std::move(grad)};
  }

 private:
  static HandPose to_pose(const nn::Matrix& out) {
    HandPose pose{};
    for (std::size_t j = 0; j < kJointCount; ++j)
      pose[j] = {out(static_cast<Eigen::Index>(3 * j), 0), out(static_cast<Eigen::Index>(3 * j + 1), 0),
                 out(static_cast<Eigen::Index>(3 * j + 2), 0)};
    return pose;
  }

  nn::ConditionedMlp mlp_;
  Eigen::VectorXd params_;
};

inline std::pair<double, Eigen::VectorXd> pose_loss_and_gradients(const PoseDecoder& decoder, const LatentCode& z,
                                                                  const HandPose& gt) {
  return decoder.loss_and_gradients(z, gt);
}

}  // namespace handcloud
