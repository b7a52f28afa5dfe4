#pragma once

// Training losses evaluated on plain grids, each returned with its analytic
// gradient with respect to the prediction.

#include <cstddef>

#include "bevdebias/geometry.hpp"
#include "bevdebias/tensor.hpp"

namespace bevdebias {

inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kProbEps = 1e-6;
inline constexpr double kDefaultTau = 0.7;
inline constexpr double kDefaultVirtualUnit = 0.01;

struct LossValue {
  double value = 0.0;
  Tensor grad;  // same shape as the prediction
};

/// Penalty-reduced focal loss: positives where target == 1, other pixels are
/// negatives weighted by (1 - target)^beta. Normalized by max(1, #positives).
/// Predictions are clamped to [eps, 1 - eps]; the gradient is zero where the
/// clamp is active.
[[nodiscard]] LossValue focal_loss(const Tensor& pred, const Tensor& target);

/// Mean |pred - target| over entries with mask != 0; 0 with an empty mask.
/// `mask` either matches pred or matches its trailing axes (broadcast over
/// the leading axis).
[[nodiscard]] LossValue l1_masked(const Tensor& pred, const Tensor& target, const Tensor& mask);

/// Mean binary cross-entropy over valid pixels x bins. pred and target are
/// (D, H, W); mask is (H, W).
[[nodiscard]] LossValue bce_depth(const Tensor& pred, const Tensor& target, const Tensor& mask);

/// D_virtual = sqrt(1/fu^2 + 1/fv^2) / U * D.
[[nodiscard]] double to_virtual_depth(double d, const Intrinsics& intr,
                                      double unit = kDefaultVirtualUnit);
[[nodiscard]] double to_actual_depth(double d_virtual, const Intrinsics& intr,
                                     double unit = kDefaultVirtualUnit);

/// Uniform bins in virtual-depth space spanning [near, far] meters under a
/// reference camera.
struct VirtualDepthBins {
  std::size_t count = 60;
  double lo = 0.0;  // virtual units
  double hi = 0.0;

  static VirtualDepthBins make(const Intrinsics& reference, double near = 1.0, double far = 61.2,
                               std::size_t count = 60, double unit = kDefaultVirtualUnit);

  /// Bin containing a virtual depth, clamped to the end bins.
  [[nodiscard]] std::size_t index(double d_virtual) const;
  [[nodiscard]] double center(std::size_t i) const;
  [[nodiscard]] double width() const { return (hi - lo) / static_cast<double>(count); }
};

/// 1 where h > tau, h otherwise.
[[nodiscard]] Tensor sharpen_pseudo(const Tensor& h, double tau = kDefaultTau);

/// focal_loss(h_render, sharpen_pseudo(h_2d, tau)).
[[nodiscard]] LossValue consistency_loss(const Tensor& h_render, const Tensor& h_2d,
                                         double tau = kDefaultTau);

struct LossWeights {
  double lambda_s = 1.0;
  double lambda_t = 0.0;

  static LossWeights source() { return {1.0, 0.0}; }
  static LossWeights target() { return {0.0, 1.0}; }

  /// Each weight is 0 or 1 and they sum to 1.
  void validate() const;
};

struct LossReport {
  double det = 0.0;  // detection head is not modeled; always 0
  double render = 0.0;
  double pg = 0.0;
  double ps = 0.0;
  double con = 0.0;
  double total = 0.0;
};

/// Fills `total` from the other fields of `parts`.
[[nodiscard]] LossReport total_loss(const LossReport& parts, const LossWeights& w);

}  // namespace bevdebias
