#include "bevdebias/losses.hpp"

#include <algorithm>
#include <cmath>

#include "bevdebias/error.hpp"

namespace bevdebias {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

LossValue focal_loss(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "focal_loss");
  LossValue out{0.0, Tensor(pred.shape())};
  double sum = 0.0;
  std::size_t num_pos = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, kProbEps, 1.0 - kProbEps);
    const bool inside = raw > kProbEps && raw < 1.0 - kProbEps;
    const double t = target[i];
    if (t == 1.0) {
      ++num_pos;
      const double q = 1.0 - p;
      sum -= q * q * std::log(p);
      if (inside) {
        out.grad[i] = kFocalAlpha * q * std::log(p) - q * q / p;
      }
    } else {
      const double wt = std::pow(1.0 - t, kFocalBeta);
      const double lq = std::log(1.0 - p);
      sum -= wt * p * p * lq;
      if (inside) {
        out.grad[i] = -wt * (kFocalAlpha * p * lq - p * p / (1.0 - p));
      }
    }
  }
  const double norm = static_cast<double>(std::max<std::size_t>(num_pos, 1));
  out.value = sum / norm;
  for (double& g : out.grad.data()) {
    g /= norm;
  }
  return out;
}

LossValue l1_masked(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  require_same(pred, target, "l1_masked");
  if (mask.size() == 0 || pred.size() % mask.size() != 0 ||
      !std::equal(mask.shape().rbegin(), mask.shape().rend(), pred.shape().rbegin())) {
    throw DimensionError("l1_masked: mask shape does not match prediction");
  }
  const std::size_t m = mask.size();
  const std::size_t reps = pred.size() / m;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    count += mask[i] != 0.0 ? 1 : 0;
  }
  count *= reps;
  LossValue out{0.0, Tensor(pred.shape())};
  if (count == 0) {
    return out;
  }
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i % m] == 0.0) {
      continue;
    }
    const double diff = pred[i] - target[i];
    sum += std::abs(diff);
    out.grad[i] = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
  }
  out.value = sum * inv;
  return out;
}

LossValue bce_depth(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  require_same(pred, target, "bce_depth");
  if (pred.rank() != 3 || mask.rank() != 2 || mask.dim(0) != pred.dim(1) ||
      mask.dim(1) != pred.dim(2)) {
    throw DimensionError("bce_depth: expected (D,H,W) predictions and an (H,W) mask");
  }
  const std::size_t bins = pred.dim(0);
  const std::size_t plane = mask.size();
  std::size_t valid = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    valid += mask[i] != 0.0 ? 1 : 0;
  }
  LossValue out{0.0, Tensor(pred.shape())};
  if (valid == 0 || bins == 0) {
    return out;
  }
  const double inv = 1.0 / static_cast<double>(valid * bins);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i % plane] == 0.0) {
      continue;
    }
    const double raw = pred[i];
    const double p = std::clamp(raw, kProbEps, 1.0 - kProbEps);
    const double t = target[i];
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    if (raw > kProbEps && raw < 1.0 - kProbEps) {
      out.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) * inv;
    }
  }
  out.value = sum * inv;
  return out;
}

namespace {

double virtual_scale(const Intrinsics& intr, double unit) {
  if (!(unit > 0.0)) {
    throw ValidationError("virtual depth: unit U must be positive");
  }
  if (!(intr.fu > 0.0) || !(intr.fv > 0.0)) {
    throw ValidationError("virtual depth: focal lengths must be positive");
  }
  return std::sqrt(1.0 / (intr.fu * intr.fu) + 1.0 / (intr.fv * intr.fv)) / unit;
}

}  // namespace

double to_virtual_depth(double d, const Intrinsics& intr, double unit) {
  if (d < 0.0) {
    throw InvalidDepth("to_virtual_depth: negative depth");
  }
  return virtual_scale(intr, unit) * d;
}

double to_actual_depth(double d_virtual, const Intrinsics& intr, double unit) {
  if (d_virtual < 0.0) {
    throw InvalidDepth("to_actual_depth: negative depth");
  }
  return d_virtual / virtual_scale(intr, unit);
}

VirtualDepthBins VirtualDepthBins::make(const Intrinsics& reference, double near, double far,
                                        std::size_t count, double unit) {
  if (count == 0 || !(near >= 0.0) || !(far > near)) {
    throw ValidationError("depth bins: need count > 0 and 0 <= near < far");
  }
  return {count, to_virtual_depth(near, reference, unit), to_virtual_depth(far, reference, unit)};
}

std::size_t VirtualDepthBins::index(double d_virtual) const {
  const double f = std::floor((d_virtual - lo) / width());
  if (f < 0.0) {
    return 0;
  }
  return std::min(count - 1, static_cast<std::size_t>(f));
}

double VirtualDepthBins::center(std::size_t i) const {
  return lo + (static_cast<double>(i) + 0.5) * width();
}

Tensor sharpen_pseudo(const Tensor& h, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ValidationError("sharpen_pseudo: tau must lie in (0, 1)");
  }
  Tensor out = h;
  for (double& v : out.data()) {
    if (v > tau) {
      v = 1.0;
    }
  }
  return out;
}

LossValue consistency_loss(const Tensor& h_render, const Tensor& h_2d, double tau) {
  require_same(h_render, h_2d, "consistency_loss");
  return focal_loss(h_render, sharpen_pseudo(h_2d, tau));
}

void LossWeights::validate() const {
  const auto binary = [](double x) { return x == 0.0 || x == 1.0; };
  if (!binary(lambda_s) || !binary(lambda_t) || lambda_s + lambda_t != 1.0) {
    throw ValidationError("loss weights: lambda_s and lambda_t must be 0/1 and sum to 1");
  }
}

LossReport total_loss(const LossReport& parts, const LossWeights& w) {
  w.validate();
  LossReport r = parts;
  // Inactive terms are skipped rather than multiplied by zero so a non-finite
  // unused term cannot leak into the total.
  r.total = 0.0;
  if (w.lambda_s != 0.0) {
    r.total += w.lambda_s * (parts.det + parts.render + parts.pg + parts.ps);
  }
  if (w.lambda_t != 0.0) {
    r.total += w.lambda_t * parts.con;
  }
  return r;
}

}  // namespace bevdebias
