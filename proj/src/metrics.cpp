#include "bevdebias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bevdebias/error.hpp"

namespace bevdebias {

void Detection::validate() const {
  box.validate();
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw ValidationError("detection: score must be finite in [0, 1]");
  }
}

std::vector<double> default_thresholds() { return {0.5, 1.0, 2.0, 4.0}; }

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

Matching match_detections(std::span<const Detection> dets, std::span<const Box3D> gts,
                          double threshold) {
  Matching m;
  m.matched_gt.assign(dets.size(), std::nullopt);
  m.order.resize(dets.size());
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t i : m.order) {
    std::optional<std::size_t> best;
    double best_d = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[i].box.class_id) {
        continue;
      }
      const double d = bev_distance(dets[i].box, gts[g]);
      if (d <= best_d && (!best || d < best_d)) {
        best = g;
        best_d = d;
      }
    }
    if (best) {
      taken[*best] = true;
      m.matched_gt[i] = best;
    }
  }
  return m;
}

double average_precision(std::span<const EvalFrame> frames, double threshold) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pooled;
  std::size_t num_gt = 0;
  for (const EvalFrame& f : frames) {
    num_gt += f.ground_truth.size();
    const Matching m = match_detections(f.detections, f.ground_truth, threshold);
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      pooled.push_back({f.detections[i].score, m.matched_gt[i].has_value()});
    }
  }
  if (num_gt == 0) {
    return 0.0;
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    tp += pooled[i].tp ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  // Precision envelope: best precision at any recall >= r.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int s = 0; s <= 100; ++s) {
    const double r = s / 100.0;
    while (k < recall.size() && recall[k] < r - 1e-12) {
      ++k;
    }
    if (k < recall.size()) {
      sum += precision[k];
    }
  }
  return sum / 101.0;
}

double scale_error(const Vec3& a, const Vec3& b) {
  const double inter = a.cwiseMin(b).prod();
  const double uni = a.prod() + b.prod() - inter;
  return 1.0 - inter / uni;
}

double orientation_error(double yaw_a, double yaw_b) {
  double d = std::fmod(std::abs(yaw_a - yaw_b), 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) {
    d = 2.0 * std::numbers::pi - d;
  }
  return d / std::numbers::pi;
}

TpErrors tp_errors(std::span<const EvalFrame> frames, double threshold) {
  TpErrors e;
  double ate = 0.0, ase = 0.0, aoe = 0.0;
  for (const EvalFrame& f : frames) {
    const Matching m = match_detections(f.detections, f.ground_truth, threshold);
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      if (!m.matched_gt[i]) {
        continue;
      }
      const Box3D& det = f.detections[i].box;
      const Box3D& gt = f.ground_truth[*m.matched_gt[i]];
      ate += bev_distance(det, gt);
      ase += scale_error(det.size, gt.size);
      aoe += orientation_error(det.yaw, gt.yaw);
      ++e.matches;
    }
  }
  if (e.matches > 0) {
    const double n = static_cast<double>(e.matches);
    e.mATE = ate / n;
    e.mASE = ase / n;
    e.mAOE = aoe / n;
  }
  return e;
}

double nds_star(double mAP, std::span<const double> tp) {
  if (tp.size() != 3) {
    throw ValidationError("nds_star: expected exactly three TP errors (mATE, mASE, mAOE)");
  }
  if (!(mAP >= 0.0 && mAP <= 1.0)) {
    throw ValidationError("nds_star: mAP must lie in [0, 1]");
  }
  double sum = 3.0 * mAP;
  for (const double e : tp) {
    if (!(e >= 0.0)) {
      throw ValidationError("nds_star: TP errors must be non-negative");
    }
    sum += 1.0 - std::min(1.0, e);
  }
  return sum / 6.0;
}

MetricsReport evaluate(std::span<const EvalFrame> frames, int class_id,
                       std::span<const double> thresholds) {
  if (thresholds.empty()) {
    throw ValidationError("evaluate: at least one matching threshold is required");
  }
  std::vector<EvalFrame> filtered;
  filtered.reserve(frames.size());
  MetricsReport r;
  for (const EvalFrame& f : frames) {
    EvalFrame g;
    for (const Detection& d : f.detections) {
      d.validate();
      if (d.box.class_id == class_id) {
        g.detections.push_back(d);
      }
    }
    for (const Box3D& b : f.ground_truth) {
      if (b.class_id == class_id) {
        g.ground_truth.push_back(b);
      }
    }
    r.num_detections += g.detections.size();
    r.num_ground_truth += g.ground_truth.size();
    filtered.push_back(std::move(g));
  }
  double ap_sum = 0.0;
  for (const double t : thresholds) {
    if (!(t > 0.0)) {
      throw ValidationError("evaluate: thresholds must be positive");
    }
    const double ap = average_precision(filtered, t);
    r.ap_table.push_back({t, ap});
    ap_sum += ap;
  }
  r.mAP = ap_sum / static_cast<double>(thresholds.size());
  const TpErrors e = tp_errors(filtered);
  r.mATE = e.mATE;
  r.mASE = e.mASE;
  r.mAOE = e.mAOE;
  r.num_tp_matches = e.matches;
  const double tp[3] = {r.mATE, r.mASE, r.mAOE};
  r.nds_star = nds_star(r.mAP, tp);
  return r;
}

}  // namespace bevdebias
