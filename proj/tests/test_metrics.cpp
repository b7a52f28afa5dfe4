#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bevdebias/error.hpp"
#include "bevdebias/metrics.hpp"
#include "bevdebias/rng.hpp"

using namespace bevdebias;

namespace {

Box3D box(double x, double y, int cls = 0) {
  Box3D b;
  b.center = {x, y, 0.8};
  b.class_id = cls;
  return b;
}

Detection det(double x, double y, double score, int cls = 0) { return {box(x, y, cls), score}; }

// Reference greedy: repeatedly take the highest-scoring unprocessed detection
// (lowest index on ties) and give it the closest free gt of its class.
std::vector<std::optional<std::size_t>> greedy_oracle(const std::vector<Detection>& dets,
                                                      const std::vector<Box3D>& gts, double thr) {
  std::vector<std::optional<std::size_t>> out(dets.size());
  std::vector<bool> done(dets.size(), false), taken(gts.size(), false);
  for (std::size_t round = 0; round < dets.size(); ++round) {
    std::size_t pick = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!done[i] && (pick == dets.size() || dets[i].score > dets[pick].score)) pick = i;
    }
    done[pick] = true;
    double best = thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[pick].box.class_id) continue;
      const double d = std::hypot(gts[g].center.x - dets[pick].box.center.x,
                                  gts[g].center.y - dets[pick].box.center.y);
      if (d <= best && (!out[pick] || d < best)) {
        best = d;
        out[pick] = g;
      }
    }
    if (out[pick]) taken[*out[pick]] = true;
  }
  return out;
}

}  // namespace

TEST_CASE("matching: identical detections match one to one") {
  const std::vector<Box3D> gts{box(1, 2), box(10, -3), box(-5, 7)};
  std::vector<Detection> dets;
  for (const Box3D& g : gts) dets.push_back({g, 1.0});
  const Matching m = match_detections(dets, gts, 0.5);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    REQUIRE(m.matched_gt[i].has_value());
    CHECK(*m.matched_gt[i] == i);
  }
}

TEST_CASE("matching: a detection between two gts takes the nearer") {
  const std::vector<Box3D> gts{box(0, 0), box(3, 0)};
  const std::vector<Detection> dets{det(1.8, 0, 0.9)};
  const Matching m = match_detections(dets, gts, 2.0);
  REQUIRE(m.matched_gt[0].has_value());
  CHECK(*m.matched_gt[0] == 1);
}

TEST_CASE("matching: class and threshold gate matches") {
  const std::vector<Box3D> gts{box(0, 0, 1)};
  CHECK_FALSE(match_detections(std::vector{det(0, 0, 0.9, 0)}, gts, 2.0).matched_gt[0]);
  CHECK_FALSE(match_detections(std::vector{det(2.5, 0, 0.9, 1)}, gts, 2.0).matched_gt[0]);
  CHECK(match_detections(std::vector{det(1.5, 0, 0.9, 1)}, gts, 2.0).matched_gt[0] == 0u);
}

TEST_CASE("matching: randomized 5x5 against the reference greedy") {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Box3D> gts;
    std::vector<Detection> dets;
    for (int i = 0; i < 5; ++i) {
      gts.push_back(box(rng.uniform(-4, 4), rng.uniform(-4, 4), static_cast<int>(rng.below(2))));
      dets.push_back(det(rng.uniform(-4, 4), rng.uniform(-4, 4),
                         std::round(rng.uniform() * 4) / 4,  // frequent score ties
                         static_cast<int>(rng.below(2))));
    }
    const double thr = rng.uniform(0.5, 4.0);
    const Matching m = match_detections(dets, gts, thr);
    CHECK(m.matched_gt == greedy_oracle(dets, gts, thr));
  }
}

TEST_CASE("average precision") {
  const std::vector<Box3D> gts{box(0, 0), box(10, 0)};
  SUBCASE("perfect detections") {
    const std::vector<EvalFrame> f{{{det(0, 0, 0.9), det(10, 0, 0.8)}, gts}};
    CHECK(average_precision(f, 1.0) == doctest::Approx(1.0));
  }
  SUBCASE("no detections") {
    const std::vector<EvalFrame> f{{{}, gts}};
    CHECK(average_precision(f, 1.0) == 0.0);
  }
  SUBCASE("three detections: TP, FP, TP") {
    // PR points: (0.5, 1), (0.5, 1/2), (1, 2/3). Envelope: 1 up to recall 0.5,
    // 2/3 beyond. 101 recall points: 51 at 1 and 50 at 2/3.
    const std::vector<EvalFrame> f{{{det(0.2, 0, 0.9), det(5, 5, 0.8), det(10, 0.3, 0.7)}, gts}};
    CHECK(average_precision(f, 1.0) == doctest::Approx((51.0 + 50.0 * 2.0 / 3.0) / 101.0));
  }
  SUBCASE("pooled over frames") {
    const std::vector<EvalFrame> f{{{det(0, 0, 0.9)}, {box(0, 0)}}, {{det(10, 0, 0.8)}, {box(10, 0)}}};
    CHECK(average_precision(f, 1.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("tp errors") {
  SUBCASE("exact matches") {
    const std::vector<EvalFrame> f{{{det(1, 1, 0.9)}, {box(1, 1)}}};
    const TpErrors e = tp_errors(f);
    CHECK(e.mATE == 0.0);
    CHECK(e.mASE == doctest::Approx(0.0));
    CHECK(e.mAOE == 0.0);
    CHECK(e.matches == 1);
  }
  SUBCASE("size doubled on one axis") {
    Detection d = det(1, 1, 0.9);
    d.box.size.x() *= 2.0;
    const std::vector<EvalFrame> f{{{d}, {box(1, 1)}}};
    CHECK(tp_errors(f).mASE == doctest::Approx(0.5));
  }
  SUBCASE("no matches") {
    const std::vector<EvalFrame> f{{{det(50, 50, 0.9)}, {box(0, 0)}}};
    const TpErrors e = tp_errors(f);
    CHECK(e.mATE == 1.0);
    CHECK(e.mASE == 1.0);
    CHECK(e.mAOE == 1.0);
    CHECK(e.matches == 0);
  }
  SUBCASE("random pairs against scalar formulas") {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
      const Box3D g = box(rng.uniform(-20, 20), rng.uniform(-20, 20));
      Detection d{g, 0.5};
      d.box.center.x += rng.uniform(-1.2, 1.2);
      d.box.center.y += rng.uniform(-1.2, 1.2);
      d.box.size = {rng.uniform(3, 6), rng.uniform(1.5, 2.5), rng.uniform(1.2, 2.2)};
      d.box.yaw = rng.uniform(-3, 3);
      Box3D gt = g;
      gt.yaw = rng.uniform(-3, 3);
      const std::vector<EvalFrame> f{{{d}, {gt}}};
      const TpErrors e = tp_errors(f);
      REQUIRE(e.matches == 1);
      CHECK(e.mATE == doctest::Approx(std::hypot(d.box.center.x - gt.center.x,
                                                 d.box.center.y - gt.center.y)));
      double inter = 1.0;
      for (int k = 0; k < 3; ++k) inter *= std::min(d.box.size[k], gt.size[k]);
      const double uni = d.box.size.prod() + gt.size.prod() - inter;
      CHECK(e.mASE == doctest::Approx(1.0 - inter / uni));
      double dy = std::abs(d.box.yaw - gt.yaw);
      if (dy > std::numbers::pi) dy = 2 * std::numbers::pi - dy;
      CHECK(e.mAOE == doctest::Approx(dy / std::numbers::pi));
    }
  }
}

TEST_CASE("orientation error wraps") {
  CHECK(orientation_error(3.0, -3.0) == doctest::Approx((2 * std::numbers::pi - 6.0) / std::numbers::pi));
  CHECK(orientation_error(0.0, std::numbers::pi) == doctest::Approx(1.0));
  CHECK(orientation_error(0.1, 0.1 + 4 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nds_star reproduces published rows") {
  const std::vector<double> lyft{0.474, 0.152, 0.092};
  const std::vector<double> nus{0.551, 0.163, 0.169};
  CHECK(std::round(nds_star(0.598, lyft) * 1000) == 679);
  CHECK(std::round(nds_star(0.516, nus) * 1000) == 611);
  const std::vector<double> zero{0, 0, 0};
  CHECK(nds_star(1.0, zero) == 1.0);
  const std::vector<double> big{1.5, 2.0, 1.0};
  CHECK(nds_star(0.3, big) == doctest::Approx(0.15));
  const std::vector<double> two{0.1, 0.2};
  CHECK_THROWS_AS((void)nds_star(0.5, two), ValidationError);
  CHECK_THROWS_AS((void)nds_star(1.5, zero), ValidationError);
}

TEST_CASE("evaluate") {
  const std::vector<EvalFrame> f{
      {{det(0, 0, 0.9), det(10, 0, 0.8), det(30, 0, 0.7, 1)}, {box(0, 0), box(10, 0), box(20, 0, 1)}}};
  const std::vector<double> thr = default_thresholds();
  const MetricsReport r = evaluate(f, 0, thr);
  CHECK(r.mAP == doctest::Approx(1.0));
  CHECK(r.ap_table.size() == thr.size());
  CHECK(r.num_detections == 2);
  CHECK(r.num_ground_truth == 2);
  CHECK(r.nds_star == doctest::Approx(1.0));
  const MetricsReport r1 = evaluate(f, 1, thr);
  CHECK(r1.mAP == 0.0);
  CHECK(r1.nds_star == 0.0);
  CHECK_THROWS_AS((void)evaluate(f, 0, std::vector<double>{}), ValidationError);
  std::vector<EvalFrame> bad = f;
  bad[0].detections[0].score = 2.0;
  CHECK_THROWS_AS((void)evaluate(bad, 0, thr), ValidationError);
}
