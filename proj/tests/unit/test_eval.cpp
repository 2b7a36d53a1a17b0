#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "famix/error.hpp"
#include "famix/eval/dataset.hpp"
#include "famix/eval/metrics.hpp"
#include "famix/eval/synthetic.hpp"
#include "test_util.hpp"

using namespace famix;

namespace {

// Set-based oracle: IoU_k = |{gt = k} ∩ {pred = k}| / |{gt = k} ∪ {pred = k}| over labelled
// pixels, mean over classes with a non-empty union.
double oracle_miou(const std::vector<std::int32_t>& gt, const std::vector<std::int32_t>& pred,
                   int classes, int ignore) {
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < classes; ++k) {
    std::set<std::size_t> a, b;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore) continue;
      if (gt[i] == k) a.insert(i);
      if (pred[i] == k) b.insert(i);
    }
    std::set<std::size_t> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
    if (uni.empty()) continue;
    sum += static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    ++counted;
  }
  return sum / counted;
}

}  // namespace

TEST_CASE("confusion matrix and IoU on a four-pixel example") {
  ConfusionMatrix cm(2);
  cm.accumulate(std::vector<std::int32_t>{0, 1, 1, 1}, std::vector<std::int32_t>{0, 0, 1, 1});
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);
  const auto r = compute_iou(cm);
  CHECK(*r.per_class[0] == doctest::Approx(0.5));
  CHECK(*r.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.miou == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("perfect prediction gives mIoU 1 and absent classes are excluded") {
  ConfusionMatrix cm(5);
  const std::vector<std::int32_t> y = {0, 2, 2, 4};
  cm.accumulate(y, y);
  const auto r = compute_iou(cm);
  CHECK(r.miou == 1.0);
  CHECK(r.classes_counted == 3);
  CHECK_FALSE(r.per_class[1].has_value());
  CHECK(compute_iou(cm, ZeroUnionPolicy::kCountAsZero).miou == doctest::Approx(0.6));
  CHECK(compute_iou(cm, ZeroUnionPolicy::kCountAsOne).miou == 1.0);
}

TEST_CASE("ignore pixels never count") {
  ConfusionMatrix cm(2);
  cm.accumulate(std::vector<std::int32_t>{0, 1, 0}, std::vector<std::int32_t>{0, 255, 255});
  CHECK(cm.total() == 1);
  CHECK(compute_iou(cm).miou == 1.0);
}

TEST_CASE("empty confusion matrix is an undefined metric") {
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(compute_iou(cm), UndefinedMetricError);
  cm.accumulate(std::vector<std::int32_t>{1}, std::vector<std::int32_t>{255});
  CHECK_THROWS_AS(compute_iou(cm), UndefinedMetricError);
}

TEST_CASE("out-of-range labels and shape mismatches are rejected") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.accumulate(std::vector<std::int32_t>{2}, std::vector<std::int32_t>{0}),
                  InvalidInputError);
  CHECK_THROWS_AS(cm.accumulate(std::vector<std::int32_t>{0}, std::vector<std::int32_t>{3}),
                  InvalidInputError);
  CHECK_THROWS_AS(cm.accumulate(LabelMap(2, 2, 2), LabelMap(2, 3, 2)), ShapeError);
}

TEST_CASE("mIoU matches the set oracle on every 3x3 ground truth over 3 classes") {
  constexpr int kClasses = 3;
  constexpr int kPixels = 9;
  int total = 1;
  for (int i = 0; i < kPixels; ++i) total *= kClasses + 1;  // classes plus ignore
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> cls(0, kClasses - 1);
  int checked = 0;
  for (int code = 0; code < total; ++code) {
    std::vector<std::int32_t> gt(kPixels);
    int c = code;
    bool any = false;
    for (auto& v : gt) {
      const int s = c % (kClasses + 1);
      c /= kClasses + 1;
      v = s == kClasses ? 255 : s;
      any = any || v != 255;
    }
    if (!any) continue;
    // The exact prediction, a constant prediction and one random prediction per map.
    std::vector<std::vector<std::int32_t>> preds;
    std::vector<std::int32_t> exact(gt);
    for (auto& v : exact) v = v == 255 ? 0 : v;
    preds.push_back(exact);
    preds.emplace_back(kPixels, code % kClasses);
    std::vector<std::int32_t> rnd(kPixels);
    for (auto& v : rnd) v = cls(rng);
    preds.push_back(rnd);
    for (const auto& pred : preds) {
      ConfusionMatrix cm(kClasses);
      cm.accumulate(pred, gt);
      REQUIRE(std::abs(compute_iou(cm).miou - oracle_miou(gt, pred, kClasses, 255)) < 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 3 * 19000);
}

TEST_CASE("accumulation is order independent (property)") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>>> images;
  for (int i = 0; i < 12; ++i) {
    std::vector<std::int32_t> g(20), p(20);
    for (auto& v : g) v = cls(rng);
    for (auto& v : p) v = cls(rng);
    images.emplace_back(p, g);
  }
  ConfusionMatrix ref(4);
  for (const auto& [p, g] : images) ref.accumulate(p, g);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(images.begin(), images.end(), rng);
    ConfusionMatrix a(4), b(4);
    for (std::size_t i = 0; i < images.size(); ++i) {
      (i % 2 ? a : b).accumulate(images[i].first, images[i].second);
    }
    a += b;
    REQUIRE(a == ref);
  }
}

TEST_CASE("multi-run summary uses the sample standard deviation") {
  std::vector<EvalReport> reports;
  for (double m : {48.0, 49.0, 50.0}) reports.push_back({"acdc", {"a"}, {m}, m});
  const auto s = multi_run_summary(reports);
  CHECK(s.miou_mean == doctest::Approx(49.0));
  CHECK(s.miou_std == doctest::Approx(1.0));
  CHECK(s.runs == 3);
  CHECK_FALSE(s.single_run);
  const auto one = multi_run_summary({reports[0]});
  CHECK(one.single_run);
  CHECK(one.miou_std == 0.0);
  CHECK_THROWS_AS(multi_run_summary({}), InvalidInputError);
}

TEST_CASE("make_report checks class names") {
  ConfusionMatrix cm(2);
  cm.accumulate(std::vector<std::int32_t>{0}, std::vector<std::int32_t>{0});
  CHECK_THROWS_AS(make_report(cm, "x", {"a"}), ShapeError);
  const auto r = make_report(cm, "x", {"a", "b"});
  CHECK(r.miou == 1.0);
  CHECK_FALSE(r.per_class_iou[1].has_value());
}

TEST_CASE("netpbm images and manifests round trip") {
  TempDir dir;
  RgbImage img{2, 3, {}};
  for (int i = 0; i < 18; ++i) img.data.push_back(static_cast<std::uint8_t>(i * 13));
  write_ppm(img, dir.path() / "a.ppm");
  const auto back = read_ppm(dir.path() / "a.ppm");
  CHECK(back.height == 2);
  CHECK(back.width == 3);
  CHECK(back.data == img.data);

  LabelMap y(2, 3, 4, {0, 1, 2, 3, 255, 0});
  write_label_pgm(y, dir.path() / "a.pgm");
  CHECK(read_label_pgm(dir.path() / "a.pgm", 4) == y);
  CHECK_THROWS_AS(read_label_pgm(dir.path() / "a.pgm", 3), InvalidInputError);

  save_manifest({{dir.path() / "a.ppm", dir.path() / "a.pgm", "train"}}, dir.path() / "m.txt");
  const auto samples = load_split(dir.path() / "m.txt", "train", 4);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].labels == y);
  CHECK_THROWS_AS(load_split(dir.path() / "m.txt", "val", 4), ConfigError);

  write_bytes(dir.path() / "short.ppm", {'P', '6', '\n', '4', ' ', '4', '\n', '2', '5', '5', '\n', 0});
  CHECK_THROWS_AS(read_ppm(dir.path() / "short.ppm"), IoError);
}

TEST_CASE("synthetic corpus is deterministic and labels stay aligned with the shift") {
  SyntheticCorpusOptions o;
  o.train_images = 3;
  o.val_images = 2;
  const auto a = make_synthetic_corpus(o);
  const auto b = make_synthetic_corpus(o);
  REQUIRE(a.train.size() == 3);
  CHECK(a.train[2].image.data == b.train[2].image.data);
  CHECK(a.val_shifted[1].labels == a.val_source[1].labels);
  CHECK(a.val_shifted[1].image.data != a.val_source[1].image.data);
  for (const auto& s : a.train) CHECK_NOTHROW(s.labels.validate());

  TempDir dir;
  const auto manifest = write_synthetic_corpus(o, dir.path());
  CHECK(load_split(manifest, "val_shifted", 4).size() == 2);
  CHECK(load_split(manifest, "train", 4)[0].labels == a.train[0].labels);
}
