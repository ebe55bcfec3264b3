#include "softcam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "softcam/rng.hpp"
#include "softcam/tape.hpp"

namespace softcam {

PatchGrid PatchGrid::build(const Tensor& map2d, int patch) {
  if (map2d.rank() != 2) throw std::invalid_argument("PatchGrid: need a [H,W] map");
  if (patch < 1) throw std::invalid_argument("PatchGrid: patch size must be positive");
  const int H = map2d.extent(0), W = map2d.extent(1);
  PatchGrid grid;
  grid.patch = patch;
  for (int y = 0; y < H; y += patch) {
    for (int x = 0; x < W; x += patch) {
      Rect r{y, x, std::min(patch, H - y), std::min(patch, W - x)};
      double sum = 0.0;
      for (int dy = 0; dy < r.h; ++dy)
        for (int dx = 0; dx < r.w; ++dx) sum += map2d.at(y + dy, x + dx);
      grid.rects.push_back(r);
      grid.mean_activation.push_back(sum / (static_cast<double>(r.h) * r.w));
    }
  }
  grid.rank_order.resize(grid.rects.size());
  std::iota(grid.rank_order.begin(), grid.rank_order.end(), 0);
  std::stable_sort(grid.rank_order.begin(), grid.rank_order.end(), [&](int a, int b) {
    return grid.mean_activation[a] > grid.mean_activation[b];
  });
  return grid;
}

namespace {

void check_pair(const Tensor& map2d, const Tensor& mask) {
  if (map2d.rank() != 2 || mask.rank() != 2 || map2d.shape() != mask.shape())
    throw std::invalid_argument("metric: map " + map2d.shape_str() + " and mask " +
                                mask.shape_str() + " must be matching [H,W] grids");
}

double mask_area(const Tensor& mask) {
  double a = 0.0;
  for (float v : mask.vec()) a += v;
  return a;
}

bool patch_touches_mask(const Tensor& mask, const PatchGrid::Rect& r) {
  for (int dy = 0; dy < r.h; ++dy)
    for (int dx = 0; dx < r.w; ++dx)
      if (mask.at(r.y + dy, r.x + dx) > 0.0f) return true;
  return false;
}

struct TopkCounts {
  int hits = 0;      // positively activated AND overlapping the mask
  int positive = 0;  // positively activated
};

TopkCounts topk_counts(const Tensor& map2d, const Tensor& mask, int k, int patch) {
  check_pair(map2d, mask);
  if (k < 1) throw std::invalid_argument("topk: k must be positive");
  if (mask_area(mask) == 0.0)
    throw std::invalid_argument("topk: metric undefined for an empty mask");
  const PatchGrid grid = PatchGrid::build(map2d, patch);
  TopkCounts counts;
  const int limit = std::min<int>(k, static_cast<int>(grid.rects.size()));
  for (int i = 0; i < limit; ++i) {
    const int idx = grid.rank_order[i];
    if (grid.mean_activation[idx] <= 0.0) continue;
    ++counts.positive;
    if (patch_touches_mask(mask, grid.rects[idx])) ++counts.hits;
  }
  return counts;
}

/// Positive part rescaled so the maximum is 1; all-zero maps stay zero.
Tensor positive_normalized(const Tensor& map2d) {
  Tensor s(map2d.shape());
  float peak = 0.0f;
  for (std::int64_t i = 0; i < map2d.size(); ++i) {
    s[i] = std::max(map2d[i], 0.0f);
    peak = std::max(peak, s[i]);
  }
  if (peak > 0.0f)
    for (std::int64_t i = 0; i < s.size(); ++i) s[i] /= peak;
  return s;
}

struct MeanStd {
  double mean = 0.0, std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= xs.size();
  for (double x : xs) r.std += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(r.std / xs.size());
  return r;
}

std::optional<DeletionCurve> run_deletion(const ModelBundle& model, const Tensor& image,
                                          const std::vector<PatchGrid::Rect>& order, int k,
                                          float fill, int label, std::string* skip_reason) {
  const int C = image.extent(0), H = image.extent(1), W = image.extent(2);
  auto predict = [&](const Tensor& img) {
    Tape tape;
    Tensor probs;
    if (model.head_kind == HeadKind::softcam)
      probs = tape.value(softcam_forward(tape, model, img).probs);
    else
      probs = tape.value(blackbox_forward(tape, model, img).probs);
    return probs;
  };
  Tensor probs = predict(image);
  int pred = 0;
  for (int c = 1; c < model.num_classes; ++c)
    if (probs[c] > probs[pred]) pred = c;
  if (pred != label) {
    if (skip_reason)
      *skip_reason = "misclassified: predicted " + std::to_string(pred) + ", label " +
                     std::to_string(label);
    return std::nullopt;
  }
  DeletionCurve curve;
  curve.predicted_class = pred;
  curve.c0 = probs[pred];

  Tensor occluded = image;
  const int limit = std::min<int>(k, static_cast<int>(order.size()));
  for (int t = 0; t < limit; ++t) {
    const auto& r = order[t];
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r.h; ++dy)
        for (int dx = 0; dx < r.w; ++dx)
          occluded.data()[(static_cast<std::int64_t>(c) * H + r.y + dy) * W + r.x + dx] = fill;
    curve.confidence.push_back(predict(occluded)[pred]);
  }
  return curve;
}

}  // namespace

double topk_localization_precision(const Tensor& map2d, const Tensor& mask, int k, int patch) {
  return static_cast<double>(topk_counts(map2d, mask, k, patch).hits) / k;
}

double topk_localization_precision_alt(const Tensor& map2d, const Tensor& mask, int k,
                                       int patch) {
  const TopkCounts c = topk_counts(map2d, mask, k, patch);
  return c.positive == 0 ? 0.0 : static_cast<double>(c.hits) / c.positive;
}

ApResult activation_precision(const Tensor& map2d, const Tensor& mask) {
  check_pair(map2d, mask);
  const Tensor s = positive_normalized(map2d);
  double inside = 0.0, total = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i) {
    total += s[i];
    if (mask[i] > 0.0f) inside += s[i];
  }
  if (total == 0.0) return {0.0, true};
  return {inside / total, false};
}

double activation_sensitivity(const Tensor& map2d, const Tensor& mask) {
  check_pair(map2d, mask);
  const double area = mask_area(mask);
  if (area == 0.0)
    throw std::invalid_argument("activation_sensitivity: metric undefined for an empty mask");
  const Tensor s = positive_normalized(map2d);
  double inside = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i)
    if (mask[i] > 0.0f) inside += s[i];
  return inside / area;
}

ConsistencyResult activation_consistency(const std::vector<Tensor>& evidence_maps,
                                         const std::vector<int>& labels) {
  if (evidence_maps.empty() || evidence_maps.size() != labels.size())
    throw std::invalid_argument("activation_consistency: empty or mismatched split");
  std::vector<double> r_pos, r_neg;
  for (size_t i = 0; i < evidence_maps.size(); ++i) {
    const Tensor& m = evidence_maps[i];
    std::int64_t pos = 0, neg = 0;
    for (float v : m.vec()) {
      if (v > 0.0f) ++pos;
      if (v < 0.0f) ++neg;  // zero cells count in the denominator only
    }
    const double total = static_cast<double>(m.size());
    if (labels[i] != 0)
      r_pos.push_back(pos / total);
    else
      r_neg.push_back(neg / total);
  }
  ConsistencyResult out;
  const MeanStd p = mean_std(r_pos), n = mean_std(r_neg);
  out.r_pos_mean = p.mean;
  out.r_pos_std = p.std;
  out.r_neg_mean = n.mean;
  out.r_neg_std = n.std;
  return out;
}

std::vector<double> DeletionCurve::normalized() const {
  std::vector<double> out(confidence.size());
  for (size_t i = 0; i < confidence.size(); ++i) out[i] = confidence[i] / c0;
  return out;
}

std::optional<DeletionCurve> deletion_curve(const ModelBundle& model, const Tensor& image,
                                            const Tensor& map_input_res, int k, int patch,
                                            float fill, int label, std::string* skip_reason) {
  if (map_input_res.rank() != 2 || map_input_res.extent(0) != image.extent(1) ||
      map_input_res.extent(1) != image.extent(2))
    throw std::invalid_argument("deletion_curve: map must be at input resolution");
  const PatchGrid grid = PatchGrid::build(map_input_res, patch);
  std::vector<PatchGrid::Rect> order;
  for (int idx : grid.rank_order) order.push_back(grid.rects[idx]);
  return run_deletion(model, image, order, k, fill, label, skip_reason);
}

std::optional<DeletionCurve> random_patch_baseline(const ModelBundle& model,
                                                   const Tensor& image, int k, int patch,
                                                   float fill, int label, std::uint64_t seed,
                                                   std::string* skip_reason) {
  Tensor flat({image.extent(1), image.extent(2)});
  const PatchGrid grid = PatchGrid::build(flat, patch);
  std::vector<PatchGrid::Rect> order = grid.rects;
  Rng rng(seed);
  rng.shuffle(order);
  return run_deletion(model, image, order, k, fill, label, skip_reason);
}

double audc(const DeletionCurve& curve) {
  if (curve.c0 <= 0.0 || curve.confidence.empty())
    throw std::invalid_argument("audc: invalid deletion curve");
  double acc = 0.0;
  for (double c : curve.confidence) acc += c / curve.c0;
  return acc / static_cast<double>(curve.confidence.size());
}

}  // namespace softcam
