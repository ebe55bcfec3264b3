#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softcam/model.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

/// Disjoint patches tiling an HxW grid, ragged at the right/bottom edges,
/// ranked descending by mean activation (row-major index breaks ties).
struct PatchGrid {
  struct Rect {
    int y = 0, x = 0, h = 0, w = 0;
  };
  int patch = 0;
  std::vector<Rect> rects;            // row-major order
  std::vector<double> mean_activation;  // aligned with rects
  std::vector<int> rank_order;        // rect indices, best first

  static PatchGrid build(const Tensor& map2d, int patch);
};

/// Fraction of the k best patches that are positively activated and touch the
/// mask. The map must already be at input resolution; empty masks are
/// rejected.
double topk_localization_precision(const Tensor& map2d, const Tensor& mask, int k, int patch);

/// Same numerator with the count of positively activated top-k patches as the
/// denominator (the alternative reading).
double topk_localization_precision_alt(const Tensor& map2d, const Tensor& mask, int k,
                                       int patch);

struct ApResult {
  double value = 0.0;
  bool degenerate = false;  // no positive mass anywhere
};

/// Share of max-normalized positive saliency mass inside the mask.
ApResult activation_precision(const Tensor& map2d, const Tensor& mask);

/// Mask coverage by max-normalized positive saliency; empty masks rejected.
double activation_sensitivity(const Tensor& map2d, const Tensor& mask);

struct ConsistencyResult {
  double r_pos_mean = 0.0, r_pos_std = 0.0;  // disease samples
  double r_neg_mean = 0.0, r_neg_std = 0.0;  // healthy samples
};

/// Sign agreement of signed evidence maps with labels. Each map is the
/// disease-class evidence for its sample; label 0 marks healthy.
ConsistencyResult activation_consistency(const std::vector<Tensor>& evidence_maps,
                                         const std::vector<int>& labels);

struct DeletionCurve {
  double c0 = 0.0;  // initial confidence of the predicted class
  int predicted_class = 0;
  std::vector<double> confidence;  // c_t for t = 1..k
  std::vector<double> normalized() const;
};

/// Cumulative occlusion of the top-ranked patches; returns nullopt (with a
/// reason) when the model misclassifies the image.
std::optional<DeletionCurve> deletion_curve(const ModelBundle& model, const Tensor& image,
                                            const Tensor& map_input_res, int k, int patch,
                                            float fill, int label,
                                            std::string* skip_reason = nullptr);

/// Same procedure with a seeded uniformly random patch order.
std::optional<DeletionCurve> random_patch_baseline(const ModelBundle& model,
                                                   const Tensor& image, int k, int patch,
                                                   float fill, int label, std::uint64_t seed,
                                                   std::string* skip_reason = nullptr);

/// Mean of normalized post-removal confidences; 1.0 for a flat curve.
double audc(const DeletionCurve& curve);

}  // namespace softcam
