#pragma once

#include <string>

#include "softcam/model.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

enum class MethodId {
  cam,
  gradcam,
  scorecam,
  layercam,
  guided_bp,
  integrated_gradients,
  softcam_evidence,
};

std::string method_name(MethodId id);
MethodId method_from_name(const std::string& name);

enum class Resolution { feature, input };

struct SaliencyMap {
  int class_index = 0;
  Tensor values;  // [h,w], signed unless the method guarantees otherwise
  Resolution resolution = Resolution::feature;
  MethodId method = MethodId::cam;
};

/// Eq.-style CAM: sum_k w_k^c A_k. Requires a black-box model with a single
/// FC layer. Signed, feature resolution.
SaliencyMap cam(const ModelBundle& model, const Tensor& image, int class_index);

/// ReLU(sum_k w_k A_k) with w_k the spatial mean of d(logit_c)/dA_k.
/// Non-negative, feature resolution.
SaliencyMap gradcam(const ModelBundle& model, const Tensor& image, int class_index);

/// sum_k ReLU(grad_k(x)) * A_k(x) at the last feature map. Feature resolution.
SaliencyMap layercam(const ModelBundle& model, const Tensor& image, int class_index);

/// Gradient-free channel weighting by masked-input forward passes.
/// top_channels selects the highest-energy channels (<= D). Non-negative,
/// feature resolution.
SaliencyMap scorecam(const ModelBundle& model, const Tensor& image, int class_index,
                     int top_channels);

/// Input gradient with all ReLUs in guided mode, summed over channels.
/// Signed, input resolution.
SaliencyMap guided_backprop(const ModelBundle& model, const Tensor& image, int class_index);

/// Right-endpoint Riemann path integral from a zero baseline, channel-summed.
/// Signed, input resolution.
SaliencyMap integrated_gradients(const ModelBundle& model, const Tensor& image, int class_index,
                                 int steps = 32);

/// Evidence channel of an already-computed SoftCAM forward pass; costs no
/// additional model passes.
SaliencyMap softcam_evidence(const Tape& tape, const SoftcamOut& out, int class_index);

/// Convenience overload that runs the single prediction forward pass itself.
SaliencyMap softcam_evidence(const ModelBundle& model, const Tensor& image, int class_index);

}  // namespace softcam
