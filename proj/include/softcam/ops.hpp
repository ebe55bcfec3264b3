#pragma once

#include <utility>
#include <vector>

#include "softcam/tape.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

// Differentiable tape operations. All tensors are float32; convolution is
// cross-correlation (no kernel flip).

/// input [C_in,H,W], kernel [C_out,C_in,kH,kW], bias [C_out] -> [C_out,H',W']
NodeId conv2d(Tape& tape, NodeId input, NodeId kernel, NodeId bias, int stride, int padding);

/// Elementwise max(x, 0). Backward honors tape.relu_mode.
NodeId relu(Tape& tape, NodeId input);

/// 2x2 non-overlapping max pool; ties go to the first cell in row-major order.
NodeId maxpool2(Tape& tape, NodeId input);

/// [C,H,W] -> [C] per-channel spatial mean
NodeId global_avg_pool(Tape& tape, NodeId input);

/// weight [b2,b1], input [b1], bias [b2] -> [b2]
NodeId linear(Tape& tape, NodeId input, NodeId weight, NodeId bias);

/// Max-shifted softmax over a vector.
NodeId softmax(Tape& tape, NodeId input);

/// -log(probs[label]) with the probability floored at 1e-12.
NodeId cross_entropy(Tape& tape, NodeId probs, int label);

/// Scalar sum of all elements.
NodeId sum(Tape& tape, NodeId input);

/// Scalar x[index] (the usual gradient target for class logits).
NodeId pick(Tape& tape, NodeId input, int index);

/// Scalar sum of absolute values (the lasso penalty).
NodeId sum_abs(Tape& tape, NodeId input);

/// Scalar Euclidean norm sqrt(sum x^2).
NodeId l2_norm(Tape& tape, NodeId input);

/// Scalar linear combination sum_i coeff[i] * value(terms[i]); all terms scalar.
NodeId combine_scalars(Tape& tape, const std::vector<NodeId>& terms,
                       const std::vector<float>& coeffs);

// Non-differentiable tensor utilities.

/// Align-corners-false bilinear interpolation of [C,h,w] to [C,H,W].
Tensor upsample_bilinear(const Tensor& input, int target_h, int target_w);

/// Softmax of a plain vector (max-shifted).
std::vector<float> softmax_vec(const std::vector<float>& logits);

}  // namespace softcam
