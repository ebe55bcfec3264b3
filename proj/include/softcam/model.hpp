#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "softcam/ops.hpp"
#include "softcam/tape.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

struct ConvLayer {
  Tensor kernel;  // [C_out, C_in, kH, kW]
  Tensor bias;    // [C_out]
  int stride = 1;
  int padding = 1;
};

struct LinearLayer {
  Tensor weight;  // [b2, b1]
  Tensor bias;    // [b2]
};

struct BackboneConfig {
  int in_channels = 1;
  int height = 64;
  int width = 64;
  struct Block {
    int out_channels = 16;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    bool pool = true;
  };
  std::vector<Block> blocks;
  std::uint64_t seed = 0;

  /// 1x64x64 input, channels 16/32/64/128, pool after every block -> 128x4x4.
  static BackboneConfig desk_default();

  /// Resulting feature volume [D, N, M].
  std::array<int, 3> feature_shape() const;

  std::string to_json() const;
  static BackboneConfig from_json(const std::string& text);
};

enum class HeadKind { blackbox, softcam };
enum class HeadPreset { resnet_style, vgg_style };

/// GAP followed by one or more FC layers with ReLU between them.
struct BlackBoxHead {
  std::vector<LinearLayer> fc;
};

/// Stack of 1x1 convolutions with ReLU between layers. The final layer has C
/// output channels and no ReLU, so evidence maps are signed.
struct SoftCamHead {
  std::vector<ConvLayer> conv;
};

struct PassCounter {
  long forward = 0;
  long backward = 0;
};

struct ModelBundle {
  BackboneConfig config;
  std::vector<ConvLayer> backbone;
  HeadKind head_kind = HeadKind::blackbox;
  BlackBoxHead blackbox;
  SoftCamHead softcam;
  int num_classes = 2;
  std::uint64_t seed = 0;
  mutable PassCounter passes;
};

/// Kaiming-uniform fan-in init for all weights, zero biases; fully determined
/// by the seed.
ModelBundle init_model(const BackboneConfig& config, HeadKind kind, HeadPreset preset,
                       int num_classes, std::uint64_t seed);

/// Each FC layer becomes a 1x1 conv with identical weights and biases.
SoftCamHead convert_head(const BlackBoxHead& head);

/// Copy of the model with its black-box head replaced by the converted one.
ModelBundle with_converted_head(const ModelBundle& model);

std::int64_t param_count(const BlackBoxHead& head);
std::int64_t param_count(const SoftCamHead& head);

/// Runs the backbone on an image node already on the tape. When param_nodes
/// is given, the leaf ids of the backbone weights are appended to it in
/// parameters() order.
NodeId forward_features(Tape& tape, const ModelBundle& model, NodeId image,
                        std::vector<NodeId>* param_nodes = nullptr);

struct BlackboxOut {
  NodeId image = -1;
  NodeId features = -1;
  NodeId logits = -1;
  NodeId probs = -1;
  std::vector<NodeId> params;  // leaf ids aligned with parameters(model)
};

struct SoftcamOut {
  NodeId image = -1;
  NodeId features = -1;
  NodeId evidence = -1;  // [C, N, M], signed
  NodeId logits = -1;
  NodeId probs = -1;
  std::vector<NodeId> params;
};

BlackboxOut blackbox_forward(Tape& tape, const ModelBundle& model, const Tensor& image);
SoftcamOut softcam_forward(Tape& tape, const ModelBundle& model, const Tensor& image);

/// All trainable tensors in a stable order (backbone first, then head).
std::vector<Tensor*> parameters(ModelBundle& model);
std::vector<const Tensor*> parameters(const ModelBundle& model);

}  // namespace softcam
