#include "softcam/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "softcam/ops.hpp"

namespace softcam {

std::string method_name(MethodId id) {
  switch (id) {
    case MethodId::cam: return "cam";
    case MethodId::gradcam: return "gradcam";
    case MethodId::scorecam: return "scorecam";
    case MethodId::layercam: return "layercam";
    case MethodId::guided_bp: return "guided-bp";
    case MethodId::integrated_gradients: return "integrated-gradients";
    case MethodId::softcam_evidence: return "softcam-evidence";
  }
  throw std::logic_error("method_name: unknown method");
}

MethodId method_from_name(const std::string& name) {
  for (MethodId id : {MethodId::cam, MethodId::gradcam, MethodId::scorecam, MethodId::layercam,
                      MethodId::guided_bp, MethodId::integrated_gradients,
                      MethodId::softcam_evidence}) {
    if (method_name(id) == name) return id;
  }
  throw std::invalid_argument("unknown saliency method: " + name);
}

namespace {

struct AnyForward {
  NodeId image = -1;
  NodeId features = -1;
  NodeId logits = -1;
};

AnyForward any_forward(Tape& tape, const ModelBundle& model, const Tensor& image) {
  AnyForward out;
  if (model.head_kind == HeadKind::softcam) {
    auto r = softcam_forward(tape, model, image);
    out.image = r.image;
    out.features = r.features;
    out.logits = r.logits;
  } else {
    auto r = blackbox_forward(tape, model, image);
    out.image = r.image;
    out.features = r.features;
    out.logits = r.logits;
  }
  return out;
}

Tensor channel_slice(const Tensor& volume, int channel) {
  const int h = volume.extent(1), w = volume.extent(2);
  Tensor out({h, w});
  const float* src = volume.data() + static_cast<std::int64_t>(channel) * h * w;
  std::copy(src, src + static_cast<std::int64_t>(h) * w, out.data());
  return out;
}

void check_class(const ModelBundle& model, int class_index) {
  if (class_index < 0 || class_index >= model.num_classes)
    throw std::invalid_argument("saliency: class index " + std::to_string(class_index) +
                                " out of range for " + std::to_string(model.num_classes) +
                                " classes");
}

/// Feature-map gradient of one class logit; also returns the features.
std::pair<Tensor, Tensor> feature_gradient(const ModelBundle& model, const Tensor& image,
                                           int class_index) {
  Tape tape;
  AnyForward fwd = any_forward(tape, model, image);
  NodeId target = pick(tape, fwd.logits, class_index);
  GradTable table = tape.backward(target);
  ++model.passes.backward;
  return {tape.value(fwd.features), table.grad(fwd.features)};
}

}  // namespace

SaliencyMap cam(const ModelBundle& model, const Tensor& image, int class_index) {
  check_class(model, class_index);
  if (model.head_kind != HeadKind::blackbox || model.blackbox.fc.size() != 1)
    throw std::invalid_argument("CAM requires single-FC head");
  Tape tape;
  auto fwd = blackbox_forward(tape, model, image);
  const Tensor& features = tape.value(fwd.features);
  const Tensor& weight = model.blackbox.fc[0].weight;  // [C, D]
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::cam;
  map.resolution = Resolution::feature;
  map.values = Tensor({h, w});
  for (int k = 0; k < d; ++k) {
    const float wk = weight.at(class_index, k);
    const float* a = features.data() + static_cast<std::int64_t>(k) * h * w;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
      map.values[i] += wk * a[i];
  }
  return map;
}

SaliencyMap gradcam(const ModelBundle& model, const Tensor& image, int class_index) {
  check_class(model, class_index);
  auto [features, grad] = feature_gradient(model, image, class_index);
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  const std::int64_t span = static_cast<std::int64_t>(h) * w;
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::gradcam;
  map.resolution = Resolution::feature;
  map.values = Tensor({h, w});
  for (int k = 0; k < d; ++k) {
    const float* g = grad.data() + k * span;
    double wk = 0.0;
    for (std::int64_t i = 0; i < span; ++i) wk += g[i];
    wk /= static_cast<double>(span);
    const float* a = features.data() + k * span;
    for (std::int64_t i = 0; i < span; ++i)
      map.values[i] += static_cast<float>(wk) * a[i];
  }
  for (std::int64_t i = 0; i < span; ++i) map.values[i] = std::max(map.values[i], 0.0f);
  return map;
}

SaliencyMap layercam(const ModelBundle& model, const Tensor& image, int class_index) {
  check_class(model, class_index);
  auto [features, grad] = feature_gradient(model, image, class_index);
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  const std::int64_t span = static_cast<std::int64_t>(h) * w;
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::layercam;
  map.resolution = Resolution::feature;
  map.values = Tensor({h, w});
  for (int k = 0; k < d; ++k) {
    const float* g = grad.data() + k * span;
    const float* a = features.data() + k * span;
    for (std::int64_t i = 0; i < span; ++i)
      map.values[i] += std::max(g[i], 0.0f) * a[i];
  }
  return map;
}

SaliencyMap scorecam(const ModelBundle& model, const Tensor& image, int class_index,
                     int top_channels) {
  check_class(model, class_index);
  Tape base_tape;
  AnyForward base = any_forward(base_tape, model, image);
  const Tensor features = base_tape.value(base.features);
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  const std::int64_t span = static_cast<std::int64_t>(h) * w;
  if (top_channels < 1 || top_channels > d)
    throw std::invalid_argument("scorecam: top_channels must be in [1, " + std::to_string(d) +
                                "]");
  const int H = image.extent(1), W = image.extent(2);

  // channel subset by descending activation energy
  std::vector<double> energy(d, 0.0);
  for (int k = 0; k < d; ++k) {
    const float* a = features.data() + k * span;
    for (std::int64_t i = 0; i < span; ++i)
      energy[k] += static_cast<double>(a[i]) * a[i];
  }
  std::vector<int> channels(d);
  std::iota(channels.begin(), channels.end(), 0);
  std::stable_sort(channels.begin(), channels.end(),
                   [&](int a, int b) { return energy[a] > energy[b]; });
  channels.resize(top_channels);

  std::vector<float> scores(top_channels);
  for (int idx = 0; idx < top_channels; ++idx) {
    const int k = channels[idx];
    Tensor chan({1, h, w});
    std::copy(features.data() + k * span, features.data() + (k + 1) * span, chan.data());
    Tensor up = upsample_bilinear(chan, H, W);
    const float lo = up.min(), hi = up.max();
    Tensor masked = image;
    if (hi > lo) {
      const float inv = 1.0f / (hi - lo);
      for (int c = 0; c < image.extent(0); ++c)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
          masked.data()[c * H * W + i] =
              image.data()[c * H * W + i] * ((up[i] - lo) * inv);
    } else {
      std::fill(masked.vec().begin(), masked.vec().end(), 0.0f);  // constant map -> zero mask
    }
    Tape tape;
    AnyForward fwd = any_forward(tape, model, masked);
    scores[idx] = tape.value(fwd.logits)[class_index];
  }
  const std::vector<float> weights = softmax_vec(scores);

  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::scorecam;
  map.resolution = Resolution::feature;
  map.values = Tensor({h, w});
  for (int idx = 0; idx < top_channels; ++idx) {
    const float* a = features.data() + channels[idx] * span;
    for (std::int64_t i = 0; i < span; ++i) map.values[i] += weights[idx] * a[i];
  }
  for (std::int64_t i = 0; i < span; ++i) map.values[i] = std::max(map.values[i], 0.0f);
  return map;
}

SaliencyMap guided_backprop(const ModelBundle& model, const Tensor& image, int class_index) {
  check_class(model, class_index);
  Tape tape;
  tape.relu_mode = ReluMode::guided;
  AnyForward fwd = any_forward(tape, model, image);
  NodeId target = pick(tape, fwd.logits, class_index);
  GradTable table = tape.backward(target);
  ++model.passes.backward;
  const Tensor& g = table.grad(fwd.image);
  const int C = g.extent(0), H = g.extent(1), W = g.extent(2);
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::guided_bp;
  map.resolution = Resolution::input;
  map.values = Tensor({H, W});
  for (int c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i)
      map.values[i] += g.data()[c * H * W + i];
  return map;
}

SaliencyMap integrated_gradients(const ModelBundle& model, const Tensor& image, int class_index,
                                 int steps) {
  check_class(model, class_index);
  if (steps < 1) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  const int C = image.extent(0), H = image.extent(1), W = image.extent(2);
  Tensor avg_grad(image.shape());
  for (int t = 1; t <= steps; ++t) {
    const float alpha = static_cast<float>(t) / steps;
    Tensor point(image.shape());
    for (std::int64_t i = 0; i < image.size(); ++i) point[i] = alpha * image[i];
    Tape tape;
    AnyForward fwd = any_forward(tape, model, point);
    NodeId target = pick(tape, fwd.logits, class_index);
    GradTable table = tape.backward(target);
    ++model.passes.backward;
    const Tensor& g = table.grad(fwd.image);
    for (std::int64_t i = 0; i < image.size(); ++i) avg_grad[i] += g[i];
  }
  const float inv = 1.0f / steps;
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::integrated_gradients;
  map.resolution = Resolution::input;
  map.values = Tensor({H, W});
  for (int c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i) {
      const std::int64_t idx = c * static_cast<std::int64_t>(H) * W + i;
      map.values[i] += image[idx] * avg_grad[idx] * inv;  // baseline is the zero image
    }
  return map;
}

SaliencyMap softcam_evidence(const Tape& tape, const SoftcamOut& out, int class_index) {
  const Tensor& evidence = tape.value(out.evidence);
  if (class_index < 0 || class_index >= evidence.extent(0))
    throw std::invalid_argument("softcam_evidence: class index out of range");
  SaliencyMap map;
  map.class_index = class_index;
  map.method = MethodId::softcam_evidence;
  map.resolution = Resolution::feature;
  map.values = channel_slice(evidence, class_index);
  return map;
}

SaliencyMap softcam_evidence(const ModelBundle& model, const Tensor& image, int class_index) {
  check_class(model, class_index);
  if (model.head_kind != HeadKind::softcam)
    throw std::invalid_argument("softcam_evidence requires a SoftCAM head");
  Tape tape;
  SoftcamOut out = softcam_forward(tape, model, image);
  return softcam_evidence(tape, out, class_index);
}

}  // namespace softcam
