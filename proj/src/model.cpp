#include "softcam/model.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "softcam/rng.hpp"

namespace softcam {

BackboneConfig BackboneConfig::desk_default() {
  BackboneConfig c;
  c.in_channels = 1;
  c.height = 64;
  c.width = 64;
  for (int ch : {16, 32, 64, 128}) c.blocks.push_back(Block{ch, 3, 1, 1, true});
  return c;
}

std::array<int, 3> BackboneConfig::feature_shape() const {
  int h = height, w = width, d = in_channels;
  for (const Block& b : blocks) {
    h = (h + 2 * b.padding - b.kernel) / b.stride + 1;
    w = (w + 2 * b.padding - b.kernel) / b.stride + 1;
    if (b.pool) {
      h /= 2;
      w /= 2;
    }
    d = b.out_channels;
  }
  if (h < 2 || w < 2)
    throw std::invalid_argument("BackboneConfig: feature map " + std::to_string(h) + "x" +
                                std::to_string(w) + " is not spatial (need >= 2x2)");
  return {d, h, w};
}

std::string BackboneConfig::to_json() const {
  nlohmann::json j;
  j["in_channels"] = in_channels;
  j["height"] = height;
  j["width"] = width;
  j["seed"] = seed;
  j["blocks"] = nlohmann::json::array();
  for (const Block& b : blocks) {
    j["blocks"].push_back({{"out_channels", b.out_channels},
                           {"kernel", b.kernel},
                           {"stride", b.stride},
                           {"padding", b.padding},
                           {"pool", b.pool}});
  }
  return j.dump();
}

BackboneConfig BackboneConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  BackboneConfig c;
  c.in_channels = j.at("in_channels");
  c.height = j.at("height");
  c.width = j.at("width");
  c.seed = j.at("seed");
  for (const auto& b : j.at("blocks")) {
    c.blocks.push_back(Block{b.at("out_channels"), b.at("kernel"), b.at("stride"),
                             b.at("padding"), b.at("pool")});
  }
  return c;
}

namespace {

Tensor kaiming_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / fan_in);
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

ModelBundle init_model(const BackboneConfig& config, HeadKind kind, HeadPreset preset,
                       int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("init_model: need at least 2 classes");
  ModelBundle m;
  m.config = config;
  m.config.seed = seed;
  m.head_kind = kind;
  m.num_classes = num_classes;
  m.seed = seed;

  Rng rng(seed);
  int cin = config.in_channels;
  for (const auto& b : config.blocks) {
    ConvLayer layer;
    layer.kernel = kaiming_uniform({b.out_channels, cin, b.kernel, b.kernel},
                                   cin * b.kernel * b.kernel, rng);
    layer.bias = Tensor({b.out_channels});
    layer.stride = b.stride;
    layer.padding = b.padding;
    m.backbone.push_back(std::move(layer));
    cin = b.out_channels;
  }

  const int d = config.feature_shape()[0];
  std::vector<int> widths;
  if (preset == HeadPreset::resnet_style) {
    widths = {d, num_classes};
  } else {
    widths = {d, 64, 64, num_classes};
  }
  BlackBoxHead head;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    LinearLayer l;
    l.weight = kaiming_uniform({widths[i + 1], widths[i]}, widths[i], rng);
    l.bias = Tensor({widths[i + 1]});
    head.fc.push_back(std::move(l));
  }
  if (kind == HeadKind::blackbox) {
    m.blackbox = std::move(head);
  } else {
    m.softcam = convert_head(head);
  }
  return m;
}

SoftCamHead convert_head(const BlackBoxHead& head) {
  SoftCamHead out;
  for (const LinearLayer& l : head.fc) {
    const int b2 = l.weight.extent(0);
    const int b1 = l.weight.extent(1);
    ConvLayer c;
    c.kernel = Tensor({b2, b1, 1, 1}, l.weight.vec());
    c.bias = l.bias;
    c.stride = 1;
    c.padding = 0;
    out.conv.push_back(std::move(c));
  }
  return out;
}

ModelBundle with_converted_head(const ModelBundle& model) {
  if (model.head_kind != HeadKind::blackbox)
    throw std::invalid_argument("with_converted_head: model already has a SoftCAM head");
  ModelBundle out = model;
  out.softcam = convert_head(model.blackbox);
  out.blackbox = BlackBoxHead{};
  out.head_kind = HeadKind::softcam;
  out.passes = PassCounter{};
  return out;
}

std::int64_t param_count(const BlackBoxHead& head) {
  std::int64_t n = 0;
  for (const auto& l : head.fc) n += l.weight.size() + l.bias.size();
  return n;
}

std::int64_t param_count(const SoftCamHead& head) {
  std::int64_t n = 0;
  for (const auto& l : head.conv) n += l.kernel.size() + l.bias.size();
  return n;
}

NodeId forward_features(Tape& tape, const ModelBundle& model, NodeId image,
                        std::vector<NodeId>* param_nodes) {
  const Tensor& img = tape.value(image);
  if (img.rank() != 3 || img.extent(0) != model.config.in_channels ||
      img.extent(1) != model.config.height || img.extent(2) != model.config.width) {
    throw std::invalid_argument("forward_features: image shape " + img.shape_str() +
                                " does not match configured input [" +
                                std::to_string(model.config.in_channels) + "," +
                                std::to_string(model.config.height) + "," +
                                std::to_string(model.config.width) + "]");
  }
  NodeId x = image;
  for (size_t i = 0; i < model.backbone.size(); ++i) {
    const ConvLayer& layer = model.backbone[i];
    NodeId k = tape.leaf(layer.kernel);
    NodeId b = tape.leaf(layer.bias);
    if (param_nodes) {
      param_nodes->push_back(k);
      param_nodes->push_back(b);
    }
    x = conv2d(tape, x, k, b, layer.stride, layer.padding);
    x = relu(tape, x);
    if (model.config.blocks[i].pool) x = maxpool2(tape, x);
  }
  return x;
}

BlackboxOut blackbox_forward(Tape& tape, const ModelBundle& model, const Tensor& image) {
  if (model.head_kind != HeadKind::blackbox)
    throw std::invalid_argument("blackbox_forward: model does not have a black-box head");
  BlackboxOut out;
  out.image = tape.leaf(image);
  out.features = forward_features(tape, model, out.image, &out.params);
  NodeId x = global_avg_pool(tape, out.features);
  for (size_t i = 0; i < model.blackbox.fc.size(); ++i) {
    const LinearLayer& l = model.blackbox.fc[i];
    NodeId w = tape.leaf(l.weight);
    NodeId b = tape.leaf(l.bias);
    out.params.push_back(w);
    out.params.push_back(b);
    x = linear(tape, x, w, b);
    if (i + 1 < model.blackbox.fc.size()) x = relu(tape, x);
  }
  out.logits = x;
  out.probs = softmax(tape, out.logits);
  ++model.passes.forward;
  return out;
}

SoftcamOut softcam_forward(Tape& tape, const ModelBundle& model, const Tensor& image) {
  if (model.head_kind != HeadKind::softcam)
    throw std::invalid_argument("softcam_forward: model does not have a SoftCAM head");
  SoftcamOut out;
  out.image = tape.leaf(image);
  out.features = forward_features(tape, model, out.image, &out.params);
  NodeId x = out.features;
  for (size_t i = 0; i < model.softcam.conv.size(); ++i) {
    const ConvLayer& l = model.softcam.conv[i];
    NodeId k = tape.leaf(l.kernel);
    NodeId b = tape.leaf(l.bias);
    out.params.push_back(k);
    out.params.push_back(b);
    x = conv2d(tape, x, k, b, 1, 0);
    if (i + 1 < model.softcam.conv.size()) x = relu(tape, x);
  }
  out.evidence = x;  // signed: no ReLU on the final evidence layer
  out.logits = global_avg_pool(tape, out.evidence);
  out.probs = softmax(tape, out.logits);
  ++model.passes.forward;
  return out;
}

std::vector<Tensor*> parameters(ModelBundle& model) {
  std::vector<Tensor*> ps;
  for (auto& l : model.backbone) {
    ps.push_back(&l.kernel);
    ps.push_back(&l.bias);
  }
  if (model.head_kind == HeadKind::blackbox) {
    for (auto& l : model.blackbox.fc) {
      ps.push_back(&l.weight);
      ps.push_back(&l.bias);
    }
  } else {
    for (auto& l : model.softcam.conv) {
      ps.push_back(&l.kernel);
      ps.push_back(&l.bias);
    }
  }
  return ps;
}

std::vector<const Tensor*> parameters(const ModelBundle& model) {
  auto ps = parameters(const_cast<ModelBundle&>(model));
  return {ps.begin(), ps.end()};
}

}  // namespace softcam
