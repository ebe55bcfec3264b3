#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softcam/model.hpp"
#include "softcam/ops.hpp"
#include "softcam/rng.hpp"
#include "softcam/saliency.hpp"
#include "softcam/tape.hpp"

using namespace softcam;

TEST_SUITE_BEGIN("saliency");

namespace {

BackboneConfig small_backbone() {
  BackboneConfig config;
  config.in_channels = 1;
  config.height = 16;
  config.width = 16;
  config.blocks = {{6, 3, 1, 1, true}, {8, 3, 1, 1, true}};
  return config;
}

Tensor random_image(Rng& rng, int h = 16, int w = 16) {
  Tensor img({1, h, w});
  for (auto& v : img.vec()) v = static_cast<float>(rng.normal());
  return img;
}

double class_logit(const ModelBundle& model, const Tensor& image, int c) {
  Tape tape;
  if (model.head_kind == HeadKind::softcam)
    return tape.value(softcam_forward(tape, model, image).logits)[c];
  return tape.value(blackbox_forward(tape, model, image).logits)[c];
}

}  // namespace

TEST_CASE("method names round-trip and reject unknowns") {
  for (MethodId id : {MethodId::cam, MethodId::gradcam, MethodId::scorecam, MethodId::layercam,
                      MethodId::guided_bp, MethodId::integrated_gradients,
                      MethodId::softcam_evidence})
    CHECK(method_from_name(method_name(id)) == id);
  CHECK_THROWS_AS(method_from_name("smoothgrad"), std::invalid_argument);
}

TEST_CASE("cam requires a single-FC black-box head") {
  ModelBundle sc = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 1);
  Rng rng(1);
  const Tensor img = random_image(rng);
  CHECK_THROWS_WITH_AS(cam(sc, img, 0), "CAM requires single-FC head", std::invalid_argument);
  ModelBundle multi =
      init_model(small_backbone(), HeadKind::blackbox, HeadPreset::vgg_style, 2, 1);
  CHECK_THROWS_WITH_AS(cam(multi, img, 0), "CAM requires single-FC head", std::invalid_argument);
}

TEST_CASE("class index range is enforced everywhere") {
  ModelBundle m = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 2);
  Rng rng(2);
  const Tensor img = random_image(rng);
  CHECK_THROWS_AS(gradcam(m, img, 2), std::invalid_argument);
  CHECK_THROWS_AS(softcam_evidence(m, img, -1), std::invalid_argument);
  CHECK_THROWS_AS(integrated_gradients(m, img, 5), std::invalid_argument);
}

TEST_CASE("gradcam is a rescaled relu of cam on a single-FC model") {
  // with a linear head, d(logit_c)/dA_k is the constant w_ck / (N*M), so
  // N*M * gradcam == relu(cam) cell for cell
  for (int seed = 0; seed < 5; ++seed) {
    ModelBundle bb =
        init_model(small_backbone(), HeadKind::blackbox, HeadPreset::resnet_style, 2, seed);
    Rng rng(100 + seed);
    const Tensor img = random_image(rng);
    SaliencyMap g = gradcam(bb, img, 1);
    SaliencyMap c = cam(bb, img, 1);
    const double nm = static_cast<double>(g.values.size());
    for (std::int64_t i = 0; i < g.values.size(); ++i) {
      const double expected = std::max(0.0, static_cast<double>(c.values[i]));
      CHECK(nm * g.values[i] == doctest::Approx(expected).epsilon(1e-3));
    }
    CHECK(g.values.min() >= 0.0f);
  }
}

TEST_CASE("layercam matches its per-channel definition on a linear head") {
  ModelBundle sc = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 7);
  Rng rng(7);
  const Tensor img = random_image(rng);
  Tape tape;
  auto out = softcam_forward(tape, sc, img);
  const Tensor& features = tape.value(out.features);
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  const Tensor& kernel = sc.softcam.conv[0].kernel;  // [2, d, 1, 1]

  SaliencyMap map = layercam(sc, img, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double expected = 0.0;
      for (int k = 0; k < d; ++k) {
        const double grad = kernel[static_cast<std::int64_t>(d) + k] / (h * w);
        expected += std::max(grad, 0.0) * features.at(k, y, x);
      }
      CHECK(map.values.at(y, x) == doctest::Approx(expected).epsilon(1e-3));
    }
}

TEST_CASE("scorecam matches an independent reimplementation") {
  ModelBundle sc = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 9);
  Rng rng(9);
  const Tensor img = random_image(rng);
  const int cls = 1;

  Tape tape;
  auto out = softcam_forward(tape, sc, img);
  const Tensor features = tape.value(out.features);
  const int d = features.extent(0), h = features.extent(1), w = features.extent(2);
  const int top = 5;

  std::vector<double> energy(d, 0.0);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < h * w; ++i) {
      const double v = features[k * h * w + i];
      energy[k] += v * v;
    }
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return energy[a] > energy[b]; });
  order.resize(top);

  std::vector<float> scores;
  for (int k : order) {
    Tensor chan({1, h, w});
    std::copy(features.data() + k * h * w, features.data() + (k + 1) * h * w, chan.data());
    Tensor up = upsample_bilinear(chan, 16, 16);
    const float lo = up.min(), hi = up.max();
    Tensor masked = img;
    for (std::int64_t i = 0; i < masked.size(); ++i)
      masked[i] = hi > lo ? img[i] * (up[i] - lo) / (hi - lo) : 0.0f;
    scores.push_back(static_cast<float>(class_logit(sc, masked, cls)));
  }
  const std::vector<float> weights = softmax_vec(scores);
  Tensor expected({h, w});
  for (int idx = 0; idx < top; ++idx)
    for (int i = 0; i < h * w; ++i)
      expected[i] += weights[idx] * features[order[idx] * h * w + i];
  for (std::int64_t i = 0; i < expected.size(); ++i)
    expected[i] = std::max(expected[i], 0.0f);

  SaliencyMap map = scorecam(sc, img, cls, top);
  REQUIRE(map.values.same_shape(expected));
  for (std::int64_t i = 0; i < expected.size(); ++i)
    CHECK(map.values[i] == doctest::Approx(expected[i]).epsilon(1e-4));
}

TEST_CASE("scorecam validates the channel budget") {
  ModelBundle sc = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 9);
  Rng rng(9);
  const Tensor img = random_image(rng);
  CHECK_THROWS_AS(scorecam(sc, img, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(scorecam(sc, img, 0, 999), std::invalid_argument);
}

TEST_CASE("guided backprop equals the standard gradient when no path is negative") {
  ModelBundle m = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 4);
  for (Tensor* p : parameters(m))
    for (auto& v : p->vec()) v = std::fabs(v);
  Rng rng(4);
  Tensor img = random_image(rng);
  for (auto& v : img.vec()) v = std::fabs(v);  // keep every activation positive

  SaliencyMap guided = guided_backprop(m, img, 1);

  Tape tape;
  auto out = softcam_forward(tape, m, img);
  GradTable table = tape.backward(pick(tape, out.logits, 1));
  const Tensor& g = table.grad(out.image);
  REQUIRE(guided.values.shape() == std::vector<int>{16, 16});
  for (int i = 0; i < 16 * 16; ++i)
    CHECK(guided.values[i] == doctest::Approx(g[i]).epsilon(1e-5));
}

TEST_CASE("guided backprop differs from the standard gradient in general") {
  ModelBundle m = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 4);
  Rng rng(14);
  const Tensor img = random_image(rng);
  SaliencyMap guided = guided_backprop(m, img, 1);
  Tape tape;
  auto out = softcam_forward(tape, m, img);
  GradTable table = tape.backward(pick(tape, out.logits, 1));
  const Tensor& g = table.grad(out.image);
  double diff = 0.0;
  for (int i = 0; i < 16 * 16; ++i) diff += std::fabs(guided.values[i] - g[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("integrated gradients satisfies completeness within 1 percent at 128 steps") {
  for (int seed = 0; seed < 10; ++seed) {
    ModelBundle m =
        init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, seed);
    Rng rng(500 + seed);
    const Tensor img = random_image(rng);
    const int cls = seed % 2;
    SaliencyMap map = integrated_gradients(m, img, cls, 128);
    const double attribution = map.values.sum();
    const double delta = class_logit(m, img, cls) -
                         class_logit(m, Tensor({1, 16, 16}), cls);
    CAPTURE(seed);
    CHECK(std::fabs(attribution - delta) <= 0.01 * std::max(std::fabs(delta), 1e-3));
  }
}

TEST_CASE("softcam evidence is the explanation: channel slice, zero extra passes") {
  ModelBundle m = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 3, 6);
  Rng rng(6);
  const Tensor img = random_image(rng);

  m.passes = PassCounter{};
  Tape tape;
  auto out = softcam_forward(tape, m, img);
  const Tensor& evidence = tape.value(out.evidence);
  const Tensor& logits = tape.value(out.logits);
  for (int c = 0; c < 3; ++c) {
    SaliencyMap map = softcam_evidence(tape, out, c);
    double mean = 0.0;
    for (std::int64_t i = 0; i < map.values.size(); ++i) {
      CHECK(map.values[i] == evidence[c * map.values.size() + i]);
      mean += map.values[i];
    }
    CHECK(logits[c] == doctest::Approx(mean / map.values.size()).epsilon(1e-5));
  }
  // the prediction pass is the only model pass
  CHECK(m.passes.forward == 1);
  CHECK(m.passes.backward == 0);
}

TEST_CASE("post-hoc methods do cost extra passes") {
  ModelBundle m = init_model(small_backbone(), HeadKind::softcam, HeadPreset::resnet_style, 2, 6);
  Rng rng(6);
  const Tensor img = random_image(rng);
  m.passes = PassCounter{};
  gradcam(m, img, 0);
  CHECK(m.passes.forward == 1);
  CHECK(m.passes.backward == 1);
  m.passes = PassCounter{};
  integrated_gradients(m, img, 0, 8);
  CHECK(m.passes.forward == 8);
  CHECK(m.passes.backward == 8);
  m.passes = PassCounter{};
  scorecam(m, img, 0, 4);
  CHECK(m.passes.forward == 1 + 4);
  CHECK(m.passes.backward == 0);
}

TEST_CASE("upsample_bilinear interpolates the half-pixel grid") {
  Tensor in({1, 2, 2}, {0.0f, 1.0f, 0.0f, 1.0f});
  Tensor up = upsample_bilinear(in, 4, 4);
  const float expected[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(up[y * 4 + x] == doctest::Approx(expected[x]).epsilon(1e-6));
  CHECK_THROWS_AS(upsample_bilinear(in, 1, 4), std::invalid_argument);
}

TEST_SUITE_END();
