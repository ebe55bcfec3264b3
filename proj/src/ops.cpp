#include "softcam/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace softcam {
namespace {

// C(MxN) += A(MxK) * B(KxN), all row-major
void gemm(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a_row = A + static_cast<std::int64_t>(i) * K;
    float* c_row = C + static_cast<std::int64_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const float a = a_row[k];
      const float* b_row = B + static_cast<std::int64_t>(k) * N;
      for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C(MxN) += A(MxK) * B(NxK)^T
void gemm_abt(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a_row = A + static_cast<std::int64_t>(i) * K;
    for (int j = 0; j < N; ++j) {
      const float* b_row = B + static_cast<std::int64_t>(j) * K;
      float acc = 0.0f;
      for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
      C[static_cast<std::int64_t>(i) * N + j] += acc;
    }
  }
}

// C(MxN) += A(KxM)^T * B(KxN)
void gemm_atb(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int k = 0; k < K; ++k) {
    const float* a_row = A + static_cast<std::int64_t>(k) * M;
    const float* b_row = B + static_cast<std::int64_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      const float a = a_row[i];
      float* c_row = C + static_cast<std::int64_t>(i) * N;
      for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// input [C,H,W] -> cols [(C*kh*kw) x (oh*ow)]
void im2col(const Tensor& input, int kh, int kw, int stride, int pad, int oh, int ow,
            float* cols) {
  const int C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const int span = oh * ow;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        float* dst = cols + (static_cast<std::int64_t>(c) * kh * kw + ky * kw + kx) * span;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) {
            std::fill(dst + oy * ow, dst + (oy + 1) * ow, 0.0f);
            continue;
          }
          const float* src = input.data() + (static_cast<std::int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[oy * ow + ox] = (ix < 0 || ix >= W) ? 0.0f : src[ix];
          }
        }
      }
    }
  }
}

// cols gradient [(C*kh*kw) x (oh*ow)] accumulated back into [C,H,W]
void col2im(const float* cols, int C, int H, int W, int kh, int kw, int stride, int pad,
            int oh, int ow, Tensor& grad) {
  const int span = oh * ow;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const float* src = cols + (static_cast<std::int64_t>(c) * kh * kw + ky * kw + kx) * span;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          float* dst = grad.data() + (static_cast<std::int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < W) dst[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

NodeId conv2d(Tape& tape, NodeId input, NodeId kernel, NodeId bias, int stride, int padding) {
  const Tensor& x = tape.value(input);
  const Tensor& k = tape.value(kernel);
  const Tensor& b = tape.value(bias);
  require(x.rank() == 3, "conv2d: input must be rank 3, got " + x.shape_str());
  require(k.rank() == 4, "conv2d: kernel must be rank 4, got " + k.shape_str());
  require(stride >= 1, "conv2d: stride must be positive");
  require(padding >= 0, "conv2d: padding must be non-negative");
  const int cin = x.extent(0), H = x.extent(1), W = x.extent(2);
  const int cout = k.extent(0), kh = k.extent(2), kw = k.extent(3);
  require(k.extent(1) == cin, "conv2d: kernel in-channels " + std::to_string(k.extent(1)) +
                                  " != input channels " + std::to_string(cin));
  require(b.rank() == 1 && b.extent(0) == cout,
          "conv2d: bias extent must equal out-channels " + std::to_string(cout));
  require(kh <= H + 2 * padding && kw <= W + 2 * padding,
          "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
              " exceeds padded input " + std::to_string(H + 2 * padding) + "x" +
              std::to_string(W + 2 * padding));
  const int oh = (H + 2 * padding - kh) / stride + 1;
  const int ow = (W + 2 * padding - kw) / stride + 1;
  const int ckk = cin * kh * kw;
  const int span = oh * ow;

  auto cols = std::make_shared<std::vector<float>>(static_cast<size_t>(ckk) * span);
  im2col(x, kh, kw, stride, padding, oh, ow, cols->data());

  Tensor out({cout, oh, ow});
  for (int o = 0; o < cout; ++o)
    std::fill(out.data() + static_cast<std::int64_t>(o) * span,
              out.data() + static_cast<std::int64_t>(o + 1) * span, b[o]);
  gemm(k.data(), cols->data(), out.data(), cout, ckk, span);

  // kernel values are needed for the input gradient; the tape may hold a
  // later version of the weights by the time backward runs
  Tensor kernel_copy = k;
  auto backward = [cols, kernel_copy, cin, H, W, cout, kh, kw, stride, padding, oh, ow,
                   ckk, span](const Tape&, const Tensor& gout,
                              const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    Tensor& gk = *gin[1];
    Tensor& gb = *gin[2];
    for (int o = 0; o < cout; ++o) {
      const float* g = gout.data() + static_cast<std::int64_t>(o) * span;
      float acc = 0.0f;
      for (int i = 0; i < span; ++i) acc += g[i];
      gb[o] += acc;
    }
    gemm_abt(gout.data(), cols->data(), gk.data(), cout, span, ckk);
    std::vector<float> gcols(static_cast<size_t>(ckk) * span, 0.0f);
    gemm_atb(kernel_copy.data(), gout.data(), gcols.data(), ckk, cout, span);
    col2im(gcols.data(), cin, H, W, kh, kw, stride, padding, oh, ow, gx);
  };
  return tape.push(std::move(out), {input, kernel, bias}, std::move(backward));
}

NodeId relu(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  Tensor out = x;
  for (auto& v : out.vec()) v = std::max(v, 0.0f);
  Tensor input_copy = x;
  auto backward = [input_copy](const Tape& t, const Tensor& gout,
                               const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    if (t.relu_mode == ReluMode::guided) {
      for (std::int64_t i = 0; i < gout.size(); ++i)
        if (input_copy[i] > 0.0f && gout[i] > 0.0f) gx[i] += gout[i];
    } else {
      for (std::int64_t i = 0; i < gout.size(); ++i)
        if (input_copy[i] > 0.0f) gx[i] += gout[i];
    }
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId maxpool2(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  require(x.rank() == 3, "maxpool2: input must be rank 3, got " + x.shape_str());
  const int C = x.extent(0), H = x.extent(1), W = x.extent(2);
  require(H % 2 == 0 && W % 2 == 0,
          "maxpool2: extents must be even, got " + std::to_string(H) + "x" + std::to_string(W));
  const int oh = H / 2, ow = W / 2;
  Tensor out({C, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<size_t>(C) * oh * ow);
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        std::int64_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::int64_t idx =
                (static_cast<std::int64_t>(c) * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > best) {  // strict: first in row-major wins ties
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        out.at(c, oy, ox) = best;
        (*argmax)[(static_cast<std::int64_t>(c) * oh + oy) * ow + ox] = best_idx;
      }
    }
  }
  auto backward = [argmax](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    for (std::int64_t i = 0; i < gout.size(); ++i) gx[(*argmax)[i]] += gout[i];
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId global_avg_pool(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  require(x.rank() == 3, "global_avg_pool: input must be rank 3, got " + x.shape_str());
  const int C = x.extent(0);
  const std::int64_t span = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
  Tensor out({C});
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    const float* p = x.data() + c * span;
    for (std::int64_t i = 0; i < span; ++i) s += p[i];
    out[c] = static_cast<float>(s / static_cast<double>(span));
  }
  auto backward = [C, span](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    const float inv = 1.0f / static_cast<float>(span);
    for (int c = 0; c < C; ++c) {
      const float g = gout[c] * inv;
      float* p = gx.data() + c * span;
      for (std::int64_t i = 0; i < span; ++i) p[i] += g;
    }
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId linear(Tape& tape, NodeId input, NodeId weight, NodeId bias) {
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const Tensor& b = tape.value(bias);
  require(x.rank() == 1, "linear: input must be rank 1, got " + x.shape_str());
  require(w.rank() == 2, "linear: weight must be rank 2, got " + w.shape_str());
  const int b1 = x.extent(0);
  const int b2 = w.extent(0);
  require(w.extent(1) == b1, "linear: weight columns " + std::to_string(w.extent(1)) +
                                 " != input extent " + std::to_string(b1));
  require(b.rank() == 1 && b.extent(0) == b2,
          "linear: bias extent must equal " + std::to_string(b2));
  Tensor out({b2});
  for (int i = 0; i < b2; ++i) {
    float acc = b[i];
    const float* row = w.data() + static_cast<std::int64_t>(i) * b1;
    for (int j = 0; j < b1; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  Tensor x_copy = x, w_copy = w;
  auto backward = [x_copy, w_copy, b1, b2](const Tape&, const Tensor& gout,
                                           const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    Tensor& gw = *gin[1];
    Tensor& gb = *gin[2];
    for (int i = 0; i < b2; ++i) {
      const float g = gout[i];
      gb[i] += g;
      const float* row = w_copy.data() + static_cast<std::int64_t>(i) * b1;
      float* grow = gw.data() + static_cast<std::int64_t>(i) * b1;
      for (int j = 0; j < b1; ++j) {
        gx[j] += g * row[j];
        grow[j] += g * x_copy[j];
      }
    }
  };
  return tape.push(std::move(out), {input, weight, bias}, std::move(backward));
}

NodeId softmax(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  require(x.rank() == 1 && x.extent(0) >= 2, "softmax: input must be a vector of >= 2 logits");
  Tensor out({x.extent(0)});
  const auto probs = softmax_vec(x.vec());
  std::copy(probs.begin(), probs.end(), out.data());
  Tensor p_copy = out;
  auto backward = [p_copy](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    float dot = 0.0f;
    for (std::int64_t i = 0; i < gout.size(); ++i) dot += gout[i] * p_copy[i];
    for (std::int64_t i = 0; i < gout.size(); ++i) gx[i] += p_copy[i] * (gout[i] - dot);
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId cross_entropy(Tape& tape, NodeId probs, int label) {
  const Tensor& p = tape.value(probs);
  require(p.rank() == 1, "cross_entropy: probs must be rank 1");
  require(label >= 0 && label < p.extent(0),
          "cross_entropy: label " + std::to_string(label) + " out of range for " +
              std::to_string(p.extent(0)) + " classes");
  const float floored = std::max(p[label], 1e-12f);
  Tensor out({1});
  out[0] = -std::log(floored);
  auto backward = [label, floored](const Tape&, const Tensor& gout,
                                   const std::vector<Tensor*>& gin) {
    (*gin[0])[label] += gout[0] * (-1.0f / floored);
  };
  return tape.push(std::move(out), {probs}, std::move(backward));
}

NodeId sum(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  Tensor out({1});
  out[0] = x.sum();
  auto backward = [](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gout[0];
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId pick(Tape& tape, NodeId input, int index) {
  const Tensor& x = tape.value(input);
  require(index >= 0 && index < x.size(),
          "pick: index " + std::to_string(index) + " out of range for " + x.shape_str());
  Tensor out({1});
  out[0] = x[index];
  auto backward = [index](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    (*gin[0])[index] += gout[0];
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId sum_abs(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  Tensor out({1});
  double s = 0.0;
  for (float v : x.vec()) s += std::fabs(v);
  out[0] = static_cast<float>(s);
  Tensor x_copy = x;
  auto backward = [x_copy](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    Tensor& gx = *gin[0];
    for (std::int64_t i = 0; i < gx.size(); ++i) {
      if (x_copy[i] > 0.0f)
        gx[i] += gout[0];
      else if (x_copy[i] < 0.0f)
        gx[i] -= gout[0];
    }
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId l2_norm(Tape& tape, NodeId input) {
  const Tensor& x = tape.value(input);
  Tensor out({1});
  double s = 0.0;
  for (float v : x.vec()) s += static_cast<double>(v) * v;
  const float norm = static_cast<float>(std::sqrt(s));
  out[0] = norm;
  Tensor x_copy = x;
  auto backward = [x_copy, norm](const Tape&, const Tensor& gout,
                                 const std::vector<Tensor*>& gin) {
    if (norm <= 0.0f) return;  // subgradient 0 at the origin
    Tensor& gx = *gin[0];
    const float scale = gout[0] / norm;
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += scale * x_copy[i];
  };
  return tape.push(std::move(out), {input}, std::move(backward));
}

NodeId combine_scalars(Tape& tape, const std::vector<NodeId>& terms,
                       const std::vector<float>& coeffs) {
  require(terms.size() == coeffs.size() && !terms.empty(),
          "combine_scalars: terms and coeffs must be non-empty and matched");
  Tensor out({1});
  double acc = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    const Tensor& v = tape.value(terms[i]);
    require(v.size() == 1, "combine_scalars: all terms must be scalar");
    acc += static_cast<double>(coeffs[i]) * v[0];
  }
  out[0] = static_cast<float>(acc);
  std::vector<float> c = coeffs;
  auto backward = [c](const Tape&, const Tensor& gout, const std::vector<Tensor*>& gin) {
    for (size_t i = 0; i < gin.size(); ++i) (*gin[i])[0] += c[i] * gout[0];
  };
  return tape.push(std::move(out), terms, std::move(backward));
}

Tensor upsample_bilinear(const Tensor& input, int target_h, int target_w) {
  require(input.rank() == 3, "upsample_bilinear: input must be rank 3, got " + input.shape_str());
  const int C = input.extent(0), h = input.extent(1), w = input.extent(2);
  require(target_h >= h && target_w >= w, "upsample_bilinear: target must not shrink the map");
  Tensor out({C, target_h, target_w});
  const float sy = static_cast<float>(h) / target_h;
  const float sx = static_cast<float>(w) / target_w;
  for (int y = 0; y < target_h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.0f, static_cast<float>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.0f, static_cast<float>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const float top = input.at(c, y0, x0) * (1.0f - wx) + input.at(c, y0, x1) * wx;
        const float bot = input.at(c, y1, x0) * (1.0f - wx) + input.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

std::vector<float> softmax_vec(const std::vector<float>& logits) {
  const float m = *std::max_element(logits.begin(), logits.end());
  std::vector<float> out(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& v : out) v = static_cast<float>(v / z);
  return out;
}

}  // namespace softcam
