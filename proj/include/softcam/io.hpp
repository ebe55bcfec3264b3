#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softcam/model.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

// SCT1 tensor format: magic "SCT1", u32 LE rank, rank x u32 LE extents, then
// raw f32 LE payload in row-major order.

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(const std::uint8_t* data, std::size_t size);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_digest(const std::string& path);

struct TrainProvenance {
  std::uint64_t seed = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  int epoch = 0;
};

struct Checkpoint {
  ModelBundle model;
  TrainProvenance provenance;
  std::uint64_t digest = 0;
};

// SCM1 checkpoint: header (magic, version, digest over config + tensor
// records, class count, head kind, config JSON), a named tensor index, then
// SCT1-style payloads. Byte-stable given identical inputs.

void save_checkpoint(const std::string& path, const ModelBundle& model,
                     const TrainProvenance& provenance = {});
Checkpoint load_checkpoint(const std::string& path);

/// Digest of a model's config plus all parameter bytes, as stored in SCM1.
std::uint64_t model_digest(const ModelBundle& model);

// 8-bit binary PGM (P5).

/// values must be a [H,W] grid; written clamped to 0..255.
void write_pgm(const std::string& path, const Tensor& gray, float scale = 1.0f);
/// Reads a P5 PGM into a [H,W] tensor of raw 0..255 values.
Tensor read_pgm(const std::string& path);

/// Diverging rendering of a signed map: 0 maps to mid-gray 128, the largest
/// magnitude to 0/255.
void write_saliency_pgm(const std::string& path, const Tensor& map2d);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace softcam
