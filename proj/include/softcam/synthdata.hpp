#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softcam/rng.hpp"
#include "softcam/tensor.hpp"

namespace softcam {

struct SynthConfig {
  int height = 64;
  int width = 64;
  int num_classes = 2;  // class 0 = healthy; >2 grades disease by lesion count
  /// inclusive lesion-count range per disease grade, strictly increasing
  std::vector<std::pair<int, int>> lesions_per_grade = {{2, 4}};
  double radius_min = 3.0;
  double radius_max = 6.0;
  double intensity_delta = 1.5;
  double texture_scale = 0.4;  // background noise amplitude after smoothing
  double healthy_fraction = 0.73;
  double split_train = 0.75;
  double split_val = 0.10;
  double split_test = 0.15;
  int num_samples = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
};

struct Sample {
  int id = 0;
  Tensor image;  // [1,H,W], normalized to train-split zero mean / unit variance
  int label = 0;
  Tensor mask;  // [H,W] in {0,1}; all-zero for healthy samples
};

struct DataSplits {
  std::vector<Sample> train, val, test;
};

struct SynthDataset {
  SynthConfig config;
  DataSplits splits;
  double train_mean = 0.0;
  double train_std = 1.0;
};

/// Raw (pre-normalization) sample; generation is a pure function of
/// (config.seed, index).
Sample generate_raw_sample(const SynthConfig& config, int index);

/// Generates, splits (disjoint, by shuffled index) and normalizes the dataset.
SynthDataset generate_dataset(const SynthConfig& config);

/// Horizontal/vertical flips, each with probability 0.5; mask follows image.
Sample augment(const Sample& sample, Rng& rng);

// On-disk layout: images/<id>.sct, masks/<id>.pgm, manifest.csv
// (id,split,label,mask_file) and dataset.json (config + normalization stats).
void save_dataset(const std::string& dir, const SynthDataset& dataset);
SynthDataset load_dataset(const std::string& dir);

}  // namespace softcam
