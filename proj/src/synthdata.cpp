#include "softcam/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "softcam/io.hpp"

namespace fs = std::filesystem;

namespace softcam {

void SynthConfig::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("SynthConfig: image too small");
  if (num_classes < 2) throw std::invalid_argument("SynthConfig: need at least 2 classes");
  if (static_cast<int>(lesions_per_grade.size()) != num_classes - 1)
    throw std::invalid_argument("SynthConfig: need one lesion-count range per disease grade");
  int prev_hi = 0;
  for (const auto& [lo, hi] : lesions_per_grade) {
    if (lo < 1 || hi < lo)
      throw std::invalid_argument("SynthConfig: invalid lesion count range");
    if (lo <= prev_hi)
      throw std::invalid_argument("SynthConfig: lesion counts must be strictly increasing across grades");
    prev_hi = hi;
  }
  if (radius_min < 1.0 || radius_max < radius_min)
    throw std::invalid_argument("SynthConfig: invalid lesion radius range");
  if (2.0 * radius_max >= std::min(height, width))
    throw std::invalid_argument("SynthConfig: lesion larger than image");
  if (std::fabs(split_train + split_val + split_test - 1.0) > 1e-9)
    throw std::invalid_argument("SynthConfig: split fractions must sum to 1");
  if (healthy_fraction <= 0.0 || healthy_fraction >= 1.0)
    throw std::invalid_argument("SynthConfig: healthy fraction must be in (0,1)");
  if (num_samples < 10) throw std::invalid_argument("SynthConfig: too few samples");
}

std::string SynthConfig::to_json() const {
  nlohmann::json j;
  j["height"] = height;
  j["width"] = width;
  j["num_classes"] = num_classes;
  j["lesions_per_grade"] = nlohmann::json::array();
  for (const auto& [lo, hi] : lesions_per_grade) j["lesions_per_grade"].push_back({lo, hi});
  j["radius_min"] = radius_min;
  j["radius_max"] = radius_max;
  j["intensity_delta"] = intensity_delta;
  j["texture_scale"] = texture_scale;
  j["healthy_fraction"] = healthy_fraction;
  j["split_train"] = split_train;
  j["split_val"] = split_val;
  j["split_test"] = split_test;
  j["num_samples"] = num_samples;
  j["seed"] = seed;
  return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SynthConfig c;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("height", c.height);
  opt("width", c.width);
  opt("num_classes", c.num_classes);
  if (j.contains("lesions_per_grade")) {
    c.lesions_per_grade.clear();
    for (const auto& r : j.at("lesions_per_grade"))
      c.lesions_per_grade.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
  }
  opt("radius_min", c.radius_min);
  opt("radius_max", c.radius_max);
  opt("intensity_delta", c.intensity_delta);
  opt("texture_scale", c.texture_scale);
  opt("healthy_fraction", c.healthy_fraction);
  opt("split_train", c.split_train);
  opt("split_val", c.split_val);
  opt("split_test", c.split_test);
  opt("num_samples", c.num_samples);
  opt("seed", c.seed);
  return c;
}

namespace {

// 3x3 box blur with clamped borders, applied in place via a scratch copy
void box_blur(std::vector<float>& img, int h, int w) {
  std::vector<float> src = img;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          acc += src[yy * w + xx];
        }
      }
      img[y * w + x] = acc / 9.0f;
    }
  }
}

}  // namespace

Sample generate_raw_sample(const SynthConfig& config, int index) {
  const int h = config.height, w = config.width;
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)));

  Sample s;
  s.id = index;
  s.mask = Tensor({h, w});

  // smoothed noise background
  std::vector<float> bg(static_cast<size_t>(h) * w);
  for (auto& v : bg) v = static_cast<float>(rng.normal());
  box_blur(bg, h, w);
  box_blur(bg, h, w);
  for (auto& v : bg) v *= static_cast<float>(config.texture_scale) * 3.0f;

  // class assignment
  const bool healthy = rng.bernoulli(config.healthy_fraction);
  int grade = 0;
  if (!healthy) {
    grade = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(config.num_classes - 1)));
  }
  s.label = grade;

  Tensor img({1, h, w});
  std::copy(bg.begin(), bg.end(), img.data());

  if (grade > 0) {
    const auto [lo, hi] = config.lesions_per_grade[grade - 1];
    const int count = lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
    for (int l = 0; l < count; ++l) {
      const double r = rng.uniform(config.radius_min, config.radius_max);
      const double cy = rng.uniform(r, h - 1 - r);
      const double cx = rng.uniform(r, w - 1 - r);
      const int y0 = std::max(0, static_cast<int>(cy - r) - 1);
      const int y1 = std::min(h - 1, static_cast<int>(cy + r) + 1);
      const int x0 = std::max(0, static_cast<int>(cx - r) - 1);
      const int x1 = std::min(w - 1, static_cast<int>(cx + r) + 1);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r * r);
          if (d2 >= 1.0) continue;
          // quartic radial falloff; half-peak radius ~0.84 r keeps the mask
          // area above pi*r^2/2
          const double contribution = config.intensity_delta * (1.0 - d2 * d2);
          img.at(0, y, x) += static_cast<float>(contribution);
          if (contribution >= 0.5 * config.intensity_delta) s.mask.at(y, x) = 1.0f;
        }
      }
    }
  }
  s.image = std::move(img);
  return s;
}

SynthDataset generate_dataset(const SynthConfig& config) {
  config.validate();
  SynthDataset ds;
  ds.config = config;

  std::vector<Sample> all;
  all.reserve(config.num_samples);
  for (int i = 0; i < config.num_samples; ++i) all.push_back(generate_raw_sample(config, i));

  // split assignment by shuffled index, disjoint by construction
  std::vector<int> order(config.num_samples);
  for (int i = 0; i < config.num_samples; ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, 0xABCDEF));
  split_rng.shuffle(order);
  const int n_train = static_cast<int>(std::lround(config.split_train * config.num_samples));
  const int n_val = static_cast<int>(std::lround(config.split_val * config.num_samples));

  std::vector<int> split_of(config.num_samples, 2);
  for (int i = 0; i < config.num_samples; ++i) {
    if (i < n_train)
      split_of[order[i]] = 0;
    else if (i < n_train + n_val)
      split_of[order[i]] = 1;
  }

  // normalization statistics from the training split only
  double sum = 0.0, sum2 = 0.0;
  std::int64_t n = 0;
  for (int i = 0; i < config.num_samples; ++i) {
    if (split_of[i] != 0) continue;
    for (std::int64_t j = 0; j < all[i].image.size(); ++j) {
      sum += all[i].image[j];
      sum2 += static_cast<double>(all[i].image[j]) * all[i].image[j];
    }
    n += all[i].image.size();
  }
  ds.train_mean = sum / n;
  const double var = std::max(sum2 / n - ds.train_mean * ds.train_mean, 1e-12);
  ds.train_std = std::sqrt(var);

  for (int i = 0; i < config.num_samples; ++i) {
    Sample& s = all[i];
    for (std::int64_t j = 0; j < s.image.size(); ++j)
      s.image[j] = static_cast<float>((s.image[j] - ds.train_mean) / ds.train_std);
    if (split_of[i] == 0)
      ds.splits.train.push_back(std::move(s));
    else if (split_of[i] == 1)
      ds.splits.val.push_back(std::move(s));
    else
      ds.splits.test.push_back(std::move(s));
  }
  return ds;
}

Sample augment(const Sample& sample, Rng& rng) {
  Sample out = sample;
  const int h = sample.image.extent(1), w = sample.image.extent(2);
  const bool hflip = rng.bernoulli(0.5);
  const bool vflip = rng.bernoulli(0.5);
  if (!hflip && !vflip) return out;
  for (int y = 0; y < h; ++y) {
    const int sy = vflip ? h - 1 - y : y;
    for (int x = 0; x < w; ++x) {
      const int sx = hflip ? w - 1 - x : x;
      out.image.at(0, y, x) = sample.image.at(0, sy, sx);
      out.mask.at(y, x) = sample.mask.at(sy, sx);
    }
  }
  return out;
}

namespace {

void save_split(const std::string& dir, const std::vector<Sample>& samples,
                const std::string& split_name, std::ostringstream& manifest) {
  for (const Sample& s : samples) {
    char id_str[16];
    std::snprintf(id_str, sizeof(id_str), "%05d", s.id);
    const std::string img_file = std::string("images/") + id_str + ".sct";
    const std::string mask_file = std::string("masks/") + id_str + ".pgm";
    save_tensor(dir + "/" + img_file, s.image);
    write_pgm(dir + "/" + mask_file, s.mask, 255.0f);
    manifest << s.id << "," << split_name << "," << s.label << "," << mask_file << "\n";
  }
}

}  // namespace

void save_dataset(const std::string& dir, const SynthDataset& dataset) {
  fs::create_directories(dir + "/images");
  fs::create_directories(dir + "/masks");
  std::ostringstream manifest;
  manifest << "id,split,label,mask_file\n";
  save_split(dir, dataset.splits.train, "train", manifest);
  save_split(dir, dataset.splits.val, "val", manifest);
  save_split(dir, dataset.splits.test, "test", manifest);
  write_text_file(dir + "/manifest.csv", manifest.str());

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(dataset.config.to_json());
  meta["train_mean"] = dataset.train_mean;
  meta["train_std"] = dataset.train_std;
  write_text_file(dir + "/dataset.json", meta.dump(2));
}

SynthDataset load_dataset(const std::string& dir) {
  SynthDataset ds;
  nlohmann::json meta = nlohmann::json::parse(read_text_file(dir + "/dataset.json"));
  ds.config = SynthConfig::from_json(meta.at("config").dump());
  ds.train_mean = meta.at("train_mean");
  ds.train_std = meta.at("train_std");

  std::istringstream manifest(read_text_file(dir + "/manifest.csv"));
  std::string line;
  std::getline(manifest, line);  // header
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id_s, split, label_s, mask_file;
    std::getline(row, id_s, ',');
    std::getline(row, split, ',');
    std::getline(row, label_s, ',');
    std::getline(row, mask_file, ',');
    Sample s;
    s.id = std::stoi(id_s);
    s.label = std::stoi(label_s);
    char id_str[16];
    std::snprintf(id_str, sizeof(id_str), "%05d", s.id);
    s.image = load_tensor(dir + "/images/" + id_str + ".sct");
    Tensor raw_mask = read_pgm(dir + "/" + mask_file);
    s.mask = Tensor(raw_mask.shape());
    for (std::int64_t i = 0; i < raw_mask.size(); ++i)
      s.mask[i] = raw_mask[i] > 127.0f ? 1.0f : 0.0f;
    if (split == "train")
      ds.splits.train.push_back(std::move(s));
    else if (split == "val")
      ds.splits.val.push_back(std::move(s));
    else
      ds.splits.test.push_back(std::move(s));
  }
  return ds;
}

}  // namespace softcam
