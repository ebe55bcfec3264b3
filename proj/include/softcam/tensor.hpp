#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace softcam {

/// Dense n-dimensional float32 array, row-major. Immutable shape after
/// construction; element data is mutable through data().
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int extent(int axis) const { return shape_.at(axis); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](std::int64_t i) { return data_[i]; }
  float operator[](std::int64_t i) const { return data_[i]; }

  // rank-specific indexed access
  float& at(int i) { return data_[i]; }
  float& at(int i, int j) { return data_[static_cast<std::int64_t>(i) * shape_[1] + j]; }
  float at(int i, int j) const { return data_[static_cast<std::int64_t>(i) * shape_[1] + j]; }
  float& at(int c, int y, int x) {
    return data_[(static_cast<std::int64_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::int64_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  float min() const;
  float max() const;
  float sum() const;

  std::string shape_str() const;

private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::int64_t shape_product(const std::vector<int>& shape);

}  // namespace softcam
