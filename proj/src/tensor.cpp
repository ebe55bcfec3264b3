#include "softcam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace softcam {

std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int e : shape_) {
    if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent " + std::to_string(e));
  }
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (int e : shape_) {
    if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent " + std::to_string(e));
  }
  if (static_cast<std::int64_t>(data_.size()) != shape_product(shape_)) {
    throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

float Tensor::min() const {
  return *std::min_element(data_.begin(), data_.end());
}

float Tensor::max() const {
  return *std::max_element(data_.begin(), data_.end());
}

float Tensor::sum() const {
  double s = 0.0;
  for (float v : data_) s += v;
  return static_cast<float>(s);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

}  // namespace softcam
