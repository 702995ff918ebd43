#include "hwgen/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "hwgen/error.hpp"

namespace hwgen {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from(std::initializer_list<Real> values) {
  return Tensor(Shape{static_cast<int>(values.size())}, std::vector<Real>(values));
}

int Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) throw ShapeError("axis out of range for " + shape_str(shape_));
  return shape_[static_cast<std::size_t>(axis)];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out;
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::fill(Real v) {
  for (auto& x : data_) x = v;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("+= shape mismatch " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(Real s) {
  for (auto& x : data_) x *= s;
  return *this;
}

bool Tensor::all_finite() const {
  for (Real x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Real Tensor::sum() const {
  double s = 0;
  for (Real x : data_) s += x;
  return static_cast<Real>(s);
}

Real Tensor::mean_abs() const {
  if (data_.empty()) return 0;
  double s = 0;
  for (Real x : data_) s += std::abs(x);
  return static_cast<Real>(s / static_cast<double>(data_.size()));
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

std::uint64_t tensor_hash(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (int d : t.shape()) mix(&d, sizeof d);
  mix(t.data(), t.size() * sizeof(Real));
  return h;
}

}  // namespace hwgen
