#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace hwgen {

#ifdef HWGEN_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<int>;

// Cache-line aligned storage. Vectorized kernels peel by address, so fixing
// the base alignment keeps results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using RealBuffer = std::vector<Real, AlignedAllocator<Real>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor scalar(Real v) { return Tensor(Shape{1}, std::vector<Real>{v}); }
  static Tensor from(std::initializer_list<Real> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  Real at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  Real& at(int c, int i, int j) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }
  Real at(int c, int i, int j) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }

  // Same data, new shape; the element count must match.
  Tensor reshaped(Shape shape) const;

  void fill(Real v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(Real s);

  bool all_finite() const;
  Real sum() const;
  Real mean_abs() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  RealBuffer data_;
};

// Throws NumericError naming `what` if any element is NaN/Inf.
void require_finite(const Tensor& t, const std::string& what);

// 64-bit FNV-1a over the raw bytes of shape and values.
std::uint64_t tensor_hash(const Tensor& t);

}  // namespace hwgen
