#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lila::num {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

/// Dense row-major array. The last axis varies fastest.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (shape_size(shape_) != data_.size())
      throw std::invalid_argument("Tensor: shape " + shape_str(shape_) + " does not match " +
                                  std::to_string(data_.size()) + " values");
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i < 0 ? shape_.size() + i : i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    if (data_.size() != 1) throw std::invalid_argument("Tensor::item on shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape s) const {
    if (shape_size(s) != data_.size())
      throw std::invalid_argument("reshape: " + shape_str(shape_) + " -> " + shape_str(s));
    return Tensor(std::move(s), data_);
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void check_shape() const {
    for (int d : shape_)
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Stacks equally shaped tensors along a new leading axis.
template <class T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no tensors");
  Shape s = parts.front().shape();
  std::vector<T> out;
  out.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    if (p.shape() != s)
      throw std::invalid_argument("stack: shape " + shape_str(p.shape()) + " vs " + shape_str(s));
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  s.insert(s.begin(), static_cast<int>(parts.size()));
  return Tensor<T>(std::move(s), std::move(out));
}

}  // namespace lila::num
