#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrkd {

// Dense row-major array of 64-bit floats. Rank 1 or 2 in practice.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> values;

  Tensor() = default;

  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    values.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }

  Tensor(std::vector<int64_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (static_cast<int64_t>(values.size()) != numel_of(shape)) {
      throw std::invalid_argument("Tensor: values length " +
                                  std::to_string(values.size()) +
                                  " does not match shape product " +
                                  std::to_string(numel_of(shape)));
    }
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
  int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int64_t r, int64_t c) { return values[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return values[static_cast<size_t>(r * cols() + c)]; }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }

  void zero() { std::fill(values.begin(), values.end(), 0.0); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Thrown on any contract violation (shape mismatch, bad index, invalid arg).
struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace ctrkd
