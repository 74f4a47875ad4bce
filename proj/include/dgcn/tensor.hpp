#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dgcn/errors.hpp"

namespace dgcn {

enum class Mode { train, eval };

// Dense row-major array of doubles with an optional gradient buffer.
// The last dimension is the channel axis; all leading dimensions together
// form the row axis, so a [N,k,D] tensor is processed as N*k rows of D.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::vector<std::size_t> s, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t ndim() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  std::size_t channels() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return channels() == 0 ? 0 : numel() / channels(); }

  double& at(std::size_t r, std::size_t c) { return data[r * channels() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * channels() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;

  void ensure_grad();            // allocate zero-filled grad if absent
  void zero_grad();              // allocate and clear
  void accumulate_grad(const std::vector<double>& g);
};

}  // namespace dgcn
