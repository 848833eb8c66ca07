#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "netcause/errors.hpp"

namespace netcause {

// Dense row-major matrix of doubles. Column vectors are n x 1, scalars 1 x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> data);

  static Tensor scalar(double x);
  static Tensor column(std::vector<double> data);
  static Tensor row_vec(std::vector<double> data);
  static Tensor filled(int r, int c, double x);

  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  size_t numel() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::vector<int> shape() const { return {rows, cols}; }
  double scalar_value() const;
};

// Throws NonFiniteError if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& context);

Tensor mat_mul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace netcause
