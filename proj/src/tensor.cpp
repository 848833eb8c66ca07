#include "netcause/tensor.hpp"

#include <cmath>

namespace netcause {

Tensor::Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
  if (v.size() != static_cast<size_t>(r) * c) {
    throw ShapeMismatchError("Tensor: data length " + std::to_string(v.size()) +
                             " does not match shape " + std::to_string(r) + "x" + std::to_string(c));
  }
}

Tensor Tensor::scalar(double x) { return Tensor(1, 1, {x}); }

Tensor Tensor::column(std::vector<double> data) {
  int n = static_cast<int>(data.size());
  return Tensor(n, 1, std::move(data));
}

Tensor Tensor::row_vec(std::vector<double> data) {
  int n = static_cast<int>(data.size());
  return Tensor(1, n, std::move(data));
}

Tensor Tensor::filled(int r, int c, double x) {
  Tensor t(r, c);
  t.v.assign(t.v.size(), x);
  return t;
}

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ShapeMismatchError("scalar_value called on tensor of " + std::to_string(numel()) + " elements");
  }
  return v[0];
}

void check_finite(const Tensor& t, const std::string& context) {
  for (double x : t.v) {
    if (!std::isfinite(x)) {
      throw NonFiniteError("non-finite value in " + context);
    }
  }
}

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) {
    throw ShapeMismatchError("mat_mul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                             " * " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
  Tensor out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
    double* orow = &out.v[static_cast<size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace netcause
