#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "netcause/tensor.hpp"

namespace netcause::ad {

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of a reverse-mode differentiation graph. Expression nodes are
// created per forward pass and dropped afterwards; parameter leaves persist
// across steps and accumulate gradients from every use.
struct Node {
  Tensor value;
  Tensor grad;  // empty until the first accumulation touches it
  std::vector<Var> parents;
  std::function<void()> backward_fn;
  bool is_param = false;
  std::string name;

  Tensor& grad_ref();
  bool has_grad() const { return !grad.v.empty(); }
  void zero_grad() {
    if (has_grad()) grad.v.assign(grad.v.size(), 0.0);
  }
};

Var constant(Tensor value);
Var param(Tensor value, std::string name);

// Reverse pass from a scalar root. Seeds d(root)/d(root) = 1 and accumulates
// gradients into every reachable node; leaves not reachable keep zero grads.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& r);  // broadcast a 1 x m row over n rows
Var sub(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul(const Var& a, const Var& b);  // elementwise
Var mul_const(const Var& a, const Tensor& c);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var concat_cols(const Var& a, const Var& b);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var logv(const Var& a);
Var expv(const Var& a);
Var square(const Var& a);
Var clampv(const Var& a, double lo, double hi);
Var softmax_rows(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_rows(const Var& a);   // n x m -> n x 1
Var mean_cols(const Var& a);  // n x m -> 1 x m
Var rowwise_div(const Var& a, const Var& d);  // divide row i by d_i
Var weighted_sum(const Var& values, const Var& weights);  // sum_i w_i v_i -> scalar

// Squared Euclidean distances between rows of a (n x d) and b (m x d).
Var pairwise_sqdist(const Var& a, const Var& b);

// Log-domain Sinkhorn building blocks; masses enter as log-mass vectors so
// gradients flow into differentiable weights. f/g are dual potentials.
Var sinkhorn_f_step(const Var& cost, const Var& g, const Var& log_b, double eps);
Var sinkhorn_g_step(const Var& cost, const Var& f, const Var& log_a, double eps);
Var sinkhorn_sharp_cost(const Var& cost, const Var& f, const Var& g,
                        const Var& log_a, const Var& log_b, double eps);

}  // namespace netcause::ad
