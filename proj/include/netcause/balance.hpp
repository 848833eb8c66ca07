#pragma once

#include <cstdint>
#include <vector>

#include "netcause/autodiff.hpp"
#include "netcause/tensor.hpp"

namespace netcause {

// Weighted sample from the joint (r, t, z) space.
struct JointSample {
  Tensor r;                   // n x h representation rows
  std::vector<double> t;
  std::vector<double> z;
  std::vector<double> mass;   // nonnegative, sums to 1
};

void validate_joint(const JointSample& s);

// Simulates p(r) p(t,z): keeps r rows, permutes the (t, z) pairs together by
// a seeded permutation, and resets mass to uniform.
JointSample product_sample(const JointSample& joint, std::uint64_t seed);

// Points [r | alpha*t | alpha*z] used as ground space for transport costs.
Tensor joint_points(const JointSample& s, double alpha = 1.0);

struct SinkhornOptions {
  double eps = 0.05;
  int max_iters = 200;
  double tol = 0.0;          // > 0 enables early stop on marginal violation
  bool eps_scaling = false;  // anneal eps from max-cost scale down to target
  bool round_plan = false;   // project the plan to exact marginals at the end
};

struct SinkhornResult {
  double cost = 0.0;      // <P, C>, transport cost of the entropic plan
  double marginal_err = 0.0;
  int iters_run = 0;
  bool converged = false;
  Tensor plan;            // n x m
  std::vector<double> f, g;  // dual potentials
};

// Log-domain Sinkhorn on an explicit cost matrix.
SinkhornResult sinkhorn_cost_matrix(const Tensor& cost, const std::vector<double>& a,
                                    const std::vector<double>& b, SinkhornOptions opts);

// Entropic Wasserstein between joint samples with squared Euclidean ground
// cost on [r | t | z]. Reports a warning-level flag via converged=false when
// the marginal violation stays above 1e-4.
SinkhornResult sinkhorn_wasserstein(const JointSample& a, const JointSample& b,
                                    double eps, int iters);

// Differentiable Sinkhorn: the fixed-iteration recursion is unrolled through
// the tape, so gradients are exact for the computed value. log_mass_a may be
// a parameter-dependent node; side b is a constant distribution.
ad::Var sinkhorn_node(const ad::Var& points_a, const ad::Var& points_b,
                      const ad::Var& log_mass_a, const std::vector<double>& mass_b,
                      double eps, int iters, double* marginal_err = nullptr);

// Exact optimal transport cost by successive-shortest-path min-cost flow.
// Throws TooLargeError when n * m > 4096.
double exact_transport_cost(const Tensor& cost, const std::vector<double>& a,
                            const std::vector<double>& b);
double exact_transport_oracle(const JointSample& a, const JointSample& b);

// Weighted biased HSIC with RBF kernels, bandwidth = median pairwise distance
// per argument. All-identical points define HSIC = 0.
double hsic(const Tensor& xf, const Tensor& yf, const std::vector<double>& mass);

}  // namespace netcause
