#pragma once

#include <cstdint>
#include <vector>

#include "netcause/nn.hpp"
#include "netcause/tensor.hpp"

namespace netcause {

struct PropensityHyper {
  int hidden = 32;
  double rho = 0.05;    // sparsity target
  double beta = 0.001;  // sparsity strength
  int density_bins = 10;
  double lr = 1e-3;
  int epochs = 300;
  std::uint64_t seed = 1;
  double e_clamp = 1e-3;   // individual score clamped into [c, 1-c]
  double phi_floor = 1e-6; // density floored before inversion
};

// Three fully-connected layers; the final layer is sigmoid so the penalized
// activations stay in (0,1) and KL(rho || rho_hat) is defined.
struct SparseEncoder {
  ad::Mlp3 net;
  SparseEncoder() = default;
  SparseEncoder(int in_dim, int hidden, Rng& rng, const std::string& name);
  ad::Var forward(const ad::Var& x) const { return net.forward(x); }
  std::vector<ad::Var> params() const { return net.params(); }
};

// KL(rho || rho_hat_j) summed over hidden units; rho_hat_j is the mean
// activation of unit j over the batch. Activations outside [0,1] are an
// error; values are clamped into [1e-7, 1-1e-7] before the logs.
ad::Var sparsity_penalty(const ad::Var& activations, double rho);
double sparsity_penalty_value(const Tensor& activations, double rho);

struct IndividualPSModel {
  SparseEncoder encoder;
  ad::Dense decoder;  // logistic regression head
  bool degenerate = false;
  double base_rate = 0.5;

  ad::Var encode(const ad::Var& xagg) const { return encoder.forward(xagg); }
  ad::Var forward_probability(const ad::Var& xagg) const;
  std::vector<double> predict(const Tensor& xagg) const;  // P(t=1 | x)
  std::vector<ad::Var> params() const;
};

// Piecewise-linear conditional density over z in [0,1] with B segments.
// The decoder emits B+1 knot heights, normalized analytically so that the
// trapezoid integral equals one for every input.
struct NeighborhoodPSModel {
  SparseEncoder encoder;
  ad::Dense decoder;
  int bins = 10;

  ad::Var encode(const ad::Var& xagg) const { return encoder.forward(xagg); }
  ad::Var forward_heights(const ad::Var& xagg) const;  // n x (B+1)
  Tensor predict_heights(const Tensor& xagg) const;
  std::vector<double> density_at(const Tensor& xagg, const std::vector<double>& z) const;
  std::vector<ad::Var> params() const;
};

// Interpolation coefficients: row i has weight (1-frac) on knot k and frac
// on knot k+1 where z_i falls in segment k.
Tensor density_interp_coefficients(const std::vector<double>& z, int bins);

// Trapezoid weights (1/B) * [1/2, 1, ..., 1, 1/2] as a (B+1) x 1 column.
Tensor trapezoid_weights(int bins);

ad::Var loss_LT(const IndividualPSModel& model, const ad::Var& xagg,
                const std::vector<int>& t, const PropensityHyper& hyper);
ad::Var loss_LZ(const NeighborhoodPSModel& model, const ad::Var& xagg,
                const std::vector<double>& z, const PropensityHyper& hyper);

struct PropensityTrainLog {
  std::vector<double> loss;
};

IndividualPSModel make_individual_ps(int in_dim, const PropensityHyper& hyper);
NeighborhoodPSModel make_neighborhood_ps(int in_dim, const PropensityHyper& hyper);

IndividualPSModel train_individual_ps(const Tensor& xagg, const std::vector<int>& t,
                                      const PropensityHyper& hyper,
                                      PropensityTrainLog* log = nullptr);
NeighborhoodPSModel train_neighborhood_ps(const Tensor& xagg, const std::vector<double>& z,
                                          const PropensityHyper& hyper,
                                          PropensityTrainLog* log = nullptr);

struct BalancingWeights {
  std::vector<double> raw;         // 1 / (phi * P(observed arm))
  std::vector<double> normalized;  // softmax over units (sums to 1)
  double max_raw = 0.0;
  double min_raw = 0.0;
};

BalancingWeights balancing_weights(const IndividualPSModel& e_model,
                                   const NeighborhoodPSModel& z_model, const Tensor& xagg,
                                   const std::vector<int>& t, const std::vector<double>& z,
                                   const PropensityHyper& hyper);

// Normalization used everywhere weights enter a loss: softmax over units with
// log raw weight as logit, i.e. raw / sum(raw).
std::vector<double> normalize_weights(const std::vector<double>& raw);

}  // namespace netcause
