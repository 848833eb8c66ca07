#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netcause/balance.hpp"
#include "netcause/graph.hpp"
#include "netcause/nn.hpp"
#include "netcause/propensity.hpp"
#include "netcause/synth.hpp"

namespace netcause {

enum class Variant { None, Reweight, Repre, Both };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct EstimatorConfig {
  double lambda = 0.5;  // Wasserstein strength
  int gcn_dim = 10;
  int hidden = 32;
  double lr = 1e-3;
  int epochs = 300;
  int k1 = 1;  // propensity steps per outer iteration
  int k2 = 1;  // outcome steps per outer iteration
  Variant variant = Variant::Both;
  std::uint64_t seed = 1;
  double sinkhorn_eps = 0.05;
  int sinkhorn_iters = 200;
  int ipm_sample_cap = 384;  // rows entering the transport term per epoch
  PropensityHyper propensity;

  bool uses_weights() const { return variant == Variant::Reweight || variant == Variant::Both; }
  bool uses_ipm() const { return variant == Variant::Repre || variant == Variant::Both; }
  // `none` and `reweight` force lambda = 0; `none` and `repre` force uniform
  // weights (encoded by uses_weights()).
  EstimatorConfig normalized() const;
};

// Constant GCN aggregation operator: (S M)_i = sum_{j in N_i} c_ij M_j with
// c_ij = 1/sqrt(d_i d_j). Symmetric, so it is its own backward operator.
struct GcnAggregator {
  int n = 0;
  std::vector<int> offsets;
  std::vector<int> neighbor;
  std::vector<double> coef;
  static GcnAggregator build(const Graph& g);
};

ad::Var gcn_apply(const GcnAggregator& s, const ad::Var& xw);

// X_agg row i = [x_i | sigmoid(sum_j c_ij W^T x_j)].
ad::Var aggregate_features(const ad::Var& x, const GcnAggregator& s, const ad::Var& gcn_w);
Tensor aggregate_features_value(const Tensor& x, const GcnAggregator& s, const Tensor& gcn_w);

struct EstimatorModel {
  ad::Var gcn_w;
  ad::Mlp3 rep;   // representation map Phi
  ad::Mlp3 pred;  // predictor h over (r, t, z)
  IndividualPSModel e_model;
  NeighborhoodPSModel z_model;
  EstimatorConfig cfg;
  int feature_dim = 0;

  std::vector<ad::Var> outcome_params() const;
  std::vector<ad::Var> all_params() const;
};

EstimatorModel make_estimator(int feature_dim, const EstimatorConfig& cfg);

void save_estimator(const EstimatorModel& model, const std::string& path);
EstimatorModel load_estimator(const std::string& path);

// Per-epoch transport-term fixture: seeded subsample, seeded permutation of
// the observed treatment pairs, and representation column scales treated as
// constants. Freezing these outside the loss keeps it a clean function of
// the parameters.
struct IpmContext {
  std::vector<int> sample;
  std::vector<int> perm;
  std::vector<double> col_scale;
  double eps = 0.05;
  int iters = 200;
};

IpmContext make_ipm_context(int n, int cap, std::uint64_t seed, const Tensor& rep_values,
                            double eps, int iters);

struct LossLYParts {
  ad::Var total;
  ad::Var factual;
  ad::Var wasserstein;  // null when lambda == 0
  double sinkhorn_marginal_err = 0.0;
};

// L_Y = sum_i w_i (y_i - h(r_i, t_i, z_i))^2 + lambda * W(permuted, weighted
// factual). Weights are constants here; gradients reach gcn/rep/pred only.
LossLYParts loss_LY(const EstimatorModel& model, const ad::Var& x, const GcnAggregator& s,
                    const std::vector<int>& t, const std::vector<double>& z,
                    const std::vector<double>& y, const std::vector<double>& weights,
                    double lambda, const IpmContext* ipm);

struct SplitData {
  Tensor X;
  Graph graph;
  std::vector<int> t;
  std::vector<double> z;
  std::vector<double> y;
  std::vector<int> units;  // original unit ids
};

SplitData extract_split(const NetworkDataset& ds, const Subgraph& sub);

struct EpochLog {
  int epoch = 0;
  double lt = 0.0;
  double lz = 0.0;
  double factual = 0.0;
  double wasserstein = 0.0;
  double ly = 0.0;
};

struct TrainResult {
  EstimatorModel model;
  std::vector<EpochLog> log;
  std::vector<double> final_weights;  // normalized over the training split
  double max_raw_weight = 0.0;
  int sinkhorn_warnings = 0;
};

TrainResult train_estimator(const SplitData& train, const EstimatorConfig& cfg);

struct TreatmentPair {
  double t = 0.0;
  double z = 0.0;
};

// h(Phi(x), t, z) for every unit of a split, using the split's own
// aggregation (inductive application).
std::vector<double> predict_outcomes(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                     const std::vector<double>& t, const std::vector<double>& z);
std::vector<double> predict_outcomes(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                     TreatmentPair at);
std::vector<double> predict_ite(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                TreatmentPair a, TreatmentPair b);

// RMSE of flipped-pair counterfactuals: y_cf = oracle(1 - t, 1 - z).
double counterfactual_rmse(const EstimatorModel& model, const SplitData& split,
                           const OutcomeOracle* oracle);

// Weighted factual loss on a held-out split; used for lambda selection.
double validation_factual_loss(const EstimatorModel& model, const SplitData& split);

struct EffectReport {
  double pehe_main = 0.0;
  double pehe_spillover = 0.0;
  double pehe_total = 0.0;
  double mean_est_main = 0.0;
  double mean_est_spillover = 0.0;
  double mean_est_total = 0.0;
  double true_main = 0.0;
  double true_spillover = 0.0;
  double true_total = 0.0;
  double rmse_cf = 0.0;
};

// Effects evaluated at the fixed pairs main ((1,0),(0,0)),
// spillover ((0,1),(0,0)), total ((1,1),(0,0)).
EffectReport evaluate_effects(const EstimatorModel& model, const SplitData& split,
                              const OutcomeOracle* oracle);

}  // namespace netcause
