#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netcause/graph.hpp"
#include "netcause/tensor.hpp"

namespace netcause {

// Simulation strengths. beta2/4/6 scale with the interference degree k.
// The source distributions N(-2, 3) and N(1, 2) are read with the second
// parameter as a variance; recorded in dataset metadata.
struct GenConfig {
  double k = 1.0;
  double beta1 = 0.5;
  double beta3 = 1.0;
  double beta5 = 0.5;
  int feature_dim = 10;
  double noise_scale = 1.0;  // 0 freezes outcome noise at zero
  std::uint64_t seed = 1;

  double beta2() const { return k * beta1; }
  double beta4() const { return k * beta3; }
  double beta6() const { return k * beta5; }
};

// Potential-outcome table for one generated dataset. Counterfactuals reuse
// the unit's frozen factual noise so true effects are deterministic.
struct OutcomeOracle {
  double beta3 = 0.0;
  double beta4 = 0.0;
  std::vector<double> base;  // beta5 * w3.x_i + beta6 * mean_j w4.x_j
  std::vector<double> eps;   // frozen noise

  double operator()(int unit, double t, double z) const {
    return beta3 * t + beta4 * z + base[unit] + eps[unit];
  }
  double true_main() const { return beta3; }
  double true_spillover(double z, double z_prime) const { return beta4 * (z - z_prime); }
  double true_total(double z, double z_prime) const { return beta3 + beta4 * (z - z_prime); }
};

struct NetworkDataset {
  Graph graph;
  Tensor X;  // n x d features
  std::vector<int> t;
  std::vector<double> z;
  std::vector<double> y;
  std::vector<double> ps;  // simulated propensity scores (diagnostics)
  std::optional<OutcomeOracle> oracle;
  GenConfig cfg;
};

// i.i.d. standard normal features, deterministic per seed.
Tensor sample_features(int n, int d, std::uint64_t seed);

// Plain CSV of numbers, one row per unit. Throws BadDimensionsError when a
// row length disagrees with the first row or with expected_dim (if >= 0).
Tensor load_features_csv(const std::string& path, int expected_dim = -1);

struct TreatmentDraw {
  std::vector<int> t;
  std::vector<double> z;
  std::vector<double> ps;
};

// ps_i = sigmoid(beta1 * w1.x_i + beta2 * mean_j w2.x_j); t_i = 1 iff
// ps_i > mean(ps); z_i = fraction of treated neighbors. Requires degree >= 1.
TreatmentDraw simulate_treatments(const Tensor& X, const Graph& g, const GenConfig& cfg);

// y_i = beta3 t_i + beta4 z_i + beta5 w3.x_i + beta6 mean_j w4.x_j + eps_i.
std::pair<std::vector<double>, OutcomeOracle> simulate_outcomes(
    const Tensor& X, const Graph& g, const std::vector<int>& t, const std::vector<double>& z,
    const GenConfig& cfg);

NetworkDataset generate_dataset(const Graph& g, const GenConfig& cfg);
NetworkDataset generate_dataset(const Graph& g, const Tensor& X, const GenConfig& cfg);

// Watts-Strogatz style small world: ring lattice with mean_degree nearest
// neighbours, each edge rewired with probability rewire_prob; any unit left
// isolated is reconnected (exposure needs degree >= 1).
Graph small_world_graph(int n, int mean_degree, double rewire_prob, std::uint64_t seed);

// On-disk layout: features.csv, edges.txt, assign.csv (t,z,y), meta.json.
void save_dataset(const NetworkDataset& ds, const std::string& dir);
NetworkDataset load_dataset(const std::string& dir);

// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double x);

}  // namespace netcause
