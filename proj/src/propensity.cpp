#include "netcause/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "netcause/autodiff.hpp"
#include "netcause/rng.hpp"

namespace netcause {

using namespace ad;

SparseEncoder::SparseEncoder(int in_dim, int hidden, Rng& rng, const std::string& name)
    : net(in_dim, hidden, hidden, Act::Relu, Act::Sigmoid, rng, name) {}

namespace {

void check_activation_range(const Tensor& act) {
  for (double a : act.v) {
    if (a < 0.0 || a > 1.0) {
      throw ActivationOutOfRangeError("sparsity_penalty: activation outside [0,1]");
    }
  }
}

constexpr double kActEps = 1e-7;

}  // namespace

Var sparsity_penalty(const Var& activations, double rho) {
  check_activation_range(activations->value);
  int J = activations->value.cols;
  Var rho_hat = clampv(mean_cols(activations), kActEps, 1.0 - kActEps);
  Var s1 = sum_all(logv(rho_hat));
  Var s2 = sum_all(logv(add_scalar(neg(rho_hat), 1.0)));
  double const_term = J * (rho * std::log(rho) + (1.0 - rho) * std::log(1.0 - rho));
  return add_scalar(add(scale(s1, -rho), scale(s2, -(1.0 - rho))), const_term);
}

double sparsity_penalty_value(const Tensor& activations, double rho) {
  check_activation_range(activations);
  double total = 0.0;
  for (int j = 0; j < activations.cols; ++j) {
    double rho_hat = 0.0;
    for (int i = 0; i < activations.rows; ++i) rho_hat += activations.at(i, j);
    rho_hat /= activations.rows;
    rho_hat = std::clamp(rho_hat, kActEps, 1.0 - kActEps);
    total += rho * std::log(rho / rho_hat) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - rho_hat));
  }
  return total;
}

Var IndividualPSModel::forward_probability(const Var& xagg) const {
  Var enc = encode(xagg);
  return clampv(sigmoid(decoder.forward(enc, Act::None)), kActEps, 1.0 - kActEps);
}

std::vector<double> IndividualPSModel::predict(const Tensor& xagg) const {
  if (degenerate) return std::vector<double>(xagg.rows, base_rate);
  Var p = forward_probability(constant(xagg));
  return p->value.v;
}

std::vector<Var> IndividualPSModel::params() const {
  auto ps = encoder.params();
  ps.push_back(decoder.W);
  ps.push_back(decoder.b);
  return ps;
}

Tensor trapezoid_weights(int bins) {
  Tensor tw(bins + 1, 1);
  for (int k = 0; k <= bins; ++k) {
    double w = (k == 0 || k == bins) ? 0.5 : 1.0;
    tw.at(k, 0) = w / bins;
  }
  return tw;
}

Tensor density_interp_coefficients(const std::vector<double>& z, int bins) {
  Tensor coef(static_cast<int>(z.size()), bins + 1);
  for (size_t i = 0; i < z.size(); ++i) {
    double zi = z[i];
    if (zi < 0.0 || zi > 1.0) {
      throw OutOfRangeExposureError("exposure " + std::to_string(zi) + " outside [0,1]");
    }
    int k = std::min(static_cast<int>(zi * bins), bins - 1);
    double frac = zi * bins - k;
    coef.at(static_cast<int>(i), k) = 1.0 - frac;
    coef.at(static_cast<int>(i), k + 1) = frac;
  }
  return coef;
}

Var NeighborhoodPSModel::forward_heights(const Var& xagg) const {
  Var enc = encode(xagg);
  Var pos = softmax_rows(decoder.forward(enc, Act::None));
  Var area = matmul(pos, constant(trapezoid_weights(bins)));
  return rowwise_div(pos, area);
}

Tensor NeighborhoodPSModel::predict_heights(const Tensor& xagg) const {
  return forward_heights(constant(xagg))->value;
}

std::vector<double> NeighborhoodPSModel::density_at(const Tensor& xagg,
                                                    const std::vector<double>& z) const {
  Tensor heights = predict_heights(xagg);
  Tensor coef = density_interp_coefficients(z, bins);
  std::vector<double> out(z.size(), 0.0);
  for (size_t i = 0; i < z.size(); ++i)
    for (int k = 0; k <= bins; ++k)
      out[i] += heights.at(static_cast<int>(i), k) * coef.at(static_cast<int>(i), k);
  return out;
}

std::vector<Var> NeighborhoodPSModel::params() const {
  auto ps = encoder.params();
  ps.push_back(decoder.W);
  ps.push_back(decoder.b);
  return ps;
}

Var loss_LT(const IndividualPSModel& model, const Var& xagg, const std::vector<int>& t,
            const PropensityHyper& hyper) {
  int n = xagg->value.rows;
  if (static_cast<int>(t.size()) != n) throw ShapeMismatchError("loss_LT: label length disagrees");
  Var enc = model.encode(xagg);
  Var e = clampv(sigmoid(model.decoder.forward(enc, Act::None)), kActEps, 1.0 - kActEps);
  Tensor tv(n, 1), one_minus_tv(n, 1);
  for (int i = 0; i < n; ++i) {
    tv.at(i, 0) = static_cast<double>(t[i]);
    one_minus_tv.at(i, 0) = 1.0 - t[i];
  }
  Var ll = add(mul_const(logv(e), tv), mul_const(logv(add_scalar(neg(e), 1.0)), one_minus_tv));
  Var ce = neg(mean_all(ll));
  return add(ce, scale(sparsity_penalty(enc, hyper.rho), hyper.beta));
}

Var loss_LZ(const NeighborhoodPSModel& model, const Var& xagg, const std::vector<double>& z,
            const PropensityHyper& hyper) {
  int n = xagg->value.rows;
  if (static_cast<int>(z.size()) != n) throw ShapeMismatchError("loss_LZ: exposure length disagrees");
  Var enc = model.encode(xagg);
  Var pos = softmax_rows(model.decoder.forward(enc, Act::None));
  Var area = matmul(pos, constant(trapezoid_weights(model.bins)));
  Var heights = rowwise_div(pos, area);
  Var phi = sum_rows(mul_const(heights, density_interp_coefficients(z, model.bins)));
  // the paper writes L_Z with a plus sign in front of the log-likelihood;
  // minimized as a negative log-likelihood
  Var nll = neg(mean_all(logv(phi)));
  return add(nll, scale(sparsity_penalty(enc, hyper.rho), hyper.beta));
}

IndividualPSModel make_individual_ps(int in_dim, const PropensityHyper& hyper) {
  Rng rng(derive_seed(hyper.seed, 21));
  IndividualPSModel m;
  m.encoder = SparseEncoder(in_dim, hyper.hidden, rng, "e.enc");
  m.decoder = Dense(hyper.hidden, 1, rng, "e.dec");
  return m;
}

NeighborhoodPSModel make_neighborhood_ps(int in_dim, const PropensityHyper& hyper) {
  Rng rng(derive_seed(hyper.seed, 22));
  NeighborhoodPSModel m;
  m.encoder = SparseEncoder(in_dim, hyper.hidden, rng, "nps.enc");
  m.decoder = Dense(hyper.hidden, hyper.density_bins + 1, rng, "nps.dec");
  m.bins = hyper.density_bins;
  return m;
}

IndividualPSModel train_individual_ps(const Tensor& xagg, const std::vector<int>& t,
                                      const PropensityHyper& hyper, PropensityTrainLog* log) {
  for (int l : t) {
    if (l != 0 && l != 1) throw Error("train_individual_ps: labels must be binary");
  }
  IndividualPSModel model = make_individual_ps(xagg.cols, hyper);
  bool all_same = std::adjacent_find(t.begin(), t.end(), std::not_equal_to<>()) == t.end();
  if (all_same) {
    double rate = t.empty() ? 0.5 : static_cast<double>(t.front());
    model.degenerate = true;
    model.base_rate = std::clamp(rate, hyper.e_clamp, 1.0 - hyper.e_clamp);
    std::cerr << "[netcause] warning: degenerate treatment labels; individual propensity "
                 "model predicts the clamped base rate "
              << model.base_rate << "\n";
    return model;
  }
  Adam opt(model.params(), AdamConfig{hyper.lr});
  Var x = constant(xagg);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Var loss = loss_LT(model, x, t, hyper);
    if (log) log->loss.push_back(loss->value.scalar_value());
    backward(loss);
    opt.step();
  }
  return model;
}

NeighborhoodPSModel train_neighborhood_ps(const Tensor& xagg, const std::vector<double>& z,
                                          const PropensityHyper& hyper, PropensityTrainLog* log) {
  NeighborhoodPSModel model = make_neighborhood_ps(xagg.cols, hyper);
  Adam opt(model.params(), AdamConfig{hyper.lr});
  Var x = constant(xagg);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Var loss = loss_LZ(model, x, z, hyper);
    if (log) log->loss.push_back(loss->value.scalar_value());
    backward(loss);
    opt.step();
  }
  return model;
}

std::vector<double> normalize_weights(const std::vector<double>& raw) {
  double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (total <= 0.0) throw Error("normalize_weights: non-positive total");
  std::vector<double> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / total;
  return out;
}

BalancingWeights balancing_weights(const IndividualPSModel& e_model,
                                   const NeighborhoodPSModel& z_model, const Tensor& xagg,
                                   const std::vector<int>& t, const std::vector<double>& z,
                                   const PropensityHyper& hyper) {
  const int n = xagg.rows;
  if (static_cast<int>(t.size()) != n || static_cast<int>(z.size()) != n) {
    throw ShapeMismatchError("balancing_weights: input lengths disagree");
  }
  std::vector<double> e = e_model.predict(xagg);
  std::vector<double> phi = z_model.density_at(xagg, z);
  BalancingWeights w;
  w.raw.resize(n);
  for (int i = 0; i < n; ++i) {
    double ei = std::clamp(e[i], hyper.e_clamp, 1.0 - hyper.e_clamp);
    double p_obs = t[i] == 1 ? ei : 1.0 - ei;
    double ph = std::max(phi[i], hyper.phi_floor);
    w.raw[i] = 1.0 / (ph * p_obs);
  }
  w.normalized = normalize_weights(w.raw);
  auto [lo, hi] = std::minmax_element(w.raw.begin(), w.raw.end());
  w.min_raw = *lo;
  w.max_raw = *hi;
  double total = std::accumulate(w.normalized.begin(), w.normalized.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw Error("balancing_weights: normalization drifted");
  return w;
}

}  // namespace netcause
