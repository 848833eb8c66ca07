#include "netcause/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "netcause/metrics.hpp"
#include "netcause/rng.hpp"

namespace netcause {

using namespace ad;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::None: return "none";
    case Variant::Reweight: return "reweight";
    case Variant::Repre: return "repre";
    case Variant::Both: return "both";
  }
  return "none";
}

Variant parse_variant(const std::string& name) {
  if (name == "none") return Variant::None;
  if (name == "reweight") return Variant::Reweight;
  if (name == "repre") return Variant::Repre;
  if (name == "both") return Variant::Both;
  throw Error("unknown variant: " + name);
}

EstimatorConfig EstimatorConfig::normalized() const {
  EstimatorConfig c = *this;
  if (!c.uses_ipm()) c.lambda = 0.0;
  if (c.lambda < 0.0) throw Error("EstimatorConfig: lambda must be >= 0");
  c.propensity.hidden = c.hidden;
  c.propensity.lr = c.lr;
  c.propensity.seed = c.seed;
  return c;
}

GcnAggregator GcnAggregator::build(const Graph& g) {
  for (int u = 0; u < g.n_units; ++u) {
    if (g.degree[u] == 0) {
      throw IsolatedUnitError("GcnAggregator: unit " + std::to_string(u) + " has no neighbors");
    }
  }
  GcnAggregator s;
  s.n = g.n_units;
  s.offsets.resize(g.n_units + 1, 0);
  for (int u = 0; u < g.n_units; ++u) s.offsets[u + 1] = s.offsets[u] + g.degree[u];
  s.neighbor.resize(s.offsets.back());
  s.coef.resize(s.offsets.back());
  std::vector<int> fill(g.n_units, 0);
  for (int u = 0; u < g.n_units; ++u) {
    for (int v : g.adj[u]) {
      int pos = s.offsets[u] + fill[u]++;
      s.neighbor[pos] = v;
      s.coef[pos] = 1.0 / std::sqrt(static_cast<double>(g.degree[u]) * g.degree[v]);
    }
  }
  return s;
}

namespace {

Tensor gcn_apply_value(const GcnAggregator& s, const Tensor& m) {
  Tensor out(s.n, m.cols);
  for (int u = 0; u < s.n; ++u) {
    for (int p = s.offsets[u]; p < s.offsets[u + 1]; ++p) {
      int v = s.neighbor[p];
      double c = s.coef[p];
      for (int j = 0; j < m.cols; ++j) out.at(u, j) += c * m.at(v, j);
    }
  }
  return out;
}

}  // namespace

Var gcn_apply(const GcnAggregator& s, const Var& xw) {
  if (xw->value.rows != s.n) throw ShapeMismatchError("gcn_apply: row count disagrees with graph");
  Tensor out = gcn_apply_value(s, xw->value);
  check_finite(out, "gcn_apply");
  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->parents = {xw};
  Node* src = xw.get();
  Node* self = node.get();
  const GcnAggregator* sp = &s;
  node->backward_fn = [src, self, sp] {
    Tensor& dx = src->grad_ref();
    Tensor back = gcn_apply_value(*sp, self->grad);  // S is symmetric
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += back.v[i];
  };
  return node;
}

Var aggregate_features(const Var& x, const GcnAggregator& s, const Var& gcn_w) {
  Var neigh = sigmoid(gcn_apply(s, matmul(x, gcn_w)));
  return concat_cols(x, neigh);
}

Tensor aggregate_features_value(const Tensor& x, const GcnAggregator& s, const Tensor& gcn_w) {
  return aggregate_features(constant(x), s, constant(gcn_w))->value;
}

std::vector<Var> EstimatorModel::outcome_params() const {
  std::vector<Var> ps{gcn_w};
  for (auto& p : rep.params()) ps.push_back(p);
  for (auto& p : pred.params()) ps.push_back(p);
  return ps;
}

std::vector<Var> EstimatorModel::all_params() const {
  std::vector<Var> ps = outcome_params();
  for (auto& p : e_model.params()) ps.push_back(p);
  for (auto& p : z_model.params()) ps.push_back(p);
  return ps;
}

EstimatorModel make_estimator(int feature_dim, const EstimatorConfig& cfg_in) {
  EstimatorConfig cfg = cfg_in.normalized();
  EstimatorModel m;
  m.cfg = cfg;
  m.feature_dim = feature_dim;
  Rng rng(derive_seed(cfg.seed, 31));
  m.gcn_w = param(glorot_uniform(feature_dim, cfg.gcn_dim, rng), "gcn.W");
  int agg_dim = feature_dim + cfg.gcn_dim;
  m.rep = Mlp3(agg_dim, cfg.hidden, cfg.hidden, Act::Relu, Act::Relu, rng, "rep");
  m.pred = Mlp3(cfg.hidden + 2, cfg.hidden, 1, Act::Relu, Act::None, rng, "pred");
  m.e_model = make_individual_ps(agg_dim, cfg.propensity);
  m.z_model = make_neighborhood_ps(agg_dim, cfg.propensity);
  return m;
}

void save_estimator(const EstimatorModel& model, const std::string& path) {
  nlohmann::ordered_json extra;
  extra["feature_dim"] = model.feature_dim;
  extra["config"] = {{"lambda", model.cfg.lambda},
                     {"gcn_dim", model.cfg.gcn_dim},
                     {"hidden", model.cfg.hidden},
                     {"lr", model.cfg.lr},
                     {"epochs", model.cfg.epochs},
                     {"k1", model.cfg.k1},
                     {"k2", model.cfg.k2},
                     {"variant", variant_name(model.cfg.variant)},
                     {"seed", model.cfg.seed},
                     {"sinkhorn_eps", model.cfg.sinkhorn_eps},
                     {"sinkhorn_iters", model.cfg.sinkhorn_iters},
                     {"ipm_sample_cap", model.cfg.ipm_sample_cap},
                     {"density_bins", model.cfg.propensity.density_bins},
                     {"e_degenerate", model.e_model.degenerate},
                     {"e_base_rate", model.e_model.base_rate}};
  save_checkpoint(path, model.all_params(), extra.dump());
}

EstimatorModel load_estimator(const std::string& path) {
  nlohmann::json extra = nlohmann::json::parse(checkpoint_extra(path));
  EstimatorConfig cfg;
  const auto& c = extra.at("config");
  cfg.lambda = c.at("lambda").get<double>();
  cfg.gcn_dim = c.at("gcn_dim").get<int>();
  cfg.hidden = c.at("hidden").get<int>();
  cfg.lr = c.at("lr").get<double>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.k1 = c.at("k1").get<int>();
  cfg.k2 = c.at("k2").get<int>();
  cfg.variant = parse_variant(c.at("variant").get<std::string>());
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.sinkhorn_eps = c.at("sinkhorn_eps").get<double>();
  cfg.sinkhorn_iters = c.at("sinkhorn_iters").get<int>();
  cfg.ipm_sample_cap = c.at("ipm_sample_cap").get<int>();
  cfg.propensity.density_bins = c.at("density_bins").get<int>();
  EstimatorModel model = make_estimator(extra.at("feature_dim").get<int>(), cfg);
  model.e_model.degenerate = c.value("e_degenerate", false);
  model.e_model.base_rate = c.value("e_base_rate", 0.5);
  load_checkpoint(path, model.all_params());
  return model;
}

IpmContext make_ipm_context(int n, int cap, std::uint64_t seed, const Tensor& rep_values,
                            double eps, int iters) {
  IpmContext ctx;
  ctx.eps = eps;
  ctx.iters = iters;
  Rng rng(seed);
  if (cap > 0 && n > cap) {
    std::vector<int> all = rng.permutation(n);
    all.resize(cap);
    std::sort(all.begin(), all.end());
    ctx.sample = std::move(all);
  } else {
    ctx.sample.resize(n);
    std::iota(ctx.sample.begin(), ctx.sample.end(), 0);
  }
  ctx.perm = rng.permutation(static_cast<int>(ctx.sample.size()));
  ctx.col_scale.assign(rep_values.cols, 1.0);
  for (int j = 0; j < rep_values.cols; ++j) {
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < rep_values.rows; ++i) mean += rep_values.at(i, j);
    mean /= rep_values.rows;
    for (int i = 0; i < rep_values.rows; ++i) {
      double d = rep_values.at(i, j) - mean;
      sq += d * d;
    }
    double sd = std::sqrt(sq / rep_values.rows);
    ctx.col_scale[j] = sd > 1e-8 ? 1.0 / sd : 1.0;
  }
  return ctx;
}

namespace {

Var gather_rows(const Var& a, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), a->value.cols);
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < a->value.cols; ++j)
      out.at(static_cast<int>(i), j) = a->value.at(idx[i], j);
  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  node->parents = {a};
  Node* src = a.get();
  Node* self = node.get();
  std::vector<int> rows = idx;
  node->backward_fn = [src, self, rows] {
    Tensor& da = src->grad_ref();
    for (size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < da.cols; ++j)
        da.at(rows[i], j) += self->grad.at(static_cast<int>(i), j);
  };
  return node;
}

Tensor pair_columns(const std::vector<double>& t, const std::vector<double>& z) {
  Tensor out(static_cast<int>(t.size()), 2);
  for (size_t i = 0; i < t.size(); ++i) {
    out.at(static_cast<int>(i), 0) = t[i];
    out.at(static_cast<int>(i), 1) = z[i];
  }
  return out;
}

Var representation(const EstimatorModel& model, const Var& x, const GcnAggregator& s) {
  return model.rep.forward(aggregate_features(x, s, model.gcn_w));
}

Var prediction_at(const EstimatorModel& model, const Var& r, const std::vector<double>& t,
                  const std::vector<double>& z) {
  return model.pred.forward(concat_cols(r, constant(pair_columns(t, z))));
}

}  // namespace

LossLYParts loss_LY(const EstimatorModel& model, const Var& x, const GcnAggregator& s,
                    const std::vector<int>& t, const std::vector<double>& z,
                    const std::vector<double>& y, const std::vector<double>& weights,
                    double lambda, const IpmContext* ipm) {
  const int n = x->value.rows;
  if (static_cast<int>(t.size()) != n || static_cast<int>(z.size()) != n ||
      static_cast<int>(y.size()) != n || static_cast<int>(weights.size()) != n) {
    throw ShapeMismatchError("loss_LY: input lengths disagree");
  }
  std::vector<double> td(t.begin(), t.end());
  Var r = representation(model, x, s);
  Var pred = prediction_at(model, r, td, z);
  Var resid = square(sub(pred, constant(Tensor::column(y))));
  LossLYParts parts;
  parts.factual = weighted_sum(resid, constant(Tensor::column(weights)));
  if (lambda > 0.0) {
    if (!ipm) throw Error("loss_LY: lambda > 0 requires an IpmContext");
    const auto& sample = ipm->sample;
    const int sn = static_cast<int>(sample.size());
    Tensor scales(sn, r->value.cols);
    for (int i = 0; i < sn; ++i)
      for (int j = 0; j < r->value.cols; ++j) scales.at(i, j) = ipm->col_scale[j];
    Var r_sub = mul_const(gather_rows(r, sample), scales);

    std::vector<double> t_fact(sn), z_fact(sn), t_perm(sn), z_perm(sn), mass_a(sn);
    double mass_total = 0.0;
    for (int i = 0; i < sn; ++i) {
      t_fact[i] = td[sample[i]];
      z_fact[i] = z[sample[i]];
      mass_a[i] = weights[sample[i]];
      mass_total += mass_a[i];
    }
    for (double& m : mass_a) m /= mass_total;
    for (int i = 0; i < sn; ++i) {
      t_perm[i] = t_fact[ipm->perm[i]];
      z_perm[i] = z_fact[ipm->perm[i]];
    }
    // factual joint carries the balancing weights; the permuted sample
    // simulating p(r)p(t,z) is uniform
    Var pts_fact = concat_cols(r_sub, constant(pair_columns(t_fact, z_fact)));
    Var pts_perm = concat_cols(r_sub, constant(pair_columns(t_perm, z_perm)));
    std::vector<double> log_mass(sn);
    for (int i = 0; i < sn; ++i) log_mass[i] = std::log(std::max(mass_a[i], 1e-300));
    std::vector<double> mass_perm(sn, 1.0 / sn);
    parts.wasserstein =
        sinkhorn_node(pts_fact, pts_perm, constant(Tensor::column(log_mass)), mass_perm,
                      ipm->eps, ipm->iters, &parts.sinkhorn_marginal_err);
    parts.total = add(parts.factual, scale(parts.wasserstein, lambda));
  } else {
    parts.total = parts.factual;
  }
  return parts;
}

SplitData extract_split(const NetworkDataset& ds, const Subgraph& sub) {
  SplitData out;
  out.graph = sub.graph;
  out.units = sub.units;
  int n = static_cast<int>(sub.units.size());
  out.X = Tensor(n, ds.X.cols);
  out.t.resize(n);
  out.z.resize(n);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    int u = sub.units[i];
    for (int j = 0; j < ds.X.cols; ++j) out.X.at(i, j) = ds.X.at(u, j);
    out.t[i] = ds.t[u];
    out.z[i] = ds.z[u];
    out.y[i] = ds.y[u];
  }
  return out;
}

TrainResult train_estimator(const SplitData& train, const EstimatorConfig& cfg_in) {
  EstimatorConfig cfg = cfg_in.normalized();
  const int n = train.graph.n_units;
  if (n < 2) throw TooFewUnitsError("train_estimator: need at least 2 units");
  GcnAggregator s = GcnAggregator::build(train.graph);

  TrainResult result;
  result.model = make_estimator(train.X.cols, cfg);
  EstimatorModel& model = result.model;

  Adam opt_y(model.outcome_params(), AdamConfig{cfg.lr});
  Adam opt_t(model.e_model.params(), AdamConfig{cfg.lr});
  Adam opt_z(model.z_model.params(), AdamConfig{cfg.lr});

  bool degenerate_t = cfg.uses_weights() &&
                      std::adjacent_find(train.t.begin(), train.t.end(), std::not_equal_to<>()) ==
                          train.t.end();
  if (degenerate_t) {
    model.e_model.degenerate = true;
    model.e_model.base_rate = std::clamp(train.t.empty() ? 0.5 : double(train.t.front()),
                                         cfg.propensity.e_clamp, 1.0 - cfg.propensity.e_clamp);
  }

  std::vector<double> weights(n, 1.0 / n);
  Var x_const = constant(train.X);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    if (cfg.uses_weights()) {
      Tensor xagg = aggregate_features_value(train.X, s, model.gcn_w->value);
      Var xagg_const = constant(xagg);
      for (int step = 0; step < cfg.k1; ++step) {
        if (!model.e_model.degenerate) {
          Var lt = loss_LT(model.e_model, xagg_const, train.t, cfg.propensity);
          entry.lt = lt->value.scalar_value();
          backward(lt);
          opt_t.step();
        }
        Var lz = loss_LZ(model.z_model, xagg_const, train.z, cfg.propensity);
        entry.lz = lz->value.scalar_value();
        backward(lz);
        opt_z.step();
      }
      BalancingWeights bw =
          balancing_weights(model.e_model, model.z_model, xagg, train.t, train.z, cfg.propensity);
      weights = bw.normalized;
      result.max_raw_weight = std::max(result.max_raw_weight, bw.max_raw);
    }
    for (int step = 0; step < cfg.k2; ++step) {
      std::optional<IpmContext> ctx;
      const IpmContext* ctx_ptr = nullptr;
      if (cfg.lambda > 0.0) {
        Tensor r_now = representation(model, x_const, s)->value;
        ctx = make_ipm_context(n, cfg.ipm_sample_cap, derive_seed(cfg.seed, 1000 + epoch, step),
                               r_now, cfg.sinkhorn_eps, cfg.sinkhorn_iters);
        ctx_ptr = &*ctx;
      }
      LossLYParts parts;
      try {
        parts = loss_LY(model, x_const, s, train.t, train.z, train.y, weights, cfg.lambda, ctx_ptr);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " (train_estimator epoch " +
                             std::to_string(epoch) + ")");
      }
      entry.factual = parts.factual->value.scalar_value();
      entry.wasserstein = parts.wasserstein ? parts.wasserstein->value.scalar_value() : 0.0;
      entry.ly = parts.total->value.scalar_value();
      if (parts.wasserstein && parts.sinkhorn_marginal_err > 1e-4) ++result.sinkhorn_warnings;
      backward(parts.total);
      opt_y.step();
    }
    result.log.push_back(entry);
  }
  result.final_weights = weights;
  return result;
}

std::vector<double> predict_outcomes(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                     const std::vector<double>& t, const std::vector<double>& z) {
  for (double tv : t) {
    if (tv != 0.0 && tv != 1.0) throw Error("predict_outcomes: treatments must be 0 or 1");
  }
  for (double zv : z) {
    if (zv < 0.0 || zv > 1.0) {
      throw OutOfRangeExposureError("predict_outcomes: exposure outside [0,1]");
    }
  }
  GcnAggregator s = GcnAggregator::build(g);
  Var r = representation(model, constant(x), s);
  return prediction_at(model, r, t, z)->value.v;
}

std::vector<double> predict_outcomes(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                     TreatmentPair at) {
  std::vector<double> t(x.rows, at.t), z(x.rows, at.z);
  return predict_outcomes(model, x, g, t, z);
}

std::vector<double> predict_ite(const EstimatorModel& model, const Tensor& x, const Graph& g,
                                TreatmentPair a, TreatmentPair b) {
  auto ya = predict_outcomes(model, x, g, a);
  auto yb = predict_outcomes(model, x, g, b);
  for (size_t i = 0; i < ya.size(); ++i) ya[i] -= yb[i];
  return ya;
}

double counterfactual_rmse(const EstimatorModel& model, const SplitData& split,
                           const OutcomeOracle* oracle) {
  if (!oracle) throw MissingOracleError("counterfactual_rmse: dataset has no outcome oracle");
  const int n = split.graph.n_units;
  std::vector<double> t_cf(n), z_cf(n);
  for (int i = 0; i < n; ++i) {
    t_cf[i] = 1.0 - split.t[i];
    z_cf[i] = 1.0 - split.z[i];
  }
  auto pred = predict_outcomes(model, split.X, split.graph, t_cf, z_cf);
  double se = 0.0;
  for (int i = 0; i < n; ++i) {
    double truth = (*oracle)(split.units[i], t_cf[i], z_cf[i]);
    double d = pred[i] - truth;
    se += d * d;
  }
  return std::sqrt(se / n);
}

double validation_factual_loss(const EstimatorModel& model, const SplitData& split) {
  const int n = split.graph.n_units;
  std::vector<double> weights(n, 1.0 / n);
  if (model.cfg.uses_weights()) {
    GcnAggregator s = GcnAggregator::build(split.graph);
    Tensor xagg = aggregate_features_value(split.X, s, model.gcn_w->value);
    BalancingWeights bw = balancing_weights(model.e_model, model.z_model, xagg, split.t, split.z,
                                            model.cfg.propensity);
    weights = bw.normalized;
  }
  std::vector<double> td(split.t.begin(), split.t.end());
  auto pred = predict_outcomes(model, split.X, split.graph, td, split.z);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = pred[i] - split.y[i];
    loss += weights[i] * d * d;
  }
  return loss;
}

EffectReport evaluate_effects(const EstimatorModel& model, const SplitData& split,
                              const OutcomeOracle* oracle) {
  if (!oracle) throw MissingOracleError("evaluate_effects: dataset has no outcome oracle");
  EffectReport rep;
  auto base = predict_outcomes(model, split.X, split.graph, TreatmentPair{0.0, 0.0});
  auto at_main = predict_outcomes(model, split.X, split.graph, TreatmentPair{1.0, 0.0});
  auto at_spill = predict_outcomes(model, split.X, split.graph, TreatmentPair{0.0, 1.0});
  auto at_total = predict_outcomes(model, split.X, split.graph, TreatmentPair{1.0, 1.0});
  const int n = split.graph.n_units;
  std::vector<double> est_main(n), est_spill(n), est_total(n);
  for (int i = 0; i < n; ++i) {
    est_main[i] = at_main[i] - base[i];
    est_spill[i] = at_spill[i] - base[i];
    est_total[i] = at_total[i] - base[i];
  }
  rep.true_main = oracle->true_main();
  rep.true_spillover = oracle->true_spillover(1.0, 0.0);
  rep.true_total = oracle->true_total(1.0, 0.0);
  rep.pehe_main = pehe(est_main, std::vector<double>(n, rep.true_main));
  rep.pehe_spillover = pehe(est_spill, std::vector<double>(n, rep.true_spillover));
  rep.pehe_total = pehe(est_total, std::vector<double>(n, rep.true_total));
  auto mean_of = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  rep.mean_est_main = mean_of(est_main);
  rep.mean_est_spillover = mean_of(est_spill);
  rep.mean_est_total = mean_of(est_total);
  rep.rmse_cf = counterfactual_rmse(model, split, oracle);
  return rep;
}

}  // namespace netcause
