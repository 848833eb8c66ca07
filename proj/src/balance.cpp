#include "netcause/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netcause/rng.hpp"

namespace netcause {

void validate_joint(const JointSample& s) {
  size_t n = static_cast<size_t>(s.r.rows);
  if (s.t.size() != n || s.z.size() != n || s.mass.size() != n) {
    throw ShapeMismatchError("JointSample: field lengths disagree");
  }
  double total = 0.0;
  for (double m : s.mass) {
    if (m < 0.0) throw Error("JointSample: negative mass");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error("JointSample: mass sums to " + std::to_string(total));
  }
}

JointSample product_sample(const JointSample& joint, std::uint64_t seed) {
  validate_joint(joint);
  int n = joint.r.rows;
  if (n < 2) throw Error("product_sample: need at least 2 rows");
  Rng rng(seed);
  std::vector<int> perm = rng.permutation(n);
  JointSample out;
  out.r = joint.r;
  out.t.resize(n);
  out.z.resize(n);
  out.mass.assign(n, 1.0 / n);
  for (int i = 0; i < n; ++i) {
    out.t[i] = joint.t[perm[i]];
    out.z[i] = joint.z[perm[i]];
  }
  return out;
}

Tensor joint_points(const JointSample& s, double alpha) {
  Tensor pts(s.r.rows, s.r.cols + 2);
  for (int i = 0; i < s.r.rows; ++i) {
    for (int j = 0; j < s.r.cols; ++j) pts.at(i, j) = s.r.at(i, j);
    pts.at(i, s.r.cols) = alpha * s.t[i];
    pts.at(i, s.r.cols + 1) = alpha * s.z[i];
  }
  return pts;
}

namespace {

Tensor squared_distance_matrix(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) {
        double d = a.at(i, k) - b.at(j, k);
        s += d * d;
      }
      c.at(i, j) = s;
    }
  return c;
}

// One pair of log-domain updates at a fixed eps; returns max marginal error.
void sinkhorn_sweep(const Tensor& cost, const std::vector<double>& log_a,
                    const std::vector<double>& log_b, double eps,
                    std::vector<double>& f, std::vector<double>& g) {
  const int n = cost.rows, m = cost.cols;
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < m; ++j) {
      double u = log_b[j] + (g[j] - cost.at(i, j)) / eps;
      mx = std::max(mx, u);
    }
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += std::exp(log_b[j] + (g[j] - cost.at(i, j)) / eps - mx);
    f[i] = -eps * (mx + std::log(s));
  }
  for (int j = 0; j < m; ++j) {
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      double u = log_a[i] + (f[i] - cost.at(i, j)) / eps;
      mx = std::max(mx, u);
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(log_a[i] + (f[i] - cost.at(i, j)) / eps - mx);
    g[j] = -eps * (mx + std::log(s));
  }
}

Tensor make_plan(const Tensor& cost, const std::vector<double>& log_a,
                 const std::vector<double>& log_b, double eps,
                 const std::vector<double>& f, const std::vector<double>& g) {
  Tensor plan(cost.rows, cost.cols);
  for (int i = 0; i < cost.rows; ++i)
    for (int j = 0; j < cost.cols; ++j) {
      plan.at(i, j) = std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost.at(i, j)) / eps);
    }
  return plan;
}

double marginal_violation(const Tensor& plan, const std::vector<double>& a,
                          const std::vector<double>& b) {
  double err = 0.0;
  for (int i = 0; i < plan.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < plan.cols; ++j) s += plan.at(i, j);
    err = std::max(err, std::abs(s - a[i]));
  }
  for (int j = 0; j < plan.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < plan.rows; ++i) s += plan.at(i, j);
    err = std::max(err, std::abs(s - b[j]));
  }
  return err;
}

// Rounds the plan onto the transport polytope (rescale rows, then columns,
// then spread the residual as an outer product).
void round_to_marginals(Tensor& plan, const std::vector<double>& a, const std::vector<double>& b) {
  const int n = plan.rows, m = plan.cols;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += plan.at(i, j);
    double sc = s > 0.0 ? std::min(1.0, a[i] / s) : 0.0;
    for (int j = 0; j < m; ++j) plan.at(i, j) *= sc;
  }
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += plan.at(i, j);
    double sc = s > 0.0 ? std::min(1.0, b[j] / s) : 0.0;
    for (int i = 0; i < n; ++i) plan.at(i, j) *= sc;
  }
  std::vector<double> ra(n, 0.0), rb(m, 0.0);
  double deficit = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += plan.at(i, j);
    ra[i] = a[i] - s;
    deficit += ra[i];
  }
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += plan.at(i, j);
    rb[j] = b[j] - s;
  }
  if (deficit > 1e-300) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) plan.at(i, j) += ra[i] * rb[j] / deficit;
  }
}

std::vector<double> log_of(const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) out[i] = std::log(std::max(xs[i], 1e-300));
  return out;
}

}  // namespace

SinkhornResult sinkhorn_cost_matrix(const Tensor& cost, const std::vector<double>& a,
                                    const std::vector<double>& b, SinkhornOptions opts) {
  const int n = cost.rows, m = cost.cols;
  if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != m) {
    throw ShapeMismatchError("sinkhorn: mass lengths disagree with cost matrix");
  }
  if (opts.eps <= 0.0) throw Error("sinkhorn: eps must be positive");
  auto log_a = log_of(a);
  auto log_b = log_of(b);
  std::vector<double> f(n, 0.0), g(m, 0.0);

  double cmax = 0.0;
  for (double c : cost.v) cmax = std::max(cmax, c);
  std::vector<double> eps_levels;
  if (opts.eps_scaling && cmax > opts.eps * 8.0) {
    double e = cmax / 2.0;
    while (e > opts.eps * 4.0) {
      eps_levels.push_back(e);
      e /= 4.0;
    }
  }
  eps_levels.push_back(opts.eps);

  SinkhornResult res;
  int iters_left = std::max(1, opts.max_iters);
  for (size_t lvl = 0; lvl < eps_levels.size(); ++lvl) {
    double eps = eps_levels[lvl];
    bool final_level = (lvl + 1 == eps_levels.size());
    int budget = final_level ? iters_left : std::min(iters_left, 30);
    for (int it = 0; it < budget; ++it) {
      sinkhorn_sweep(cost, log_a, log_b, eps, f, g);
      ++res.iters_run;
      --iters_left;
      if (final_level && opts.tol > 0.0 && (it % 10 == 9 || it + 1 == budget)) {
        Tensor plan = make_plan(cost, log_a, log_b, eps, f, g);
        if (marginal_violation(plan, a, b) < opts.tol) break;
      }
    }
    if (iters_left <= 0 && !final_level) break;
  }
  res.plan = make_plan(cost, log_a, log_b, opts.eps, f, g);
  res.marginal_err = marginal_violation(res.plan, a, b);
  res.converged = res.marginal_err <= 1e-4;
  if (opts.round_plan) {
    round_to_marginals(res.plan, a, b);
    res.marginal_err = marginal_violation(res.plan, a, b);
  }
  res.cost = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) res.cost += res.plan.at(i, j) * cost.at(i, j);
  res.f = std::move(f);
  res.g = std::move(g);
  return res;
}

SinkhornResult sinkhorn_wasserstein(const JointSample& a, const JointSample& b,
                                    double eps, int iters) {
  validate_joint(a);
  validate_joint(b);
  Tensor cost = squared_distance_matrix(joint_points(a), joint_points(b));
  SinkhornOptions opts;
  opts.eps = eps;
  opts.max_iters = iters;
  return sinkhorn_cost_matrix(cost, a.mass, b.mass, opts);
}

ad::Var sinkhorn_node(const ad::Var& points_a, const ad::Var& points_b,
                      const ad::Var& log_mass_a, const std::vector<double>& mass_b,
                      double eps, int iters, double* marginal_err) {
  using namespace ad;
  const int n = points_a->value.rows;
  const int m = points_b->value.rows;
  Var cost = pairwise_sqdist(points_a, points_b);
  Var log_b = constant(Tensor::column(log_of(mass_b)));
  Var g = constant(Tensor(m, 1));
  Var f;
  for (int it = 0; it < std::max(1, iters); ++it) {
    f = sinkhorn_f_step(cost, g, log_b, eps);
    g = sinkhorn_g_step(cost, f, log_mass_a, eps);
  }
  f = sinkhorn_f_step(cost, g, log_b, eps);
  Var out = sinkhorn_sharp_cost(cost, f, g, log_mass_a, log_b, eps);
  if (marginal_err) {
    // rows are exact after the trailing f update; report the column error
    std::vector<double> colsum(m, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        colsum[j] += std::exp(log_mass_a->value.at(i, 0) + log_b->value.at(j, 0) +
                              (f->value.at(i, 0) + g->value.at(j, 0) - cost->value.at(i, j)) / eps);
      }
    double err = 0.0;
    for (int j = 0; j < m; ++j) err = std::max(err, std::abs(colsum[j] - mass_b[j]));
    *marginal_err = err;
  }
  return out;
}

double exact_transport_cost(const Tensor& cost, const std::vector<double>& a,
                            const std::vector<double>& b) {
  const int n = cost.rows, m = cost.cols;
  if (static_cast<long>(n) * m > 4096) {
    throw TooLargeError("exact_transport_cost: instance larger than 4096 cells");
  }
  if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != m) {
    throw ShapeMismatchError("exact_transport_cost: mass lengths disagree");
  }
  double sa = std::accumulate(a.begin(), a.end(), 0.0);
  double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (sa <= 0.0 || sb <= 0.0 || std::abs(sa - sb) > 1e-6 * std::max(sa, sb)) {
    throw InfeasibleLPError("exact_transport_cost: supplies and demands must match");
  }
  for (double x : a)
    if (x < 0.0) throw InfeasibleLPError("exact_transport_cost: negative supply");
  for (double x : b)
    if (x < 0.0) throw InfeasibleLPError("exact_transport_cost: negative demand");

  std::vector<double> supply(a);
  std::vector<double> demand(b);
  for (double& x : demand) x *= sa / sb;  // absorb rounding drift

  // successive shortest paths with potentials on the dense bipartite graph
  std::vector<double> pot_u(n, 0.0), pot_v(m, 0.0);
  Tensor flow(n, m);
  const double tiny = 1e-15 * sa;
  double total_cost = 0.0;
  double remaining = sa;
  while (remaining > tiny) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist_u(n, inf), dist_v(m, inf);
    std::vector<int> from_v(m, -1), from_u(n, -1);
    std::vector<bool> done_u(n, false), done_v(m, false);
    for (int i = 0; i < n; ++i)
      if (supply[i] > tiny) dist_u[i] = 0.0;
    // dense Dijkstra alternating between the two sides
    while (true) {
      int side = -1, best = -1;
      double bd = inf;
      for (int i = 0; i < n; ++i)
        if (!done_u[i] && dist_u[i] < bd) {
          bd = dist_u[i];
          best = i;
          side = 0;
        }
      for (int j = 0; j < m; ++j)
        if (!done_v[j] && dist_v[j] < bd) {
          bd = dist_v[j];
          best = j;
          side = 1;
        }
      if (best < 0) break;
      if (side == 0) {
        done_u[best] = true;
        for (int j = 0; j < m; ++j) {
          if (done_v[j]) continue;
          double rc = cost.at(best, j) - pot_u[best] + pot_v[j];
          if (dist_u[best] + rc < dist_v[j] - 1e-18) {
            dist_v[j] = dist_u[best] + rc;
            from_v[j] = best;
          }
        }
      } else {
        done_v[best] = true;
        for (int i = 0; i < n; ++i) {
          if (done_u[i] || flow.at(i, best) <= tiny) continue;
          double rc = -(cost.at(i, best) - pot_u[i] + pot_v[best]);
          if (dist_v[best] + rc < dist_u[i] - 1e-18) {
            dist_u[i] = dist_v[best] + rc;
            from_u[i] = best;
          }
        }
      }
    }
    int sink = -1;
    double bd = inf;
    for (int j = 0; j < m; ++j)
      if (demand[j] > tiny && dist_v[j] < bd) {
        bd = dist_v[j];
        sink = j;
      }
    if (sink < 0) throw InfeasibleLPError("exact_transport_cost: no augmenting path");
    for (int i = 0; i < n; ++i)
      if (dist_u[i] < inf) pot_u[i] -= dist_u[i];
    for (int j = 0; j < m; ++j)
      if (dist_v[j] < inf) pot_v[j] -= dist_v[j];
    // walk back to find bottleneck
    double bottleneck = demand[sink];
    {
      int j = sink;
      while (true) {
        int i = from_v[j];
        if (from_u[i] < 0) {
          bottleneck = std::min(bottleneck, supply[i]);
          break;
        }
        int jprev = from_u[i];
        bottleneck = std::min(bottleneck, flow.at(i, jprev));
        j = jprev;
      }
    }
    {
      int j = sink;
      while (true) {
        int i = from_v[j];
        flow.at(i, j) += bottleneck;
        if (from_u[i] < 0) {
          supply[i] -= bottleneck;
          break;
        }
        int jprev = from_u[i];
        flow.at(i, jprev) -= bottleneck;
        j = jprev;
      }
      demand[sink] -= bottleneck;
    }
    remaining -= bottleneck;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) total_cost += flow.at(i, j) * cost.at(i, j);
  return total_cost;
}

double exact_transport_oracle(const JointSample& a, const JointSample& b) {
  validate_joint(a);
  validate_joint(b);
  Tensor cost = squared_distance_matrix(joint_points(a), joint_points(b));
  return exact_transport_cost(cost, a.mass, b.mass);
}

namespace {

double median_pairwise_distance(const Tensor& x) {
  const int n = x.rows;
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < x.cols; ++k) {
        double diff = x.at(i, k) - x.at(j, k);
        s += diff * diff;
      }
      d.push_back(std::sqrt(s));
    }
  if (d.empty()) return 0.0;
  size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return d[mid];
}

Tensor rbf_kernel(const Tensor& x, double bandwidth) {
  const int n = x.rows;
  Tensor k(n, n);
  double denom = 2.0 * bandwidth * bandwidth;
  for (int i = 0; i < n; ++i) {
    k.at(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < x.cols; ++c) {
        double diff = x.at(i, c) - x.at(j, c);
        s += diff * diff;
      }
      double val = std::exp(-s / denom);
      k.at(i, j) = val;
      k.at(j, i) = val;
    }
  }
  return k;
}

}  // namespace

double hsic(const Tensor& xf, const Tensor& yf, const std::vector<double>& mass) {
  const int n = xf.rows;
  if (yf.rows != n) throw ShapeMismatchError("hsic: row counts disagree");
  if (static_cast<int>(mass.size()) != n) throw ShapeMismatchError("hsic: mass length disagrees");
  if (n < 4) throw Error("hsic: need at least 4 rows");
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw Error("hsic: mass must sum to 1");

  double bx = median_pairwise_distance(xf);
  double by = median_pairwise_distance(yf);
  if (bx == 0.0 || by == 0.0) return 0.0;  // degenerate bandwidth: defined as 0
  Tensor K = rbf_kernel(xf, bx);
  Tensor L = rbf_kernel(yf, by);

  // V-statistic under the weighted empirical measure:
  // E[kl] - 2 E[E_x'k E_y'l] + E[k] E[l]
  double term1 = 0.0, termK = 0.0, termL = 0.0, term2 = 0.0;
  std::vector<double> krow(n, 0.0), lrow(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double ki = 0.0, li = 0.0;
    for (int j = 0; j < n; ++j) {
      ki += mass[j] * K.at(i, j);
      li += mass[j] * L.at(i, j);
      term1 += mass[i] * mass[j] * K.at(i, j) * L.at(i, j);
    }
    krow[i] = ki;
    lrow[i] = li;
    termK += mass[i] * ki;
    termL += mass[i] * li;
    term2 += mass[i] * ki * li;
  }
  return term1 - 2.0 * term2 + termK * termL;
}

}  // namespace netcause
