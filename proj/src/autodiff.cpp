#include "netcause/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace netcause::ad {

namespace {

Var make_node(Tensor value, std::vector<Var> parents, const std::string& op) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  return n;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeMismatchError(msg);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor& Node::grad_ref() {
  if (!has_grad()) grad = Tensor(value.rows, value.cols);
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var param(Tensor value, std::string name) {
  check_finite(value, "param " + name);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_param = true;
  n->name = std::move(name);
  return n;
}

void backward(const Var& root) {
  if (!root) throw Error("backward: null root");
  if (root->value.numel() != 1) {
    throw NonScalarRootError("backward requires a scalar root, got " +
                             std::to_string(root->value.rows) + "x" + std::to_string(root->value.cols));
  }
  // Iterative topological order (graphs can be thousands of nodes deep).
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  // topo is child-after-parent; traverse in reverse insertion order:
  // nodes were appended post-order, so reverse order visits each node
  // before its parents.
  root->grad_ref().v[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->has_grad() && n->backward_fn) n->backward_fn();
  }
}

Var matmul(const Var& a, const Var& b) {
  require(a->value.cols == b->value.rows, "matmul: inner dims disagree");
  Tensor out = mat_mul(a->value, b->value);
  auto n = make_node(std::move(out), {a, b}, "matmul");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self] {
    const Tensor& g = self->grad;
    // dA += g * B^T
    {
      Tensor& da = A->grad_ref();
      const Tensor& bv = B->value;
      for (int i = 0; i < da.rows; ++i)
        for (int j = 0; j < g.cols; ++j) {
          double gij = g.at(i, j);
          if (gij == 0.0) continue;
          for (int k = 0; k < da.cols; ++k) da.at(i, k) += gij * bv.at(k, j);
        }
    }
    // dB += A^T * g
    {
      Tensor& db = B->grad_ref();
      const Tensor& av = A->value;
      for (int i = 0; i < av.rows; ++i)
        for (int k = 0; k < av.cols; ++k) {
          double aik = av.at(i, k);
          if (aik == 0.0) continue;
          for (int j = 0; j < g.cols; ++j) db.at(k, j) += aik * g.at(i, j);
        }
    }
  };
  return n;
}

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shapes differ");
  Tensor out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->value.v[i];
  auto n = make_node(std::move(out), {a, b}, "add");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self] {
    Tensor& da = A->grad_ref();
    Tensor& db = B->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      da.v[i] += self->grad.v[i];
      db.v[i] += self->grad.v[i];
    }
  };
  return n;
}

Var add_rowvec(const Var& a, const Var& r) {
  require(r->value.rows == 1 && r->value.cols == a->value.cols, "add_rowvec: bias must be 1 x cols");
  Tensor out = a->value;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += r->value.at(0, j);
  auto n = make_node(std::move(out), {a, r}, "add_rowvec");
  Node* A = a.get();
  Node* R = r.get();
  Node* self = n.get();
  n->backward_fn = [A, R, self] {
    Tensor& da = A->grad_ref();
    Tensor& dr = R->grad_ref();
    const Tensor& g = self->grad;
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) {
        da.at(i, j) += g.at(i, j);
        dr.at(0, j) += g.at(i, j);
      }
  };
  return n;
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shapes differ");
  Tensor out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->value.v[i];
  auto n = make_node(std::move(out), {a, b}, "sub");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self] {
    Tensor& da = A->grad_ref();
    Tensor& db = B->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      da.v[i] += self->grad.v[i];
      db.v[i] -= self->grad.v[i];
    }
  };
  return n;
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var mul(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "mul: shapes differ");
  Tensor out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->value.v[i];
  auto n = make_node(std::move(out), {a, b}, "mul");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self] {
    Tensor& da = A->grad_ref();
    Tensor& db = B->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      da.v[i] += self->grad.v[i] * B->value.v[i];
      db.v[i] += self->grad.v[i] * A->value.v[i];
    }
  };
  return n;
}

Var mul_const(const Var& a, const Tensor& c) {
  require(a->value.same_shape(c), "mul_const: shapes differ");
  Tensor out = a->value;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= c.v[i];
  auto n = make_node(std::move(out), {a}, "mul_const");
  Node* A = a.get();
  Node* self = n.get();
  Tensor cc = c;
  n->backward_fn = [A, self, cc] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i] * cc.v[i];
  };
  return n;
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& x : out.v) x *= s;
  auto n = make_node(std::move(out), {a}, "scale");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self, s] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i] * s;
  };
  return n;
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (double& x : out.v) x += s;
  auto n = make_node(std::move(out), {a}, "add_scalar");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i];
  };
  return n;
}

Var concat_cols(const Var& a, const Var& b) {
  require(a->value.rows == b->value.rows, "concat_cols: row counts differ");
  int n_rows = a->value.rows;
  int ca = a->value.cols, cb = b->value.cols;
  Tensor out(n_rows, ca + cb);
  for (int i = 0; i < n_rows; ++i) {
    for (int j = 0; j < ca; ++j) out.at(i, j) = a->value.at(i, j);
    for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b->value.at(i, j);
  }
  auto n = make_node(std::move(out), {a, b}, "concat_cols");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self, ca, cb] {
    Tensor& da = A->grad_ref();
    Tensor& db = B->grad_ref();
    const Tensor& g = self->grad;
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < ca; ++j) da.at(i, j) += g.at(i, j);
      for (int j = 0; j < cb; ++j) db.at(i, j) += g.at(i, ca + j);
    }
  };
  return n;
}

Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.v) x = stable_sigmoid(x);
  auto n = make_node(std::move(out), {a}, "sigmoid");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      double y = self->value.v[i];
      da.v[i] += self->grad.v[i] * y * (1.0 - y);
    }
  };
  return n;
}

Var relu(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  auto n = make_node(std::move(out), {a}, "relu");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      if (A->value.v[i] > 0.0) da.v[i] += self->grad.v[i];
    }
  };
  return n;
}

Var logv(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.v) x = std::log(x);
  auto n = make_node(std::move(out), {a}, "log");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i] / A->value.v[i];
  };
  return n;
}

Var expv(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.v) x = std::exp(x);
  auto n = make_node(std::move(out), {a}, "exp");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i] * self->value.v[i];
  };
  return n;
}

Var square(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.v) x = x * x;
  auto n = make_node(std::move(out), {a}, "square");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) da.v[i] += self->grad.v[i] * 2.0 * A->value.v[i];
  };
  return n;
}

Var clampv(const Var& a, double lo, double hi) {
  Tensor out = a->value;
  for (double& x : out.v) x = std::min(hi, std::max(lo, x));
  auto n = make_node(std::move(out), {a}, "clamp");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self, lo, hi] {
    Tensor& da = A->grad_ref();
    for (size_t i = 0; i < self->grad.v.size(); ++i) {
      double x = A->value.v[i];
      if (x > lo && x < hi) da.v[i] += self->grad.v[i];
    }
  };
  return n;
}

Var softmax_rows(const Var& a) {
  Tensor out = a->value;
  for (int i = 0; i < out.rows; ++i) {
    double m = out.at(i, 0);
    for (int j = 1; j < out.cols; ++j) m = std::max(m, out.at(i, j));
    double s = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      double e = std::exp(out.at(i, j) - m);
      out.at(i, j) = e;
      s += e;
    }
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= s;
  }
  auto n = make_node(std::move(out), {a}, "softmax_rows");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    const Tensor& y = self->value;
    const Tensor& g = self->grad;
    for (int i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < y.cols; ++j) da.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  };
  return n;
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double x : a->value.v) s += x;
  auto n = make_node(Tensor::scalar(s), {a}, "sum_all");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    double g = self->grad.v[0];
    for (double& x : da.v) x += g;
  };
  return n;
}

Var mean_all(const Var& a) {
  double s = 0.0;
  for (double x : a->value.v) s += x;
  double inv = 1.0 / static_cast<double>(a->value.numel());
  auto n = make_node(Tensor::scalar(s * inv), {a}, "mean_all");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self, inv] {
    Tensor& da = A->grad_ref();
    double g = self->grad.v[0] * inv;
    for (double& x : da.v) x += g;
  };
  return n;
}

Var sum_rows(const Var& a) {
  Tensor out(a->value.rows, 1);
  for (int i = 0; i < a->value.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a->value.cols; ++j) s += a->value.at(i, j);
    out.at(i, 0) = s;
  }
  auto n = make_node(std::move(out), {a}, "sum_rows");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self] {
    Tensor& da = A->grad_ref();
    for (int i = 0; i < da.rows; ++i) {
      double g = self->grad.at(i, 0);
      for (int j = 0; j < da.cols; ++j) da.at(i, j) += g;
    }
  };
  return n;
}

Var mean_cols(const Var& a) {
  Tensor out(1, a->value.cols);
  double inv = 1.0 / static_cast<double>(a->value.rows);
  for (int j = 0; j < a->value.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < a->value.rows; ++i) s += a->value.at(i, j);
    out.at(0, j) = s * inv;
  }
  auto n = make_node(std::move(out), {a}, "mean_cols");
  Node* A = a.get();
  Node* self = n.get();
  n->backward_fn = [A, self, inv] {
    Tensor& da = A->grad_ref();
    for (int i = 0; i < da.rows; ++i)
      for (int j = 0; j < da.cols; ++j) da.at(i, j) += self->grad.at(0, j) * inv;
  };
  return n;
}

Var rowwise_div(const Var& a, const Var& d) {
  require(d->value.rows == a->value.rows && d->value.cols == 1, "rowwise_div: divisor must be n x 1");
  Tensor out = a->value;
  for (int i = 0; i < out.rows; ++i) {
    double di = d->value.at(i, 0);
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= di;
  }
  auto n = make_node(std::move(out), {a, d}, "rowwise_div");
  Node* A = a.get();
  Node* D = d.get();
  Node* self = n.get();
  n->backward_fn = [A, D, self] {
    Tensor& da = A->grad_ref();
    Tensor& dd = D->grad_ref();
    const Tensor& g = self->grad;
    for (int i = 0; i < g.rows; ++i) {
      double di = D->value.at(i, 0);
      double acc = 0.0;
      for (int j = 0; j < g.cols; ++j) {
        da.at(i, j) += g.at(i, j) / di;
        acc += g.at(i, j) * A->value.at(i, j);
      }
      dd.at(i, 0) -= acc / (di * di);
    }
  };
  return n;
}

Var weighted_sum(const Var& values, const Var& weights) {
  require(values->value.cols == 1 && weights->value.cols == 1 &&
              values->value.rows == weights->value.rows,
          "weighted_sum: needs matching n x 1 vectors");
  double s = 0.0;
  for (int i = 0; i < values->value.rows; ++i) s += values->value.at(i, 0) * weights->value.at(i, 0);
  auto n = make_node(Tensor::scalar(s), {values, weights}, "weighted_sum");
  Node* V = values.get();
  Node* W = weights.get();
  Node* self = n.get();
  n->backward_fn = [V, W, self] {
    Tensor& dv = V->grad_ref();
    Tensor& dw = W->grad_ref();
    double g = self->grad.v[0];
    for (int i = 0; i < dv.rows; ++i) {
      dv.at(i, 0) += g * W->value.at(i, 0);
      dw.at(i, 0) += g * V->value.at(i, 0);
    }
  };
  return n;
}

Var pairwise_sqdist(const Var& a, const Var& b) {
  require(a->value.cols == b->value.cols, "pairwise_sqdist: point dims differ");
  int na = a->value.rows, nb = b->value.rows, d = a->value.cols;
  Tensor out(na, nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = a->value.at(i, k) - b->value.at(j, k);
        s += diff * diff;
      }
      out.at(i, j) = s;
    }
  auto n = make_node(std::move(out), {a, b}, "pairwise_sqdist");
  Node* A = a.get();
  Node* B = b.get();
  Node* self = n.get();
  n->backward_fn = [A, B, self, na, nb, d] {
    Tensor& da = A->grad_ref();
    Tensor& db = B->grad_ref();
    const Tensor& g = self->grad;
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j) {
        double gij = g.at(i, j);
        if (gij == 0.0) continue;
        for (int k = 0; k < d; ++k) {
          double diff = A->value.at(i, k) - B->value.at(j, k);
          da.at(i, k) += gij * 2.0 * diff;
          db.at(j, k) -= gij * 2.0 * diff;
        }
      }
  };
  return n;
}

namespace {

// row-wise logsumexp of u_ij = base_j + (y_j - C_ij) / eps, reused by both
// Sinkhorn steps (with the transposed view for the column direction).
void lse_row(const Tensor& cost, const Tensor& y, const Tensor& log_mass, double eps,
             bool over_cols, Tensor& out) {
  int n = over_cols ? cost.rows : cost.cols;
  int m = over_cols ? cost.cols : cost.rows;
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < m; ++j) {
      double c = over_cols ? cost.at(i, j) : cost.at(j, i);
      double u = log_mass.v[j] + (y.v[j] - c) / eps;
      mx = std::max(mx, u);
    }
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      double c = over_cols ? cost.at(i, j) : cost.at(j, i);
      double u = log_mass.v[j] + (y.v[j] - c) / eps;
      s += std::exp(u - mx);
    }
    out.v[i] = -eps * (mx + std::log(s));
  }
}

// softmax weights matching lse_row, recomputed during the backward pass.
void softmax_row(const Tensor& cost, const Tensor& y, const Tensor& log_mass, double eps,
                 bool over_cols, int i, std::vector<double>& w) {
  int m = over_cols ? cost.cols : cost.rows;
  w.resize(m);
  double mx = -1e300;
  for (int j = 0; j < m; ++j) {
    double c = over_cols ? cost.at(i, j) : cost.at(j, i);
    w[j] = log_mass.v[j] + (y.v[j] - c) / eps;
    mx = std::max(mx, w[j]);
  }
  double s = 0.0;
  for (int j = 0; j < m; ++j) {
    w[j] = std::exp(w[j] - mx);
    s += w[j];
  }
  for (int j = 0; j < m; ++j) w[j] /= s;
}

}  // namespace

Var sinkhorn_f_step(const Var& cost, const Var& g, const Var& log_b, double eps) {
  int n = cost->value.rows, m = cost->value.cols;
  require(g->value.rows == m && g->value.cols == 1, "sinkhorn_f_step: g must be m x 1");
  require(log_b->value.rows == m && log_b->value.cols == 1, "sinkhorn_f_step: log_b must be m x 1");
  Tensor out(n, 1);
  lse_row(cost->value, g->value, log_b->value, eps, true, out);
  auto node = make_node(std::move(out), {cost, g, log_b}, "sinkhorn_f_step");
  Node* C = cost.get();
  Node* G = g.get();
  Node* LB = log_b.get();
  Node* self = node.get();
  node->backward_fn = [C, G, LB, self, eps, n, m] {
    Tensor& dc = C->grad_ref();
    Tensor& dg = G->grad_ref();
    Tensor& dlb = LB->grad_ref();
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      double gf = self->grad.at(i, 0);
      if (gf == 0.0) continue;
      softmax_row(C->value, G->value, LB->value, eps, true, i, w);
      for (int j = 0; j < m; ++j) {
        dc.at(i, j) += gf * w[j];
        dg.at(j, 0) -= gf * w[j];
        dlb.at(j, 0) -= gf * eps * w[j];
      }
    }
  };
  return node;
}

Var sinkhorn_g_step(const Var& cost, const Var& f, const Var& log_a, double eps) {
  int n = cost->value.rows, m = cost->value.cols;
  require(f->value.rows == n && f->value.cols == 1, "sinkhorn_g_step: f must be n x 1");
  require(log_a->value.rows == n && log_a->value.cols == 1, "sinkhorn_g_step: log_a must be n x 1");
  Tensor out(m, 1);
  lse_row(cost->value, f->value, log_a->value, eps, false, out);
  auto node = make_node(std::move(out), {cost, f, log_a}, "sinkhorn_g_step");
  Node* C = cost.get();
  Node* F = f.get();
  Node* LA = log_a.get();
  Node* self = node.get();
  node->backward_fn = [C, F, LA, self, eps, n, m] {
    Tensor& dc = C->grad_ref();
    Tensor& df = F->grad_ref();
    Tensor& dla = LA->grad_ref();
    std::vector<double> w;
    for (int j = 0; j < m; ++j) {
      double gg = self->grad.at(j, 0);
      if (gg == 0.0) continue;
      softmax_row(C->value, F->value, LA->value, eps, false, j, w);
      for (int i = 0; i < n; ++i) {
        dc.at(i, j) += gg * w[i];
        df.at(i, 0) -= gg * w[i];
        dla.at(i, 0) -= gg * eps * w[i];
      }
    }
  };
  return node;
}

Var sinkhorn_sharp_cost(const Var& cost, const Var& f, const Var& g,
                        const Var& log_a, const Var& log_b, double eps) {
  int n = cost->value.rows, m = cost->value.cols;
  require(f->value.rows == n && g->value.rows == m, "sinkhorn_sharp_cost: potentials misshaped");
  require(log_a->value.rows == n && log_b->value.rows == m, "sinkhorn_sharp_cost: masses misshaped");
  auto plan_entry = [&](const Tensor& cv, const Tensor& fv, const Tensor& gv,
                        const Tensor& lav, const Tensor& lbv, int i, int j) {
    double e = lav.v[i] + lbv.v[j] + (fv.v[i] + gv.v[j] - cv.at(i, j)) / eps;
    return std::exp(e);
  };
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      total += plan_entry(cost->value, f->value, g->value, log_a->value, log_b->value, i, j) *
               cost->value.at(i, j);
  auto node = make_node(Tensor::scalar(total), {cost, f, g, log_a, log_b}, "sinkhorn_sharp_cost");
  Node* C = cost.get();
  Node* F = f.get();
  Node* G = g.get();
  Node* LA = log_a.get();
  Node* LB = log_b.get();
  Node* self = node.get();
  node->backward_fn = [C, F, G, LA, LB, self, eps, n, m, plan_entry] {
    double gs = self->grad.v[0];
    if (gs == 0.0) return;
    Tensor& dc = C->grad_ref();
    Tensor& df = F->grad_ref();
    Tensor& dg = G->grad_ref();
    Tensor& dla = LA->grad_ref();
    Tensor& dlb = LB->grad_ref();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double c = C->value.at(i, j);
        double p = plan_entry(C->value, F->value, G->value, LA->value, LB->value, i, j);
        double pc = p * c;
        dc.at(i, j) += gs * p * (1.0 - c / eps);
        df.at(i, 0) += gs * pc / eps;
        dg.at(j, 0) += gs * pc / eps;
        dla.at(i, 0) += gs * pc;
        dlb.at(j, 0) += gs * pc;
      }
  };
  return node;
}

}  // namespace netcause::ad
