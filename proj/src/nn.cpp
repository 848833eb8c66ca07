#include "netcause/nn.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace netcause::ad {

Tensor glorot_uniform(int in_dim, int out_dim, Rng& rng) {
  double limit = std::sqrt(6.0 / (in_dim + out_dim));
  Tensor t(in_dim, out_dim);
  for (double& x : t.v) x = rng.uniform(-limit, limit);
  return t;
}

Dense::Dense(int in_dim, int out_dim, Rng& rng, const std::string& name) {
  W = param(glorot_uniform(in_dim, out_dim, rng), name + ".W");
  b = param(Tensor(1, out_dim), name + ".b");
}

Var Dense::forward(const Var& x, Act act) const {
  Var z = add_rowvec(matmul(x, W), b);
  switch (act) {
    case Act::Relu: return relu(z);
    case Act::Sigmoid: return sigmoid(z);
    case Act::None: return z;
  }
  return z;
}

Mlp3::Mlp3(int in_dim, int hidden, int out_dim, Act hidden_activation, Act out_activation,
           Rng& rng, const std::string& name)
    : l1(in_dim, hidden, rng, name + ".l1"),
      l2(hidden, hidden, rng, name + ".l2"),
      l3(hidden, out_dim, rng, name + ".l3"),
      hidden_act(hidden_activation),
      out_act(out_activation) {}

Var Mlp3::forward(const Var& x) const {
  Var h1 = l1.forward(x, hidden_act);
  Var h2 = l2.forward(h1, hidden_act);
  return l3.forward(h2, out_act);
}

std::vector<Var> Mlp3::params() const {
  return {l1.W, l1.b, l2.W, l2.b, l3.W, l3.b};
}

Adam::Adam(std::vector<Var> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Var& p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Node& p = *params_[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (size_t i = 0; i < p.value.v.size(); ++i) {
      double g = p.has_grad() ? p.grad.v[i] : 0.0;
      m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * g;
      v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      p.value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
    check_finite(p.value, "adam update of " + p.name);
  }
}

void save_checkpoint(const std::string& path, const std::vector<Var>& params,
                     const std::string& extra_json) {
  nlohmann::ordered_json j;
  j["format"] = "netcause-checkpoint-v1";
  j["params"] = nlohmann::ordered_json::array();
  for (const Var& p : params) {
    nlohmann::ordered_json rec;
    rec["name"] = p->name;
    rec["shape"] = {p->value.rows, p->value.cols};
    rec["values"] = p->value.v;
    j["params"].push_back(rec);
  }
  j["extra"] = nlohmann::ordered_json::parse(extra_json);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

void load_checkpoint(const std::string& path, const std::vector<Var>& params) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& rec : j.at("params")) by_name[rec.at("name").get<std::string>()] = &rec;
  for (const Var& p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ParseError("checkpoint missing parameter " + p->name);
    const auto& rec = *it->second;
    int r = rec.at("shape")[0].get<int>();
    int c = rec.at("shape")[1].get<int>();
    if (r != p->value.rows || c != p->value.cols) {
      throw ShapeMismatchError("checkpoint shape mismatch for " + p->name);
    }
    p->value.v = rec.at("values").get<std::vector<double>>();
    check_finite(p->value, "checkpoint " + p->name);
  }
}

std::string checkpoint_extra(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  return j.value("extra", nlohmann::json::object()).dump();
}

}  // namespace netcause::ad
