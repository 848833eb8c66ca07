#pragma once

#include <string>
#include <vector>

#include "netcause/autodiff.hpp"
#include "netcause/rng.hpp"

namespace netcause::ad {

enum class Act { None, Relu, Sigmoid };

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(int in_dim, int out_dim, Rng& rng);

struct Dense {
  Var W, b;
  Dense() = default;
  Dense(int in_dim, int out_dim, Rng& rng, const std::string& name);
  Var forward(const Var& x, Act act) const;
  std::vector<Var> params() const { return {W, b}; }
};

// Three fully-connected layers; hidden activations fixed per model.
struct Mlp3 {
  Dense l1, l2, l3;
  Act hidden_act = Act::Relu;
  Act out_act = Act::None;
  Mlp3() = default;
  Mlp3(int in_dim, int hidden, int out_dim, Act hidden_activation, Act out_activation,
       Rng& rng, const std::string& name);
  Var forward(const Var& x) const;
  std::vector<Var> params() const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. step() consumes and clears the
// gradients of the managed parameters; parameters without an accumulated
// gradient are treated as zero-gradient.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::vector<Var> params, AdamConfig cfg = {});
  void step();
  long step_count() const { return t_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

// Checkpoints are JSON: {"format": "...", "params": [{name, shape, values}], "extra": {...}}.
void save_checkpoint(const std::string& path, const std::vector<Var>& params,
                     const std::string& extra_json = "{}");
void load_checkpoint(const std::string& path, const std::vector<Var>& params);
std::string checkpoint_extra(const std::string& path);

}  // namespace netcause::ad
