#include "netcause/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "netcause/rng.hpp"

namespace netcause {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> draw_weights(int d, double mean, double variance, Rng& rng) {
  std::vector<double> w(d);
  double sd = std::sqrt(variance);
  for (double& x : w) x = rng.normal(mean, sd);
  return w;
}

double dot_row(const Tensor& X, int i, const std::vector<double>& w) {
  double s = 0.0;
  for (int j = 0; j < X.cols; ++j) s += X.at(i, j) * w[j];
  return s;
}

void require_no_isolated(const Graph& g) {
  for (int u = 0; u < g.n_units; ++u) {
    if (g.degree[u] == 0) {
      throw IsolatedUnitError("unit " + std::to_string(u) +
                              " has no neighbors; exposure is undefined");
    }
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Tensor sample_features(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw BadDimensionsError("sample_features: n and d must be >= 1");
  Rng rng(seed);
  Tensor X(n, d);
  for (double& x : X.v) x = rng.normal();
  return X;
}

Tensor load_features_csv(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read features: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("features " + path + ": bad value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw BadDimensionsError("features " + path + ": ragged row at line " +
                               std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw BadDimensionsError("features " + path + ": empty file");
  if (expected_dim >= 0 && static_cast<int>(rows.front().size()) != expected_dim) {
    throw BadDimensionsError("features " + path + ": expected " + std::to_string(expected_dim) +
                             " columns, got " + std::to_string(rows.front().size()));
  }
  Tensor X(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < X.rows; ++i)
    for (int j = 0; j < X.cols; ++j) X.at(i, j) = rows[i][j];
  return X;
}

TreatmentDraw simulate_treatments(const Tensor& X, const Graph& g, const GenConfig& cfg) {
  if (X.rows != g.n_units) throw ShapeMismatchError("simulate_treatments: X rows != n_units");
  require_no_isolated(g);
  Rng rng(derive_seed(cfg.seed, 11));
  auto w1 = draw_weights(X.cols, -2.0, 3.0, rng);
  auto w2 = draw_weights(X.cols, -2.0, 3.0, rng);

  const int n = g.n_units;
  TreatmentDraw out;
  out.ps.resize(n);
  std::vector<double> own(n), neigh(n);
  for (int i = 0; i < n; ++i) own[i] = dot_row(X, i, w1);
  std::vector<double> w2x(n);
  for (int i = 0; i < n; ++i) w2x[i] = dot_row(X, i, w2);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j : g.adj[i]) s += w2x[j];
    neigh[i] = s / g.degree[i];
    out.ps[i] = sigmoid(cfg.beta1 * own[i] + cfg.beta2() * neigh[i]);
  }
  double mean_ps = 0.0;
  for (double p : out.ps) mean_ps += p;
  mean_ps /= n;
  out.t.resize(n);
  for (int i = 0; i < n; ++i) out.t[i] = out.ps[i] > mean_ps ? 1 : 0;
  out.z.resize(n);
  for (int i = 0; i < n; ++i) {
    int treated = 0;
    for (int j : g.adj[i]) treated += out.t[j];
    out.z[i] = static_cast<double>(treated) / g.degree[i];
  }
  return out;
}

std::pair<std::vector<double>, OutcomeOracle> simulate_outcomes(
    const Tensor& X, const Graph& g, const std::vector<int>& t, const std::vector<double>& z,
    const GenConfig& cfg) {
  const int n = g.n_units;
  if (X.rows != n || static_cast<int>(t.size()) != n || static_cast<int>(z.size()) != n) {
    throw ShapeMismatchError("simulate_outcomes: input lengths disagree");
  }
  require_no_isolated(g);
  Rng rng(derive_seed(cfg.seed, 13));
  auto w3 = draw_weights(X.cols, 1.0, 2.0, rng);
  auto w4 = draw_weights(X.cols, 1.0, 2.0, rng);

  OutcomeOracle oracle;
  oracle.beta3 = cfg.beta3;
  oracle.beta4 = cfg.beta4();
  oracle.base.resize(n);
  oracle.eps.resize(n);
  std::vector<double> w4x(n);
  for (int i = 0; i < n; ++i) w4x[i] = dot_row(X, i, w4);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j : g.adj[i]) s += w4x[j];
    oracle.base[i] = cfg.beta5 * dot_row(X, i, w3) + cfg.beta6() * (s / g.degree[i]);
    oracle.eps[i] = cfg.noise_scale * rng.normal();
  }
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = oracle(i, t[i], z[i]);
  return {std::move(y), std::move(oracle)};
}

NetworkDataset generate_dataset(const Graph& g, const GenConfig& cfg) {
  Tensor X = sample_features(g.n_units, cfg.feature_dim, derive_seed(cfg.seed, 7));
  return generate_dataset(g, X, cfg);
}

NetworkDataset generate_dataset(const Graph& g, const Tensor& X, const GenConfig& cfg) {
  NetworkDataset ds;
  ds.graph = g;
  ds.X = X;
  ds.cfg = cfg;
  auto draw = simulate_treatments(ds.X, g, cfg);
  ds.t = std::move(draw.t);
  ds.z = std::move(draw.z);
  ds.ps = std::move(draw.ps);
  auto [y, oracle] = simulate_outcomes(ds.X, g, ds.t, ds.z, cfg);
  ds.y = std::move(y);
  ds.oracle = std::move(oracle);
  return ds;
}

Graph small_world_graph(int n, int mean_degree, double rewire_prob, std::uint64_t seed) {
  if (n < 3) throw TooFewUnitsError("small_world_graph: need at least 3 units");
  int half = std::max(1, mean_degree / 2);
  Rng rng(seed);
  std::set<std::pair<int, int>> edge_set;
  auto canon = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (int i = 0; i < n; ++i)
    for (int s = 1; s <= half; ++s) edge_set.insert(canon(i, (i + s) % n));
  std::vector<std::pair<int, int>> edges(edge_set.begin(), edge_set.end());
  for (auto& e : edges) {
    if (rng.uniform() >= rewire_prob) continue;
    for (int attempt = 0; attempt < 32; ++attempt) {
      int v = rng.uniform_int(0, n - 1);
      if (v == e.first) continue;
      auto cand = canon(e.first, v);
      if (edge_set.count(cand)) continue;
      edge_set.erase(e);
      edge_set.insert(cand);
      e = cand;
      break;
    }
  }
  // reconnect any isolated unit; exposure needs degree >= 1
  std::vector<int> deg(n, 0);
  for (auto [a, b] : edge_set) {
    ++deg[a];
    ++deg[b];
  }
  for (int u = 0; u < n; ++u) {
    while (deg[u] == 0) {
      int v = rng.uniform_int(0, n - 1);
      if (v == u) continue;
      auto cand = canon(u, v);
      if (edge_set.count(cand)) continue;
      edge_set.insert(cand);
      ++deg[u];
      ++deg[v];
    }
  }
  return build_graph(n, {edge_set.begin(), edge_set.end()});
}

void save_dataset(const NetworkDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(dir + "/features.csv");
    if (!f) throw Error("cannot write " + dir + "/features.csv");
    for (int i = 0; i < ds.X.rows; ++i) {
      for (int j = 0; j < ds.X.cols; ++j) {
        if (j) f << ",";
        f << format_double(ds.X.at(i, j));
      }
      f << "\n";
    }
  }
  save_edge_list(dir + "/edges.txt", ds.graph);
  {
    std::ofstream f(dir + "/assign.csv");
    if (!f) throw Error("cannot write " + dir + "/assign.csv");
    f << "t,z,y\n";
    for (int i = 0; i < ds.graph.n_units; ++i) {
      f << ds.t[i] << "," << format_double(ds.z[i]) << "," << format_double(ds.y[i]) << "\n";
    }
  }
  {
    nlohmann::ordered_json meta;
    meta["config"] = {{"k", ds.cfg.k},
                      {"beta1", ds.cfg.beta1},
                      {"beta2", ds.cfg.beta2()},
                      {"beta3", ds.cfg.beta3},
                      {"beta4", ds.cfg.beta4()},
                      {"beta5", ds.cfg.beta5},
                      {"beta6", ds.cfg.beta6()},
                      {"feature_dim", ds.cfg.feature_dim},
                      {"noise_scale", ds.cfg.noise_scale}};
    meta["seed"] = ds.cfg.seed;
    meta["weight_distribution_convention"] =
        "second parameter of N(mean, v) read as variance: w1,w2 ~ N(-2, var 3); w3,w4 ~ N(1, var 2)";
    meta["ps"] = ds.ps;
    if (ds.oracle) {
      meta["oracle"] = {{"beta3", ds.oracle->beta3},
                        {"beta4", ds.oracle->beta4},
                        {"base", ds.oracle->base},
                        {"eps", ds.oracle->eps}};
    }
    std::ofstream f(dir + "/meta.json");
    if (!f) throw Error("cannot write " + dir + "/meta.json");
    f << meta.dump(1) << "\n";
  }
}

NetworkDataset load_dataset(const std::string& dir) {
  NetworkDataset ds;
  ds.X = load_features_csv(dir + "/features.csv");
  auto edges = load_edge_list(dir + "/edges.txt");
  ds.graph = build_graph(ds.X.rows, edges);
  {
    std::ifstream f(dir + "/assign.csv");
    if (!f) throw Error("cannot read " + dir + "/assign.csv");
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      ds.t.push_back(std::stoi(cell));
      std::getline(ss, cell, ',');
      ds.z.push_back(std::stod(cell));
      std::getline(ss, cell, ',');
      ds.y.push_back(std::stod(cell));
    }
  }
  if (static_cast<int>(ds.t.size()) != ds.graph.n_units) {
    throw BadDimensionsError("assign.csv row count does not match features.csv");
  }
  std::ifstream mf(dir + "/meta.json");
  if (mf) {
    nlohmann::json meta = nlohmann::json::parse(mf);
    if (meta.contains("config")) {
      const auto& c = meta["config"];
      ds.cfg.k = c.value("k", 1.0);
      ds.cfg.beta1 = c.value("beta1", 0.5);
      ds.cfg.beta3 = c.value("beta3", 1.0);
      ds.cfg.beta5 = c.value("beta5", 0.5);
      ds.cfg.feature_dim = c.value("feature_dim", ds.X.cols);
      ds.cfg.noise_scale = c.value("noise_scale", 1.0);
    }
    ds.cfg.seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("ps")) ds.ps = meta["ps"].get<std::vector<double>>();
    if (meta.contains("oracle")) {
      OutcomeOracle o;
      o.beta3 = meta["oracle"]["beta3"].get<double>();
      o.beta4 = meta["oracle"]["beta4"].get<double>();
      o.base = meta["oracle"]["base"].get<std::vector<double>>();
      o.eps = meta["oracle"]["eps"].get<std::vector<double>>();
      ds.oracle = std::move(o);
    }
  }
  return ds;
}

}  // namespace netcause
