#include "netcause/metrics.hpp"

#include <cmath>

namespace netcause {

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw LengthMismatchError("rmse: lengths " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
  }
  if (a.empty()) throw LengthMismatchError("rmse: empty input");
  double se = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    se += d * d;
  }
  return std::sqrt(se / a.size());
}

double pehe(const std::vector<double>& estimates, const std::vector<double>& truths) {
  return rmse(estimates, truths);
}

}  // namespace netcause
