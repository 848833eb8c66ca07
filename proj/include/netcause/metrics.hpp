#pragma once

#include <vector>

#include "netcause/errors.hpp"

namespace netcause {

// Root-mean-square error of estimated effects against ground truth.
double pehe(const std::vector<double>& estimates, const std::vector<double>& truths);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace netcause
