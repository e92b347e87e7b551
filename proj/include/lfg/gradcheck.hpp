#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lfg {

struct GradCheckOptions {
  int points = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Components within this distance of a kink or clamp are not compared.
  double kink_margin = 1e-4;
};

struct GradCheckResult {
  std::string loss;
  int points = 0;
  long checked_components = 0;
  double max_rel_error = 0.0;
  /// Largest loss value observed with prediction == target.
  double max_value_at_target = 0.0;
  bool passed = false;
};

/// Central difference of `f` along each of `dims` coordinates around `x`.
std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                        const std::vector<double>& x, double step);

/// |a - b| / max(|a|, |b|) over the compared components, with a floor so an
/// all-zero pair yields 0.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                      const std::vector<bool>& compare);

/// Finite-difference checks for every loss with an analytic gradient.
/// Deterministic in `seed`.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed,
                                                 const GradCheckOptions& options = {});

}  // namespace lfg
