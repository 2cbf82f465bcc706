#pragma once

#include <string>
#include <vector>

namespace dsf {

struct GradCheckResult {
  std::string op;
  double max_err = 0.0;  // |analytic - numeric| / max(1, |analytic|, |numeric|)
  bool pass = false;
};

/// Central finite-difference checks (eps = 1e-6) for every differentiable
/// tape operation and for a small composed classifier. An empty filter runs
/// everything; otherwise only the named op. Pass threshold: 1e-5.
std::vector<GradCheckResult> run_grad_checks(const std::string& only_op = "");

}  // namespace dsf
