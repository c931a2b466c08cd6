#include "fcmf/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fcmf/numerics/tape.hpp"

namespace fcmf::num {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamList& params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  zero_grads(params);

  {
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor loss = loss_fn();
    if (!std::isfinite(loss.item())) {
      const char* kernel = tape.first_nonfinite_kernel();
      report.diagnostic = std::string("non-finite loss; first non-finite output from kernel '") +
                          (kernel ? kernel : "<input>") + "'";
      return report;
    }
    tape.backward(loss);
  }

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, t] : params) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.size(), 0.0);
    }
  }

  Rng rng(splitmix64(options.seed));
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) coords.emplace_back(p, rng.below(params[p].second.size()));
  while (coords.size() < options.samples && !params.empty()) {
    const std::size_t p = rng.below(params.size());
    coords.emplace_back(p, rng.below(params[p].second.size()));
  }

  report.passed = true;
  for (const auto& [p, idx] : coords) {
    Tensor t = params[p].second;
    const double saved = t[idx];
    t[idx] = saved + options.eps;
    const double up = loss_fn().item();
    t[idx] = saved - options.eps;
    const double down = loss_fn().item();
    t[idx] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      report.passed = false;
      report.diagnostic = "non-finite loss while perturbing " + params[p].first;
      continue;
    }
    const double numeric = (up - down) / (2.0 * options.eps);
    const double a = analytic[p][idx];
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
    report.entries.push_back({params[p].first, idx, a, numeric, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (rel > options.tol) report.passed = false;
  }
  return report;
}

}  // namespace fcmf::num
