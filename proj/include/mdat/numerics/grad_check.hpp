#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "mdat/numerics/graph.hpp"

namespace mdat::numerics {

/// Builds a scalar loss on a fresh graph from the given parameters. Must be
/// deterministic (dropout off).
template <class Real>
using LossBuilder = std::function<Var<Real>(Graph<Real>&, const ParamSet<Real>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t kinks_skipped = 0;  // entries whose difference straddles a relu kink
  // Per tensor ||a - n|| / (||a|| + ||n||), worst tensor.
  double max_tensor_rel_error = 0.0;
  std::string worst_tensor;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

template <class Real>
ParamSet<Real> analytic_gradient(const LossBuilder<Real>& loss, const ParamSet<Real>& params) {
  Graph<Real> g;
  Var<Real> l = loss(g, params);
  g.backward(l);
  return g.gradients(params);
}

template <class Real>
long double evaluate_loss(const LossBuilder<Real>& loss, const ParamSet<Real>& params,
                          std::vector<bool>* pattern = nullptr) {
  Graph<Real> g;
  const auto value = static_cast<long double>(loss(g, params).value()[0]);
  if (pattern) *pattern = g.branch_pattern();
  return value;
}

/// Compares `analytic` against central differences of `reference` evaluated
/// at `params` cast to the reference precision. Entries whose two
/// evaluations land on different sides of a relu kink are skipped and counted.
template <class Analytic, class Reference>
GradCheckReport compare_to_central_differences(const ParamSet<Analytic>& analytic,
                                               const LossBuilder<Reference>& reference,
                                               const ParamSet<Analytic>& params, double eps) {
  GradCheckReport report;
  ParamSet<Reference> probe = params.template cast<Reference>();
  for (auto& [name, tensor] : probe) {
    const auto& grad = analytic.get(name);
    long double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const Reference saved = tensor[i];
      std::vector<bool> up_branches, down_branches;
      tensor[i] = static_cast<Reference>(static_cast<long double>(saved) + eps);
      const long double up = evaluate_loss(reference, probe, &up_branches);
      tensor[i] = static_cast<Reference>(static_cast<long double>(saved) - eps);
      const long double down = evaluate_loss(reference, probe, &down_branches);
      tensor[i] = saved;
      if (up_branches != down_branches) {
        ++report.kinks_skipped;
        continue;
      }
      const double numeric = static_cast<double>((up - down) / (2.0L * eps));
      const double a = static_cast<double>(grad[i]);
      const double err = relative_error(a, numeric);
      diff2 += (static_cast<long double>(a) - numeric) * (static_cast<long double>(a) - numeric);
      a2 += static_cast<long double>(a) * a;
      n2 += static_cast<long double>(numeric) * numeric;
      ++report.entries_checked;
      if (err > report.max_rel_error || report.entries_checked == 1) {
        report.max_rel_error = err;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    const long double denom = std::sqrt(a2) + std::sqrt(n2);
    const double tensor_err = denom > 0 ? static_cast<double>(std::sqrt(diff2) / denom) : 0.0;
    if (tensor_err > report.max_tensor_rel_error || report.worst_tensor.empty()) {
      report.max_tensor_rel_error = tensor_err;
      report.worst_tensor = name;
    }
  }
  return report;
}

/// Maximum relative error between reverse-mode gradients and central
/// differences (f(θ+eps) - f(θ-eps)) / 2eps over every parameter entry.
template <class Real>
GradCheckReport grad_check(const LossBuilder<Real>& loss, const ParamSet<Real>& params, double eps) {
  return compare_to_central_differences(analytic_gradient(loss, params), loss, params, eps);
}

/// Checks reverse-mode gradients computed in `Analytic` precision against
/// central differences taken in the wider `Reference` precision. This is
/// how the 32-bit training path is verified: 32-bit finite differences are
/// dominated by rounding noise, not by gradient error.
template <class Analytic, class Reference>
GradCheckReport grad_check_mixed(const LossBuilder<Analytic>& loss,
                                 const LossBuilder<Reference>& reference,
                                 const ParamSet<Analytic>& params, double eps) {
  return compare_to_central_differences(analytic_gradient(loss, params), reference, params, eps);
}

}  // namespace mdat::numerics
