#ifndef GORU_GRADCHECK_HPP
#define GORU_GRADCHECK_HPP

#include "goru/train.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace goru {

/// Copies every tensor reachable through `visit` into one flat vector, in
/// visit order.
template <typename Tree>
std::vector<double> flatten(const Tree& tree) {
  std::vector<double> out;
  tree.visit([&](const auto&, const auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) out.push_back(static_cast<double>(t.data()[k]));
  });
  return out;
}

/// Inverse of flatten.
template <typename Tree>
void assign_flat(Tree& tree, std::span<const double> flat) {
  std::size_t k = 0;
  tree.visit([&](const auto&, auto& t) {
    using S = typename std::decay_t<decltype(t)>::Scalar;
    require(k + std::size_t(t.size()) <= flat.size(), "assign_flat: vector too short");
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(flat[k++]);
  });
  require(k == flat.size(), "assign_flat: vector too long");
}

struct GradcheckReport {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0;  // at worst_index
  double numeric = 0;
};

/// |a - b| / max(|a|, |b|, 1e-8)
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Central difference (f(p + eps e_k) - f(p - eps e_k)) / (2 eps) for one
/// coordinate. `f` may return any floating type; the difference is taken in
/// that type. Throws NumericError if f is non-finite at either probe.
template <typename F>
double central_difference(F&& f, std::vector<double>& params, std::size_t k, double eps) {
  using R = std::decay_t<decltype(f(std::span<const double>(params)))>;
  auto eval = [&]() {
    const R v = f(std::span<const double>(params));
    using std::isfinite;
    if (!isfinite(v)) throw NumericError("numeric_gradcheck: function is not finite");
    return v;
  };
  const double saved = params[k];
  params[k] = saved + eps;
  const R up = eval();
  params[k] = saved - eps;
  const R down = eval();
  params[k] = saved;
  return static_cast<double>((up - down) / (R(2) * R(eps)));
}

template <typename F>
std::vector<double> numeric_gradient(F&& f, std::vector<double> params, double eps = 1e-6) {
  require(eps > 0, "numeric_gradient: eps must be positive");
  std::vector<double> out(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) out[k] = central_difference(f, params, k, eps);
  return out;
}

inline GradcheckReport compare_gradients(std::span<const double> analytic,
                                         std::span<const double> numeric) {
  require(analytic.size() == numeric.size(), "gradcheck: gradient length mismatch");
  GradcheckReport report;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double err = relative_error(analytic[k], numeric[k]);
    if (k == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = k;
      report.analytic = analytic[k];
      report.numeric = numeric[k];
    }
  }
  return report;
}

/// Compares `analytic` with central differences of `f` around `params`.
template <typename F>
GradcheckReport numeric_gradcheck(F&& f, const std::vector<double>& params,
                                  std::span<const double> analytic, double eps = 1e-6) {
  require(analytic.size() == params.size(), "numeric_gradcheck: gradient length mismatch");
  const std::vector<double> numeric = numeric_gradient(f, params, eps);
  return compare_gradients(analytic, numeric);
}

struct GradcheckCase {
  std::string label;
  CellConfig config;
};

/// Every cell kind, each GORU ablation, and both rotation layouts.
std::vector<GradcheckCase> gradcheck_cases(int d_x, int d_h);

struct GradcheckSuiteOptions {
  int instances = 20;
  int steps = 10;
  int d_x = 3;
  int d_h = 8;
  int batch = 2;
  int classes = 4;
  double eps = 1e-6;
  double kink_margin = 1e-4;
  // entries whose extended-precision error exceeds this are re-evaluated
  // in binary128
  double recheck_above = 1e-6;
  std::uint64_t seed = 20171;
};

struct GradcheckCaseResult {
  std::string label;
  CellKind kind = CellKind::vanilla;
  double worst = 0;
  std::string worst_param;
  int instances = 0;
  int redraws = 0;   // instances rejected for lying near a modReLU kink
  long entries = 0;  // gradient entries compared
  long rechecked = 0;
};

/// End-to-end BPTT gradients of the mean sequence loss against central
/// differences, in double precision, on random real-valued inputs.
GradcheckCaseResult run_gradcheck_case(const GradcheckCase& c, const GradcheckSuiteOptions& options,
                                       std::uint64_t case_seed);
std::vector<GradcheckCaseResult> run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace goru

#endif  // GORU_GRADCHECK_HPP
