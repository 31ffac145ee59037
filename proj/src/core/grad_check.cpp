#include "tvr/core/grad_check.hpp"

#include <cmath>

#include "tvr/core/error.hpp"

namespace tvr {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const Objective& f, ParamStore& params, const GradCheckOptions& opts) {
  auto eval = [&](bool grads) {
    const double v = f(grads);
    if (!std::isfinite(v)) throw NumericalError("non-finite objective");
    return v;
  };

  params.zero_grad();
  eval(true);

  struct Entry {
    Parameter* param;
    Eigen::Index index;
    double analytic;
    double numeric;
  };
  std::vector<Entry> entries;
  double largest = 0.0;
  for (Parameter* p : params.trainable()) {
    const Matrix analytic = p->grad;
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + opts.step;
      const double up = eval(false);
      x = saved - opts.step;
      const double down = eval(false);
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      entries.push_back({p, k, analytic.data()[k], numeric});
      largest = std::max({largest, std::abs(numeric), std::abs(analytic.data()[k])});
    }
  }

  GradCheckReport report;
  report.floor = std::max(opts.magnitude_floor, opts.scale_floor * largest);
  for (const Entry& e : entries) {
    if (report.params.empty() || report.params.back().name != e.param->name)
      report.params.push_back({e.param->name, 0, 0.0});
    GradCheckParamSummary& summary = report.params.back();
    const double err = relative_error(e.analytic, e.numeric, report.floor);
    ++summary.entries;
    summary.max_rel_error = std::max(summary.max_rel_error, err);
    if (report.checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_param = e.param->name;
      report.worst_index = static_cast<std::size_t>(e.index);
      report.worst_analytic = e.analytic;
      report.worst_numeric = e.numeric;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

}  // namespace tvr
