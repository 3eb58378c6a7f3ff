#include "fsprune/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace fsprune {

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport gradient_check(std::span<Tensor* const> inputs, std::span<const Tensor> analytic,
                               const std::function<double()>& loss, double tolerance, double step) {
  if (inputs.size() != analytic.size()) throw ShapeError("gradient_check: input/gradient list lengths differ");
  GradCheckReport report;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor& x = *inputs[t];
    require_shape(analytic[t], x.shape(), "gradient_check analytic gradient");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + step;
      const double up = loss();
      x[i] = saved - step;
      const double down = loss();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = gradient_relative_error(analytic[t][i], numeric);
      ++report.entries_checked;
      if (err > report.max_relative_error || !std::isfinite(err)) {
        report.max_relative_error = std::isfinite(err) ? err : INFINITY;
        report.worst_tensor = t;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace fsprune
