#include "survflow/special.hpp"

#include <limits>

#include "survflow/errors.hpp"

namespace survflow::special {

namespace {

// Mills-ratio asymptotic tail: log S(z) = -z^2/2 - log(z sqrt(2 pi)) + log r(z)
// with r(z) = 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8.
double log_tail_series(double z) {
  const double z2 = z * z;
  const double r = 1.0 + (-1.0 + (3.0 + (-15.0 + 105.0 / z2) / z2) / z2) / z2;
  return -0.5 * z2 - std::log(z) - kLogSqrt2Pi + std::log(r);
}

}  // namespace

double log_norm_survival(double z) {
  if (z < 30.0) {
    return std::log(0.5) + std::log(std::erfc(z / kSqrt2));
  }
  return log_tail_series(z);
}

double norm_hazard(double z) {
  if (z < 30.0) {
    const double s = norm_survival(z);
    return norm_pdf(z) / s;
  }
  // phi/S = z / r(z) in the tail.
  const double z2 = z * z;
  const double r = 1.0 + (-1.0 + (3.0 + (-15.0 + 105.0 / z2) / z2) / z2) / z2;
  return z / r;
}

double norm_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("norm_quantile: argument must lie strictly inside (0, 1)");
  }
  // Acklam's rational approximation, then two Newton corrections through the
  // erfc-based CDF.
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;

  double z;
  if (u < low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - low) {
    const double q = u - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  for (int it = 0; it < 2; ++it) {
    const double err = norm_cdf(z) - u;
    const double pdf = norm_pdf(z);
    if (pdf <= std::numeric_limits<double>::min()) break;
    z -= err / pdf;
  }
  return z;
}

}  // namespace survflow::special
