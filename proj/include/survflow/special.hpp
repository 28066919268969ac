#pragma once

#include <cmath>

namespace survflow::special {

// SELU constants from Klambauer et al., given to the precision published there.
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;
inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;

inline double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_d1(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

inline double selu_d2(double x) {
  return x > 0.0 ? 0.0 : kSeluLambda * kSeluAlpha * std::exp(x);
}

/// log of the standard normal density.
inline double log_norm_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double norm_pdf(double z) { return std::exp(log_norm_pdf(z)); }

/// Standard normal CDF via erfc (accurate in both tails).
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

/// Standard normal survival 1 - Phi(z).
inline double norm_survival(double z) { return 0.5 * std::erfc(z / kSqrt2); }

/// log(1 - Phi(z)), stable for large positive z where erfc underflows.
double log_norm_survival(double z);

/// phi(z) / (1 - Phi(z)), the hazard of the standard normal; stable for large z.
double norm_hazard(double z);

/// Inverse standard normal CDF. Rational approximation polished with Newton
/// steps; absolute error below 1e-12 on (0, 1).
double norm_quantile(double u);

}  // namespace survflow::special
