#include "circpred/circular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "circpred/error.hpp"

namespace circpred {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

double wrap_two_pi(double radians) noexcept {
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // r + 2π can round up to exactly 2π for tiny negative r.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

Angle Angle::from_degrees(double degrees) noexcept {
  return Angle(degrees * kPi / 180.0);
}

double angular_distance(Angle a, Angle b) noexcept {
  const double diff = std::fabs(a.radians() - b.radians());
  return kPi - std::fabs(kPi - diff);
}

Angle atan_project(double c, double s) {
  if (c == 0.0 && s == 0.0) {
    throw DomainError("atan_project: undefined at the origin (0, 0)");
  }
  if (c > 0.0 && s > 0.0) return Angle(std::atan(s / c));
  if (c < 0.0) return Angle(std::atan(s / c) + kPi);
  if (c > 0.0 && s < 0.0) return Angle(std::atan(s / c) + kTwoPi);
  if (c == 0.0) return Angle(s > 0.0 ? kPi / 2.0 : 3.0 * kPi / 2.0);
  return Angle(0.0);  // c > 0, s == 0
}

namespace {

constexpr double kSeriesTolerance = 1e-16;
// Past this the unscaled series overflows; switch to the asymptotic form.
constexpr double kSeriesLimit = 500.0;

double i0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 2000; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < kSeriesTolerance * sum) break;
  }
  return sum;
}

double i1_series(double x) {
  const double q = 0.25 * x * x;
  double term = 0.5 * x;
  double sum = term;
  for (int k = 1; k < 2000; ++k) {
    term *= q / (static_cast<double>(k) * (k + 1));
    sum += term;
    if (term < kSeriesTolerance * sum) break;
  }
  return sum;
}

// exp(-x) I_nu(x) ~ 1/sqrt(2πx) Σ_k (-1)^k a_k(nu) / x^k,
// a_k = Π_{j=1..k} (4nu² - (2j-1)²) / (8j).
double scaled_asymptotic(double x, double nu) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * x);
    if (std::fabs(next) > std::fabs(term)) break;
    term = next;
    sum += term;
    if (std::fabs(term) < kSeriesTolerance * std::fabs(sum)) break;
  }
  return sum / std::sqrt(kTwoPi * x);
}

}  // namespace

double bessel_i0(double x) {
  x = std::fabs(x);
  if (x <= kSeriesLimit) return i0_series(x);
  return std::exp(x) * scaled_asymptotic(x, 0.0);
}

double bessel_i1(double x) {
  const double ax = std::fabs(x);
  const double v = ax <= kSeriesLimit ? i1_series(ax) : std::exp(ax) * scaled_asymptotic(ax, 1.0);
  return x < 0.0 ? -v : v;
}

double bessel_i0_scaled(double x) {
  x = std::fabs(x);
  if (x <= kSeriesLimit) return std::exp(-x) * i0_series(x);
  return scaled_asymptotic(x, 0.0);
}

double von_mises_mean_resultant(double kappa) {
  if (kappa <= kSeriesLimit) return i1_series(kappa) / i0_series(kappa);
  return scaled_asymptotic(kappa, 1.0) / scaled_asymptotic(kappa, 0.0);
}

void VonMisesParams::validate() const {
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw ConfigError("von Mises concentration must be a positive finite number, got " +
                      std::to_string(concentration));
  }
}

double von_mises_density(Angle y, const VonMisesParams& p) {
  const double k = p.concentration;
  return std::exp(k * (std::cos(y.radians() - p.mean.radians()) - 1.0)) /
         (kTwoPi * bessel_i0_scaled(k));
}

Angle sample_von_mises(const VonMisesParams& p, Engine& rng) {
  const double kappa = p.concentration;
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);

  double f = 0.0;
  for (;;) {
    const double u1 = uniform01(rng);
    const double u2 = uniform_open01(rng);
    const double z = std::cos(kPi * u1);
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0) break;
    if (std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  f = std::clamp(f, -1.0, 1.0);
  const double u3 = uniform01(rng);
  const double offset = u3 < 0.5 ? -std::acos(f) : std::acos(f);
  return Angle(p.mean.radians() + offset);
}

std::vector<HistogramBin> circular_histogram(std::span<const Angle> angles,
                                             std::size_t n_bins) {
  if (n_bins == 0) throw ConfigError("circular_histogram: n_bins must be at least 1");
  const double width = kTwoPi / static_cast<double>(n_bins);
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) bins[k] = {static_cast<double>(k) * width, 0};
  for (const Angle a : angles) {
    auto k = static_cast<std::size_t>(a.radians() / width);
    bins[std::min(k, n_bins - 1)].count += 1;
  }
  return bins;
}

CircularSummary circular_summary(std::span<const Angle> angles) {
  double c = 0.0;
  double s = 0.0;
  for (const Angle a : angles) {
    c += std::cos(a.radians());
    s += std::sin(a.radians());
  }
  if (angles.empty()) return {Angle(), 0.0};
  const double n = static_cast<double>(angles.size());
  const Angle mean = (c == 0.0 && s == 0.0) ? Angle() : Angle(std::atan2(s, c));
  return {mean, std::hypot(c, s) / n};
}

}  // namespace circpred
