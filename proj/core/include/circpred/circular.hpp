#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "circpred/random.hpp"

namespace circpred {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an arbitrary real to [0, 2π).
double wrap_two_pi(double radians) noexcept;

/// A direction on the unit circle, stored in radians in [0, 2π).
/// Construction from any real reduces modulo 2π.
class Angle {
 public:
  constexpr Angle() noexcept = default;
  explicit Angle(double radians) noexcept : value_(wrap_two_pi(radians)) {}

  static Angle from_degrees(double degrees) noexcept;

  constexpr double radians() const noexcept { return value_; }
  double degrees() const noexcept { return value_ * 180.0 / kPi; }

  friend constexpr bool operator==(Angle, Angle) noexcept = default;

 private:
  double value_ = 0.0;
};

/// Shortest arc length between two angles, in [0, π].
double angular_distance(Angle a, Angle b) noexcept;

/// Quadrant-aware arctangent onto [0, 2π). Accepts any finite pair except the
/// origin; (c > 0, s = 0) maps to 0. Throws DomainError at (0, 0).
Angle atan_project(double c, double s);

/// Modified Bessel functions of the first kind, orders 0 and 1, by power
/// series. Accurate to ~1e-15 relative for x up to several hundred.
double bessel_i0(double x);
double bessel_i1(double x);

/// exp(-x) * I0(x); finite for all x >= 0.
double bessel_i0_scaled(double x);

/// Mean resultant length of a von Mises law, I1(κ)/I0(κ).
double von_mises_mean_resultant(double kappa);

struct VonMisesParams {
  Angle mean;
  double concentration = 1.0;

  /// Throws ConfigError unless concentration > 0 and finite.
  void validate() const;
};

double von_mises_density(Angle y, const VonMisesParams& p);

/// Best-Fisher (1979) rejection sampler.
Angle sample_von_mises(const VonMisesParams& p, Engine& rng);

struct HistogramBin {
  double lower_edge;
  std::size_t count;
};

/// Counts per equal-width bin over [0, 2π). Bin k covers
/// [k·2π/n, (k+1)·2π/n).
std::vector<HistogramBin> circular_histogram(std::span<const Angle> angles,
                                             std::size_t n_bins);

/// Circular mean direction and mean resultant length of a sample.
struct CircularSummary {
  Angle mean_direction;
  double mean_resultant_length;
};
CircularSummary circular_summary(std::span<const Angle> angles);

}  // namespace circpred
