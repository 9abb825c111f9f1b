#include "circpred/baselines.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "circpred/error.hpp"
#include "circpred/projection.hpp"

namespace circpred {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // log(2π) / 2
const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

// log(1 + t Φ(t) / φ(t)), stable over the whole real line.
double log_shape_factor(double t) {
  if (t > 5.0) {
    const double log_ratio = std::log(t * normal_cdf(t)) + 0.5 * t * t + kHalfLogTwoPi;
    return log_ratio + std::log1p(std::exp(-log_ratio));
  }
  if (t < -20.0) {
    // 1 + tΦ(t)/φ(t) = 1/t² - 3/t⁴ + 15/t⁶ - ...
    const double inv2 = 1.0 / (t * t);
    double term = inv2;
    double sum = 0.0;
    for (int k = 1; k <= 30; ++k) {
      sum += term;
      term *= -(2.0 * k + 1.0) * inv2;
    }
    return std::log(sum);
  }
  const double ratio = normal_cdf(t) * std::exp(0.5 * t * t + kHalfLogTwoPi);
  return std::log1p(t * ratio);
}

double dot_tilde(const std::vector<double>& beta, std::span<const double> x) {
  double v = beta[0];
  for (std::size_t k = 0; k < x.size(); ++k) v += beta[k + 1] * x[k];
  return v;
}

struct Objective {
  const Matrix& x;
  std::span<const Angle> y;
  std::vector<double> cos_y;
  std::vector<double> sin_y;

  Objective(const Matrix& x_, std::span<const Angle> y_)
      : x(x_), y(y_), cos_y(y_.size()), sin_y(y_.size()) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      cos_y[i] = std::cos(y[i].radians());
      sin_y[i] = std::sin(y[i].radians());
    }
  }

  // Mean log-likelihood at θ = (β_c, β_s).
  double mean_log_likelihood(const Eigen::VectorXd& theta) const {
    const std::size_t p = x.cols() + 1;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto xi = x.row(i);
      double g1 = theta[0];
      double g2 = theta[static_cast<Eigen::Index>(p)];
      for (std::size_t k = 0; k < xi.size(); ++k) {
        g1 += theta[static_cast<Eigen::Index>(k + 1)] * xi[k];
        g2 += theta[static_cast<Eigen::Index>(p + k + 1)] * xi[k];
      }
      const double t = g1 * cos_y[i] + g2 * sin_y[i];
      total += -0.5 * (g1 * g1 + g2 * g2) + log_shape_factor(t);
    }
    return total / static_cast<double>(y.size()) - kLogTwoPi;
  }
};

ProjectedNormalModel unpack(const Eigen::VectorXd& theta, std::size_t p) {
  ProjectedNormalModel m;
  m.beta_cos.assign(theta.data(), theta.data() + p);
  m.beta_sin.assign(theta.data() + p, theta.data() + 2 * p);
  return m;
}

}  // namespace

std::pair<double, double> ProjectedNormalModel::mean_vector(std::span<const double> x) const {
  if (x.size() + 1 != beta_cos.size() || beta_cos.size() != beta_sin.size()) {
    throw ConfigError("projected normal: covariate dimension mismatch");
  }
  return {dot_tilde(beta_cos, x), dot_tilde(beta_sin, x)};
}

Angle ProjectedNormalModel::predict(std::span<const double> x) const { return pn_predict(*this, x); }

double pn_log_density(Angle y, double g1, double g2) {
  const double t = g1 * std::cos(y.radians()) + g2 * std::sin(y.radians());
  return -kLogTwoPi - 0.5 * (g1 * g1 + g2 * g2) + log_shape_factor(t);
}

double pn_log_likelihood(const ProjectedNormalModel& m, const Matrix& x,
                         std::span<const Angle> y) {
  if (y.empty()) throw ConfigError("projected normal log-likelihood needs data");
  if (x.rows() != y.size()) throw ConfigError("projected normal: predictors and responses differ");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto [g1, g2] = m.mean_vector(x.row(i));
    total += pn_log_density(y[i], g1, g2);
  }
  return total;
}

Angle pn_predict(const ProjectedNormalModel& m, std::span<const double> x) {
  const auto [g1, g2] = m.mean_vector(x);
  return project_components(g1, g2);
}

PnFitResult fit_projected_normal(const Matrix& x, std::span<const Angle> y,
                                 const PnFitOptions& options) {
  const std::size_t n = y.size();
  const std::size_t p = x.cols() + 1;
  if (x.rows() != n) throw ConfigError("projected normal: predictors and responses differ");
  if (n <= 2 * p) {
    throw ConfigError("projected normal fit needs n > 2(d + 1) = " + std::to_string(2 * p) +
                      " observations, got " + std::to_string(n));
  }

  const Objective obj(x, y);

  // Least-squares start.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd target_c(static_cast<Eigen::Index>(n));
  Eigen::VectorXd target_s(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = 1.0;
    for (std::size_t k = 0; k + 1 < p; ++k) design(r, static_cast<Eigen::Index>(k + 1)) = x(i, k);
    target_c[r] = obj.cos_y[i];
    target_s[r] = obj.sin_y[i];
  }
  const auto qr = design.colPivHouseholderQr();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(2 * p));
  theta.head(static_cast<Eigen::Index>(p)) = qr.solve(target_c);
  theta.tail(static_cast<Eigen::Index>(p)) = qr.solve(target_s);

  // Minimize the negative mean log-likelihood.
  auto f = [&](const Eigen::VectorXd& t) { return -obj.mean_log_likelihood(t); };
  auto grad = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd g(t.size());
    Eigen::VectorXd probe = t;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double h = options.step * std::max(1.0, std::fabs(t[k]));
      probe[k] = t[k] + h;
      const double up = f(probe);
      probe[k] = t[k] - h;
      const double down = f(probe);
      probe[k] = t[k];
      g[k] = (up - down) / (2.0 * h);
    }
    return g;
  };

  PnFitResult result;
  double fx = f(theta);
  result.initial_log_likelihood = -fx * static_cast<double>(n);
  Eigen::VectorXd g = grad(theta);
  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(theta.size(), theta.size());

  for (result.iterations = 0; result.iterations < options.max_iterations;) {
    ++result.iterations;
    Eigen::VectorXd dir = -inv_hessian * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    if (slope == 0.0) {
      result.converged = true;
      break;
    }

    double step = 1.0;
    Eigen::VectorXd next = theta + dir;
    double fnext = f(next);
    int halvings = 0;
    while (!(fnext <= fx + 1e-4 * step * slope) && halvings < 60) {
      step *= 0.5;
      next = theta + step * dir;
      fnext = f(next);
      ++halvings;
    }
    if (!(fnext <= fx)) {
      // No descent along a BFGS direction: retry once from steepest descent.
      if (!inv_hessian.isIdentity()) {
        inv_hessian.setIdentity();
        continue;
      }
      result.converged = true;
      break;
    }

    const Eigen::VectorXd gnext = grad(next);
    const Eigen::VectorXd s = next - theta;
    const Eigen::VectorXd yv = gnext - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(theta.size(), theta.size());
      inv_hessian = (eye - rho * s * yv.transpose()) * inv_hessian *
                        (eye - rho * yv * s.transpose()) +
                    rho * s * s.transpose();
    }

    const double improvement = fx - fnext;
    theta = next;
    fx = fnext;
    g = gnext;
    if (improvement < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  if (!result.converged) {
    spdlog::warn("projected normal fit stopped after {} iterations without converging",
                 result.iterations);
  }
  result.model = unpack(theta, p);
  result.log_likelihood = -fx * static_cast<double>(n);
  spdlog::debug("projected normal fit: {} iterations, log-likelihood {:.6f} (start {:.6f})",
                result.iterations, result.log_likelihood, result.initial_log_likelihood);
  return result;
}

// ---------------------------------------------------------------------------

SplitConformalProjectedNormal SplitConformalProjectedNormal::fit(const Matrix& x,
                                                                 std::span<const Angle> y,
                                                                 const ForestParams& forest,
                                                                 std::uint64_t seed,
                                                                 const PnFitOptions& options) {
  SplitConformalProjectedNormal out;
  out.fit_ = fit_projected_normal(x, y, options);
  std::vector<double> residuals(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    residuals[i] = angular_distance(y[i], pn_predict(out.fit_.model, x.row(i)));
  }
  const auto plan = std::make_shared<const BootstrapPlan>(
      BootstrapPlan::generate(y.size(), forest.trees, seed));
  out.sigma_ = train_forest(x, residuals, plan, forest);
  return out;
}

double SplitConformalProjectedNormal::predict_sigma(std::span<const double> x) const {
  return clamp_sigma(sigma_.predict(x));
}

CalibrationResult SplitConformalProjectedNormal::calibrate(const Matrix& x,
                                                           std::span<const Angle> y,
                                                           double alpha) const {
  return split_conformal_calibrate([this](auto xi) { return predict_center(xi); },
                                   [this](auto xi) { return predict_sigma(xi); }, x, y, alpha);
}

ConformalPrediction SplitConformalProjectedNormal::predict_with_threshold(
    std::span<const double> x, double threshold) const {
  ConformalPrediction p;
  p.center = predict_center(x);
  p.sigma = predict_sigma(x);
  p.epsilon = threshold * p.sigma;
  p.set = build_prediction_set(p.center, p.epsilon);
  return p;
}

}  // namespace circpred
