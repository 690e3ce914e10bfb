#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace sokid {

/// Translation-invariant drift kernel K(x, y) = exp(-(x - y)^2 / (2 h^2)).
class GaussianKernel {
 public:
  /// Throws Error(validation) unless bandwidth > 0 and finite.
  explicit GaussianKernel(double bandwidth = 1.0);

  double bandwidth() const noexcept { return bandwidth_; }

  double operator()(double x, double y) const noexcept {
    const double d = x - y;
    return std::exp(-d * d * inv_two_h2_);
  }

  bool operator==(const GaussianKernel& other) const noexcept {
    return bandwidth_ == other.bandwidth_;
  }

 private:
  double bandwidth_;
  double inv_two_h2_;
};

inline double eval_gaussian(const GaussianKernel& kern, double x, double y) {
  return kern(x, y);
}

/// Monomial feature map phi(x) = (1, x, ..., x^{p-1}).
class FeatureMap {
 public:
  /// Throws Error(validation) unless p >= 1.
  explicit FeatureMap(int p = 2);

  int dimension() const noexcept { return p_; }

  Eigen::VectorXd operator()(double x) const {
    Eigen::VectorXd phi(p_);
    double power = 1.0;
    for (int m = 0; m < p_; ++m) {
      phi(m) = power;
      power *= x;
    }
    return phi;
  }

  bool operator==(const FeatureMap& other) const noexcept {
    return p_ == other.p_;
  }

 private:
  int p_;
};

inline Eigen::VectorXd features(const FeatureMap& spec, double x) {
  return spec(x);
}

/// K'(x, y) = phi(x)^T phi(y).
inline double eval_explicit(const FeatureMap& spec, double x, double y) {
  return spec(x).dot(spec(y));
}

/// K''(x, y) = (phi(x)^T phi(y))^2.
inline double eval_squared(const FeatureMap& spec, double x, double y) {
  const double k = eval_explicit(spec, x, y);
  return k * k;
}

}  // namespace sokid
