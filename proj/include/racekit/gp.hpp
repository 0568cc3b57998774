#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace racekit {

enum class KernelType { Matern52, Rbf };

struct GpHyper {
  double length_scale = 2.0;
  double signal_var = 1.0;
  double noise_var = 1e-3;
};

// Exact GP regression in one periodic input dimension. Distances wrap
// around the period, so predictions are seamless across the lap line.
class PeriodicGp {
 public:
  PeriodicGp() = default;

  PeriodicGp(KernelType kernel, GpHyper hyper, double period,
             Eigen::VectorXd train_s, Eigen::VectorXd train_y)
      : kernel_(kernel),
        hyper_(hyper),
        period_(period),
        s_(std::move(train_s)),
        y_(std::move(train_y)) {
    if (s_.size() != y_.size() || s_.size() == 0)
      throw std::invalid_argument("gp: bad training arrays");
    if (!(period_ > 0.0)) throw std::invalid_argument("gp: bad period");
    if (!(hyper_.length_scale > 0.0) || !(hyper_.signal_var > 0.0) ||
        !(hyper_.noise_var >= 0.0))
      throw std::invalid_argument("gp: bad hyperparameters");
    factorize();
  }

  double mean(double s) const {
    const Eigen::Index n = s_.size();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += kval(s, s_[i]) * alpha_[i];
    return acc;
  }

  // Posterior variance of the latent function (no observation noise).
  double latent_var(double s) const {
    const Eigen::Index n = s_.size();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = kval(s, s_[i]);
    Eigen::VectorXd v = llt_.matrixL().solve(ks);
    double var = hyper_.signal_var - v.squaredNorm();
    return std::max(var, 0.0);
  }

  double predictive_var(double s) const {
    return latent_var(s) + hyper_.noise_var;
  }

  double log_marginal() const { return lml_; }
  const GpHyper& hyper() const { return hyper_; }
  KernelType kernel() const { return kernel_; }
  double period() const { return period_; }
  const Eigen::VectorXd& inputs() const { return s_; }
  const Eigen::VectorXd& targets() const { return y_; }

  double kval(double a, double b) const {
    double r = std::abs(a - b);
    r = std::fmod(r, period_);
    r = std::min(r, period_ - r);
    double l = hyper_.length_scale;
    if (kernel_ == KernelType::Rbf)
      return hyper_.signal_var * std::exp(-0.5 * r * r / (l * l));
    double q = std::sqrt(5.0) * r / l;
    return hyper_.signal_var * (1.0 + q + q * q / 3.0) * std::exp(-q);
  }

 private:
  void factorize() {
    const Eigen::Index n = s_.size();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        double v = kval(s_[i], s_[j]);
        K(i, j) = v;
        K(j, i) = v;
      }
    // Jitter ladder: dense bins can make the wrapped-metric kernel matrix
    // numerically semidefinite.
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
      Eigen::MatrixXd Kn = K;
      Kn.diagonal().array() += hyper_.noise_var + jitter;
      llt_.compute(Kn);
      if (llt_.info() == Eigen::Success) {
        // reject factorizations with non-positive pivots that sneak through
        double min_diag = llt_.matrixLLT().diagonal().minCoeff();
        if (min_diag > 0.0) break;
      }
      if (jitter == 0.0)
        jitter = 1e-10;
      else
        jitter *= 10.0;
      if (jitter > 1e-6)
        throw std::runtime_error(
            "gp: kernel factorization failed after jitter escalation");
    }
    alpha_ = llt_.solve(y_);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      logdet += std::log(llt_.matrixLLT()(i, i));
    lml_ = -0.5 * y_.dot(alpha_) - logdet -
           0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  }

  KernelType kernel_ = KernelType::Rbf;
  GpHyper hyper_;
  double period_ = 1.0;
  Eigen::VectorXd s_, y_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

// Coarse log-marginal-likelihood grid search over length-scale and noise.
// Signal variance is tied to the sample variance of the targets. When the
// training set is large the grid is scored on a stride subsample and only
// the winner is refit in full.
inline PeriodicGp fit_gp_grid(KernelType kernel, double period,
                              const Eigen::VectorXd& s,
                              const Eigen::VectorXd& y,
                              const std::vector<double>& length_scales,
                              const std::vector<double>& noise_vars) {
  if (length_scales.empty() || noise_vars.empty())
    throw std::invalid_argument("gp grid: empty hyperparameter grid");
  double mean_y = y.mean();
  double var_y =
      (y.array() - mean_y).square().sum() / std::max<double>(1, y.size());
  double signal = std::max(var_y, 1e-6);

  const Eigen::Index n = s.size();
  Eigen::Index stride = std::max<Eigen::Index>(1, n / 120);
  Eigen::Index m = (n + stride - 1) / stride;
  Eigen::VectorXd ss(m), ys(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ss[i] = s[i * stride];
    ys[i] = y[i * stride];
  }

  std::vector<std::pair<double, GpHyper>> scored;
  for (double ls : length_scales)
    for (double nv : noise_vars) {
      GpHyper h{ls, signal, nv};
      try {
        PeriodicGp g(kernel, h, period, ss, ys);
        scored.emplace_back(g.log_marginal(), h);
      } catch (const std::runtime_error&) {
        // grid point numerically hopeless, skip it
      }
    }
  if (scored.empty())
    throw std::runtime_error("gp grid: no factorizable hyperparameters");
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  // The full training set is denser than the scoring subsample, so the
  // winner can still fail to factorize; walk down the ranking until one
  // holds up.
  for (const auto& [lml, h] : scored) {
    try {
      return PeriodicGp(kernel, h, period, s, y);
    } catch (const std::runtime_error&) {
    }
  }
  throw std::runtime_error("gp grid: no factorizable hyperparameters");
}

}  // namespace racekit
