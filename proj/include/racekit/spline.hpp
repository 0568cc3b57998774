#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "racekit/geometry.hpp"

namespace racekit {

// Periodic cubic spline y(u) with period `period`. Knots must be strictly
// increasing and span less than one period; the closing segment from the
// last knot back to the first is implied. C2 across the seam.
class CyclicCubicSpline {
 public:
  CyclicCubicSpline() = default;

  CyclicCubicSpline(std::vector<double> knots, std::vector<double> values,
                    double period)
      : u_(std::move(knots)), y_(std::move(values)), period_(period) {
    const size_t n = u_.size();
    if (n < 3) throw std::invalid_argument("cyclic spline needs >= 3 knots");
    if (y_.size() != n)
      throw std::invalid_argument("knot/value count mismatch");
    if (!(period_ > 0.0))
      throw std::invalid_argument("spline period must be positive");
    for (size_t i = 0; i + 1 < n; ++i)
      if (!(u_[i + 1] > u_[i]))
        throw std::invalid_argument("spline knots must increase");
    if (!(u_.back() - u_.front() < period_))
      throw std::invalid_argument("spline knots exceed one period");
    solve_moments();
  }

  double period() const { return period_; }

  double eval(double u) const {
    Seg s = locate(u);
    double a = s.h - s.t, b = s.t;
    return m_[s.i] * a * a * a / (6.0 * s.h) +
           m_[s.j] * b * b * b / (6.0 * s.h) +
           (y_[s.j] / s.h - m_[s.j] * s.h / 6.0) * b +
           (y_[s.i] / s.h - m_[s.i] * s.h / 6.0) * a;
  }

  double deriv(double u) const {
    Seg s = locate(u);
    double a = s.h - s.t, b = s.t;
    return -m_[s.i] * a * a / (2.0 * s.h) + m_[s.j] * b * b / (2.0 * s.h) +
           (y_[s.j] - y_[s.i]) / s.h - (m_[s.j] - m_[s.i]) * s.h / 6.0;
  }

  double deriv2(double u) const {
    Seg s = locate(u);
    return m_[s.i] * (s.h - s.t) / s.h + m_[s.j] * s.t / s.h;
  }

 private:
  struct Seg {
    size_t i, j;  // knot indices bounding the segment
    double t, h;  // offset into segment, segment length
  };

  Seg locate(double u) const {
    const size_t n = u_.size();
    double rel = std::fmod(u - u_.front(), period_);
    if (rel < 0.0) rel += period_;
    double uu = u_.front() + rel;
    size_t i =
        std::upper_bound(u_.begin(), u_.end(), uu) - u_.begin();
    i = (i == 0) ? 0 : i - 1;
    if (i >= n - 1 && uu >= u_.back()) {
      // closing segment back to the first knot
      double h = u_.front() + period_ - u_.back();
      return {n - 1, 0, uu - u_.back(), h};
    }
    return {i, i + 1, uu - u_[i], u_[i + 1] - u_[i]};
  }

  // Second derivatives at knots from the periodic C2 conditions: a cyclic
  // tridiagonal system solved via Thomas + Sherman-Morrison.
  void solve_moments() {
    const size_t n = u_.size();
    std::vector<double> h(n);
    for (size_t i = 0; i + 1 < n; ++i) h[i] = u_[i + 1] - u_[i];
    h[n - 1] = u_.front() + period_ - u_.back();

    auto slope = [&](size_t i) {
      size_t j = (i + 1) % n;
      return (y_[j] - y_[i]) / h[i];
    };

    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    for (size_t i = 0; i < n; ++i) {
      size_t p = (i + n - 1) % n;
      lower[i] = h[p] / 6.0;
      diag[i] = (h[p] + h[i]) / 3.0;
      upper[i] = h[i] / 6.0;
      rhs[i] = slope(i) - slope(p);
    }

    // corner entries: A[0][n-1] = lower[0], A[n-1][0] = upper[n-1]
    double beta = lower[0], gamma = upper[n - 1];
    double xi = -diag[0];
    std::vector<double> d2 = diag;
    d2[0] -= xi;
    d2[n - 1] -= gamma * beta / xi;

    auto thomas = [&](const std::vector<double>& b,
                      std::vector<double>& x) {
      std::vector<double> cp(n), dp(n);
      cp[0] = upper[0] / d2[0];
      dp[0] = b[0] / d2[0];
      for (size_t i = 1; i < n; ++i) {
        double m = d2[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / m;
        dp[i] = (b[i] - lower[i] * dp[i - 1]) / m;
      }
      x[n - 1] = dp[n - 1];
      for (size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    };

    std::vector<double> uvec(n, 0.0);
    uvec[0] = xi;
    uvec[n - 1] = gamma;
    std::vector<double> z(n), w(n);
    thomas(rhs, z);
    thomas(uvec, w);
    double vz = z[0] + beta / xi * z[n - 1];
    double vw = w[0] + beta / xi * w[n - 1];
    m_.resize(n);
    double f = vz / (1.0 + vw);
    for (size_t i = 0; i < n; ++i) m_[i] = z[i] - f * w[i];
  }

  std::vector<double> u_, y_, m_;
  double period_ = 0.0;
};

// Closed planar curve c(u) = (x(u), y(u)) built from two cyclic splines
// over a shared parameter.
class ClosedCurve {
 public:
  ClosedCurve() = default;

  ClosedCurve(const std::vector<double>& knots, const std::vector<Vec2>& pts,
              double period) {
    std::vector<double> xs(pts.size()), ys(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      xs[i] = pts[i].x;
      ys[i] = pts[i].y;
    }
    x_ = CyclicCubicSpline(knots, xs, period);
    y_ = CyclicCubicSpline(knots, ys, period);
  }

  double period() const { return x_.period(); }
  Vec2 at(double u) const { return {x_.eval(u), y_.eval(u)}; }
  Vec2 tangent(double u) const { return {x_.deriv(u), y_.deriv(u)}; }
  Vec2 second(double u) const { return {x_.deriv2(u), y_.deriv2(u)}; }

  double speed(double u) const { return tangent(u).norm(); }

  double curvature(double u) const {
    Vec2 t = tangent(u), a = second(u);
    double sp = t.norm();
    return t.cross(a) / (sp * sp * sp);
  }

  // Arc length of the parameter interval [u0, u1] (u1 >= u0), 5-point
  // Gauss-Legendre per subinterval.
  double arc_length(double u0, double u1, int subdivisions = 0) const {
    static const double gx[5] = {-0.9061798459386640, -0.5384693101056831,
                                 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double gw[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    if (u1 <= u0) return 0.0;
    int m = subdivisions > 0
                ? subdivisions
                : std::max(1, static_cast<int>(std::ceil((u1 - u0) / 0.05)));
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
      double a = u0 + (u1 - u0) * k / m;
      double b = u0 + (u1 - u0) * (k + 1) / m;
      double c = 0.5 * (a + b), half = 0.5 * (b - a);
      double acc = 0.0;
      for (int q = 0; q < 5; ++q) acc += gw[q] * speed(c + half * gx[q]);
      total += acc * half;
    }
    return total;
  }

 private:
  CyclicCubicSpline x_, y_;
};

}  // namespace racekit
