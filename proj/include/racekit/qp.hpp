#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef RACEKIT_QP_TRACE
#include <cstdio>
#endif

namespace racekit {

// Symmetric positive definite matrix with fixed bandwidth, lower-triangle
// band storage: entry(i, b) holds A(i, i-b). Cholesky in place.
class BandedSpd {
 public:
  BandedSpd(int n, int bw) : n_(n), bw_(bw), a_(n * (bw + 1), 0.0) {}

  int size() const { return n_; }
  int bandwidth() const { return bw_; }

  double& entry(int i, int b) { return a_[static_cast<size_t>(i) * (bw_ + 1) + b]; }
  double entry(int i, int b) const {
    return a_[static_cast<size_t>(i) * (bw_ + 1) + b];
  }

  // A(i, j) += v for |i-j| <= bw (symmetric write, pass i >= j).
  void add(int i, int j, double v) {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) throw std::logic_error("banded add outside band");
    entry(i, i - j) += v;
  }

  void set_zero() { std::fill(a_.begin(), a_.end(), 0.0); }

  // In-place banded Cholesky A = L L^T. Returns false if a pivot fails.
  bool factorize() {
    for (int j = 0; j < n_; ++j) {
      double diag = entry(j, 0);
      for (int b = 1; b <= bw_ && j - b >= 0; ++b)
        diag -= entry(j, b) * entry(j, b);
      if (!(diag > 0.0)) return false;
      double ljj = std::sqrt(diag);
      entry(j, 0) = ljj;
      for (int i = j + 1; i <= j + bw_ && i < n_; ++i) {
        double v = entry(i, i - j);
        for (int b = i - j + 1; b <= bw_ && i - b >= 0; ++b) {
          int k = i - b;  // column shared by rows i and j
          if (j - k >= 1 && j - k <= bw_) v -= entry(i, b) * entry(j, j - k);
        }
        entry(i, i - j) = v / ljj;
      }
    }
    return true;
  }

  // Solves L L^T x = b with the stored factor.
  void solve(Eigen::VectorXd& b) const {
    for (int i = 0; i < n_; ++i) {
      double v = b[i];
      for (int k = 1; k <= bw_ && i - k >= 0; ++k)
        v -= entry(i, k) * b[i - k];
      b[i] = v / entry(i, 0);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double v = b[i];
      for (int k = 1; k <= bw_ && i + k < n_; ++k)
        v -= entry(i + k, k) * b[i + k];
      b[i] = v / entry(i, 0);
    }
  }

 private:
  int n_, bw_;
  std::vector<double> a_;
};

// Linear constraint row supported on three consecutive variables starting
// at index i0: lo <= c0*x[i0] + c1*x[i0+1] + c2*x[i0+2] <= hi.
// soft > 0 turns the row into an exact l1 penalty with that weight: the
// solver charges soft * violation instead of enforcing the row, which keeps
// the problem feasible when the rows and the box disagree.
struct TriRow {
  int i0 = 0;
  double c[3] = {0, 0, 0};
  double lo = 0, hi = 0;
  double soft = 0.0;
};

// Box + tri-row QP:  min 1/2 x'Px + q'x  s.t. lb <= x <= ub, rows.
// P is banded SPD-ish (positive semidefinite plus a positive diagonal).
struct BandedQp {
  BandedSpd P;
  Eigen::VectorXd q, lb, ub;
  std::vector<TriRow> rows;

  BandedQp(int n, int bw) : P(n, bw), q(n), lb(n), ub(n) {
    q.setZero();
    lb.setConstant(-1e30);
    ub.setConstant(1e30);
  }
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y_box;   // multipliers for the box rows
  Eigen::VectorXd y_row;   // multipliers for the tri rows
  bool converged = false;
  int iters = 0;
  double prim_res = 0.0, dual_res = 0.0;
  double rho_end = 0.0;  // penalty the solve finished at, reusable as warm
};

struct QpSettings {
  double rho = 10.0;         // initial row penalty
  double eps = 1e-10;        // primal/dual residual target
  int max_iters = 4000;      // cap on inner active-set iterations
  bool polish = true;
  bool adaptive_rho = true;  // grow the penalty when row violation stalls
};

namespace detail {

inline void qp_mat_vec_p(const BandedSpd& P, const Eigen::VectorXd& v,
                         Eigen::VectorXd& out) {
  const int n = P.size(), bw = P.bandwidth();
  out.setZero();
  for (int i = 0; i < n; ++i) {
    double acc = P.entry(i, 0) * v[i];
    for (int b = 1; b <= bw && i - b >= 0; ++b) {
      acc += P.entry(i, b) * v[i - b];
      out[i - b] += P.entry(i, b) * v[i];
    }
    out[i] += acc;
  }
}

// Projected-Newton active-set solver for min 1/2 x'Ax + b'x over a box,
// A banded SPD. Each iteration derives the working set from the point and
// gradient, which releases every wrong bound at once, takes an exact Newton
// step on the free variables through the banded factor, and walks the
// projected path with a piecewise-quadratic line search, so many bounds can
// activate in one iteration. Returns iterations spent, or -1 if a
// factorization failed. x enters as a warm start and leaves at the minimizer.
inline int solve_box_qp(const BandedSpd& A, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                        Eigen::VectorXd& x, int max_iters) {
  const int n = A.size();
  const int bw = A.bandwidth();
  for (int i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], lb[i]), ub[i]);
  const double mtol = 1e-11 * (1.0 + b.lpNorm<Eigen::Infinity>());

  BandedSpd Af(n, bw);
  Eigen::VectorXd g(n), p(n), Ap(n);
  std::vector<char> W(n, 0);
  std::vector<std::pair<double, int>> bp;
  bp.reserve(n);

  int it = 0;
  for (; it < max_iters; ++it) {
    qp_mat_vec_p(A, x, g);
    g += b;
    // binding set: bounds stay put unless the gradient pushes inward by
    // more than noise, so roundoff cannot churn the working set
    double gmax = 0.0;
    for (int i = 0; i < n; ++i) {
      W[i] = (ub[i] - lb[i] < 1e-15) || (x[i] <= lb[i] && g[i] >= -mtol) ||
             (x[i] >= ub[i] && g[i] <= mtol);
      if (!W[i]) gmax = std::max(gmax, std::abs(g[i]));
    }
    if (gmax <= mtol) return it + 1;

    // Newton step on the free set, identity rows pinning the working set
    for (int i = 0; i < n; ++i) {
      Af.entry(i, 0) = W[i] ? 1.0 : A.entry(i, 0);
      for (int bnd = 1; bnd <= bw && i - bnd >= 0; ++bnd)
        Af.entry(i, bnd) = (W[i] || W[i - bnd]) ? 0.0 : A.entry(i, bnd);
      p[i] = W[i] ? 0.0 : -g[i];
    }
    if (!Af.factorize()) return -1;
    Af.solve(p);
    for (int i = 0; i < n; ++i)
      if (W[i]) p[i] = 0.0;

    // exact line search along the projected path: freeze coordinates at the
    // breakpoints where they hit a bound, minimize the quadratic in between
    bp.clear();
    for (int i = 0; i < n; ++i) {
      if (p[i] > 1e-300)
        bp.emplace_back((ub[i] - x[i]) / p[i], i);
      else if (p[i] < -1e-300)
        bp.emplace_back((lb[i] - x[i]) / p[i], i);
    }
    std::sort(bp.begin(), bp.end());
    qp_mat_vec_p(A, p, Ap);
    double dphi = g.dot(p);  // path slope at the current point
    double curv = p.dot(Ap);
    double acur = 0.0;
    bool moved = false;
    size_t nb = 0;
    while (dphi < 0.0) {
      double beta = nb < bp.size() ? std::max(bp[nb].first, acur)
                                   : std::numeric_limits<double>::infinity();
      double step = curv > 0.0 ? -dphi / curv
                               : std::numeric_limits<double>::infinity();
      if (acur + step <= beta) {
        for (int i = 0; i < n; ++i) x[i] += step * p[i];
        moved = moved || step > 0.0;
        break;
      }
      double h = beta - acur;
      if (h > 0.0) {
        for (int i = 0; i < n; ++i) x[i] += h * p[i];
        g += h * Ap;
        dphi += h * curv;
        moved = true;
      }
      int j = bp[nb++].second;
      x[j] = p[j] > 0.0 ? ub[j] : lb[j];
      dphi -= p[j] * g[j];
      curv += A.entry(j, 0) * p[j] * p[j] - 2.0 * p[j] * Ap[j];
      Ap[j] -= A.entry(j, 0) * p[j];
      for (int bnd = 1; bnd <= bw; ++bnd) {
        if (j - bnd >= 0) Ap[j - bnd] -= A.entry(j, bnd) * p[j];
        if (j + bnd < n) Ap[j + bnd] -= A.entry(j + bnd, bnd) * p[j];
      }
      p[j] = 0.0;
      acur = beta;
    }
    for (int i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], lb[i]), ub[i]);
    if (!moved) return it + 1;  // descent exhausted at working precision
  }
  return it;
}

}  // namespace detail

// Method of multipliers on the tri rows around exact banded active-set box
// solves, followed by a polish solving the implied equality-constrained QP
// through the final working set. Row constraints are normalized so the
// penalty acts on comparable scales. Pass a previous result as warm to
// reuse its iterate and multipliers.
inline QpResult solve_banded_qp(const BandedQp& qp, const QpSettings& st = {},
                                const QpResult* warm = nullptr) {
  const int n = qp.P.size();
  const int nc = static_cast<int>(qp.rows.size());
  const int bw = std::max(qp.P.bandwidth(), 2);

  QpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  res.y_box = Eigen::VectorXd::Zero(n);
  res.y_row = Eigen::VectorXd::Zero(nc);
  for (int i = 0; i < n; ++i)
    if (qp.lb[i] > qp.ub[i]) return res;  // empty box, nothing to solve

  // unit-normalized rows; identically zero rows are either trivially
  // satisfied or mark the instance infeasible outright
  std::vector<TriRow> rows(qp.rows);
  Eigen::VectorXd rnorm = Eigen::VectorXd::Ones(nc);
  for (int k = 0; k < nc; ++k) {
    TriRow& r = rows[static_cast<size_t>(k)];
    double s2 = 0.0;
    for (int j = 0; j < 3; ++j)
      if (r.i0 + j < n) s2 += r.c[j] * r.c[j];
    double s = std::sqrt(s2);
    if (s < 1e-300) {
      if (r.lo > 1e-12 || r.hi < -1e-12) return res;  // 0 outside [lo, hi]
      r.lo = -1.0;
      r.hi = 1.0;
      r.c[0] = r.c[1] = r.c[2] = 0.0;
      continue;
    }
    rnorm[k] = s;
    for (int j = 0; j < 3; ++j) r.c[j] /= s;
    r.lo /= s;
    r.hi /= s;
  }

  auto cmul = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    for (int k = 0; k < nc; ++k) {
      const TriRow& r = rows[static_cast<size_t>(k)];
      double acc = 0.0;
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) acc += r.c[j] * x[r.i0 + j];
      out[k] = acc;
    }
  };
  auto ctmul_add = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    for (int k = 0; k < nc; ++k) {
      const TriRow& r = rows[static_cast<size_t>(k)];
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) out[r.i0 + j] += r.c[j] * v[k];
    }
  };

  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i)
    x[i] = std::clamp(0.0, qp.lb[i], qp.ub[i]);
  // multiplier caps realize the l1 rows: |multiplier| <= weight, in the
  // normalized row scale the solver iterates in
  Eigen::VectorXd cap(nc);
  for (int k = 0; k < nc; ++k) {
    double s = qp.rows[static_cast<size_t>(k)].soft;
    cap[k] = s > 0.0 ? s * rnorm[k] : std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(nc);
  if (warm && warm->x.size() == n) {
    for (int i = 0; i < n; ++i)
      x[i] = std::clamp(warm->x[i], qp.lb[i], qp.ub[i]);
    if (warm->y_row.size() == nc)
      for (int k = 0; k < nc; ++k)
        lam[k] = std::clamp(warm->y_row[k] * rnorm[k], -cap[k], cap[k]);
  }

  double rho = std::max(st.rho, 1e-6);
  BandedSpd Paug(n, bw);
  Eigen::VectorXd cx(nc), z(nc), baug(n), tmp(nc), gfull(n);
  double res_best = std::numeric_limits<double>::infinity();
  int no_gain = 0;
  int total_inner = 0;

  if (nc == 0) {
    // pure box problem: one exact solve
    int used = detail::solve_box_qp(qp.P, qp.q, qp.lb, qp.ub, x, st.max_iters);
    if (used < 0) return res;
    res.converged = true;
    res.iters = used;
  } else {
    cmul(x, cx);
    for (int outer = 0; outer < 200 && total_inner < st.max_iters; ++outer) {
      // minimize the augmented Lagrangian by semismooth Newton on the clip
      // pattern: rows whose shifted value sits inside [lo, hi] contribute a
      // constant, so only the rows clipped at an edge enter the quadratic
      int used_outer = 0;
      auto run_passes = [&](double dtol) -> bool {
        for (int pass = 0; pass < 30 && total_inner < st.max_iters; ++pass) {
          Paug.set_zero();
          for (int i = 0; i < n; ++i)
            for (int b = 0; b <= qp.P.bandwidth() && i - b >= 0; ++b)
              Paug.entry(i, b) = qp.P.entry(i, b);
          baug = qp.q;
          for (int k = 0; k < nc; ++k) {
            const TriRow& r = rows[static_cast<size_t>(k)];
            double s = cx[k] + lam[k] / rho;
            z[k] = std::clamp(s, r.lo, r.hi);
            if (s > r.lo && s < r.hi) continue;
            double w = lam[k] - rho * z[k];
            for (int a = 0; a < 3; ++a) {
              if (r.i0 + a >= n) continue;
              baug[r.i0 + a] += r.c[a] * w;
              for (int b = 0; b <= a; ++b)
                Paug.add(r.i0 + a, r.i0 + b, rho * r.c[a] * r.c[b]);
            }
          }
          int used = detail::solve_box_qp(Paug, baug, qp.lb, qp.ub, x,
                                          st.max_iters - total_inner);
          if (used < 0) return false;
          total_inner += used;
          used_outer += used;
          cmul(x, cx);
          double drift = 0.0;
          for (int k = 0; k < nc; ++k) {
            double zk = std::clamp(cx[k] + lam[k] / rho,
                                   rows[static_cast<size_t>(k)].lo,
                                   rows[static_cast<size_t>(k)].hi);
            drift = std::max(drift, std::abs(zk - z[k]));
          }
          if (drift < dtol) break;
        }
        return true;
      };
      auto measure = [&]() -> double {
        double rkkt = 0.0;
        for (int k = 0; k < nc; ++k) {
          z[k] = std::clamp(cx[k] + lam[k] / rho,
                            rows[static_cast<size_t>(k)].lo,
                            rows[static_cast<size_t>(k)].hi);
          double ln =
              std::clamp(lam[k] + rho * (cx[k] - z[k]), -cap[k], cap[k]);
          rkkt = std::max(rkkt, std::abs(ln - lam[k]) / rho);
        }
        return rkkt;
      };

      // loose inner tolerance while the outer error is large, exact once it
      // matters; a convergence claim is only trusted at the tight setting
      const double tight = std::max(0.05 * st.eps, 1e-14);
      double dtol = std::max(tight, std::min(1e-3, 0.05 * res_best));
      if (!run_passes(dtol)) return res;
      double rkkt = measure();
      if (rkkt < 10.0 * st.eps && dtol > tight) {
        if (!run_passes(tight)) return res;
        rkkt = measure();
      }

      // capped multiplier step; its length is the remaining KKT error
      // (violation on enforced rows, complementarity slip on the rest)
      double prim = 0.0;
      for (int k = 0; k < nc; ++k) {
        lam[k] = std::clamp(lam[k] + rho * (cx[k] - z[k]), -cap[k], cap[k]);
        if (!(qp.rows[static_cast<size_t>(k)].soft > 0.0)) {
          const TriRow& r = rows[static_cast<size_t>(k)];
          prim = std::max({prim, r.lo - cx[k], cx[k] - r.hi});
        }
      }
      prim = std::max(prim, 0.0);
      res.prim_res = prim;
      res.dual_res = rkkt;
#ifdef RACEKIT_QP_TRACE
      std::fprintf(stderr, "  qp outer=%d inner=%d prim=%.3g rkkt=%.3g rho=%.3g\n",
                   outer, used_outer, prim, rkkt, rho);
#endif
      if (rkkt < st.eps) {
        res.converged = true;
        break;
      }
      // grow the penalty when progress stalls; give up once it is saturated
      // and the error is still flat (hard rows the box cannot satisfy)
      if (rkkt > 0.25 * res_best) {
        if (st.adaptive_rho && rho < 1e9) {
          rho = std::min(rho * 10.0, 1e9);
        } else if (++no_gain >= 3) {
          break;
        }
      } else {
        no_gain = 0;
      }
      res_best = std::min(res_best, rkkt);
    }
    res.iters = total_inner;
  }
  res.rho_end = rho;

  res.x = x;
  res.y_row = lam.cwiseQuotient(rnorm);  // back to the caller's row scale
  // box multipliers close the stationarity identity at the active bounds
  detail::qp_mat_vec_p(qp.P, x, gfull);
  gfull += qp.q;
  {
    Eigen::VectorXd cty = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < nc; ++k) {
      const TriRow& r = qp.rows[static_cast<size_t>(k)];
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) cty[r.i0 + j] += r.c[j] * res.y_row[k];
    }
    gfull += cty;
  }
  for (int i = 0; i < n; ++i) {
    bool lo_act = x[i] - qp.lb[i] < 1e-9;
    bool hi_act = qp.ub[i] - x[i] < 1e-9;
    res.y_box[i] = (lo_act || hi_act) ? -gfull[i] : 0.0;
  }

  if (!st.polish || !res.converged) return res;
  for (int k = 0; k < nc; ++k) {
    double s = qp.rows[static_cast<size_t>(k)].soft;
    // a multiplier pinned at its cap means the solution sits on the l1
    // kink; the equality polish below would misplace it
    if (s > 0.0 && std::abs(res.y_row[k]) >= s * (1.0 - 1e-9)) return res;
  }

  // names the polish below expects
  Eigen::VectorXd zx = x, yx = res.y_box, yc = res.y_row, zc(nc);
  {
    Eigen::VectorXd craw(nc);
    for (int k = 0; k < nc; ++k) {
      const TriRow& r = qp.rows[static_cast<size_t>(k)];
      double acc = 0.0;
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) acc += r.c[j] * x[r.i0 + j];
      zc[k] = std::clamp(acc, r.lo, r.hi);
    }
  }

  // Active-set polish: fix box-active variables, treat row-active
  // constraints as equalities, solve the reduced KKT exactly through the
  // banded factor of P restricted to free variables.
  const double atol = 1e-7;
  std::vector<int> fixed(n, 0);
  Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (qp.ub[i] - qp.lb[i] < 1e-15 || (zx[i] - qp.lb[i] < atol && yx[i] < 0.0)) {
      fixed[i] = 1;
      xfix[i] = qp.lb[i];
    } else if (qp.ub[i] - zx[i] < atol && yx[i] > 0.0) {
      fixed[i] = 1;
      xfix[i] = qp.ub[i];
    }
  }
  std::vector<int> act;
  for (int k = 0; k < nc; ++k) {
    const TriRow& r = qp.rows[static_cast<size_t>(k)];
    bool lo_act = (zc[k] - r.lo < atol && yc[k] < 0.0);
    bool hi_act = (r.hi - zc[k] < atol && yc[k] > 0.0);
    if (lo_act || hi_act) act.push_back(k);
  }

  const int na = static_cast<int>(act.size());
  // P restricted to free variables stays banded; build with unit diagonal
  // rows for fixed variables so indexing is unchanged.
  BandedSpd Pf(n, qp.P.bandwidth());
  for (int i = 0; i < n; ++i) {
    if (fixed[i]) {
      Pf.entry(i, 0) = 1.0;
      continue;
    }
    Pf.entry(i, 0) = qp.P.entry(i, 0) + 1e-12;
    for (int b = 1; b <= qp.P.bandwidth() && i - b >= 0; ++b)
      Pf.entry(i, b) = fixed[i - b] ? 0.0 : qp.P.entry(i, b);
  }
  if (!Pf.factorize()) return res;

  // qf = q + P * xfix restricted to free vars
  Eigen::VectorXd qf(n);
  detail::qp_mat_vec_p(qp.P, xfix, qf);
  qf += qp.q;
  for (int i = 0; i < n; ++i)
    if (fixed[i]) qf[i] = 0.0;

  Eigen::VectorXd xp = -qf;
  Pf.solve(xp);

  Eigen::VectorXd lam_act;
  Eigen::MatrixXd V;  // P_f^{-1} C_act^T columns
  if (na > 0) {
    V.resize(n, na);
    Eigen::VectorXd col(n);
    Eigen::VectorXd rhs_a(na);
    for (int a = 0; a < na; ++a) {
      const TriRow& r = qp.rows[static_cast<size_t>(act[static_cast<size_t>(a)])];
      col.setZero();
      double target = (yc[act[static_cast<size_t>(a)]] < 0.0) ? r.lo : r.hi;
      double off = 0.0;
      for (int j = 0; j < 3; ++j) {
        int idx = r.i0 + j;
        if (idx >= n) continue;
        if (fixed[idx])
          off += r.c[j] * xfix[idx];
        else
          col[idx] = r.c[j];
      }
      rhs_a[a] = target - off;
      Pf.solve(col);
      V.col(a) = col;
    }
    Eigen::MatrixXd S(na, na);
    Eigen::VectorXd cxp(na);
    for (int a = 0; a < na; ++a) {
      const TriRow& ra = qp.rows[static_cast<size_t>(act[static_cast<size_t>(a)])];
      double acc = 0.0;
      for (int j = 0; j < 3; ++j)
        if (ra.i0 + j < n && !fixed[ra.i0 + j])
          acc += ra.c[j] * xp[ra.i0 + j];
      cxp[a] = acc;
      for (int b = 0; b < na; ++b) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j)
          if (ra.i0 + j < n && !fixed[ra.i0 + j])
            s += ra.c[j] * V(ra.i0 + j, b);
        S(a, b) = s;
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> sl(S);
    if (sl.info() != Eigen::Success) return res;
    lam_act = sl.solve(rhs_a - cxp);
    xp += V * lam_act;
  }

  Eigen::VectorXd xpol = xfix;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) xpol[i] = xp[i];

  // Accept the polish only if it stays feasible where the iteration was.
  double vi = 0.0;
  for (int i = 0; i < n; ++i)
    vi = std::max({vi, qp.lb[i] - xpol[i], xpol[i] - qp.ub[i]});
  for (int k = 0; k < nc; ++k) {
    const TriRow& r = qp.rows[static_cast<size_t>(k)];
    double acc = 0.0;
    for (int j = 0; j < 3; ++j)
      if (r.i0 + j < n) acc += r.c[j] * xpol[r.i0 + j];
    vi = std::max({vi, r.lo - acc, acc - r.hi});
  }
  if (vi <= 1e-9) {
    res.x = xpol;
    res.converged = true;
    res.y_row.setZero();
    for (int a = 0; a < na; ++a)
      res.y_row[act[static_cast<size_t>(a)]] = lam_act[a];
    // box multipliers from exact stationarity on fixed coordinates
    Eigen::VectorXd grad(n);
    detail::qp_mat_vec_p(qp.P, xpol, grad);
    grad += qp.q;
    for (int k = 0; k < nc; ++k) {
      const TriRow& r = qp.rows[static_cast<size_t>(k)];
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) grad[r.i0 + j] += r.c[j] * res.y_row[k];
    }
    for (int i = 0; i < n; ++i) res.y_box[i] = fixed[i] ? -grad[i] : 0.0;
  }
  return res;
}

}  // namespace racekit
