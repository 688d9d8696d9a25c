#include "team/quadratic.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <lapacke.h>

#include "team/errors.hpp"

namespace team {

void QuadraticModel::validate() const {
  if (H.rows() != g.size() || H.cols() != g.size()) {
    throw ShapeError("Hessian is " + std::to_string(H.rows()) + "x" + std::to_string(H.cols()) +
                     " but gradient has " + std::to_string(g.size()) + " entries");
  }
  if (center && center->size() != g.size()) throw ShapeError("center size != gradient size");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ContractError("quadratic model Hessian is not symmetric");
  }
}

QuadraticModel build_taylor_model(const Model& model, const Image& x, const ObjectiveSpec& obj,
                                  std::ptrdiff_t hessian_cap) {
  QuadraticModel qm;
  qm.c0 = eval_objective(model, x, obj);
  qm.g = input_gradient(model, x, obj);
  qm.H = input_hessian(model, x, obj, hessian_cap);
  qm.center = x;
  if (attack_direction(obj) == Direction::maximize) {
    qm.c0 = -qm.c0;
    qm.g = -qm.g;
    qm.H = -qm.H;
    qm.negated = true;
  }
  return qm;
}

double eval_quadratic(const QuadraticModel& qm, const Vector& delta) {
  if (delta.size() != qm.g.size()) throw ShapeError("delta size != model size");
  return qm.c0 + qm.g.dot(delta) + 0.5 * delta.dot(qm.H * delta);
}

SpectralQuadratic decompose(const QuadraticModel& qm) {
  qm.validate();
  const lapack_int n = static_cast<lapack_int>(qm.size());
  SpectralQuadratic sq;
  sq.eigenvectors = qm.H;
  sq.eigenvalues.resize(n);
  if (n > 0) {
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, sq.eigenvectors.data(),
                                           n, sq.eigenvalues.data());
    if (info != 0) throw NumericError("symmetric eigensolver failed, info=" + std::to_string(info));
  }
  sq.gamma = sq.eigenvectors.transpose() * qm.g;
  sq.g_norm = qm.g.norm();
  const double spread = n > 0 ? sq.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  sq.eig_tol = 1e-10 * std::max(1.0, spread);
  return sq;
}

namespace {

// Components of g smaller than this are treated as exactly zero when deciding
// unboundedness or the hard case.
double gamma_tol(const SpectralQuadratic& sq) { return 1e-10 * std::max(1.0, sq.g_norm); }

// |d(lambda)|^2 for d(lambda) = -(H + 2 lambda I)^+ g, skipping eigen-indices
// in [0, skip).
double secular_norm2(const SpectralQuadratic& sq, double lambda, std::ptrdiff_t skip = 0) {
  double s = 0.0;
  for (std::ptrdiff_t i = skip; i < sq.eigenvalues.size(); ++i) {
    if (sq.gamma[i] == 0.0) continue;
    const double d = sq.eigenvalues[i] + 2.0 * lambda;
    s += sq.gamma[i] * sq.gamma[i] / (d * d);
  }
  return s;
}

// d/dlambda |d(lambda)|^2
double secular_norm2_slope(const SpectralQuadratic& sq, double lambda) {
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < sq.eigenvalues.size(); ++i) {
    if (sq.gamma[i] == 0.0) continue;
    const double d = sq.eigenvalues[i] + 2.0 * lambda;
    s += -4.0 * sq.gamma[i] * sq.gamma[i] / (d * d * d);
  }
  return s;
}

// Root of |d(lambda)|^2 = C on (lo, inf) where the left limit exceeds C.
// Newton on psi(lambda) = 1/|d| - 1/sqrt(C), safeguarded by bisection.
double solve_secular(const SpectralQuadratic& sq, double lo, double C) {
  const double lambda_min = sq.eigenvalues.size() ? sq.eigenvalues[0] : 0.0;
  double hi = std::max(lo, 0.5 * (sq.g_norm / std::sqrt(C) - lambda_min));
  // make sure the upper end is feasible (|d|^2 <= C)
  while (secular_norm2(sq, hi) > C) hi = 2.0 * hi + 1.0;
  double a = lo, b = hi;
  double lambda = b;
  for (int it = 0; it < 200; ++it) {
    const double phi = secular_norm2(sq, lambda);
    if (!(phi > 0.0)) break;
    if (phi > C) {
      a = lambda;
    } else {
      b = lambda;
    }
    if (std::abs(phi - C) <= 1e-15 * C) break;
    const double norm = std::sqrt(phi);
    const double psi = 1.0 / norm - 1.0 / std::sqrt(C);
    const double dpsi = -0.5 * secular_norm2_slope(sq, lambda) / (phi * norm);
    double next = lambda - psi / dpsi;
    if (!(next > a && next < b) || !std::isfinite(next)) next = 0.5 * (a + b);
    if (next == lambda || b - a <= 1e-17 * std::max(1.0, std::abs(b))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

Vector from_eigen(const SpectralQuadratic& sq, const Vector& coords) { return sq.eigenvectors * coords; }

}  // namespace

double dual_value(const SpectralQuadratic& sq, double c0, double lambda, double C) {
  if (lambda < 0.0 || std::isnan(lambda)) throw DomainError("dual variable must be >= 0");
  const double gtol = gamma_tol(sq);
  double quad = 0.0;
  for (std::ptrdiff_t i = 0; i < sq.eigenvalues.size(); ++i) {
    const double d = sq.eigenvalues[i] + 2.0 * lambda;
    if (d < -sq.eig_tol) return kMinusInfinity;
    if (d <= sq.eig_tol) {
      if (std::abs(sq.gamma[i]) > gtol) return kMinusInfinity;
      continue;
    }
    quad += sq.gamma[i] * sq.gamma[i] / d;
  }
  return c0 - 0.5 * quad - lambda * C;
}

double dual_value(const QuadraticModel& qm, double lambda, double C) {
  if (lambda < 0.0 || std::isnan(lambda)) throw DomainError("dual variable must be >= 0");
  return dual_value(decompose(qm), qm.c0, lambda, C);
}

KktCertificate certify(const QuadraticModel& qm, const TrustRegionSolution& sol, double C) {
  KktCertificate cert;
  const Vector r = qm.g + qm.H * sol.delta + 2.0 * sol.lambda * sol.delta;
  cert.stationarity = r.norm();
  const double n2 = sol.delta.squaredNorm();
  cert.complementarity = std::abs(sol.lambda * (n2 - C));
  cert.infeasibility = std::max(0.0, n2 - C);
  cert.duality_gap = sol.primal_value - sol.dual_value;
  cert.g_norm = qm.g.norm();
  return cert;
}

TrustRegionSolution solve_trust_region_l2(const QuadraticModel& qm, double C) {
  if (!(C > 0.0)) throw DomainError("trust-region budget C must be positive");
  return solve_trust_region_l2(qm, decompose(qm), C);
}

TrustRegionSolution solve_trust_region_l2(const QuadraticModel& qm, const SpectralQuadratic& sq,
                                          double C) {
  if (!(C > 0.0)) throw DomainError("trust-region budget C must be positive");
  if (sq.eigenvalues.size() != qm.size()) throw ShapeError("spectral data does not match model");
  const std::ptrdiff_t n = qm.size();
  const double gtol = gamma_tol(sq);
  const double lambda_min = n ? sq.eigenvalues[0] : 0.0;

  TrustRegionSolution sol;
  Vector coords = Vector::Zero(n);

  // Interior candidate: H PSD and the (pseudo-)Newton step fits.
  bool interior = false;
  if (lambda_min >= -sq.eig_tol) {
    bool range_ok = true;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (sq.eigenvalues[i] <= sq.eig_tol) {
        if (std::abs(sq.gamma[i]) > gtol) range_ok = false;
      } else {
        coords[i] = -sq.gamma[i] / sq.eigenvalues[i];
      }
    }
    interior = range_ok && coords.squaredNorm() <= C;
  }

  if (interior) {
    sol.lambda = 0.0;
  } else {
    // Boundary: lambda > max(0, -lambda_min / 2).
    const double lo = std::max(0.0, -0.5 * lambda_min);
    std::ptrdiff_t deficient = 0;  // eigen-indices tied with lambda_min
    while (deficient < n && sq.eigenvalues[deficient] <= lambda_min + sq.eig_tol) ++deficient;
    double deficient_weight = 0.0;
    for (std::ptrdiff_t i = 0; i < deficient; ++i) deficient_weight += std::abs(sq.gamma[i]);

    const bool hard = lambda_min < -sq.eig_tol && deficient_weight <= gtol &&
                      secular_norm2(sq, lo, deficient) <= C;
    coords.setZero();
    if (hard) {
      sol.hard_case = true;
      sol.lambda = lo;
      for (std::ptrdiff_t i = deficient; i < n; ++i) {
        coords[i] = -sq.gamma[i] / (sq.eigenvalues[i] + 2.0 * lo);
      }
      const double rest = std::max(0.0, C - coords.squaredNorm());
      coords[0] = std::sqrt(rest);
    } else {
      sol.lambda = solve_secular(sq, lo, C);
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double d = sq.eigenvalues[i] + 2.0 * sol.lambda;
        coords[i] = d > 0.0 ? -sq.gamma[i] / d : 0.0;
      }
    }
    sol.boundary = true;
  }

  sol.delta = from_eigen(sq, coords);
  Vector Hd = qm.H * sol.delta;
  Vector residual = qm.g + Hd + 2.0 * sol.lambda * sol.delta;

  // One step of iterative refinement on (H + 2 lambda I) d = -g restricted to
  // the well-conditioned eigen-directions, when the residual is not already
  // far below the certificate threshold.
  const double g_norm = qm.g.norm();
  if (residual.norm() > 1e-10 * std::max(1.0, g_norm)) {
    const Vector rc = sq.eigenvectors.transpose() * residual;
    Vector corr = Vector::Zero(n);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const double d = sq.eigenvalues[i] + 2.0 * sol.lambda;
      if (d > std::max(sq.eig_tol, 1e-8 * std::max(1.0, std::abs(sol.lambda)))) corr[i] = -rc[i] / d;
    }
    Vector refined = sol.delta + from_eigen(sq, corr);
    if (refined.squaredNorm() - C <= 1e-12 * C) {
      sol.delta = std::move(refined);
      Hd = qm.H * sol.delta;
    }
  }
  // Never report a point outside the ball because of rounding.
  const double n2 = sol.delta.squaredNorm();
  if (n2 > C) {
    const double scale = std::sqrt(C / n2);
    sol.delta *= scale;
    Hd *= scale;
  }
  residual = qm.g + Hd + 2.0 * sol.lambda * sol.delta;

  sol.primal_value = qm.c0 + qm.g.dot(sol.delta) + 0.5 * sol.delta.dot(Hd);
  sol.dual_value = dual_value(sq, qm.c0, sol.lambda, C);
  const double d2 = sol.delta.squaredNorm();
  sol.certificate.stationarity = residual.norm();
  sol.certificate.complementarity = std::abs(sol.lambda * (d2 - C));
  sol.certificate.infeasibility = std::max(0.0, d2 - C);
  sol.certificate.duality_gap = sol.primal_value - sol.dual_value;
  sol.certificate.g_norm = g_norm;
  KktAudit::global().record(sol.certificate, sol.lambda);
  return sol;
}

KktAudit& KktAudit::global() {
  static KktAudit audit;
  return audit;
}

void KktAudit::record(const KktCertificate& cert, double lambda) {
  std::lock_guard lock(mutex_);
  Summary& s = summary_;
  ++s.solves;
  if (!cert.holds() || lambda < 0.0) ++s.violations;
  s.worst_stationarity_ratio =
      std::max(s.worst_stationarity_ratio, cert.stationarity / (1e-8 * std::max(1.0, cert.g_norm)));
  s.worst_complementarity = std::max(s.worst_complementarity, cert.complementarity);
  s.worst_infeasibility = std::max(s.worst_infeasibility, cert.infeasibility);
  s.worst_duality_gap = std::min(s.worst_duality_gap, cert.duality_gap);
  s.negative_lambda = s.negative_lambda || lambda < 0.0;
}

KktAudit::Summary KktAudit::summary() const {
  std::lock_guard lock(mutex_);
  return summary_;
}

void KktAudit::reset() {
  std::lock_guard lock(mutex_);
  summary_ = Summary{};
}

namespace {

struct Box {
  Vector lo, hi;
};

Box linf_box(const QuadraticModel& qm, double radius) {
  const std::ptrdiff_t n = qm.size();
  Box b{Vector::Constant(n, -radius), Vector::Constant(n, radius)};
  if (qm.center) {
    const Vector& x = qm.center->pixels();
    b.lo = b.lo.cwiseMax(-x);
    b.hi = b.hi.cwiseMin(Vector::Ones(n) - x);
  }
  return b;
}

Vector project(const Vector& d, const Box& b) { return d.cwiseMax(b.lo).cwiseMin(b.hi); }

// Projected gradient descent with monotone step halving. Returns the end
// point and its surrogate value.
std::pair<Vector, double> projected_descent(const QuadraticModel& qm, const Box& box, Vector d,
                                            double step, int iters) {
  Vector Hd = qm.H * d;
  double value = qm.c0 + qm.g.dot(d) + 0.5 * d.dot(Hd);
  for (int it = 0; it < iters; ++it) {
    const Vector grad = qm.g + Hd;
    bool moved = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      Vector cand = project(d - step * grad, box);
      if ((cand - d).cwiseAbs().maxCoeff() <= 1e-15) break;
      Vector Hc = qm.H * cand;
      const double v = qm.c0 + qm.g.dot(cand) + 0.5 * cand.dot(Hc);
      if (v <= value) {
        d = std::move(cand);
        Hd = std::move(Hc);
        value = v;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {std::move(d), value};
}

}  // namespace

Vector solve_linf(const QuadraticModel& qm, double C, int iters) {
  if (!(C > 0.0)) throw DomainError("box budget C must be positive");
  qm.validate();
  const std::ptrdiff_t n = qm.size();
  const double radius = std::sqrt(C);
  const Box box = linf_box(qm, radius);
  const double step = 1.0 / (qm.H.norm() + qm.g.norm() + 1e-12);

  auto [from_zero, v0] = projected_descent(qm, box, Vector::Zero(n), step, iters);
  Vector corner(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    corner[i] = qm.g[i] > 0.0 ? -radius : (qm.g[i] < 0.0 ? radius : 0.0);
  }
  auto [from_corner, v1] = projected_descent(qm, box, project(corner, box), step, iters);
  return v1 < v0 ? from_corner : from_zero;
}

Vector solve_l0(const QuadraticModel& qm, int budget_k, double magnitude) {
  if (budget_k < 1) throw DomainError("L0 budget must be at least 1");
  if (!(magnitude > 0.0)) throw DomainError("L0 step magnitude must be positive");
  qm.validate();
  const std::ptrdiff_t n = qm.size();

  // Admissible +/- step for each coordinate, clipped to the pixel box.
  Vector up = Vector::Constant(n, magnitude);
  Vector down = Vector::Constant(n, -magnitude);
  if (qm.center) {
    const Vector& x = qm.center->pixels();
    up = up.cwiseMin(Vector::Ones(n) - x);
    down = down.cwiseMax(-x);
  }

  Vector d = Vector::Zero(n);
  Vector Hd = Vector::Zero(n);  // H d, kept in sync
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  int count = 0;

  // Change in T when coordinate i moves from its current value to v.
  auto change = [&](std::ptrdiff_t i, double v) {
    const double dv = v - d[i];
    return dv * (qm.g[i] + Hd[i]) + 0.5 * qm.H(i, i) * dv * dv;
  };
  auto assign = [&](std::ptrdiff_t i, double v) {
    const double dv = v - d[i];
    if (dv != 0.0) Hd += dv * qm.H.col(i);
    d[i] = v;
  };
  // Best (coordinate, value, change) among unchosen coordinates.
  auto best_addition = [&]() {
    std::ptrdiff_t bi = -1;
    double bv = 0.0, bc = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (chosen[static_cast<std::size_t>(i)]) continue;
      for (double v : {up[i], down[i]}) {
        if (v == 0.0) continue;
        const double c = change(i, v);
        if (c < bc) {
          bi = i;
          bv = v;
          bc = c;
        }
      }
    }
    return std::tuple{bi, bv, bc};
  };

  while (count < budget_k) {
    auto [i, v, c] = best_addition();
    if (i < 0) break;
    assign(i, v);
    chosen[static_cast<std::size_t>(i)] = true;
    ++count;
  }

  // Swap pass: drop one chosen coordinate, re-add the best candidate.
  constexpr double kImprove = 1e-14;
  for (int pass = 0; pass < 4 * budget_k + 8; ++pass) {
    bool improved = false;
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      if (!chosen[static_cast<std::size_t>(j)]) continue;
      const double old = d[j];
      const double drop = change(j, 0.0);
      assign(j, 0.0);
      chosen[static_cast<std::size_t>(j)] = false;
      auto [i, v, c] = best_addition();
      if (i >= 0 && drop + c < -kImprove) {
        assign(i, v);
        chosen[static_cast<std::size_t>(i)] = true;
        improved = true;
      } else {
        assign(j, old);
        chosen[static_cast<std::size_t>(j)] = true;
      }
    }
    if (!improved) break;
  }
  return d;
}

}  // namespace team
