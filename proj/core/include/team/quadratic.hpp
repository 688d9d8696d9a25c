#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>

#include "team/derivatives.hpp"
#include "team/image.hpp"
#include "team/network.hpp"
#include "team/objective.hpp"

namespace team {

/// Second-order surrogate T(d) = c0 + g^T d + 1/2 d^T H d around `center`.
///
/// Always posed as a minimization: `build_taylor_model` negates c0, g and H
/// for maximize-direction objectives and records that in `negated`.
struct QuadraticModel {
  double c0 = 0.0;
  Vector g;
  Matrix H;
  std::optional<Image> center;
  bool negated = false;

  std::ptrdiff_t size() const { return g.size(); }
  /// Throws ShapeError on dimension mismatch, ContractError if H is not
  /// symmetric within 1e-9 (relative to max(1, |H|_max)).
  void validate() const;
};

QuadraticModel build_taylor_model(const Model& model, const Image& x, const ObjectiveSpec& obj,
                                  std::ptrdiff_t hessian_cap = kDefaultHessianCap);

double eval_quadratic(const QuadraticModel& qm, const Vector& delta);

/// Eigendecomposition H = Q diag(values) Q^T with gamma = Q^T g, eigenvalues
/// ascending. Computed once per surrogate and reused across budgets.
struct SpectralQuadratic {
  Vector eigenvalues;
  Matrix eigenvectors;
  Vector gamma;
  double g_norm = 0.0;
  double eig_tol = 0.0;  // eigenvalues within this of zero count as singular
};

SpectralQuadratic decompose(const QuadraticModel& qm);

inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

/// Lagrangian dual g(lambda) = inf_d T(d) + lambda (|d|^2 - C).
/// Returns kMinusInfinity when H + 2 lambda I is indefinite, or singular with
/// g having a component in its null space. Throws DomainError for lambda < 0.
double dual_value(const QuadraticModel& qm, double lambda, double C);
double dual_value(const SpectralQuadratic& sq, double c0, double lambda, double C);

/// Optimality certificate of an L2 trust-region solution.
struct KktCertificate {
  double stationarity = 0.0;   // |g + H d + 2 lambda d|_2
  double complementarity = 0.0;  // |lambda (|d|^2 - C)|
  double infeasibility = 0.0;  // max(0, |d|^2 - C)
  double duality_gap = 0.0;    // primal - dual (>= -1e-6 by weak duality)
  double g_norm = 0.0;

  bool stationary() const { return stationarity <= 1e-8 * std::max(1.0, g_norm); }
  bool holds() const {
    return stationary() && complementarity <= 1e-6 && infeasibility <= 1e-9 &&
           duality_gap >= -1e-6;
  }
};

struct TrustRegionSolution {
  Vector delta;
  double lambda = 0.0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  bool boundary = false;
  bool hard_case = false;
  KktCertificate certificate;
};

/// Global minimizer of T over {d : |d|_2^2 <= C}. Throws DomainError for
/// C <= 0, ContractError for non-symmetric H.
TrustRegionSolution solve_trust_region_l2(const QuadraticModel& qm, double C);
TrustRegionSolution solve_trust_region_l2(const QuadraticModel& qm, const SpectralQuadratic& sq,
                                          double C);

KktCertificate certify(const QuadraticModel& qm, const TrustRegionSolution& sol, double C);

/// Process-wide record of every L2 solve's certificate. Tests assert on it.
class KktAudit {
 public:
  struct Summary {
    std::uint64_t solves = 0;
    std::uint64_t violations = 0;
    double worst_stationarity_ratio = 0.0;  // stationarity / (1e-8 max(1,|g|))
    double worst_complementarity = 0.0;
    double worst_infeasibility = 0.0;
    double worst_duality_gap = 0.0;  // most negative primal - dual
    bool negative_lambda = false;
  };

  static KktAudit& global();
  void record(const KktCertificate& cert, double lambda);
  Summary summary() const;
  void reset();

 private:
  mutable std::mutex mutex_;
  Summary summary_;
};

inline constexpr int kDefaultLinfIterations = 200;

/// Approximate minimizer of T over the box |d|_inf <= sqrt(C) by projected
/// gradient descent with step 1/(|H|_F + |g|_2 + eps). The step halves
/// whenever a move would increase T. Runs from d = 0 and from the corner
/// -sqrt(C) sign(g) and keeps the better end point. When the model has a
/// center image the box is also intersected with x + d in [0,1].
Vector solve_linf(const QuadraticModel& qm, double C, int iters = kDefaultLinfIterations);

/// Greedy L0 subproblem: repeatedly set the coordinate whose +-magnitude step
/// most decreases T, up to `budget_k` coordinates or until no step helps,
/// then improve by single-coordinate swaps. Steps are clipped so that
/// center + d stays in [0,1].
Vector solve_l0(const QuadraticModel& qm, int budget_k, double magnitude);

}  // namespace team
