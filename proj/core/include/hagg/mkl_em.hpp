#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hagg/kernels.hpp"
#include "hagg/svm.hpp"

namespace hagg {

/// Which problem the weight step descends.
///  - saddle: J(beta) = sum_c max_alpha [1^T alpha - 1/2 a_c^T K_beta a_c], the
///    standard multiple-kernel objective; the weight step follows the
///    Frank-Wolfe vertex of grad J with a damped, backtracked step so J never
///    increases.
///  - joint: F(beta, alpha) = sum_c [1/2 a_c^T K_beta a_c - 1^T alpha]
///    minimized over both blocks: a linear program over the simplex for
///    concatenation, a convex quadratic program for averaging.
enum class BetaObjective { saddle, joint };

std::string_view to_string(BetaObjective objective) noexcept;
BetaObjective parse_beta_objective(std::string_view text);

struct EmConfig {
  int max_iters = 50;
  double param_tol = 1e-4;
  double eta = 0.5;
  BetaObjective objective = BetaObjective::saddle;
  int max_backtracks = 10;
};

void validate(const EmConfig& cfg);

/// Coefficients of the weight subproblem with alpha fixed, where a_c = alpha^c o y_c.
///   linear[p]       = 1/2 sum_c a_c^T kappa_p a_c           (concatenation)
///   quadratic(p, q) = sum_c a_c^T kappa_pq a_c              (averaging)
/// so that 1/2 sum_c a_c^T K_beta a_c equals <linear, beta> or 1/2 beta^T Q beta.
struct BetaCoefficients {
  std::vector<double> linear;
  Eigen::MatrixXd quadratic;
};

/// signed_alphas[c] holds alpha^c o y_c over the table's videos.
BetaCoefficients beta_objective_coeffs(const NodeKernelTable& table,
                                       std::span<const std::vector<double>> signed_alphas);

BetaCoefficients beta_objective_coeffs(const NodeKernelTable& table, const SvmModel& model);

/// One damped step toward the simplex vertex minimizing <coeffs, beta>
/// (ties to the smallest index): (1 - eta) beta_prev + eta e.
std::vector<double> beta_step_concat(std::span<const double> coeffs, std::span<const double> beta_prev, double eta);

/// One Frank-Wolfe step on 1/2 beta^T M beta with exact line search clipped
/// to [0, eta]. Throws NotPSD when M has an eigenvalue below -1e-8.
std::vector<double> beta_step_averaging(const Eigen::MatrixXd& quadratic, std::span<const double> beta_prev,
                                        double eta);

/// Frank-Wolfe duality gap of 1/2 beta^T M beta at beta.
double frank_wolfe_gap(const Eigen::MatrixXd& quadratic, std::span<const double> beta);

struct EmTraceRow {
  int iteration = 0;
  double objective = 0.0;
  double entropy = 0.0;
  std::vector<double> beta;
};

struct EmResult {
  std::vector<double> beta;
  SvmModel model;
  std::vector<EmTraceRow> trace;
  int iterations = 0;
  bool converged = false;
};

/// Receives every weight vector the procedure produces, including rejected
/// line-search candidates.
using BetaObserver = std::function<void(std::span<const double> beta)>;

double beta_entropy(std::span<const double> beta);

/// Alternates one-vs-rest dual solves with weight steps until the weights
/// and duals stop moving (param_tol) or max_iters is reached. The returned
/// model is a fresh solve at the final weights.
EmResult em_fit(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                const KernelConfig& kernel, const EmConfig& em, const TrainConfig& svm,
                const BetaObserver& observer = {});

}  // namespace hagg
