#include "hagg/mkl_em.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "hagg/error.hpp"
#include "hagg/parallel.hpp"
#include "hagg/simplex.hpp"

namespace hagg {

std::string_view to_string(BetaObjective objective) noexcept {
  return objective == BetaObjective::saddle ? "saddle" : "joint";
}

BetaObjective parse_beta_objective(std::string_view text) {
  if (text == "saddle") return BetaObjective::saddle;
  if (text == "joint") return BetaObjective::joint;
  fail(Errc::invalid_config, "unknown weight objective '" + std::string(text) + "'");
}

void validate(const EmConfig& cfg) {
  if (cfg.max_iters < 0) fail(Errc::invalid_config, "max_iters must be non-negative");
  if (!(cfg.param_tol > 0.0)) fail(Errc::invalid_config, "param_tol must be positive");
  if (!(cfg.eta > 0.0 && cfg.eta <= 1.0)) fail(Errc::invalid_config, "eta must lie in (0, 1]");
  if (cfg.max_backtracks < 0) fail(Errc::invalid_config, "max_backtracks must be non-negative");
}

BetaCoefficients beta_objective_coeffs(const NodeKernelTable& table,
                                       std::span<const std::vector<double>> signed_alphas) {
  const std::size_t n = table.rows();
  if (table.cols() != n) fail(Errc::shape_mismatch, "weight coefficients need a square node-kernel table");
  for (const auto& a : signed_alphas) {
    if (a.size() != n) fail(Errc::shape_mismatch, "dual vector size does not match the kernel table");
  }
  const std::size_t nodes = table.node_count();
  const bool concat = table.variant() == CombineVariant::concatenation;

  // videos that carry weight in at least one machine
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::any_of(signed_alphas.begin(), signed_alphas.end(), [i](const auto& a) { return a[i] != 0.0; })) {
      support.push_back(i);
    }
  }

  // per-row partial sums, reduced in a fixed order below
  const std::size_t width = table.block_size();
  std::vector<std::vector<double>> partial(support.size());
  parallel_for(support.size(), [&](std::size_t si) {
    const std::size_t i = support[si];
    std::vector<double> acc(width, 0.0);
    std::vector<double> scratch;
    for (std::size_t j : support) {
      double w = 0.0;
      for (const auto& a : signed_alphas) w += a[i] * a[j];
      if (w == 0.0) continue;
      const auto block = table.block(i, j, scratch);
      for (std::size_t e = 0; e < width; ++e) acc[e] += w * block[e];
    }
    partial[si] = std::move(acc);
  });

  std::vector<double> total(width, 0.0);
  for (const auto& acc : partial) {
    for (std::size_t e = 0; e < width; ++e) total[e] += acc[e];
  }

  BetaCoefficients out;
  if (concat) {
    out.linear.resize(nodes);
    for (std::size_t p = 0; p < nodes; ++p) out.linear[p] = 0.5 * total[p];
  } else {
    const auto m = static_cast<Eigen::Index>(nodes);
    out.quadratic.resize(m, m);
    for (Eigen::Index p = 0; p < m; ++p) {
      for (Eigen::Index q = 0; q < m; ++q) {
        // a^T kappa_pq a = a^T kappa_qp a; average the two orders so M is exactly symmetric
        const double pq = total[static_cast<std::size_t>(p * m + q)];
        const double qp = total[static_cast<std::size_t>(q * m + p)];
        out.quadratic(p, q) = 0.5 * (pq + qp);
      }
    }
  }
  return out;
}

namespace {

std::vector<std::vector<double>> signed_alphas_of(const SvmModel& model) {
  std::vector<std::vector<double>> out;
  out.reserve(model.machines.size());
  for (const auto& machine : model.machines) {
    std::vector<double> a(machine.alpha.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = machine.alpha[i] * model.y(machine.class_id, i);
    out.push_back(std::move(a));
  }
  return out;
}

void check_step_inputs(std::span<const double> beta_prev, double eta) {
  if (!on_simplex(beta_prev)) fail(Errc::not_on_simplex, "weight step must start on the simplex");
  if (!(eta > 0.0 && eta <= 1.0)) fail(Errc::invalid_config, "eta must lie in (0, 1]");
}

std::size_t argmin_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

}  // namespace

BetaCoefficients beta_objective_coeffs(const NodeKernelTable& table, const SvmModel& model) {
  if (model.training_ids.size() != table.rows()) fail(Errc::shape_mismatch, "model and kernel table disagree");
  const auto signed_alphas = signed_alphas_of(model);
  return beta_objective_coeffs(table, signed_alphas);
}

std::vector<double> beta_step_concat(std::span<const double> coeffs, std::span<const double> beta_prev, double eta) {
  if (coeffs.size() != beta_prev.size()) fail(Errc::shape_mismatch, "coefficients and weights differ in size");
  for (double c : coeffs) {
    if (!std::isfinite(c)) fail(Errc::non_finite, "weight-step coefficient is not finite");
  }
  check_step_inputs(beta_prev, eta);
  const std::size_t vertex = argmin_index(coeffs);
  std::vector<double> beta(beta_prev.size());
  for (std::size_t p = 0; p < beta.size(); ++p) beta[p] = (1.0 - eta) * beta_prev[p] + (p == vertex ? eta : 0.0);
  return beta;
}

double frank_wolfe_gap(const Eigen::MatrixXd& quadratic, std::span<const double> beta) {
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
  const Eigen::VectorXd grad = quadratic * b;
  return grad.dot(b) - grad.minCoeff();
}

std::vector<double> beta_step_averaging(const Eigen::MatrixXd& quadratic, std::span<const double> beta_prev,
                                        double eta) {
  const auto n = static_cast<Eigen::Index>(beta_prev.size());
  if (quadratic.rows() != n || quadratic.cols() != n) fail(Errc::shape_mismatch, "quadratic term has the wrong size");
  if (!quadratic.allFinite()) fail(Errc::non_finite, "quadratic term is not finite");
  check_step_inputs(beta_prev, eta);
  const double scale = std::max(1.0, quadratic.cwiseAbs().maxCoeff());
  if ((quadratic - quadratic.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    fail(Errc::not_psd, "quadratic term is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(quadratic, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
    fail(Errc::not_psd, "quadratic term has eigenvalue " + std::to_string(eig.eigenvalues().minCoeff()));
  }

  const Eigen::Map<const Eigen::VectorXd> b(beta_prev.data(), n);
  const Eigen::VectorXd grad = quadratic * b;
  Eigen::Index vertex = 0;
  for (Eigen::Index p = 1; p < n; ++p) {
    if (grad(p) < grad(vertex)) vertex = p;
  }
  const double gap = grad.dot(b) - grad(vertex);
  std::vector<double> beta(beta_prev.begin(), beta_prev.end());
  if (gap <= 1e-10 * scale) return beta;

  Eigen::VectorXd direction = -b;
  direction(vertex) += 1.0;
  const double curvature = direction.dot(quadratic * direction);
  double step = curvature > 0.0 ? gap / curvature : eta;
  step = std::clamp(step, 0.0, eta);
  for (Eigen::Index p = 0; p < n; ++p) {
    beta[static_cast<std::size_t>(p)] = (1.0 - step) * beta_prev[static_cast<std::size_t>(p)] + (p == vertex ? step : 0.0);
  }
  return beta;
}

double beta_entropy(std::span<const double> beta) {
  double h = 0.0;
  for (double b : beta) {
    if (b > 0.0) h -= b * std::log(b);
  }
  return h;
}

namespace {

struct AlphaStep {
  SvmModel model;
  double joint = 0.0;  // sum_c [1/2 a^T K a - 1^T alpha]
};

AlphaStep solve_alphas(const NodeKernelTable& table, const std::vector<std::string>& ids,
                       std::span<const int> labels, std::span<const double> beta, const TrainConfig& svm,
                       std::span<const std::vector<double>> warm) {
  GramMatrix gram{ids, table.combine(beta)};
  AlphaStep step{train_one_vs_rest(gram, labels, svm, warm), 0.0};
  for (const auto& machine : step.model.machines) step.joint += machine.objective;
  return step;
}

std::vector<std::vector<double>> alphas_of(const SvmModel& model) {
  std::vector<std::vector<double>> out;
  for (const auto& machine : model.machines) out.push_back(machine.alpha);
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

EmResult em_fit(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                const KernelConfig& kernel, const EmConfig& em, const TrainConfig& svm, const BetaObserver& observer) {
  validate(em);
  validate(svm);
  validate(kernel);
  if (trees.size() != labels.size()) fail(Errc::shape_mismatch, "one label per tree is required");
  if (trees.size() < 2) fail(Errc::too_few_videos, "EM training needs at least 2 videos");

  const NodeKernelTable table(trees, variant, kernel);
  std::vector<std::string> ids;
  for (const auto& t : trees) ids.push_back(t.video_id);
  const std::size_t nodes = table.node_count();

  auto sign = [&](double joint) { return em.objective == BetaObjective::saddle ? -joint : joint; };

  std::vector<double> beta(nodes, 1.0 / static_cast<double>(nodes));
  if (observer) observer(beta);
  AlphaStep current = solve_alphas(table, ids, labels, beta, svm, {});
  double objective = sign(current.joint);

  EmResult result;
  result.trace.push_back({0, objective, beta_entropy(beta), beta});

  for (int iter = 1; iter <= em.max_iters; ++iter) {
    if (nodes == 1) {
      result.converged = true;
      break;
    }
    const auto coeffs = beta_objective_coeffs(table, current.model);
    const auto warm = alphas_of(current.model);

    std::vector<double> next_beta;
    AlphaStep next;
    bool moved = false;
    try {
      if (em.objective == BetaObjective::joint) {
        next_beta = variant == CombineVariant::concatenation ? beta_step_concat(coeffs.linear, beta, em.eta)
                                                             : beta_step_averaging(coeffs.quadratic, beta, em.eta);
        if (observer) observer(next_beta);
        next = solve_alphas(table, ids, labels, next_beta, svm, warm);
        moved = true;
      } else {
        std::vector<double> grad(nodes);
        if (variant == CombineVariant::concatenation) {
          for (std::size_t p = 0; p < nodes; ++p) grad[p] = -coeffs.linear[p];
        } else {
          const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(nodes));
          const Eigen::VectorXd mb = coeffs.quadratic * b;
          for (std::size_t p = 0; p < nodes; ++p) grad[p] = -mb(static_cast<Eigen::Index>(p));
        }
        double eta = em.eta;
        for (int attempt = 0; attempt <= em.max_backtracks; ++attempt, eta *= 0.5) {
          auto candidate = beta_step_concat(grad, beta, eta);
          if (observer) observer(candidate);
          auto solved = solve_alphas(table, ids, labels, candidate, svm, warm);
          if (sign(solved.joint) <= objective) {
            next_beta = std::move(candidate);
            next = std::move(solved);
            moved = true;
            break;
          }
        }
      }
    } catch (const Error& e) {
      if (const auto* nc = dynamic_cast<const NotConvergedError*>(&e)) {
        throw NotConvergedError("EM iteration " + std::to_string(iter) + ": " + nc->what(), nc->best());
      }
      throw Error(e.code(), "EM iteration " + std::to_string(iter) + ": " + e.what());
    }

    result.iterations = iter;
    if (!moved) {
      // no damped step decreases the objective: stationary within the line-search resolution
      result.converged = true;
      break;
    }

    double beta_change = max_abs_diff(next_beta, beta);
    double alpha_change = 0.0;
    for (std::size_t c = 0; c < warm.size(); ++c) {
      alpha_change = std::max(alpha_change, max_abs_diff(next.model.machines[c].alpha, warm[c]));
    }
    beta = std::move(next_beta);
    current = std::move(next);
    objective = sign(current.joint);
    result.trace.push_back({iter, objective, beta_entropy(beta), beta});
    if (beta_change < em.param_tol && alpha_change < em.param_tol) {
      result.converged = true;
      break;
    }
  }

  result.beta = beta;
  GramMatrix gram{ids, table.combine(beta)};
  result.model = train_one_vs_rest(gram, labels, svm);
  return result;
}

}  // namespace hagg
