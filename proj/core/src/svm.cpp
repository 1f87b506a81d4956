#include "hagg/svm.hpp"

#include <algorithm>
#include <cmath>

#include "hagg/parallel.hpp"

namespace hagg {

void validate(const TrainConfig& cfg) {
  if (!(cfg.c_box > 0.0)) fail(Errc::invalid_config, "c_box must be positive");
  if (!(cfg.kkt_tol > 0.0)) fail(Errc::invalid_config, "kkt_tol must be positive");
  if (cfg.max_passes < 1) fail(Errc::invalid_config, "max_passes must be positive");
}

NotConvergedError::NotConvergedError(const std::string& message, DualSolution best)
    : Error(Errc::not_converged, message), best_(std::move(best)) {}

double dual_objective(const Eigen::MatrixXd& kernel, std::span<const int> y, std::span<const double> alpha) {
  const std::size_t n = alpha.size();
  double quad = 0.0;
  double linear = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    linear += alpha[i];
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += alpha[j] * y[j] * kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    quad += alpha[i] * y[i] * row;
  }
  return 0.5 * quad - linear;
}

namespace {

constexpr double kTau = 1e-12;

class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& kernel, std::span<const int> y, const TrainConfig& cfg)
      : k_(kernel), y_(y), c_(cfg.c_box), n_(y.size()), alpha_(n_, 0.0), grad_(n_, -1.0) {}

  void warm_start(std::span<const double> alpha) {
    double balance = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!(alpha[i] >= 0.0 && alpha[i] <= c_)) fail(Errc::invalid_config, "warm start violates the box constraint");
      balance += y_[i] * alpha[i];
      scale += alpha[i];
    }
    if (std::abs(balance) > 1e-8 * std::max(1.0, scale)) {
      fail(Errc::invalid_config, "warm start violates sum_i y_i alpha_i = 0");
    }
    alpha_.assign(alpha.begin(), alpha.end());
    for (std::size_t t = 0; t < n_; ++t) {
      double g = -1.0;
      for (std::size_t s = 0; s < n_; ++s) {
        if (alpha_[s] != 0.0) g += y_[t] * y_[s] * kij(t, s) * alpha_[s];
      }
      grad_[t] = g;
    }
  }

  // v_t = -y_t G_t; returns false when the pair is within tolerance.
  bool select(double tol, std::size_t& i_out, std::size_t& j_out, double& gap) const {
    double best_up = -std::numeric_limits<double>::infinity();
    double best_low = std::numeric_limits<double>::infinity();
    std::size_t i = n_;
    std::size_t j = n_;
    for (std::size_t t = 0; t < n_; ++t) {
      const double v = -y_[t] * grad_[t];
      if (in_up(t) && v > best_up) {
        best_up = v;
        i = t;
      }
      if (in_low(t) && v < best_low) {
        best_low = v;
        j = t;
      }
    }
    if (i == n_ || j == n_) {
      gap = 0.0;
      return false;
    }
    gap = best_up - best_low;
    i_out = i;
    j_out = j;
    return gap > tol;
  }

  // Moves alpha_i += y_i t, alpha_j -= y_j t with the clipped optimal t.
  void update(std::size_t i, std::size_t j) {
    const double vi = -y_[i] * grad_[i];
    const double vj = -y_[j] * grad_[j];
    double curvature = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
    if (curvature <= 0.0) curvature = kTau;
    double t = (vi - vj) / curvature;

    const double cap_i = y_[i] > 0 ? c_ - alpha_[i] : alpha_[i];
    const double cap_j = y_[j] > 0 ? alpha_[j] : c_ - alpha_[j];
    bool clip_i = false;
    bool clip_j = false;
    if (t >= cap_i) {
      t = cap_i;
      clip_i = true;
    }
    if (t >= cap_j) {
      t = cap_j;
      clip_j = true;
      clip_i = clip_i && cap_i == cap_j;
    }
    if (!(t > 0.0)) return;

    alpha_[i] += y_[i] * t;
    alpha_[j] -= y_[j] * t;
    // land exactly on the bound that stopped the step
    if (clip_i) alpha_[i] = y_[i] > 0 ? c_ : 0.0;
    if (clip_j) alpha_[j] = y_[j] > 0 ? 0.0 : c_;

    for (std::size_t k = 0; k < n_; ++k) grad_[k] += y_[k] * t * (kij(k, i) - kij(k, j));
  }

  double objective() const {
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) total += alpha_[i] * (grad_[i] - 1.0);
    return 0.5 * total;
  }

  double intercept() const {
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n_; ++t) {
      const double v = -y_[t] * grad_[t];
      const bool at_zero = alpha_[t] <= 0.0;
      const bool at_cap = alpha_[t] >= c_;
      if (!at_zero && !at_cap) {
        free_sum += v;
        ++free_count;
      } else if ((y_[t] > 0) == at_zero) {
        lower = std::max(lower, v);
      } else {
        upper = std::min(upper, v);
      }
    }
    if (free_count > 0) return free_sum / static_cast<double>(free_count);
    if (std::isfinite(lower) && std::isfinite(upper)) return 0.5 * (lower + upper);
    if (std::isfinite(lower)) return lower;
    if (std::isfinite(upper)) return upper;
    return 0.0;
  }

  bool finite() const {
    return std::all_of(alpha_.begin(), alpha_.end(), [](double a) { return std::isfinite(a); });
  }

  std::span<const double> alpha() const noexcept { return alpha_; }
  std::vector<double> take_alpha() { return std::move(alpha_); }

 private:
  double kij(std::size_t a, std::size_t b) const {
    return k_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  bool in_up(std::size_t t) const { return y_[t] > 0 ? alpha_[t] < c_ : alpha_[t] > 0.0; }
  bool in_low(std::size_t t) const { return y_[t] > 0 ? alpha_[t] > 0.0 : alpha_[t] < c_; }

  const Eigen::MatrixXd& k_;
  std::span<const int> y_;
  double c_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

}  // namespace

DualSolution solve_dual(const Eigen::MatrixXd& kernel, std::span<const int> y, const TrainConfig& cfg,
                        std::span<const double> warm_start, const PassObserver& observer) {
  validate(cfg);
  const std::size_t n = y.size();
  if (static_cast<std::size_t>(kernel.rows()) != n || static_cast<std::size_t>(kernel.cols()) != n) {
    fail(Errc::shape_mismatch, "kernel is " + std::to_string(kernel.rows()) + "x" + std::to_string(kernel.cols()) +
                                   " for " + std::to_string(n) + " labels");
  }
  bool has_pos = false;
  bool has_neg = false;
  for (int label : y) {
    if (label != 1 && label != -1) fail(Errc::invalid_config, "binary labels must be +1 or -1");
    (label > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) fail(Errc::single_class, "both +1 and -1 labels are required");
  if (!warm_start.empty() && warm_start.size() != n) fail(Errc::shape_mismatch, "warm start has the wrong size");

  SmoSolver solver(kernel, y, cfg);
  if (!warm_start.empty()) solver.warm_start(warm_start);

  DualSolution out;
  out.pass_objectives.push_back(solver.objective());
  const std::size_t pass_len = std::max<std::size_t>(n, 1);
  const std::size_t budget = static_cast<std::size_t>(cfg.max_passes) * pass_len;
  std::size_t i = 0;
  std::size_t j = 0;
  double gap = 0.0;
  while (solver.select(cfg.kkt_tol, i, j, gap)) {
    if (out.iterations >= budget || !solver.finite()) break;
    solver.update(i, j);
    ++out.iterations;
    if (out.iterations % pass_len == 0) {
      const double obj = solver.objective();
      out.pass_objectives.push_back(obj);
      if (observer) observer(solver.alpha(), obj);
    }
  }
  out.kkt_gap = gap;
  out.converged = gap <= cfg.kkt_tol && solver.finite();
  out.objective = solver.objective();
  if (out.iterations % pass_len != 0 || out.iterations == 0) {
    out.pass_objectives.push_back(out.objective);
    if (observer) observer(solver.alpha(), out.objective);
  }
  out.b = solver.intercept();
  out.alpha = solver.take_alpha();
  if (!out.converged) {
    const std::string reason = std::isfinite(out.objective) ? "KKT gap " + std::to_string(gap) + " after " +
                                                                  std::to_string(out.iterations) + " updates"
                                                            : "dual diverged (unbounded hard-margin problem)";
    throw NotConvergedError(reason, std::move(out));
  }
  return out;
}

std::vector<int> one_vs_rest_labels(std::span<const int> labels, int class_id) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == class_id ? 1 : -1;
  return y;
}

SvmModel train_one_vs_rest(const GramMatrix& gram, std::span<const int> labels, const TrainConfig& cfg,
                           std::span<const std::vector<double>> warm_starts) {
  validate(cfg);
  if (labels.size() != gram.ids.size() || static_cast<std::size_t>(gram.values.rows()) != labels.size()) {
    fail(Errc::shape_mismatch, "labels and Gram matrix disagree in size");
  }
  int classes = 0;
  for (int label : labels) {
    if (label < 1) fail(Errc::unknown_label, "class ids must start at 1");
    classes = std::max(classes, label);
  }
  if (classes < 2) fail(Errc::single_class, "one-vs-rest training needs at least 2 classes");
  if (!warm_starts.empty() && warm_starts.size() != static_cast<std::size_t>(classes)) {
    fail(Errc::shape_mismatch, "one warm start per class is required");
  }

  SvmModel model;
  model.training_ids = gram.ids;
  model.training_labels.assign(labels.begin(), labels.end());
  model.machines.resize(static_cast<std::size_t>(classes));
  parallel_for(static_cast<std::size_t>(classes), [&](std::size_t index) {
    const int c = static_cast<int>(index) + 1;
    const auto y = one_vs_rest_labels(labels, c);
    std::span<const double> warm;
    if (!warm_starts.empty()) warm = warm_starts[index];
    try {
      auto solution = solve_dual(gram.values, y, cfg, warm);
      model.machines[index] = {c, std::move(solution.alpha), solution.b, solution.objective, solution.iterations};
    } catch (const NotConvergedError& e) {
      throw NotConvergedError("class " + std::to_string(c) + ": " + e.what(), e.best());
    } catch (const Error& e) {
      throw Error(e.code(), "class " + std::to_string(c) + ": " + e.what());
    }
  });
  return model;
}

double decision(const SvmModel& model, int class_id, std::span<const double> k_col) {
  if (class_id < 1 || class_id > model.num_classes()) fail(Errc::shape_mismatch, "unknown class id");
  if (k_col.size() != model.training_ids.size()) {
    fail(Errc::shape_mismatch, "kernel column has " + std::to_string(k_col.size()) + " entries for " +
                                   std::to_string(model.training_ids.size()) + " training videos");
  }
  const auto& machine = model.machines[static_cast<std::size_t>(class_id - 1)];
  double score = 0.0;
  for (std::size_t i = 0; i < k_col.size(); ++i) {
    if (machine.alpha[i] != 0.0) score += machine.alpha[i] * model.y(class_id, i) * k_col[i];
  }
  return score + machine.b;
}

std::vector<double> decision_scores(const SvmModel& model, std::span<const double> k_col) {
  std::vector<double> scores(static_cast<std::size_t>(model.num_classes()));
  for (int c = 1; c <= model.num_classes(); ++c) scores[static_cast<std::size_t>(c - 1)] = decision(model, c, k_col);
  return scores;
}

int argmax_class(std::span<const double> scores) {
  if (scores.empty()) fail(Errc::empty_input, "no scores");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<int>(best) + 1;
}

int predict(const SvmModel& model, std::span<const double> k_col) {
  return argmax_class(decision_scores(model, k_col));
}

}  // namespace hagg
