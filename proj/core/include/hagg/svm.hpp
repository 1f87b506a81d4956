#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hagg/error.hpp"
#include "hagg/kernels.hpp"

namespace hagg {

struct TrainConfig {
  /// Upper bound on every dual coefficient; infinity gives the hard-margin problem.
  double c_box = 10.0;
  /// Stop when the maximal KKT violation m(alpha) - M(alpha) drops below this.
  double kkt_tol = 1e-6;
  /// Iteration budget in units of n pair updates.
  int max_passes = 1000;
};

void validate(const TrainConfig& cfg);

struct DualSolution {
  std::vector<double> alpha;
  double b = 0.0;
  /// 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij - sum_i alpha_i at the returned alpha.
  double objective = 0.0;
  double kkt_gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Objective after every completed pass, starting with the initial point.
  std::vector<double> pass_objectives;
};

/// Thrown when the iteration budget runs out; carries the last iterate.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& message, DualSolution best);
  const DualSolution& best() const noexcept { return best_; }

 private:
  DualSolution best_;
};

/// Called after every pass with the current (feasible) iterate.
using PassObserver = std::function<void(std::span<const double> alpha, double objective)>;

double dual_objective(const Eigen::MatrixXd& kernel, std::span<const int> y, std::span<const double> alpha);

/// Sequential two-coordinate descent on the max-margin dual
///   min 1/2 a^T (yy^T o K) a - 1^T a  s.t.  0 <= a <= C, y^T a = 0,
/// picking the maximally KKT-violating pair at every step. The warm start,
/// when given, must be feasible.
DualSolution solve_dual(const Eigen::MatrixXd& kernel, std::span<const int> y, const TrainConfig& cfg,
                        std::span<const double> warm_start = {}, const PassObserver& observer = {});

struct BinaryMachine {
  int class_id = 0;
  std::vector<double> alpha;
  double b = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// One-vs-rest classifiers g_c(V) = sum_i alpha_i^c y_ic K(V, V_i) + b_c.
struct SvmModel {
  std::vector<std::string> training_ids;
  std::vector<int> training_labels;  // class ids 1..C
  std::vector<BinaryMachine> machines;  // machines[c - 1] is class c

  int num_classes() const noexcept { return static_cast<int>(machines.size()); }
  /// +1 if training video i belongs to class c, else -1.
  int y(int class_id, std::size_t i) const noexcept { return training_labels[i] == class_id ? 1 : -1; }
};

/// +1 / -1 labels of class c against the rest.
std::vector<int> one_vs_rest_labels(std::span<const int> labels, int class_id);

/// Trains one machine per class 1..max(labels). Warm starts, when given,
/// hold one feasible alpha vector per class.
SvmModel train_one_vs_rest(const GramMatrix& gram, std::span<const int> labels, const TrainConfig& cfg,
                           std::span<const std::vector<double>> warm_starts = {});

/// g_c for a video given its kernel values against the training set.
double decision(const SvmModel& model, int class_id, std::span<const double> k_col);

std::vector<double> decision_scores(const SvmModel& model, std::span<const double> k_col);

/// 1-based index of the largest score; ties go to the smallest class id.
int argmax_class(std::span<const double> scores);

int predict(const SvmModel& model, std::span<const double> k_col);

}  // namespace hagg
