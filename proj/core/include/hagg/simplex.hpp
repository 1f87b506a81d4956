#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace hagg {

/// Softmax with max-subtraction: beta_i = exp(raw_i) / sum_j exp(raw_j).
std::vector<double> to_simplex(std::span<const double> raw);

/// Jacobian of to_simplex at beta: entry (p, k) = d beta_p / d raw_k
/// = beta_k (delta_pk - beta_p). Throws NotOnSimplex.
Eigen::MatrixXd jacobian(std::span<const double> beta);

/// dE/d raw_k = sum_p dE/d beta_p * beta_k (delta_pk - beta_p).
std::vector<double> backprop_through_simplex(std::span<const double> dE_dbeta, std::span<const double> beta);

/// Elementwise mean of gradients that refer to the same parameters.
std::vector<double> accumulate_shared(std::span<const std::vector<double>> gradients);

/// Entries in [0, 1] and |sum - 1| <= tol.
bool on_simplex(std::span<const double> beta, double tol = 1e-9) noexcept;

/// Free parameters and the simplex point they map to. The derived weights
/// are recomputed on every assignment, so they always satisfy the
/// constraints.
class SimplexWeights {
 public:
  SimplexWeights() = default;
  explicit SimplexWeights(std::vector<double> raw);

  static SimplexWeights uniform(std::size_t nodes);
  /// raw ~ N(0, scale^2) from the seed.
  static SimplexWeights random(std::size_t nodes, std::uint64_t seed, double scale = 1.0);

  std::size_t size() const noexcept { return raw_.size(); }
  std::span<const double> raw() const noexcept { return raw_; }
  std::span<const double> beta() const noexcept { return beta_; }

  void set_raw(std::vector<double> raw);

 private:
  std::vector<double> raw_;
  std::vector<double> beta_;
};

}  // namespace hagg
