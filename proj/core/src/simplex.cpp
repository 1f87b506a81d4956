#include "hagg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hagg/error.hpp"

namespace hagg {

std::vector<double> to_simplex(std::span<const double> raw) {
  if (raw.empty()) fail(Errc::empty_input, "cannot map an empty parameter vector to the simplex");
  for (double r : raw) {
    if (!std::isfinite(r)) fail(Errc::non_finite, "raw simplex parameter is not finite");
  }
  const double shift = *std::max_element(raw.begin(), raw.end());
  std::vector<double> beta(raw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    beta[i] = std::exp(raw[i] - shift);
    total += beta[i];
  }
  for (double& b : beta) b /= total;
  return beta;
}

bool on_simplex(std::span<const double> beta, double tol) noexcept {
  if (beta.empty()) return false;
  double total = 0.0;
  for (double b : beta) {
    if (!(b >= 0.0 && b <= 1.0)) return false;
    total += b;
  }
  return std::abs(total - 1.0) <= tol;
}

Eigen::MatrixXd jacobian(std::span<const double> beta) {
  if (!on_simplex(beta)) fail(Errc::not_on_simplex, "jacobian requires weights on the simplex");
  const auto n = static_cast<Eigen::Index>(beta.size());
  Eigen::MatrixXd jac(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index k = 0; k < n; ++k) {
      jac(p, k) = beta[static_cast<std::size_t>(k)] * ((p == k ? 1.0 : 0.0) - beta[static_cast<std::size_t>(p)]);
    }
  }
  return jac;
}

std::vector<double> backprop_through_simplex(std::span<const double> dE_dbeta, std::span<const double> beta) {
  if (dE_dbeta.size() != beta.size()) {
    fail(Errc::shape_mismatch, "gradient has " + std::to_string(dE_dbeta.size()) + " entries for " +
                                   std::to_string(beta.size()) + " weights");
  }
  // sum_p g_p beta_k (delta_pk - beta_p) = beta_k (g_k - <g, beta>)
  double mean = 0.0;
  for (std::size_t p = 0; p < beta.size(); ++p) mean += dE_dbeta[p] * beta[p];
  std::vector<double> out(beta.size());
  for (std::size_t k = 0; k < beta.size(); ++k) out[k] = beta[k] * (dE_dbeta[k] - mean);
  return out;
}

std::vector<double> accumulate_shared(std::span<const std::vector<double>> gradients) {
  if (gradients.empty()) fail(Errc::empty_input, "no gradients to accumulate");
  const std::size_t n = gradients.front().size();
  std::vector<double> out(n, 0.0);
  for (const auto& g : gradients) {
    if (g.size() != n) fail(Errc::shape_mismatch, "shared gradients differ in size");
    for (std::size_t i = 0; i < n; ++i) out[i] += g[i];
  }
  for (double& v : out) v /= static_cast<double>(gradients.size());
  return out;
}

SimplexWeights::SimplexWeights(std::vector<double> raw) { set_raw(std::move(raw)); }

SimplexWeights SimplexWeights::uniform(std::size_t nodes) { return SimplexWeights(std::vector<double>(nodes, 0.0)); }

SimplexWeights SimplexWeights::random(std::size_t nodes, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> raw(nodes);
  for (double& r : raw) r = normal(rng);
  return SimplexWeights(std::move(raw));
}

void SimplexWeights::set_raw(std::vector<double> raw) {
  beta_ = to_simplex(raw);
  raw_ = std::move(raw);
}

}  // namespace hagg
