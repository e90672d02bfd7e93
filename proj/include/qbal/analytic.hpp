#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qbal/distributions.hpp"
#include "qbal/models.hpp"

namespace qbal {

/// Closed-form inputs of a model. Derived constants are recomputed from the
/// inputs on every call.
struct TransformContext {
  std::vector<double> lambda;                   // external Poisson rate per queue (0 if none)
  std::vector<ServiceDistribution> service;     // per queue (per batch for batch service)
  std::vector<ServiceDistribution> switchover;  // polling models only
  std::optional<BatchLaw> batch;                // batch-Poisson input
  double batch_rate = 0.0;
  std::vector<Count> batch_service;             // K_i, empty means all 1
  std::vector<std::vector<double>> routing;     // p_ik, empty means no routing

  std::size_t size() const noexcept { return service.size(); }
  bool has_routing() const noexcept { return !routing.empty(); }
  /// Λ from the traffic equations (λ itself without routing).
  std::vector<double> throughputs() const;
  double rho() const;
  double total_switchover() const;
  double mean_cycle() const;
  double gamma(std::size_t i) const;
  double exit_probability(std::size_t i) const;
  /// P_i(z) = p_i0 + Σ_k p_ik z_k.
  double routing_pgf(std::size_t i, std::span<const double> z) const;
};

/// Context for a validated model specification.
TransformContext make_transform_context(const ModelSpec& spec);

/// Σ(z) = Σ_j λ_j (1 − z_j).
double sigma(const TransformContext& ctx, std::span<const double> z);

/// β_i(z) = B̃_i(Σ(z)): PGF of arrivals during one class-i service.
double beta(const TransformContext& ctx, std::size_t i, std::span<const double> z);

/// Σ_j λ_j (1 − z_j) computed directly from a rate vector.
double sigma(std::span<const double> lambda, std::span<const double> z);

/// Traffic equations Λ_i = λ_i + Σ_k Λ_k p_ki. Throws NonConvergent when the
/// routing matrix has spectral radius >= 1.
std::vector<double> solve_traffic(std::span<const double> lambda, const std::vector<std::vector<double>>& p);

/// Max-norm residual of a candidate traffic solution.
double traffic_residual(std::span<const double> lambda, const std::vector<std::vector<double>>& p,
                        std::span<const double> throughput);

struct PollingFormulaOptions {
  /// Evaluate removable singularities by substitution instead of throwing.
  bool limit_mode = true;
  double singular_threshold = 1e-8;
};

/// Queue-length PGF of a polling system assembled from visit-beginning and
/// visit-completion PGFs (V^b_i, V^c_i) and analytic LSTs.
///
/// Near z_i = B̃_i(Σ(z)) the i-th term is replaced by S^b_i(z)(1 − B̃_i)/(γ_i Σ(z)),
/// which is its exact value under the visit and service balance relations;
/// `service_begin` supplies S^b_i(z) for that case. At Σ(z) = 0 the value is 1.
double polling_L_formula(const TransformContext& ctx, std::span<const double> visit_begin,
                         std::span<const double> visit_complete, std::span<const double> z,
                         std::span<const double> service_begin = {},
                         const PollingFormulaOptions& options = {});

}  // namespace qbal
