#include "qbal/analytic.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qbal/errors.hpp"

namespace qbal {

std::vector<double> solve_traffic(std::span<const double> lambda, const std::vector<std::vector<double>>& p) {
  const auto m = static_cast<Eigen::Index>(lambda.size());
  if (p.size() != lambda.size()) throw InvalidParameter("routing matrix dimension does not match the rate vector");
  Eigen::MatrixXd P(m, m);
  Eigen::VectorXd l(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = p[static_cast<std::size_t>(i)];
    if (row.size() != lambda.size()) throw InvalidParameter("routing matrix must be square");
    l(i) = lambda[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < m; ++k) P(i, k) = row[static_cast<std::size_t>(k)];
  }
  const double radius = m == 0 ? 0.0 : P.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0 - 1e-12)) {
    std::ostringstream os;
    os << "routing matrix has spectral radius " << radius << " >= 1; traffic equations have no unique solution";
    throw NonConvergent(os.str());
  }
  // Λ = λ + Pᵀ Λ  <=>  (I − Pᵀ) Λ = λ, refined until the residual settles.
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m) - P.transpose();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd x = lu.solve(l);
  for (int it = 0; it < 3; ++it) x += lu.solve(l - A * x);
  std::vector<double> out(x.data(), x.data() + m);
  const double residual = traffic_residual(lambda, p, out);
  if (!(residual <= 1e-10 * std::max(1.0, l.cwiseAbs().maxCoeff()))) {
    throw NonConvergent("traffic equations residual " + std::to_string(residual) + " above 1e-10");
  }
  return out;
}

double traffic_residual(std::span<const double> lambda, const std::vector<std::vector<double>>& p,
                        std::span<const double> throughput) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    double v = lambda[i];
    for (std::size_t k = 0; k < lambda.size(); ++k) v += throughput[k] * p[k][i];
    worst = std::max(worst, std::abs(throughput[i] - v));
  }
  return worst;
}

std::vector<double> TransformContext::throughputs() const {
  if (!has_routing()) return lambda;
  return solve_traffic(lambda, routing);
}

double TransformContext::rho() const {
  const auto big = throughputs();
  double r = 0.0;
  if (batch) {
    const auto& g = batch->marginal_means();
    for (std::size_t i = 0; i < size(); ++i) {
      const double k = batch_service.empty() ? 1.0 : static_cast<double>(batch_service[i]);
      r += batch_rate * g[i] / k * service[i].mean();
    }
    return r;
  }
  for (std::size_t i = 0; i < size(); ++i) r += big[i] * service[i].mean();
  return r;
}

double TransformContext::total_switchover() const {
  double s = 0.0;
  for (const auto& d : switchover) s += d.mean();
  return s;
}

double TransformContext::mean_cycle() const {
  if (switchover.empty()) throw InvalidParameter("mean cycle time needs switchover times");
  return total_switchover() / (1.0 - rho());
}

double TransformContext::gamma(std::size_t i) const { return 1.0 / (throughputs()[i] * mean_cycle()); }

double TransformContext::exit_probability(std::size_t i) const {
  if (!has_routing()) return 1.0;
  return std::max(0.0, 1.0 - std::accumulate(routing[i].begin(), routing[i].end(), 0.0));
}

double TransformContext::routing_pgf(std::size_t i, std::span<const double> z) const {
  double v = exit_probability(i);
  if (has_routing()) {
    for (std::size_t k = 0; k < size(); ++k) v += routing[i][k] * z[k];
  }
  return v;
}

TransformContext make_transform_context(const ModelSpec& spec) {
  TransformContext ctx;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NetworkConfig>) {
          for (const auto& a : c.arrivals) ctx.lambda.push_back(a.is_poisson() ? a.rate() : 0.0);
          ctx.service = c.service;
          ctx.routing = c.router ? c.markov_matrix() : std::vector<std::vector<double>>{};
        } else if constexpr (std::is_same_v<T, PollingConfig>) {
          ctx.lambda = c.arrival_rates;
          ctx.service = c.service;
          ctx.switchover = c.switchover;
        } else if constexpr (std::is_same_v<T, RovingNetworkConfig>) {
          ctx.lambda = c.polling.arrival_rates;
          ctx.service = c.polling.service;
          ctx.switchover = c.polling.switchover;
          ctx.routing = c.routing;
        } else if constexpr (std::is_same_v<T, BatchStationConfig>) {
          ctx.service = c.service;
          ctx.batch = c.batch;
          ctx.batch_rate = c.batch_rate;
          ctx.batch_service = c.batch_service;
          for (double g : c.batch.marginal_means()) ctx.lambda.push_back(c.batch_rate * g);
        } else {
          ctx.lambda = c.arrival_rates;
          ctx.service = c.service;
        }
      },
      spec);
  return ctx;
}

double sigma(std::span<const double> lambda, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) s += lambda[j] * (1.0 - z[j]);
  return s;
}

double sigma(const TransformContext& ctx, std::span<const double> z) { return sigma(ctx.lambda, z); }

double beta(const TransformContext& ctx, std::size_t i, std::span<const double> z) {
  return ctx.service[i].lst(sigma(ctx, z));
}

double polling_L_formula(const TransformContext& ctx, std::span<const double> visit_begin,
                         std::span<const double> visit_complete, std::span<const double> z,
                         std::span<const double> service_begin, const PollingFormulaOptions& options) {
  const std::size_t m = ctx.size();
  if (visit_begin.size() != m || visit_complete.size() != m || z.size() != m) {
    throw InvalidParameter("polling formula inputs must have one entry per queue");
  }
  const double s = sigma(ctx, z);
  if (s < options.singular_threshold) {
    if (!options.limit_mode) throw SingularPoint("Sigma(z) is within 1e-8 of zero");
    return 1.0;
  }
  const double ec = ctx.mean_cycle();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double b = ctx.service[i].lst(s);
    const double one_minus_b = ctx.service[i].one_minus_lst(s);
    const double den = z[i] - b;
    if (std::abs(den) < options.singular_threshold) {
      if (!options.limit_mode || service_begin.size() != m) {
        throw SingularPoint("z_" + std::to_string(i) + " is within 1e-8 of the service LST at Sigma(z)");
      }
      acc += service_begin[i] * one_minus_b / (ctx.gamma(i) * s);
    } else {
      acc += (visit_begin[i] - visit_complete[i]) / s * z[i] * one_minus_b / den;
    }
    acc += (visit_complete[i] - visit_begin[(i + 1) % m]) / s;
  }
  return acc / ec;
}

}  // namespace qbal
