#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qbal/rng.hpp"
#include "qbal/state.hpp"

namespace qbal {

enum class DistributionKind { Exponential, Erlang, Deterministic, Uniform, Hyperexponential };

/// Nonnegative service or switchover time law with closed-form LST.
class ServiceDistribution {
 public:
  static ServiceDistribution exponential(double rate);
  static ServiceDistribution erlang(int shape, double rate);
  static ServiceDistribution deterministic(double value);
  static ServiceDistribution uniform(double lo, double hi);
  static ServiceDistribution hyperexponential(std::vector<double> weights, std::vector<double> rates);

  DistributionKind kind() const noexcept { return kind_; }
  double mean() const noexcept { return mean_; }
  double second_moment() const noexcept;
  double variance() const noexcept { return second_moment() - mean_ * mean_; }
  bool is_continuous() const noexcept { return kind_ != DistributionKind::Deterministic; }

  double sample(RngStream& stream) const;

  /// E[exp(-s B)] for s >= 0.
  double lst(double s) const;
  /// 1 - lst(s), computed without cancellation for small s.
  double one_minus_lst(double s) const;
  /// LST of the elapsed (past) part: (1 - lst(s)) / (mean s), equal to 1 at s = 0.
  double lst_past(double s) const;

  /// Short human-readable form, e.g. "exponential(rate=2)".
  std::string describe() const;

  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& rates() const noexcept { return rates_; }
  int shape() const noexcept { return shape_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  ServiceDistribution() = default;

  DistributionKind kind_ = DistributionKind::Deterministic;
  double mean_ = 0.0;
  // exponential/erlang use rates_[0]; hyperexponential uses weights_/rates_.
  std::vector<double> weights_;
  std::vector<double> rates_;
  int shape_ = 1;
  double lo_ = 0.0;  // deterministic value, or uniform lower bound
  double hi_ = 0.0;
};

/// Finite-support joint batch-size law G = (G_1..G_m).
class BatchLaw {
 public:
  using Atom = std::pair<CountVector, double>;

  explicit BatchLaw(std::vector<Atom> support);
  /// Batches of exactly one class-k customer.
  static BatchLaw unit(std::size_t m, std::size_t k);

  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<Atom>& support() const noexcept { return support_; }
  /// E G_i per class.
  const std::vector<double>& marginal_means() const noexcept { return means_; }
  /// E[z^G].
  double pgf(std::span<const double> z) const;
  /// E[z_k^{G_k}] for a single coordinate.
  double marginal_pgf(std::size_t k, double zk) const;
  CountVector sample(RngStream& stream) const;

 private:
  std::size_t dimension_ = 0;
  std::vector<Atom> support_;
  std::vector<double> cumulative_;
  std::vector<double> means_;
};

/// z^x with the convention 0^0 = 1.
double monomial(std::span<const double> z, std::span<const Count> x);

}  // namespace qbal
