#include "qbal/distributions.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "qbal/errors.hpp"

namespace qbal {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidParameter(std::string(what) + " must be positive and finite");
  }
}

// -log(u) with u in (0,1) from the stream.
double standard_exponential(RngStream& stream) { return -std::log(stream.uniform()); }

}  // namespace

ServiceDistribution ServiceDistribution::exponential(double rate) {
  require_positive(rate, "exponential rate");
  ServiceDistribution d;
  d.kind_ = DistributionKind::Exponential;
  d.rates_ = {rate};
  d.mean_ = 1.0 / rate;
  return d;
}

ServiceDistribution ServiceDistribution::erlang(int shape, double rate) {
  if (shape < 1) throw InvalidParameter("erlang shape must be >= 1");
  require_positive(rate, "erlang rate");
  ServiceDistribution d;
  d.kind_ = DistributionKind::Erlang;
  d.shape_ = shape;
  d.rates_ = {rate};
  d.mean_ = shape / rate;
  return d;
}

ServiceDistribution ServiceDistribution::deterministic(double value) {
  require_positive(value, "deterministic value");
  ServiceDistribution d;
  d.kind_ = DistributionKind::Deterministic;
  d.lo_ = value;
  d.mean_ = value;
  return d;
}

ServiceDistribution ServiceDistribution::uniform(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw InvalidParameter("uniform requires 0 <= lo < hi");
  }
  ServiceDistribution d;
  d.kind_ = DistributionKind::Uniform;
  d.lo_ = lo;
  d.hi_ = hi;
  d.mean_ = 0.5 * (lo + hi);
  return d;
}

ServiceDistribution ServiceDistribution::hyperexponential(std::vector<double> weights,
                                                          std::vector<double> rates) {
  if (weights.empty() || weights.size() != rates.size()) {
    throw InvalidParameter("hyperexponential needs matching nonempty weights and rates");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidParameter("hyperexponential weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidParameter("hyperexponential weights must sum to 1");
  for (double r : rates) require_positive(r, "hyperexponential rate");
  ServiceDistribution d;
  d.kind_ = DistributionKind::Hyperexponential;
  d.mean_ = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) d.mean_ += weights[i] / rates[i];
  d.weights_ = std::move(weights);
  d.rates_ = std::move(rates);
  return d;
}

double ServiceDistribution::second_moment() const noexcept {
  switch (kind_) {
    case DistributionKind::Exponential:
      return 2.0 / (rates_[0] * rates_[0]);
    case DistributionKind::Erlang:
      return shape_ * (shape_ + 1.0) / (rates_[0] * rates_[0]);
    case DistributionKind::Deterministic:
      return lo_ * lo_;
    case DistributionKind::Uniform:
      return (lo_ * lo_ + lo_ * hi_ + hi_ * hi_) / 3.0;
    case DistributionKind::Hyperexponential: {
      double m2 = 0.0;
      for (std::size_t i = 0; i < rates_.size(); ++i) m2 += 2.0 * weights_[i] / (rates_[i] * rates_[i]);
      return m2;
    }
  }
  return 0.0;
}

double ServiceDistribution::sample(RngStream& stream) const {
  switch (kind_) {
    case DistributionKind::Exponential:
      return standard_exponential(stream) / rates_[0];
    case DistributionKind::Erlang: {
      double acc = 0.0;
      for (int k = 0; k < shape_; ++k) acc += standard_exponential(stream);
      return acc / rates_[0];
    }
    case DistributionKind::Deterministic:
      return lo_;
    case DistributionKind::Uniform:
      return lo_ + (hi_ - lo_) * stream.uniform();
    case DistributionKind::Hyperexponential: {
      const double u = stream.uniform();
      double acc = 0.0;
      std::size_t branch = rates_.size() - 1;
      for (std::size_t i = 0; i < rates_.size(); ++i) {
        acc += weights_[i];
        if (u < acc) {
          branch = i;
          break;
        }
      }
      return standard_exponential(stream) / rates_[branch];
    }
  }
  return 0.0;
}

double ServiceDistribution::one_minus_lst(double s) const {
  if (s < 0.0) throw InvalidParameter("LST argument must be nonnegative");
  if (s == 0.0) return 0.0;
  switch (kind_) {
    case DistributionKind::Exponential:
      return s / (rates_[0] + s);
    case DistributionKind::Erlang:
      return -std::expm1(-shape_ * std::log1p(s / rates_[0]));
    case DistributionKind::Deterministic:
      return -std::expm1(-s * lo_);
    case DistributionKind::Uniform: {
      const double w = hi_ - lo_;
      const double x = s * w;
      // (1 - e^{-x}) / x, with its series near zero.
      const double ratio = x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
      // 1 - e^{-s lo} ratio = (1 - e^{-s lo}) + e^{-s lo} (1 - ratio)
      const double head = -std::expm1(-s * lo_);
      const double one_minus_ratio = x < 1e-8 ? 0.5 * x : 1.0 - ratio;
      return head + std::exp(-s * lo_) * one_minus_ratio;
    }
    case DistributionKind::Hyperexponential: {
      double acc = 0.0;
      for (std::size_t i = 0; i < rates_.size(); ++i) acc += weights_[i] * s / (rates_[i] + s);
      return acc;
    }
  }
  return 0.0;
}

double ServiceDistribution::lst(double s) const {
  if (s < 0.0) throw InvalidParameter("LST argument must be nonnegative");
  if (s == 0.0) return 1.0;
  switch (kind_) {
    case DistributionKind::Exponential:
      return rates_[0] / (rates_[0] + s);
    case DistributionKind::Erlang:
      return std::pow(rates_[0] / (rates_[0] + s), shape_);
    case DistributionKind::Deterministic:
      return std::exp(-s * lo_);
    case DistributionKind::Uniform: {
      const double x = s * (hi_ - lo_);
      const double ratio = x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
      return std::exp(-s * lo_) * ratio;
    }
    case DistributionKind::Hyperexponential: {
      double acc = 0.0;
      for (std::size_t i = 0; i < rates_.size(); ++i) acc += weights_[i] * rates_[i] / (rates_[i] + s);
      return acc;
    }
  }
  return 0.0;
}

double ServiceDistribution::lst_past(double s) const {
  if (s < 0.0) throw InvalidParameter("LST argument must be nonnegative");
  if (s == 0.0) return 1.0;
  return one_minus_lst(s) / (mean_ * s);
}

std::string ServiceDistribution::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case DistributionKind::Exponential:
      os << "exponential(rate=" << rates_[0] << ")";
      break;
    case DistributionKind::Erlang:
      os << "erlang(shape=" << shape_ << ", rate=" << rates_[0] << ")";
      break;
    case DistributionKind::Deterministic:
      os << "deterministic(" << lo_ << ")";
      break;
    case DistributionKind::Uniform:
      os << "uniform(" << lo_ << ", " << hi_ << ")";
      break;
    case DistributionKind::Hyperexponential:
      os << "hyperexponential(" << rates_.size() << " phases)";
      break;
  }
  return os.str();
}

BatchLaw::BatchLaw(std::vector<Atom> support) : support_(std::move(support)) {
  if (support_.empty()) throw InvalidParameter("batch law needs at least one atom");
  dimension_ = support_.front().first.size();
  if (dimension_ == 0) throw InvalidParameter("batch vectors must be nonempty");
  means_.assign(dimension_, 0.0);
  double total = 0.0;
  for (const auto& [g, p] : support_) {
    if (g.size() != dimension_) throw InvalidParameter("batch vectors have different lengths");
    if (!(p > 0.0) || p > 1.0) throw InvalidParameter("batch probabilities must lie in (0, 1]");
    Count size = 0;
    for (Count c : g) {
      if (c < 0) throw InvalidParameter("batch sizes must be nonnegative");
      size += c;
    }
    if (size == 0) throw InvalidParameter("all-zero batch in support");
    total += p;
    cumulative_.push_back(total);
    for (std::size_t i = 0; i < dimension_; ++i) means_[i] += p * static_cast<double>(g[i]);
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidParameter("batch probabilities must sum to 1");
}

BatchLaw BatchLaw::unit(std::size_t m, std::size_t k) {
  if (k >= m) throw InvalidParameter("unit batch class out of range");
  CountVector g(m, 0);
  g[k] = 1;
  return BatchLaw({{std::move(g), 1.0}});
}

double BatchLaw::pgf(std::span<const double> z) const {
  if (z.size() != dimension_) throw InvalidParameter("pgf argument has wrong dimension");
  double acc = 0.0;
  for (const auto& [g, p] : support_) acc += p * monomial(z, g);
  return acc;
}

double BatchLaw::marginal_pgf(std::size_t k, double zk) const {
  double acc = 0.0;
  for (const auto& [g, p] : support_) acc += p * (g[k] == 0 ? 1.0 : std::pow(zk, static_cast<double>(g[k])));
  return acc;
}

CountVector BatchLaw::sample(RngStream& stream) const {
  if (support_.size() == 1) return support_.front().first;
  const double u = stream.uniform() * cumulative_.back();
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (u < cumulative_[i]) return support_[i].first;
  }
  return support_.back().first;
}

double monomial(std::span<const double> z, std::span<const Count> x) {
  double acc = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0) acc *= std::pow(z[i], static_cast<double>(x[i]));
  }
  return acc;
}

}  // namespace qbal
