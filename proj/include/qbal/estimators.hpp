#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qbal/kernel.hpp"
#include "qbal/samples.hpp"
#include "qbal/test_functions.hpp"

namespace qbal {

using Grid = std::vector<std::vector<double>>;

inline constexpr const char* kEstimatesSchema = "qbalance.estimates/1";
inline constexpr std::size_t kMaxGridPoints = 500;

/// Full tensor grid levels^m.
Grid tensor_grid(std::span<const double> levels, std::size_t m);

/// {0, .25, .5, .75, .9, 1}^m. For m > 3 the tensor grid is subsampled to 500
/// points with a fixed seed; the all-ones point is always kept.
Grid default_grid(std::size_t m);

/// z^x for 32-bit sample storage, with 0^0 = 1.
double monomial32(std::span<const double> z, std::span<const std::int32_t> x);

enum class StderrMode { Iid, BatchMeans };

struct PgfEstimate {
  std::string name;
  Grid grid;
  std::vector<double> values;
  std::vector<double> standard_error;
  std::size_t n = 0;
};

/// Mean of z^X per grid point. Standard errors are sd/√n, or batch means over
/// `batches` contiguous blocks of the sample order.
PgfEstimate empirical_pgf(const std::vector<CountVector>& samples, const Grid& grid,
                          StderrMode mode = StderrMode::Iid, std::size_t batches = 32);

nlohmann::json to_json(const PgfEstimate& estimate);
nlohmann::json estimates_document(const std::vector<PgfEstimate>& estimates);
void write_csv(std::ostream& out, const PgfEstimate& estimate);

/// Sparse weights of distinct integer keys split over batches.
///
/// Keys are iterated in lexicographic order after finalize(), so every
/// reduction is deterministic.
class BatchHistogram {
 public:
  struct Cell {
    std::uint32_t batch;
    double weight;
  };

  BatchHistogram() = default;
  explicit BatchHistogram(std::size_t width) : width_(width) {}

  void add(std::span<const std::int32_t> key, std::uint32_t batch, double weight = 1.0);
  void finalize();

  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return order_.size(); }
  /// k-th key in sorted order.
  std::span<const std::int32_t> key(std::size_t k) const {
    return {&keys_[static_cast<std::size_t>(order_[k]) * width_], width_};
  }
  const std::vector<Cell>& cells(std::size_t k) const { return cells_[order_[k]]; }
  double total() const;

  /// out[b] = Σ_keys f(key) · weight(key, b).
  template <class F>
  std::vector<double> per_batch(std::size_t batches, F&& f) const {
    std::vector<double> out(batches, 0.0);
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const double v = f(key(k));
      if (v == 0.0) continue;
      for (const Cell& c : cells_[order_[k]]) out[c.batch] += v * c.weight;
    }
    return out;
  }

 private:
  std::size_t width_ = 0;
  std::vector<std::int32_t> keys_;
  std::vector<std::vector<Cell>> cells_;
  std::unordered_map<std::vector<std::int32_t>, std::uint32_t, CountVectorHash> index_;
  std::vector<std::uint32_t> order_;
  std::vector<std::int32_t> scratch_;
};

struct EstimationOptions {
  double warmup_fraction = 0.1;
  std::size_t batches = 32;  // per replication
};

/// Post-warm-up embedded and time-average samples of one or more
/// replications, binned into time batches.
///
/// Histogram keys: arrivals (x | y), departures (x^d | y | z),
/// tags (tag kind | queue | x), time (x | server phase).
struct EmbeddedEstimates {
  std::size_t m = 0;
  std::size_t batches = 0;
  std::vector<double> duration;  // per batch
  BatchHistogram arrivals;
  BatchHistogram departures;
  BatchHistogram tags;
  BatchHistogram time;
  CountingLedger ledger;  // whole runs, all replications
  std::size_t arrival_samples = 0;
  std::size_t departure_samples = 0;
  std::size_t tag_samples = 0;
  bool multi_departures = false;      // some epoch has |ΔN^d| > 1
  bool multi_routing = false;         // some epoch routes more than one customer to a queue
  bool multi_class_arrivals = false;  // some arrival epoch feeds more than one queue
  bool batch_arrivals = false;        // some arrival epoch carries more than one customer

  double observed_time() const;
};

EmbeddedEstimates build_estimates(std::span<const RunResult> runs, const EstimationOptions& options);

enum class PalmSplitMode { ByArrivalClass, ByDepartureQueue, ByDepartureSubset, ByRoutePair };

struct PalmPart {
  std::uint64_t key = 0;  // class, queue, subset mask, or i·(m+1)+j (j = m: exit)
  std::string label;
  double weight = 0.0;    // epochs / t
  std::vector<std::size_t> epochs;
};

/// Splits the epochs of `log` up to time t into the sub-families estimating
/// π^e_k, π^d_i, π^d_A, or π^d_ij.
std::vector<PalmPart> palm_split(const EmbeddedSampleLog& log, PalmSplitMode mode, double t);

/// Finite-time relative frequencies of a test function over the epochs in (0, t].
struct TransientFunctionals {
  double re_g = 0.0;        // f(X(t^e−))
  double re_g_plus = 0.0;   // f(X(t^e−) + ΔN^e)
  double rd_h = 0.0;        // f(X^d)
  double rd_h_minus = 0.0;  // f(X^d + ΔN^d)
  double rd_h_plus = 0.0;   // f(X^d + ΔN^r)
  double lambda_e = 0.0;
  double lambda_d = 0.0;
  std::size_t arrivals = 0;
  std::size_t departures = 0;
};

TransientFunctionals transient_functionals(const EmbeddedSampleLog& log, double t, const TestFunction& f);

/// X(t) reconstructed from the log: the post-jump state of the last epoch at or before t.
std::vector<std::int32_t> state_at(const EmbeddedSampleLog& log, double t);

/// Running-average comparison between the first n and the first 2n terms of a series.
struct CesaroResult {
  double mean_n = 0.0;
  double mean_2n = 0.0;
  double difference = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
};

/// The series is cut to its first 2n terms (n = size/2) and split into
/// `batches` equal blocks; sigma combines the batch-means variances of both halves.
CesaroResult cesaro_check(std::span<const double> series, std::size_t batches = 32);

/// Per-batch primitive sums whose totals feed a nonlinear statistic.
class BatchColumns {
 public:
  explicit BatchColumns(std::size_t batches) : batches_(batches) {}

  std::size_t add(std::vector<double> column);
  std::size_t batches() const noexcept { return batches_; }
  std::size_t size() const noexcept { return columns_.size(); }
  const std::vector<double>& totals() const noexcept { return totals_; }
  /// Totals with one batch removed (total minus that batch's entry).
  std::vector<double> totals_without(std::size_t batch) const;

 private:
  std::size_t batches_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> totals_;
};

struct JackknifeEstimate {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double sigma = 0.0;
};

using SidesFunction = std::function<std::pair<double, double>(std::span<const double>)>;

/// Evaluates (lhs, rhs) on the column totals; sigma is the delete-one-batch
/// jackknife standard error of lhs − rhs.
JackknifeEstimate jackknife(const BatchColumns& columns, const SidesFunction& sides);

/// Time-average, arrival-epoch and departure-epoch PGFs with jackknife errors.
std::vector<PgfEstimate> summarize(const EmbeddedEstimates& est, const Grid& grid);

}  // namespace qbal
