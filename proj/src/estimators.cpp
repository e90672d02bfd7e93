#include "qbal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "qbal/distributions.hpp"
#include "qbal/errors.hpp"
#include "qbal/rng.hpp"

namespace qbal {

namespace {

const std::vector<double> kDefaultLevels{0.0, 0.25, 0.5, 0.75, 0.9, 1.0};

double mean_of(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  CompensatedSum s;
  for (double x : v) s.add((x - mu) * (x - mu));
  return s.value() / static_cast<double>(v.size() - 1);
}

/// x + y into `out` (all spans of equal length).
void add_into(std::span<const std::int32_t> x, std::span<const std::int32_t> y, std::vector<std::int32_t>& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
}

std::string queue_label(std::size_t i) { return std::to_string(i + 1); }

}  // namespace

Grid tensor_grid(std::span<const double> levels, std::size_t m) {
  if (levels.empty()) return {};
  std::size_t count = 1;
  for (std::size_t i = 0; i < m; ++i) {
    if (count > std::numeric_limits<std::size_t>::max() / levels.size()) {
      throw InvalidParameter("tensor grid too large");
    }
    count *= levels.size();
  }
  Grid grid;
  grid.reserve(count);
  std::vector<std::size_t> idx(m, 0);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = levels[idx[i]];
    grid.push_back(std::move(z));
    for (std::size_t i = m; i-- > 0;) {
      if (++idx[i] < levels.size()) break;
      idx[i] = 0;
    }
  }
  return grid;
}

Grid default_grid(std::size_t m) {
  if (m == 0) throw InvalidParameter("grid dimension must be positive");
  if (m <= 3) return tensor_grid(kDefaultLevels, m);
  std::set<std::vector<std::size_t>> chosen;
  chosen.insert(std::vector<std::size_t>(m, kDefaultLevels.size() - 1));
  RngStream stream(0x9e3779b97f4a7c15ull, {static_cast<std::uint32_t>(m)});
  while (chosen.size() < kMaxGridPoints) {
    std::vector<std::size_t> idx(m);
    for (auto& v : idx) v = stream.next_u32() % kDefaultLevels.size();
    chosen.insert(std::move(idx));
  }
  Grid grid;
  for (const auto& idx : chosen) {
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = kDefaultLevels[idx[i]];
    grid.push_back(std::move(z));
  }
  return grid;
}

double monomial32(std::span<const double> z, std::span<const std::int32_t> x) {
  double v = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0) continue;
    if (z[i] == 0.0) return 0.0;
    v *= x[i] == 1 ? z[i] : std::pow(z[i], x[i]);
  }
  return v;
}

PgfEstimate empirical_pgf(const std::vector<CountVector>& samples, const Grid& grid, StderrMode mode,
                          std::size_t batches) {
  if (samples.empty()) throw EmptyLog("empirical PGF needs at least one sample");
  PgfEstimate est;
  est.grid = grid;
  est.n = samples.size();
  std::vector<double> vals(samples.size());
  for (const auto& z : grid) {
    for (std::size_t k = 0; k < samples.size(); ++k) vals[k] = monomial(z, samples[k]);
    const double mu = mean_of(vals);
    double se = 0.0;
    if (mode == StderrMode::Iid) {
      se = std::sqrt(sample_variance(vals) / static_cast<double>(vals.size()));
    } else {
      const std::size_t b = std::max<std::size_t>(1, std::min(batches, vals.size()));
      const std::size_t len = vals.size() / b;
      std::vector<double> means;
      for (std::size_t j = 0; j < b; ++j) {
        means.push_back(mean_of(std::span<const double>(vals).subspan(j * len, len)));
      }
      se = std::sqrt(sample_variance(means) / static_cast<double>(b));
    }
    est.values.push_back(mu);
    est.standard_error.push_back(se);
  }
  return est;
}

nlohmann::json to_json(const PgfEstimate& estimate) {
  return {{"name", estimate.name},
          {"n", estimate.n},
          {"grid", estimate.grid},
          {"values", estimate.values},
          {"stderr", estimate.standard_error}};
}

nlohmann::json estimates_document(const std::vector<PgfEstimate>& estimates) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : estimates) list.push_back(to_json(e));
  return {{"schema", kEstimatesSchema}, {"estimates", list}};
}

void write_csv(std::ostream& out, const PgfEstimate& estimate) {
  const std::size_t m = estimate.grid.empty() ? 0 : estimate.grid.front().size();
  for (std::size_t i = 0; i < m; ++i) out << 'z' << i + 1 << ',';
  out << "value,stderr\n";
  out.precision(17);
  for (std::size_t k = 0; k < estimate.grid.size(); ++k) {
    for (double z : estimate.grid[k]) out << z << ',';
    out << estimate.values[k] << ',' << estimate.standard_error[k] << '\n';
  }
}

// ------------------------------------------------------------ histogram

void BatchHistogram::add(std::span<const std::int32_t> key, std::uint32_t batch, double weight) {
  scratch_.assign(key.begin(), key.end());
  auto [it, inserted] = index_.try_emplace(scratch_, static_cast<std::uint32_t>(cells_.size()));
  if (inserted) {
    keys_.insert(keys_.end(), key.begin(), key.end());
    cells_.emplace_back();
  }
  auto& cells = cells_[it->second];
  if (!cells.empty() && cells.back().batch == batch) {
    cells.back().weight += weight;
  } else {
    cells.push_back(Cell{batch, weight});
  }
}

void BatchHistogram::finalize() {
  order_.resize(cells_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::lexicographical_compare(&keys_[a * width_], &keys_[a * width_] + width_, &keys_[b * width_],
                                        &keys_[b * width_] + width_);
  });
  index_.clear();
}

double BatchHistogram::total() const {
  CompensatedSum s;
  for (std::size_t k = 0; k < order_.size(); ++k) {
    for (const Cell& c : cells_[order_[k]]) s.add(c.weight);
  }
  return s.value();
}

// ------------------------------------------------------------ estimates

double EmbeddedEstimates::observed_time() const {
  CompensatedSum s;
  for (double d : duration) s.add(d);
  return s.value();
}

EmbeddedEstimates build_estimates(std::span<const RunResult> runs, const EstimationOptions& options) {
  if (runs.empty()) throw EmptyLog("no replications to estimate from");
  if (options.batches < 2) throw InvalidParameter("at least two batches are required");
  if (!(options.warmup_fraction >= 0.0 && options.warmup_fraction < 1.0)) {
    throw InvalidParameter("warm-up fraction must lie in [0, 1)");
  }
  const std::size_t m = runs.front().samples.dimension();
  const std::size_t B = options.batches;
  EmbeddedEstimates est;
  est.m = m;
  est.batches = B * runs.size();
  est.duration.assign(est.batches, 0.0);
  est.arrivals = BatchHistogram(2 * m);
  est.departures = BatchHistogram(3 * m);
  est.tags = BatchHistogram(m + 2);
  est.time = BatchHistogram(m + 1);
  est.ledger = CountingLedger(m);

  std::vector<std::int32_t> key;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunResult& run = runs[r];
    if (run.samples.dimension() != m) throw InvalidParameter("replications have different dimensions");
    const double T = run.end_time;
    const double tw = options.warmup_fraction * T;
    const double width = (T - tw) / static_cast<double>(B);
    if (!(width > 0.0)) throw EmptyLog("replication has no observation window after warm-up");
    const auto offset = static_cast<std::uint32_t>(r * B);
    for (std::size_t b = 0; b < B; ++b) {
      const double lo = tw + static_cast<double>(b) * width;
      const double hi = b + 1 == B ? T : tw + static_cast<double>(b + 1) * width;
      est.duration[offset + b] = hi - lo;
    }
    auto batch_of = [&](double t) -> std::size_t {
      const auto b = static_cast<std::size_t>(std::floor((t - tw) / width));
      return std::min(b, B - 1);
    };

    const auto& log = run.samples;
    for (std::size_t k = 0; k < log.size(); ++k) {
      const double t = log.time(k);
      if (t < tw) continue;
      const auto b = static_cast<std::uint32_t>(offset + batch_of(t));
      const auto y = log.y(k);
      if (log.kind(k) == EpochKind::Arrival) {
        est.arrivals.add(log.record(k).first(2 * m), b);
        ++est.arrival_samples;
        int classes = 0;
        std::int64_t size = 0;
        for (auto v : y) {
          classes += v > 0;
          size += v;
        }
        est.multi_class_arrivals = est.multi_class_arrivals || classes > 1;
        est.batch_arrivals = est.batch_arrivals || size > 1;
      } else {
        est.departures.add(log.record(k), b);
        ++est.departure_samples;
        std::int64_t size = 0;
        for (auto v : y) size += v;
        est.multi_departures = est.multi_departures || size > 1;
        for (auto v : log.z(k)) est.multi_routing = est.multi_routing || v > 1;
      }
    }
    for (std::size_t k = 0; k < log.tag_count(); ++k) {
      const double t = log.tag_time(k);
      if (t < tw) continue;
      key.assign({static_cast<std::int32_t>(log.tag_kind(k)), static_cast<std::int32_t>(log.tag_queue(k))});
      const auto x = log.tag_state(k);
      key.insert(key.end(), x.begin(), x.end());
      est.tags.add(key, static_cast<std::uint32_t>(offset + batch_of(t)));
      ++est.tag_samples;
    }

    const auto& ta = run.time_average;
    const auto& segs = ta.segments();
    for (std::size_t k = 0; k < segs.size(); ++k) {
      double s = std::max(segs[k].start, tw);
      const double e = std::min(ta.segment_end(k), T);
      if (!(s < e)) continue;
      const auto& x = ta.state(segs[k].state);
      key.assign(x.begin(), x.end());
      key.push_back(segs[k].phase);
      for (std::size_t b = batch_of(s); b < B && s < e; ++b) {
        const double hi = b + 1 == B ? T : tw + static_cast<double>(b + 1) * width;
        if (hi <= s) continue;
        const double end = std::min(e, hi);
        est.time.add(key, static_cast<std::uint32_t>(offset + b), end - s);
        s = end;
      }
    }
    est.ledger.merge(run.ledger);
  }
  est.arrivals.finalize();
  est.departures.finalize();
  est.tags.finalize();
  est.time.finalize();
  return est;
}

// ------------------------------------------------------------ palm split

std::vector<PalmPart> palm_split(const EmbeddedSampleLog& log, PalmSplitMode mode, double t) {
  if (!(t > 0.0)) throw InvalidParameter("palm split needs t > 0");
  const std::size_t m = log.dimension();
  std::map<std::uint64_t, PalmPart> parts;
  auto put = [&](std::uint64_t key, std::size_t epoch, auto&& label) {
    auto [it, inserted] = parts.try_emplace(key);
    if (inserted) {
      it->second.key = key;
      it->second.label = label();
    }
    it->second.epochs.push_back(epoch);
  };
  for (std::size_t k = 0; k < log.size() && log.time(k) <= t; ++k) {
    const auto y = log.y(k);
    const bool arrival = log.kind(k) == EpochKind::Arrival;
    switch (mode) {
      case PalmSplitMode::ByArrivalClass:
        if (!arrival) break;
        for (std::size_t i = 0; i < m; ++i) {
          if (y[i] > 0) put(i, k, [&] { return "arrival " + queue_label(i); });
        }
        break;
      case PalmSplitMode::ByDepartureQueue:
        if (arrival) break;
        for (std::size_t i = 0; i < m; ++i) {
          if (y[i] > 0) put(i, k, [&] { return "departure " + queue_label(i); });
        }
        break;
      case PalmSplitMode::ByDepartureSubset: {
        if (arrival) break;
        SubsetMask mask = 0;
        for (std::size_t i = 0; i < m; ++i) {
          if (y[i] > 0) mask |= SubsetMask{1} << i;
        }
        put(mask, k, [&] {
          std::string s = "{";
          for (std::size_t i = 0; i < m; ++i) {
            if (mask >> i & 1u) s += (s.size() > 1 ? "," : "") + queue_label(i);
          }
          return s + "}";
        });
        break;
      }
      case PalmSplitMode::ByRoutePair: {
        if (arrival) break;
        const auto z = log.z(k);
        for (std::size_t i = 0; i < m; ++i) {
          if (y[i] == 0) continue;
          bool routed = false;
          for (std::size_t j = 0; j < m; ++j) {
            if (z[j] == 0) continue;
            routed = true;
            put(i * (m + 1) + j, k, [&] { return queue_label(i) + "->" + queue_label(j); });
          }
          if (!routed) put(i * (m + 1) + m, k, [&] { return queue_label(i) + "->exit"; });
        }
        break;
      }
    }
  }
  std::vector<PalmPart> out;
  for (auto& [key, part] : parts) {
    part.weight = static_cast<double>(part.epochs.size()) / t;
    out.push_back(std::move(part));
  }
  return out;
}

// ------------------------------------------------------------ transient

TransientFunctionals transient_functionals(const EmbeddedSampleLog& log, double t, const TestFunction& f) {
  if (!(t > 0.0)) throw InvalidParameter("transient functionals need t > 0");
  CompensatedSum g, g_plus, h, h_minus, h_plus;
  std::size_t na = 0, nd = 0;
  std::vector<std::int32_t> tmp;
  for (std::size_t k = 0; k < log.size() && log.time(k) <= t; ++k) {
    const auto x = log.x(k);
    const double fx = f(x);
    add_into(x, log.y(k), tmp);
    const double fxy = f(tmp);
    if (log.kind(k) == EpochKind::Arrival) {
      g.add(fx);
      g_plus.add(fxy);
      ++na;
    } else {
      h.add(fx);
      h_minus.add(fxy);
      add_into(x, log.z(k), tmp);
      h_plus.add(f(tmp));
      ++nd;
    }
  }
  TransientFunctionals r;
  r.arrivals = na;
  r.departures = nd;
  r.lambda_e = static_cast<double>(na) / t;
  r.lambda_d = static_cast<double>(nd) / t;
  if (na > 0) {
    r.re_g = g.value() / static_cast<double>(na);
    r.re_g_plus = g_plus.value() / static_cast<double>(na);
  }
  if (nd > 0) {
    r.rd_h = h.value() / static_cast<double>(nd);
    r.rd_h_minus = h_minus.value() / static_cast<double>(nd);
    r.rd_h_plus = h_plus.value() / static_cast<double>(nd);
  }
  return r;
}

std::vector<std::int32_t> state_at(const EmbeddedSampleLog& log, double t) {
  std::size_t last = log.size();
  for (std::size_t k = 0; k < log.size() && log.time(k) <= t; ++k) last = k;
  if (last == log.size()) return log.x0();
  std::vector<std::int32_t> out;
  add_into(log.x(last), log.kind(last) == EpochKind::Arrival ? log.y(last) : log.z(last), out);
  return out;
}

// ------------------------------------------------------------ cesaro

CesaroResult cesaro_check(std::span<const double> series, std::size_t batches) {
  if (batches < 4 || batches % 2 != 0) throw InvalidParameter("Cesaro check needs an even batch count >= 4");
  const std::size_t len = series.size() / batches;
  if (len == 0) throw EmptyLog("series too short for the Cesaro check");
  const std::size_t half = batches / 2;
  std::vector<double> first, second;
  for (std::size_t j = 0; j < batches; ++j) {
    const double mu = mean_of(series.subspan(j * len, len));
    (j < half ? first : second).push_back(mu);
  }
  CesaroResult r;
  r.n = half * len;
  const double a = mean_of(first);
  const double b = mean_of(second);
  r.mean_n = a;
  r.mean_2n = 0.5 * (a + b);
  r.difference = r.mean_n - r.mean_2n;
  const double var = (sample_variance(first) + sample_variance(second)) / static_cast<double>(half);
  r.sigma = 0.5 * std::sqrt(var);
  return r;
}

// ------------------------------------------------------------ jackknife

std::size_t BatchColumns::add(std::vector<double> column) {
  if (column.size() != batches_) throw InvalidParameter("batch column has the wrong length");
  CompensatedSum s;
  for (double v : column) s.add(v);
  totals_.push_back(s.value());
  columns_.push_back(std::move(column));
  return columns_.size() - 1;
}

std::vector<double> BatchColumns::totals_without(std::size_t batch) const {
  std::vector<double> out(totals_);
  for (std::size_t c = 0; c < columns_.size(); ++c) out[c] -= columns_[c][batch];
  return out;
}

JackknifeEstimate jackknife(const BatchColumns& columns, const SidesFunction& sides) {
  const std::size_t B = columns.batches();
  if (B < 2) throw InvalidParameter("jackknife needs at least two batches");
  JackknifeEstimate r;
  const auto [lhs, rhs] = sides(columns.totals());
  r.lhs = lhs;
  r.rhs = rhs;
  r.residual = lhs - rhs;
  std::vector<double> pseudo(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto [l, rr] = sides(columns.totals_without(b));
    pseudo[b] = l - rr;
  }
  const double mu = mean_of(pseudo);
  CompensatedSum ss;
  for (double v : pseudo) ss.add((v - mu) * (v - mu));
  r.sigma = std::sqrt(static_cast<double>(B - 1) / static_cast<double>(B) * ss.value());
  return r;
}

// ------------------------------------------------------------ summary

std::vector<PgfEstimate> summarize(const EmbeddedEstimates& est, const Grid& grid) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  PgfEstimate L{"time_average", grid, {}, {}, 0};
  PgfEstimate pe{"arrival_epochs", grid, {}, {}, est.arrival_samples};
  PgfEstimate pd{"departure_epochs", grid, {}, {}, est.departure_samples};
  const auto ones = [](std::span<const std::int32_t>) { return 1.0; };
  const auto n_arr = est.arrivals.per_batch(B, ones);
  const auto n_dep = est.departures.per_batch(B, ones);
  for (const auto& z : grid) {
    const auto pgf = [&](std::span<const std::int32_t> key) { return monomial32(z, key.first(m)); };
    struct Source {
      PgfEstimate* out;
      std::vector<double> num;
      const std::vector<double>* den;
    };
    Source sources[] = {{&L, est.time.per_batch(B, pgf), &est.duration},
                        {&pe, est.arrivals.per_batch(B, pgf), &n_arr},
                        {&pd, est.departures.per_batch(B, pgf), &n_dep}};
    for (auto& s : sources) {
      BatchColumns cols(B);
      cols.add(s.num);
      cols.add(*s.den);
      const auto j = jackknife(cols, [](std::span<const double> t) {
        return std::pair{t[1] > 0.0 ? t[0] / t[1] : 0.0, 0.0};
      });
      s.out->values.push_back(j.lhs);
      s.out->standard_error.push_back(j.sigma);
    }
  }
  return {L, pe, pd};
}

}  // namespace qbal
