#include "qbal/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "qbal/errors.hpp"

namespace qbal {

namespace {

std::vector<IdentityCheck> finalized(std::vector<IdentityCheck> checks) {
  for (auto& c : checks) c.finalize();
  return checks;
}

using Key = std::span<const std::int32_t>;
using Cols = std::vector<std::vector<double>>;

std::string qlabel(std::size_t i) { return std::to_string(i + 1); }

double ratio(double a, double b) { return b != 0.0 ? a / b : 0.0; }

Cols make_cols(std::size_t n, std::size_t batches) { return Cols(n, std::vector<double>(batches, 0.0)); }

/// Calls f(key, emit) for each histogram key; emit(c, v) adds v times the
/// key's per-batch weights to column c.
template <class F>
void scan(const BatchHistogram& h, Cols& cols, F&& f) {
  for (std::size_t k = 0; k < h.size(); ++k) {
    const auto& cells = h.cells(k);
    f(h.key(k), [&](std::size_t c, double v) {
      if (v == 0.0) return;
      auto& col = cols[c];
      for (const auto& cell : cells) col[cell.batch] += v * cell.weight;
    });
  }
}

BatchColumns to_columns(Cols&& cols, std::size_t batches) {
  BatchColumns bc(batches);
  for (auto& c : cols) bc.add(std::move(c));
  return bc;
}

/// z^(x − e_i), assuming x_i >= 1.
double shifted_monomial(std::span<const double> z, Key x, std::size_t i) {
  double v = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const std::int32_t e = x[j] - (j == i ? 1 : 0);
    if (e == 0) continue;
    if (z[j] == 0.0) return 0.0;
    v *= e == 1 ? z[j] : std::pow(z[j], e);
  }
  return v;
}

std::size_t departing_queue(Key y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0) return i;
  }
  return y.size();
}

std::vector<std::int32_t> to_int32(std::span<const Count> v) { return {v.begin(), v.end()}; }

void add_jackknife(IdentityCheck& chk, const std::vector<double>& z, const std::string& label,
                   const BatchColumns& cols, const SidesFunction& sides) {
  const auto j = jackknife(cols, sides);
  chk.add(z, label, j.lhs, j.rhs, j.sigma);
}

std::string rule_kind(ToleranceKind k) { return k == ToleranceKind::Exact ? "exact" : "statistical"; }

double json_number(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

/// Model facts the dispatcher needs to decide applicability.
struct ModelFacts {
  std::string kind;
  bool poisson = false;        // every external stream is (compound) Poisson
  std::size_t streams = 0;     // active external streams
  bool markov_routing = true;  // routing independent of the state (or absent)
  std::vector<std::vector<double>> routing;
  TransformContext ctx;
};

ModelFacts facts_of(const ModelSpec& spec) {
  ModelFacts f;
  f.kind = model_kind(spec);
  f.ctx = make_transform_context(spec);
  f.poisson = true;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NetworkConfig>) {
          for (const auto& a : c.arrivals) {
            if (!a.active()) continue;
            ++f.streams;
            f.poisson = f.poisson && a.is_poisson();
          }
          if (c.router && !c.router->markovian()) {
            f.markov_routing = false;
          } else if (c.router) {
            f.routing = c.markov_matrix();
          }
        } else if constexpr (std::is_same_v<T, RovingNetworkConfig>) {
          f.streams = c.size();
          f.routing = c.routing;
        } else if constexpr (std::is_same_v<T, BatchStationConfig>) {
          f.streams = 1;
        } else if constexpr (std::is_same_v<T, LongerQueueConfig>) {
          f.streams = c.arrival_rates.size();
        } else {
          f.streams = c.size();
        }
      },
      spec);
  return f;
}

bool is_mm1(const ModelSpec& spec) {
  const auto* n = std::get_if<NetworkConfig>(&spec);
  return n && n->size() == 1 && n->arrivals[0].active() && n->arrivals[0].is_poisson() && !n->router &&
         n->servers[0] == 1 && n->service[0].kind() == DistributionKind::Exponential;
}

bool symmetric(const LongerQueueConfig& c) {
  return c.arrival_rates[0] == c.arrival_rates[1] && c.alpha[0] == c.alpha[1] &&
         c.service[0].describe() == c.service[1].describe();
}

}  // namespace

// ------------------------------------------------------------ check records

double ToleranceRule::tolerance(double sigma) const {
  return kind == ToleranceKind::Exact ? value : value * sigma + kSigmaFloor;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inapplicable: return "inapplicable";
  }
  return "?";
}

IdentityCheck IdentityCheck::inapplicable(std::string name, ToleranceRule rule, std::string why) {
  IdentityCheck c(std::move(name), rule);
  c.verdict = Verdict::Inapplicable;
  c.note = std::move(why);
  return c;
}

void IdentityCheck::add(std::vector<double> z, std::string label, double lhs, double rhs, double sigma) {
  CheckPoint p;
  p.z = std::move(z);
  p.label = std::move(label);
  p.lhs = lhs;
  p.rhs = rhs;
  p.residual = lhs - rhs;
  p.sigma = sigma;
  p.tolerance = rule.tolerance(sigma);
  p.pass = std::abs(p.residual) <= p.tolerance;
  points.push_back(std::move(p));
}

IdentityCheck& IdentityCheck::finalize() {
  if (points.empty()) {
    verdict = Verdict::Inapplicable;
    if (note.empty()) note = "no evaluation points";
    return *this;
  }
  verdict = std::all_of(points.begin(), points.end(), [](const CheckPoint& p) { return p.pass; }) ? Verdict::Pass
                                                                                                 : Verdict::Fail;
  return *this;
}

double IdentityCheck::worst_ratio() const {
  double w = 0.0;
  for (const auto& p : points) {
    const double r = p.tolerance > 0.0 ? std::abs(p.residual) / p.tolerance
                                       : (p.residual == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (std::isnan(r)) return r;
    w = std::max(w, r);
  }
  return w;
}

const std::vector<std::string>& check_families() {
  static const std::vector<std::string> families{"pathwise", "stationary", "pgf",      "pasta",
                                                 "burke",    "balance",    "polling",  "priority",
                                                 "longer_queue", "roving", "cesaro"};
  return families;
}

// ------------------------------------------------------------ pathwise

IdentityCheck check_conservation(std::span<const RunResult> runs) {
  IdentityCheck chk("conservation", ToleranceRule::exact(0.0));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const auto& l = run.ledger;
    double worst = 0.0;
    for (std::size_t i = 0; i < run.x0.size(); ++i) {
      const Count expected = run.x0[i] + l.cum_e()[i] - l.cum_d()[i] + l.cum_r()[i];
      worst = std::max(worst, std::abs(static_cast<double>(run.x_end[i] - expected)));
    }
    chk.add({}, "replication " + qlabel(r), worst, 0.0);
    if (run.jump_log.complete() && run.jump_log.pushed() > 0) {
      const std::vector<JumpRecord> records(run.jump_log.records().begin(), run.jump_log.records().end());
      const auto bad = find_conservation_violation(run.x0, records);
      chk.add({}, "replication " + qlabel(r) + " trace", bad ? 1.0 : 0.0, 0.0);
    }
  }
  return std::move(chk.finalize());
}

IdentityCheck check_exclusivity(const CountingLedger& ledger) {
  IdentityCheck chk("exclusivity", ToleranceRule::exact(0.0));
  chk.add({}, "arrival and departure at one instant", static_cast<double>(ledger.exclusivity_violations()), 0.0);
  return std::move(chk.finalize());
}

IdentityCheck check_subset_partition(std::span<const RunResult> runs) {
  IdentityCheck chk("subset_partition", ToleranceRule::exact(0.0));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& l = runs[r].ledger;
    Count sum = 0;
    for (const auto& [mask, n] : l.subset_counts()) sum += n;
    chk.add({}, "replication " + qlabel(r), static_cast<double>(sum), static_cast<double>(l.simple_d()));
  }
  return std::move(chk.finalize());
}

IdentityCheck check_route_partition(std::span<const RunResult> runs) {
  const ToleranceRule rule = ToleranceRule::exact(0.0);
  IdentityCheck chk("route_partition", rule);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& log = runs[r].samples;
    const std::size_t m = log.dimension();
    for (std::size_t k = 0; k < log.size(); ++k) {
      if (log.kind(k) != EpochKind::Departure) continue;
      std::int64_t routed = 0;
      for (auto v : log.z(k)) routed += v;
      if (routed > 1) return IdentityCheck::inapplicable("route_partition", rule, "a departure routes several customers");
    }
    const double t = runs[r].end_time;
    std::vector<double> pairs(m, 0.0), queues(m, 0.0);
    for (const auto& p : palm_split(log, PalmSplitMode::ByRoutePair, t)) {
      pairs[p.key / (m + 1)] += static_cast<double>(p.epochs.size());
    }
    for (const auto& p : palm_split(log, PalmSplitMode::ByDepartureQueue, t)) {
      queues[p.key] = static_cast<double>(p.epochs.size());
    }
    for (std::size_t i = 0; i < m; ++i) {
      chk.add({}, "replication " + qlabel(r) + " queue " + qlabel(i), pairs[i], queues[i]);
    }
  }
  return std::move(chk.finalize());
}

IdentityCheck check_pathwise_telescoping(std::span<const RunResult> runs,
                                         const std::vector<TestFunction>& functions) {
  IdentityCheck chk("telescoping", ToleranceRule::exact(kPathwiseTolerance));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const double t = run.end_time;
    if (!(t > 0.0)) continue;
    const auto x_end = to_int32(run.x_end.counts());
    const auto& x0 = run.samples.x0();
    for (const auto& f : functions) {
      const auto tf = transient_functionals(run.samples, t, f);
      const double lhs = tf.lambda_e * (tf.re_g_plus - tf.re_g) + tf.lambda_d * (tf.rd_h_plus - tf.rd_h) -
                         tf.lambda_d * (tf.rd_h_minus - tf.rd_h);
      const double rhs = (f(x_end) - f(x0)) / t;
      chk.add({}, f.name + " replication " + qlabel(r), lhs, rhs);
    }
  }
  return std::move(chk.finalize());
}

// ------------------------------------------------------------ stationary relations

IdentityCheck check_stationary_relation(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions,
                                        double k) {
  if (est.ledger.exclusivity_violations() > 0) {
    throw InapplicableAssumption("the sample path has " + std::to_string(est.ledger.exclusivity_violations()) +
                                 " epochs with both arrivals and departures");
  }
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  IdentityCheck chk("stationary_relation", ToleranceRule::statistical(k));
  std::vector<std::int32_t> tmp(m);
  auto shifted = [&](Key x, Key d) -> std::span<const std::int32_t> {
    for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + d[i];
    return tmp;
  };
  for (const auto& f : functions) {
    Cols cols = make_cols(3, B);
    scan(est.arrivals, cols, [&](Key key, auto emit) {
      const auto x = key.first(m);
      const double fx = f(x);
      emit(0, f(shifted(x, key.subspan(m, m))) - fx);
    });
    scan(est.departures, cols, [&](Key key, auto emit) {
      const auto x = key.first(m);
      const double fx = f(x);
      emit(1, f(shifted(x, key.subspan(2 * m, m))) - fx);
      emit(2, f(shifted(x, key.subspan(m, m))) - fx);
    });
    cols.push_back(est.duration);
    const auto bc = to_columns(std::move(cols), B);
    add_jackknife(chk, {}, f.name, bc, [](std::span<const double> t) {
      return std::pair{ratio(t[0] + t[1], t[3]), ratio(t[2], t[3])};
    });
  }
  return std::move(chk.finalize());
}

namespace {

/// Departure subsets present in the estimates, in mask order.
std::vector<SubsetMask> departure_subsets(const EmbeddedEstimates& est) {
  std::set<SubsetMask> masks;
  for (std::size_t k = 0; k < est.departures.size(); ++k) {
    const auto y = est.departures.key(k).subspan(est.m, est.m);
    SubsetMask mask = 0;
    for (std::size_t i = 0; i < est.m; ++i) {
      if (y[i] > 0) mask |= SubsetMask{1} << i;
    }
    masks.insert(mask);
  }
  return {masks.begin(), masks.end()};
}

struct SplitSums {
  // column layout: 0 arrivals term, 1 duration, then per part (count, plus-term, minus-term)
  BatchColumns cols;
  std::size_t parts;
};

/// Arrival term plus per-part departure sums; part_of(y) selects the part of a departure key.
template <class PartOf>
SplitSums split_sums(const EmbeddedEstimates& est, const TestFunction& f, std::size_t parts, PartOf&& part_of) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  Cols cols = make_cols(1 + 3 * parts, B);
  std::vector<std::int32_t> tmp(m);
  auto shifted = [&](Key x, Key d) -> std::span<const std::int32_t> {
    for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + d[i];
    return tmp;
  };
  scan(est.arrivals, cols, [&](Key key, auto emit) {
    const auto x = key.first(m);
    emit(0, f(shifted(x, key.subspan(m, m))) - f(x));
  });
  scan(est.departures, cols, [&](Key key, auto emit) {
    const auto x = key.first(m);
    const double fx = f(x);
    const double plus = f(shifted(x, key.subspan(2 * m, m))) - fx;
    const double minus = f(shifted(x, key.subspan(m, m))) - fx;
    part_of(key.subspan(m, m), [&](std::size_t p) {
      emit(1 + 3 * p, 1.0);
      emit(2 + 3 * p, plus);
      emit(3 + 3 * p, minus);
    });
  });
  Cols all;
  all.push_back(std::move(cols[0]));
  all.push_back(est.duration);
  for (std::size_t c = 1; c < cols.size(); ++c) all.push_back(std::move(cols[c]));
  return {to_columns(std::move(all), B), parts};
}

/// Σ_parts (n_p / T) · (conditional mean of the plus and minus terms).
std::pair<double, double> split_sides(std::span<const double> t, std::size_t parts) {
  const double T = t[1];
  double lhs = ratio(t[0], T);
  double rhs = 0.0;
  for (std::size_t p = 0; p < parts; ++p) {
    const double n = t[2 + 3 * p];
    const double w = ratio(n, T);
    lhs += w * ratio(t[3 + 3 * p], n);
    rhs += w * ratio(t[4 + 3 * p], n);
  }
  return {lhs, rhs};
}

}  // namespace

IdentityCheck check_subset_relation(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions,
                                    double k) {
  if (est.ledger.exclusivity_violations() > 0) {
    throw InapplicableAssumption("the sample path has epochs with both arrivals and departures");
  }
  IdentityCheck chk("subset_relation", ToleranceRule::statistical(k));
  const auto masks = departure_subsets(est);
  std::map<SubsetMask, std::size_t> index;
  for (std::size_t p = 0; p < masks.size(); ++p) index[masks[p]] = p;
  for (const auto& f : functions) {
    const auto s = split_sums(est, f, masks.size(), [&](Key y, auto put) {
      SubsetMask mask = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0) mask |= SubsetMask{1} << i;
      }
      put(index.at(mask));
    });
    const std::size_t parts = s.parts;
    add_jackknife(chk, {}, f.name, s.cols, [parts](std::span<const double> t) { return split_sides(t, parts); });
  }
  return std::move(chk.finalize());
}

IdentityCheck check_singleton_reduction(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions) {
  const ToleranceRule rule = ToleranceRule::exact(1e-12);
  if (est.multi_departures) {
    return IdentityCheck::inapplicable("singleton_reduction", rule, "some departure epoch removes several customers");
  }
  IdentityCheck chk("singleton_reduction", rule);
  const auto masks = departure_subsets(est);
  std::map<SubsetMask, std::size_t> index;
  for (std::size_t p = 0; p < masks.size(); ++p) index[masks[p]] = p;
  for (const auto& f : functions) {
    const auto subset = split_sums(est, f, masks.size(), [&](Key y, auto put) {
      put(index.at(SubsetMask{1} << departing_queue(y)));
    });
    const auto queue = split_sums(est, f, est.m, [&](Key y, auto put) { put(departing_queue(y)); });
    const auto a = split_sides(subset.cols.totals(), subset.parts);
    const auto b = split_sides(queue.cols.totals(), queue.parts);
    chk.add({}, f.name, a.first - a.second, b.first - b.second);
  }
  return std::move(chk.finalize());
}

// ------------------------------------------------------------ PGF relations

namespace {

enum class ArrivalTerm { Joint, PerClass };

/// Shared evaluator of the single-departure PGF relations. `route_weight(i, z)`
/// returns Σ_j p_ij (1 − z_j) for the Markovian form; null means the
/// observed routing is used.
IdentityCheck pgf_relation(const std::string& name, const EmbeddedEstimates& est, const Grid& grid, double k,
                           ArrivalTerm arrival_term,
                           const std::vector<std::vector<double>>* routing) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  IdentityCheck chk(name, ToleranceRule::statistical(k));
  const std::size_t classes = arrival_term == ArrivalTerm::Joint ? 1 : m;
  // columns: T, mid, rhs, then per class (N, ΣzY, ΣzX)
  for (const auto& z : grid) {
    Cols cols = make_cols(3 + 3 * classes, B);
    cols[0] = est.duration;
    std::vector<double> route_weight(m, 0.0);
    if (routing && !routing->empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) route_weight[i] += (*routing)[i][j] * (1.0 - z[j]);
      }
    }
    scan(est.arrivals, cols, [&](Key key, auto emit) {
      const auto y = key.subspan(m, m);
      const double px = monomial32(z, key.first(m));
      if (arrival_term == ArrivalTerm::Joint) {
        emit(3, 1.0);
        emit(4, monomial32(z, y));
        emit(5, px);
        return;
      }
      const std::size_t c = departing_queue(y);
      emit(3 + 3 * c, 1.0);
      emit(4 + 3 * c, y[c] == 0 ? 1.0 : (z[c] == 0.0 ? 0.0 : std::pow(z[c], y[c])));
      emit(5 + 3 * c, px);
    });
    scan(est.departures, cols, [&](Key key, auto emit) {
      const double px = monomial32(z, key.first(m));
      const std::size_t i = departing_queue(key.subspan(m, m));
      double mid = 0.0;
      if (routing) {
        mid = route_weight[i];
      } else {
        const auto r = key.subspan(2 * m, m);
        for (std::size_t j = 0; j < m; ++j) {
          if (r[j] > 0) mid += 1.0 - z[j];
        }
      }
      emit(1, px * mid);
      emit(2, px * (1.0 - z[i]));
    });
    const auto bc = to_columns(std::move(cols), B);
    add_jackknife(chk, z, "", bc, [classes](std::span<const double> t) {
      const double T = t[0];
      double lhs = t[1];
      for (std::size_t c = 0; c < classes; ++c) {
        const double n = t[3 + 3 * c];
        lhs += ratio((n - t[4 + 3 * c]) * t[5 + 3 * c], n);
      }
      return std::pair{ratio(lhs, T), ratio(t[2], T)};
    });
  }
  return std::move(chk.finalize());
}

std::string single_departure_problem(const EmbeddedEstimates& est) {
  if (est.multi_departures) return "some departure epoch removes several customers";
  if (est.multi_routing) return "some departure routes several customers to one queue";
  return {};
}

}  // namespace

IdentityCheck check_relation3(const EmbeddedEstimates& est, const Grid& grid, double k) {
  if (auto why = single_departure_problem(est); !why.empty()) {
    return IdentityCheck::inapplicable("relation3", ToleranceRule::statistical(k), why);
  }
  return pgf_relation("relation3", est, grid, k, ArrivalTerm::Joint, nullptr);
}

IdentityCheck check_relation4(const EmbeddedEstimates& est, const Grid& grid, double k) {
  auto why = single_departure_problem(est);
  if (why.empty() && est.multi_class_arrivals) why = "some arrival epoch feeds several queues";
  if (!why.empty()) return IdentityCheck::inapplicable("relation4", ToleranceRule::statistical(k), why);
  return pgf_relation("relation4", est, grid, k, ArrivalTerm::PerClass, nullptr);
}

IdentityCheck check_relation5(const EmbeddedEstimates& est, const std::vector<std::vector<double>>& routing,
                              const Grid& grid, double k) {
  auto why = single_departure_problem(est);
  if (why.empty() && est.multi_class_arrivals) why = "some arrival epoch feeds several queues";
  if (!why.empty()) return IdentityCheck::inapplicable("relation5", ToleranceRule::statistical(k), why);
  return pgf_relation("relation5", est, grid, k, ArrivalTerm::PerClass, &routing);
}

std::vector<IdentityCheck> check_pasta(const EmbeddedEstimates& est, const Grid& grid, double k) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  std::vector<IdentityCheck> out;
  out.emplace_back("pasta", ToleranceRule::statistical(k));
  auto finish = [&] {
    for (std::size_t c = 1; c < out.size(); ++c) {
      if (out[c].points.empty()) out[c].note = "queue has no external arrivals";
    }
    return finalized(std::move(out));
  };
  const bool per_class = m > 1;
  if (per_class) {
    for (std::size_t c = 0; c < m; ++c) out.emplace_back("pasta[" + qlabel(c) + "]", ToleranceRule::statistical(k));
  }
  // columns: T, ∫z^X, N, ΣzX, then per class (N_c, ΣzX_c)
  for (const auto& z : grid) {
    Cols cols = make_cols(4 + 2 * m, B);
    cols[0] = est.duration;
    scan(est.time, cols, [&](Key key, auto emit) { emit(1, monomial32(z, key.first(m))); });
    scan(est.arrivals, cols, [&](Key key, auto emit) {
      const double px = monomial32(z, key.first(m));
      emit(2, 1.0);
      emit(3, px);
      const auto y = key.subspan(m, m);
      for (std::size_t c = 0; c < m; ++c) {
        if (y[c] > 0) {
          emit(4 + 2 * c, 1.0);
          emit(5 + 2 * c, px);
        }
      }
    });
    const auto bc = to_columns(std::move(cols), B);
    add_jackknife(out[0], z, "", bc, [](std::span<const double> t) {
      return std::pair{ratio(t[3], t[2]), ratio(t[1], t[0])};
    });
    if (!per_class) continue;
    const auto& totals = bc.totals();
    for (std::size_t c = 0; c < m; ++c) {
      if (totals[4 + 2 * c] == 0.0) continue;
      add_jackknife(out[1 + c], z, "", bc, [c](std::span<const double> t) {
        return std::pair{ratio(t[5 + 2 * c], t[4 + 2 * c]), ratio(t[1], t[0])};
      });
    }
  }
  return finish();
}

std::vector<IdentityCheck> check_burke(const EmbeddedEstimates& est, const Grid& grid, const TransformContext* mm1,
                                       double k) {
  const ToleranceRule rule = ToleranceRule::statistical(k);
  std::vector<IdentityCheck> out;
  if (est.m != 1) {
    out.push_back(IdentityCheck::inapplicable("burke", rule, "needs a single queue"));
    return finalized(std::move(out));
  }
  if (est.multi_departures || est.batch_arrivals || est.multi_routing) {
    out.push_back(IdentityCheck::inapplicable("burke", rule, "needs unit arrivals and departures"));
    return finalized(std::move(out));
  }
  const std::size_t B = est.batches;
  out.emplace_back("burke", rule);
  if (mm1) out.emplace_back("mm1_oracle", rule);
  const double rho = mm1 ? mm1->lambda[0] * mm1->service[0].mean() : 0.0;
  for (const auto& z : grid) {
    Cols cols = make_cols(6, B);
    cols[0] = est.duration;
    scan(est.time, cols, [&](Key key, auto emit) { emit(1, monomial32(z, key.first(1))); });
    scan(est.arrivals, cols, [&](Key key, auto emit) {
      emit(2, 1.0);
      emit(3, monomial32(z, key.first(1)));
    });
    scan(est.departures, cols, [&](Key key, auto emit) {
      emit(4, 1.0);
      emit(5, monomial32(z, key.first(1)));
    });
    const auto bc = to_columns(std::move(cols), B);
    add_jackknife(out[0], z, "", bc, [](std::span<const double> t) {
      return std::pair{ratio(t[3], t[2]), ratio(t[5], t[4])};
    });
    if (!mm1) continue;
    const double oracle = (1.0 - rho) / (1.0 - rho * z[0]);
    add_jackknife(out[1], z, "time", bc, [oracle](std::span<const double> t) {
      return std::pair{ratio(t[1], t[0]), oracle};
    });
    add_jackknife(out[1], z, "arrival", bc, [oracle](std::span<const double> t) {
      return std::pair{ratio(t[3], t[2]), oracle};
    });
    add_jackknife(out[1], z, "departure", bc, [oracle](std::span<const double> t) {
      return std::pair{ratio(t[5], t[4]), oracle};
    });
  }
  return finalized(std::move(out));
}

// ------------------------------------------------------------ queue-length balance

namespace {

/// Columns T, ∫z^X, then per queue (departure epochs, Σ z^X at departures).
BatchColumns time_and_departures(const EmbeddedEstimates& est, std::span<const double> z) {
  const std::size_t m = est.m;
  Cols cols = make_cols(2 + 2 * m, est.batches);
  cols[0] = est.duration;
  scan(est.time, cols, [&](Key key, auto emit) { emit(1, monomial32(z, key.first(m))); });
  scan(est.departures, cols, [&](Key key, auto emit) {
    const std::size_t i = departing_queue(key.subspan(m, m));
    emit(2 + 2 * i, 1.0);
    emit(3 + 2 * i, monomial32(z, key.first(m)));
  });
  return to_columns(std::move(cols), est.batches);
}

}  // namespace

IdentityCheck check_single_arrival_balance(const std::string& name, const EmbeddedEstimates& est,
                                           const TransformContext& ctx, const Grid& grid, double k) {
  IdentityCheck chk(name, ToleranceRule::statistical(k));
  const std::size_t m = est.m;
  for (const auto& z : grid) {
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = ctx.lambda[i] * (1.0 - z[i]);
    const double s = sigma(ctx, z);
    add_jackknife(chk, z, "", time_and_departures(est, z), [w, s](std::span<const double> t) {
      double rhs = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) rhs += w[i] * ratio(t[3 + 2 * i], t[2 + 2 * i]);
      return std::pair{s * ratio(t[1], t[0]), rhs};
    });
  }
  return std::move(chk.finalize());
}

IdentityCheck check_batch_relation(const std::string& name, const EmbeddedEstimates& est,
                                   const TransformContext& ctx, const Grid& grid, double k) {
  IdentityCheck chk(name, ToleranceRule::statistical(k));
  const std::size_t m = est.m;
  double total_rate = 0.0;
  for (double l : ctx.lambda) total_rate += l;
  std::vector<double> mean_g(m);
  for (std::size_t i = 0; i < m; ++i) {
    mean_g[i] = ctx.batch ? ctx.batch->marginal_means()[i] : ctx.lambda[i] / total_rate;
  }
  for (const auto& z : grid) {
    double pgf_g = 0.0;
    if (ctx.batch) {
      pgf_g = ctx.batch->pgf(z);
    } else {
      for (std::size_t i = 0; i < m; ++i) pgf_g += ctx.lambda[i] / total_rate * z[i];
    }
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double K = ctx.batch_service.empty() ? 1.0 : static_cast<double>(ctx.batch_service[i]);
      w[i] = (1.0 - std::pow(z[i], K)) / K * mean_g[i];
    }
    add_jackknife(chk, z, "", time_and_departures(est, z), [w, pgf_g](std::span<const double> t) {
      double rhs = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) rhs += w[i] * ratio(t[3 + 2 * i], t[2 + 2 * i]);
      return std::pair{(1.0 - pgf_g) * ratio(t[1], t[0]), rhs};
    });
  }
  return std::move(chk.finalize());
}

IdentityCheck check_rate_identity(const CountingLedger& ledger, double t, const TransformContext& ctx) {
  IdentityCheck chk("rate_identity", ToleranceRule::exact(0.01));
  chk.note = "tolerance is 1% of the customer arrival rate";
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const double K = ctx.batch_service.empty() ? 1.0 : static_cast<double>(ctx.batch_service[i]);
    const double lhs = K * static_cast<double>(ledger.simple_d(i)) / t;
    const double rhs = static_cast<double>(ledger.cum_e()[i]) / t;
    if (rhs == 0.0) continue;
    chk.add({}, "class " + qlabel(i), lhs, rhs);
    auto& p = chk.points.back();
    p.tolerance = 0.01 * rhs;
    p.pass = std::abs(p.residual) <= p.tolerance;
  }
  return std::move(chk.finalize());
}

IdentityCheck check_routed_balance(const std::string& name, const EmbeddedEstimates& est,
                                   const TransformContext& ctx, const Grid& grid, double k) {
  IdentityCheck chk(name, ToleranceRule::statistical(k));
  const std::size_t m = est.m;
  const auto big = ctx.throughputs();
  for (const auto& z : grid) {
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = big[i] * (ctx.routing_pgf(i, z) - z[i]);
    const double s = sigma(ctx, z);
    add_jackknife(chk, z, "", time_and_departures(est, z), [w, s](std::span<const double> t) {
      double rhs = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) rhs += w[i] * ratio(t[3 + 2 * i], t[2 + 2 * i]);
      return std::pair{s * ratio(t[1], t[0]), rhs};
    });
  }
  return std::move(chk.finalize());
}

// ------------------------------------------------------------ priority and longer queue

std::vector<IdentityCheck> check_priority_chain(const EmbeddedEstimates& est, const TransformContext& ctx,
                                                const Grid& grid, double k) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  std::vector<IdentityCheck> out;
  for (std::size_t i = 0; i < m; ++i) out.emplace_back("priority_pi[" + qlabel(i) + "]", ToleranceRule::statistical(k));
  double total_rate = 0.0;
  for (double l : ctx.lambda) total_rate += l;
  // columns: N, N(X = 0), then per class (Σ z^X over class-i departures, Σ z^(X − e_i) over states served next)
  for (const auto& z : grid) {
    Cols cols = make_cols(2 + 2 * m, B);
    scan(est.departures, cols, [&](Key key, auto emit) {
      const auto x = key.first(m);
      emit(0, 1.0);
      const std::size_t served = departing_queue(key.subspan(m, m));
      emit(2 + 2 * served, monomial32(z, x));
      std::size_t next = m;
      for (std::size_t j = 0; j < m; ++j) {
        if (x[j] > 0) {
          next = j;
          break;
        }
      }
      if (next == m) {
        emit(1, 1.0);
      } else {
        emit(3 + 2 * next, shifted_monomial(z, x, next));
      }
    });
    const auto bc = to_columns(std::move(cols), B);
    for (std::size_t i = 0; i < m; ++i) {
      const double b = beta(ctx, i, z);
      const double share = ctx.lambda[i] / total_rate;
      add_jackknife(out[i], z, "", bc, [i, b, share](std::span<const double> t) {
        const double n = t[0];
        return std::pair{ratio(t[2 + 2 * i], n), ratio((t[3 + 2 * i] + share * t[1]) * b, n)};
      });
    }
  }
  return finalized(std::move(out));
}

std::vector<IdentityCheck> check_longer_queue_decomposition(const EmbeddedEstimates& est,
                                                            const LongerQueueConfig& cfg,
                                                            const TransformContext& ctx, const Grid& grid,
                                                            double k) {
  if (est.m != 2) throw InvalidParameter("the longer-queue model has two queues");
  const std::size_t B = est.batches;
  const ToleranceRule rule = ToleranceRule::statistical(k);
  std::vector<IdentityCheck> out;
  out.emplace_back("longer_queue_pi[1]", rule);
  out.emplace_back("longer_queue_pi[2]", rule);
  const double total_rate = ctx.lambda[0] + ctx.lambda[1];

  IdentityCheck partition("region_partition", ToleranceRule::exact(0.0));
  {
    double gt = 0, lt = 0, eq = 0, empty = 0, n = 0;
    for (std::size_t q = 0; q < est.departures.size(); ++q) {
      const auto x = est.departures.key(q).first(2);
      double w = 0.0;
      for (const auto& c : est.departures.cells(q)) w += c.weight;
      n += w;
      if (x[0] > x[1]) gt += w;
      else if (x[1] > x[0]) lt += w;
      else if (x[0] > 0) eq += w;
      else empty += w;
    }
    partition.add({}, "departure epochs", gt + lt + eq + empty, n);
  }

  const bool sym = symmetric(cfg);
  IdentityCheck symmetry = sym ? IdentityCheck("longer_queue_symmetry", rule)
                               : IdentityCheck::inapplicable("longer_queue_symmetry", rule,
                                                             "arrival rates, services or tie probabilities differ");
  // columns: N, N0, L1, L2, G1, G2, E1, E2, T, ∫z^X, ∫(swapped z)^X, Σ swapped-z^X over queue-2 departures
  for (const auto& z : grid) {
    const std::vector<double> zs{z[1], z[0]};
    Cols cols = make_cols(12, B);
    cols[8] = est.duration;
    scan(est.departures, cols, [&](Key key, auto emit) {
      const auto x = key.first(2);
      const std::size_t served = departing_queue(key.subspan(2, 2));
      emit(0, 1.0);
      emit(2 + served, monomial32(z, x));
      if (served == 1) emit(11, monomial32(zs, x));
      if (x[0] > x[1]) {
        emit(4, shifted_monomial(z, x, 0));
      } else if (x[1] > x[0]) {
        emit(5, shifted_monomial(z, x, 1));
      } else if (x[0] > 0) {
        emit(6, shifted_monomial(z, x, 0));
        emit(7, shifted_monomial(z, x, 1));
      } else {
        emit(1, 1.0);
      }
    });
    if (sym) {
      scan(est.time, cols, [&](Key key, auto emit) {
        emit(9, monomial32(z, key.first(2)));
        emit(10, monomial32(zs, key.first(2)));
      });
    }
    const auto bc = to_columns(std::move(cols), B);
    for (std::size_t i = 0; i < 2; ++i) {
      const double b = beta(ctx, i, z);
      const double a = cfg.alpha[i];
      const double share = ctx.lambda[i] / total_rate;
      add_jackknife(out[i], z, "", bc, [i, b, a, share](std::span<const double> t) {
        const double n = t[0];
        return std::pair{ratio(t[2 + i], n), ratio((t[4 + i] + a * t[6 + i] + share * t[1]) * b, n)};
      });
    }
    if (sym && z[0] != z[1]) {
      add_jackknife(symmetry, z, "L", bc, [](std::span<const double> t) {
        return std::pair{ratio(t[9], t[8]), ratio(t[10], t[8])};
      });
      add_jackknife(symmetry, z, "pi", bc, [](std::span<const double> t) {
        return std::pair{ratio(t[2], t[0]), ratio(t[11], t[0])};
      });
    }
  }
  out.push_back(std::move(partition));
  out.push_back(std::move(symmetry));
  return finalized(std::move(out));
}

// ------------------------------------------------------------ polling

std::vector<IdentityCheck> check_polling_chain(const EmbeddedEstimates& est, const TransformContext& ctx,
                                               const Grid& grid, double k) {
  const std::size_t m = est.m;
  const std::size_t B = est.batches;
  const ToleranceRule rule = ToleranceRule::statistical(k);
  const bool roving = ctx.has_routing();
  if (est.tag_samples == 0) {
    return {IdentityCheck::inapplicable("polling_chain", rule, "the sample path carries no visit or service tags")};
  }
  enum Slot { nVB, VB, nVC, VC, nSB, SB, SBs, nD, D, tS, XS, tW, YW, kSlots };
  auto col = [m](std::size_t i, int slot) { return 2 + i * kSlots + static_cast<std::size_t>(slot); };
  (void)m;

  std::vector<IdentityCheck> visit, completion, switchover, in_service, in_switchover;
  for (std::size_t i = 0; i < m; ++i) {
    visit.emplace_back((roving ? "roving_visit_balance[" : "polling_visit_balance[") + qlabel(i) + "]", rule);
    completion.emplace_back("polling_service_completion[" + qlabel(i) + "]", rule);
    switchover.emplace_back("polling_switchover[" + qlabel(i) + "]", rule);
    in_service.emplace_back("polling_in_service[" + qlabel(i) + "]", rule);
    in_switchover.emplace_back("polling_in_switchover[" + qlabel(i) + "]", rule);
  }
  IdentityCheck time_average("polling_time_average", rule);
  IdentityCheck formula_check = roving ? IdentityCheck::inapplicable("polling_formula", rule, "customer routing present")
                             : IdentityCheck("polling_formula", rule);
  IdentityCheck formula_vs_balance = roving ? IdentityCheck::inapplicable("polling_formula_vs_balance", rule, "customer routing present")
                                    : IdentityCheck("polling_formula_vs_balance", rule);

  const double ec = ctx.mean_cycle();
  const auto big = ctx.throughputs();
  std::vector<double> gamma(m), rho(m), swfrac(m);
  for (std::size_t i = 0; i < m; ++i) {
    gamma[i] = ctx.gamma(i);
    rho[i] = big[i] * ctx.service[i].mean();
    swfrac[i] = ctx.switchover[i].mean() / ec;
  }

  for (const auto& z : grid) {
    Cols cols = make_cols(2 + kSlots * m, B);
    cols[0] = est.duration;
    scan(est.tags, cols, [&](Key key, auto emit) {
      const auto tag = static_cast<EpochTag>(key[0]);
      const auto q = static_cast<std::size_t>(key[1]);
      const auto x = key.subspan(2, m);
      switch (tag) {
        case EpochTag::VisitBegin:
          emit(col(q, nVB), 1.0);
          emit(col(q, VB), monomial32(z, x));
          break;
        case EpochTag::VisitComplete:
          emit(col(q, nVC), 1.0);
          emit(col(q, VC), monomial32(z, x));
          break;
        case EpochTag::ServiceBegin:
          emit(col(q, nSB), 1.0);
          emit(col(q, SB), monomial32(z, x));
          emit(col(q, SBs), shifted_monomial(z, x, q));
          break;
      }
    });
    scan(est.departures, cols, [&](Key key, auto emit) {
      const std::size_t i = departing_queue(key.subspan(m, m));
      emit(col(i, nD), 1.0);
      emit(col(i, D), monomial32(z, key.first(m)));
    });
    scan(est.time, cols, [&](Key key, auto emit) {
      const double px = monomial32(z, key.first(m));
      emit(1, px);
      const auto phase = static_cast<std::size_t>(key[m]);
      if (phase < m) {
        emit(col(phase, tS), 1.0);
        emit(col(phase, XS), px);
      } else if (phase < 2 * m) {
        emit(col(phase - m, tW), 1.0);
        emit(col(phase - m, YW), px);
      }
    });
    const auto bc = to_columns(std::move(cols), B);
    const auto& totals = bc.totals();
    const double s = sigma(ctx, z);

    std::vector<double> b_past(m), s_lst(m), s_past(m), b_lst(m), route(m);
    for (std::size_t i = 0; i < m; ++i) {
      b_lst[i] = ctx.service[i].lst(s);
      b_past[i] = ctx.service[i].lst_past(s);
      s_lst[i] = ctx.switchover[i].lst(s);
      s_past[i] = ctx.switchover[i].lst_past(s);
      route[i] = roving ? ctx.routing_pgf(i, z) : 1.0;
    }
    auto pgf = [col](std::span<const double> t, std::size_t i, int num, int den) {
      return ratio(t[col(i, num)], t[col(i, den)]);
    };

    for (std::size_t i = 0; i < m; ++i) {
      const double g = gamma[i];
      if (totals[col(i, nVB)] > 0.0 && totals[col(i, nVC)] > 0.0 && totals[col(i, nSB)] > 0.0 &&
          totals[col(i, nD)] > 0.0) {
        if (roving) {
          const double p = route[i];
          add_jackknife(visit[i], z, "", bc, [=](std::span<const double> t) {
            return std::pair{g * (pgf(t, i, VB, nVB) - pgf(t, i, VC, nVC)),
                             pgf(t, i, SB, nSB) - pgf(t, i, D, nD) * p};
          });
        } else {
          add_jackknife(visit[i], z, "", bc, [=](std::span<const double> t) {
            return std::pair{g * pgf(t, i, VB, nVB) + pgf(t, i, D, nD), pgf(t, i, SB, nSB) + g * pgf(t, i, VC, nVC)};
          });
        }
      }
      if (totals[col(i, nSB)] > 0.0 && totals[col(i, nD)] > 0.0) {
        const double b = b_lst[i];
        add_jackknife(completion[i], z, "", bc, [=](std::span<const double> t) {
          return std::pair{pgf(t, i, D, nD), pgf(t, i, SBs, nSB) * b};
        });
      }
      const std::size_t n = (i + 1) % m;
      if (totals[col(n, nVB)] > 0.0 && totals[col(i, nVC)] > 0.0) {
        const double sl = s_lst[i];
        add_jackknife(switchover[i], z, "", bc, [=](std::span<const double> t) {
          return std::pair{pgf(t, n, VB, nVB), pgf(t, i, VC, nVC) * sl};
        });
      }
      if (totals[col(i, tS)] > 0.0 && totals[col(i, nSB)] > 0.0) {
        const double bp = b_past[i];
        add_jackknife(in_service[i], z, "", bc, [=](std::span<const double> t) {
          return std::pair{pgf(t, i, XS, tS), pgf(t, i, SB, nSB) * bp};
        });
      }
      if (totals[col(i, tW)] > 0.0 && totals[col(i, nVC)] > 0.0) {
        const double sp = s_past[i];
        add_jackknife(in_switchover[i], z, "", bc, [=](std::span<const double> t) {
          return std::pair{pgf(t, i, YW, tW), pgf(t, i, VC, nVC) * sp};
        });
      }
    }

    add_jackknife(time_average, z, "", bc, [=](std::span<const double> t) {
      double rhs = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        rhs += rho[i] * pgf(t, i, SB, nSB) * b_past[i] + swfrac[i] * pgf(t, i, VC, nVC) * s_past[i];
      }
      return std::pair{ratio(t[1], t[0]), rhs};
    });

    if (!roving) {
      auto formula = [=, &ctx](std::span<const double> t) {
        std::vector<double> vb(m), vc(m), sb(m);
        for (std::size_t i = 0; i < m; ++i) {
          vb[i] = pgf(t, i, VB, nVB);
          vc[i] = pgf(t, i, VC, nVC);
          sb[i] = pgf(t, i, SB, nSB);
        }
        return polling_L_formula(ctx, vb, vc, z, sb);
      };
      add_jackknife(formula_check, z, "", bc, [=](std::span<const double> t) {
        return std::pair{ratio(t[1], t[0]), formula(t)};
      });
      add_jackknife(formula_vs_balance, z, "", bc, [=, &ctx](std::span<const double> t) {
        double l8 = 1.0;
        if (s >= 1e-8) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += ctx.lambda[i] * (1.0 - z[i]) * pgf(t, i, D, nD);
          l8 = acc / s;
        }
        return std::pair{formula(t), l8};
      });
    }
  }

  std::vector<IdentityCheck> out;
  for (auto* family : {&visit, &completion, &switchover, &in_service, &in_switchover}) {
    for (auto& c : *family) out.push_back(std::move(c));
  }
  out.push_back(std::move(time_average));
  out.push_back(std::move(formula_check));
  out.push_back(std::move(formula_vs_balance));
  return finalized(std::move(out));
}

std::vector<IdentityCheck> check_roving(const EmbeddedEstimates& est, const TransformContext& ctx, const Grid& grid,
                                        double k) {
  std::vector<IdentityCheck> out;
  out.push_back(check_routed_balance("roving_balance", est, ctx, grid, k));
  IdentityCheck traffic("traffic_solution", ToleranceRule::exact(1e-10));
  const auto big = ctx.throughputs();
  traffic.add({}, "max-norm residual", traffic_residual(ctx.lambda, ctx.routing, big), 0.0);
  out.push_back(std::move(traffic));
  return finalized(std::move(out));
}

// ------------------------------------------------------------ Cesàro

IdentityCheck check_cesaro(std::span<const RunResult> runs, double warmup_fraction,
                           const std::vector<TestFunction>& functions, double k) {
  IdentityCheck chk("cesaro", ToleranceRule::statistical(k));
  constexpr std::size_t kBatches = 32;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& log = runs[r].samples;
    const double tw = warmup_fraction * runs[r].end_time;
    for (const auto& f : functions) {
      std::vector<double> arrivals, departures;
      for (std::size_t q = 0; q < log.size(); ++q) {
        if (log.time(q) < tw) continue;
        (log.kind(q) == EpochKind::Arrival ? arrivals : departures).push_back(f(log.x(q)));
      }
      for (auto* series : {&arrivals, &departures}) {
        if (series->size() < 2 * kBatches) continue;
        const auto c = cesaro_check(*series, kBatches);
        chk.add({}, std::string(series == &arrivals ? "arrival " : "departure ") + f.name + " replication " + qlabel(r),
                c.mean_n, c.mean_2n, c.sigma);
      }
    }
  }
  return std::move(chk.finalize());
}

// ------------------------------------------------------------ dispatcher

std::vector<IdentityCheck> verify(const VerifyInput& in) {
  if (!in.estimates) throw InvalidParameter("verification needs embedded estimates");
  const auto& est = *in.estimates;
  const auto& library = test_function_library();
  const double k = in.k;
  const ToleranceRule stat = ToleranceRule::statistical(k);
  auto want = [&](const char* family) { return in.families.empty() || in.families.count(family) > 0; };

  std::vector<IdentityCheck> out;
  auto push = [&](IdentityCheck c) {
    c.finalize();
    out.push_back(std::move(c));
  };
  auto push_all = [&](std::vector<IdentityCheck> cs) {
    for (auto& c : cs) push(std::move(c));
  };
  auto guarded = [&](const std::string& name, ToleranceRule rule, auto&& fn) {
    try {
      push(fn());
    } catch (const InapplicableAssumption& e) {
      push(IdentityCheck::inapplicable(name, rule, e.what()));
    }
  };

  std::optional<ModelFacts> facts;
  if (in.spec) facts = facts_of(*in.spec);
  const std::string no_model = "model parameters are not available";

  if (want("pathwise")) {
    push(check_conservation(in.runs));
    push(check_exclusivity(est.ledger));
    push(check_subset_partition(in.runs));
    push(check_route_partition(in.runs));
    push(check_pathwise_telescoping(in.runs, library));
  }
  if (est.arrival_samples + est.departure_samples == 0) {
    // Nothing to estimate: a model without traffic or a window shorter than the warm-up.
    for (const auto& family : check_families()) {
      if (family != "pathwise" && want(family.c_str())) {
        push(IdentityCheck::inapplicable(family, stat, "no arrival or departure epochs after warm-up"));
      }
    }
    return out;
  }
  if (want("stationary")) {
    guarded("stationary_relation", stat, [&] { return check_stationary_relation(est, library, k); });
    guarded("subset_relation", stat, [&] { return check_subset_relation(est, library, k); });
    push(check_singleton_reduction(est, library));
  }
  if (want("pgf")) {
    if (!facts) {
      push(IdentityCheck::inapplicable("relation3", stat, no_model));
    } else if (!facts->poisson && facts->streams > 1) {
      push(IdentityCheck::inapplicable("relation3", stat, "arrival sizes depend on the past for several renewal streams"));
    } else {
      push(check_relation3(est, in.grid, k));
    }
    push(check_relation4(est, in.grid, k));
    if (!facts) {
      push(IdentityCheck::inapplicable("relation5", stat, no_model));
    } else if (!facts->markov_routing) {
      push(IdentityCheck::inapplicable("relation5", stat, "routing depends on the state"));
    } else {
      push(check_relation5(est, facts->routing, in.grid, k));
    }
  }
  if (want("pasta")) {
    if (!facts) {
      push(IdentityCheck::inapplicable("pasta", stat, no_model));
    } else if (!facts->poisson) {
      push(IdentityCheck::inapplicable("pasta", stat, "external arrivals are not Poisson"));
    } else {
      push_all(check_pasta(est, in.grid, k));
    }
  }
  if (want("burke")) {
    const bool mm1 = in.spec && is_mm1(*in.spec);
    push_all(check_burke(est, in.grid, mm1 ? &facts->ctx : nullptr, k));
  }
  if (want("balance") && facts) {
    const auto& kind = facts->kind;
    const auto& ctx = facts->ctx;
    if (kind == "polling") {
      push(check_single_arrival_balance("polling_balance", est, ctx, in.grid, k));
    } else if (kind == "priority") {
      push(check_single_arrival_balance("priority_balance", est, ctx, in.grid, k));
    } else if (kind == "longer-queue") {
      push(check_batch_relation("batch_arrival", est, ctx, in.grid, k));
    } else if (kind == "batch-station") {
      const bool unit = std::all_of(ctx.batch_service.begin(), ctx.batch_service.end(), [](Count c) { return c == 1; });
      push(check_batch_relation(unit ? "batch_arrival" : "batch_service", est, ctx, in.grid, k));
      double t = 0.0;
      for (const auto& run : in.runs) t += run.end_time;
      push(check_rate_identity(est.ledger, t, ctx));
    } else if (kind == "network") {
      if (!facts->poisson) {
        push(IdentityCheck::inapplicable("network_balance", stat, "external arrivals are not Poisson"));
      } else if (!facts->markov_routing) {
        push(IdentityCheck::inapplicable("network_balance", stat, "routing depends on the state"));
      } else if (facts->routing.empty()) {
        push(check_batch_relation("batch_arrival", est, ctx, in.grid, k));
      } else {
        push(check_routed_balance("network_balance", est, ctx, in.grid, k));
      }
    }
  }
  if (want("polling") && facts && (facts->kind == "polling" || facts->kind == "roving-network")) {
    push_all(check_polling_chain(est, facts->ctx, in.grid, k));
  }
  if (want("priority") && facts && facts->kind == "priority") {
    push_all(check_priority_chain(est, facts->ctx, in.grid, k));
  }
  if (want("longer_queue") && facts && facts->kind == "longer-queue") {
    push_all(check_longer_queue_decomposition(est, std::get<LongerQueueConfig>(*in.spec), facts->ctx, in.grid, k));
  }
  if (want("roving") && facts && facts->kind == "roving-network") {
    push_all(check_roving(est, facts->ctx, in.grid, k));
  }
  if (want("cesaro")) {
    std::vector<TestFunction> fs{test_function("nonempty"), test_function("min_total_10"),
                                 test_function("half_pow_total")};
    push(check_cesaro(in.runs, in.warmup_fraction, fs, k));
  }
  return out;
}

// ------------------------------------------------------------ replay

RunResult replay_trace(const JumpTrace& trace, double end_time) {
  const std::size_t m = trace.x0.size();
  RunResult run;
  run.ledger = CountingLedger(m);
  run.x0 = trace.x0;
  CountVector x(trace.x0.counts().begin(), trace.x0.counts().end());
  CountVector x_d;
  run.samples = EmbeddedSampleLog(m, x);
  run.time_average = TimeAverageAccumulator(m);
  run.time_average.start(0.0, x, 0);
  run.jump_log = JumpLog(JumpLog::kDefaultCapacity, false);
  double last_arrival = -1.0, last_departure = -1.0;
  Count peak = 0;
  for (const auto& rec : trace.records) {
    const auto& mark = rec.mark;
    if (mark.size() != m) throw InvalidParameter("jump record length differs from the state length");
    const bool arrival = mark.total_e() > 0;
    const bool departure = mark.total_d() > 0;
    if ((arrival && rec.time == last_departure) || (departure && rec.time == last_arrival)) {
      run.ledger.note_exclusivity_violation();
    }
    const CountVector x_pre = x;
    apply_jump_inplace(x, mark, x_d);
    run.ledger.record(mark);
    if (arrival) {
      run.samples.add_arrival(rec.time, x_pre, mark.delta_e);
      last_arrival = rec.time;
    }
    if (departure) {
      run.samples.add_departure(rec.time, x_d, mark.delta_d, mark.delta_r);
      last_departure = rec.time;
    }
    run.time_average.change(rec.time, x, 0);
    Count total = 0;
    for (auto v : x) total += v;
    peak = std::max(peak, total);
    ++run.events;
  }
  double t_end = trace.records.empty() ? 0.0 : trace.records.back().time;
  if (std::isfinite(end_time)) {
    if (end_time < t_end) throw InvalidParameter("replay end time precedes the last jump");
    t_end = end_time;
  }
  run.time_average.finish(t_end);
  run.end_time = t_end;
  run.x_end = StateVector(std::move(x), trace.x0.stations());
  run.max_total_queue = peak;
  return run;
}

// ------------------------------------------------------------ report

std::size_t BalanceReport::count(Verdict v) const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [v](const IdentityCheck& c) { return c.verdict == v; }));
}

nlohmann::json to_json(const BalanceReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : c.points) {
      points.push_back({{"z", p.z},
                        {"label", p.label},
                        {"lhs", p.lhs},
                        {"rhs", p.rhs},
                        {"residual", p.residual},
                        {"sigma", p.sigma},
                        {"tolerance", p.tolerance},
                        {"pass", p.pass}});
    }
    checks.push_back({{"name", c.name},
                      {"rule", {{"kind", rule_kind(c.rule.kind)}, {"value", c.rule.value}}},
                      {"verdict", to_string(c.verdict)},
                      {"note", c.note},
                      {"worst_ratio", c.worst_ratio()},
                      {"points", points}});
  }
  return {{"schema", kReportSchema},
          {"scenario", report.scenario},
          {"seed", report.seed},
          {"horizon", report.horizon},
          {"metadata", report.metadata},
          {"summary",
           {{"pass", report.count(Verdict::Pass)},
            {"fail", report.count(Verdict::Fail)},
            {"inapplicable", report.count(Verdict::Inapplicable)}}},
          {"checks", checks}};
}

BalanceReport report_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", "") != kReportSchema) throw ConfigError("schema", "not a balance report");
  BalanceReport r;
  r.scenario = doc.at("scenario").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.horizon = json_number(doc.at("horizon"));
  r.metadata = doc.value("metadata", nlohmann::json::object());
  for (const auto& c : doc.at("checks")) {
    IdentityCheck chk;
    chk.name = c.at("name").get<std::string>();
    const auto& rule = c.at("rule");
    chk.rule.kind = rule.at("kind").get<std::string>() == "exact" ? ToleranceKind::Exact : ToleranceKind::Statistical;
    chk.rule.value = json_number(rule.at("value"));
    const auto verdict = c.at("verdict").get<std::string>();
    chk.verdict = verdict == "pass" ? Verdict::Pass : verdict == "fail" ? Verdict::Fail : Verdict::Inapplicable;
    chk.note = c.value("note", "");
    for (const auto& p : c.at("points")) {
      CheckPoint pt;
      pt.z = p.at("z").get<std::vector<double>>();
      pt.label = p.value("label", "");
      pt.lhs = json_number(p.at("lhs"));
      pt.rhs = json_number(p.at("rhs"));
      pt.residual = json_number(p.at("residual"));
      pt.sigma = json_number(p.at("sigma"));
      pt.tolerance = json_number(p.at("tolerance"));
      pt.pass = p.at("pass").get<bool>();
      chk.points.push_back(std::move(pt));
    }
    r.checks.push_back(std::move(chk));
  }
  return r;
}

std::string summary_text(const BalanceReport& report) {
  std::ostringstream os;
  os << "scenario " << report.scenario << "  seed " << report.seed << "  horizon " << report.horizon << '\n';
  for (const auto& c : report.checks) {
    os << (c.verdict == Verdict::Pass ? "PASS " : c.verdict == Verdict::Fail ? "FAIL " : "N/A  ") << c.name;
    if (c.verdict == Verdict::Inapplicable) {
      os << "  (" << c.note << ")";
    } else {
      os << "  points " << c.points.size() << "  worst |residual|/tol " << c.worst_ratio();
    }
    os << '\n';
  }
  os << report.count(Verdict::Pass) << " passed, " << report.count(Verdict::Fail) << " failed, "
     << report.count(Verdict::Inapplicable) << " inapplicable\n";
  return os.str();
}

}  // namespace qbal
