#include "qbal/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "qbal/errors.hpp"
#include "qbal/test_functions.hpp"

namespace qbal {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

// Nonnegative integral value, whether stored as unsigned, signed or a whole float.
std::optional<std::uint64_t> as_count(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto n = v.get<std::int64_t>();
    if (n >= 0) return static_cast<std::uint64_t>(n);
    return std::nullopt;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  return std::nullopt;
}

/// Object view that remembers which keys were read; finish() rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "(root)" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return join(path_, k); }

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }

  const json& at(const std::string& k) {
    seen_.insert(k);
    if (!j_.contains(k)) throw ConfigError(key(k), "missing required key");
    return j_.at(k);
  }

  double number(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& k, double fallback) { return has(k) ? number(k) : fallback; }

  std::uint64_t unsigned_int(const std::string& k) {
    if (const auto n = as_count(at(k))) return *n;
    throw ConfigError(key(k), "expected a nonnegative integer");
  }
  std::uint64_t unsigned_int(const std::string& k, std::uint64_t fallback) {
    return has(k) ? unsigned_int(k) : fallback;
  }

  std::string string(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& k, const std::string& fallback) { return has(k) ? string(k) : fallback; }

  bool boolean(const std::string& k, bool fallback) {
    if (!has(k)) return fallback;
    const auto& v = at(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_array()) throw ConfigError(key(k), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(index(key(k), i), "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  const json& array(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_array()) throw ConfigError(key(k), "expected an array");
    return v;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(key(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::vector<double>> parse_matrix(const json& v, const std::string& path, std::size_t m) {
  if (!v.is_array() || v.size() != m) throw ConfigError(path, "expected " + std::to_string(m) + " rows");
  std::vector<std::vector<double>> p;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = v[i];
    if (!row.is_array() || row.size() != m) {
      throw ConfigError(index(path, i), "expected " + std::to_string(m) + " entries");
    }
    std::vector<double> r;
    for (std::size_t j = 0; j < m; ++j) {
      if (!row[j].is_number()) throw ConfigError(index(index(path, i), j), "expected a number");
      r.push_back(row[j].get<double>());
    }
    p.push_back(std::move(r));
  }
  return p;
}

std::vector<ServiceDistribution> parse_distributions(const json& v, const std::string& path, std::size_t m) {
  if (!v.is_array() || v.size() != m) throw ConfigError(path, "expected " + std::to_string(m) + " distributions");
  std::vector<ServiceDistribution> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(parse_distribution(v[i], index(path, i)));
  return out;
}

QueueOrder parse_order(const std::string& s, const std::string& path) {
  if (s == "fcfs") return QueueOrder::FCFS;
  if (s == "lcfs") return QueueOrder::LCFS;
  throw ConfigError(path, "expected \"fcfs\" or \"lcfs\"");
}

PollingDiscipline parse_discipline(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "exhaustive") return PollingDiscipline::exhaustive();
    if (s == "gated") return PollingDiscipline::gated();
    throw ConfigError(path, "expected \"exhaustive\", \"gated\" or a k-limited object");
  }
  Reader r(v, path);
  const auto kind = r.string("kind");
  if (kind != "k-limited") throw ConfigError(r.key("kind"), "expected \"k-limited\"");
  const auto k = r.unsigned_int("k");
  if (k == 0) throw ConfigError(r.key("k"), "must be at least 1");
  r.finish();
  return PollingDiscipline::k_limited(static_cast<Count>(k));
}

PollingConfig parse_polling(Reader& r) {
  PollingConfig p;
  p.arrival_rates = r.numbers("arrival_rates");
  const std::size_t m = p.arrival_rates.size();
  if (m == 0) throw ConfigError(r.key("arrival_rates"), "needs at least one queue");
  p.service = parse_distributions(r.at("service"), r.key("service"), m);
  p.switchover = parse_distributions(r.at("switchover"), r.key("switchover"), m);
  const auto& d = r.at("discipline");
  if (d.is_array()) {
    if (d.size() != m) throw ConfigError(r.key("discipline"), "expected one discipline per queue");
    for (std::size_t i = 0; i < m; ++i) p.discipline.push_back(parse_discipline(d[i], index(r.key("discipline"), i)));
  } else {
    p.discipline.assign(m, parse_discipline(d, r.key("discipline")));
  }
  p.order = parse_order(r.string("order", "fcfs"), r.key("order"));
  return p;
}

ArrivalProcess parse_arrival(const json& v, const std::string& path) {
  if (v.is_null()) return ArrivalProcess::none();
  Reader r(v, path);
  const auto kind = r.string("kind");
  ArrivalProcess a;
  if (kind == "poisson") {
    a = ArrivalProcess::poisson(r.number("rate"));
  } else if (kind == "renewal") {
    a = ArrivalProcess::renewal(parse_distribution(r.at("interarrival"), r.key("interarrival")));
  } else if (kind == "none") {
    a = ArrivalProcess::none();
  } else {
    throw ConfigError(r.key("kind"), "expected \"poisson\", \"renewal\" or \"none\"");
  }
  r.finish();
  return a;
}

std::shared_ptr<const Router> parse_router(const json& v, const std::string& path, std::size_t m) {
  Reader r(v, path);
  const auto kind = r.string("kind");
  std::shared_ptr<const Router> out;
  if (kind == "markov") {
    out = std::make_shared<MarkovRouter>(parse_matrix(r.at("matrix"), r.key("matrix"), m));
  } else if (kind == "shorter-queue") {
    const auto& t = r.array("targets");
    if (t.size() != m) throw ConfigError(r.key("targets"), "expected one target list per queue");
    std::vector<std::vector<std::size_t>> targets(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto p = index(r.key("targets"), i);
      if (!t[i].is_array()) throw ConfigError(p, "expected a list of queue numbers");
      for (std::size_t j = 0; j < t[i].size(); ++j) {
        const auto n = as_count(t[i][j]);
        if (!n || *n < 1 || *n > m) {
          throw ConfigError(index(p, j), "expected a queue number between 1 and " + std::to_string(m));
        }
        targets[i].push_back(static_cast<std::size_t>(*n - 1));
      }
    }
    out = std::make_shared<ShorterQueueRouter>(std::move(targets));
  } else {
    throw ConfigError(r.key("kind"), "expected \"markov\" or \"shorter-queue\"");
  }
  r.finish();
  return out;
}

NetworkConfig parse_network(Reader& r) {
  NetworkConfig c;
  const auto& queues = r.array("queues");
  if (queues.empty()) throw ConfigError(r.key("queues"), "needs at least one queue");
  for (std::size_t i = 0; i < queues.size(); ++i) {
    Reader q(queues[i], index(r.key("queues"), i));
    c.arrivals.push_back(q.has("arrival") ? parse_arrival(q.at("arrival"), q.key("arrival")) : ArrivalProcess::none());
    c.service.push_back(parse_distribution(q.at("service"), q.key("service")));
    const auto servers = q.unsigned_int("servers", 1);
    if (servers == 0 || servers > 1000) throw ConfigError(q.key("servers"), "must lie in [1, 1000]");
    c.servers.push_back(static_cast<int>(servers));
    q.finish();
  }
  c.order = parse_order(r.string("order", "fcfs"), r.key("order"));
  if (r.has("routing")) c.router = parse_router(r.at("routing"), r.key("routing"), queues.size());
  c.allow_unstable = r.boolean("allow_unstable", false);
  return c;
}

BatchStationConfig parse_batch_station(Reader& r) {
  BatchStationConfig c;
  c.batch_rate = r.number("batch_rate");
  const auto& atoms = r.array("batch");
  if (atoms.empty()) throw ConfigError(r.key("batch"), "needs at least one batch size");
  std::vector<BatchLaw::Atom> support;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    Reader ar(atoms[a], index(r.key("batch"), a));
    CountVector size;
    const auto& s = ar.array("size");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto n = as_count(s[i]);
      if (!n || *n > static_cast<std::uint64_t>(std::numeric_limits<Count>::max())) {
        throw ConfigError(index(ar.key("size"), i), "expected a nonnegative integer");
      }
      size.push_back(static_cast<Count>(*n));
    }
    support.emplace_back(std::move(size), ar.number("p"));
    ar.finish();
  }
  try {
    c.batch = BatchLaw(std::move(support));
  } catch (const InvalidParameter& e) {
    throw ConfigError(r.key("batch"), e.what());
  }
  const std::size_t m = c.batch.dimension();
  c.service = parse_distributions(r.at("service"), r.key("service"), m);
  if (r.has("batch_service")) {
    const auto ks = r.numbers("batch_service");
    if (ks.size() != m) throw ConfigError(r.key("batch_service"), "expected one batch-service size per class");
    for (double k : ks) c.batch_service.push_back(static_cast<Count>(k));
  } else {
    c.batch_service.assign(m, 1);
  }
  c.servers = static_cast<int>(r.unsigned_int("servers", 1));
  return c;
}

ModelSpec parse_model(const json& v, const std::string& path) {
  Reader r(v, path);
  const auto kind = r.string("kind");
  ModelSpec spec;
  if (kind == "network") {
    spec = parse_network(r);
  } else if (kind == "polling") {
    spec = parse_polling(r);
  } else if (kind == "roving-network") {
    RovingNetworkConfig c;
    c.polling = parse_polling(r);
    c.routing = parse_matrix(r.at("routing"), r.key("routing"), c.polling.size());
    spec = std::move(c);
  } else if (kind == "priority") {
    PriorityConfig c;
    c.arrival_rates = r.numbers("arrival_rates");
    c.service = parse_distributions(r.at("service"), r.key("service"), c.arrival_rates.size());
    spec = std::move(c);
  } else if (kind == "longer-queue") {
    LongerQueueConfig c;
    c.arrival_rates = r.numbers("arrival_rates");
    if (c.arrival_rates.size() != 2) throw ConfigError(r.key("arrival_rates"), "expected two rates");
    c.service = parse_distributions(r.at("service"), r.key("service"), 2);
    c.alpha = r.has("alpha") ? r.numbers("alpha") : std::vector<double>{0.5, 0.5};
    spec = std::move(c);
  } else if (kind == "batch-station") {
    spec = parse_batch_station(r);
  } else {
    throw ConfigError(r.key("kind"),
                      "unknown model kind '" + kind +
                          "' (network, polling, roving-network, priority, longer-queue, batch-station)");
  }
  r.finish();
  try {
    validate(spec);
  } catch (const InvalidParameter& e) {
    throw ConfigError(path, e.what());
  }
  return spec;
}

RunControls parse_run(const json& v, const std::string& path) {
  Reader r(v, path);
  RunControls c;
  c.horizon = r.number("horizon", std::numeric_limits<double>::infinity());
  c.max_events = r.unsigned_int("events", 0);
  c.replications = r.unsigned_int("replications", c.replications);
  c.seed = r.unsigned_int("seed", c.seed);
  c.warmup_fraction = r.number("warmup_fraction", c.warmup_fraction);
  c.batches = r.unsigned_int("batches", c.batches);
  c.k = r.number("k", c.k);
  const auto tie = r.string("tie_policy", "jitter");
  if (tie == "jitter") {
    c.tie_policy = TiePolicy::Jitter;
  } else if (tie == "reject") {
    c.tie_policy = TiePolicy::Reject;
  } else {
    throw ConfigError(r.key("tie_policy"), "expected \"reject\" or \"jitter\"");
  }
  r.finish();
  if (!(c.horizon > 0.0)) throw ConfigError(r.key("horizon"), "must be positive");
  if (!std::isfinite(c.horizon) && c.max_events == 0) throw ConfigError(path, "needs a horizon or an event cap");
  if (c.replications == 0) throw ConfigError(r.key("replications"), "must be at least 1");
  if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0)) {
    throw ConfigError(r.key("warmup_fraction"), "must lie in [0, 1)");
  }
  if (c.batches < 4 || c.batches % 2 != 0) throw ConfigError(r.key("batches"), "must be even and at least 4");
  if (!(c.k > 0.0)) throw ConfigError(r.key("k"), "must be positive");
  return c;
}

Grid parse_grid(const json& v, const std::string& path, std::size_t m) {
  if (v.is_string()) {
    if (v.get<std::string>() != "default") throw ConfigError(path, "expected \"default\", levels or points");
    return default_grid(m);
  }
  if (v.is_object()) {
    Reader r(v, path);
    const auto levels = r.numbers("levels");
    r.finish();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) throw ConfigError(index(join(path, "levels"), i), "must lie in [0, 1]");
    }
    auto g = tensor_grid(levels, m);
    if (g.size() > kMaxGridPoints) throw ConfigError(path, "more than 500 grid points");
    return g;
  }
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty list of points");
  Grid g;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto p = index(path, k);
    if (!v[k].is_array() || v[k].size() != m) throw ConfigError(p, "expected " + std::to_string(m) + " coordinates");
    std::vector<double> z;
    for (std::size_t i = 0; i < m; ++i) {
      if (!v[k][i].is_number() || v[k][i].get<double>() < 0.0 || v[k][i].get<double>() > 1.0) {
        throw ConfigError(index(p, i), "expected a number in [0, 1]");
      }
      z.push_back(v[k][i].get<double>());
    }
    g.push_back(std::move(z));
  }
  if (g.size() > kMaxGridPoints) throw ConfigError(path, "more than 500 grid points");
  return g;
}

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      out += c;
    } else if (c == '[') {
      out += '_';
    }
  }
  return out;
}

}  // namespace

ServiceDistribution parse_distribution(const json& doc, const std::string& path) {
  Reader r(doc, path);
  const auto kind = r.string("kind");
  auto build = [&]() -> ServiceDistribution {
    if (kind == "exponential") return ServiceDistribution::exponential(r.number("rate"));
    if (kind == "erlang") return ServiceDistribution::erlang(static_cast<int>(r.unsigned_int("shape")), r.number("rate"));
    if (kind == "deterministic") return ServiceDistribution::deterministic(r.number("value"));
    if (kind == "uniform") return ServiceDistribution::uniform(r.number("lo"), r.number("hi"));
    if (kind == "hyperexponential") {
      return ServiceDistribution::hyperexponential(r.numbers("weights"), r.numbers("rates"));
    }
    throw ConfigError(r.key("kind"), "unknown distribution '" + kind +
                                         "' (exponential, erlang, deterministic, uniform, hyperexponential)");
  };
  try {
    auto d = build();
    r.finish();
    return d;
  } catch (const InvalidParameter& e) {
    throw ConfigError(path, e.what());
  }
}

Scenario parse_scenario(const json& doc) {
  Reader r(doc, "");
  const auto schema = r.string("schema");
  if (schema != kScenarioSchema) throw ConfigError("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
  Scenario s;
  s.name = r.string("name");
  s.description = r.string("description", "");
  s.model = parse_model(r.at("model"), "model");
  s.run = r.has("run") ? parse_run(r.at("run"), "run") : RunControls{};
  if (r.has("grid")) s.grid = parse_grid(r.at("grid"), "grid", s.dimension());
  if (r.has("checks")) {
    const auto& c = r.array("checks");
    std::set<std::string> families;
    const auto& known = check_families();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_string() || std::find(known.begin(), known.end(), c[i].get<std::string>()) == known.end()) {
        throw ConfigError(index("checks", i), "unknown check family");
      }
      families.insert(c[i].get<std::string>());
    }
    s.checks = std::move(families);
  }
  if (r.has("output")) {
    Reader o(r.at("output"), "output");
    s.output.report = o.string("report", "");
    s.output.plot_dir = o.string("plot_dir", "");
    s.output.jump_log = o.string("jump_log", "");
    o.finish();
  }
  r.finish();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("(root)", std::string("not valid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

// ------------------------------------------------------------ running

std::vector<RunResult> simulate(const Scenario& scenario, const RunnerOptions& options) {
  const std::size_t R = scenario.run.replications;
  std::vector<RunResult> runs(R);
  std::vector<std::exception_ptr> errors(R);
  std::atomic<std::size_t> next{0};
  const RngStream root(scenario.run.seed);
  auto worker = [&] {
    for (std::size_t r = next++; r < R; r = next++) {
      try {
        auto model = make_model(scenario.model, root.split(static_cast<std::uint32_t>(r)));
        RunOptions o;
        o.stop.horizon = scenario.run.horizon;
        o.stop.max_events = scenario.run.max_events;
        o.tie_policy = scenario.run.tie_policy;
        if (!scenario.output.jump_log.empty()) {
          o.jump_log_path = R == 1 ? scenario.output.jump_log : scenario.output.jump_log + "." + std::to_string(r + 1);
        }
        runs[r] = run(*model, o);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, R));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

EstimationOptions estimation_options(const Scenario& scenario) {
  EstimationOptions o;
  o.warmup_fraction = scenario.run.warmup_fraction;
  o.batches = scenario.run.batches;
  return o;
}

BalanceReport verify_runs(const Scenario& scenario, std::span<const RunResult> runs) {
  const auto est = build_estimates(runs, estimation_options(scenario));
  VerifyInput in;
  in.spec = &scenario.model;
  in.estimates = &est;
  in.runs = runs;
  in.grid = scenario.evaluation_grid();
  in.warmup_fraction = scenario.run.warmup_fraction;
  in.k = scenario.run.k;
  BalanceReport report;
  report.scenario = scenario.name;
  report.seed = scenario.run.seed;
  report.horizon = scenario.run.horizon;
  if (scenario.checks) {
    if (scenario.checks->empty()) {
      report.metadata["checks"] = json::array();
    } else {
      in.families = *scenario.checks;
      report.checks = verify(in);
    }
  } else {
    report.checks = verify(in);
  }

  auto& meta = report.metadata;
  meta["model"] = model_kind(scenario.model);
  meta["dimension"] = scenario.dimension();
  meta["replications"] = runs.size();
  meta["warmup_fraction"] = scenario.run.warmup_fraction;
  meta["batches_per_replication"] = scenario.run.batches;
  meta["sigma_multiple"] = scenario.run.k;
  meta["grid_points"] = in.grid.size();
  meta["test_function_library"] = kTestFunctionLibraryVersion;
  json events = json::array(), jitters = json::array(), ends = json::array();
  for (const auto& r : runs) {
    events.push_back(r.events);
    jitters.push_back(r.jitters);
    ends.push_back(r.end_time);
  }
  meta["events"] = events;
  meta["jitters"] = jitters;
  meta["end_time"] = ends;
  json conventions = json::array();
  if (const auto* p = std::get_if<PollingConfig>(&scenario.model)) {
    for (const auto& d : p->discipline) {
      if (d.kind == PollingDiscipline::Kind::KLimited) {
        conventions.push_back("k-limited visits are tagged complete at the epoch the server decides to leave");
        break;
      }
    }
  }
  if (const auto* n = std::get_if<NetworkConfig>(&scenario.model); n && n->router && !n->router->markovian()) {
    conventions.push_back("state-dependent routing instance chosen by this toolkit: " + n->router->describe());
  }
  if (!conventions.empty()) meta["conventions"] = conventions;
  return report;
}

BalanceReport run_scenario(const Scenario& scenario, const RunnerOptions& options) {
  const auto runs = simulate(scenario, options);
  return verify_runs(scenario, runs);
}

std::string dump_report(const BalanceReport& report) { return to_json(report).dump(2) + "\n"; }

std::vector<std::string> emit_plotdata(const BalanceReport& report, const std::string& dir) {
  std::vector<std::string> files;
  bool any = false;
  for (const auto& c : report.checks) any = any || !c.points.empty();
  if (!any) return files;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create plot directory '" + dir + "': " + ec.message());
  for (const auto& c : report.checks) {
    if (c.points.empty()) continue;
    const auto path = (std::filesystem::path(dir) / (file_stem(c.name) + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const std::size_t m = c.points.front().z.size();
    for (std::size_t i = 0; i < m; ++i) out << 'z' << i + 1 << ',';
    if (m == 0) out << "label,";
    out << "lhs,rhs,residual,sigma,tolerance,pass\n";
    out.precision(17);
    for (const auto& p : c.points) {
      for (double z : p.z) out << z << ',';
      if (m == 0) out << '"' << p.label << "\",";
      out << p.lhs << ',' << p.rhs << ',' << p.residual << ',' << p.sigma << ',' << p.tolerance << ','
          << (p.pass ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
    files.push_back(path);
  }
  return files;
}

std::vector<std::string> list_scenario_files(const std::string& dir) {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path().string());
  }
  if (ec) throw IoError("cannot list '" + dir + "': " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace qbal
