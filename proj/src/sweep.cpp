#include "specsim/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace specsim::sweep {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int64_t as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
  return v.get<std::int64_t>();
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

void SweepSpec::validate() const {
  if (initial_gammas.empty()) throw ConfigError("initial_gammas", "must not be empty");
  for (int g : initial_gammas)
    if (g < 1) throw ConfigError("initial_gammas", "values must be >= 1");
  if (policies.empty()) throw ConfigError("policies", "must not be empty");
  if (profiles.empty()) throw ConfigError("profiles", "must not be empty");
  if (tasks.empty()) throw ConfigError("acceptance", "must not be empty");
  if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (target_tokens < 1) throw ConfigError("target_tokens", "must be >= 1");

  std::set<std::string> labels;
  for (const auto& p : policies)
    if (!labels.insert(p.label).second) throw ConfigError("policies", "duplicate label '" + p.label + "'");
  labels.clear();
  for (const auto& p : profiles)
    if (!labels.insert(p.name).second) throw ConfigError("profiles", "duplicate profile '" + p.name + "'");
  labels.clear();
  for (const auto& t : tasks)
    if (!labels.insert(t.label).second) throw ConfigError("acceptance", "duplicate task '" + t.label + "'");
}

SweepSpec parse_sweep(const json& j, ParseOptions opts) {
  if (!j.is_object()) throw ConfigError("", "expected an object");
  static const std::set<std::string> known = {"schema",   "initial_gammas", "policies",      "profiles",
                                              "acceptance", "replicates",   "target_tokens", "seed",
                                              "charge_probe"};
  if (!opts.lenient)
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) throw ConfigError(key, "unknown field");

  auto schema = j.find("schema");
  if (schema == j.end()) throw ConfigError("schema", "missing required field");
  if (as_int(*schema, "schema") != kConfigSchema)
    throw ConfigError("schema", "unsupported schema version (expected 1)");

  SweepSpec spec;
  if (auto g = j.find("initial_gammas"); g != j.end()) {
    if (!g->is_array()) throw ConfigError("initial_gammas", "expected an array");
    spec.initial_gammas.clear();
    for (std::size_t i = 0; i < g->size(); ++i)
      spec.initial_gammas.push_back(
          static_cast<int>(as_int((*g)[i], "initial_gammas[" + std::to_string(i) + "]")));
  }

  auto policies = j.find("policies");
  if (policies == j.end() || !policies->is_array()) throw ConfigError("policies", "expected an array");
  for (std::size_t i = 0; i < policies->size(); ++i) {
    const std::string field = "policies[" + std::to_string(i) + "]";
    json entry = (*policies)[i];
    PolicyEntry pe;
    if (entry.is_object() && entry.contains("label")) {
      if (!entry["label"].is_string()) throw ConfigError(field + ".label", "expected a string");
      pe.label = entry["label"].get<std::string>();
      entry.erase("label");
    }
    pe.spec = parse_policy(entry, field, opts);
    if (pe.label.empty()) pe.label = std::string(to_string(pe.spec.kind));
    spec.policies.push_back(std::move(pe));
  }

  auto profiles = j.find("profiles");
  if (profiles == j.end() || !profiles->is_array()) throw ConfigError("profiles", "expected an array");
  for (std::size_t i = 0; i < profiles->size(); ++i)
    spec.profiles.push_back(parse_profile((*profiles)[i], "profiles[" + std::to_string(i) + "]", opts));

  auto acc = j.find("acceptance");
  if (acc == j.end()) throw ConfigError("acceptance", "missing required field");
  const json tasks = acc->is_array() ? *acc : json::array({*acc});
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string field = acc->is_array() ? "acceptance[" + std::to_string(i) + "]" : "acceptance";
    json entry = tasks[i];
    TaskEntry te;
    if (entry.is_object() && entry.contains("label")) {
      if (!entry["label"].is_string()) throw ConfigError(field + ".label", "expected a string");
      te.label = entry["label"].get<std::string>();
      entry.erase("label");
    }
    te.acceptance = parse_acceptance(entry, field, opts);
    if (te.label.empty()) te.label = std::string(to_string(te.acceptance.kind));
    spec.tasks.push_back(std::move(te));
  }

  if (auto r = j.find("replicates"); r != j.end()) spec.replicates = static_cast<int>(as_int(*r, "replicates"));
  if (auto n = j.find("target_tokens"); n != j.end()) spec.target_tokens = as_int(*n, "target_tokens");
  if (auto s = j.find("seed"); s != j.end()) {
    if (!s->is_number_integer() || s->get<std::int64_t>() < 0)
      throw ConfigError("seed", "expected an unsigned integer");
    spec.seed = s->get<std::uint64_t>();
  }
  if (auto c = j.find("charge_probe"); c != j.end()) {
    if (!c->is_boolean()) throw ConfigError("charge_probe", "expected a boolean");
    spec.charge_probe = c->get<bool>();
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep(const std::filesystem::path& path, ParseOptions opts) {
  SweepSpec spec = parse_sweep(read_json_file(path), opts);
  for (auto& t : spec.tasks) {
    if (t.acceptance.kind != AcceptanceKind::replay) continue;
    std::filesystem::path trace(t.acceptance.trace_path);
    if (trace.is_relative() && !std::filesystem::exists(trace))
      t.acceptance.trace_path = (path.parent_path() / trace).string();
  }
  return spec;
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& profile, const std::string& task,
                        int initial_gamma, int replicate) {
  std::uint64_t h = fnv1a(profile);
  h = fnv1a("\x1f", h);
  h = fnv1a(task, h);
  h = mix(h ^ mix(master_seed));
  h = mix(h ^ static_cast<std::uint64_t>(initial_gamma));
  h = mix(h ^ static_cast<std::uint64_t>(replicate));
  return h;
}

SimulationConfig cell_config(const SweepSpec& spec, const CellKey& key) {
  SimulationConfig c;
  c.profile = spec.profiles.at(key.profile);
  c.policy = spec.policies.at(key.policy).spec;
  c.acceptance = spec.tasks.at(key.task).acceptance;
  c.target_tokens = spec.target_tokens;
  c.initial_gamma = spec.initial_gammas.at(key.gamma);
  c.charge_probe = spec.charge_probe;
  c.seed = cell_seed(spec.seed, c.profile.name, spec.tasks[key.task].label, c.initial_gamma, key.replicate);
  return c;
}

std::vector<CellKey> enumerate_cells(const SweepSpec& spec) {
  std::vector<CellKey> keys;
  for (std::size_t p = 0; p < spec.policies.size(); ++p)
    for (std::size_t f = 0; f < spec.profiles.size(); ++f)
      for (std::size_t t = 0; t < spec.tasks.size(); ++t)
        for (std::size_t g = 0; g < spec.initial_gammas.size(); ++g)
          for (int r = 0; r < spec.replicates; ++r) keys.push_back({p, f, t, g, r});
  return keys;
}

sim::SummaryRow run_cell(const SweepSpec& spec, const CellKey& key) {
  const SimulationConfig config = cell_config(spec, key);
  const sim::EpisodeReport report = sim::run_episode(config);
  sim::SummaryRow row = sim::summarize(config, report);
  row.policy = spec.policies[key.policy].label;
  row.acceptance = spec.tasks[key.task].label;
  return row;
}

SweepResult run_sweep(const SweepSpec& spec, unsigned jobs) {
  spec.validate();
  const std::vector<CellKey> keys = enumerate_cells(spec);
  std::vector<CellResult> cells(keys.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        cells[i] = {keys[i], run_cell(spec, keys[i])};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = keys.size();
      }
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(keys.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.cells = std::move(cells);
  result.aggregates = aggregate(spec, result.cells);
  return result;
}

std::vector<Aggregate> aggregate(const SweepSpec& spec, const std::vector<CellResult>& cells) {
  const std::size_t n_policy = spec.policies.size();
  const std::size_t n_profile = spec.profiles.size();
  const std::size_t n_task = spec.tasks.size();
  const std::size_t n_gamma = spec.initial_gammas.size();

  // sums[policy][profile][task][gamma]
  std::vector<double> sums(n_policy * n_profile * n_task * n_gamma, 0.0);
  std::vector<int> counts(sums.size(), 0);
  auto index = [&](const CellKey& k) {
    return ((k.policy * n_profile + k.profile) * n_task + k.task) * n_gamma + k.gamma;
  };
  for (const auto& c : cells) {
    sums[index(c.key)] += c.row.throughput;
    counts[index(c.key)] += 1;
  }

  std::vector<Aggregate> out;
  for (std::size_t p = 0; p < n_policy; ++p) {
    for (std::size_t f = 0; f < n_profile; ++f) {
      Aggregate a;
      a.policy = spec.policies[p].label;
      a.profile = spec.profiles[f].name;
      for (std::size_t g = 0; g < n_gamma; ++g) {
        // Replicates are averaged inside each task, then tasks uniformly.
        double task_mean = 0.0;
        for (std::size_t t = 0; t < n_task; ++t) {
          const std::size_t i = index({p, f, t, g, 0});
          task_mean += counts[i] ? sums[i] / counts[i] : 0.0;
        }
        a.per_gamma.push_back(task_mean / static_cast<double>(n_task));
      }
      const double n = static_cast<double>(a.per_gamma.size());
      a.mean = std::accumulate(a.per_gamma.begin(), a.per_gamma.end(), 0.0) / n;
      if (a.per_gamma.size() > 1) {
        double ss = 0.0;
        for (double v : a.per_gamma) ss += (v - a.mean) * (v - a.mean);
        a.std_dev = std::sqrt(ss / (n - 1.0));
      }
      out.push_back(std::move(a));
    }
  }

  // Normalize by the first fixed-window policy on the same profile.
  std::optional<std::size_t> baseline;
  for (std::size_t p = 0; p < n_policy && !baseline; ++p)
    if (spec.policies[p].spec.kind == PolicyKind::fixed) baseline = p;
  if (baseline) {
    for (std::size_t p = 0; p < n_policy; ++p) {
      for (std::size_t f = 0; f < n_profile; ++f) {
        const Aggregate& base = out[*baseline * n_profile + f];
        Aggregate& a = out[p * n_profile + f];
        if (base.mean > 0.0) {
          a.speedup = a.mean / base.mean;
          a.speedup_std = a.std_dev / base.mean;
        }
      }
    }
  }
  return out;
}

std::string cells_csv(const SweepSpec& spec, const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os << "csv_version,policy,profile,task,initial_gamma,replicate,seed,total_tokens,steps,calls_target,"
        "calls_draft,total_ms,throughput_tps,mean_gamma,mean_accepted,truncated\n";
  for (const auto& c : cells) {
    const auto& r = c.row;
    os << sim::kSummaryCsvVersion << ',' << r.policy << ',' << spec.profiles[c.key.profile].name << ','
       << r.acceptance << ',' << r.initial_gamma << ',' << c.key.replicate << ',' << r.seed << ','
       << r.total_tokens << ',' << r.steps << ',' << r.calls_target << ',' << r.calls_draft << ','
       << fmt(r.total_ms, 6) << ',' << fmt(r.throughput, 6) << ',' << fmt(r.mean_gamma, 6) << ','
       << fmt(r.mean_accepted, 6) << ',' << (r.truncated ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string summary_csv(const std::vector<Aggregate>& aggregates) {
  std::ostringstream os;
  os << "csv_version,policy,profile,mean_throughput_tps,std_across_gamma_tps,speedup,speedup_std\n";
  for (const auto& a : aggregates) {
    os << sim::kSummaryCsvVersion << ',' << a.policy << ',' << a.profile << ',' << fmt(a.mean, 6) << ','
       << fmt(a.std_dev, 6) << ',' << (a.speedup ? fmt(*a.speedup, 6) : "") << ','
       << (a.speedup_std ? fmt(*a.speedup_std, 6) : "") << '\n';
  }
  return os.str();
}

std::string format_table(const SweepSpec& spec, const std::vector<Aggregate>& aggregates) {
  const std::size_t n_profile = spec.profiles.size();
  const bool normalized = !aggregates.empty() && aggregates.front().speedup.has_value();

  std::ostringstream os;
  if (normalized)
    os << "Speedup over fixed-window decoding (mean of per-gamma mean throughput / fixed mean);\n"
          "+- is the std across initial gamma values, after averaging replicates and tasks.\n";
  else
    os << "Mean throughput in tokens/s; +- is the std across initial gamma values,\n"
          "after averaging replicates and tasks.\n";

  std::vector<std::string> header{"Method"};
  for (const auto& p : spec.profiles) header.push_back(p.name);
  const bool with_average = n_profile > 1;
  if (with_average) header.push_back("Average");

  std::vector<std::vector<std::string>> rows;
  for (std::size_t p = 0; p < spec.policies.size(); ++p) {
    std::vector<std::string> row{spec.policies[p].label};
    double mean_sum = 0.0;
    double std_sum = 0.0;
    for (std::size_t f = 0; f < n_profile; ++f) {
      const Aggregate& a = aggregates[p * n_profile + f];
      const double m = normalized ? a.speedup.value_or(0.0) : a.mean;
      const double s = normalized ? a.speedup_std.value_or(0.0) : a.std_dev;
      mean_sum += m;
      std_sum += s;
      row.push_back(normalized ? fmt(m, 2) + " +- " + fmt(s, 2) + "x" : fmt(m, 1) + " +- " + fmt(s, 1));
    }
    if (with_average) {
      const double m = mean_sum / n_profile;
      const double s = std_sum / n_profile;
      row.push_back(normalized ? fmt(m, 2) + " +- " + fmt(s, 2) + "x" : fmt(m, 1) + " +- " + fmt(s, 1));
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) os << "  ";
      os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    os << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) emit(r);
  return os.str();
}

}  // namespace specsim::sweep
