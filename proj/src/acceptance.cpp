#include "specsim/acceptance.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace specsim::acceptance {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Verdict draw(std::mt19937_64& rng, double alpha, double mean_confidence, double concentration,
             bool correlated) {
  Verdict v;
  v.confidence = sample_confidence(rng, mean_confidence, concentration);
  const double p = correlated ? v.confidence : alpha;
  v.accepted = uniform01(rng) < p;
  return v;
}

}  // namespace

std::mt19937_64 make_engine(std::uint64_t seed) {
  std::uint64_t state = seed;
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state))};
  return std::mt19937_64(seq);
}

double sample_confidence(std::mt19937_64& rng, double mean, double concentration) {
  if (mean <= 0.0) return 0.0;
  if (mean >= 1.0) return 1.0;
  std::gamma_distribution<double> a(concentration * mean, 1.0);
  std::gamma_distribution<double> b(concentration * (1.0 - mean), 1.0);
  const double x = a(rng);
  const double y = b(rng);
  if (x + y <= 0.0) return mean;
  return x / (x + y);
}

void validate_regime_spec(const AcceptanceSpec& spec) {
  const std::size_t k = spec.regimes.size();
  if (k == 0) throw ConfigError("acceptance.params.regimes", "at least one regime is required");
  for (const auto& r : spec.regimes)
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0) || !(r.mean_confidence >= 0.0 && r.mean_confidence <= 1.0))
      throw ConfigError("acceptance.params.regimes", "regime '" + r.name + "' has values outside [0, 1]");
  if (spec.transition.size() != k)
    throw ConfigError("acceptance.params.transition", "matrix size does not match regime count");
  for (std::size_t i = 0; i < k; ++i) {
    const auto& row = spec.transition[i];
    if (row.size() != k) throw ConfigError("acceptance.params.transition", "matrix is not square");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw ConfigError("acceptance.params.transition", "negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("acceptance.params.transition[" + std::to_string(i) + "]",
                        "row does not sum to 1");
  }
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition) {
  const std::size_t k = transition.size();
  std::vector<double> pi(k, 1.0 / static_cast<double>(k));
  std::vector<double> next(k);
  // Lazy chain (P + I) / 2 converges for periodic chains too.
  for (int iter = 0; iter < 100000; ++iter) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += pi[i] * transition[i][j];
      next[j] = 0.5 * (s + pi[j]);
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < k; ++j) diff += std::abs(next[j] - pi[j]);
    pi.swap(next);
    if (diff < 1e-15) break;
  }
  return pi;
}

// --- iid ---------------------------------------------------------------------

IidProcess::IidProcess(double alpha, double mean_confidence, double concentration, bool correlated,
                       std::uint64_t seed)
    : alpha_(alpha),
      mean_confidence_(mean_confidence),
      concentration_(concentration),
      correlated_(correlated),
      rng_(make_engine(seed)) {}

Verdict IidProcess::next_verdict() {
  return draw(rng_, alpha_, mean_confidence_, concentration_, correlated_);
}

// --- regime ------------------------------------------------------------------

RegimeProcess::RegimeProcess(std::vector<Regime> regimes, std::vector<std::vector<double>> transition,
                             double concentration, bool correlated, std::uint64_t seed)
    : regimes_(std::move(regimes)),
      concentration_(concentration),
      correlated_(correlated),
      rng_(make_engine(seed)) {
  for (const auto& row : transition) rows_.emplace_back(row.begin(), row.end());
  const auto pi = stationary_distribution(transition);
  initial_ = std::discrete_distribution<std::size_t>(pi.begin(), pi.end());
}

bool RegimeProcess::begin_step() {
  if (!started_) {
    current_ = initial_(rng_);
    started_ = true;
  } else {
    current_ = rows_[current_](rng_);
  }
  return true;
}

Verdict RegimeProcess::next_verdict() {
  const Regime& r = regimes_[current_];
  return draw(rng_, r.alpha, r.mean_confidence, concentration_, correlated_);
}

// --- replay ------------------------------------------------------------------

ReplayProcess::ReplayProcess(std::vector<TraceRecord> records) : records_(std::move(records)) {}

bool ReplayProcess::begin_step() {
  if (next_record_ >= records_.size()) {
    current_ = nullptr;
    return false;
  }
  current_ = &records_[next_record_++];
  position_ = 0;
  return true;
}

Verdict ReplayProcess::next_verdict() {
  if (!current_) throw std::logic_error("replay: next_verdict() outside a step");
  if (position_ >= current_->accepts.size()) {
    ++position_;
    return {false, 0.0};
  }
  Verdict v{current_->accepts[position_], current_->confidences[position_]};
  ++position_;
  return v;
}

std::unique_ptr<AcceptanceProcess> make_process(const AcceptanceSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case AcceptanceKind::iid:
      return std::make_unique<IidProcess>(spec.alpha, spec.mean_confidence, spec.concentration,
                                          spec.correlated, seed);
    case AcceptanceKind::regime:
      validate_regime_spec(spec);
      return std::make_unique<RegimeProcess>(spec.regimes, spec.transition, spec.concentration,
                                             spec.correlated, seed);
    case AcceptanceKind::replay:
      return std::make_unique<ReplayProcess>(load_trace(spec.trace_path));
  }
  throw ConfigError("acceptance.name", "unhandled acceptance process");
}

// --- trace files -------------------------------------------------------------

TraceRecord parse_trace_record(const json& j, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  if (!j.is_object()) throw ConfigError(where, "expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "step" && key != "accepts" && key != "confidences")
      throw ConfigError(where, "unknown field '" + key + "'");

  TraceRecord r;
  auto step = j.find("step");
  if (step == j.end() || !step->is_number_integer() || step->get<std::int64_t>() < 0)
    throw ConfigError(where, "'step' must be a non-negative integer");
  r.step_index = step->get<std::int64_t>();

  auto accepts = j.find("accepts");
  auto confs = j.find("confidences");
  if (accepts == j.end() || !accepts->is_array()) throw ConfigError(where, "'accepts' must be an array");
  if (confs == j.end() || !confs->is_array()) throw ConfigError(where, "'confidences' must be an array");
  for (const auto& a : *accepts) {
    if (!a.is_boolean()) throw ConfigError(where, "'accepts' entries must be booleans");
    r.accepts.push_back(a.get<bool>());
  }
  for (const auto& c : *confs) {
    if (!c.is_number()) throw ConfigError(where, "'confidences' entries must be numbers");
    const double v = c.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where, "confidence outside [0, 1]");
    r.confidences.push_back(v);
  }
  if (r.accepts.size() != r.confidences.size())
    throw ConfigError(where, "length mismatch: " + std::to_string(r.accepts.size()) + " accepts vs " +
                                 std::to_string(r.confidences.size()) + " confidences");
  return r;
}

json to_json(const TraceRecord& r) {
  json accepts = json::array();
  for (bool a : r.accepts) accepts.push_back(a);
  return {{"step", r.step_index}, {"accepts", accepts}, {"confidences", r.confidences}};
}

std::vector<TraceRecord> read_trace(std::istream& in, const std::string& source) {
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw ConfigError(source + ": line " + std::to_string(number), "malformed JSON");
    }
    try {
      records.push_back(parse_trace_record(j, number));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.field(), e.message());
    }
  }
  return records;
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  return read_trace(in, path.string());
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace '" + path.string() + "'");
  write_trace(out, records);
  if (!out) throw IoError("error writing trace '" + path.string() + "'");
}

}  // namespace specsim::acceptance
