#include "specsim/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace specsim {

namespace {

// Reads fields out of one JSON object and remembers which keys were used so
// that leftovers can be rejected in strict mode.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, ParseOptions opts)
      : j_(j), path_(std::move(path)), opts_(opts) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string child(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    used_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(std::string_view key) {
    const json* v = find(key);
    if (!v) throw ConfigError(child(key), "missing required field");
    return *v;
  }

  double number(std::string_view key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(child(key), "expected a number");
    return v->get<double>();
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return as_integer(*v, child(key));
  }

  bool boolean(std::string_view key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(child(key), "expected a boolean");
    return v->get<bool>();
  }

  std::string string(std::string_view key, std::string fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ConfigError(child(key), "expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    if (opts_.lenient) return;
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) throw ConfigError(child(key), "unknown field");
  }

  static std::int64_t as_integer(const json& v, const std::string& field) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(field, "expected an integer");
  }

 private:
  const json& j_;
  std::string path_;
  ParseOptions opts_;
  std::set<std::string> used_;
};

void require_unit(double v, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(field, "must lie in [0, 1]");
}

}  // namespace

void LatencyProfile::validate(const std::string& field) const {
  if (!(t_draft_ms > 0.0) || !std::isfinite(t_draft_ms))
    throw ConfigError(field + ".t_draft_ms", "non-positive latency");
  if (!(t_target_ms > 0.0) || !std::isfinite(t_target_ms))
    throw ConfigError(field + ".t_target_ms", "non-positive latency");
  if (!(verify_ms_per_token >= 0.0) || !std::isfinite(verify_ms_per_token))
    throw ConfigError(field + ".verify_ms_per_token", "must be a finite value >= 0");
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::fixed: return "fixed";
    case PolicyKind::hf_heuristic: return "hf_heuristic";
    case PolicyKind::assistant_threshold: return "assistant_threshold";
    case PolicyKind::gammatune: return "gammatune";
    case PolicyKind::gammatune_plus: return "gammatune_plus";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name, const std::string& field) {
  for (auto k : {PolicyKind::fixed, PolicyKind::hf_heuristic, PolicyKind::assistant_threshold,
                 PolicyKind::gammatune, PolicyKind::gammatune_plus})
    if (to_string(k) == name) return k;
  throw ConfigError(field, "unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(AcceptanceKind kind) {
  switch (kind) {
    case AcceptanceKind::iid: return "iid";
    case AcceptanceKind::regime: return "regime";
    case AcceptanceKind::replay: return "replay";
  }
  return "?";
}

AcceptanceKind parse_acceptance_kind(std::string_view name, const std::string& field) {
  for (auto k : {AcceptanceKind::iid, AcceptanceKind::regime, AcceptanceKind::replay})
    if (to_string(k) == name) return k;
  throw ConfigError(field, "unknown acceptance process '" + std::string(name) + "'");
}

AcceptanceSpec default_regime_spec() {
  AcceptanceSpec spec;
  spec.kind = AcceptanceKind::regime;
  spec.regimes = {{"easy", 0.9, 0.85}, {"moderate", 0.6, 0.6}, {"difficult", 0.2, 0.3}};
  spec.transition = {{0.9, 0.05, 0.05}, {0.05, 0.9, 0.05}, {0.05, 0.05, 0.9}};
  return spec;
}

const std::map<std::string, LatencyProfile>& builtin_profiles() {
  static const std::map<std::string, LatencyProfile> catalog = [] {
    std::map<std::string, LatencyProfile> m;
    auto add = [&m](std::string name, double target, double draft) {
      m.emplace(name, LatencyProfile{name, draft, target, 0.0});
    };
    add("vicuna-13b-v1.5/vicuna-160m", 20.15, 5.61);
    add("vicuna-7b-v1.5/vicuna-68m", 14.29, 1.76);
    add("Llama-3.1-8B/Llama-3.2-1B", 16.65, 8.87);
    // Target latency is the int4-quantized measurement.
    add("Llama-3.1-70B/Llama-3.1-8B", 925.05, 16.65);
    return m;
  }();
  return catalog;
}

const LatencyProfile& find_profile(std::string_view name) {
  const auto& catalog = builtin_profiles();
  auto it = catalog.find(std::string(name));
  if (it == catalog.end()) throw ConfigError("profile", "unknown profile '" + std::string(name) + "'");
  return it->second;
}

LatencyProfile parse_profile(const json& j, const std::string& field, ParseOptions opts) {
  if (j.is_string()) {
    try {
      return find_profile(j.get<std::string>());
    } catch (const ConfigError&) {
      throw ConfigError(field, "unknown profile '" + j.get<std::string>() + "'");
    }
  }
  ObjectReader r(j, field, opts);
  LatencyProfile p;
  p.name = r.string("name", "custom");
  p.t_draft_ms = r.number("t_draft_ms", 0.0);
  p.t_target_ms = r.number("t_target_ms", 0.0);
  if (!r.find("t_draft_ms")) throw ConfigError(field + ".t_draft_ms", "missing required field");
  if (!r.find("t_target_ms")) throw ConfigError(field + ".t_target_ms", "missing required field");
  p.verify_ms_per_token = r.number("verify_ms_per_token", 0.0);
  r.finish();
  p.validate(field);
  return p;
}

PolicySpec parse_policy(const json& j, const std::string& field, ParseOptions opts) {
  PolicySpec spec;
  if (j.is_string()) {
    spec.kind = parse_policy_kind(j.get<std::string>(), field);
    return spec;
  }
  ObjectReader r(j, field, opts);
  const json& name = r.require("name");
  if (!name.is_string()) throw ConfigError(r.child("name"), "expected a string");
  spec.kind = parse_policy_kind(name.get<std::string>(), r.child("name"));

  if (const json* params = r.find("params")) {
    const std::string pf = r.child("params");
    ObjectReader p(*params, pf, opts);
    PolicyParams& out = spec.params;
    out.eta = p.number("eta", out.eta);
    out.delta = static_cast<int>(p.integer("delta", out.delta));
    out.gamma_min = static_cast<int>(p.integer("gamma_min", out.gamma_min));
    out.gamma_max = static_cast<int>(p.integer("gamma_max", out.gamma_max));
    out.tau = p.number("tau", out.tau);
    out.hf_increment = static_cast<int>(p.integer("hf_increment", out.hf_increment));
    out.hf_decrement = static_cast<int>(p.integer("hf_decrement", out.hf_decrement));
    std::string mode = p.string("expansion_mode", "augmented");
    if (mode == "augmented") out.expansion_mode = ExpansionMode::augmented;
    else if (mode == "literal") out.expansion_mode = ExpansionMode::literal;
    else throw ConfigError(pf + ".expansion_mode", "expected \"augmented\" or \"literal\"");
    p.finish();

    if (!(out.eta > 0.0 && out.eta <= 1.0)) throw ConfigError(pf + ".eta", "must lie in (0, 1]");
    if (out.delta < 0) throw ConfigError(pf + ".delta", "must be >= 0");
    if (out.gamma_min < 1) throw ConfigError(pf + ".gamma_min", "must be >= 1");
    if (out.gamma_min > out.gamma_max)
      throw ConfigError(pf + ".gamma_max", "gamma_min exceeds gamma_max");
    if (!(out.tau >= 0.0 && out.tau <= 1.0)) throw ConfigError(pf + ".tau", "must lie in [0, 1]");
    if (out.hf_increment < 0) throw ConfigError(pf + ".hf_increment", "must be >= 0");
    if (out.hf_decrement < 0) throw ConfigError(pf + ".hf_decrement", "must be >= 0");
  }
  r.finish();
  return spec;
}

AcceptanceSpec parse_acceptance(const json& j, const std::string& field, ParseOptions opts) {
  ObjectReader r(j, field, opts);
  const json& name = r.require("name");
  if (!name.is_string()) throw ConfigError(r.child("name"), "expected a string");
  const AcceptanceKind kind = parse_acceptance_kind(name.get<std::string>(), r.child("name"));

  AcceptanceSpec spec = kind == AcceptanceKind::regime ? default_regime_spec() : AcceptanceSpec{};
  spec.kind = kind;
  const json empty = json::object();
  const json* params = r.find("params");
  const std::string pf = r.child("params");
  ObjectReader p(params ? *params : empty, pf, opts);

  switch (kind) {
    case AcceptanceKind::iid:
      spec.alpha = p.number("alpha", spec.alpha);
      spec.mean_confidence = p.number("mean_confidence", spec.mean_confidence);
      require_unit(spec.alpha, pf + ".alpha");
      require_unit(spec.mean_confidence, pf + ".mean_confidence");
      break;
    case AcceptanceKind::regime: {
      if (const json* regimes = p.find("regimes")) {
        if (!regimes->is_array() || regimes->empty())
          throw ConfigError(pf + ".regimes", "expected a non-empty array");
        spec.regimes.clear();
        for (std::size_t i = 0; i < regimes->size(); ++i) {
          const std::string rf = pf + ".regimes[" + std::to_string(i) + "]";
          ObjectReader rr((*regimes)[i], rf, opts);
          Regime reg;
          reg.name = rr.string("name", "regime" + std::to_string(i));
          reg.alpha = rr.number("alpha", reg.alpha);
          reg.mean_confidence = rr.number("mean_confidence", reg.mean_confidence);
          rr.finish();
          require_unit(reg.alpha, rf + ".alpha");
          require_unit(reg.mean_confidence, rf + ".mean_confidence");
          spec.regimes.push_back(reg);
        }
      }
      const std::size_t k = spec.regimes.size();
      const json* matrix = p.find("transition");
      const json* self = p.find("self_transition");
      if (matrix && self)
        throw ConfigError(pf, "give either transition or self_transition, not both");
      if (matrix) {
        if (!matrix->is_array() || matrix->size() != k)
          throw ConfigError(pf + ".transition", "expected a " + std::to_string(k) + "x" +
                                                    std::to_string(k) + " matrix");
        spec.transition.assign(k, std::vector<double>(k, 0.0));
        for (std::size_t i = 0; i < k; ++i) {
          const std::string rowf = pf + ".transition[" + std::to_string(i) + "]";
          const json& row = (*matrix)[i];
          if (!row.is_array() || row.size() != k)
            throw ConfigError(rowf, "expected " + std::to_string(k) + " entries");
          for (std::size_t c = 0; c < k; ++c) {
            if (!row[c].is_number()) throw ConfigError(rowf, "expected numbers");
            spec.transition[i][c] = row[c].get<double>();
          }
        }
      } else if (self || spec.transition.size() != k) {
        const double stay = self ? (self->is_number() ? self->get<double>() : -1.0) : 0.9;
        require_unit(stay, pf + ".self_transition");
        spec.transition.assign(k, std::vector<double>(k, k > 1 ? (1.0 - stay) / (k - 1) : 0.0));
        for (std::size_t i = 0; i < k; ++i) spec.transition[i][i] = k > 1 ? stay : 1.0;
      }
      for (std::size_t i = 0; i < k; ++i) {
        double sum = 0.0;
        for (double v : spec.transition[i]) {
          if (!(v >= 0.0)) throw ConfigError(pf + ".transition", "negative probability");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw ConfigError(pf + ".transition[" + std::to_string(i) + "]", "row does not sum to 1");
      }
      break;
    }
    case AcceptanceKind::replay:
      spec.trace_path = p.string("path", "");
      if (spec.trace_path.empty()) throw ConfigError(pf + ".path", "missing trace path");
      break;
  }
  if (kind != AcceptanceKind::replay) {
    spec.concentration = p.number("concentration", spec.concentration);
    spec.correlated = p.boolean("correlated", spec.correlated);
    if (!(spec.concentration > 0.0))
      throw ConfigError(pf + ".concentration", "must be > 0");
  }
  p.finish();
  r.finish();
  return spec;
}

SimulationConfig parse_config(const json& j, ParseOptions opts) {
  ObjectReader r(j, "", opts);
  const json& schema = r.require("schema");
  if (ObjectReader::as_integer(schema, "schema") != kConfigSchema)
    throw ConfigError("schema", "unsupported schema version (expected 1)");

  SimulationConfig c;
  c.profile = parse_profile(r.require("profile"), "profile", opts);
  c.policy = parse_policy(r.require("policy"), "policy", opts);
  c.acceptance = parse_acceptance(r.require("acceptance"), "acceptance", opts);
  c.target_tokens = r.integer("target_tokens", c.target_tokens);
  c.initial_gamma = static_cast<int>(r.integer("initial_gamma", c.initial_gamma));
  const json* seed = r.find("seed");
  if (seed) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0))
      throw ConfigError("seed", "expected an unsigned integer");
    c.seed = seed->get<std::uint64_t>();
  }
  c.charge_probe = r.boolean("charge_probe", c.charge_probe);
  r.finish();

  if (c.target_tokens < 1) throw ConfigError("target_tokens", "must be >= 1");
  if (c.initial_gamma < 1) throw ConfigError("initial_gamma", "must be >= 1");
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

SimulationConfig load_config(const std::filesystem::path& path, ParseOptions opts) {
  SimulationConfig c = parse_config(read_json_file(path), opts);
  // Relative trace paths resolve against the config's directory.
  if (c.acceptance.kind == AcceptanceKind::replay) {
    std::filesystem::path trace(c.acceptance.trace_path);
    if (trace.is_relative() && !std::filesystem::exists(trace))
      c.acceptance.trace_path = (path.parent_path() / trace).string();
  }
  return c;
}

json to_json(const LatencyProfile& p) {
  return {{"name", p.name},
          {"t_draft_ms", p.t_draft_ms},
          {"t_target_ms", p.t_target_ms},
          {"verify_ms_per_token", p.verify_ms_per_token}};
}

json to_json(const PolicySpec& s) {
  const PolicyParams& p = s.params;
  return {{"name", std::string(to_string(s.kind))},
          {"params",
           {{"eta", p.eta},
            {"delta", p.delta},
            {"gamma_min", p.gamma_min},
            {"gamma_max", p.gamma_max},
            {"tau", p.tau},
            {"expansion_mode", p.expansion_mode == ExpansionMode::literal ? "literal" : "augmented"},
            {"hf_increment", p.hf_increment},
            {"hf_decrement", p.hf_decrement}}}};
}

json to_json(const AcceptanceSpec& s) {
  json params = json::object();
  switch (s.kind) {
    case AcceptanceKind::iid:
      params["alpha"] = s.alpha;
      params["mean_confidence"] = s.mean_confidence;
      break;
    case AcceptanceKind::regime: {
      json regimes = json::array();
      for (const auto& r : s.regimes)
        regimes.push_back({{"name", r.name}, {"alpha", r.alpha}, {"mean_confidence", r.mean_confidence}});
      params["regimes"] = regimes;
      params["transition"] = s.transition;
      break;
    }
    case AcceptanceKind::replay:
      params["path"] = s.trace_path;
      break;
  }
  if (s.kind != AcceptanceKind::replay) {
    params["concentration"] = s.concentration;
    params["correlated"] = s.correlated;
  }
  return {{"name", std::string(to_string(s.kind))}, {"params", params}};
}

json to_json(const SimulationConfig& c) {
  return {{"schema", kConfigSchema},
          {"profile", to_json(c.profile)},
          {"policy", to_json(c.policy)},
          {"acceptance", to_json(c.acceptance)},
          {"target_tokens", c.target_tokens},
          {"initial_gamma", c.initial_gamma},
          {"seed", c.seed},
          {"charge_probe", c.charge_probe}};
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("", "override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) {
      // A builtin profile name is promoted to its inline form before editing.
      if (node->is_string() && key.compare(0, start, "profile.") == 0)
        *node = to_json(find_profile(node->get<std::string>()));
      else
        throw ConfigError(key, "cannot descend into a non-object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace specsim
