#include "specsim/sim.hpp"

#include <cstdio>
#include <sstream>

namespace specsim::sim {

using acceptance::Verdict;
using policy::ConfidenceGate;

EpisodeReport run_episode(const SimulationConfig& config) {
  auto process = acceptance::make_process(config.acceptance, config.seed);
  return run_episode(config, *process);
}

EpisodeReport run_episode(const SimulationConfig& config, acceptance::AcceptanceProcess& process) {
  config.profile.validate();
  if (config.target_tokens < 1) throw ConfigError("target_tokens", "must be >= 1");

  const LatencyProfile& profile = config.profile;
  policy::ControllerState state = policy::controller_init(config.policy, config.initial_gamma);
  const ConfidenceGate gate = policy::confidence_gate(state.kind);

  EpisodeReport report;
  double gamma_sum = 0.0;
  double accepted_sum = 0.0;

  while (report.total_tokens < config.target_tokens) {
    if (!process.begin_step()) {
      report.truncated = true;
      break;
    }

    StepOutcome out;
    out.gamma = state.gamma;
    std::optional<double> last_confidence;
    while (true) {
      if (gate == ConfidenceGate::before_token) {
        // The candidate's own confidence decides whether it is kept.
        if (out.drafted >= state.gamma) break;
        const Verdict v = process.next_verdict();
        if (!policy::should_continue_draft(state, out.drafted, v.confidence).continue_drafting) {
          if (config.charge_probe) ++out.charged_probes;
          break;
        }
        out.verdicts.push_back(v.accepted);
        out.confidences.push_back(v.confidence);
        ++out.drafted;
      } else {
        if (!policy::should_continue_draft(state, out.drafted, last_confidence).continue_drafting)
          break;
        const Verdict v = process.next_verdict();
        out.verdicts.push_back(v.accepted);
        out.confidences.push_back(v.confidence);
        last_confidence = v.confidence;
        ++out.drafted;
      }
    }

    while (out.accepted < out.drafted && out.verdicts[out.accepted]) ++out.accepted;
    out.bonus = true;
    out.elapsed_ms = (out.drafted + out.charged_probes) * profile.t_draft_ms +
                     out.drafted * profile.verify_ms_per_token + profile.t_target_ms;

    report.total_tokens += out.emitted();
    report.total_ms += out.elapsed_ms;
    report.calls_target += 1;
    report.calls_draft += out.drafted + out.charged_probes;
    gamma_sum += out.gamma;
    accepted_sum += out.accepted;

    state = policy::observe_step(state, out);
    report.steps.push_back(std::move(out));
  }

  if (!report.steps.empty()) {
    const double n = static_cast<double>(report.steps.size());
    report.mean_gamma = gamma_sum / n;
    report.mean_accepted = accepted_sum / n;
  }
  if (report.total_ms > 0.0)
    report.throughput_tokens_per_s = 1000.0 * static_cast<double>(report.total_tokens) / report.total_ms;
  return report;
}

SummaryRow summarize(const SimulationConfig& config, const EpisodeReport& report) {
  SummaryRow row;
  row.policy = std::string(to_string(config.policy.kind));
  row.profile = config.profile.name;
  row.acceptance = std::string(to_string(config.acceptance.kind));
  row.initial_gamma = config.initial_gamma;
  row.seed = config.seed;
  row.target_tokens = config.target_tokens;
  row.total_tokens = report.total_tokens;
  row.steps = static_cast<std::int64_t>(report.steps.size());
  row.calls_target = report.calls_target;
  row.calls_draft = report.calls_draft;
  row.total_ms = report.total_ms;
  row.throughput = report.total_ms > 0.0 ? 1000.0 * static_cast<double>(report.total_tokens) / report.total_ms
                                         : 0.0;
  row.mean_gamma = report.mean_gamma;
  row.mean_accepted = report.mean_accepted;
  row.truncated = report.truncated;
  return row;
}

std::string summary_csv_header() {
  return "csv_version,policy,profile,acceptance,initial_gamma,seed,target_tokens,total_tokens,steps,"
         "calls_target,calls_draft,total_ms,throughput_tps,mean_gamma,mean_accepted,truncated";
}

std::string summary_csv_row(const SummaryRow& r) {
  char numbers[160];
  std::snprintf(numbers, sizeof numbers, "%.6f,%.6f,%.6f,%.6f", r.total_ms, r.throughput, r.mean_gamma,
                r.mean_accepted);
  std::ostringstream os;
  os << kSummaryCsvVersion << ',' << r.policy << ',' << r.profile << ',' << r.acceptance << ','
     << r.initial_gamma << ',' << r.seed << ',' << r.target_tokens << ',' << r.total_tokens << ','
     << r.steps << ',' << r.calls_target << ',' << r.calls_draft << ',' << numbers << ','
     << (r.truncated ? 1 : 0);
  return os.str();
}

json to_json(const EpisodeReport& report, bool include_steps) {
  json j = {{"total_tokens", report.total_tokens},
            {"total_ms", report.total_ms},
            {"throughput_tokens_per_s", report.throughput_tokens_per_s},
            {"n_steps", report.steps.size()},
            {"mean_gamma", report.mean_gamma},
            {"mean_accepted", report.mean_accepted},
            {"calls_target", report.calls_target},
            {"calls_draft", report.calls_draft},
            {"truncated", report.truncated}};
  if (include_steps) {
    json steps = json::array();
    for (const auto& s : report.steps) {
      json verdicts = json::array();
      for (bool v : s.verdicts) verdicts.push_back(v);
      steps.push_back({{"gamma", s.gamma},
                       {"drafted", s.drafted},
                       {"accepted", s.accepted},
                       {"bonus", s.bonus},
                       {"verdicts", verdicts},
                       {"confidences", s.confidences},
                       {"charged_probes", s.charged_probes},
                       {"elapsed_ms", s.elapsed_ms}});
    }
    j["steps"] = std::move(steps);
  }
  return j;
}

std::vector<acceptance::TraceRecord> to_trace(const EpisodeReport& report) {
  std::vector<acceptance::TraceRecord> records;
  records.reserve(report.steps.size());
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const StepOutcome& s = report.steps[i];
    records.push_back({static_cast<std::int64_t>(i), s.verdicts, s.confidences});
  }
  return records;
}

}  // namespace specsim::sim
