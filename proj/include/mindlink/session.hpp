#pragma once

// Closed-loop engine: stimulate -> decode -> map -> transmit -> execute -> feed
// back, on a simulated clock. A Session owns the agent, the link endpoints and
// the clock; run_session and the gateway both drive one.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mindlink/agent.hpp"
#include "mindlink/c2link.hpp"
#include "mindlink/codec.hpp"
#include "mindlink/config.hpp"
#include "mindlink/dsp.hpp"
#include "mindlink/eeg_synth.hpp"
#include "mindlink/fbcca.hpp"

namespace mindlink {

/// Simulated-clock time spent in each stage of one trial.
struct StageLatencies {
  double stimulate_ms = 0.0;
  double link_ms = 0.0;
  double execute_ms = 0.0;
  double feedback_ms = 0.0;
  double total_ms() const { return stimulate_ms + link_ms + execute_ms + feedback_ms; }
};

struct DeliverySummary {
  bool sent = false;
  bool acked = false;
  int attempts = 0;
  bool delivered = false;  // the agent received the command (possibly without the ack getting back)
  std::uint16_t seq = 0;
};

struct TrialRecord {
  std::size_t trial_index = 0;
  std::size_t attended_index = 0;
  std::uint64_t epoch_seed = 0;
  bool gated = false;
  std::vector<std::string> gate_offending;
  std::optional<Decision> decision;  // absent when the artifact gate fired
  std::optional<Command> command;
  DeliverySummary delivery;
  FeedbackStatus status = FeedbackStatus::NotRecognized;
  Color color = Color::Red;
  FeedbackFrame feedback;
  StageLatencies latencies;
  std::vector<AgentEvent> events;
  GridPos agent_position;
  Heading agent_heading = Heading::N;
  Mode agent_mode = Mode::Idle;
  double agent_battery_pct = 0.0;

  bool recognized() const { return decision && decision->recognized; }
};

/// Command frame payload: the ASCII command name, e.g. "MoveNorth".
inline std::string command_payload(const Command& c) { return std::string(to_string(c.id)); }

inline std::optional<Command> parse_command_payload(std::span<const std::uint8_t> p, std::uint64_t tick) {
  auto id = parse_command(std::string_view(reinterpret_cast<const char*>(p.data()), p.size()));
  if (!id) return std::nullopt;
  return Command{*id, tick};
}

/// Feedback frame payload: one status byte (0, 1, 2).
inline Bytes feedback_payload(FeedbackStatus s) { return {static_cast<std::uint8_t>(s)}; }

/// AgentEvent frame payload: space-separated key=value text.
inline std::string agent_event_payload(const AgentEvent& e) {
  std::string s = "tick=" + std::to_string(e.tick) + " kind=" + std::string(to_string(e.kind)) +
                  " x=" + std::to_string(e.cell.x) + " y=" + std::to_string(e.cell.y);
  if (e.target_id >= 0) s += " target=" + std::to_string(e.target_id);
  if (e.command) s += " command=" + std::string(to_string(*e.command));
  if (!e.revealed.empty()) s += " revealed=" + std::to_string(e.revealed.size());
  return s;
}

/// Bits per minute. Chance-level or worse accuracy yields 0.
inline double compute_itr(std::size_t n_targets, double accuracy, double selection_time_s) {
  if (n_targets < 2) throw InvalidArgument("compute_itr: need at least 2 targets");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InvalidArgument("compute_itr: accuracy must lie in [0, 1]");
  if (!(selection_time_s > 0.0) || !std::isfinite(selection_time_s))
    throw InvalidArgument("compute_itr: selection time must be > 0");
  const double n = static_cast<double>(n_targets);
  const double p = accuracy;
  if (p <= 1.0 / n) return 0.0;
  double bits = std::log2(n);
  if (p > 0.0) bits += p * std::log2(p);
  if (p < 1.0) bits += (1.0 - p) * std::log2((1.0 - p) / (n - 1.0));
  return std::max(0.0, bits * 60.0 / selection_time_s);
}

/// n x (n + 1) counts. Column j < n counts trials whose argmax was j, whether
/// or not the margin cleared the threshold; column n holds gated trials,
/// which never reached the decoder. Without gating the first n columns form
/// the plain confusion matrix and each row sums to that target's trial count.
inline std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<TrialRecord>& trials,
                                                              std::size_t n_targets) {
  std::vector<std::vector<std::size_t>> m(n_targets, std::vector<std::size_t>(n_targets + 1, 0));
  for (const auto& t : trials) {
    if (t.attended_index >= n_targets) throw InvalidArgument("confusion_matrix: attended index out of range");
    if (t.decision) {
      if (t.decision->predicted_index >= n_targets)
        throw InvalidArgument("confusion_matrix: predicted index out of range");
      ++m[t.attended_index][t.decision->predicted_index];
    } else {
      ++m[t.attended_index][n_targets];
    }
  }
  return m;
}

struct SessionReport {
  std::vector<TrialRecord> trials;
  double accuracy = 0.0;  // trace / all trials: argmax hits, gated trials count as misses
  std::vector<std::vector<std::size_t>> confusion;
  double itr_bits_per_min = 0.0;
  double selection_time_s = 0.0;
  double mean_margin = 0.0;  // over decoded (non-gated) trials
  std::size_t n_targets = 0;
  std::uint64_t seed = 0;
  json config;  // resolved config, schedule = the attended sequence actually run
};

class Session {
 public:
  explicit Session(SessionConfig config)
      : cfg_(std::move(config)),
        bandpass_(design_bandpass(cfg_.bandpass_order, cfg_.bandpass_lo_hz, cfg_.bandpass_hi_hz, cfg_.fs_hz)),
        notch_(design_notch(cfg_.notch_hz, cfg_.notch_q, cfg_.fs_hz)),
        bank_(build_filter_bank(cfg_.stimulus, cfg_.decoder.n_subbands)),
        decode_channels_(cfg_.channels.decode_channels()),
        forward_(link_model(0x11A4ULL)),
        reverse_(link_model(0x11A5ULL)),
        agent_(make_agent(cfg_.world, cfg_.agent)) {
    cfg_.decoder.stimulus = cfg_.stimulus;
    cfg_.decoder.fs_hz = cfg_.fs_hz;
    cfg_.decoder.validate();
    if (cfg_.table.size() != cfg_.stimulus.count()) throw ConfigError("command_table", "size differs from target count");
  }

  const SessionConfig& config() const noexcept { return cfg_; }
  const AgentState& agent() const noexcept { return agent_; }
  const std::vector<TrialRecord>& trials() const noexcept { return trials_; }
  std::uint64_t tick() const noexcept { return tick_; }
  double clock_ms() const noexcept { return clock_ms_; }

  TrialRecord run_trial(std::size_t attended_index) {
    if (attended_index >= cfg_.stimulus.count())
      throw InvalidArgument("attended index " + std::to_string(attended_index) + " outside [0, " +
                            std::to_string(cfg_.stimulus.count() - 1) + "]");
    TrialRecord r;
    r.trial_index = trials_.size();
    r.attended_index = attended_index;
    r.epoch_seed = derive_seed(cfg_.seed, r.trial_index);

    // Stimulate.
    EegEpoch raw = generate_epoch(cfg_.stimulus, attended_index, cfg_.channels, cfg_.noise, cfg_.epoch_s, cfg_.fs_hz,
                                  r.epoch_seed);
    if (cfg_.blink_prob > 0.0) {
      std::mt19937_64 rng(derive_seed(r.epoch_seed, 0xB11CULL));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(rng) < cfg_.blink_prob) {
        const double onset = unit(rng) * std::max(0.0, cfg_.epoch_s - kBlinkDurationS);
        raw = inject_blink(raw, cfg_.channels, onset, cfg_.blink_amplitude_uV);
      }
    }
    r.latencies.stimulate_ms = cfg_.epoch_s * 1000.0;
    const double send_at = clock_ms_ + r.latencies.stimulate_ms;

    // Gate on the raw epoch (band-pass would hide the blink), then decode.
    const GateResult gate = gate_artifacts(raw, cfg_.gate_threshold_uV);
    r.gated = gate.contaminated;
    r.gate_offending = gate.offending;
    if (!r.gated) {
      EegEpoch x = select_channels(raw, decode_channels_);
      x = apply_zero_phase(notch_, apply_zero_phase(bandpass_, x));
      r.decision = classify(x, cfg_.decoder, bank_);
      r.command = map_decision(*r.decision, cfg_.table, tick_);
    }

    // Transmit.
    std::vector<AgentEvent> events;
    std::uint64_t ticks_used = 0;
    if (r.command) {
      r.delivery.sent = true;
      r.delivery.seq = next_seq_++;
      const Bytes frame = encode_frame(MsgType::Command, r.delivery.seq, command_payload(*r.command));
      const SendOutcome sent =
          reliable_send(frame, forward_, reverse_, receiver_, cfg_.max_retries, cfg_.ack_timeout_ms, send_at);
      r.delivery.acked = sent.acked;
      r.delivery.attempts = sent.attempts;
      r.latencies.link_ms = sent.completed_at_ms - send_at;
      std::optional<Command> received;
      if (sent.delivered) received = parse_command_payload(sent.delivered->payload, tick_);
      r.delivery.delivered = received.has_value();
      if (received) advance_agent(received, events, ticks_used);
    }
    // Missions already under way keep running whether or not a command arrived.
    advance_agent(std::nullopt, events, ticks_used);
    r.latencies.execute_ms = static_cast<double>(ticks_used) * cfg_.tick_ms;

    // Feed back. Without an ack the operator cannot tell the command landed.
    if (r.command && r.delivery.acked)
      r.status = execution_status(agent_, *r.command, events);
    else
      r.status = FeedbackStatus::NotRecognized;
    r.feedback = encode_feedback(r.status, cfg_.feedback_blink_hz, cfg_.feedback_duration_s);
    r.color = r.feedback.color;
    r.latencies.feedback_ms = cfg_.feedback_duration_s * 1000.0;

    r.events = std::move(events);
    r.agent_position = agent_.position;
    r.agent_heading = agent_.heading;
    r.agent_mode = agent_.mode;
    r.agent_battery_pct = agent_.battery_pct();
    clock_ms_ += r.latencies.total_ms() + cfg_.inter_trial_gap_s * 1000.0;
    trials_.push_back(r);
    return r;
  }

  SessionReport report() const {
    SessionReport rep;
    rep.trials = trials_;
    rep.n_targets = cfg_.stimulus.count();
    rep.seed = cfg_.seed;
    rep.selection_time_s = cfg_.selection_time_s();
    rep.confusion = confusion_matrix(trials_, rep.n_targets);
    std::size_t correct = 0, decoded = 0;
    double margin_sum = 0.0;
    for (std::size_t i = 0; i < rep.n_targets; ++i) correct += rep.confusion[i][i];
    for (const auto& t : trials_)
      if (t.decision) {
        ++decoded;
        margin_sum += t.decision->margin;
      }
    rep.accuracy = trials_.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(trials_.size());
    rep.mean_margin = decoded ? margin_sum / static_cast<double>(decoded) : 0.0;
    rep.itr_bits_per_min = compute_itr(rep.n_targets, rep.accuracy, rep.selection_time_s);
    rep.config = to_json(cfg_);
    std::vector<std::size_t> attended;
    for (const auto& t : trials_) attended.push_back(t.attended_index);
    rep.config["session"]["schedule"] = attended;
    return rep;
  }

 private:
  LinkModel link_model(std::uint64_t stream) const {
    LinkModel m = cfg_.link;
    m.seed = derive_seed(cfg_.seed, stream);
    return m;
  }

  /// Applies `command` (if any) for one tick, then keeps ticking while a
  /// mission is active, up to the per-trial tick budget.
  void advance_agent(const std::optional<Command>& command, std::vector<AgentEvent>& events, std::uint64_t& used) {
    auto tick_once = [&](const std::optional<Command>& c) {
      auto res = step(agent_, cfg_.world, c, tick_++, cfg_.agent);
      agent_ = std::move(res.state);
      events.insert(events.end(), std::make_move_iterator(res.events.begin()),
                    std::make_move_iterator(res.events.end()));
      ++used;
    };
    if (command) {
      if (used >= static_cast<std::uint64_t>(cfg_.max_ticks_per_trial)) return;
      tick_once(command);
    }
    while ((agent_.mode == Mode::Recon || agent_.mode == Mode::Returning) &&
           used < static_cast<std::uint64_t>(cfg_.max_ticks_per_trial))
      tick_once(std::nullopt);
  }

  SessionConfig cfg_;
  FilterCoeffs bandpass_;
  FilterCoeffs notch_;
  FilterBank bank_;
  std::vector<std::string> decode_channels_;
  LinkSimulator forward_;
  LinkSimulator reverse_;
  Receiver receiver_;
  std::uint16_t next_seq_ = 0;
  AgentState agent_;
  std::uint64_t tick_ = 0;
  double clock_ms_ = 0.0;
  std::vector<TrialRecord> trials_;
};

inline SessionReport run_session(const std::vector<std::size_t>& schedule, const SessionConfig& config) {
  if (schedule.empty()) throw InvalidArgument("run_session: empty schedule");
  Session s(config);
  for (auto idx : schedule) s.run_trial(idx);
  return s.report();
}

inline SessionReport run_session(const std::vector<std::size_t>& schedule, SessionConfig config, std::uint64_t seed) {
  config.seed = seed;
  return run_session(schedule, config);
}

// ---- structured text ------------------------------------------------------

inline json to_json(GridPos p) { return json::array({p.x, p.y}); }

inline json to_json(const AgentEvent& e) {
  json j;
  j["tick"] = e.tick;
  j["kind"] = std::string(to_string(e.kind));
  j["cell"] = to_json(e.cell);
  if (e.target_id >= 0) j["target_id"] = e.target_id;
  if (e.command) j["command"] = std::string(to_string(*e.command));
  if (!e.revealed.empty()) {
    json cells = json::array();
    for (const auto& [p, c] : e.revealed) cells.push_back({p.x, p.y, c == Cell::Obstacle ? "#" : "."});
    j["revealed"] = cells;
  }
  return j;
}

inline json to_json(const Decision& d) {
  return json{{"predicted", d.predicted_index}, {"recognized", d.recognized}, {"margin", d.margin}, {"scores", d.scores}};
}

/// One transcript line. Field order is fixed; see the README.
inline json to_json(const TrialRecord& t) {
  json j;
  j["type"] = "trial";
  j["trial"] = t.trial_index;
  j["attended"] = t.attended_index;
  j["epoch_seed"] = t.epoch_seed;
  j["gated"] = t.gated;
  j["gate_offending"] = t.gate_offending;
  j["decision"] = t.decision ? to_json(*t.decision) : json(nullptr);
  j["command"] = t.command ? json{{"id", std::string(to_string(t.command->id))}, {"issued_at", t.command->issued_at}}
                           : json(nullptr);
  j["delivery"] = {{"sent", t.delivery.sent},
                   {"seq", t.delivery.seq},
                   {"attempts", t.delivery.attempts},
                   {"acked", t.delivery.acked},
                   {"delivered", t.delivery.delivered}};
  j["status"] = std::string(to_string(t.status));
  j["color"] = std::string(to_string(t.color));
  j["feedback"] = {{"color", std::string(to_string(t.feedback.color))},
                   {"blink_hz", t.feedback.blink_hz},
                   {"duration_s", t.feedback.duration_s}};
  j["latency_ms"] = {{"stimulate", t.latencies.stimulate_ms},
                     {"link", t.latencies.link_ms},
                     {"execute", t.latencies.execute_ms},
                     {"feedback", t.latencies.feedback_ms},
                     {"total", t.latencies.total_ms()}};
  j["agent"] = {{"cell", to_json(t.agent_position)},
                {"heading", std::string(to_string(t.agent_heading))},
                {"mode", std::string(to_string(t.agent_mode))},
                {"battery_pct", t.agent_battery_pct}};
  json ev = json::array();
  for (const auto& e : t.events) ev.push_back(to_json(e));
  j["events"] = ev;
  return j;
}

inline json report_summary(const SessionReport& r) {
  json j;
  j["type"] = "summary";
  j["trials"] = r.trials.size();
  j["accuracy"] = r.accuracy;
  j["itr_bits_per_min"] = r.itr_bits_per_min;
  j["selection_time_s"] = r.selection_time_s;
  j["mean_margin"] = r.mean_margin;
  j["confusion"] = r.confusion;
  return j;
}

inline constexpr const char* kTranscriptFormat = "mindlink-transcript/1";

/// Header line, one line per trial, summary line.
inline void write_transcript(std::ostream& os, const SessionReport& r) {
  json header;
  header["type"] = "header";
  header["format"] = kTranscriptFormat;
  header["seed"] = r.seed;
  header["config"] = r.config;
  os << header.dump() << '\n';
  for (const auto& t : r.trials) os << to_json(t).dump() << '\n';
  os << report_summary(r).dump() << '\n';
}

inline std::string transcript_string(const SessionReport& r) {
  std::ostringstream os;
  write_transcript(os, r);
  return os.str();
}

/// Human-readable table: summary, confusion matrix, per-colour counts.
inline void write_report_table(std::ostream& os, const SessionReport& r) {
  std::size_t colors[3] = {0, 0, 0};
  for (const auto& t : r.trials) ++colors[static_cast<int>(t.color)];
  os << "trials            " << r.trials.size() << '\n'
     << "seed              " << r.seed << '\n'
     << "accuracy          " << std::fixed << std::setprecision(4) << r.accuracy << '\n'
     << "itr_bits_per_min  " << std::setprecision(2) << r.itr_bits_per_min << '\n'
     << "selection_time_s  " << std::setprecision(2) << r.selection_time_s << '\n'
     << "mean_margin       " << std::setprecision(4) << r.mean_margin << '\n'
     << "feedback          Green " << colors[2] << "  Yellow " << colors[1] << "  Red " << colors[0] << "\n\n";
  os << "confusion (rows attended, columns predicted, G = gated)\n";
  os << std::setw(6) << "";
  for (std::size_t j = 0; j < r.n_targets; ++j) os << std::setw(5) << j;
  os << std::setw(5) << "G" << '\n';
  for (std::size_t i = 0; i < r.n_targets; ++i) {
    os << std::setw(6) << i;
    for (std::size_t j = 0; j <= r.n_targets; ++j) os << std::setw(5) << r.confusion[i][j];
    os << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

/// key=value lines for scripts.
inline void write_report_kv(std::ostream& os, const SessionReport& r) {
  auto num = [](double v) { return json(v).dump(); };
  os << "trials=" << r.trials.size() << '\n'
     << "seed=" << r.seed << '\n'
     << "n_targets=" << r.n_targets << '\n'
     << "accuracy=" << num(r.accuracy) << '\n'
     << "itr_bits_per_min=" << num(r.itr_bits_per_min) << '\n'
     << "selection_time_s=" << num(r.selection_time_s) << '\n'
     << "mean_margin=" << num(r.mean_margin) << '\n';
  for (std::size_t i = 0; i < r.n_targets; ++i) {
    os << "confusion." << i << '=';
    for (std::size_t j = 0; j <= r.n_targets; ++j) os << (j ? "," : "") << r.confusion[i][j];
    os << '\n';
  }
  os << "config=" << r.config.dump() << '\n';
}

}  // namespace mindlink
