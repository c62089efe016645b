#pragma once

// Session configuration: a single JSON document. Every field is optional and
// falls back to the defaults below; unknown keys are rejected. Validation
// errors carry the dotted path of the offending field.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindlink/agent.hpp"
#include "mindlink/c2link.hpp"
#include "mindlink/codec.hpp"
#include "mindlink/dsp.hpp"
#include "mindlink/eeg_synth.hpp"
#include "mindlink/fbcca.hpp"

namespace mindlink {

using json = nlohmann::ordered_json;

/// Built-in 16x16 world used when the config names none.
inline constexpr const char* kDefaultWorldText =
    "................\n"
    "................\n"
    "..##........T...\n"
    "..##............\n"
    "........###.....\n"
    "........#.......\n"
    "..T.....#.......\n"
    "................\n"
    ".......S........\n"
    "................\n"
    "....#####.......\n"
    "..........V.....\n"
    "................\n"
    "...........##...\n"
    "...........##...\n"
    "................\n";

struct SessionConfig {
  std::uint64_t seed = 1;
  StimulusConfig stimulus = StimulusConfig::default_set();
  std::string montage_name = "default";
  ChannelModel channels = ChannelModel::default_montage();
  NoiseModel noise{.snr_db = 10.0};
  double epoch_s = 2.0;
  double fs_hz = 250.0;

  int bandpass_order = 4;
  double bandpass_lo_hz = 6.0;
  double bandpass_hi_hz = 60.0;
  double notch_hz = 50.0;
  double notch_q = 30.0;
  double gate_threshold_uV = 100.0;
  double blink_prob = 0.0;
  double blink_amplitude_uV = 150.0;

  FbccaConfig decoder;  // stimulus and fs are kept in sync with the fields above
  CommandTable table = CommandTable::default_table();

  LinkModel link{};
  int max_retries = 3;
  double ack_timeout_ms = 100.0;

  std::string world_path;  // empty: built-in world
  std::string world_text = kDefaultWorldText;
  World world = World::parse(std::string(kDefaultWorldText));
  AgentParams agent;
  int max_ticks_per_trial = 600;
  double tick_ms = 100.0;

  double feedback_blink_hz = 2.0;
  double feedback_duration_s = 1.0;
  double inter_trial_gap_s = 0.5;

  std::vector<std::size_t> schedule;
  std::string out_dir = "out";

  /// Selection time used for ITR: epoch plus inter-trial gap.
  double selection_time_s() const { return epoch_s + inter_trial_gap_s; }
};

namespace detail {

class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw ConfigError(child_path(key), "expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(child_path(key), "expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(child_path(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v->is_number_integer() && !v->is_number_unsigned() && v->template get<long long>() < 0)
            throw ConfigError(child_path(key), "expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(child_path(key), "expected a string");
      }
      out = v->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(child_path(key), e.what());
    }
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child_path(it.key()), "unknown field");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path, "expected a list of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

template <class Fn>
void wrap(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace detail

inline std::vector<std::size_t> expand_schedule(std::size_t n_targets, int repeats, bool shuffle, std::uint64_t seed) {
  std::vector<std::size_t> out;
  for (int r = 0; r < repeats; ++r)
    for (std::size_t k = 0; k < n_targets; ++k) out.push_back(k);
  if (shuffle) {
    std::mt19937_64 rng(derive_seed(seed, 0x5C4EDULL));
    std::shuffle(out.begin(), out.end(), rng);
  }
  return out;
}

/// Parses and validates. Relative world paths resolve against `base_dir`.
inline SessionConfig parse_config(const json& root, const std::filesystem::path& base_dir = {}) {
  using detail::FieldReader;
  SessionConfig cfg;
  FieldReader top(root, "");
  top.get("seed", cfg.seed);

  if (const json* s = top.find("stimulus")) {
    FieldReader r(*s, "stimulus");
    if (const json* f = r.find("frequencies_hz")) cfg.stimulus.frequencies_hz = detail::number_list(*f, "stimulus.frequencies_hz");
    if (const json* p = r.find("phases_rad"))
      cfg.stimulus.phases_rad = detail::number_list(*p, "stimulus.phases_rad");
    else
      cfg.stimulus.phases_rad.assign(cfg.stimulus.frequencies_hz.size(), 0.0);
    r.reject_unknown();
  }
  detail::wrap("stimulus", [&] { cfg.stimulus.validate(); });

  if (const json* m = top.find("montage")) {
    if (m->is_string()) {
      cfg.montage_name = m->get<std::string>();
      if (cfg.montage_name != "default") throw ConfigError("montage", "unknown montage '" + cfg.montage_name + "'");
    } else {
      FieldReader r(*m, "montage");
      cfg.montage_name = "custom";
      r.get("channel_names", cfg.channels.channel_names);
      if (const json* g = r.find("ssvep_gain")) cfg.channels.ssvep_gain = detail::number_list(*g, "montage.ssvep_gain");
      if (const json* g = r.find("blink_gain")) cfg.channels.blink_gain = detail::number_list(*g, "montage.blink_gain");
      r.get("reference_name", cfg.channels.reference_name);
      r.get("ground_name", cfg.channels.ground_name);
      r.reject_unknown();
    }
  }
  detail::wrap("montage", [&] { cfg.channels.validate(); });
  if (cfg.channels.decode_channels().empty()) throw ConfigError("montage", "no non-frontal channels to decode");

  if (const json* n = top.find("noise")) {
    FieldReader r(*n, "noise");
    r.get("snr_db", cfg.noise.snr_db);
    r.get("pink_fraction", cfg.noise.pink_fraction);
    r.get("alpha_amp_uV", cfg.noise.alpha_amp_uV);
    r.get("harmonic_decay", cfg.noise.harmonic_decay);
    r.get("noise_rms_uV", cfg.noise.noise_rms_uV);
    r.get("blink_prob", cfg.blink_prob);
    r.get("blink_amplitude_uV", cfg.blink_amplitude_uV);
    r.reject_unknown();
  }
  detail::wrap("noise", [&] { cfg.noise.validate(); });
  if (!(cfg.blink_prob >= 0.0 && cfg.blink_prob <= 1.0)) throw ConfigError("noise.blink_prob", "must lie in [0, 1]");
  if (!(cfg.blink_amplitude_uV > 0.0)) throw ConfigError("noise.blink_amplitude_uV", "must be > 0");

  if (const json* e = top.find("epoch")) {
    FieldReader r(*e, "epoch");
    r.get("duration_s", cfg.epoch_s);
    r.get("fs_hz", cfg.fs_hz);
    r.reject_unknown();
  }
  if (!(cfg.epoch_s > 0.0)) throw ConfigError("epoch.duration_s", "must be > 0");
  if (!(cfg.fs_hz >= 2.0 * kEvokedHarmonics * cfg.stimulus.max_hz()))
    throw ConfigError("epoch.fs_hz", "too low to represent the 4th harmonic of the highest stimulus");

  if (const json* p = top.find("preprocess")) {
    FieldReader r(*p, "preprocess");
    if (const json* b = r.find("bandpass")) {
      FieldReader rb(*b, "preprocess.bandpass");
      rb.get("order", cfg.bandpass_order);
      rb.get("lo_hz", cfg.bandpass_lo_hz);
      rb.get("hi_hz", cfg.bandpass_hi_hz);
      rb.reject_unknown();
    }
    if (const json* nt = r.find("notch")) {
      FieldReader rn(*nt, "preprocess.notch");
      rn.get("center_hz", cfg.notch_hz);
      rn.get("q", cfg.notch_q);
      rn.reject_unknown();
    }
    r.get("gate_threshold_uV", cfg.gate_threshold_uV);
    r.reject_unknown();
  }
  detail::wrap("preprocess.bandpass",
               [&] { design_bandpass(cfg.bandpass_order, cfg.bandpass_lo_hz, cfg.bandpass_hi_hz, cfg.fs_hz); });
  detail::wrap("preprocess.notch", [&] { design_notch(cfg.notch_hz, cfg.notch_q, cfg.fs_hz); });
  if (!(cfg.gate_threshold_uV > 0.0)) throw ConfigError("preprocess.gate_threshold_uV", "must be > 0");

  if (const json* d = top.find("decoder")) {
    FieldReader r(*d, "decoder");
    r.get("n_harmonics", cfg.decoder.n_harmonics);
    r.get("n_subbands", cfg.decoder.n_subbands);
    r.get("weight_a", cfg.decoder.weight_a);
    r.get("weight_b", cfg.decoder.weight_b);
    r.get("decision_margin", cfg.decoder.decision_margin);
    r.get("filter_order", cfg.decoder.filter_order);
    r.reject_unknown();
  }
  cfg.decoder.stimulus = cfg.stimulus;
  cfg.decoder.fs_hz = cfg.fs_hz;
  if (cfg.decoder.n_subbands < 1 || !(cfg.decoder.n_subbands * cfg.stimulus.min_hz() < 4.0 * cfg.stimulus.max_hz()))
    throw ConfigError("decoder.n_subbands", "filter bank invalid for the stimulus set");
  if (cfg.decoder.n_harmonics < 1 || !(cfg.decoder.n_harmonics * cfg.stimulus.max_hz() < cfg.fs_hz / 2.0))
    throw ConfigError("decoder.n_harmonics", "reference harmonics must stay below Nyquist");
  if (!(cfg.decoder.decision_margin >= 0.0)) throw ConfigError("decoder.decision_margin", "must be >= 0");
  detail::wrap("decoder", [&] {
    cfg.decoder.validate();
    for (auto [lo, hi] : build_filter_bank(cfg.stimulus, cfg.decoder.n_subbands).subbands)
      design_bandpass(cfg.decoder.filter_order, lo, hi, cfg.fs_hz);
  });

  if (const json* t = top.find("command_table")) {
    if (!t->is_array()) throw ConfigError("command_table", "expected a list of command names");
    std::vector<CommandId> ids;
    for (const auto& e : *t) {
      auto id = e.is_string() ? parse_command(e.get<std::string>()) : std::nullopt;
      if (!id) throw ConfigError("command_table", "unknown command " + e.dump());
      ids.push_back(*id);
    }
    detail::wrap("command_table", [&] { cfg.table = CommandTable(std::move(ids)); });
  }
  if (cfg.table.size() != cfg.stimulus.count())
    throw ConfigError("command_table", "has " + std::to_string(cfg.table.size()) + " entries for " +
                                           std::to_string(cfg.stimulus.count()) + " stimulus targets");

  if (const json* l = top.find("link")) {
    FieldReader r(*l, "link");
    r.get("drop_prob", cfg.link.drop_prob);
    r.get("latency_ms_min", cfg.link.latency_ms_min);
    r.get("latency_ms_max", cfg.link.latency_ms_max);
    r.get("bit_flip_prob", cfg.link.bit_flip_prob);
    r.get("max_retries", cfg.max_retries);
    r.get("ack_timeout_ms", cfg.ack_timeout_ms);
    r.reject_unknown();
  }
  detail::wrap("link", [&] { cfg.link.validate(); });
  if (cfg.max_retries < 0) throw ConfigError("link.max_retries", "must be >= 0");
  if (!(cfg.ack_timeout_ms > 0.0)) throw ConfigError("link.ack_timeout_ms", "must be > 0");

  if (const json* w = top.find("world")) {
    if (w->is_string()) {
      cfg.world_path = w->get<std::string>();
      std::filesystem::path p(cfg.world_path);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) throw ConfigError("world", "cannot read world file " + p.string());
      std::stringstream ss;
      ss << in.rdbuf();
      cfg.world_text = ss.str();
    } else if (w->is_object()) {
      FieldReader r(*w, "world");
      r.get("path", cfg.world_path);
      r.get("text", cfg.world_text);
      r.reject_unknown();
    } else {
      throw ConfigError("world", "expected a file path or {\"text\": ...}");
    }
  }
  detail::wrap("world", [&] { cfg.world = World::parse(cfg.world_text); });

  if (const json* a = top.find("agent")) {
    FieldReader r(*a, "agent");
    r.get("sensor_radius", cfg.agent.sensor_radius);
    r.get("battery_capacity", cfg.agent.battery_capacity);
    r.get("move_cost", cfg.agent.move_cost);
    r.get("idle_cost", cfg.agent.idle_cost);
    r.get("recharge_per_tick", cfg.agent.recharge_per_tick);
    r.get("max_ticks_per_trial", cfg.max_ticks_per_trial);
    r.get("tick_ms", cfg.tick_ms);
    r.reject_unknown();
  }
  detail::wrap("agent", [&] {
    cfg.agent.validate();
    make_agent(cfg.world, cfg.agent);
  });
  if (cfg.max_ticks_per_trial < 1) throw ConfigError("agent.max_ticks_per_trial", "must be >= 1");
  if (!(cfg.tick_ms > 0.0)) throw ConfigError("agent.tick_ms", "must be > 0");

  if (const json* f = top.find("feedback")) {
    FieldReader r(*f, "feedback");
    r.get("blink_hz", cfg.feedback_blink_hz);
    r.get("duration_s", cfg.feedback_duration_s);
    r.reject_unknown();
  }
  detail::wrap("feedback", [&] { encode_feedback(FeedbackStatus::Executed, cfg.feedback_blink_hz, cfg.feedback_duration_s); });

  int repeats = 10;
  bool shuffle = true;
  bool explicit_schedule = false;
  if (const json* s = top.find("session")) {
    FieldReader r(*s, "session");
    r.get("inter_trial_gap_s", cfg.inter_trial_gap_s);
    if (const json* sch = r.find("schedule")) {
      if (sch->is_array()) {
        explicit_schedule = true;
        for (const auto& e : *sch) {
          if (!e.is_number_unsigned()) throw ConfigError("session.schedule", "expected target indices");
          cfg.schedule.push_back(e.get<std::size_t>());
        }
      } else {
        FieldReader rs(*sch, "session.schedule");
        rs.get("repeats", repeats);
        rs.get("shuffle", shuffle);
        rs.reject_unknown();
      }
    }
    r.reject_unknown();
  }
  if (!(cfg.inter_trial_gap_s >= 0.0)) throw ConfigError("session.inter_trial_gap_s", "must be >= 0");
  if (!explicit_schedule) {
    if (repeats < 1) throw ConfigError("session.schedule.repeats", "must be >= 1");
    cfg.schedule = expand_schedule(cfg.stimulus.count(), repeats, shuffle, cfg.seed);
  }
  if (cfg.schedule.empty()) throw ConfigError("session.schedule", "empty schedule");
  for (auto idx : cfg.schedule)
    if (idx >= cfg.stimulus.count())
      throw ConfigError("session.schedule", "target index " + std::to_string(idx) + " out of range");

  if (const json* o = top.find("output")) {
    FieldReader r(*o, "output");
    r.get("dir", cfg.out_dir);
    r.reject_unknown();
  }
  top.reject_unknown();
  return cfg;
}

inline SessionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
  return parse_config(root, path.parent_path());
}

/// Fully resolved configuration (explicit schedule, inline world text).
/// parse_config(to_json(c)) reproduces c.
inline json to_json(const SessionConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["stimulus"] = {{"frequencies_hz", c.stimulus.frequencies_hz}, {"phases_rad", c.stimulus.phases_rad}};
  if (c.montage_name == "default") {
    j["montage"] = "default";
  } else {
    j["montage"] = {{"channel_names", c.channels.channel_names},
                    {"ssvep_gain", c.channels.ssvep_gain},
                    {"blink_gain", c.channels.blink_gain},
                    {"reference_name", c.channels.reference_name},
                    {"ground_name", c.channels.ground_name}};
  }
  j["noise"] = {{"snr_db", c.noise.snr_db},
                {"pink_fraction", c.noise.pink_fraction},
                {"alpha_amp_uV", c.noise.alpha_amp_uV},
                {"harmonic_decay", c.noise.harmonic_decay},
                {"noise_rms_uV", c.noise.noise_rms_uV},
                {"blink_prob", c.blink_prob},
                {"blink_amplitude_uV", c.blink_amplitude_uV}};
  j["epoch"] = {{"duration_s", c.epoch_s}, {"fs_hz", c.fs_hz}};
  j["preprocess"] = {
      {"bandpass", {{"order", c.bandpass_order}, {"lo_hz", c.bandpass_lo_hz}, {"hi_hz", c.bandpass_hi_hz}}},
      {"notch", {{"center_hz", c.notch_hz}, {"q", c.notch_q}}},
      {"gate_threshold_uV", c.gate_threshold_uV}};
  j["decoder"] = {{"n_harmonics", c.decoder.n_harmonics}, {"n_subbands", c.decoder.n_subbands},
                  {"weight_a", c.decoder.weight_a},       {"weight_b", c.decoder.weight_b},
                  {"decision_margin", c.decoder.decision_margin}, {"filter_order", c.decoder.filter_order}};
  json table = json::array();
  for (auto id : c.table.entries()) table.push_back(std::string(to_string(id)));
  j["command_table"] = table;
  j["link"] = {{"drop_prob", c.link.drop_prob},         {"latency_ms_min", c.link.latency_ms_min},
               {"latency_ms_max", c.link.latency_ms_max}, {"bit_flip_prob", c.link.bit_flip_prob},
               {"max_retries", c.max_retries},          {"ack_timeout_ms", c.ack_timeout_ms}};
  j["world"] = {{"path", c.world_path}, {"text", c.world_text}};
  j["agent"] = {{"sensor_radius", c.agent.sensor_radius},
                {"battery_capacity", c.agent.battery_capacity},
                {"move_cost", c.agent.move_cost},
                {"idle_cost", c.agent.idle_cost},
                {"recharge_per_tick", c.agent.recharge_per_tick},
                {"max_ticks_per_trial", c.max_ticks_per_trial},
                {"tick_ms", c.tick_ms}};
  j["feedback"] = {{"blink_hz", c.feedback_blink_hz}, {"duration_s", c.feedback_duration_s}};
  j["session"] = {{"inter_trial_gap_s", c.inter_trial_gap_s}, {"schedule", c.schedule}};
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

/// Default configuration as a document (what `parse_config({})` resolves to).
inline SessionConfig default_config() { return parse_config(json::object()); }

}  // namespace mindlink
