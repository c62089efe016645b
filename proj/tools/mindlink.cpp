// mindlink: batch runs, sweeps, epoch export, live demo and transcript replay.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
// Errors are printed to stderr as a single JSON line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "mindlink/config.hpp"
#include "mindlink/epoch_io.hpp"
#include "mindlink/gateway.hpp"
#include "mindlink/session.hpp"

namespace fs = std::filesystem;
using namespace mindlink;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CliError : std::runtime_error {
  CliError(int code, std::string kind, std::string msg, std::string field = {})
      : std::runtime_error(std::move(msg)), code(code), kind(std::move(kind)), field(std::move(field)) {}
  int code;
  std::string kind;
  std::string field;
};

json read_config_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("parse error: ") + e.what());
  }
}

fs::path base_dir_of(const std::string& config_path) {
  return config_path.empty() ? fs::path{} : fs::path(config_path).parent_path();
}

/// --out beats MINDLINK_OUT beats the config's output.dir.
fs::path resolve_out(const std::string& flag, const SessionConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MINDLINK_OUT"); env && *env) return env;
  return cfg.out_dir;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError(kExitRuntime, "io", "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw CliError(kExitRuntime, "io", "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

json load_doc(const Common& c) {
  json doc = c.config.empty() ? json::object() : read_config_doc(c.config);
  if (c.seed) doc["seed"] = *c.seed;
  return doc;
}

int cmd_run(const Common& c) {
  const json doc = load_doc(c);
  const SessionConfig cfg = parse_config(doc, base_dir_of(c.config));
  const SessionReport rep = run_session(cfg.schedule, cfg);
  const fs::path out = resolve_out(c.out, cfg);
  write_atomic(out / "transcript.jsonl", transcript_string(rep));
  write_atomic(out / "report.txt", render([&](std::ostream& os) { write_report_table(os, rep); }));
  write_atomic(out / "report.kv", render([&](std::ostream& os) { write_report_kv(os, rep); }));
  write_report_table(std::cout, rep);
  std::cout << "\nwrote " << (out / "transcript.jsonl").string() << ", report.txt, report.kv\n";
  return 0;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--values", "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--values", "empty values list");
  return out;
}

std::string format_value(double v) { return json(v).dump(); }

int cmd_sweep(const Common& c, const std::string& axis, const std::string& values_text, int repeats) {
  if (axis != "snr_db" && axis != "epoch_s" && axis != "n_targets")
    throw ConfigError("--axis", "expected snr_db, epoch_s or n_targets");
  const auto values = parse_values(values_text);
  const json base = load_doc(c);
  const SessionConfig base_cfg = parse_config(base, base_dir_of(c.config));
  if (repeats < 1) {
    repeats = 10;
    if (base.contains("session") && base["session"].contains("schedule") && base["session"]["schedule"].is_object())
      repeats = base["session"]["schedule"].value("repeats", 10);
  }
  const fs::path out = resolve_out(c.out, base_cfg);

  std::ostringstream table;
  table << axis << "\ttrials\taccuracy\titr_bits_per_min\tmean_margin\tseed\n";
  std::cout << table.str();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    json doc = base;
    const std::uint64_t cell_seed = derive_seed(base_cfg.seed, i);
    doc["seed"] = cell_seed;
    doc["session"]["schedule"] = {{"repeats", repeats}, {"shuffle", true}};
    if (axis == "snr_db") {
      doc["noise"]["snr_db"] = v;
    } else if (axis == "epoch_s") {
      doc["epoch"]["duration_s"] = v;
    } else {
      const double k = std::round(v);
      if (k != v || k < 2 || k > static_cast<double>(kCommandNames.size()))
        throw ConfigError("--values", "n_targets must be an integer in [2, 8]");
      const auto n = static_cast<std::size_t>(k);
      const StimulusConfig s = StimulusConfig::evenly_spaced(8.0, 1.0, n);
      doc["stimulus"] = {{"frequencies_hz", s.frequencies_hz}, {"phases_rad", s.phases_rad}};
      json table_ids = json::array();
      for (std::size_t t = 0; t < n; ++t) table_ids.push_back(std::string(to_string(base_cfg.table.at(t % base_cfg.table.size()))));
      doc["command_table"] = table_ids;
    }
    const SessionConfig cfg = parse_config(doc, base_dir_of(c.config));
    const SessionReport rep = run_session(cfg.schedule, cfg);
    write_atomic(out / ("sweep-" + axis) / ("cell-" + std::to_string(i) + ".jsonl"), transcript_string(rep));
    std::ostringstream row;
    row << format_value(v) << '\t' << rep.trials.size() << '\t' << format_value(rep.accuracy) << '\t'
        << format_value(rep.itr_bits_per_min) << '\t' << format_value(rep.mean_margin) << '\t' << cell_seed << '\n';
    table << row.str();
    std::cout << row.str() << std::flush;
  }
  write_atomic(out / ("sweep-" + axis + ".tsv"), table.str());
  std::cout << "wrote " << (out / ("sweep-" + axis + ".tsv")).string() << '\n';
  return 0;
}

int cmd_export(const Common& c, int count) {
  if (count < 1) throw ConfigError("--count", "must be >= 1");
  const SessionConfig cfg = parse_config(load_doc(c), base_dir_of(c.config));
  const fs::path out = resolve_out(c.out, cfg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw CliError(kExitRuntime, "io", "cannot create output directory " + out.string());
  for (int i = 0; i < count; ++i) {
    const std::size_t attended = cfg.schedule[static_cast<std::size_t>(i) % cfg.schedule.size()];
    const EegEpoch e = generate_epoch(cfg.stimulus, attended, cfg.channels, cfg.noise, cfg.epoch_s, cfg.fs_hz,
                                      derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04d.csv", i);
    write_atomic(out / name, render([&](std::ostream& os) { write_epoch_csv(os, e); }));
  }
  std::cout << "wrote " << count << " epochs to " << out.string() << '\n';
  return 0;
}

int cmd_demo(const Common& c, std::uint16_t port, int trials, bool hold) {
  const json doc = load_doc(c);
  const SessionConfig cfg = parse_config(doc, base_dir_of(c.config));
  const fs::path out = resolve_out(c.out, cfg);
  fs::create_directories(out);
  GatewayOptions opts;
  opts.port = port;
  opts.transcript_path = (out / "demo-transcript.jsonl").string();
  Gateway gw(doc, opts, base_dir_of(c.config));
  gw.start();
  std::cout << "gateway listening on " << gw.address() << std::endl;

  const std::size_t n = trials > 0 ? static_cast<std::size_t>(trials) : std::min<std::size_t>(16, cfg.schedule.size());
  {
    LineClient client("127.0.0.1", gw.port());
    client.read_until("hello");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t target = cfg.schedule[i % cfg.schedule.size()];
      client.send(json{{"type", "attend"}, {"seq", i}, {"target_index", target}});
      auto result = client.read_until("trial_result");
      auto fb = client.read_until("feedback");
      auto metrics = client.read_until("metrics");
      if (!result || !fb || !metrics) throw CliError(kExitRuntime, "gateway", "connection closed mid-trial");
      std::cout << "trial " << (*result)["trial"] << "  attended " << target << " ("
                << to_string(cfg.table.at(target)) << ")  predicted " << (*result)["predicted"].dump() << "  "
                << (*fb)["color"].get<std::string>() << '\n';
    }
  }
  if (hold) {
    std::cout << "scripted session done; serving until interrupted" << std::endl;
    while (true) std::this_thread::sleep_for(std::chrono::seconds(1));
  }
  gw.stop();
  std::cout << "wrote " << opts.transcript_path << '\n';
  return 0;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kExitRuntime, "io", "cannot read transcript " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string original = ss.str();
  const auto first_nl = original.find('\n');
  json header;
  try {
    header = json::parse(original.substr(0, first_nl));
  } catch (const json::parse_error& e) {
    throw CliError(kExitRuntime, "transcript", std::string("bad header: ") + e.what());
  }
  if (header.value("type", "") != "header" || header.value("format", "") != kTranscriptFormat)
    throw CliError(kExitRuntime, "transcript", "not a transcript header");
  const SessionConfig cfg = parse_config(header["config"]);
  const std::string again = transcript_string(run_session(cfg.schedule, cfg));
  if (again == original) {
    std::cout << "replay ok: " << cfg.schedule.size() << " trials byte-identical\n";
    return 0;
  }
  std::istringstream a(original), b(again);
  std::string la, lb;
  std::size_t line = 0;
  while (true) {
    ++line;
    const bool ga = static_cast<bool>(std::getline(a, la));
    const bool gb = static_cast<bool>(std::getline(b, lb));
    if (!ga || !gb || la != lb) break;
  }
  throw CliError(kExitRuntime, "replay-mismatch", "transcript differs from re-run at line " + std::to_string(line));
}

void print_error(const std::string& kind, const std::string& message, const std::string& field = {}) {
  json j{{"error", kind}};
  if (!field.empty()) j["field"] = field;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mindlink: simulated SSVEP command loop"};
  app.require_subcommand(1);

  Common common;
  std::string axis, values;
  int repeats = 0, count = 0, trials = 0;
  std::uint16_t port = 0;
  bool hold = false;
  std::string transcript;

  auto add_common = [&](CLI::App* sub, bool needs_out = true) {
    sub->add_option("--config", common.config, "JSON config file (defaults apply when omitted)");
    sub->add_option("--seed", common.seed, "override the session seed");
    if (needs_out) sub->add_option("--out", common.out, "output directory");
  };

  auto* run = app.add_subcommand("run", "run a session and write transcript and report");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "accuracy/ITR over one parameter axis");
  add_common(sweep);
  sweep->add_option("--axis", axis, "snr_db | epoch_s | n_targets")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--repeats", repeats, "trials per target per cell (default: config or 10)");
  auto* exp = app.add_subcommand("export-epochs", "write generated epochs as CSV");
  add_common(exp);
  exp->add_option("--count", count, "number of epochs")->required();
  auto* demo = app.add_subcommand("demo", "start the gateway and drive a scripted session");
  add_common(demo);
  demo->add_option("--port", port, "bind port (0 picks a free one)");
  demo->add_option("--trials", trials, "scripted attends (default 16)");
  demo->add_flag("--hold", hold, "keep serving after the scripted session");
  auto* replay = app.add_subcommand("replay", "re-run a transcript and check it is reproduced byte for byte");
  replay->add_option("transcript", transcript, "transcript .jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, axis, values, repeats);
    if (*exp) return cmd_export(common, count);
    if (*demo) return cmd_demo(common, port, trials, hold);
    if (*replay) return cmd_replay(transcript);
  } catch (const ConfigError& e) {
    print_error("config", e.what(), e.field());
    return kExitConfig;
  } catch (const CliError& e) {
    print_error(e.kind, e.what(), e.field);
    return e.code;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
