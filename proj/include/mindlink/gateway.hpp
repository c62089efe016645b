#pragma once

// Live-session service over a local TCP socket. Newline-delimited JSON in both
// directions; see protocol.md for the message grammar.
//
// Per connection: the accepting thread reads, a driver thread owns the
// Session and runs trials, a writer thread stamps seq numbers and sends.
// Reader -> driver and driver/reader -> writer hand-offs go through FIFO
// queues, so server messages leave in the order they were produced.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "mindlink/config.hpp"
#include "mindlink/session.hpp"

namespace mindlink {

inline constexpr const char* kProtocolName = "mindlink-gateway/1";
inline constexpr std::size_t kMaxLineBytes = 1 << 20;

template <class T>
class BlockingQueue {
 public:
  void push(T v) {
    {
      std::lock_guard lk(m_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  /// nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }
  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

/// Snapshot of the agent's view, sent in `hello` so a reconnecting console
/// can rebuild its map panel.
inline json agent_snapshot(const Session& s) {
  const AgentState& a = s.agent();
  json rows = json::array();
  for (int y = 0; y < a.known_map.height(); ++y) {
    std::string row;
    for (int x = 0; x < a.known_map.width(); ++x) {
      const Cell c = a.known_map.at(GridPos{x, y});
      row.push_back(c == Cell::Unknown ? '?' : c == Cell::Obstacle ? '#' : '.');
    }
    rows.push_back(row);
  }
  json sightings = json::array();
  for (const auto& t : a.sightings)
    sightings.push_back({{"target_id", t.target_id}, {"kind", std::string(to_string(t.kind))}, {"cell", to_json(t.cell)}});
  return json{{"trials_run", s.trials().size()},
              {"tick", s.tick()},
              {"agent",
               {{"cell", to_json(a.position)},
                {"heading", std::string(to_string(a.heading))},
                {"mode", std::string(to_string(a.mode))},
                {"battery_pct", a.battery_pct()},
                {"base", to_json(a.base)}}},
              {"known_map", rows},
              {"sightings", sightings},
              {"marked", a.marked}};
}

inline json hello_message(const Session& s) {
  json commands = json::array();
  for (auto id : s.config().table.entries()) commands.push_back(std::string(to_string(id)));
  return json{{"type", "hello"},
              {"protocol", kProtocolName},
              {"config", to_json(s.config())},
              {"commands", commands},
              {"snapshot", agent_snapshot(s)}};
}

inline json error_message(std::string code, std::string message, const json& re = nullptr,
                          std::optional<std::string> field = std::nullopt) {
  json j{{"type", "error"}, {"code", std::move(code)}, {"message", std::move(message)}, {"re", re}};
  if (field) j["field"] = *field;
  return j;
}

struct GatewayOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  /// Real seconds per simulated agent tick second; 0 streams as fast as possible.
  double pace = 0.0;
  std::string transcript_path;  // written on stop() when non-empty
};

class Gateway {
 public:
  Gateway(json config_doc, GatewayOptions opts, std::filesystem::path base_dir = {})
      : doc_(std::move(config_doc)), opts_(std::move(opts)), base_dir_(std::move(base_dir)) {
    session_ = std::make_unique<Session>(parse_config(doc_, base_dir_));
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;
  ~Gateway() { stop(); }

  void start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error(std::string("gateway: socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opts_.port);
    if (::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr) != 1)
      throw std::runtime_error("gateway: bad bind address " + opts_.host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw std::runtime_error("gateway: cannot bind " + opts_.host + ":" + std::to_string(opts_.port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  std::uint16_t port() const noexcept { return port_; }
  std::string address() const { return opts_.host + ":" + std::to_string(port_); }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    {
      std::lock_guard lk(client_mu_);
      if (client_fd_ >= 0) ::shutdown(client_fd_, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    if (!opts_.transcript_path.empty()) {
      std::ofstream out(opts_.transcript_path, std::ios::binary);
      write_transcript(out, report());
    }
  }

  /// Report of the current session (trials across all connections since the
  /// last configure).
  SessionReport report() const {
    std::lock_guard lk(session_mu_);
    return session_->report();
  }

 private:
  struct Outbound {
    json msg;
  };
  struct Inbound {
    enum Kind { Attend, Configure } kind;
    std::size_t target = 0;
    json patch;
    json re;
  };

  void accept_loop() {
    while (!stopping_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (stopping_ || errno == EINVAL || errno == EBADF) return;
        continue;
      }
      {
        std::lock_guard lk(client_mu_);
        client_fd_ = fd;
      }
      serve_connection(fd);
      {
        std::lock_guard lk(client_mu_);
        client_fd_ = -1;
      }
      ::close(fd);
    }
  }

  void serve_connection(int fd) {
    BlockingQueue<Inbound> inbound;
    BlockingQueue<Outbound> outbound;
    std::atomic<int> pending{0};

    std::thread writer([&] {
      std::uint64_t seq = 0;
      bool ok = true;
      while (auto m = outbound.pop()) {
        if (!ok) continue;
        json framed;
        framed["seq"] = seq++;
        for (auto it = m->msg.begin(); it != m->msg.end(); ++it) framed[it.key()] = it.value();
        const std::string line = framed.dump() + "\n";
        ok = send_all(fd, line);
      }
    });

    {
      std::lock_guard lk(session_mu_);
      outbound.push({hello_message(*session_)});
    }

    std::thread driver([&] {
      while (auto in = inbound.pop()) {
        if (in->kind == Inbound::Configure) {
          apply_configure(*in, outbound);
        } else {
          run_attend(*in, outbound);
        }
        --pending;
      }
    });

    read_loop(fd, inbound, outbound, pending);
    inbound.close();
    driver.join();
    outbound.close();
    writer.join();
  }

  void read_loop(int fd, BlockingQueue<Inbound>& inbound, BlockingQueue<Outbound>& outbound, std::atomic<int>& pending) {
    std::string buf;
    char chunk[4096];
    while (true) {
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) return;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        handle_line(line, inbound, outbound, pending);
      }
      if (buf.size() > kMaxLineBytes) {
        outbound.push({error_message("malformed", "line exceeds 1 MiB")});
        buf.clear();
      }
    }
  }

  void handle_line(const std::string& line, BlockingQueue<Inbound>& inbound, BlockingQueue<Outbound>& outbound,
                   std::atomic<int>& pending) {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error& e) {
      outbound.push({error_message("malformed", std::string("not valid JSON: ") + e.what())});
      return;
    }
    const json re = msg.is_object() && msg.contains("seq") ? msg["seq"] : json(nullptr);
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      outbound.push({error_message("malformed", "expected an object with a string \"type\"", re)});
      return;
    }
    const std::string type = msg["type"].get<std::string>();
    if (type == "attend") {
      if (!msg.contains("target_index") || !msg["target_index"].is_number_integer()) {
        outbound.push({error_message("malformed", "attend needs an integer target_index", re)});
        return;
      }
      const auto idx = msg["target_index"].get<long long>();
      if (idx < 0) {
        outbound.push({error_message("out_of_range", "target_index " + std::to_string(idx) + " is negative", re)});
        return;
      }
      ++pending;
      inbound.push({Inbound::Attend, static_cast<std::size_t>(idx), nullptr, re});
    } else if (type == "configure") {
      if (!msg.contains("config") || !msg["config"].is_object()) {
        outbound.push({error_message("malformed", "configure needs a \"config\" object", re)});
        return;
      }
      if (pending.load() > 0) {
        outbound.push({error_message("busy", "configure rejected: a trial is in progress", re)});
        return;
      }
      ++pending;
      inbound.push({Inbound::Configure, 0, msg["config"], re});
    } else {
      outbound.push({error_message("unknown_type", "unknown message type \"" + type + "\"", re)});
    }
  }

  void apply_configure(const Inbound& in, BlockingQueue<Outbound>& outbound) {
    json next = doc_;
    next.merge_patch(in.patch);
    try {
      auto fresh = std::make_unique<Session>(parse_config(next, base_dir_));
      std::lock_guard lk(session_mu_);
      doc_ = std::move(next);
      session_ = std::move(fresh);
      outbound.push({hello_message(*session_)});
    } catch (const ConfigError& e) {
      outbound.push({error_message("config", e.what(), in.re, e.field())});
    } catch (const std::exception& e) {
      outbound.push({error_message("config", e.what(), in.re)});
    }
  }

  void run_attend(const Inbound& in, BlockingQueue<Outbound>& outbound) {
    std::unique_lock lk(session_mu_);
    const std::size_t count = session_->config().stimulus.count();
    if (in.target >= count) {
      outbound.push({error_message("out_of_range",
                                   "target_index " + std::to_string(in.target) + " outside valid range [0, " +
                                       std::to_string(count - 1) + "]",
                                   in.re)});
      return;
    }
    TrialRecord t;
    try {
      t = session_->run_trial(in.target);
    } catch (const std::exception& e) {
      outbound.push({error_message("runtime", e.what(), in.re)});
      return;
    }
    const SessionReport rep = session_->report();
    const double tick_ms = session_->config().tick_ms;
    lk.unlock();

    outbound.push({json{{"type", "trial_result"},
                        {"re", in.re},
                        {"trial", t.trial_index},
                        {"attended", t.attended_index},
                        {"predicted", t.decision ? json(t.decision->predicted_index) : json(nullptr)},
                        {"recognized", t.recognized()},
                        {"margin", t.decision ? json(t.decision->margin) : json(nullptr)},
                        {"scores", t.decision ? json(t.decision->scores) : json(nullptr)},
                        {"gated", t.gated},
                        {"command", t.command ? json(std::string(to_string(t.command->id))) : json(nullptr)},
                        {"record", to_json(t)}}});
    outbound.push({json{{"type", "feedback"},
                        {"trial", t.trial_index},
                        {"status", std::string(to_string(t.status))},
                        {"color", std::string(to_string(t.color))},
                        {"blink_hz", t.feedback.blink_hz},
                        {"duration_s", t.feedback.duration_s}}});
    std::optional<std::uint64_t> last_tick;
    for (const auto& e : t.events) {
      if (opts_.pace > 0.0 && last_tick && e.tick != *last_tick)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(opts_.pace * tick_ms));
      last_tick = e.tick;
      outbound.push({json{{"type", "agent_event"}, {"trial", t.trial_index}, {"event", to_json(e)}}});
    }
    outbound.push({json{{"type", "metrics"},
                        {"trials", rep.trials.size()},
                        {"accuracy", rep.accuracy},
                        {"itr_bits_per_min", rep.itr_bits_per_min},
                        {"mean_margin", rep.mean_margin}}});
  }

  static bool send_all(int fd, const std::string& s) {
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  json doc_;
  GatewayOptions opts_;
  std::filesystem::path base_dir_;
  mutable std::mutex session_mu_;
  std::unique_ptr<Session> session_;

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex client_mu_;
  int client_fd_ = -1;
};

/// Minimal blocking line client, used by the demo and the tests.
class LineClient {
 public:
  LineClient(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
    if (fd_ < 0 || ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      if (fd_ >= 0) ::close(fd_);
      throw std::runtime_error("client: cannot connect to " + host + ":" + std::to_string(port));
    }
  }
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;
  ~LineClient() { close(); }

  void send_line(const std::string& line) {
    const std::string s = line + "\n";
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::send(fd_, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("client: send failed");
      off += static_cast<std::size_t>(n);
    }
  }
  void send(const json& j) { send_line(j.dump()); }

  /// Next line, or nullopt on EOF.
  std::optional<std::string> read_line() {
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }
  std::optional<json> read() {
    auto line = read_line();
    if (!line) return std::nullopt;
    return json::parse(*line);
  }
  /// Reads until a message of `type` arrives; earlier messages go to `seen`.
  std::optional<json> read_until(const std::string& type, std::vector<json>* seen = nullptr) {
    while (auto m = read()) {
      if ((*m)["type"] == type) return m;
      if (seen) seen->push_back(*m);
    }
    return std::nullopt;
  }

  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

}  // namespace mindlink
