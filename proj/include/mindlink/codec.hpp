#pragma once

// Decision -> machine command, and execution status -> feedback block.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mindlink/common.hpp"
#include "mindlink/fbcca.hpp"

namespace mindlink {

enum class CommandId : std::uint8_t {
  ReconArea,
  Halt,
  ReturnToBase,
  MoveNorth,
  MoveSouth,
  MoveEast,
  MoveWest,
  MarkTarget,
};

inline constexpr std::array<std::string_view, 8> kCommandNames{
    "ReconArea", "Halt", "ReturnToBase", "MoveNorth", "MoveSouth", "MoveEast", "MoveWest", "MarkTarget"};

inline std::string_view to_string(CommandId id) { return kCommandNames[static_cast<std::size_t>(id)]; }

inline std::optional<CommandId> parse_command(std::string_view name) {
  for (std::size_t i = 0; i < kCommandNames.size(); ++i)
    if (kCommandNames[i] == name) return static_cast<CommandId>(i);
  return std::nullopt;
}

struct Command {
  CommandId id = CommandId::Halt;
  std::uint64_t issued_at = 0;  // loop tick
  bool operator==(const Command&) const = default;
};

/// Bijective map from stimulus target index to command id.
class CommandTable {
 public:
  /// Entry i is the command for target i. Throws unless every id is distinct.
  explicit CommandTable(std::vector<CommandId> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw InvalidArgument("command table: empty");
    for (std::size_t i = 0; i < entries_.size(); ++i)
      for (std::size_t j = i + 1; j < entries_.size(); ++j)
        if (entries_[i] == entries_[j])
          throw InvalidArgument("command table: " + std::string(to_string(entries_[i])) +
                                " mapped from more than one target");
  }

  /// Builds from an explicit index -> id map; every index in [0, count) must
  /// appear exactly once.
  static CommandTable from_pairs(const std::vector<std::pair<std::size_t, CommandId>>& pairs, std::size_t count) {
    std::vector<std::optional<CommandId>> slots(count);
    for (auto [idx, id] : pairs) {
      if (idx >= count) throw InvalidArgument("command table: index " + std::to_string(idx) + " out of range");
      if (slots[idx]) throw InvalidArgument("command table: index " + std::to_string(idx) + " mapped twice");
      slots[idx] = id;
    }
    std::vector<CommandId> entries;
    for (std::size_t i = 0; i < count; ++i) {
      if (!slots[i]) throw InvalidArgument("command table: index " + std::to_string(i) + " unmapped");
      entries.push_back(*slots[i]);
    }
    return CommandTable(std::move(entries));
  }

  /// ReconArea, Halt, ReturnToBase, MoveNorth, MoveSouth, MoveEast, MoveWest, MarkTarget.
  static CommandTable default_table() {
    std::vector<CommandId> e;
    for (std::size_t i = 0; i < kCommandNames.size(); ++i) e.push_back(static_cast<CommandId>(i));
    return CommandTable(std::move(e));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  CommandId at(std::size_t index) const {
    if (index >= entries_.size()) throw InvalidArgument("command table: index out of range");
    return entries_[index];
  }
  std::optional<std::size_t> index_of(CommandId id) const {
    auto it = std::find(entries_.begin(), entries_.end(), id);
    if (it == entries_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - entries_.begin());
  }
  const std::vector<CommandId>& entries() const noexcept { return entries_; }

 private:
  std::vector<CommandId> entries_;
};

/// nullopt is the not-recognized outcome: nothing is sent to the agent.
inline std::optional<Command> map_decision(const Decision& decision, const CommandTable& table,
                                           std::uint64_t tick = 0) {
  if (decision.scores.size() != table.size())
    throw InvalidArgument("map_decision: decision has " + std::to_string(decision.scores.size()) +
                          " scores, table has " + std::to_string(table.size()) + " entries");
  if (!decision.recognized) return std::nullopt;
  return Command{table.at(decision.predicted_index), tick};
}

enum class FeedbackStatus : std::uint8_t { NotRecognized = 0, RecognizedNotExecuted = 1, Executed = 2 };
enum class Color : std::uint8_t { Red, Yellow, Green };

inline std::string_view to_string(FeedbackStatus s) {
  switch (s) {
    case FeedbackStatus::NotRecognized: return "NotRecognized";
    case FeedbackStatus::RecognizedNotExecuted: return "RecognizedNotExecuted";
    case FeedbackStatus::Executed: return "Executed";
  }
  return "?";
}

inline std::string_view to_string(Color c) {
  switch (c) {
    case Color::Red: return "Red";
    case Color::Yellow: return "Yellow";
    case Color::Green: return "Green";
  }
  return "?";
}

inline std::optional<FeedbackStatus> parse_status(std::string_view s) {
  for (auto v : {FeedbackStatus::NotRecognized, FeedbackStatus::RecognizedNotExecuted, FeedbackStatus::Executed})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline constexpr Color feedback_color(FeedbackStatus status) {
  switch (status) {
    case FeedbackStatus::NotRecognized: return Color::Red;
    case FeedbackStatus::RecognizedNotExecuted: return Color::Yellow;
    case FeedbackStatus::Executed: return Color::Green;
  }
  return Color::Red;
}

/// Feedback flashes stay below the lowest SSVEP stimulus frequency.
inline constexpr double kFeedbackBlinkMinHz = 1.0;
inline constexpr double kFeedbackBlinkMaxHz = 5.0;

struct FeedbackFrame {
  Color color = Color::Red;
  double blink_hz = 2.0;
  double duration_s = 1.0;
  bool operator==(const FeedbackFrame&) const = default;
};

inline FeedbackFrame encode_feedback(FeedbackStatus status, double blink_hz, double duration_s) {
  if (!(blink_hz >= kFeedbackBlinkMinHz && blink_hz <= kFeedbackBlinkMaxHz))
    throw InvalidArgument("encode_feedback: blink " + std::to_string(blink_hz) +
                          " Hz outside [1, 5] Hz would collide with the stimulus band");
  if (!(duration_s > 0.0)) throw InvalidArgument("encode_feedback: duration must be > 0");
  return FeedbackFrame{feedback_color(status), blink_hz, duration_s};
}

}  // namespace mindlink
