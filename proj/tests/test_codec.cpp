#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "mindlink/codec.hpp"

using namespace mindlink;

namespace {

Decision make_decision(std::size_t predicted, bool recognized, std::size_t n = 8) {
  Decision d;
  d.scores.assign(n, 0.1);
  d.scores[predicted] = 0.9;
  d.predicted_index = predicted;
  d.margin = recognized ? 0.8 : 0.0;
  d.recognized = recognized;
  return d;
}

}  // namespace

TEST_CASE("default table maps targets to the eight commands in order") {
  const auto table = CommandTable::default_table();
  REQUIRE(table.size() == 8);
  CHECK(table.at(0) == CommandId::ReconArea);
  CHECK(table.at(1) == CommandId::Halt);
  CHECK(table.at(2) == CommandId::ReturnToBase);
  CHECK(table.at(3) == CommandId::MoveNorth);
  CHECK(table.at(7) == CommandId::MarkTarget);
  std::set<CommandId> ids(table.entries().begin(), table.entries().end());
  CHECK(ids.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(table.index_of(table.at(i)) == i);
}

TEST_CASE("command names round-trip through parse_command") {
  for (std::size_t i = 0; i < kCommandNames.size(); ++i) {
    const auto id = static_cast<CommandId>(i);
    CHECK(parse_command(to_string(id)) == id);
  }
  CHECK_FALSE(parse_command("Strike").has_value());
  CHECK_FALSE(parse_command("movenorth").has_value());
}

TEST_CASE("tables must be bijective") {
  CHECK_THROWS_AS(CommandTable({CommandId::Halt, CommandId::Halt}), InvalidArgument);
  CHECK_THROWS_AS(CommandTable(std::vector<CommandId>{}), InvalidArgument);
  CHECK_THROWS_AS(CommandTable::from_pairs({{0, CommandId::Halt}, {0, CommandId::MoveEast}}, 2), InvalidArgument);
  CHECK_THROWS_AS(CommandTable::from_pairs({{0, CommandId::Halt}}, 2), InvalidArgument);
  CHECK_THROWS_AS(CommandTable::from_pairs({{0, CommandId::Halt}, {5, CommandId::MoveEast}}, 2), InvalidArgument);
  const auto t = CommandTable::from_pairs({{1, CommandId::Halt}, {0, CommandId::MoveEast}}, 2);
  CHECK(t.at(0) == CommandId::MoveEast);
  CHECK(t.at(1) == CommandId::Halt);
}

TEST_CASE("map_decision sends nothing for an unrecognized decision") {
  const auto table = CommandTable::default_table();
  CHECK_FALSE(map_decision(make_decision(3, false), table, 12).has_value());
  const auto cmd = map_decision(make_decision(3, true), table, 12);
  REQUIRE(cmd);
  CHECK(cmd->id == CommandId::MoveNorth);
  CHECK(cmd->issued_at == 12);
  CHECK_THROWS_AS(map_decision(make_decision(2, true, 4), table), InvalidArgument);
}

TEST_CASE("map_decision agrees with the table for random decisions") {
  const auto table = CommandTable::default_table();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    Decision d;
    d.scores.resize(8);
    for (auto& s : d.scores) s = u(rng);
    d.predicted_index = static_cast<std::size_t>(std::max_element(d.scores.begin(), d.scores.end()) - d.scores.begin());
    d.margin = u(rng) * 0.3;
    d.recognized = d.margin >= 0.15;
    const auto cmd = map_decision(d, table, static_cast<std::uint64_t>(i));
    REQUIRE(cmd.has_value() == d.recognized);
    if (cmd) {
      CHECK(cmd->id == table.at(d.predicted_index));
      CHECK(table.index_of(cmd->id) == d.predicted_index);  // unique preimage
    }
  }
}

TEST_CASE("feedback colour is a fixed function of status") {
  CHECK(feedback_color(FeedbackStatus::NotRecognized) == Color::Red);
  CHECK(feedback_color(FeedbackStatus::RecognizedNotExecuted) == Color::Yellow);
  CHECK(feedback_color(FeedbackStatus::Executed) == Color::Green);
  static_assert(feedback_color(FeedbackStatus::Executed) == Color::Green);
  for (auto s : {FeedbackStatus::NotRecognized, FeedbackStatus::RecognizedNotExecuted, FeedbackStatus::Executed})
    CHECK(parse_status(to_string(s)) == s);
  CHECK_FALSE(parse_status("Done").has_value());
}

TEST_CASE("encode_feedback keeps the blink below the stimulus band") {
  const auto f = encode_feedback(FeedbackStatus::Executed, 2.0, 1.0);
  CHECK(f == FeedbackFrame{Color::Green, 2.0, 1.0});
  CHECK(encode_feedback(FeedbackStatus::NotRecognized, 1.0, 0.5).color == Color::Red);
  CHECK(encode_feedback(FeedbackStatus::RecognizedNotExecuted, 5.0, 0.5).color == Color::Yellow);
  CHECK_THROWS_AS(encode_feedback(FeedbackStatus::Executed, 8.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(encode_feedback(FeedbackStatus::Executed, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(encode_feedback(FeedbackStatus::Executed, 2.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(encode_feedback(FeedbackStatus::Executed, std::nan(""), 1.0), InvalidArgument);
}

TEST_CASE("random statuses always encode to their colour") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> hz(1.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const auto s = static_cast<FeedbackStatus>(pick(rng));
    const auto f = encode_feedback(s, hz(rng), 1.0);
    CHECK(f.color == feedback_color(s));
    CHECK(f.blink_hz < 6.0);
  }
}
