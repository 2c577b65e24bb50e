#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "bab/geometry.hpp"

namespace bab {

enum class Action : std::uint8_t { MoveUp, MoveDown, MoveLeft, MoveRight, Shoot };

inline constexpr Action kAllActions[] = {Action::MoveUp, Action::MoveDown, Action::MoveLeft,
                                         Action::MoveRight, Action::Shoot};

inline bool is_move(Action a) { return a != Action::Shoot; }

inline Orientation move_direction(Action a) {
  switch (a) {
    case Action::MoveUp: return Orientation::Up;
    case Action::MoveDown: return Orientation::Down;
    case Action::MoveLeft: return Orientation::Left;
    default: return Orientation::Right;
  }
}

inline Action move_action(Orientation o) {
  switch (o) {
    case Orientation::Up: return Action::MoveUp;
    case Orientation::Down: return Action::MoveDown;
    case Orientation::Left: return Action::MoveLeft;
    case Orientation::Right: return Action::MoveRight;
  }
  return Action::MoveUp;
}

// Reply token as it appears in the prompt templates.
inline std::string_view action_token(Action a) {
  switch (a) {
    case Action::MoveUp: return "#Move_up#";
    case Action::MoveDown: return "#Move_down#";
    case Action::MoveLeft: return "#Move_left#";
    case Action::MoveRight: return "#Move_right#";
    case Action::Shoot: return "#Shoot#";
  }
  return "";
}

// Identifier used in replay logs.
inline std::string_view action_name(Action a) {
  switch (a) {
    case Action::MoveUp: return "MoveUp";
    case Action::MoveDown: return "MoveDown";
    case Action::MoveLeft: return "MoveLeft";
    case Action::MoveRight: return "MoveRight";
    case Action::Shoot: return "Shoot";
  }
  return "";
}

inline std::optional<Action> action_from_name(std::string_view s) {
  for (Action a : kAllActions) {
    if (action_name(a) == s) return a;
  }
  return std::nullopt;
}

enum class CoopKind : std::uint8_t { Request, Keep, Stop, None };

inline std::string_view coop_kind_name(CoopKind k) {
  switch (k) {
    case CoopKind::Request: return "RequestCoop";
    case CoopKind::Keep: return "KeepCoop";
    case CoopKind::Stop: return "StopCoop";
    case CoopKind::None: return "NoCoop";
  }
  return "";
}

inline std::optional<CoopKind> coop_kind_from_name(std::string_view s) {
  for (CoopKind k : {CoopKind::Request, CoopKind::Keep, CoopKind::Stop, CoopKind::None}) {
    if (coop_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

struct CoopCommand {
  CoopKind kind = CoopKind::None;
  int to_id = 0;         // Request only
  std::string message;   // Request only

  friend bool operator==(const CoopCommand&, const CoopCommand&) = default;
};

// One model reply, parsed. format_ok implies action is set.
struct ParsedAction {
  std::optional<Action> action;
  std::optional<int> target_id;
  std::optional<CoopCommand> coop;
  bool format_ok = false;
  std::string raw;

  // Equality over the structured fields, ignoring raw text.
  bool same_decision(const ParsedAction& o) const {
    return action == o.action && target_id == o.target_id && coop == o.coop && format_ok == o.format_ok;
  }

  static ParsedAction noop() { return {}; }
};

}  // namespace bab
