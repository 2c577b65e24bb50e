#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bab/action.hpp"
#include "bab/embedded_templates.hpp"
#include "bab/engine.hpp"
#include "bab/world.hpp"

namespace bab {

enum class Locale : std::uint8_t { En, Zh };

inline std::string_view locale_name(Locale l) { return l == Locale::En ? "en" : "zh"; }

inline Locale locale_from_name(std::string_view s) {
  if (s == "en" || s == "EN") return Locale::En;
  if (s == "zh" || s == "ZH") return Locale::Zh;
  throw std::invalid_argument("unsupported locale '" + std::string(s) + "'");
}

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace protocol {

// ---------------------------------------------------------------------------
// Templates
//
// Slot syntax: `{{name}}` is replaced by the slot value (empty when absent);
// `{{#coop}}...{{/coop}}` is kept only when cooperation is offered. Stripping
// every tag yields the original template text byte for byte.

inline std::string_view template_text(int stage_id, Locale locale) {
  const std::string name = "stage" + std::to_string(stage_id) + "_" + std::string(locale_name(locale));
  for (const auto& t : embedded::kTemplates) {
    if (t.name == name) return t.text;
  }
  throw ProtocolError("no template for " + name);
}

inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& slots,
                                   bool coop_section) {
  std::string out;
  out.reserve(tmpl.size() + 512);
  std::size_t i = 0;
  bool skipping = false;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      if (!skipping) out.append(tmpl.substr(i));
      break;
    }
    if (!skipping) out.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find("}}", open);
    if (close == std::string_view::npos) throw ProtocolError("unterminated template tag");
    const std::string_view tag = tmpl.substr(open + 2, close - open - 2);
    if (tag == "#coop") {
      skipping = !coop_section;
    } else if (tag == "/coop") {
      skipping = false;
    } else if (!skipping) {
      if (auto it = slots.find(std::string(tag)); it != slots.end() && !it->second.empty()) {
        out.append(it->second);
        // A slot that starts a line but shares it with following text (e.g.
        // "{{map_info}}</game>") keeps that text on a line of its own.
        const bool line_start = open == 0 || tmpl[open - 1] == '\n';
        const bool text_follows = close + 2 < tmpl.size() && tmpl[close + 2] != '\n';
        if (line_start && text_follows && it->second.back() != '\n') out.push_back('\n');
      }
    }
    i = close + 2;
  }
  return out;
}

// Literal template pieces between tags, in order, for the section state given.
inline std::vector<std::string> template_literals(std::string_view tmpl, bool coop_section) {
  std::vector<std::string> pieces;
  std::string cur;
  std::size_t i = 0;
  bool skipping = false;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      if (!skipping) cur.append(tmpl.substr(i));
      break;
    }
    if (!skipping) cur.append(tmpl.substr(i, open - i));
    const auto close = tmpl.find("}}", open);
    const std::string_view tag = tmpl.substr(open + 2, close - open - 2);
    if (tag == "#coop") {
      skipping = !coop_section;
    } else if (tag == "/coop") {
      skipping = false;
    } else if (!skipping) {
      pieces.push_back(std::move(cur));
      cur.clear();
    }
    i = close + 2;
  }
  pieces.push_back(std::move(cur));
  return pieces;
}

// ---------------------------------------------------------------------------
// Reply formats

enum class ReplyFormat : std::uint8_t {
  Operation,          // stages 1-2: "#Operation: <token>"
  TargetedOperation,  // stage 4:    "#Operation: Target <id>: <token>"
  AttackCooperation,  // stages 3,5,6,7: attack line plus cooperation line
};

inline ReplyFormat reply_format(int stage_id) {
  switch (stage_id) {
    case 1:
    case 2: return ReplyFormat::Operation;
    case 4: return ReplyFormat::TargetedOperation;
    case 3:
    case 5:
    case 6:
    case 7: return ReplyFormat::AttackCooperation;
    default: throw ProtocolError("invalid stage id " + std::to_string(stage_id));
  }
}

inline bool requires_target(int stage_id) { return reply_format(stage_id) != ReplyFormat::Operation; }

struct MarkerSet {
  std::string_view operation;
  std::string_view attack;
  std::string_view cooperation;
};

inline constexpr MarkerSet kEnMarkers{"#Operation:", "#Attack operation:", "#Cooperation operation:"};
inline constexpr MarkerSet kZhMarkers{"#操作:", "#攻击操作:", "#协作操作:"};

inline const MarkerSet& markers(Locale l) { return l == Locale::En ? kEnMarkers : kZhMarkers; }

inline constexpr std::string_view kCoopTokens[] = {"#Request_coop#", "#Keep_coop#", "#Stop_coop#", "#No_coop#"};
inline constexpr CoopKind kCoopKinds[] = {CoopKind::Request, CoopKind::Keep, CoopKind::Stop, CoopKind::None};

namespace detail {

// Text after the last occurrence of any of `marker_stems` (each followed by an
// ASCII or full-width colon), up to the end of that line.
inline std::optional<std::string> last_marker_line(std::string_view raw,
                                                   std::initializer_list<std::string_view> colon_markers) {
  std::optional<std::size_t> best_end;
  std::size_t best_pos = 0;
  for (std::string_view m : colon_markers) {
    // Markers are stored with an ASCII colon; also accept the full-width form.
    const std::string_view stem = m.substr(0, m.size() - 1);
    for (std::string_view colon : {std::string_view(":"), std::string_view("：")}) {
      const std::string full = std::string(stem) + std::string(colon);
      const auto pos = raw.rfind(full);
      if (pos == std::string_view::npos) continue;
      if (!best_end || pos > best_pos) {
        best_pos = pos;
        best_end = pos + full.size();
      }
    }
  }
  if (!best_end) return std::nullopt;
  auto eol = raw.find('\n', *best_end);
  if (eol == std::string_view::npos) eol = raw.size();
  return trim(raw.substr(*best_end, eol - *best_end));
}

inline int count_occurrences(std::string_view hay, std::string_view needle) {
  int n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

inline std::optional<Action> single_action_token(std::string_view text) {
  std::optional<Action> found;
  int total = 0;
  for (Action a : kAllActions) {
    const int n = count_occurrences(text, action_token(a));
    if (n > 0) found = a;
    total += n;
  }
  if (total != 1) return std::nullopt;
  return found;
}

// "Target <int>: <rest>" -> (id, rest)
inline std::optional<std::pair<int, std::string>> split_target(const std::string& line) {
  static const std::regex re(R"(^Target\s*\{?\s*(-?[0-9]+)\s*\}?\s*(?::|：)\s*([\s\S]*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, re)) return std::nullopt;
  try {
    return std::make_pair(std::stoi(m[1].str()), m[2].str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<CoopCommand> parse_coop_line(const std::string& line) {
  int total = 0;
  std::optional<std::size_t> which;
  for (std::size_t k = 0; k < std::size(kCoopTokens); ++k) {
    const int n = count_occurrences(line, kCoopTokens[k]);
    if (n > 0) which = k;
    total += n;
  }
  if (total != 1) return std::nullopt;
  CoopCommand cmd;
  cmd.kind = kCoopKinds[*which];
  if (cmd.kind != CoopKind::Request) return cmd;
  const auto pos = line.find(kCoopTokens[0]) + kCoopTokens[0].size();
  const std::string rest = line.substr(pos);
  static const std::regex re(R"(^\s*\{?[^0-9{}:：]*?([0-9]+)\s*\}?\s*(?:(?::|：)([\s\S]*))?$)");
  std::smatch m;
  if (!std::regex_match(rest, m, re)) return std::nullopt;
  try {
    cmd.to_id = std::stoi(m[1].str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
  std::string msg = trim(m[2].str());
  if (msg.size() >= 2 && msg.front() == '{' && msg.back() == '}') msg = trim(msg.substr(1, msg.size() - 2));
  cmd.message = msg;
  return cmd;
}

}  // namespace detail

// Extracts the stage's operation (and cooperation) command from a model reply.
// Both English and Chinese markers are recognised; the last marker wins.
// Malformed text yields format_ok = false, never an error.
inline ParsedAction parse_response(int stage_id, std::string_view raw) {
  ParsedAction out;
  out.raw = std::string(raw);
  const ReplyFormat fmt = reply_format(stage_id);
  const bool attack_form = fmt == ReplyFormat::AttackCooperation;

  const auto op_line = attack_form ? detail::last_marker_line(raw, {kEnMarkers.attack, kZhMarkers.attack})
                                   : detail::last_marker_line(raw, {kEnMarkers.operation, kZhMarkers.operation});
  if (op_line) {
    std::optional<int> target;
    std::string command = *op_line;
    bool ok = true;
    if (fmt != ReplyFormat::Operation) {
      if (auto split = detail::split_target(*op_line)) {
        target = split->first;
        command = split->second;
      } else {
        ok = false;
      }
    }
    if (ok) {
      if (auto a = detail::single_action_token(command)) {
        out.action = a;
        out.target_id = target;
        out.format_ok = true;
      }
    }
  }
  if (attack_form) {
    if (auto coop_line = detail::last_marker_line(raw, {kEnMarkers.cooperation, kZhMarkers.cooperation})) {
      out.coop = detail::parse_coop_line(*coop_line);
    }
  }
  return out;
}

inline std::string coop_text(const CoopCommand& c) {
  switch (c.kind) {
    case CoopKind::Request: {
      std::string s = "#Request_coop# " + std::to_string(c.to_id);
      if (!c.message.empty()) s += ": " + c.message;
      return s;
    }
    case CoopKind::Keep: return "#Keep_coop#";
    case CoopKind::Stop: return "#Stop_coop#";
    case CoopKind::None: return "#No_coop#";
  }
  return "";
}

// Operation part of a reply, without marker: "#Shoot#" or "Target 3: #Shoot#".
inline std::string operation_text(int stage_id, Action a, std::optional<int> target) {
  std::string s;
  if (requires_target(stage_id)) s = "Target " + std::to_string(target.value_or(0)) + ": ";
  s += action_token(a);
  return s;
}

// Canonical well-formed reply for a decision.
inline std::string format_reply(int stage_id, Action a, std::optional<int> target, const std::optional<CoopCommand>& coop,
                                Locale locale = Locale::En) {
  const MarkerSet& m = markers(locale);
  const ReplyFormat fmt = reply_format(stage_id);
  std::string s;
  if (fmt == ReplyFormat::AttackCooperation) {
    s = std::string(m.attack) + " " + operation_text(stage_id, a, target);
    if (coop) s += "\n" + std::string(m.cooperation) + " " + coop_text(*coop);
  } else {
    s = std::string(m.operation) + " " + operation_text(stage_id, a, target);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Observation rendering

// Previous turn as shown back to the agent.
struct LastRound {
  std::string operation;
  std::string feedback;
};

namespace detail {

inline std::string_view direction_word(Orientation o, Locale l) {
  if (l == Locale::Zh) {
    switch (o) {
      case Orientation::Up: return "上";
      case Orientation::Down: return "下";
      case Orientation::Left: return "左";
      case Orientation::Right: return "右";
    }
  }
  switch (o) {
    case Orientation::Up: return "up";
    case Orientation::Down: return "down";
    case Orientation::Left: return "left";
    case Orientation::Right: return "right";
  }
  return "";
}

inline std::string none_word(Locale l) { return l == Locale::En ? "none" : "无"; }

inline std::string tank_row(const Tank& t, Locale l, bool with_type) {
  std::ostringstream s;
  s << "(" << t.id << ", " << t.pos.x << ", " << t.pos.y << ", " << direction_word(t.facing, l) << ", " << t.health;
  if (with_type) {
    const bool adv = t.coop_capable;
    s << ", " << (l == Locale::En ? (adv ? "advanced" : "normal") : (adv ? "高级" : "普通"));
  }
  s << ")";
  return s.str();
}

inline std::string base_row(const Base& b) {
  return "(" + std::to_string(b.id) + ", " + std::to_string(b.pos.x) + ", " + std::to_string(b.pos.y) + ")";
}

// Joins rows as a block slot value, one row per line.
inline std::string block(const std::vector<std::string>& rows, Locale l) {
  if (rows.empty()) return none_word(l);
  std::string s;
  for (const auto& r : rows) s += (s.empty() ? "" : "\n") + r;
  return s;
}

inline std::string disposition_word(Disposition d, Locale l) {
  if (l == Locale::En) {
    switch (d) {
      case Disposition::Pending: return "pending";
      case Disposition::Accepted: return "accepted";
      case Disposition::Rejected: return "rejected";
      case Disposition::Stopped: return "stopped";
    }
  }
  switch (d) {
    case Disposition::Pending: return "待回复";
    case Disposition::Accepted: return "已接受";
    case Disposition::Rejected: return "已拒绝";
    case Disposition::Stopped: return "已终止";
  }
  return "";
}

inline std::string compress_runs(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    while (j + 1 < xs.size() && xs[j + 1] == xs[j] + kCellSize) ++j;
    if (!s.empty()) s += ", ";
    s += std::to_string(xs[i]);
    if (j > i) s += "-" + std::to_string(xs[j]);
    i = j + 1;
  }
  return s;
}

}  // namespace detail

inline constexpr int kMapWindow = 96;
inline constexpr std::size_t kCoopHistoryCap = 5;

// Wall cells within a 96-px L-infinity window of the tank footprint, plus what
// occupies the 32x32 cell directly ahead.
inline std::string map_block(const WorldState& w, const Tank& t, Locale l) {
  std::vector<std::string> rows;
  const bool en = l == Locale::En;
  {
    const Position ahead = translated(t.pos, t.facing, kMoveStep);
    const Rect r = Rect::footprint(ahead, kTankSize);
    std::string what;
    if (!r.inside_map()) {
      what = en ? "map boundary" : "地图边界";
    } else {
      std::vector<std::string> items;
      for (const auto& o : w.tanks)
        if (o.id != t.id && o.alive() && o.footprint().intersects(r))
          items.push_back((en ? "tank " : "坦克 ") + std::to_string(o.id));
      for (const auto& b : w.bases)
        if (!b.destroyed && b.footprint().intersects(r))
          items.push_back((en ? "base " : "基地 ") + std::to_string(b.id));
      int walls = 0;
      for (int cy = r.y / kCellSize; cy < r.bottom() / kCellSize; ++cy)
        for (int cx = r.x / kCellSize; cx < r.right() / kCellSize; ++cx) walls += w.walls.at(cx, cy) ? 1 : 0;
      if (walls > 0) items.push_back(std::to_string(walls) + (en ? " wall cells" : " 个wall"));
      if (items.empty()) what = en ? "clear" : "空";
      for (std::size_t i = 0; i < items.size(); ++i) what += (i ? ", " : "") + items[i];
    }
    const std::string dir(detail::direction_word(t.facing, l));
    rows.push_back(en ? "Ahead (" + dir + "): " + what : "前方(" + dir + "): " + what);
  }
  const Rect window{t.pos.x - kMapWindow, t.pos.y - kMapWindow, kTankSize + 2 * kMapWindow,
                    kTankSize + 2 * kMapWindow};
  std::vector<std::string> wall_rows;
  for (int cy = std::max(0, window.y / kCellSize); cy < std::min(kGridCells, window.bottom() / kCellSize); ++cy) {
    std::vector<int> xs;
    for (int cx = std::max(0, window.x / kCellSize); cx < std::min(kGridCells, window.right() / kCellSize); ++cx)
      if (w.walls.at(cx, cy)) xs.push_back(cx * kCellSize);
    if (!xs.empty()) wall_rows.push_back("y=" + std::to_string(cy * kCellSize) + ": x=" + detail::compress_runs(xs));
  }
  if (wall_rows.empty()) {
    rows.push_back(en ? "Walls within 96 px: none" : "周围96像素内的wall: 无");
  } else {
    rows.push_back(en ? "Walls within 96 px (8x8 cells, by row):" : "周围96像素内的wall(8x8格, 按行):");
    for (auto& r : wall_rows) rows.push_back(std::move(r));
  }
  return detail::block(rows, l);
}

inline bool coop_offered(const WorldState& w) {
  return w.coop_enabled && w.config.coop_topology != CoopTopology::None;
}

inline std::string coop_history_block(const WorldState& w, const Tank& t, Locale l) {
  const bool en = l == Locale::En;
  std::vector<int> mine;
  for (int i = 0; i < static_cast<int>(w.coop_log.size()); ++i) {
    const auto& m = w.coop_log[static_cast<std::size_t>(i)];
    if (m.from_id == t.id || m.to_id == t.id) mine.push_back(i);
  }
  if (mine.size() > kCoopHistoryCap) mine.erase(mine.begin(), mine.end() - static_cast<long>(kCoopHistoryCap));
  std::vector<int> fresh;
  if (auto it = w.mailboxes.find(t.id); it != w.mailboxes.end()) fresh = it->second;
  std::vector<std::string> rows;
  for (int i : mine) {
    const auto& m = w.coop_log[static_cast<std::size_t>(i)];
    std::ostringstream s;
    if (en) {
      s << "Round " << (m.turn + 1) << ": tank " << m.from_id << " -> tank " << m.to_id << ": \"" << m.body << "\" ("
        << detail::disposition_word(m.disposition, l) << ")";
      if (std::find(fresh.begin(), fresh.end(), i) != fresh.end()) s << " [new]";
    } else {
      s << "第" << (m.turn + 1) << "回合: 坦克" << m.from_id << " -> 坦克" << m.to_id << ": “" << m.body << "” ("
        << detail::disposition_word(m.disposition, l) << ")";
      if (std::find(fresh.begin(), fresh.end(), i) != fresh.end()) s << " [新]";
    }
    rows.push_back(s.str());
  }
  std::vector<int> partners;
  for (const auto& p : w.coop_pairs)
    if (p.involves(t.id)) partners.push_back(p.partner_of(t.id));
  if (!partners.empty()) {
    std::string s = en ? "Active cooperation with tank" : "当前协作坦克";
    for (std::size_t i = 0; i < partners.size(); ++i) s += (i ? ", " : " ") + std::to_string(partners[i]);
    rows.push_back(s);
  }
  return detail::block(rows, l);
}

// Fills the stage template for one agent. Pure function of its inputs.
inline std::string render_observation(const WorldState& w, int agent_id, Locale locale,
                                      const std::optional<LastRound>& last = std::nullopt) {
  const Tank* self = w.find_tank(agent_id);
  if (!self || !self->is_agent()) throw ProtocolError("unknown agent " + std::to_string(agent_id));
  if (!self->alive()) throw ProtocolError("agent " + std::to_string(agent_id) + " is dead");
  const int stage = w.config.stage_id;
  const bool with_type = stage >= 6;

  std::map<std::string, std::string> slots;
  slots["turn"] = std::to_string(w.turn + 1);
  slots["own_tank"] = detail::block({detail::tank_row(*self, locale, with_type)}, locale);

  std::vector<std::string> mates, enemies, own_base, enemy_bases, targets;
  for (const auto& t : w.tanks) {
    if (!t.alive() || t.id == self->id) continue;
    const bool teammate = t.is_agent() && t.team == self->team;
    (teammate ? mates : enemies).push_back(detail::tank_row(t, locale, with_type));
  }
  for (const auto& b : w.bases) {
    if (b.destroyed) continue;
    (b.team == self->team ? own_base : enemy_bases).push_back(detail::base_row(b));
  }
  for (const auto& [id, target] : w.last_targets) {
    const Tank* t = w.find_tank(id);
    if (t && t->team == self->team) targets.push_back("(" + std::to_string(id) + ", " + std::to_string(target) + ")");
  }
  slots["teammates"] = detail::block(mates, locale);
  slots["enemy_tanks"] = detail::block(enemies, locale);
  slots["own_base"] = detail::block(own_base, locale);
  slots["enemy_bases"] = detail::block(enemy_bases, locale);
  std::vector<std::string> goal;
  if (!w.bases.empty()) goal.push_back(detail::base_row(w.bases.front()));
  slots["goal_base"] = detail::block(goal, locale);
  slots["attack_targets"] = detail::block(targets, locale);
  slots["coop_history"] = coop_history_block(w, *self, locale);
  slots["map_info"] = map_block(w, *self, locale);

  const std::string none = detail::none_word(locale);
  const std::string op = last ? last->operation : none;
  const std::string fb = last ? last->feedback : none;
  slots["last_operation"] = op;
  slots["last_feedback"] = fb;
  slots["previous_operation"] =
      detail::block({locale == Locale::En ? "Operation: " + op + "; feedback: " + fb : "操作: " + op + "；反馈: " + fb},
                    locale);

  return render_template(template_text(stage, locale), slots, coop_offered(w));
}

inline std::string describe_resolution(const TurnRecord& r, Locale l) {
  const bool en = l == Locale::En;
  const Resolution& res = r.resolution;
  std::ostringstream s;
  switch (res.kind) {
    case ResolutionKind::NoOp:
      if (!r.parsed.format_ok) s << (en ? "invalid output format, no operation executed" : "输出格式错误，未执行操作");
      else s << (en ? "no operation" : "未执行操作");
      break;
    case ResolutionKind::Moved:
      s << (en ? "moved to (" : "移动到 (") << r.pos_after.x << ", " << r.pos_after.y << ")";
      break;
    case ResolutionKind::Blocked: {
      std::string what;
      switch (res.blocker) {
        case Blocker::Wall: what = en ? "a wall" : "wall"; break;
        case Blocker::Tank: what = en ? "a tank" : "坦克"; break;
        case Blocker::Base: what = en ? "a base" : "基地"; break;
        default: what = en ? "the map boundary" : "地图边界"; break;
      }
      s << (en ? "blocked by " + what + ", position unchanged" : "被" + what + "阻挡，位置未变");
      break;
    }
    case ResolutionKind::HitWall: s << (en ? "shot destroyed a wall" : "射击摧毁了wall"); break;
    case ResolutionKind::HitTank:
      if (en) s << "shot hit tank " << res.target_id << (res.destroyed ? " (destroyed)" : " (damaged)");
      else s << "射击命中坦克 " << res.target_id << (res.destroyed ? " (已摧毁)" : " (受损)");
      break;
    case ResolutionKind::HitBase:
      s << (en ? "shot destroyed base " : "射击摧毁了基地 ") << res.target_id;
      break;
    case ResolutionKind::NoHit: s << (en ? "shot hit nothing" : "射击未命中"); break;
    case ResolutionKind::Dead: s << (en ? "tank was destroyed before acting" : "坦克在行动前被摧毁"); break;
  }
  if (!r.error.empty()) s << (en ? " (model call failed: " : " (模型调用失败: ") << r.error << ")";
  return s.str();
}

inline LastRound last_round_from(const TurnRecord& r, int stage_id, Locale l) {
  LastRound lr;
  if (r.parsed.format_ok && r.parsed.action) {
    lr.operation = operation_text(stage_id, *r.parsed.action, r.parsed.target_id);
  } else {
    lr.operation = l == Locale::En ? "invalid" : "无效";
  }
  lr.feedback = describe_resolution(r, l);
  return lr;
}

// ---------------------------------------------------------------------------
// Cooperation routing

enum class CoopEventKind : std::uint8_t { Request, Accept, Reject, Keep, Stop, Dropped };

inline std::string_view coop_event_name(CoopEventKind k) {
  switch (k) {
    case CoopEventKind::Request: return "request";
    case CoopEventKind::Accept: return "accept";
    case CoopEventKind::Reject: return "reject";
    case CoopEventKind::Keep: return "keep";
    case CoopEventKind::Stop: return "stop";
    case CoopEventKind::Dropped: return "dropped";
  }
  return "";
}

inline std::optional<CoopEventKind> coop_event_from_name(std::string_view s) {
  for (CoopEventKind k : {CoopEventKind::Request, CoopEventKind::Accept, CoopEventKind::Reject, CoopEventKind::Keep,
                          CoopEventKind::Stop, CoopEventKind::Dropped}) {
    if (coop_event_name(k) == s) return k;
  }
  return std::nullopt;
}

struct CoopEvent {
  int turn = 0;
  CoopEventKind kind = CoopEventKind::Request;
  int from_id = 0;
  int to_id = 0;
  std::string body;
  std::string note;

  friend bool operator==(const CoopEvent&, const CoopEvent&) = default;
};

inline bool topology_allows(CoopTopology topo, const Tank& from, const Tank& to) {
  switch (topo) {
    case CoopTopology::None: return false;
    case CoopTopology::IntraTeam: return from.team == to.team;
    case CoopTopology::InterTeam: return from.team != to.team;
    case CoopTopology::Both: return true;
  }
  return false;
}

namespace detail {

inline void add_pair(WorldState& w, int x, int y) {
  const int a = std::min(x, y);
  const int b = std::max(x, y);
  for (auto& p : w.coop_pairs) {
    if (p.a == a && p.b == b) {
      p.refreshed_turn = w.turn;
      return;
    }
  }
  w.coop_pairs.push_back({a, b, w.turn, w.turn});
  std::sort(w.coop_pairs.begin(), w.coop_pairs.end(),
            [](const CoopPair& l, const CoopPair& r) { return std::tie(l.a, l.b) < std::tie(r.a, r.b); });
}

}  // namespace detail

// Delivers this turn's cooperation commands. Messages queued now appear in
// the recipient's next observation; replies to delivered messages decide
// whether the proposal was accepted.
inline std::vector<CoopEvent> route_coop(WorldState& w, const std::map<int, ParsedAction>& actions, bool coop_enabled) {
  std::vector<CoopEvent> events;
  if (!coop_enabled) return events;

  auto delivered = std::move(w.mailboxes);
  w.mailboxes.clear();
  const CoopTopology topo = w.config.coop_topology;
  const bool capability_gate = w.config.stage_id >= 6;

  for (const auto& [id, pa] : actions) {
    const Tank* self = w.find_tank(id);
    if (!self || !self->alive()) continue;
    const std::optional<CoopCommand>& cmd = pa.coop;

    if (auto it = delivered.find(id); it != delivered.end()) {
      for (int idx : it->second) {
        CoopMessage& m = w.coop_log[static_cast<std::size_t>(idx)];
        if (m.disposition != Disposition::Pending) continue;
        const bool accepts = cmd && (cmd->kind == CoopKind::Keep ||
                                     (cmd->kind == CoopKind::Request && cmd->to_id == m.from_id));
        const Tank* proposer = w.find_tank(m.from_id);
        if (accepts && proposer && proposer->alive()) {
          m.disposition = Disposition::Accepted;
          detail::add_pair(w, m.from_id, id);
          events.push_back({w.turn, CoopEventKind::Accept, m.from_id, id, {}, {}});
        } else {
          m.disposition = Disposition::Rejected;
          events.push_back({w.turn, CoopEventKind::Reject, m.from_id, id, {}, {}});
        }
      }
    }

    if (!cmd) continue;
    switch (cmd->kind) {
      case CoopKind::Request: {
        const Tank* to = w.find_tank(cmd->to_id);
        std::string why;
        if (topo == CoopTopology::None) why = "stage has no cooperation";
        else if (capability_gate && !self->coop_capable) why = "sender is not cooperation-capable";
        else if (!to || !to->is_agent()) why = "recipient is not an agent";
        else if (to->id == id) why = "cannot cooperate with self";
        else if (!to->alive()) why = "recipient is dead";
        else if (!topology_allows(topo, *self, *to)) why = "pair not allowed by topology";
        if (!why.empty()) {
          events.push_back({w.turn, CoopEventKind::Dropped, id, cmd->to_id, cmd->message, why});
          break;
        }
        w.coop_log.push_back({w.turn, id, cmd->to_id, cmd->message, Disposition::Pending});
        w.mailboxes[cmd->to_id].push_back(static_cast<int>(w.coop_log.size()) - 1);
        events.push_back({w.turn, CoopEventKind::Request, id, cmd->to_id, cmd->message, {}});
        break;
      }
      case CoopKind::Keep:
        for (auto& p : w.coop_pairs) {
          if (!p.involves(id)) continue;
          p.refreshed_turn = w.turn;
          events.push_back({w.turn, CoopEventKind::Keep, id, p.partner_of(id), {}, {}});
        }
        break;
      case CoopKind::Stop: {
        std::vector<CoopPair> kept;
        for (const auto& p : w.coop_pairs) {
          if (!p.involves(id)) {
            kept.push_back(p);
            continue;
          }
          const int partner = p.partner_of(id);
          for (auto& m : w.coop_log) {
            const bool between = (m.from_id == id && m.to_id == partner) || (m.from_id == partner && m.to_id == id);
            if (between && m.disposition == Disposition::Accepted) m.disposition = Disposition::Stopped;
          }
          events.push_back({w.turn, CoopEventKind::Stop, id, partner, {}, {}});
        }
        w.coop_pairs = std::move(kept);
        break;
      }
      case CoopKind::None: break;
    }
  }
  return events;
}

}  // namespace protocol
}  // namespace bab
