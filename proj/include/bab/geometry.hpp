#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string_view>

namespace bab {

inline constexpr int kMapSize = 512;
inline constexpr int kCellSize = 8;                     // wall granularity
inline constexpr int kGridCells = kMapSize / kCellSize;  // 64 per axis
inline constexpr int kTankSize = 32;
inline constexpr int kBaseSize = 32;
inline constexpr int kMoveStep = 32;
inline constexpr int kBlockCells = kMapSize / kMoveStep;  // 16 spawn blocks per axis

// Top-left corner of an entity footprint, in pixels.
struct Position {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const Position&, const Position&) = default;
};

inline int l1_distance(Position a, Position b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

enum class Orientation : std::uint8_t { Up, Down, Left, Right };

inline constexpr Orientation kAllOrientations[] = {
    Orientation::Up, Orientation::Down, Orientation::Left, Orientation::Right};

inline Position step_of(Orientation o) {
  switch (o) {
    case Orientation::Up: return {0, -1};
    case Orientation::Down: return {0, 1};
    case Orientation::Left: return {-1, 0};
    case Orientation::Right: return {1, 0};
  }
  return {0, 0};
}

inline Position translated(Position p, Orientation o, int distance) {
  const Position d = step_of(o);
  return {p.x + d.x * distance, p.y + d.y * distance};
}

inline std::string_view orientation_name(Orientation o) {
  switch (o) {
    case Orientation::Up: return "Up";
    case Orientation::Down: return "Down";
    case Orientation::Left: return "Left";
    case Orientation::Right: return "Right";
  }
  return "?";
}

inline std::optional<Orientation> orientation_from_name(std::string_view s) {
  for (Orientation o : kAllOrientations) {
    if (orientation_name(o) == s) return o;
  }
  return std::nullopt;
}

// Half-open pixel rectangle [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  static Rect footprint(Position p, int size) { return {p.x, p.y, size, size}; }

  int right() const { return x + w; }
  int bottom() const { return y + h; }

  bool intersects(const Rect& o) const {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  bool inside_map() const {
    return x >= 0 && y >= 0 && right() <= kMapSize && bottom() <= kMapSize;
  }
};

inline bool on_grid(Position p) { return p.x % kCellSize == 0 && p.y % kCellSize == 0; }

}  // namespace bab
