#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ws {

// The eleven gym workouts plus the background Null class. Null is a
// first-class label, not missing data.
enum class ActivityLabel {
  Adductor,
  Armcurl,
  Benchpress,
  Legcurl,
  Legpress,
  Riding,
  Ropeskipping,
  Running,
  Squat,
  Stairsclimber,
  Walking,
  Null,
};

inline constexpr int kNumActivities = 12;

inline constexpr std::array<ActivityLabel, kNumActivities> kAllActivities = {
    ActivityLabel::Adductor,     ActivityLabel::Armcurl,
    ActivityLabel::Benchpress,   ActivityLabel::Legcurl,
    ActivityLabel::Legpress,     ActivityLabel::Riding,
    ActivityLabel::Ropeskipping, ActivityLabel::Running,
    ActivityLabel::Squat,        ActivityLabel::Stairsclimber,
    ActivityLabel::Walking,      ActivityLabel::Null,
};

inline std::string_view label_name(ActivityLabel a) {
  switch (a) {
    case ActivityLabel::Adductor: return "Adductor";
    case ActivityLabel::Armcurl: return "Armcurl";
    case ActivityLabel::Benchpress: return "Benchpress";
    case ActivityLabel::Legcurl: return "Legcurl";
    case ActivityLabel::Legpress: return "Legpress";
    case ActivityLabel::Riding: return "Riding";
    case ActivityLabel::Ropeskipping: return "Ropeskipping";
    case ActivityLabel::Running: return "Running";
    case ActivityLabel::Squat: return "Squat";
    case ActivityLabel::Stairsclimber: return "Stairsclimber";
    case ActivityLabel::Walking: return "Walking";
    case ActivityLabel::Null: return "Null";
  }
  return "?";
}

// Accepts the twelve canonical tokens. The Squat ground-type variants used
// during collection fold into the single Squat class.
inline std::optional<ActivityLabel> parse_label(std::string_view s) {
  for (ActivityLabel a : kAllActivities) {
    if (s == label_name(a)) return a;
  }
  if (s == "Squat_concrete" || s == "Squat_wood" || s == "Squat_rubber") {
    return ActivityLabel::Squat;
  }
  return std::nullopt;
}

enum class Position { Wrist, Leg, Pocket };

inline constexpr std::array<Position, 3> kAllPositions = {
    Position::Wrist, Position::Leg, Position::Pocket};

inline std::string_view position_name(Position p) {
  switch (p) {
    case Position::Wrist: return "Wrist";
    case Position::Leg: return "Leg";
    case Position::Pocket: return "Pocket";
  }
  return "?";
}

inline std::string position_token(Position p) {
  std::string s(position_name(p));
  for (char& c : s) c = static_cast<char>(std::tolower(c));
  return s;
}

inline std::optional<Position> parse_position(std::string_view s) {
  for (Position p : kAllPositions) {
    if (s == position_name(p) || s == position_token(p)) return p;
  }
  return std::nullopt;
}

enum class ClothesMaterial { Cotton, Polyester };
enum class SoleHeight { M, S };
enum class SoleMaterial { PVC, Rubber };

inline std::string_view clothes_name(ClothesMaterial m) {
  return m == ClothesMaterial::Cotton ? "cotton" : "polyester";
}
inline std::string_view sole_height_name(SoleHeight h) {
  return h == SoleHeight::M ? "M" : "S";
}
inline std::string_view sole_material_name(SoleMaterial m) {
  return m == SoleMaterial::PVC ? "PVC" : "rubber";
}

inline std::optional<ClothesMaterial> parse_clothes(std::string_view s) {
  if (s == "cotton") return ClothesMaterial::Cotton;
  if (s == "polyester") return ClothesMaterial::Polyester;
  return std::nullopt;
}
inline std::optional<SoleHeight> parse_sole_height(std::string_view s) {
  if (s == "M") return SoleHeight::M;
  if (s == "S") return SoleHeight::S;
  return std::nullopt;
}
inline std::optional<SoleMaterial> parse_sole_material(std::string_view s) {
  if (s == "PVC") return SoleMaterial::PVC;
  if (s == "rubber") return SoleMaterial::Rubber;
  return std::nullopt;
}

// Per-day wearing configuration recorded with each session.
struct WearingConfig {
  ClothesMaterial clothes_material = ClothesMaterial::Cotton;
  SoleHeight sole_height = SoleHeight::M;
  SoleMaterial sole_material = SoleMaterial::PVC;
};

// The collection protocol varied wearing by day; day 3 polyester, day 4
// short sole, day 5 rubber sole, otherwise the default outfit.
inline WearingConfig wearing_for_day(int day) {
  WearingConfig w;
  const int d = ((day - 1) % 5) + 1;
  if (d == 3) w.clothes_material = ClothesMaterial::Polyester;
  if (d == 4) w.sole_height = SoleHeight::S;
  if (d == 5) w.sole_material = SoleMaterial::Rubber;
  return w;
}

}  // namespace ws
