#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace iconann {

/// The 29 icon classes, ordered by frequency in the reference dataset, plus the
/// OTHER sentinel that only the crop classifier predicts.
enum class IconClass : int {
  kStar = 0,
  kArrowBackward,
  kArrowForward,
  kMore,
  kMenu,
  kSearch,
  kClose,
  kAdd,
  kExpandMore,
  kPlay,
  kCheck,
  kShare,
  kChat,
  kSettings,
  kInfo,
  kHome,
  kRefresh,
  kTime,
  kEmoji,
  kEdit,
  kNotifications,
  kCall,
  kPause,
  kSend,
  kDelete,
  kVideoCam,
  kLaunch,
  kEndCall,
  kTakePhoto,
  kOther,
};

inline constexpr std::size_t kNumIconClasses = 29;
/// Icon classes plus OTHER.
inline constexpr std::size_t kNumClassifierLabels = kNumIconClasses + 1;

inline constexpr std::array<std::string_view, kNumClassifierLabels> kIconClassNames = {
    "star",     "arrow backward", "arrow forward", "more",      "menu",          "search",
    "close",    "add",            "expand more",   "play",      "check",         "share",
    "chat",     "settings",       "info",          "home",      "refresh",       "time",
    "emoji",    "edit",           "notifications", "call",      "pause",         "send",
    "delete",   "video cam",      "launch",        "end call",  "take photo",    "OTHER",
};

constexpr int index_of(IconClass c) { return static_cast<int>(c); }
constexpr bool is_icon(IconClass c) { return c != IconClass::kOther; }

inline IconClass icon_class_at(std::size_t index) { return static_cast<IconClass>(index); }

std::string_view name_of(IconClass c);

/// Exact-name lookup, including "OTHER".
std::optional<IconClass> parse_icon_class(std::string_view name);

/// Same as parse_icon_class but throws std::invalid_argument on unknown names.
IconClass icon_class_from_name(std::string_view name);

}  // namespace iconann
