#pragma once

// Shared domain types for the Detect Fakes experiment: images, sessions,
// trials, guesses, and the regression rows assembled from them.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace dfx {

/// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

/// Opaque identifier, distinct per tag so ids of different entities cannot be
/// mixed up.
template <typename Tag>
struct StrongId {
  std::string value;

  StrongId() = default;
  explicit StrongId(std::string v) : value(std::move(v)) {}

  bool empty() const noexcept { return value.empty(); }
  const std::string& str() const noexcept { return value; }

  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;
};

using ImageId = StrongId<struct ImageIdTag>;
using SessionId = StrongId<struct SessionIdTag>;
using TrialId = StrongId<struct TrialIdTag>;

enum class ImageKind { manipulated, control_original, control_untouched };
enum class Quality { high, low };
enum class DeviceClass { mobile, desktop, unknown };
enum class Placement { manipulated_left, manipulated_right };
enum class Side { left, right };

std::string_view to_string(ImageKind v) noexcept;
std::string_view to_string(Quality v) noexcept;
std::string_view to_string(DeviceClass v) noexcept;
std::string_view to_string(Placement v) noexcept;
std::string_view to_string(Side v) noexcept;

// Parsers throw Error{Errc::parse} on unknown tokens.
ImageKind parse_image_kind(std::string_view s);
Quality parse_quality(std::string_view s);
DeviceClass parse_device_class(std::string_view s);
Placement parse_placement(std::string_view s);
Side parse_side(std::string_view s);

/// Side of the screen holding the designated (manipulated) image.
constexpr Side manipulated_side(Placement p) noexcept {
  return p == Placement::manipulated_left ? Side::left : Side::right;
}

struct ImageRecord {
  ImageId image_id;
  ImageKind kind = ImageKind::manipulated;
  std::string pixels_ref;
  std::optional<std::string> mask_ref;
  std::optional<Quality> subjective_quality;
  bool has_person = false;
  std::uint32_t object_count = 0;
  double mask_fraction = 0.0;
  double delentropy = 0.0;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Throws Errc::validation if the record breaks a kind/feature invariant.
/// `require_mask_ref` is false for feature-table rows, which carry no paths.
void validate(const ImageRecord& image, bool require_mask_ref = true);

struct Session {
  SessionId session_id;
  DeviceClass device_class = DeviceClass::unknown;
  std::uint32_t trials_served = 0;
  TimestampMs created_at = 0;

  friend bool operator==(const Session&, const Session&) = default;
};

struct TrialRecord {
  TrialId trial_id;
  SessionId session_id;
  ImageId manipulated_image_id;
  ImageId control_image_id;
  Placement placement = Placement::manipulated_left;
  std::uint32_t position = 1;
  TimestampMs served_at = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct GuessRecord {
  TrialId trial_id;
  Side chosen_side = Side::left;
  bool correct = false;
  std::int64_t elapsed_ms = 0;
  TimestampMs recorded_at = 0;

  friend bool operator==(const GuessRecord&, const GuessRecord&) = default;
};

/// Marks a served trial that was superseded before being answered. Abandoned
/// trials do not count toward a session's position sequence.
struct AbandonRecord {
  TrialId trial_id;
  TimestampMs recorded_at = 0;

  friend bool operator==(const AbandonRecord&, const AbandonRecord&) = default;
};

using LogRecord = std::variant<Session, TrialRecord, GuessRecord, AbandonRecord>;

/// Moderator names in the order the interaction table lists them.
inline constexpr std::string_view kModerators[] = {
    "subjective_quality_high", "low_accuracy_image", "small_mask",
    "low_entropy",             "one_object",         "first_correct",
    "has_person",              "fast_completion",    "mobile",
    "right_placement",
};

bool is_known_moderator(std::string_view name) noexcept;

/// One regression row. A moderator mapped to nullopt is missing for this row
/// and excludes it from specifications that use that moderator.
struct ObservationRow {
  int accuracy = 0;
  std::uint32_t position = 1;
  std::string participant_key;
  std::string image_key;
  std::map<std::string, std::optional<double>, std::less<>> moderators;
  bool repeat_view = false;
  bool control_untouched = false;

  std::optional<double> moderator(std::string_view name) const;

  friend bool operator==(const ObservationRow&, const ObservationRow&) = default;
};

}  // namespace dfx

template <typename Tag>
struct std::hash<dfx::StrongId<Tag>> {
  std::size_t operator()(const dfx::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
