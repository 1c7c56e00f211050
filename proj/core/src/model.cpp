#include "dfx/model.hpp"

#include <algorithm>
#include <string>

#include "dfx/error.hpp"

namespace dfx {

std::string_view to_string(ImageKind v) noexcept {
  switch (v) {
    case ImageKind::manipulated: return "manipulated";
    case ImageKind::control_original: return "control_original";
    case ImageKind::control_untouched: return "control_untouched";
  }
  return "";
}

std::string_view to_string(Quality v) noexcept {
  return v == Quality::high ? "high" : "low";
}

std::string_view to_string(DeviceClass v) noexcept {
  switch (v) {
    case DeviceClass::mobile: return "mobile";
    case DeviceClass::desktop: return "desktop";
    case DeviceClass::unknown: return "unknown";
  }
  return "";
}

std::string_view to_string(Placement v) noexcept {
  return v == Placement::manipulated_left ? "manipulated_left"
                                          : "manipulated_right";
}

std::string_view to_string(Side v) noexcept {
  return v == Side::left ? "left" : "right";
}

namespace {

[[noreturn]] void bad_token(std::string_view what, std::string_view s) {
  fail(Errc::parse, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

ImageKind parse_image_kind(std::string_view s) {
  if (s == "manipulated") return ImageKind::manipulated;
  if (s == "control_original") return ImageKind::control_original;
  if (s == "control_untouched") return ImageKind::control_untouched;
  bad_token("image kind", s);
}

Quality parse_quality(std::string_view s) {
  if (s == "high") return Quality::high;
  if (s == "low") return Quality::low;
  bad_token("quality", s);
}

DeviceClass parse_device_class(std::string_view s) {
  if (s == "mobile") return DeviceClass::mobile;
  if (s == "desktop") return DeviceClass::desktop;
  if (s == "unknown") return DeviceClass::unknown;
  bad_token("device class", s);
}

Placement parse_placement(std::string_view s) {
  if (s == "manipulated_left") return Placement::manipulated_left;
  if (s == "manipulated_right") return Placement::manipulated_right;
  bad_token("placement", s);
}

Side parse_side(std::string_view s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  bad_token("side", s);
}

void validate(const ImageRecord& image, bool require_mask_ref) {
  const auto& id = image.image_id.str();
  if (image.image_id.empty()) fail(Errc::validation, "image with empty id");
  if (!(image.mask_fraction >= 0.0 && image.mask_fraction <= 1.0))
    fail(Errc::validation, "image " + id + ": mask_fraction outside [0,1]");
  if (!(image.delentropy >= 0.0))
    fail(Errc::validation, "image " + id + ": negative delentropy");
  switch (image.kind) {
    case ImageKind::manipulated:
      if (require_mask_ref && !image.mask_ref)
        fail(Errc::validation, "manipulated image " + id + " has no mask");
      if (!(image.mask_fraction > 0.0))
        fail(Errc::validation, "manipulated image " + id + " has empty mask");
      break;
    case ImageKind::control_untouched:
      if (image.mask_fraction != 0.0)
        fail(Errc::validation,
             "control_untouched image " + id + " has nonzero mask_fraction");
      break;
    case ImageKind::control_original:
      break;
  }
}

bool is_known_moderator(std::string_view name) noexcept {
  return std::find(std::begin(kModerators), std::end(kModerators), name) !=
         std::end(kModerators);
}

std::optional<double> ObservationRow::moderator(std::string_view name) const {
  auto it = moderators.find(name);
  if (it == moderators.end()) return std::nullopt;
  return it->second;
}

}  // namespace dfx
