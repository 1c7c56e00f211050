#pragma once

// Joins the experiment log with the feature table into regression rows.
//
// Moderator coding (1 = trait present, 0 = comparison group, missing = row
// sits in neither group):
//   subjective_quality_high  rated high / rated low / unrated
//   low_accuracy_image       image mean accuracy in the bottom / top quartile
//   small_mask               mask_fraction in the bottom / top quartile
//   low_entropy              delentropy in the bottom / top quartile
//   one_object               one / several objects removed
//   first_correct            participant's first guess correct / wrong
//   has_person               image contains a person
//   fast_completion          time over the first ten guesses in the bottom /
//                            top quartile of participants with >= 10 guesses
//   mobile                   device class mobile / desktop
//   right_placement          manipulated image on the right / left
// Quartiles are taken over the manipulated images (or participants) that
// appear in the log. Control-untouched rows carry missing image moderators.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dfx/feature_table.hpp"
#include "dfx/log.hpp"
#include "dfx/model.hpp"

namespace dfx {

struct BuildOptions {
  bool include_control_untouched = true;
};

/// Rows come out sorted by (participant_key, position). Throws Errc::integrity
/// for guesses whose trial, session or designated image is unknown.
std::vector<ObservationRow> build_observations(const LogState& log,
                                               const FeatureTable& features,
                                               const BuildOptions& options = {});

std::string format_observations(const std::vector<ObservationRow>& rows);
std::vector<ObservationRow> parse_observations(std::string_view text,
                                               std::string_view source = "<memory>");
void write_observations(const std::filesystem::path& path,
                        const std::vector<ObservationRow>& rows);
std::vector<ObservationRow> read_observations(const std::filesystem::path& path);

}  // namespace dfx
