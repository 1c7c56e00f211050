#include "dfx/feature_table.hpp"

#include <fstream>
#include <sstream>

#include "dfx/csv.hpp"
#include "dfx/error.hpp"

namespace dfx {

FeatureTable parse_feature_table(std::string_view text, std::string_view source) {
  const auto t = csv::parse(text, source);
  const auto c_id = t.require("image_id"), c_kind = t.require("kind"),
             c_q = t.require("subjective_quality"), c_person = t.require("has_person"),
             c_obj = t.require("object_count"), c_mask = t.require("mask_fraction"),
             c_ent = t.require("delentropy");
  FeatureTable out;
  for (const auto& row : t.rows) {
    ImageRecord rec;
    rec.image_id = ImageId(row[c_id]);
    rec.kind = parse_image_kind(row[c_kind]);
    if (!row[c_q].empty()) rec.subjective_quality = parse_quality(row[c_q]);
    rec.has_person = csv::parse_bool(row[c_person], "has_person");
    const auto objects = csv::parse_int(row[c_obj], "object_count");
    if (objects < 0) fail(Errc::validation, "negative object_count for " + row[c_id]);
    rec.object_count = static_cast<std::uint32_t>(objects);
    rec.mask_fraction = csv::parse_double(row[c_mask], "mask_fraction");
    rec.delentropy = csv::parse_double(row[c_ent], "delentropy");
    validate(rec, /*require_mask_ref=*/false);
    if (!out.emplace(rec.image_id, rec).second)
      fail(Errc::duplicate, "feature table lists " + row[c_id] + " twice");
  }
  return out;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open feature table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_feature_table(buf.str(), path.string());
}

std::string format_feature_table(const FeatureTable& table) {
  std::string out(kFeatureTableHeader);
  out += '\n';
  for (const auto& [id, rec] : table) {
    out += id.str();
    out += ',';
    out += to_string(rec.kind);
    out += ',';
    if (rec.subjective_quality) out += to_string(*rec.subjective_quality);
    out += ',';
    out += rec.has_person ? "1" : "0";
    out += ',';
    out += std::to_string(rec.object_count);
    out += ',';
    out += csv::format(rec.mask_fraction);
    out += ',';
    out += csv::format(rec.delentropy);
    out += '\n';
  }
  return out;
}

void write_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << format_feature_table(table);
}

}  // namespace dfx
