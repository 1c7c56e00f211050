#include <algorithm>
#include <cmath>
#include <fstream>

#include "cli.hpp"
#include "dfx/csv.hpp"
#include "dfx/error.hpp"
#include "dfx/features.hpp"
#include "dfx/inpaint.hpp"
#include "dfx/random.hpp"

namespace dfx::cli {

namespace {

namespace fs = std::filesystem;

struct Ellipse {
  double cr, cc, rr, rc;
  double color[3];
};

bool inside(const Ellipse& e, std::size_t r, std::size_t c) {
  const double dr = (static_cast<double>(r) - e.cr) / e.rr;
  const double dc = (static_cast<double>(c) - e.cc) / e.rc;
  return dr * dr + dc * dc <= 1.0;
}

// Smooth background: a tilted plane plus a few soft blobs and mild noise.
Raster scene(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Raster img(rows, cols, 3);
  double base[3], tilt_r[3], tilt_c[3];
  for (int ch = 0; ch < 3; ++ch) {
    base[ch] = rng.uniform(40.0, 200.0);
    tilt_r[ch] = rng.uniform(-1.0, 1.0);
    tilt_c[ch] = rng.uniform(-1.0, 1.0);
  }
  struct Blob { double r, c, s, a[3]; };
  std::vector<Blob> blobs(3);
  for (auto& b : blobs) {
    b.r = rng.uniform(0.0, static_cast<double>(rows));
    b.c = rng.uniform(0.0, static_cast<double>(cols));
    b.s = rng.uniform(4.0, 12.0);
    for (double& a : b.a) a = rng.uniform(-40.0, 40.0);
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = base[ch] + tilt_r[ch] * static_cast<double>(r) +
                   tilt_c[ch] * static_cast<double>(c) + rng.uniform(-3.0, 3.0);
        for (const auto& b : blobs) {
          const double d2 = (r - b.r) * (r - b.r) + (c - b.c) * (c - b.c);
          v += b.a[ch] * std::exp(-d2 / (2.0 * b.s * b.s));
        }
        img.at(r, c, ch) = std::clamp(std::round(v), 0.0, 255.0);
      }
  return img;
}

std::vector<Ellipse> objects(std::size_t rows, std::size_t cols, std::size_t n, CounterRng& rng) {
  std::vector<Ellipse> out(n);
  for (auto& e : out) {
    e.rr = rng.uniform(2.5, std::max(3.0, static_cast<double>(rows) / 6.0));
    e.rc = rng.uniform(2.5, std::max(3.0, static_cast<double>(cols) / 6.0));
    e.cr = rng.uniform(e.rr, static_cast<double>(rows) - e.rr);
    e.cc = rng.uniform(e.rc, static_cast<double>(cols) - e.rc);
    for (double& v : e.color) v = std::round(rng.uniform(0.0, 255.0));
  }
  return out;
}

void paint(Raster& img, const std::vector<Ellipse>& shapes) {
  for (const auto& e : shapes)
    for (std::size_t r = 0; r < img.rows; ++r)
      for (std::size_t c = 0; c < img.cols; ++c)
        if (inside(e, r, c))
          for (std::size_t ch = 0; ch < img.channels; ++ch) img.at(r, c, ch) = e.color[ch];
}

std::string fixture_id(char prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i + 1);
  return buf;
}

}  // namespace

ImageRecord compute_features(const ImageId& id, ImageKind kind, const Raster& image,
                             const Mask* mask) {
  ImageRecord rec;
  rec.image_id = id;
  rec.kind = kind;
  rec.delentropy = delentropy(image);
  if (mask) {
    rec.mask_fraction = mask_fraction(*mask, image.rows, image.cols);
    rec.object_count = count_objects(*mask);
  }
  return rec;
}

FixtureSet generate_fixtures(const FixtureOptions& o, const fs::path& dir) {
  if (o.rows < 8 || o.cols < 8) fail(Errc::validation, "fixture images must be at least 8x8");
  if (o.manipulated == 0 || o.originals == 0)
    fail(Errc::validation, "fixtures need at least one manipulated and one original image");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  FixtureSet set;
  std::ofstream manifest(dir / "images.csv", std::ios::binary | std::ios::trunc);
  std::ofstream labels(dir / "labels.csv", std::ios::binary | std::ios::trunc);
  if (!manifest || !labels) fail(Errc::io, "cannot write fixture manifests in " + dir.string());
  manifest << "image_id,kind,path,mask\n";
  labels << "image_id,subjective_quality,has_person\n";

  auto emit = [&](const std::string& id, ImageKind kind, std::size_t index) {
    CounterRng rng(derive_key(o.seed, fnv1a64(id), index));
    Raster img = scene(o.rows, o.cols, rng);
    const auto shapes = objects(o.rows, o.cols, 1 + rng.below(4), rng);
    paint(img, shapes);

    const std::string rel = "images/" + id + ".png";
    std::string mask_rel;
    std::optional<Mask> mask;
    if (kind == ImageKind::manipulated) {
      const std::size_t removed = 1 + rng.below(std::min<std::size_t>(3, shapes.size()));
      Mask m(o.rows, o.cols, 0);
      for (std::size_t k = 0; k < removed; ++k)
        for (std::size_t r = 0; r < o.rows; ++r)
          for (std::size_t c = 0; c < o.cols; ++c)
            if (inside(shapes[k], r, c)) m(r, c) = 1;
      FillTask task{img, m, 1e-3, 200000};
      img = remove_object(task).image;
      mask_rel = "masks/" + id + ".png";
      write_mask(dir / mask_rel, m);
      mask = std::move(m);
    }
    // Reload so features describe exactly the stored (quantized) pixels.
    write_image(dir / rel, img);
    const Raster stored = read_image(dir / rel);
    auto rec = compute_features(ImageId(id), kind, stored, mask ? &*mask : nullptr);
    rec.pixels_ref = rel;
    if (!mask_rel.empty()) rec.mask_ref = mask_rel;
    rec.has_person = rng.bernoulli(0.3);
    const auto q = rng.below(3);  // high, low, unrated
    if (q < 2) rec.subjective_quality = q == 0 ? Quality::high : Quality::low;

    manifest << id << ',' << to_string(kind) << ',' << rel << ',' << mask_rel << '\n';
    labels << id << ',' << (rec.subjective_quality ? to_string(*rec.subjective_quality) : "")
           << ',' << (rec.has_person ? "true" : "false") << '\n';
    PoolEntry entry{ImageId(id), kind, rel};
    (kind == ImageKind::control_original ? set.originals : set.manipulated).push_back(entry);
    set.features.emplace(rec.image_id, std::move(rec));
  };

  for (std::size_t i = 0; i < o.manipulated; ++i) emit(fixture_id('m', i), ImageKind::manipulated, i);
  for (std::size_t i = 0; i < o.untouched; ++i)
    emit(fixture_id('u', i), ImageKind::control_untouched, i);
  for (std::size_t i = 0; i < o.originals; ++i)
    emit(fixture_id('o', i), ImageKind::control_original, i);

  manifest.close();
  labels.close();
  write_manifest(dir / "manipulated.csv", set.manipulated);
  write_manifest(dir / "originals.csv", set.originals);
  write_feature_table(dir / "features.csv", set.features);
  return set;
}

FeatureTable features_from_manifest(const fs::path& manifest,
                                    const std::optional<fs::path>& labels) {
  const auto base = manifest.parent_path();
  const auto t = csv::read(manifest);
  const auto c_id = t.require("image_id");
  const auto c_kind = t.require("kind");
  const auto c_path = t.require("path");
  const auto c_mask = t.column("mask");

  FeatureTable table;
  for (const auto& row : t.rows) {
    const ImageId id(row[c_id]);
    const auto kind = parse_image_kind(row[c_kind]);
    const Raster img = read_image(base / row[c_path]);
    std::optional<Mask> mask;
    if (c_mask && !row[*c_mask].empty()) mask = read_mask(base / row[*c_mask]);
    if (kind == ImageKind::manipulated && !mask)
      fail(Errc::validation, "manipulated image " + id.str() + " has no mask");
    auto rec = compute_features(id, kind, img, mask ? &*mask : nullptr);
    rec.pixels_ref = row[c_path];
    if (mask) rec.mask_ref = row[*c_mask];
    if (!table.emplace(id, std::move(rec)).second)
      fail(Errc::duplicate, "image " + id.str() + " listed twice in " + manifest.string());
  }

  if (labels) {
    const auto l = csv::read(*labels);
    const auto l_id = l.require("image_id");
    const auto l_q = l.column("subjective_quality");
    const auto l_p = l.column("has_person");
    for (const auto& row : l.rows) {
      auto it = table.find(ImageId(row[l_id]));
      if (it == table.end())
        fail(Errc::integrity, "label for unknown image " + row[l_id] + " in " + labels->string());
      if (l_q && !row[*l_q].empty()) it->second.subjective_quality = parse_quality(row[*l_q]);
      if (l_p && !row[*l_p].empty())
        it->second.has_person = csv::parse_bool(row[*l_p], "has_person");
    }
  }
  for (const auto& [id, rec] : table) validate(rec, false);
  return table;
}

std::vector<PoolEntry> read_pool(const fs::path& manifest, ImageKind default_kind) {
  auto entries = read_manifest(manifest, default_kind);
  for (auto& e : entries)
    if (!e.path.empty() && fs::path(e.path).is_relative())
      e.path = (manifest.parent_path() / e.path).string();
  return entries;
}

}  // namespace dfx::cli
