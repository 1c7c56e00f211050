#include "dfx/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "dfx/error.hpp"

namespace dfx {

GrayImage luminance(const Raster& image) {
  GrayImage out(image.rows, image.cols);
  for (std::size_t r = 0; r < image.rows; ++r) {
    for (std::size_t c = 0; c < image.cols; ++c) {
      if (image.channels >= 3) {
        out(r, c) = 0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) +
                    0.114 * image.at(r, c, 2);
      } else {
        out(r, c) = image.at(r, c, 0);
      }
    }
  }
  return out;
}

Raster to_raster(const GrayImage& image) {
  Raster out(image.rows(), image.cols(), 1);
  std::copy(image.data().begin(), image.data().end(), out.data.begin());
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Raster read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(Errc::io, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::io, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::io, "libpng init failed");
  }
  Raster out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::io, "corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const auto channels = png_get_channels(png, info);
  const auto stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out = Raster(height, width, channels);
  for (png_uint_32 r = 0; r < height; ++r)
    for (png_uint_32 c = 0; c < width; ++c)
      for (unsigned ch = 0; ch < channels; ++ch)
        out.at(r, c, ch) = rows[r][c * channels + ch];
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  if (image.channels != 1 && image.channels != 3)
    fail(Errc::dimension, "PNG output supports 1 or 3 channels");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(Errc::io, "cannot create " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(Errc::io, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::io, "libpng init failed");
  }
  std::vector<png_byte> buffer(image.data.size());
  std::transform(image.data.begin(), image.data.end(), buffer.begin(), [](double v) {
    return static_cast<png_byte>(std::clamp(std::lround(v), 0L, 255L));
  });
  std::vector<png_bytep> rows(image.rows);
  for (std::size_t r = 0; r < image.rows; ++r)
    rows[r] = buffer.data() + r * image.cols * image.channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::io, "PNG encode failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols),
               static_cast<png_uint_32>(image.rows), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Netpbm header tokens may be separated by whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

Raster read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  const auto magic = next_token(in);
  std::size_t channels = 0;
  bool binary = false;
  if (magic == "P2") channels = 1;
  else if (magic == "P5") channels = 1, binary = true;
  else if (magic == "P3") channels = 3;
  else if (magic == "P6") channels = 3, binary = true;
  else fail(Errc::io, "unsupported image format in " + path.string());
  const auto cols = std::stoul(next_token(in));
  const auto rows = std::stoul(next_token(in));
  const auto maxval = std::stoul(next_token(in));
  if (maxval == 0 || maxval > 255) fail(Errc::io, "only 8-bit PNM supported: " + path.string());
  Raster out(rows, cols, channels);
  if (binary) {
    in.get();
    std::vector<unsigned char> buf(out.data.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      fail(Errc::io, "truncated image " + path.string());
    for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] * 255.0 / maxval;
  } else {
    for (auto& v : out.data) {
      unsigned long x = 0;
      if (!(in >> x)) fail(Errc::io, "truncated image " + path.string());
      v = x * 255.0 / maxval;
    }
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Raster& image) {
  if (image.channels != 1 && image.channels != 3)
    fail(Errc::dimension, "PNM output supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot create " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.cols << ' ' << image.rows << "\n255\n";
  for (double v : image.data)
    out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L))));
}

}  // namespace

Raster read_image(const std::filesystem::path& path) {
  if (has_png_signature(path)) return read_png(path);
  return read_pnm(path);
}

Mask read_mask(const std::filesystem::path& path) {
  const auto raster = read_image(path);
  Mask mask(raster.rows, raster.cols);
  for (std::size_t r = 0; r < raster.rows; ++r)
    for (std::size_t c = 0; c < raster.cols; ++c) {
      bool set = false;
      for (std::size_t ch = 0; ch < raster.channels; ++ch) set |= raster.at(r, c, ch) != 0.0;
      mask(r, c) = set ? 1 : 0;
    }
  return mask;
}

void write_image(const std::filesystem::path& path, const Raster& image) {
  const auto ext = lower_extension(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".pgm" || ext == ".ppm") return write_pnm(path, image);
  fail(Errc::io, "unsupported output format " + path.string());
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  Raster r(mask.rows(), mask.cols(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) r.data[i] = mask.data()[i] ? 255.0 : 0.0;
  write_image(path, r);
}

}  // namespace dfx
