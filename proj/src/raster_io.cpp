#include "calfront/raster_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "calfront/errors.hpp"

namespace calfront {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  return f;
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void write_png(const std::filesystem::path& path, int height, int width, int color_type,
               const std::vector<png_bytep>& rows) {
  ensure_parent(path);
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed header fields only, so identical rasters give identical bytes.
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Returns rows as 8-bit samples with the requested channel count.
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int channels, int& height, int& width) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("'" + path.string() + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed reading PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_rgb = (color & PNG_COLOR_MASK_COLOR) != 0;
  if (channels == 1 && is_rgb) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (channels == 3 && !is_rgb) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width * channels)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG layout in '" + path.string() + "'");
  }
  pixels.resize(rowbytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[static_cast<std::size_t>(r)] = pixels.data() + rowbytes * static_cast<std::size_t>(r);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Grid<double>& raster) {
  ensure_parent(path);
  std::ostringstream out(std::ios::binary);
  // Negative scale marks little endian; rows are stored bottom-to-top.
  out << "Pf\n" << raster.width() << " " << raster.height() << "\n-1.0\n";
  for (int r = raster.height() - 1; r >= 0; --r) {
    for (int c = 0; c < raster.width(); ++c) {
      float v = static_cast<float>(raster(r, c));
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  write_file_atomic(path, out.str());
}

Grid<double> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (magic != "Pf" || width <= 0 || height <= 0 || scale == 0.0 || !in)
    throw DataError("'" + path.string() + "' is not a single-channel PFM file");
  const bool little = scale < 0.0;
  Grid<double> raster(height, width);
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      std::uint32_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) throw DataError("truncated PFM '" + path.string() + "'");
      const bool swap = little != (std::endian::native == std::endian::little);
      if (swap) bits = __builtin_bswap32(bits);
      raster(r, c) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return raster;
}

void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& raster) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height()));
  auto* base = const_cast<std::uint8_t*>(raster.values().data());
  for (int r = 0; r < raster.height(); ++r) rows[static_cast<std::size_t>(r)] = base + static_cast<std::size_t>(r) * raster.width();
  write_png(path, raster.height(), raster.width(), PNG_COLOR_TYPE_GRAY, rows);
}

Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  auto pixels = read_png(path, 1, h, w);
  Grid<std::uint8_t> raster(h, w);
  std::memcpy(raster.values().data(), pixels.data(), pixels.size());
  return raster;
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  static_assert(sizeof(Rgb) == 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  auto* base = reinterpret_cast<std::uint8_t*>(const_cast<Rgb*>(image.values().data()));
  for (int r = 0; r < image.height(); ++r) rows[static_cast<std::size_t>(r)] = base + static_cast<std::size_t>(r) * image.width() * 3;
  write_png(path, image.height(), image.width(), PNG_COLOR_TYPE_RGB, rows);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  auto pixels = read_png(path, 3, h, w);
  RgbImage image(h, w);
  std::memcpy(image.values().data(), pixels.data(), pixels.size());
  return image;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  ensure_parent(path);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace calfront
