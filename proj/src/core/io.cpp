#include "lgnh/core/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace lgnh::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open " + path.string());
  return f;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // interleaved
};

DecodedPng decode_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, 8, file.get()) != 8 || png_sig_cmp(sig.data(), 0, 8) != 0) {
    throw InputError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("libpng init failed");
  }
  DecodedPng out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (int r = 0; r < out.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    std::memcpy(out.samples.data(), buffer.data(), n * 2);
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

void encode_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
                const std::vector<std::uint16_t>& samples) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InputError("libpng init failed");
  }
  const int bytes = bit_depth / 8;
  std::vector<unsigned char> buffer(static_cast<std::size_t>(width) * height * channels * bytes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<unsigned char>(samples[i] >> 8);  // PNG is big-endian
      buffer[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xFF);
    } else {
      buffer[i] = static_cast<unsigned char>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes;
  for (int r = 0; r < height; ++r) rows[r] = buffer.data() + r * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("PNG write failed: " + path.string());
  }
  png_init_io(png, file.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw InputError("truncated heatmap file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

RgbTile read_rgb_png(const std::filesystem::path& path) {
  const auto png = decode_png(path);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  RgbTile tile(png.width, png.height);
  const bool gray = png.channels <= 2;
  for (std::size_t p = 0; p < tile.pixel_count(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      const std::size_t src = p * png.channels + (gray ? 0 : ch);
      tile[p * 3 + ch] = png.samples[src] / scale;
    }
  }
  return tile;
}

void write_rgb_png(const std::filesystem::path& path, const RgbTile& tile) {
  std::vector<std::uint16_t> samples(tile.values().size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(tile[i], 0.0, 1.0) * 255.0));
  }
  encode_png(path, tile.width(), tile.height(), 3, 8, samples);
}

InstanceMask read_mask_png(const std::filesystem::path& path) {
  const auto png = decode_png(path);
  if (png.channels != 1) throw InputError("mask PNG must be single-channel: " + path.string());
  InstanceMask mask(png.width, png.height);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) mask[i] = png.samples[i];
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const InstanceMask& mask) {
  std::vector<std::uint16_t> samples(mask.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (mask[i] < 0 || mask[i] > 65535) throw InputError("label does not fit in 16 bits");
    samples[i] = static_cast<std::uint16_t>(mask[i]);
  }
  encode_png(path, mask.width(), mask.height(), 1, 16, samples);
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& heatmap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string());
  out.write("LGNH", 4);
  put_u32(out, static_cast<std::uint32_t>(heatmap.width()));
  put_u32(out, static_cast<std::uint32_t>(heatmap.height()));
  put_u32(out, 0);
  for (double v : heatmap.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Heatmap read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::memcmp(magic.data(), "LGNH", 4) != 0) throw InputError("bad heatmap magic");
  const auto w = get_u32(in);
  const auto h = get_u32(in);
  (void)get_u32(in);
  Heatmap hm(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < hm.pixel_count(); ++i) hm[i] = std::bit_cast<float>(get_u32(in));
  return hm;
}

void write_heatmap_preview(const std::filesystem::path& path, const Heatmap& heatmap) {
  std::vector<std::uint16_t> samples(heatmap.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(255.0 * std::clamp(heatmap[i], 0.0, 1.0)));
  }
  encode_png(path, heatmap.width(), heatmap.height(), 1, 8, samples);
}

}  // namespace lgnh::io
