#pragma once

// 8-bit frame and heatmap image files: binary PPM (P6), PGM (P5) and PNG.
// Intensities map to [0, 1] by division by 255.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "freqcons/binary_io.hpp"
#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"

namespace freqcons::io {

enum class ChannelMode { Rgb, Luma };

/// Interleaved 8-bit pixels, 1 or 3 channels.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::size_t pnm_number(const Bytes& bytes, std::size_t& pos, const std::string& context) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (value > (1u << 24)) throw FormatError(context + ": header number too large", start);
    ++pos;
  }
  if (pos == start) throw FormatError(context + ": expected a header number", start);
  return value;
}

inline Image8 decode_pnm(const Bytes& bytes, const std::string& context) {
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const std::size_t width = pnm_number(bytes, pos, context);
  const std::size_t height = pnm_number(bytes, pos, context);
  const std::size_t maxval = pnm_number(bytes, pos, context);
  if (width == 0 || height == 0) throw FormatError(context + ": zero image dimension", 2);
  if (maxval != 255) {
    throw FormatError(context + ": only 8-bit maxval 255 is supported, got " + std::to_string(maxval),
                      pos);
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError(context + ": missing whitespace after header", pos);
  }
  ++pos;
  const std::size_t need = width * height * channels;
  if (bytes.size() - pos < need) {
    throw FormatError(context + ": truncated pixel data, need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - pos),
                      pos);
  }
  Image8 img{width, height, channels, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

inline Image8 decode_png(const Bytes& bytes, const std::string& context) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(context + ": " + image.message, 0);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 img{image.width, image.height, color ? 3u : 1u, {}};
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw FormatError(context + ": " + message, 0);
  }
  return img;
}

}  // namespace detail

inline Image8 read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  const std::string context = path.string();
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
    return detail::decode_png(bytes, context);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
    return detail::decode_pnm(bytes, context);
  }
  throw FormatError(context + ": unrecognised image signature (expected PNG, P6 or P5)", 0);
}

inline Frame image_to_frame(const Image8& img, ChannelMode mode) {
  std::vector<FrameGrid> channels;
  for (std::size_t c = 0; c < img.channels; ++c) {
    FrameGrid g(img.height, img.width);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = std::clamp(img.pixels[i * img.channels + c] / 255.0, 0.0, 1.0);
    }
    channels.push_back(std::move(g));
  }
  Frame frame(std::move(channels));
  if (mode == ChannelMode::Luma && frame.channel_count() != 1) {
    return Frame(to_luma(frame));
  }
  return frame;
}

inline Frame load_frame(const std::filesystem::path& path, ChannelMode mode = ChannelMode::Rgb) {
  return image_to_frame(read_image(path), mode);
}

/// Quantises [0,1] values to 8 bits (round to nearest, clamped).
inline Image8 frame_to_image(const Frame& frame) {
  Image8 img{frame.cols(), frame.rows(), frame.channel_count(), {}};
  img.pixels.resize(img.width * img.height * img.channels);
  for (std::size_t c = 0; c < img.channels; ++c) {
    const auto& g = frame.channel(c);
    for (std::size_t i = 0; i < g.size(); ++i) {
      img.pixels[i * img.channels + c] =
          static_cast<std::uint8_t>(std::lround(std::clamp(g[i], 0.0, 1.0) * 255.0));
    }
  }
  return img;
}

inline Bytes encode_pnm(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw InvalidInput("PNM needs 1 or 3 channels");
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline Bytes encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw InvalidInput("PNG needs 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

/// Writes PNG for a ".png" extension, PNM (P5/P6) otherwise.
inline void write_image(const std::filesystem::path& path, const Image8& img) {
  if (path.extension() == ".png") {
    write_file(path, encode_png(img));
  } else {
    write_file(path, encode_pnm(img));
  }
}

inline void save_frame(const std::filesystem::path& path, const Frame& frame) {
  write_image(path, frame_to_image(frame));
}

}  // namespace freqcons::io
