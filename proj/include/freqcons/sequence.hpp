#pragma once

// Frame-directory ingestion. Frames are ordered by the last run of digits in
// the file stem ("frame_0012.png" -> 12); two files with the same number are
// an error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freqcons/errors.hpp"
#include "freqcons/image_io.hpp"
#include "freqcons/tfc.hpp"

namespace freqcons {

/// '*' matches any run of characters, '?' exactly one.
inline bool glob_match(std::string_view pattern, std::string_view name) {
  std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

/// Value of the last digit run in `stem`, or nullopt when there is none.
inline std::optional<std::uint64_t> numeric_key(const std::string& stem) {
  std::size_t end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
  if (end == 0) return std::nullopt;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  const std::string digits = stem.substr(begin, end - begin);
  if (digits.size() > 18) return std::nullopt;
  return std::stoull(digits);
}

struct KeyedFile {
  std::uint64_t key = 0;
  std::filesystem::path path;
};

/// Regular files in `dir` whose name matches `pattern` and whose extension is
/// in `extensions`, sorted by numeric key.
inline std::vector<KeyedFile> list_numbered_files(const std::filesystem::path& dir, const std::string& pattern,
                                                  const std::vector<std::string>& extensions) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError("'" + dir.string() + "' is not a readable directory");
  }
  std::map<std::uint64_t, std::filesystem::path> by_key;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& path = entry.path();
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) continue;
    if (!glob_match(pattern, path.filename().string())) continue;
    const auto key = numeric_key(path.stem().string());
    if (!key) {
      throw InvalidInput("'" + path.filename().string() + "' has no frame number in its name");
    }
    const auto [it, inserted] = by_key.emplace(*key, path);
    if (!inserted) {
      const auto [a, b] = std::minmax(it->second.filename().string(), path.filename().string());
      throw InvalidInput("'" + a + "' and '" + b + "' share frame number " + std::to_string(*key));
    }
  }
  std::vector<KeyedFile> out;
  for (auto& [k, p] : by_key) out.push_back({k, p});
  return out;
}

inline const std::vector<std::string>& image_extensions() {
  static const std::vector<std::string> exts{".png", ".pgm", ".ppm", ".pnm"};
  return exts;
}

struct SequenceSpec {
  std::filesystem::path directory;
  std::string pattern = "*";
  io::ChannelMode mode = io::ChannelMode::Rgb;
  // Inclusive range of frame numbers; unset ends are open.
  std::optional<std::uint64_t> first{};
  std::optional<std::uint64_t> last{};
};

struct LoadedSequence {
  VideoSequence video;
  std::vector<KeyedFile> files;
  std::string id;  // directory name, never a full path
};

inline LoadedSequence load_sequence(const SequenceSpec& spec) {
  auto files = list_numbered_files(spec.directory, spec.pattern, image_extensions());
  std::erase_if(files, [&](const KeyedFile& f) {
    return (spec.first && f.key < *spec.first) || (spec.last && f.key > *spec.last);
  });
  if (files.empty()) {
    throw InvalidInput("no frames found in '" + spec.directory.filename().string() + "'");
  }
  if (files.size() < 2) {
    throw InvalidInput("'" + spec.directory.filename().string() + "' holds 1 frame, at least 2 are needed");
  }
  std::vector<Frame> frames;
  for (const auto& f : files) {
    Frame frame = io::load_frame(f.path, spec.mode);
    if (!frames.empty() && !frame.same_shape(frames.front())) {
      throw InvalidInput("'" + f.path.filename().string() + "' is " + std::to_string(frame.channel_count()) + "x" +
                         std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()) + ", earlier frames are " +
                         std::to_string(frames.front().channel_count()) + "x" +
                         std::to_string(frames.front().rows()) + "x" + std::to_string(frames.front().cols()));
    }
    frames.push_back(std::move(frame));
  }
  std::string id = std::filesystem::absolute(spec.directory).lexically_normal().filename().string();
  if (id.empty()) id = std::filesystem::absolute(spec.directory).lexically_normal().parent_path().filename().string();
  return {VideoSequence(std::move(frames)), std::move(files), std::move(id)};
}

}  // namespace freqcons
