#pragma once

// Subcommand implementations behind the freqcons executable. Each command
// writes its artefacts into an output directory and returns the JSON
// document it wrote. Reports never contain absolute paths, and the config
// hash covers every option that can change an output (not the thread count),
// so reruns are byte-identical.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqcons/binary_io.hpp"
#include "freqcons/ffc.hpp"
#include "freqcons/image_io.hpp"
#include "freqcons/metrics.hpp"
#include "freqcons/sequence.hpp"
#include "freqcons/tfc.hpp"
#include "freqcons/wtfr.hpp"

#ifndef FREQCONS_VERSION
#define FREQCONS_VERSION "0.0.0"
#endif

namespace freqcons::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = FREQCONS_VERSION;

/// 64-bit FNV-1a as 16 lowercase hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 15];
    h >>= 4;
  }
  return out;
}

inline std::string config_hash(const Json& config) { return fnv1a_hex(config.dump()); }

inline Json report_header(const std::string& kind, const Json& config) {
  Json j;
  j["schema"] = "freqcons." + kind + ".v1";
  j["tool_version"] = kToolVersion;
  j["config_hash"] = config_hash(config);
  j["config"] = config;
  return j;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

inline const char* to_string(io::ChannelMode m) noexcept { return m == io::ChannelMode::Luma ? "luma" : "rgb"; }

inline Json sequence_json(const LoadedSequence& seq, const SequenceSpec& spec) {
  Json j;
  j["id"] = seq.id;
  j["frames"] = seq.video.length();
  j["channels"] = seq.video.frame(0).channel_count();
  j["rows"] = seq.video.frame(0).rows();
  j["cols"] = seq.video.frame(0).cols();
  j["channel_mode"] = to_string(spec.mode);
  j["first_key"] = seq.files.front().key;
  j["last_key"] = seq.files.back().key;
  return j;
}

inline Json band_json(const BandEnergy& e) {
  return Json{{"low", e.low}, {"high", e.high}, {"total", e.total()}};
}

// --- tfc ---------------------------------------------------------------------

struct TfcOptions {
  SequenceSpec ref;
  std::filesystem::path out;
  PhaseMode phase_mode = PhaseMode::Wrapped;
  double band_fraction = 0.5;
  std::string heatmap_format = "png";  // png | pgm
  std::size_t threads = 1;
};

inline Json cmd_tfc(const TfcOptions& opt) {
  if (opt.heatmap_format != "png" && opt.heatmap_format != "pgm") {
    throw InvalidInput("heatmap format must be png or pgm, got '" + opt.heatmap_format + "'");
  }
  if (!(opt.band_fraction > 0.0 && opt.band_fraction <= 1.0)) {
    throw InvalidInput("band fraction must lie in (0, 1], got " + std::to_string(opt.band_fraction));
  }
  const LoadedSequence seq = load_sequence(opt.ref);
  const MeanTfc mean = mean_tfc(seq.video, opt.phase_mode, opt.threads);
  ensure_directory(opt.out);
  const std::string ext = "." + opt.heatmap_format;
  export_heatmap(mean.mean_tac, Layout::Unshifted, opt.out / ("mean_tac" + ext), true);
  export_heatmap(mean.mean_tpc, Layout::Unshifted, opt.out / ("mean_tpc" + ext), false);
  write_grid_dump(opt.out / "mean_tac.tfcg", mean.mean_tac, Layout::Unshifted);
  write_grid_dump(opt.out / "mean_tpc.tfcg", mean.mean_tpc, Layout::Unshifted);

  Json config{{"command", "tfc"},
              {"channel_mode", to_string(opt.ref.mode)},
              {"pattern", opt.ref.pattern},
              {"phase_mode", to_string(opt.phase_mode)},
              {"band_fraction", opt.band_fraction},
              {"heatmap_format", opt.heatmap_format}};
  Json j = report_header("tfc", config);
  j["video_id"] = seq.id;
  j["sequence"] = sequence_json(seq, opt.ref);
  j["transitions"] = seq.video.transitions();
  j["band_energy"] = {{"tac", band_json(band_energy(mean.mean_tac, opt.band_fraction))},
                      {"tpc", band_json(band_energy(mean.mean_tpc, opt.band_fraction))}};
  j["outputs"] = {{"tac_heatmap", "mean_tac" + ext},
                  {"tpc_heatmap", "mean_tpc" + ext},
                  {"tac_dump", "mean_tac.tfcg"},
                  {"tpc_dump", "mean_tpc.tfcg"}};
  write_json(opt.out / "tfc.json", j);
  return j;
}

// --- wtfr --------------------------------------------------------------------

struct WtfrOptions {
  SequenceSpec ref;
  SequenceSpec syn;
  std::optional<std::filesystem::path> config_path;
  std::optional<PhaseMode> phase_mode;  // overrides the config file
  bool no_weighting = false;
  std::filesystem::path out;
  std::size_t threads = 1;
};

inline Json wtfr_config_json(const WtfrConfig& c) {
  return Json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"delta", c.delta},
              {"phase_mode", to_string(c.phase_mode)},
              {"weighting", c.weighting}};
}

inline Json cmd_wtfr(const WtfrOptions& opt) {
  WtfrConfig cfg = opt.config_path ? load_wtfr_config(*opt.config_path) : WtfrConfig{};
  if (opt.phase_mode) cfg.phase_mode = *opt.phase_mode;
  if (opt.no_weighting) cfg.weighting = false;
  cfg.validate();
  const LoadedSequence ref = load_sequence(opt.ref);
  const LoadedSequence syn = load_sequence(opt.syn);
  if (ref.video.length() != syn.video.length()) {
    throw InvalidInput("sequence length mismatch: reference has " + std::to_string(ref.video.length()) +
                       " frames, synthetic has " + std::to_string(syn.video.length()));
  }
  const auto result = wtfr_sequence_loss(ref.video, syn.video, cfg, opt.threads);
  ensure_directory(opt.out);

  Json config{{"command", "wtfr"},
              {"channel_mode", to_string(opt.ref.mode)},
              {"pattern", opt.ref.pattern},
              {"wtfr", wtfr_config_json(cfg)},
              {"config_source", opt.config_path ? "file" : "defaults"}};
  Json j = report_header("wtfr", config);
  j["video_id"] = ref.id;
  j["reference"] = sequence_json(ref, opt.ref);
  j["synthetic"] = sequence_json(syn, opt.syn);
  Json per = Json::array();
  for (std::size_t i = 0; i < result.transitions.size(); ++i) {
    const auto& r = result.transitions[i];
    per.push_back({{"t", i + 2}, {"l_tac", r.l_tac}, {"l_tpc", r.l_tpc}, {"total", r.total}});
  }
  j["per_transition"] = per;
  j["means"] = {{"l_tac", result.mean.l_tac}, {"l_tpc", result.mean.l_tpc}, {"total", result.mean.total}};
  write_json(opt.out / "wtfr.json", j);
  return j;
}

// --- metrics -----------------------------------------------------------------

struct MetricsOptions {
  SequenceSpec ref;
  SequenceSpec syn;
  std::string flow = "auto";  // "auto" or a directory of .flo files keyed by current-frame number
  std::filesystem::path out;
  std::size_t threads = 1;
};

/// Flow for transition t (1-based current frame) is the .flo file numbered t.
inline std::vector<FlowField> load_flows(const std::filesystem::path& dir, std::size_t frames) {
  const auto files = list_numbered_files(dir, "*", {".flo"});
  std::vector<FlowField> flows;
  for (std::size_t t = 2; t <= frames; ++t) {
    const auto it = std::find_if(files.begin(), files.end(), [&](const KeyedFile& f) { return f.key == t; });
    if (it == files.end()) {
      throw InvalidInput("missing flow file for transition " + std::to_string(t) + " in '" +
                         dir.filename().string() + "'");
    }
    flows.push_back(read_flo(it->path));
  }
  return flows;
}

inline Json cmd_metrics(const MetricsOptions& opt) {
  const LoadedSequence ref = load_sequence(opt.ref);
  const LoadedSequence syn = load_sequence(opt.syn);
  if (ref.video.length() != syn.video.length()) {
    throw InvalidInput("sequence length mismatch: reference has " + std::to_string(ref.video.length()) +
                       " frames, synthetic has " + std::to_string(syn.video.length()));
  }
  std::optional<std::vector<FlowField>> flows;
  if (opt.flow != "auto") flows = load_flows(opt.flow, ref.video.length());
  const MetricReport report = evaluate_video(ref.video, syn.video, flows, opt.threads);
  ensure_directory(opt.out);

  Json config{{"command", "metrics"},
              {"channel_mode", to_string(opt.ref.mode)},
              {"pattern", opt.ref.pattern},
              {"flow", opt.flow == "auto" ? "auto" : "files"},
              {"ssim", {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03}}},
              {"psnr_cap", kPsnrCap}};
  Json j = report_header("metrics", config);
  j["video_id"] = ref.id;
  j["flow_source"] = to_string(report.flow_source);
  Json per_t = Json::array();
  for (const auto& m : report.per_transition) per_t.push_back({{"t", m.t}, {"tcm", m.tcm}});
  Json per_f = Json::array();
  for (const auto& m : report.per_frame) per_f.push_back({{"t", m.t}, {"psnr", m.psnr}, {"ssim", m.ssim}});
  j["per_transition"] = per_t;
  j["per_frame"] = per_f;
  j["means"] = {{"tcm", report.mean_tcm}, {"psnr", report.mean_psnr}, {"ssim", report.mean_ssim}};
  write_json(opt.out / "metrics.json", j);
  return j;
}

// --- ffc ---------------------------------------------------------------------

struct FfcOptions {
  std::filesystem::path weights;
  std::filesystem::path input;
  std::filesystem::path out;
  std::size_t threads = 1;
};

/// Runs the block list, writes output.ffct and ffc.json; `trace` receives one
/// line per block.
inline Json cmd_ffc(const FfcOptions& opt, std::ostream* trace = nullptr) {
  const io::Bytes weight_bytes = io::read_file(opt.weights);
  const ffc::Model model = ffc::model_from_table(ffc::decode_weight_file(weight_bytes, opt.weights.string()));
  const ffc::FeatureTensor input = ffc::read_tensor_file(opt.input);
  Json blocks = Json::array();
  if (trace) *trace << "input " << input.shape_string() << "\n";
  const ffc::FeatureTensor output =
      ffc::run_model(input, model, opt.threads, [&](std::size_t i, const ffc::FeatureTensor& t) {
        blocks.push_back({{"index", i}, {"kind", ffc::to_string(model.blocks[i].kind)}, {"output_shape", t.shape_string()}});
        if (trace) *trace << "block " << i << " (" << ffc::to_string(model.blocks[i].kind) << ") -> " << t.shape_string() << "\n";
      });
  ensure_directory(opt.out);
  ffc::write_tensor_file(opt.out / "output.ffct", output);

  Json config{{"command", "ffc"},
              {"weights_fnv1a", fnv1a_hex(std::string_view(reinterpret_cast<const char*>(weight_bytes.data()),
                                                            weight_bytes.size()))},
              {"blocks", model.blocks.size()}};
  Json j = report_header("ffc", config);
  j["input_shape"] = input.shape_string();
  j["blocks"] = blocks;
  j["output_shape"] = output.shape_string();
  j["outputs"] = {{"tensor", "output.ffct"}};
  write_json(opt.out / "ffc.json", j);
  return j;
}

// --- heatmap -----------------------------------------------------------------

struct HeatmapOptions {
  std::filesystem::path input;  // TFCG dump
  std::filesystem::path output;  // .png or .pgm
  bool log_scale = false;
};

inline void cmd_heatmap(const HeatmapOptions& opt) {
  const GridDump dump = read_grid_dump(opt.input);
  const auto ext = opt.output.extension().string();
  if (ext != ".png" && ext != ".pgm") {
    throw InvalidInput("heatmap output must end in .png or .pgm, got '" + opt.output.filename().string() + "'");
  }
  if (opt.output.has_parent_path()) ensure_directory(opt.output.parent_path());
  export_heatmap(dump.grid, dump.layout, opt.output, opt.log_scale);
}

}  // namespace freqcons::cli
