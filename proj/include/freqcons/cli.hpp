#pragma once

// Argument parsing and exit-code mapping for the freqcons executable.
//
// Exit codes: 0 success, 2 usage or validation error, 3 I/O or file-format
// error, 4 numerical failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freqcons/commands.hpp"
#include "freqcons/parallel.hpp"

namespace freqcons::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumerical = 4 };

namespace detail {

struct SequenceFlags {
  std::string pattern = "*";
  std::string channels = "rgb";
  std::optional<std::uint64_t> first;
  std::optional<std::uint64_t> last;

  void add(CLI::App& app) {
    app.add_option("--pattern", pattern, "Filename glob for frames (default *)");
    app.add_option("--channels", channels, "rgb or luma")->check(CLI::IsMember({"rgb", "luma"}));
    app.add_option("--first", first, "First frame number to include");
    app.add_option("--last", last, "Last frame number to include");
  }

  SequenceSpec spec(const std::filesystem::path& dir) const {
    return {dir, pattern, channels == "luma" ? io::ChannelMode::Luma : io::ChannelMode::Rgb, first, last};
  }
};

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal frequency analysis, regularisation and evaluation for generated video", "freqcons"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::size_t threads = default_thread_count();
  std::filesystem::path out_dir;
  std::filesystem::path ref_dir;
  std::filesystem::path syn_dir;
  detail::SequenceFlags seq;
  std::string phase_mode;
  double band_fraction = 0.5;
  std::string heatmap_format = "png";
  std::filesystem::path config_path;
  bool no_weighting = false;
  std::string flow = "auto";
  std::filesystem::path weights;
  std::filesystem::path input;
  bool log_scale = false;

  const auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads (default: hardware concurrency)")
        ->check(CLI::PositiveNumber);
  };

  auto* tfc = app.add_subcommand("tfc", "Mean TAC/TPC heatmaps, raw dumps and band energies");
  tfc->add_option("--ref", ref_dir, "Reference frame directory")->required();
  tfc->add_option("--out", out_dir, "Output directory")->required();
  tfc->add_option("--phase-mode", phase_mode, "raw or wrapped (default wrapped)")
      ->check(CLI::IsMember({"raw", "wrapped"}));
  tfc->add_option("--band-fraction", band_fraction, "Low-band radius as a fraction of the largest (default 0.5)");
  tfc->footer(
      "Heatmaps are min-max scaled per image, so their intensities are not comparable across runs.\n"
      "Compare band energies in tfc.json or the raw .tfcg dumps instead.");
  tfc->add_option("--heatmap-format", heatmap_format, "png or pgm (default png)")
      ->check(CLI::IsMember({"png", "pgm"}));
  seq.add(*tfc);
  add_threads(tfc);

  auto* wtfr = app.add_subcommand("wtfr", "Weighted temporal-frequency loss between two sequences");
  wtfr->add_option("--ref", ref_dir, "Reference frame directory")->required();
  wtfr->add_option("--syn", syn_dir, "Synthetic frame directory")->required();
  wtfr->add_option("--config", config_path, "key = value config file");
  wtfr->add_option("--out", out_dir, "Output directory")->required();
  wtfr->add_option("--phase-mode", phase_mode, "raw or wrapped")->check(CLI::IsMember({"raw", "wrapped"}));
  wtfr->add_flag("--no-weighting", no_weighting, "Use w(u,v) = 1");
  seq.add(*wtfr);
  add_threads(wtfr);

  auto* metrics = app.add_subcommand("metrics", "TCM, PSNR and SSIM report");
  metrics->add_option("--ref", ref_dir, "Reference frame directory")->required();
  metrics->add_option("--syn", syn_dir, "Synthetic frame directory")->required();
  metrics->add_option("--flow", flow, "'auto' or a directory of .flo files numbered by current frame");
  metrics->add_option("--out", out_dir, "Output directory")->required();
  seq.add(*metrics);
  add_threads(metrics);

  auto* ffc_cmd = app.add_subcommand("ffc", "Run an FFC block list on a tensor file");
  ffc_cmd->add_option("--weights", weights, "FFCW weight file")->required();
  ffc_cmd->add_option("--input", input, "FFCT input tensor")->required();
  ffc_cmd->add_option("--out", out_dir, "Output directory")->required();
  add_threads(ffc_cmd);

  auto* heatmap = app.add_subcommand("heatmap", "Render a TFCG grid dump as an 8-bit heatmap");
  heatmap->add_option("--input", input, "TFCG dump")->required();
  heatmap->add_option("--out", out_dir, "Output image (.png or .pgm)")->required();
  heatmap->add_flag("--log", log_scale, "Apply log(1 + x) before scaling");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (tfc->parsed()) {
      TfcOptions o{seq.spec(ref_dir), out_dir, PhaseMode::Wrapped, band_fraction, heatmap_format, threads};
      if (!phase_mode.empty()) o.phase_mode = parse_phase_mode(phase_mode);
      const Json j = cmd_tfc(o);
      out << "tfc: " << j["transitions"].get<std::size_t>() << " transitions -> " << (out_dir / "tfc.json").string()
          << "\n";
    } else if (wtfr->parsed()) {
      WtfrOptions o{seq.spec(ref_dir), seq.spec(syn_dir), std::nullopt, std::nullopt, no_weighting, out_dir, threads};
      if (!config_path.empty()) o.config_path = config_path;
      if (!phase_mode.empty()) o.phase_mode = parse_phase_mode(phase_mode);
      const Json j = cmd_wtfr(o);
      out << "wtfr: mean total " << j["means"]["total"].dump() << " -> " << (out_dir / "wtfr.json").string() << "\n";
    } else if (metrics->parsed()) {
      const Json j = cmd_metrics({seq.spec(ref_dir), seq.spec(syn_dir), flow, out_dir, threads});
      out << "metrics: mean tcm " << j["means"]["tcm"].dump() << " -> " << (out_dir / "metrics.json").string()
          << "\n";
    } else if (ffc_cmd->parsed()) {
      cmd_ffc({weights, input, out_dir, threads}, &out);
      out << "ffc: -> " << (out_dir / "output.ffct").string() << "\n";
    } else if (heatmap->parsed()) {
      cmd_heatmap({input, out_dir, log_scale});
      out << "heatmap: -> " << out_dir.string() << "\n";
    }
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidState& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}

}  // namespace freqcons::cli
