#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rppg/evaluation.hpp"
#include "rppg/model.hpp"
#include "rppg/signal.hpp"
#include "rppg/sync.hpp"
#include "rppg/unsupervised.hpp"

namespace rppg {

struct BiomarkerValue {
  double value = 0.0;
  std::string unit;
};

struct RecordingManifest {
  std::string subject_id;
  std::string state = "rest";  // or "post_exercise"
  std::string camera_id;
  double fps = 30.0;
  std::filesystem::path trace_path;
  std::filesystem::path reference_ppg_path;
  std::optional<std::filesystem::path> clock_label_path;
  std::map<std::string, BiomarkerValue> biomarkers;
  std::string notes;
};

struct BiomarkerBound {
  double lo = 0.0;
  double hi = 0.0;
  std::string unit;
};

/// Sanity range per recognized biomarker: observed dataset min/max widened
/// by 20% of the range on both sides.
const std::map<std::string, BiomarkerBound>& biomarker_bounds();

/// Checks state, biomarker names and ranges, and (optionally) that the
/// referenced files exist and parse. Paths resolve relative to base_dir.
void validate_manifest(const RecordingManifest& manifest,
                       const std::filesystem::path& base_dir, bool check_files);

/// Writes content to a temp file in the target directory, then renames.
void atomic_write_bytes(const std::filesystem::path& path, const std::string& content);

void write_trace_file(const std::filesystem::path& path, const RoiTraceSet& traces);
RoiTraceSet parse_trace_file(const std::filesystem::path& path);

void write_ppg_file(const std::filesystem::path& path, const PpgSignal& signal);
PpgSignal parse_ppg_file(const std::filesystem::path& path);

void write_clock_label_file(const std::filesystem::path& path, const ClockLabelStream& stream);
ClockLabelStream parse_clock_label_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const RecordingManifest& manifest);
RecordingManifest parse_manifest(const std::filesystem::path& path, bool check_files = true);

void save_scaler(const StandardScaler& scaler, const std::filesystem::path& path);
StandardScaler load_scaler(const std::filesystem::path& path);

enum class ReportFormat { jsonl, csv };

/// One record per (model, dataset, target) in a stable order: hr, ppg,
/// biomarker targets alphabetically, sex accuracy last.
void write_report(const MetricReport& report, const std::filesystem::path& path,
                  ReportFormat format);
std::string format_report(const MetricReport& report, ReportFormat format);

struct BenchResult {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  int repetitions = 0;
  Eigen::Index segment_frames = 0;
};

/// Sequential wall-clock timing of forward passes over pre-generated
/// random trace segments; 10 warmup passes are excluded. Percentiles use
/// the nearest-rank rule.
BenchResult bench_inference(const FpnModel& model, double segment_s, double fps,
                            int repetitions, std::uint64_t seed = 0);
BenchResult bench_inference(const std::filesystem::path& checkpoint_path, double segment_s,
                            double fps, int repetitions, std::uint64_t seed = 0);

/// Binary PPM (P6), 8-bit, scaled to [0, 1].
FrameImage read_ppm(const std::filesystem::path& path);

/// Headerless planar bytes: all red rows, then green, then blue.
FrameImage read_planar_rgb(const std::filesystem::path& path, Eigen::Index width,
                           Eigen::Index height);

/// Region file: one "name: x0,y0 x1,y1 ..." polygon per line, coordinates
/// in the unit square relative to the frame (scale by width/height before
/// rasterizing).
std::vector<RoiMask> parse_mask_file(const std::filesystem::path& path);

}  // namespace rppg
