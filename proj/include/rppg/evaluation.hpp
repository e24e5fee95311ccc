#pragma once

#include <map>
#include <string>
#include <vector>

#include "rppg/signal.hpp"

namespace rppg {

struct HrEstimate {
  double bpm = 0.0;
  /// Power at the chosen spectral peak over total spectral power.
  double peak_power_fraction = 0.0;
};

/// Heart rate from the dominant spectral peak: Hann window, zero padding to
/// a power of two, argmax inside [band_lo_hz, band_hi_hz], then parabolic
/// refinement on log power. Needs at least 4 s of signal.
HrEstimate hr_from_ppg(const PpgSignal& s, double band_lo_hz = 0.5, double band_hi_hz = 3.0);

/// Mean absolute heart-rate error over consecutive segments of segment_s
/// seconds (the prediction is resampled to the reference rate first).
double hr_mae(const PpgSignal& predicted, const PpgSignal& reference, double segment_s = 10.0);

/// Mean absolute sample difference; the caller standardizes both inputs.
double ppg_mae(const PpgSignal& a, const PpgSignal& b);

/// Per-recording biomarker values keyed by target name.
using BiomarkerTable = std::map<std::string, std::vector<double>>;

/// Constant predictors fitted on a table: the median per target, except
/// "sex" which takes the majority class.
std::map<std::string, double> constant_baseline(const BiomarkerTable& table);

struct RecordingPrediction {
  std::string recording_id;
  PpgSignal predicted_ppg;
  PpgSignal reference_ppg;
  std::map<std::string, double> predicted_biomarkers;
  std::map<std::string, double> true_biomarkers;
};

struct MetricReport {
  std::string model_name;
  std::string dataset_name;
  int num_recordings = 0;
  int num_segments = 0;
  int num_failed = 0;
  double hr_mae_bpm = 0.0;
  double ppg_mae = 0.0;
  std::map<std::string, double> biomarker_mae;
  bool has_sex_accuracy = false;
  double sex_accuracy = 0.0;
  std::vector<std::string> failures;
};

/// Pools segment heart-rate errors across recordings, averages the PPG
/// error per recording, and reports biomarker errors in physical units.
/// A recording whose evaluation throws is recorded as a failure and left
/// out of every aggregate.
MetricReport evaluate_suite(const std::vector<RecordingPrediction>& recordings,
                            double segment_s = 10.0);

}  // namespace rppg
