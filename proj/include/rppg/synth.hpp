#pragma once

#include <cstdint>
#include <limits>

#include "rppg/io.hpp"

namespace rppg {

/// Default per-channel pulse strength: the blood-volume signature scaled
/// to a realistic skin modulation depth.
Eigen::Vector3d default_pulse_gain();

struct SynthConfig {
  double duration_s = 20.0;
  double fps = 30.0;
  double ppg_rate_hz = 100.0;
  double hr_bpm = 72.0;
  double hr_drift_bpm_per_min = 0.0;
  Eigen::Vector3d pulse_gain_rgb = default_pulse_gain();
  Eigen::Vector3d baseline_rgb{0.7, 0.5, 0.4};
  /// Per-channel signal-to-noise ratio; +inf means noiseless.
  double noise_snr_db = std::numeric_limits<double>::infinity();
  double injected_video_shift_s = 0.0;
  long injected_ppg_shift_samples = 0;
  std::uint64_t seed = 0;
};

struct SynthGroundTruth {
  double hr_bpm = 0.0;
  double hr_drift_bpm_per_min = 0.0;
  double mean_hr_bpm = 0.0;
  double video_shift_s = 0.0;
  long ppg_shift_samples = 0;
  std::uint64_t seed = 0;
};

struct SyntheticRecording {
  RoiTraceSet traces;
  PpgSignal reference_ppg;
  ClockLabelStream clock_labels;
  RecordingManifest manifest;
  SynthGroundTruth ground_truth;
};

/// Pulse waveform value at local time t: unit fundamental at the drifting
/// heart rate plus a 0.3-amplitude second harmonic.
double synth_pulse(double hr_bpm, double drift_bpm_per_min, double t_s);

/// Deterministic seeded recording: seven-region color traces carrying the
/// pulse, a reference PPG with an injected sample shift, clock labels
/// consistent with an injected video shift, and a manifest whose
/// biomarkers are fixed functions of the mean heart rate and baseline
/// color.
SyntheticRecording generate_synthetic_recording(const SynthConfig& config);

}  // namespace rppg
