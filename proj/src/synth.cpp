#include "rppg/synth.hpp"

#include <cmath>

#include "rppg/rng.hpp"
#include "rppg/unsupervised.hpp"

namespace rppg {
namespace {

std::string format_clock(long seconds_of_day) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02ld:%02ld:%02ld", seconds_of_day / 3600,
                (seconds_of_day / 60) % 60, seconds_of_day % 60);
  return buf;
}

// Recordings nominally start at noon so labels sit far from midnight.
constexpr double kStartOfDay = 43200.0;

}  // namespace

Eigen::Vector3d default_pulse_gain() { return default_pbv_signature() * 0.1; }

double synth_pulse(double hr_bpm, double drift_bpm_per_min, double t_s) {
  const double cycles = (hr_bpm * t_s + drift_bpm_per_min * t_s * t_s / 120.0) / 60.0;
  return std::sin(2.0 * M_PI * cycles) + 0.3 * std::sin(4.0 * M_PI * cycles);
}

SyntheticRecording generate_synthetic_recording(const SynthConfig& config) {
  if (!(config.hr_bpm >= 30.0 && config.hr_bpm <= 180.0))
    throw InvalidConfig("hr_bpm must lie in [30, 180]");
  if (!(config.duration_s > 0.0) || !std::isfinite(config.duration_s))
    throw InvalidConfig("duration_s must be positive");
  if (!(config.fps > 0.0) || !std::isfinite(config.fps))
    throw InvalidConfig("fps must be positive");
  if (!(config.ppg_rate_hz > 0.0) || !std::isfinite(config.ppg_rate_hz))
    throw InvalidConfig("ppg_rate_hz must be positive");
  if (!(config.baseline_rgb.minCoeff() > 0.0))
    throw InvalidConfig("baseline_rgb must be positive");
  if (!config.pulse_gain_rgb.allFinite() || !std::isfinite(config.injected_video_shift_s))
    throw InvalidConfig("gains and shifts must be finite");

  const Eigen::Index n_frames =
      static_cast<Eigen::Index>(std::llround(config.duration_s * config.fps));
  const Eigen::Index n_ppg =
      static_cast<Eigen::Index>(std::llround(config.duration_s * config.ppg_rate_hz));
  if (n_frames < 2 || n_ppg < 2) throw InvalidConfig("duration covers under 2 samples");

  Rng rng(config.seed);
  const std::vector<RoiMask> rois = default_roi_masks(640, 480);
  const Eigen::Index n_roi = static_cast<Eigen::Index>(rois.size());

  // Mild fixed per-region texture so channels are not exact copies.
  Eigen::VectorXd gain_factor(n_roi), base_factor(n_roi);
  for (Eigen::Index r = 0; r < n_roi; ++r) {
    gain_factor[r] = rng.uniform(0.85, 1.15);
    base_factor[r] = rng.uniform(0.95, 1.05);
  }

  Eigen::VectorXd pulse(n_frames);
  for (Eigen::Index n = 0; n < n_frames; ++n)
    pulse[n] = synth_pulse(config.hr_bpm, config.hr_drift_bpm_per_min,
                           static_cast<double>(n) / config.fps);
  const double pulse_rms = std::sqrt(pulse.array().square().mean());
  const bool noisy = std::isfinite(config.noise_snr_db);
  const double noise_scale = noisy ? std::pow(10.0, -config.noise_snr_db / 20.0) : 0.0;

  SyntheticRecording rec;
  rec.traces.timestamps_s.resize(n_frames);
  rec.traces.traces.resize(n_frames, 3 * n_roi);
  for (const RoiMask& roi : rois) rec.traces.roi_names.push_back(roi.name);

  for (Eigen::Index n = 0; n < n_frames; ++n) {
    rec.traces.timestamps_s[n] = kStartOfDay + static_cast<double>(n) / config.fps;
    for (Eigen::Index r = 0; r < n_roi; ++r) {
      for (int ch = 0; ch < 3; ++ch) {
        const double base = config.baseline_rgb[ch] * base_factor[r];
        const double gain = config.pulse_gain_rgb[ch] * gain_factor[r];
        double v = base * (1.0 + gain * pulse[n]);
        if (noisy) v += std::abs(gain) * base * pulse_rms * noise_scale * rng.normal();
        rec.traces.traces(n, 3 * r + ch) = std::max(0.0, v);
      }
    }
  }

  rec.reference_ppg.sample_rate_hz = config.ppg_rate_hz;
  rec.reference_ppg.t0_s = kStartOfDay;
  rec.reference_ppg.samples.resize(n_ppg);
  for (Eigen::Index i = 0; i < n_ppg; ++i) {
    const double t = static_cast<double>(i + config.injected_ppg_shift_samples) /
                     config.ppg_rate_hz;
    rec.reference_ppg.samples[i] =
        synth_pulse(config.hr_bpm, config.hr_drift_bpm_per_min, t);
  }

  rec.clock_labels.camera_id = "cam0";
  for (Eigen::Index n = 0; n < n_frames; ++n) {
    ClockLabelEntry entry;
    entry.frame_index = static_cast<long>(n);
    entry.timestamp_s = rec.traces.timestamps_s[n];
    const double wall = entry.timestamp_s + config.injected_video_shift_s;
    long sec = static_cast<long>(std::floor(wall)) % 86400;
    if (sec < 0) sec += 86400;
    entry.label = format_clock(sec);
    rec.clock_labels.entries.push_back(std::move(entry));
  }

  const double mean_hr =
      config.hr_bpm + config.hr_drift_bpm_per_min * config.duration_s / 120.0;
  rec.manifest.subject_id = "synth-" + std::to_string(config.seed);
  rec.manifest.state = "rest";
  rec.manifest.camera_id = rec.clock_labels.camera_id;
  rec.manifest.fps = config.fps;
  rec.manifest.trace_path = "traces.csv";
  rec.manifest.reference_ppg_path = "reference_ppg.csv";
  rec.manifest.clock_label_path = "clock_labels.csv";
  const double saturation =
      std::clamp(99.0 - 20.0 * (config.baseline_rgb[0] - 0.7), 86.0, 99.0);
  rec.manifest.biomarkers = {
      {"heart_rate", {mean_hr, "bpm"}},
      {"systolic_pressure", {80.0 + 0.45 * mean_hr, "mm Hg"}},
      {"diastolic_pressure", {50.0 + 0.2 * mean_hr, "mm Hg"}},
      {"respiratory_rate", {12.0 + mean_hr / 16.0, "rpm"}},
      {"age", {18.0 + 0.4 * (mean_hr - 48.0), "years"}},
      {"saturation", {saturation, "%"}},
      {"sex", {config.baseline_rgb[1] > 0.5 ? 1.0 : 0.0, ""}},
  };

  rec.ground_truth = {config.hr_bpm,
                      config.hr_drift_bpm_per_min,
                      mean_hr,
                      config.injected_video_shift_s,
                      config.injected_ppg_shift_samples,
                      config.seed};
  return rec;
}

}  // namespace rppg
