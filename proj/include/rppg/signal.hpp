#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rppg/errors.hpp"

namespace rppg {

/// Uniformly sampled scalar waveform.
struct PpgSignal {
  Eigen::VectorXd samples;
  double sample_rate_hz = 0.0;
  double t0_s = 0.0;

  Eigen::Index size() const { return samples.size(); }
  /// Time spanned from first to last sample.
  double duration_s() const {
    return samples.size() < 2 ? 0.0
                              : static_cast<double>(samples.size() - 1) / sample_rate_hz;
  }
};

/// Per-frame mean color of a set of named regions. Row t holds
/// [roi0.r, roi0.g, roi0.b, roi1.r, ...] for frame t.
struct RoiTraceSet {
  std::vector<std::string> roi_names;
  Eigen::VectorXd timestamps_s;
  Eigen::MatrixXd traces;

  Eigen::Index num_frames() const { return timestamps_s.size(); }
  Eigen::Index num_rois() const { return static_cast<Eigen::Index>(roi_names.size()); }
};

/// Uniform frame grid: timestamp(i) = t0_s + i / fps.
struct FrameTimebase {
  double fps = 30.0;
  Eigen::Index num_frames = 0;
  double t0_s = 0.0;

  double timestamp(Eigen::Index i) const { return t0_s + static_cast<double>(i) / fps; }
  Eigen::VectorXd timestamps() const;
};

/// Population standard deviation (divide by n, not n-1).
double population_std(const Eigen::Ref<const Eigen::VectorXd>& x);

void validate(const PpgSignal& s);
void validate(const RoiTraceSet& t);

/// Mean frame rate implied by the timestamps.
double frame_rate(const RoiTraceSet& t);

/// Zero mean, unit population variance. Throws ConstantSignal when the
/// population std is below 1e-12.
PpgSignal standardize(const PpgSignal& s);

/// Linear interpolation onto a uniform grid at target_rate_hz spanning the
/// same interval; output has floor(duration * rate) + 1 samples.
PpgSignal resample_linear(const PpgSignal& s, double target_rate_hz);

/// Pearson correlation with population normalization.
double pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y);

/// Cut into windows of round(window_s * rate) samples every
/// round(hop_s * rate) samples; a window that would run past the end is
/// dropped. Each window keeps the rate and gets the correct start time.
std::vector<PpgSignal> sliding_windows(const PpgSignal& s, double window_s, double hop_s);

}  // namespace rppg
