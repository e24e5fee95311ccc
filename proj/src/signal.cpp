#include "rppg/signal.hpp"

#include <cmath>

namespace rppg {

Eigen::VectorXd FrameTimebase::timestamps() const {
  Eigen::VectorXd out(num_frames);
  for (Eigen::Index i = 0; i < num_frames; ++i) out[i] = timestamp(i);
  return out;
}

double population_std(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() == 0) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().mean());
}

void validate(const PpgSignal& s) {
  if (!(s.sample_rate_hz > 0.0) || !std::isfinite(s.sample_rate_hz))
    throw InvalidRate("sample_rate_hz must be positive and finite");
  if (!s.samples.allFinite()) throw Error("signal contains non-finite samples");
}

void validate(const RoiTraceSet& t) {
  if (t.traces.rows() != t.timestamps_s.size())
    throw LengthMismatch("trace rows do not match timestamp count");
  if (t.traces.cols() != 3 * t.num_rois())
    throw LengthMismatch("trace columns do not match 3 * roi count");
  for (Eigen::Index i = 1; i < t.timestamps_s.size(); ++i)
    if (!(t.timestamps_s[i] > t.timestamps_s[i - 1]))
      throw NonMonotoneTimestamps("timestamps must be strictly increasing");
  if (!t.traces.allFinite()) throw Error("traces contain non-finite values");
}

double frame_rate(const RoiTraceSet& t) {
  if (t.num_frames() < 2) throw TraceTooShort("need at least 2 frames to derive a rate");
  const double span = t.timestamps_s[t.num_frames() - 1] - t.timestamps_s[0];
  if (!(span > 0.0)) throw NonMonotoneTimestamps("timestamps must span a positive interval");
  return static_cast<double>(t.num_frames() - 1) / span;
}

PpgSignal standardize(const PpgSignal& s) {
  validate(s);
  const double sd = population_std(s.samples);
  if (sd < 1e-12) throw ConstantSignal("signal is constant (std < 1e-12)");
  PpgSignal out = s;
  out.samples = (s.samples.array() - s.samples.mean()) / sd;
  return out;
}

PpgSignal resample_linear(const PpgSignal& s, double target_rate_hz) {
  validate(s);
  if (!(target_rate_hz > 0.0) || !std::isfinite(target_rate_hz))
    throw InvalidRate("target rate must be positive and finite");
  if (s.size() < 2) throw SignalTooShort("need at least 2 samples to resample");

  const double duration = s.duration_s();
  const Eigen::Index m = static_cast<Eigen::Index>(std::floor(duration * target_rate_hz)) + 1;
  PpgSignal out;
  out.sample_rate_hz = target_rate_hz;
  out.t0_s = s.t0_s;
  out.samples.resize(m);
  const Eigen::Index n = s.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double pos = static_cast<double>(i) / target_rate_hz * s.sample_rate_hz;
    Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    if (lo >= n - 1) lo = n - 2;  // clamp so the last grid point interpolates inside
    const double frac = pos - static_cast<double>(lo);
    out.samples[i] = s.samples[lo] * (1.0 - frac) + s.samples[lo + 1] * frac;
  }
  return out;
}

double pearson_correlation(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw LengthMismatch("inputs must have equal length");
  if (x.size() < 2) throw SignalTooShort("need at least 2 samples");
  const double sx = population_std(x);
  const double sy = population_std(y);
  if (sx < 1e-12 || sy < 1e-12) throw ConstantSignal("correlation undefined for constant input");
  const double cov = ((x.array() - x.mean()) * (y.array() - y.mean())).mean();
  return cov / (sx * sy);
}

std::vector<PpgSignal> sliding_windows(const PpgSignal& s, double window_s, double hop_s) {
  validate(s);
  if (!(window_s > 0.0) || !(hop_s > 0.0))
    throw InvalidRate("window and hop must be positive");
  const Eigen::Index w = static_cast<Eigen::Index>(std::llround(window_s * s.sample_rate_hz));
  const Eigen::Index h = static_cast<Eigen::Index>(std::llround(hop_s * s.sample_rate_hz));
  if (w < 1 || h < 1) throw InvalidRate("window and hop must cover at least one sample");
  if (w > s.size()) throw WindowTooLong("window exceeds signal length");

  std::vector<PpgSignal> out;
  for (Eigen::Index start = 0; start + w <= s.size(); start += h) {
    PpgSignal win;
    win.sample_rate_hz = s.sample_rate_hz;
    win.t0_s = s.t0_s + static_cast<double>(start) / s.sample_rate_hz;
    win.samples = s.samples.segment(start, w);
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace rppg
