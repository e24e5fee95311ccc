#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include "rppg/signal.hpp"

namespace rppg {

/// One second-order section, direct form; a0 is implicitly 1.
struct BiquadSection {
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterDesign {
  std::string family = "cheby2";
  int order = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;
  double stop_atten_db = 0.0;
  double sample_rate_hz = 0.0;
};

struct IirFilter {
  std::vector<BiquadSection> sections;
  FilterDesign design;
};

/// Chebyshev type II band-pass with the stopband edges at low_hz/high_hz,
/// exactly stop_atten_db down at both edges. The order is the analog
/// prototype order; the band-pass transform doubles it, so `order` must be
/// even and yields `order` biquad sections.
IirFilter design_cheby2_bandpass(int order, double low_hz, double high_hz,
                                 double stop_atten_db, double sample_rate_hz);

/// The pulse-band default: order 4, 0.4-8 Hz, 30 dB stopband.
IirFilter default_bandpass(double sample_rate_hz);

/// True when every section's poles lie strictly inside the unit circle.
bool is_stable(const IirFilter& f);

/// Complex response at each frequency (Hz, within [0, Nyquist]).
std::vector<std::complex<double>> frequency_response(const IirFilter& f,
                                                     const std::vector<double>& freqs_hz);

/// Single-pass cascaded filtering with given or zero initial conditions.
Eigen::VectorXd sosfilt(const IirFilter& f, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Zero-phase forward-backward filtering with odd reflection padding of
/// 6 * num_sections samples per end and steady-state initial conditions.
Eigen::VectorXd filtfilt(const IirFilter& f, const Eigen::Ref<const Eigen::VectorXd>& x);
PpgSignal filtfilt(const IirFilter& f, const PpgSignal& s);

/// Text round-trip: '#' metadata header then one section per line as
/// "b0 b1 b2 a1 a2" with 17 significant digits.
void save_filter(const IirFilter& f, const std::filesystem::path& path);
IirFilter load_filter(const std::filesystem::path& path);

}  // namespace rppg
