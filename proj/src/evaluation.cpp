#include "rppg/evaluation.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

namespace rppg {
namespace {

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p *= 2;
  return p;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

HrEstimate hr_from_ppg(const PpgSignal& s, double band_lo_hz, double band_hi_hz) {
  validate(s);
  const double fs = s.sample_rate_hz;
  if (!(band_lo_hz > 0.0) || !(band_hi_hz > band_lo_hz) || band_hi_hz > fs / 2.0)
    throw InvalidBand("need 0 < lo < hi <= Nyquist");
  if (s.duration_s() < 4.0 - 1e-9)
    throw SignalTooShort("need at least 4 s for a stable spectral peak");

  const Eigen::Index n = s.size();
  Eigen::VectorXd x = s.samples.array() - s.samples.mean();
  if (population_std(x) < 1e-12) throw ConstantSignal("spectrum of a constant is empty");

  // Periodic Hann window.
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] *= 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));

  const Eigen::Index nfft = next_pow2(n);
  std::vector<double> padded(static_cast<std::size_t>(nfft), 0.0);
  std::copy(x.data(), x.data() + n, padded.begin());
  std::vector<std::complex<double>> spectrum;
  Eigen::FFT<double> fft;
  fft.fwd(spectrum, padded);

  const Eigen::Index half = nfft / 2;
  Eigen::VectorXd power(half + 1);
  for (Eigen::Index k = 0; k <= half; ++k) power[k] = std::norm(spectrum[k]);

  const Eigen::Index k_lo = static_cast<Eigen::Index>(
      std::ceil(band_lo_hz * static_cast<double>(nfft) / fs - 1e-9));
  const Eigen::Index k_hi = std::min<Eigen::Index>(
      half, static_cast<Eigen::Index>(std::floor(band_hi_hz * static_cast<double>(nfft) / fs + 1e-9)));
  if (k_lo > k_hi) throw InvalidBand("band contains no frequency bin");

  Eigen::Index k_max = k_lo;
  for (Eigen::Index k = k_lo + 1; k <= k_hi; ++k)
    if (power[k] > power[k_max]) k_max = k;

  // Parabolic refinement on log power, half-bin clamp.
  double delta = 0.0;
  if (k_max > 0 && k_max < half && power[k_max - 1] > 0.0 && power[k_max + 1] > 0.0 &&
      power[k_max] > 0.0) {
    const double a = std::log(power[k_max - 1]);
    const double b = std::log(power[k_max]);
    const double c = std::log(power[k_max + 1]);
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-300) delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }

  HrEstimate est;
  est.bpm = 60.0 * (static_cast<double>(k_max) + delta) * fs / static_cast<double>(nfft);
  const double total = power.sum();
  est.peak_power_fraction = total > 0.0 ? power[k_max] / total : 0.0;
  return est;
}

double hr_mae(const PpgSignal& predicted, const PpgSignal& reference, double segment_s) {
  validate(predicted);
  validate(reference);
  PpgSignal pred = predicted;
  if (std::abs(pred.sample_rate_hz - reference.sample_rate_hz) >
      1e-9 * reference.sample_rate_hz)
    pred = resample_linear(pred, reference.sample_rate_hz);

  std::vector<PpgSignal> pw, rw;
  try {
    pw = sliding_windows(pred, segment_s, segment_s);
    rw = sliding_windows(reference, segment_s, segment_s);
  } catch (const WindowTooLong&) {
    throw NoSegments("signals are shorter than one segment");
  }
  const std::size_t n = std::min(pw.size(), rw.size());
  if (n == 0) throw NoSegments("signals are shorter than one segment");

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += std::abs(hr_from_ppg(pw[i]).bpm - hr_from_ppg(rw[i]).bpm);
  return sum / static_cast<double>(n);
}

double ppg_mae(const PpgSignal& a, const PpgSignal& b) {
  validate(a);
  validate(b);
  if (a.size() != b.size()) throw LengthMismatch("signals must have equal length");
  if (a.size() == 0) throw SignalTooShort("signals are empty");
  if (std::abs(a.sample_rate_hz - b.sample_rate_hz) > 1e-9 * a.sample_rate_hz)
    throw InvalidRate("signals must share one sample rate");
  return (a.samples - b.samples).cwiseAbs().mean();
}

std::map<std::string, double> constant_baseline(const BiomarkerTable& table) {
  std::map<std::string, double> out;
  for (const auto& [name, values] : table) {
    if (values.empty()) throw InsufficientData("no values for target " + name);
    if (name == "sex") {
      std::size_t ones = 0;
      for (double v : values)
        if (v >= 0.5) ++ones;
      out[name] = ones * 2 > values.size() ? 1.0 : 0.0;
    } else {
      out[name] = median(values);
    }
  }
  return out;
}

MetricReport evaluate_suite(const std::vector<RecordingPrediction>& recordings,
                            double segment_s) {
  MetricReport report;
  report.num_recordings = static_cast<int>(recordings.size());

  std::vector<double> segment_errors;
  std::vector<double> recording_ppg_mae;
  std::map<std::string, std::vector<double>> target_errors;
  int sex_total = 0, sex_correct = 0;

  for (const auto& rec : recordings) {
    try {
      PpgSignal pred = resample_linear(rec.predicted_ppg, rec.reference_ppg.sample_rate_hz);
      PpgSignal ref = rec.reference_ppg;
      const Eigen::Index len = std::min(pred.size(), ref.size());
      pred.samples.conservativeResize(len);
      ref.samples.conservativeResize(len);
      pred = standardize(pred);
      ref = standardize(ref);

      std::vector<PpgSignal> pw, rw;
      try {
        pw = sliding_windows(pred, segment_s, segment_s);
        rw = sliding_windows(ref, segment_s, segment_s);
      } catch (const WindowTooLong&) {
        throw NoSegments("recording shorter than one segment");
      }
      const std::size_t nseg = std::min(pw.size(), rw.size());
      if (nseg == 0) throw NoSegments("recording shorter than one segment");

      std::vector<double> errs;
      errs.reserve(nseg);
      for (std::size_t i = 0; i < nseg; ++i)
        errs.push_back(std::abs(hr_from_ppg(pw[i]).bpm - hr_from_ppg(rw[i]).bpm));
      const double rec_ppg_mae = ppg_mae(pred, ref);

      // All stages succeeded, commit this recording to the aggregates.
      segment_errors.insert(segment_errors.end(), errs.begin(), errs.end());
      recording_ppg_mae.push_back(rec_ppg_mae);
      for (const auto& [name, truth] : rec.true_biomarkers) {
        const auto it = rec.predicted_biomarkers.find(name);
        if (it == rec.predicted_biomarkers.end()) continue;
        if (name == "sex") {
          ++sex_total;
          if ((it->second >= 0.5) == (truth >= 0.5)) ++sex_correct;
        } else {
          target_errors[name].push_back(std::abs(it->second - truth));
        }
      }
    } catch (const Error& e) {
      ++report.num_failed;
      report.failures.push_back(rec.recording_id + ": " + e.what());
    }
  }

  // Nothing evaluable yields a zero-count report, never an exception; the
  // failure list says why.
  report.num_segments = static_cast<int>(segment_errors.size());

  if (!segment_errors.empty()) {
    double sum = 0.0;
    for (double e : segment_errors) sum += e;
    report.hr_mae_bpm = sum / static_cast<double>(segment_errors.size());
  }
  if (!recording_ppg_mae.empty()) {
    double sum = 0.0;
    for (double e : recording_ppg_mae) sum += e;
    report.ppg_mae = sum / static_cast<double>(recording_ppg_mae.size());
  }

  for (const auto& [name, errs] : target_errors) {
    double s = 0.0;
    for (double e : errs) s += e;
    report.biomarker_mae[name] = s / static_cast<double>(errs.size());
  }
  if (sex_total > 0) {
    report.has_sex_accuracy = true;
    report.sex_accuracy = static_cast<double>(sex_correct) / static_cast<double>(sex_total);
  }
  return report;
}

}  // namespace rppg
