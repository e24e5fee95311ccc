#include "rppg/sync.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace rppg {
namespace {

constexpr int kDay = 86400;
constexpr int kHalfDay = 43200;

// Non-decreasing under a clock that may wrap at midnight: b follows a when
// the forward distance is under half a day (zero included).
bool follows(int a, int b) { return ((b - a) % kDay + kDay) % kDay < kHalfDay; }

}  // namespace

std::optional<int> parse_clock_label(const std::string& label) {
  // On-screen clocks render either HH:MM:SS or HH.MM.SS; both separators
  // must match within one label.
  if (label.size() != 8) return std::nullopt;
  const char sep = label[2];
  if ((sep != ':' && sep != '.') || label[5] != sep) return std::nullopt;
  for (std::size_t i : {0u, 1u, 3u, 4u, 6u, 7u})
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return std::nullopt;
  const int h = (label[0] - '0') * 10 + (label[1] - '0');
  const int m = (label[3] - '0') * 10 + (label[4] - '0');
  const int s = (label[6] - '0') * 10 + (label[7] - '0');
  if (h > 23 || m > 59 || s > 59) return std::nullopt;
  return h * 3600 + m * 60 + s;
}

ClockLabelStream cleanse_labels(const ClockLabelStream& stream) {
  ClockLabelStream out = stream;

  std::vector<std::size_t> labeled;   // entry index
  std::vector<int> seconds;           // parsed value
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    auto& entry = out.entries[i];
    if (!entry.label) continue;
    const auto parsed = parse_clock_label(*entry.label);
    if (!parsed) {
      entry.label.reset();
      continue;
    }
    labeled.push_back(i);
    seconds.push_back(*parsed);
  }

  // Longest non-decreasing subsequence; on ties the earlier predecessor and
  // the earlier endpoint win so the kept labels are as early as possible.
  const std::size_t n = labeled.size();
  std::vector<int> len(n, 1);
  std::vector<std::size_t> prev(n, n);
  std::size_t best_end = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (follows(seconds[j], seconds[i]) && len[j] + 1 > len[i]) {
        len[i] = len[j] + 1;
        prev[i] = j;
      }
    if (n > 0 && len[i] > len[best_end]) best_end = i;
  }

  std::vector<bool> keep(n, false);
  if (n > 0)
    for (std::size_t i = best_end; i != n; i = prev[i]) keep[i] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!keep[i]) out.entries[labeled[i]].label.reset();
  return out;
}

ShiftEstimate record_time_shift(const ClockLabelStream& stream) {
  ShiftEstimate est;
  double unwrap = 0.0;
  std::optional<int> prev_sec;
  for (std::size_t i = 0; i + 1 < stream.entries.size(); ++i) {
    const auto& a = stream.entries[i];
    const auto& b = stream.entries[i + 1];
    if (!a.label || !b.label) continue;
    const auto sa = parse_clock_label(*a.label);
    const auto sb = parse_clock_label(*b.label);
    if (!sa || !sb) continue;
    if (prev_sec && *sa < *prev_sec) unwrap += kDay;
    prev_sec = *sa;
    if (*sb < *sa) unwrap += kDay;  // midnight rolls over inside the pair
    if (*sb == *sa) {
      prev_sec = *sb;
      continue;
    }
    const double label_time = static_cast<double>(*sb) + unwrap;
    const double midpoint = 0.5 * (a.timestamp_s + b.timestamp_s);
    est.per_transition_s.push_back(label_time - midpoint);
    prev_sec = *sb;
  }
  if (est.per_transition_s.empty())
    throw NoTransitions("no label transition between adjacent labeled frames");
  est.num_transitions = static_cast<int>(est.per_transition_s.size());
  double sum = 0.0;
  for (double v : est.per_transition_s) sum += v;
  est.shift_s = sum / static_cast<double>(est.num_transitions);
  return est;
}

double pairwise_camera_delta(const ShiftEstimate& a, const ShiftEstimate& b) {
  return a.shift_s - b.shift_s;
}

AlignResult align_ppg(const PpgSignal& reference, const PpgSignal& recovered,
                      long max_shift_samples) {
  validate(reference);
  validate(recovered);
  if (max_shift_samples < 0) throw Error("max shift must be non-negative");
  const double rate = reference.sample_rate_hz;
  if (std::abs(recovered.sample_rate_hz - rate) > 1e-9 * rate)
    throw InvalidRate("signals must share one sample rate");

  const long n_ref = static_cast<long>(reference.size());
  const long n_rec = static_cast<long>(recovered.size());
  const long min_overlap = static_cast<long>(std::ceil(2.0 * rate));
  if (std::min(n_ref, n_rec) - max_shift_samples < min_overlap)
    throw InsufficientOverlap("under 2 s of overlap at the maximum shift");

  AlignResult best;
  best.correlation = -std::numeric_limits<double>::infinity();
  bool found = false;
  // Shift order 0, -1, +1, -2, +2, ... with a strict improvement test keeps
  // the smallest magnitude and the negative sign on ties.
  for (long step = 0; step <= max_shift_samples; ++step) {
    for (const long k : {-step, step}) {
      if (k == 0 && step != 0) continue;
      const long lo = std::max(0L, k);
      const long hi = std::min(n_rec, n_ref + k);
      const long len = hi - lo;
      if (len < min_overlap) continue;
      double corr;
      try {
        corr = pearson_correlation(recovered.samples.segment(lo, len),
                                   reference.samples.segment(lo - k, len));
      } catch (const ConstantSignal&) {
        continue;  // flat overlap carries no alignment information
      }
      if (corr > best.correlation) {
        best.correlation = corr;
        best.shift_samples = k;
        found = true;
      }
    }
  }
  if (!found) throw InsufficientOverlap("no usable overlap at any candidate shift");
  return best;
}

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() < 2) throw InsufficientData("need at least 2 values");
  const double sd = population_std(values);

  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double iqr = quantile(0.75) - quantile(0.25);

  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
  if (!(h > 0.0)) throw InvalidBandwidth("values have no spread");
  return h;
}

Eigen::VectorXd gaussian_kde(const Eigen::Ref<const Eigen::VectorXd>& values,
                             const Eigen::Ref<const Eigen::VectorXd>& grid,
                             double bandwidth) {
  if (values.size() < 2) throw InsufficientData("need at least 2 values");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidBandwidth("bandwidth must be positive and finite");
  const double norm =
      1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd density(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Eigen::ArrayXd z = (values.array() - grid[i]) / bandwidth;
    density[i] = norm * (-0.5 * z.square()).exp().sum();
  }
  return density;
}

}  // namespace rppg
