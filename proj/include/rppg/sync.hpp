#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "rppg/signal.hpp"

namespace rppg {

/// One video frame with the wall-clock text recognized in it, if any.
struct ClockLabelEntry {
  long frame_index = 0;
  double timestamp_s = 0.0;
  std::optional<std::string> label;
};

struct ClockLabelStream {
  std::string camera_id;
  std::vector<ClockLabelEntry> entries;
};

struct ShiftEstimate {
  double shift_s = 0.0;
  int num_transitions = 0;
  std::vector<double> per_transition_s;
};

struct AlignResult {
  long shift_samples = 0;
  double correlation = 0.0;
};

/// "HH:MM:SS" or "HH.MM.SS" to seconds of day; nullopt when malformed.
std::optional<int> parse_clock_label(const std::string& label);

/// Drops labels that do not parse or that break monotone clock order
/// (midnight wrap allowed); keeps every entry and timestamp. The surviving
/// labels are the longest non-decreasing subsequence, earlier entries
/// preferred on ties.
ClockLabelStream cleanse_labels(const ClockLabelStream& stream);

/// Mean over label transitions of label_time - midpoint of the two frame
/// timestamps around the transition. Requires a cleansed stream.
ShiftEstimate record_time_shift(const ClockLabelStream& stream);

/// Clock offset between two cameras, positive when `a` displays later.
double pairwise_camera_delta(const ShiftEstimate& a, const ShiftEstimate& b);

/// Integer-shift alignment maximizing Pearson correlation, with the
/// convention recovered[i] ~ reference[i - shift]. Ties prefer the smaller
/// absolute shift, then the negative one.
AlignResult align_ppg(const PpgSignal& reference, const PpgSignal& recovered,
                      long max_shift_samples);

double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& values);

Eigen::VectorXd gaussian_kde(const Eigen::Ref<const Eigen::VectorXd>& values,
                             const Eigen::Ref<const Eigen::VectorXd>& grid,
                             double bandwidth);

}  // namespace rppg
