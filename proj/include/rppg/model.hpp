#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rppg/signal.hpp"

namespace rppg {

/// The eleven regression targets the multitask head predicts by default.
std::vector<std::string> default_biomarker_targets();

struct FpnConfig {
  int in_channels = 21;  // 7 regions x 3 color channels
  int base_width = 16;
  int pyramid_width = 32;
  int num_stages = 4;
  int stem_kernel = 7;
  int stage_kernel = 3;
  int max_stage_width = 128;
  std::vector<std::string> targets = default_biomarker_targets();

  int min_input_length() const { return 1 << num_stages; }
  int stage_width(int stage) const {
    int w = base_width;
    for (int i = 0; i < stage; ++i) w = std::min(w * 2, max_stage_width);
    return w;
  }
  int num_targets() const { return static_cast<int>(targets.size()); }
};

/// Weight layout: row o holds the taps for output channel o, ordered
/// input-channel-major then tap, i.e. column c * kernel + u.
struct Conv1d {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
};

struct FpnModel {
  FpnConfig config;
  Conv1d stem;
  std::vector<Conv1d> encoder;  // num_stages blocks, stride 2
  std::vector<Conv1d> lateral;  // num_stages + 1 1x1 projections
  Conv1d ppg_head;              // 1x1, pyramid_width -> 1
  Eigen::MatrixXd head_weight;  // num_targets x pyramid_width
  Eigen::VectorXd head_bias;

  /// Parameters are kept exactly representable in 32-bit floats so
  /// checkpoints round-trip bit-exactly.
};

FpnModel make_fpn(const FpnConfig& config, std::uint64_t seed);

/// Flat views over every trainable tensor in the fixed serialization order.
std::vector<Eigen::Map<Eigen::VectorXd>> parameter_views(FpnModel& m);
Eigen::Index parameter_count(const FpnModel& m);

struct ForwardResult {
  Eigen::VectorXd ppg;         // length T, one value per input frame
  Eigen::VectorXd biomarkers;  // scaled space, one per configured target
};

/// traces is channels x T. Pure and thread-safe on a shared const model.
ForwardResult forward(const FpnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& traces);

struct LossTargets {
  Eigen::VectorXd ppg;
  Eigen::VectorXd biomarkers;
  Eigen::VectorXd biomarker_mask;  // 1 = present, 0 = missing
};

/// MSE over the PPG samples plus the masked squared biomarker errors.
double loss(const ForwardResult& pred, const LossTargets& target);

struct TrainingSample {
  Eigen::MatrixXd input;
  LossTargets targets;
};

struct TrainConfig {
  double window_s = 20.0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 30;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

struct AdamState {
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
  long step = 0;
};

AdamState make_adam_state(FpnModel& m);

/// Mean gradient of the batch loss for every trainable tensor, flattened
/// in parameter_views order; returns the mean loss. Throws NonFiniteLoss.
double loss_gradients(const FpnModel& m, const std::vector<const TrainingSample*>& batch,
                      std::vector<Eigen::VectorXd>& grads);

/// One Adam update on the mean gradient over the batch; returns the batch
/// loss. Throws NonFiniteLoss before touching the model.
double backward_step(FpnModel& m, AdamState& adam,
                     const std::vector<const TrainingSample*>& batch,
                     const TrainConfig& config);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
};

/// Seeded shuffling, fixed batching, one log entry per epoch.
std::vector<EpochLog> train(FpnModel& m, const std::vector<TrainingSample>& samples,
                            const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

struct StandardScaler {
  std::vector<std::string> targets;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  bool has(const std::string& target) const;
  double transform(const std::string& target, double physical) const;
  double inverse(const std::string& target, double scaled) const;
};

/// Per-target mean and population std; every fitted target needs at least
/// two values and non-zero variance.
StandardScaler fit_scaler(const std::map<std::string, std::vector<double>>& table);

/// Non-overlapping windows of window_s seconds: per-channel normalized
/// input, the reference resampled onto the frame grid and standardized per
/// window, and scaled biomarker targets with a missing-mask.
std::vector<TrainingSample> make_training_samples(
    const RoiTraceSet& traces, const PpgSignal& reference,
    const std::map<std::string, double>& biomarkers, const StandardScaler& scaler,
    const std::vector<std::string>& model_targets, double window_s);

struct PredictOutput {
  PpgSignal ppg;
  std::map<std::string, double> biomarkers;  // physical units
};

PredictOutput predict_recording(const FpnModel& m, const StandardScaler& scaler,
                                const RoiTraceSet& traces);

/// Versioned binary container: topology header plus little-endian f32
/// parameter blobs (layout documented in the README).
void save_checkpoint(const FpnModel& m, const std::filesystem::path& path);
FpnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rppg
