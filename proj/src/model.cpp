#include "rppg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rppg/io.hpp"
#include "rppg/rng.hpp"

namespace rppg {
namespace {

Eigen::Index conv_out_len(Eigen::Index t, const Conv1d& c) {
  const Eigen::Index p = (c.kernel - 1) / 2;
  return (t + 2 * p - c.kernel) / c.stride + 1;
}

Eigen::MatrixXd im2col(const Eigen::Ref<const Eigen::MatrixXd>& x, const Conv1d& c) {
  const Eigen::Index t = x.cols();
  const Eigen::Index t_out = conv_out_len(t, c);
  const Eigen::Index p = (c.kernel - 1) / 2;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(c.in_ch * c.kernel, t_out);
  for (Eigen::Index j = 0; j < t_out; ++j) {
    const Eigen::Index base = j * c.stride - p;
    for (int u = 0; u < c.kernel; ++u) {
      const Eigen::Index src = base + u;
      if (src < 0 || src >= t) continue;
      for (int ch = 0; ch < c.in_ch; ++ch)
        patches(ch * c.kernel + u, j) = x(ch, src);
    }
  }
  return patches;
}

Eigen::MatrixXd conv_forward(const Conv1d& c, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd y = c.weight * im2col(x, c);
  y.colwise() += c.bias;
  return y;
}

// Accumulates weight/bias gradients and, when dx is given, the input
// gradient via the transposed scatter of the patch gradient.
void conv_backward(const Conv1d& c, const Eigen::Ref<const Eigen::MatrixXd>& x,
                   const Eigen::Ref<const Eigen::MatrixXd>& dy, Conv1d& grad,
                   Eigen::MatrixXd* dx) {
  const Eigen::MatrixXd patches = im2col(x, c);
  grad.weight.noalias() += dy * patches.transpose();
  grad.bias += dy.rowwise().sum();
  if (dx == nullptr) return;

  const Eigen::MatrixXd dpatches = c.weight.transpose() * dy;
  const Eigen::Index t = x.cols();
  const Eigen::Index p = (c.kernel - 1) / 2;
  for (Eigen::Index j = 0; j < dy.cols(); ++j) {
    const Eigen::Index base = j * c.stride - p;
    for (int u = 0; u < c.kernel; ++u) {
      const Eigen::Index dst = base + u;
      if (dst < 0 || dst >= t) continue;
      for (int ch = 0; ch < c.in_ch; ++ch)
        (*dx)(ch, dst) += dpatches(ch * c.kernel + u, j);
    }
  }
}

Eigen::MatrixXd upsample2(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd y(x.rows(), 2 * x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    y.col(2 * j) = x.col(j);
    y.col(2 * j + 1) = x.col(j);
  }
  return y;
}

Eigen::MatrixXd upsample2_backward(const Eigen::Ref<const Eigen::MatrixXd>& dy) {
  Eigen::MatrixXd dx(dy.rows(), dy.cols() / 2);
  for (Eigen::Index j = 0; j < dx.cols(); ++j)
    dx.col(j) = dy.col(2 * j) + dy.col(2 * j + 1);
  return dx;
}

Eigen::MatrixXd reflect_pad_right(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  Eigen::Index target_len) {
  if (x.cols() == target_len) return x;
  Eigen::MatrixXd out(x.rows(), target_len);
  out.leftCols(x.cols()) = x;
  for (Eigen::Index j = x.cols(); j < target_len; ++j)
    out.col(j) = x.col(2 * x.cols() - 2 - j);
  return out;
}

struct Cache {
  Eigen::Index orig_len = 0;
  Eigen::MatrixXd padded;
  std::vector<Eigen::MatrixXd> pre;      // stem + stage pre-activations
  std::vector<Eigen::MatrixXd> act;      // relu of the above
  std::vector<Eigen::MatrixXd> pyramid;  // finest to coarsest
  Eigen::VectorXd gap;
};

Conv1d make_conv(int in_ch, int out_ch, int kernel, int stride) {
  Conv1d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.kernel = kernel;
  c.stride = stride;
  c.weight = Eigen::MatrixXd::Zero(out_ch, in_ch * kernel);
  c.bias = Eigen::VectorXd::Zero(out_ch);
  return c;
}

FpnModel make_topology(const FpnConfig& config) {
  FpnModel m;
  m.config = config;
  m.stem = make_conv(config.in_channels, config.base_width, config.stem_kernel, 1);
  for (int s = 1; s <= config.num_stages; ++s)
    m.encoder.push_back(
        make_conv(config.stage_width(s - 1), config.stage_width(s), config.stage_kernel, 2));
  for (int s = 0; s <= config.num_stages; ++s)
    m.lateral.push_back(make_conv(config.stage_width(s), config.pyramid_width, 1, 1));
  m.ppg_head = make_conv(config.pyramid_width, 1, 1, 1);
  m.head_weight = Eigen::MatrixXd::Zero(config.num_targets(), config.pyramid_width);
  m.head_bias = Eigen::VectorXd::Zero(config.num_targets());
  return m;
}

void snap_f32(FpnModel& m) {
  for (auto& view : parameter_views(m))
    view = view.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

ForwardResult forward_impl(const FpnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& traces,
                           Cache* cache) {
  const FpnConfig& cfg = m.config;
  if (traces.rows() != cfg.in_channels)
    throw ShapeMismatch("expected " + std::to_string(cfg.in_channels) + " channels, got " +
                        std::to_string(traces.rows()));
  const Eigen::Index t = traces.cols();
  const Eigen::Index unit = cfg.min_input_length();
  if (t < unit)
    throw InputTooShort("need at least " + std::to_string(unit) + " frames");

  const Eigen::Index padded_len = (t + unit - 1) / unit * unit;
  Eigen::MatrixXd x = reflect_pad_right(traces, padded_len);

  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  c.orig_len = t;
  c.padded = std::move(x);

  c.pre.clear();
  c.act.clear();
  c.pre.push_back(conv_forward(m.stem, c.padded));
  c.act.push_back(c.pre.back().cwiseMax(0.0));
  for (const Conv1d& enc : m.encoder) {
    c.pre.push_back(conv_forward(enc, c.act.back()));
    c.act.push_back(c.pre.back().cwiseMax(0.0));
  }

  const int top = cfg.num_stages;
  c.pyramid.assign(top + 1, Eigen::MatrixXd());
  c.pyramid[top] = conv_forward(m.lateral[top], c.act[top]);
  for (int i = top - 1; i >= 0; --i)
    c.pyramid[i] = conv_forward(m.lateral[i], c.act[i]) + upsample2(c.pyramid[i + 1]);

  c.gap = c.pyramid[top].rowwise().mean();

  ForwardResult out;
  const Eigen::MatrixXd ppg_full = conv_forward(m.ppg_head, c.pyramid[0]);
  out.ppg = ppg_full.row(0).head(t).transpose();
  out.biomarkers = m.head_weight * c.gap + m.head_bias;
  return out;
}

// dppg is in original (cropped) length; padded tail samples get zero grad.
void accumulate_gradients(const FpnModel& m, const Cache& c,
                          const Eigen::Ref<const Eigen::VectorXd>& dppg,
                          const Eigen::Ref<const Eigen::VectorXd>& dbio, FpnModel& g) {
  const int top = m.config.num_stages;

  g.head_weight.noalias() += dbio * c.gap.transpose();
  g.head_bias += dbio;
  const Eigen::VectorXd dgap = m.head_weight.transpose() * dbio;

  std::vector<Eigen::MatrixXd> dpyr(top + 1);
  const Eigen::Index t_top = c.pyramid[top].cols();
  dpyr[top] = (dgap / static_cast<double>(t_top)).replicate(1, t_top);

  Eigen::MatrixXd dppg_full = Eigen::MatrixXd::Zero(1, c.pyramid[0].cols());
  dppg_full.row(0).head(c.orig_len) = dppg.transpose();
  dpyr[0] = Eigen::MatrixXd::Zero(c.pyramid[0].rows(), c.pyramid[0].cols());
  conv_backward(m.ppg_head, c.pyramid[0], dppg_full, g.ppg_head, &dpyr[0]);

  // Walk fine to coarse so each level's gradient is complete before its
  // lateral sees it; the top level already carries the pooling term.
  std::vector<Eigen::MatrixXd> dact(top + 1);
  for (int i = 0; i <= top; ++i)
    dact[i] = Eigen::MatrixXd::Zero(c.act[i].rows(), c.act[i].cols());
  for (int i = 0; i <= top; ++i) {
    conv_backward(m.lateral[i], c.act[i], dpyr[i], g.lateral[i], &dact[i]);
    if (i < top) {
      if (dpyr[i + 1].size() == 0)
        dpyr[i + 1] = upsample2_backward(dpyr[i]);
      else
        dpyr[i + 1] += upsample2_backward(dpyr[i]);
    }
  }

  for (int s = top; s >= 1; --s) {
    const Eigen::MatrixXd dz =
        dact[s].cwiseProduct((c.pre[s].array() > 0.0).cast<double>().matrix());
    conv_backward(m.encoder[s - 1], c.act[s - 1], dz, g.encoder[s - 1], &dact[s - 1]);
  }
  const Eigen::MatrixXd dz0 =
      dact[0].cwiseProduct((c.pre[0].array() > 0.0).cast<double>().matrix());
  conv_backward(m.stem, c.padded, dz0, g.stem, nullptr);
}

}  // namespace

std::vector<std::string> default_biomarker_targets() {
  return {"systolic_pressure", "diastolic_pressure", "glycated_hemoglobin",
          "cholesterol",       "respiratory_rate",   "arterial_stiffness",
          "age",               "bmi",                "stress",
          "saturation",        "sex"};
}

FpnModel make_fpn(const FpnConfig& config, std::uint64_t seed) {
  if (config.in_channels < 1 || config.base_width < 1 || config.pyramid_width < 1 ||
      config.num_stages < 1 || config.stem_kernel < 1 || config.stem_kernel % 2 == 0 ||
      config.stage_kernel < 1 || config.stage_kernel % 2 == 0 || config.targets.empty())
    throw InvalidConfig("bad model configuration");

  FpnModel m = make_topology(config);
  Rng rng(seed);
  auto fill_conv = [&rng](Conv1d& c, bool relu_follows) {
    const double fan_in = static_cast<double>(c.in_ch * c.kernel);
    const double scale = std::sqrt((relu_follows ? 2.0 : 1.0) / fan_in);
    for (Eigen::Index i = 0; i < c.weight.size(); ++i)
      c.weight.data()[i] = rng.normal(0.0, scale);
    c.bias.setConstant(relu_follows ? 0.01 : 0.0);
  };

  fill_conv(m.stem, true);
  for (Conv1d& enc : m.encoder) fill_conv(enc, true);
  for (Conv1d& lat : m.lateral) fill_conv(lat, false);
  fill_conv(m.ppg_head, false);
  const double head_scale = std::sqrt(1.0 / static_cast<double>(config.pyramid_width));
  for (Eigen::Index i = 0; i < m.head_weight.size(); ++i)
    m.head_weight.data()[i] = rng.normal(0.0, head_scale);
  m.head_bias.setZero();

  snap_f32(m);
  return m;
}

std::vector<Eigen::Map<Eigen::VectorXd>> parameter_views(FpnModel& m) {
  std::vector<Eigen::Map<Eigen::VectorXd>> views;
  auto add_mat = [&views](Eigen::MatrixXd& t) { views.emplace_back(t.data(), t.size()); };
  auto add_vec = [&views](Eigen::VectorXd& t) { views.emplace_back(t.data(), t.size()); };
  auto add_conv = [&](Conv1d& c) {
    add_mat(c.weight);
    add_vec(c.bias);
  };
  add_conv(m.stem);
  for (Conv1d& enc : m.encoder) add_conv(enc);
  for (Conv1d& lat : m.lateral) add_conv(lat);
  add_conv(m.ppg_head);
  add_mat(m.head_weight);
  add_vec(m.head_bias);
  return views;
}

Eigen::Index parameter_count(const FpnModel& m) {
  Eigen::Index n = 0;
  for (const auto& view : parameter_views(const_cast<FpnModel&>(m))) n += view.size();
  return n;
}

ForwardResult forward(const FpnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& traces) {
  return forward_impl(m, traces, nullptr);
}

double loss(const ForwardResult& pred, const LossTargets& target) {
  if (pred.ppg.size() != target.ppg.size())
    throw ShapeMismatch("ppg prediction and target lengths differ");
  if (pred.biomarkers.size() != target.biomarkers.size() ||
      target.biomarkers.size() != target.biomarker_mask.size())
    throw ShapeMismatch("biomarker prediction, target, and mask sizes differ");
  if (pred.ppg.size() == 0) throw ShapeMismatch("empty ppg target");
  double l = (pred.ppg - target.ppg).squaredNorm() / static_cast<double>(pred.ppg.size());
  for (Eigen::Index k = 0; k < target.biomarkers.size(); ++k) {
    const double d = pred.biomarkers[k] - target.biomarkers[k];
    l += target.biomarker_mask[k] * d * d;
  }
  return l;
}

AdamState make_adam_state(FpnModel& m) {
  AdamState s;
  for (const auto& view : parameter_views(m)) {
    s.m.push_back(Eigen::VectorXd::Zero(view.size()));
    s.v.push_back(Eigen::VectorXd::Zero(view.size()));
  }
  return s;
}

double loss_gradients(const FpnModel& m, const std::vector<const TrainingSample*>& batch,
                      std::vector<Eigen::VectorXd>& grads) {
  if (batch.empty()) throw InsufficientData("empty batch");

  FpnModel acc = make_topology(m.config);
  double loss_sum = 0.0;
  for (const TrainingSample* sample : batch) {
    Cache cache;
    const ForwardResult pred = forward_impl(m, sample->input, &cache);
    const double sample_loss = loss(pred, sample->targets);
    if (!std::isfinite(sample_loss))
      throw NonFiniteLoss("loss is not finite (check inputs and learning rate)");
    loss_sum += sample_loss;

    const Eigen::Index t = pred.ppg.size();
    const Eigen::VectorXd dppg = 2.0 * (pred.ppg - sample->targets.ppg) / static_cast<double>(t);
    const Eigen::VectorXd dbio = 2.0 * sample->targets.biomarker_mask.cwiseProduct(
                                           pred.biomarkers - sample->targets.biomarkers);
    accumulate_gradients(m, cache, dppg, dbio, acc);
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  grads.clear();
  for (const auto& view : parameter_views(acc)) grads.push_back(view * inv_n);
  return loss_sum * inv_n;
}

double backward_step(FpnModel& m, AdamState& adam,
                     const std::vector<const TrainingSample*>& batch,
                     const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw InvalidConfig("negative learning rate");

  std::vector<Eigen::VectorXd> grads;
  const double mean_loss = loss_gradients(m, batch, grads);

  auto params = parameter_views(m);
  adam.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::VectorXd& g = grads[i];
    adam.m[i] = config.beta1 * adam.m[i] + (1.0 - config.beta1) * g;
    adam.v[i] = config.beta2 * adam.v[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
    const Eigen::VectorXd mhat = adam.m[i] / bc1;
    const Eigen::VectorXd vhat = adam.v[i] / bc2;
    const Eigen::VectorXd denom = (vhat.cwiseSqrt().array() + config.epsilon).matrix();
    params[i] -= config.learning_rate * mhat.cwiseQuotient(denom);
  }
  snap_f32(m);
  return mean_loss;
}

std::vector<EpochLog> train(FpnModel& m, const std::vector<TrainingSample>& samples,
                            const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (samples.empty()) throw InsufficientData("no training samples");
  if (config.epochs < 1 || config.batch_size < 1) throw InvalidConfig("bad epochs/batch size");
  if (!(config.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");

  AdamState adam = make_adam_state(m);
  Rng rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);

    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
      std::vector<const TrainingSample*> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(&samples[order[start + i]]);
      weighted_loss += backward_step(m, adam, batch, config) * static_cast<double>(n);
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = weighted_loss / static_cast<double>(order.size());
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

bool StandardScaler::has(const std::string& target) const {
  return std::find(targets.begin(), targets.end(), target) != targets.end();
}

namespace {
Eigen::Index scaler_index(const StandardScaler& s, const std::string& target) {
  const auto it = std::find(s.targets.begin(), s.targets.end(), target);
  if (it == s.targets.end()) throw Error("scaler has no target '" + target + "'");
  return static_cast<Eigen::Index>(it - s.targets.begin());
}
}  // namespace

double StandardScaler::transform(const std::string& target, double physical) const {
  const Eigen::Index i = scaler_index(*this, target);
  return (physical - mean[i]) / stddev[i];
}

double StandardScaler::inverse(const std::string& target, double scaled) const {
  const Eigen::Index i = scaler_index(*this, target);
  return scaled * stddev[i] + mean[i];
}

StandardScaler fit_scaler(const std::map<std::string, std::vector<double>>& table) {
  StandardScaler s;
  s.mean.resize(static_cast<Eigen::Index>(table.size()));
  s.stddev.resize(static_cast<Eigen::Index>(table.size()));
  Eigen::Index i = 0;
  for (const auto& [name, values] : table) {
    if (values.size() < 2)
      throw InsufficientData("need at least 2 values for target " + name);
    const Eigen::Map<const Eigen::VectorXd> v(values.data(),
                                              static_cast<Eigen::Index>(values.size()));
    const double sd = population_std(v);
    if (sd < 1e-12) throw InsufficientData("zero variance for target " + name);
    s.targets.push_back(name);
    s.mean[i] = v.mean();
    s.stddev[i] = sd;
    ++i;
  }
  return s;
}

std::vector<TrainingSample> make_training_samples(
    const RoiTraceSet& traces, const PpgSignal& reference,
    const std::map<std::string, double>& biomarkers, const StandardScaler& scaler,
    const std::vector<std::string>& model_targets, double window_s) {
  validate(traces);
  validate(reference);
  if (!(window_s > 0.0)) throw InvalidConfig("window_s must be positive");
  const double fps = frame_rate(traces);
  const Eigen::Index w = static_cast<Eigen::Index>(std::llround(window_s * fps));
  if (w < 2) throw InvalidConfig("window covers under 2 frames");

  // Reference value at an arbitrary time, clamped linear interpolation.
  auto ref_at = [&reference](double time_s) {
    const double pos = (time_s - reference.t0_s) * reference.sample_rate_hz;
    const Eigen::Index n = reference.size();
    if (pos <= 0.0) return reference.samples[0];
    if (pos >= static_cast<double>(n - 1)) return reference.samples[n - 1];
    const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    return reference.samples[lo] * (1.0 - frac) + reference.samples[lo + 1] * frac;
  };

  const Eigen::Index k = static_cast<Eigen::Index>(model_targets.size());
  Eigen::VectorXd bio_target = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd bio_mask = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto it = biomarkers.find(model_targets[static_cast<std::size_t>(j)]);
    if (it == biomarkers.end() || !scaler.has(it->first)) continue;
    bio_target[j] = scaler.transform(it->first, it->second);
    bio_mask[j] = 1.0;
  }

  std::vector<TrainingSample> out;
  for (Eigen::Index start = 0; start + w <= traces.num_frames(); start += w) {
    TrainingSample sample;
    sample.input = traces.traces.middleRows(start, w).transpose();
    for (Eigen::Index ch = 0; ch < sample.input.rows(); ++ch) {
      const double mean = sample.input.row(ch).mean();
      const double sd = population_std(sample.input.row(ch).transpose());
      if (sd < 1e-12)
        sample.input.row(ch).setZero();
      else
        sample.input.row(ch) = (sample.input.row(ch).array() - mean) / sd;
    }

    Eigen::VectorXd y(w);
    for (Eigen::Index i = 0; i < w; ++i) y[i] = ref_at(traces.timestamps_s[start + i]);
    const double y_sd = population_std(y);
    if (y_sd < 1e-12) continue;  // flat reference carries no waveform target
    sample.targets.ppg = (y.array() - y.mean()) / y_sd;
    sample.targets.biomarkers = bio_target;
    sample.targets.biomarker_mask = bio_mask;
    out.push_back(std::move(sample));
  }
  return out;
}

PredictOutput predict_recording(const FpnModel& m, const StandardScaler& scaler,
                                const RoiTraceSet& traces) {
  validate(traces);
  Eigen::MatrixXd x = traces.traces.transpose();
  for (Eigen::Index ch = 0; ch < x.rows(); ++ch) {
    const double mean = x.row(ch).mean();
    const double sd = population_std(x.row(ch).transpose());
    if (sd < 1e-12)
      x.row(ch).setZero();
    else
      x.row(ch) = (x.row(ch).array() - mean) / sd;
  }
  const ForwardResult result = forward(m, x);

  PredictOutput out;
  out.ppg.samples = result.ppg;
  out.ppg.sample_rate_hz = frame_rate(traces);
  out.ppg.t0_s = traces.timestamps_s[0];
  for (Eigen::Index k = 0; k < result.biomarkers.size(); ++k) {
    const std::string& name = m.config.targets[static_cast<std::size_t>(k)];
    if (scaler.has(name)) out.biomarkers[name] = scaler.inverse(name, result.biomarkers[k]);
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'R', 'P', 'F', 'P', 'N', '1', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError("truncated checkpoint");
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const FpnModel& m, const std::filesystem::path& path) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  const FpnConfig& c = m.config;
  for (int v : {c.in_channels, c.base_width, c.pyramid_width, c.num_stages, c.stem_kernel,
                c.stage_kernel, c.max_stage_width})
    write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(c.targets.size()));
  for (const std::string& t : c.targets) {
    write_u32(os, static_cast<std::uint32_t>(t.size()));
    os.write(t.data(), static_cast<std::streamsize>(t.size()));
  }
  auto views = parameter_views(const_cast<FpnModel&>(m));
  write_u64(os, views.size());
  for (const auto& view : views) {
    write_u64(os, static_cast<std::uint64_t>(view.size()));
    for (Eigen::Index i = 0; i < view.size(); ++i) {
      const float f = static_cast<float>(view[i]);
      os.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  atomic_write_bytes(path, os.str());
}

FpnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw SchemaError("not a model checkpoint: " + path.string());
  if (read_u32(is) != kVersion) throw SchemaError("unsupported checkpoint version");

  FpnConfig c;
  c.in_channels = static_cast<int>(read_u32(is));
  c.base_width = static_cast<int>(read_u32(is));
  c.pyramid_width = static_cast<int>(read_u32(is));
  c.num_stages = static_cast<int>(read_u32(is));
  c.stem_kernel = static_cast<int>(read_u32(is));
  c.stage_kernel = static_cast<int>(read_u32(is));
  c.max_stage_width = static_cast<int>(read_u32(is));
  const std::uint32_t num_targets = read_u32(is);
  c.targets.clear();
  for (std::uint32_t i = 0; i < num_targets; ++i) {
    const std::uint32_t len = read_u32(is);
    if (len > 4096) throw SchemaError("target name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw SchemaError("truncated checkpoint");
    c.targets.push_back(std::move(name));
  }

  FpnModel m = make_topology(c);
  auto views = parameter_views(m);
  if (read_u64(is) != views.size()) throw SchemaError("tensor count mismatch");
  for (auto& view : views) {
    if (read_u64(is) != static_cast<std::uint64_t>(view.size()))
      throw SchemaError("tensor size mismatch");
    for (Eigen::Index i = 0; i < view.size(); ++i) {
      float f = 0.0f;
      if (!is.read(reinterpret_cast<char*>(&f), sizeof f))
        throw SchemaError("truncated checkpoint");
      view[i] = static_cast<double>(f);
    }
  }
  return m;
}

}  // namespace rppg
