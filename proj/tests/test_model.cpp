#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "rppg/model.hpp"
#include "rppg/rng.hpp"
#include "test_support.hpp"

using namespace rppg;

namespace {

// Plain-loop conv, no im2col, no GEMM: the reference the fast path must match.
Eigen::MatrixXd naive_conv(const Conv1d& c, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::Index p = (c.kernel - 1) / 2;
  const Eigen::Index t_out = (x.cols() + 2 * p - c.kernel) / c.stride + 1;
  Eigen::MatrixXd y(c.out_ch, t_out);
  for (Eigen::Index o = 0; o < c.out_ch; ++o)
    for (Eigen::Index j = 0; j < t_out; ++j) {
      double acc = c.bias[o];
      for (int u = 0; u < c.kernel; ++u) {
        const Eigen::Index src = j * c.stride - p + u;
        if (src < 0 || src >= x.cols()) continue;
        for (int ch = 0; ch < c.in_ch; ++ch)
          acc += c.weight(o, static_cast<Eigen::Index>(ch) * c.kernel + u) * x(ch, src);
      }
      y(o, j) = acc;
    }
  return y;
}

ForwardResult naive_forward(const FpnModel& m, Eigen::MatrixXd x) {
  const Eigen::Index t = x.cols();
  const Eigen::Index unit = m.config.min_input_length();
  const Eigen::Index padded = (t + unit - 1) / unit * unit;
  if (padded != t) {
    Eigen::MatrixXd xp(x.rows(), padded);
    xp.leftCols(t) = x;
    for (Eigen::Index j = t; j < padded; ++j) xp.col(j) = x.col(2 * t - 2 - j);
    x = std::move(xp);
  }

  std::vector<Eigen::MatrixXd> act;
  act.push_back(naive_conv(m.stem, x).cwiseMax(0.0));
  for (const Conv1d& enc : m.encoder) act.push_back(naive_conv(enc, act.back()).cwiseMax(0.0));

  const int top = m.config.num_stages;
  std::vector<Eigen::MatrixXd> pyr(static_cast<std::size_t>(top) + 1);
  pyr[static_cast<std::size_t>(top)] =
      naive_conv(m.lateral[static_cast<std::size_t>(top)], act[static_cast<std::size_t>(top)]);
  for (int i = top - 1; i >= 0; --i) {
    const Eigen::MatrixXd& coarse = pyr[static_cast<std::size_t>(i) + 1];
    Eigen::MatrixXd up(coarse.rows(), coarse.cols() * 2);
    for (Eigen::Index j = 0; j < coarse.cols(); ++j) {
      up.col(2 * j) = coarse.col(j);
      up.col(2 * j + 1) = coarse.col(j);
    }
    pyr[static_cast<std::size_t>(i)] =
        naive_conv(m.lateral[static_cast<std::size_t>(i)], act[static_cast<std::size_t>(i)]) + up;
  }

  Eigen::VectorXd gap = pyr[static_cast<std::size_t>(top)].rowwise().mean();

  ForwardResult out;
  const Eigen::MatrixXd ppg_full = naive_conv(m.ppg_head, pyr[0]);
  out.ppg = ppg_full.row(0).head(t).transpose();
  out.biomarkers = m.head_weight * gap + m.head_bias;
  return out;
}

FpnConfig tiny_config() {
  FpnConfig cfg;
  cfg.in_channels = 3;
  cfg.base_width = 4;
  cfg.pyramid_width = 4;
  cfg.num_stages = 2;
  cfg.max_stage_width = 8;
  cfg.targets = {"age", "weight"};
  return cfg;
}

Eigen::MatrixXd random_input(Eigen::Index channels, Eigen::Index t, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(channels, t);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

TrainingSample random_sample(const FpnConfig& cfg, Eigen::Index t, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSample s;
  s.input = random_input(cfg.in_channels, t, seed + 1000);
  s.targets.ppg.resize(t);
  for (Eigen::Index i = 0; i < t; ++i) s.targets.ppg[i] = rng.normal();
  s.targets.biomarkers.resize(cfg.num_targets());
  s.targets.biomarker_mask.resize(cfg.num_targets());
  for (Eigen::Index i = 0; i < cfg.num_targets(); ++i) {
    s.targets.biomarkers[i] = rng.normal();
    s.targets.biomarker_mask[i] = rng.uniform01() < 0.7 ? 1.0 : 0.0;
  }
  return s;
}

std::vector<double> flat_params(FpnModel& m) {
  std::vector<double> out;
  for (const auto& view : parameter_views(m))
    out.insert(out.end(), view.data(), view.data() + view.size());
  return out;
}

}  // namespace

TEST_CASE("forward keeps the ppg length equal to the input length") {
  const FpnModel m = make_fpn(FpnConfig{}, 0);
  for (Eigen::Index t : {240L, 600L, 2048L}) {
    const ForwardResult out = forward(m, random_input(m.config.in_channels, t, 1));
    CHECK(out.ppg.size() == t);
    CHECK(out.biomarkers.size() == m.config.num_targets());
    CHECK(out.ppg.allFinite());
  }
}

TEST_CASE("an all-zero model maps anything to zero") {
  FpnModel m = make_fpn(tiny_config(), 0);
  for (auto& view : parameter_views(m)) view.setZero();
  const ForwardResult out = forward(m, random_input(3, 100, 2));
  CHECK(out.ppg.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.biomarkers.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches the plain-loop reimplementation") {
  // odd length exercises the reflect padding
  for (const auto& [cfg, t] :
       {std::pair<FpnConfig, Eigen::Index>{tiny_config(), 101},
        std::pair<FpnConfig, Eigen::Index>{FpnConfig{}, 256}}) {
    const FpnModel m = make_fpn(cfg, 0);
    const Eigen::MatrixXd x = random_input(cfg.in_channels, t, 7);
    const ForwardResult fast = forward(m, x);
    const ForwardResult slow = naive_forward(m, x);
    const double scale = slow.ppg.cwiseAbs().maxCoeff();
    CHECK((fast.ppg - slow.ppg).cwiseAbs().maxCoeff() < 1e-9 * scale);
    CHECK((fast.biomarkers - slow.biomarkers).cwiseAbs().maxCoeff() <
          1e-9 * slow.biomarkers.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("forward rejects malformed inputs") {
  const FpnModel m = make_fpn(tiny_config(), 0);
  CHECK_THROWS_AS(forward(m, random_input(5, 100, 3)), ShapeMismatch);
  // min input length is one downsampling unit
  CHECK_THROWS_AS(forward(m, random_input(3, 3, 3)), InputTooShort);
  CHECK_NOTHROW(forward(m, random_input(3, 4, 3)));
}

TEST_CASE("the default topology has the frozen parameter count") {
  FpnModel m = make_fpn(FpnConfig{}, 0);
  CHECK(parameter_count(m) == 96460);
  Eigen::Index via_views = 0;
  for (const auto& view : parameter_views(m)) via_views += view.size();
  CHECK(via_views == parameter_count(m));
}

TEST_CASE("make_fpn is deterministic in the seed and snaps to f32") {
  FpnModel a = make_fpn(tiny_config(), 42);
  FpnModel b = make_fpn(tiny_config(), 42);
  FpnModel c = make_fpn(tiny_config(), 43);
  CHECK(flat_params(a) == flat_params(b));
  CHECK(flat_params(a) != flat_params(c));
  for (const auto& view : parameter_views(a))
    for (Eigen::Index i = 0; i < view.size(); ++i)
      CHECK(view[i] == static_cast<double>(static_cast<float>(view[i])));
}

TEST_CASE("make_fpn rejects a nonsense config") {
  FpnConfig cfg = tiny_config();
  cfg.in_channels = 0;
  CHECK_THROWS_AS(make_fpn(cfg, 0), InvalidConfig);
}

TEST_CASE("loss is the mean ppg square error plus masked biomarker terms") {
  ForwardResult pred;
  pred.ppg.resize(2);
  pred.ppg << 1.0, 2.0;
  pred.biomarkers.resize(2);
  pred.biomarkers << 2.0, -1.0;

  LossTargets target;
  target.ppg = Eigen::VectorXd::Zero(2);
  target.biomarkers = Eigen::VectorXd::Zero(2);
  target.biomarker_mask.resize(2);
  target.biomarker_mask << 1.0, 0.0;

  CHECK(loss(pred, target) == doctest::Approx(2.5 + 4.0).epsilon(1e-12));

  LossTargets same;
  same.ppg = pred.ppg;
  same.biomarkers = pred.biomarkers;
  same.biomarker_mask = Eigen::VectorXd::Ones(2);
  CHECK(loss(pred, same) == 0.0);
}

TEST_CASE("loss rejects mismatched shapes") {
  ForwardResult pred;
  pred.ppg = Eigen::VectorXd::Zero(4);
  pred.biomarkers = Eigen::VectorXd::Zero(2);
  LossTargets target;
  target.ppg = Eigen::VectorXd::Zero(5);
  target.biomarkers = Eigen::VectorXd::Zero(2);
  target.biomarker_mask = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(loss(pred, target), ShapeMismatch);
  target.ppg = Eigen::VectorXd::Zero(4);
  target.biomarker_mask = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(loss(pred, target), ShapeMismatch);
  target.biomarker_mask = Eigen::VectorXd::Ones(2);
  pred.ppg = Eigen::VectorXd::Zero(0);
  target.ppg = Eigen::VectorXd::Zero(0);
  CHECK_THROWS_AS(loss(pred, target), ShapeMismatch);
}

TEST_CASE("analytic gradients agree with central differences") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 5);
  const TrainingSample s1 = random_sample(cfg, 64, 11);
  const TrainingSample s2 = random_sample(cfg, 64, 12);
  const std::vector<const TrainingSample*> batch{&s1, &s2};

  std::vector<Eigen::VectorXd> grads;
  loss_gradients(m, batch, grads);

  auto batch_loss = [&]() {
    double sum = 0.0;
    for (const TrainingSample* s : batch) sum += loss(forward(m, s->input), s->targets);
    return sum / static_cast<double>(batch.size());
  };

  const double eps = 1e-4;
  auto views = parameter_views(m);
  REQUIRE(views.size() == grads.size());
  double worst = 0.0;
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    for (Eigen::Index i = 0; i < views[vi].size(); ++i) {
      const double saved = views[vi][i];
      views[vi][i] = saved + eps;
      const double up = batch_loss();
      views[vi][i] = saved - eps;
      const double down = batch_loss();
      views[vi][i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(fd), std::abs(grads[vi][i]), 1e-6});
      worst = std::max(worst, std::abs(fd - grads[vi][i]) / denom);
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("a zero learning rate leaves the parameters bit-identical") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 5);
  const std::vector<double> before = flat_params(m);
  AdamState adam = make_adam_state(m);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  const TrainingSample s = random_sample(cfg, 64, 3);
  const double l = backward_step(m, adam, {&s}, tc);
  CHECK(l > 0.0);
  CHECK(adam.step == 1);
  CHECK(flat_params(m) == before);
}

TEST_CASE("training overfits a handful of fixed samples") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 1);
  // realizable task: the ppg target is a phase-aligned copy of the input
  std::vector<TrainingSample> samples;
  for (int k = 0; k < 4; ++k) {
    const Eigen::Index t = 64;
    TrainingSample s;
    Eigen::VectorXd wave(t);
    for (Eigen::Index j = 0; j < t; ++j)
      wave[j] = std::sin(2.0 * M_PI * (3.0 + k) * static_cast<double>(j) / static_cast<double>(t));
    s.input.resize(cfg.in_channels, t);
    for (int ch = 0; ch < cfg.in_channels; ++ch)
      s.input.row(ch) = wave.transpose() * (1.0 + 0.1 * ch);
    s.targets.ppg = wave;
    s.targets.biomarkers.resize(cfg.num_targets());
    s.targets.biomarkers << 0.5, -0.3;
    s.targets.biomarker_mask = Eigen::VectorXd::Ones(cfg.num_targets());
    samples.push_back(std::move(s));
  }
  TrainConfig tc;
  tc.epochs = 300;
  tc.batch_size = 4;
  tc.learning_rate = 1e-2;
  const auto logs = train(m, samples, tc);
  REQUIRE(logs.size() == 300);
  CHECK(logs.back().mean_loss < 0.1 * logs.front().mean_loss);
}

TEST_CASE("non-finite samples are rejected") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 0);
  TrainingSample s = random_sample(cfg, 64, 1);
  s.input(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<Eigen::VectorXd> grads;
  CHECK_THROWS_AS(loss_gradients(m, {&s}, grads), NonFiniteLoss);
}

TEST_CASE("training is reproducible from the seed") {
  const FpnConfig cfg = tiny_config();
  std::vector<TrainingSample> samples;
  for (std::uint64_t i = 0; i < 5; ++i) samples.push_back(random_sample(cfg, 64, 40 + i));
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 2;

  FpnModel a = make_fpn(cfg, 9);
  FpnModel b = make_fpn(cfg, 9);
  const auto la = train(a, samples, tc);
  const auto lb = train(b, samples, tc);
  CHECK(flat_params(a) == flat_params(b));
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i].mean_loss == lb[i].mean_loss);
}

TEST_CASE("train validates its configuration") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 0);
  std::vector<TrainingSample> samples{random_sample(cfg, 64, 1)};
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(train(m, samples, tc), InvalidConfig);
  tc.epochs = 1;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(train(m, samples, tc), InvalidConfig);
  tc.learning_rate = 1e-3;
  CHECK_THROWS_AS(train(m, {}, tc), InsufficientData);
}

TEST_CASE("fit_scaler computes per-target population statistics") {
  std::map<std::string, std::vector<double>> table;
  table["age"] = {1.0, 3.0};
  table["weight"] = {50.13, 81.71};
  const StandardScaler s = fit_scaler(table);
  CHECK(s.has("age"));
  CHECK(s.has("weight"));
  CHECK_FALSE(s.has("bmi"));
  CHECK(s.transform("age", 2.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.transform("age", 3.0) == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::Index wi = s.targets[0] == "weight" ? 0 : 1;
  CHECK(s.mean[wi] == doctest::Approx(65.92).epsilon(1e-12));
  CHECK(s.stddev[wi] == doctest::Approx(15.79).epsilon(1e-12));

  for (double v : {50.13, 65.92, 81.71, 100.0})
    CHECK(s.inverse("weight", s.transform("weight", v)) == doctest::Approx(v).epsilon(1e-9));
}

TEST_CASE("fit_scaler rejects unusable targets") {
  std::map<std::string, std::vector<double>> one;
  one["age"] = {40.0};
  CHECK_THROWS_AS(fit_scaler(one), InsufficientData);
  std::map<std::string, std::vector<double>> flat;
  flat["age"] = {40.0, 40.0, 40.0};
  CHECK_THROWS_AS(fit_scaler(flat), InsufficientData);
}

TEST_CASE("make_training_samples cuts non-overlapping standardized windows") {
  const double fps = 30.0;
  const Eigen::Index frames = 1950;  // 65 s, so three full 20 s windows
  RoiTraceSet traces;
  traces.roi_names = {"a"};
  traces.timestamps_s = Eigen::VectorXd::LinSpaced(frames, 0.0, (frames - 1) / fps);
  traces.traces.resize(frames, 3);
  Rng rng(2);
  for (Eigen::Index i = 0; i < frames; ++i) {
    const double tsec = traces.timestamps_s[i];
    traces.traces(i, 0) = 0.7 + 0.01 * std::sin(2.0 * M_PI * 1.2 * tsec) + 1e-3 * rng.normal();
    traces.traces(i, 1) = 0.5 + 0.02 * std::sin(2.0 * M_PI * 1.2 * tsec) + 1e-3 * rng.normal();
    traces.traces(i, 2) = 0.4;  // constant channel must end up zeroed
  }

  PpgSignal reference;
  reference.sample_rate_hz = 100.0;
  reference.samples.resize(7000);
  for (Eigen::Index i = 0; i < 7000; ++i)
    reference.samples[i] = std::sin(2.0 * M_PI * 1.2 * static_cast<double>(i) / 100.0);

  std::map<std::string, std::vector<double>> table;
  table["age"] = {30.0, 50.0};
  const StandardScaler scaler = fit_scaler(table);

  const auto samples = make_training_samples(traces, reference, {{"age", 40.0}},
                                             scaler, {"age", "weight"}, 20.0);
  REQUIRE(samples.size() == 3);
  for (const auto& s : samples) {
    CHECK(s.input.rows() == 3);
    CHECK(s.input.cols() == 600);
    // per-channel standardization
    for (Eigen::Index ch = 0; ch < 2; ++ch) {
      CHECK(std::abs(s.input.row(ch).mean()) < 1e-9);
      CHECK(population_std(s.input.row(ch).transpose()) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(s.input.row(2).cwiseAbs().maxCoeff() == 0.0);
    // reference window standardized too
    CHECK(std::abs(s.targets.ppg.mean()) < 1e-9);
    CHECK(population_std(s.targets.ppg) == doctest::Approx(1.0).epsilon(1e-9));
    // age present and scaled, weight masked out
    CHECK(s.targets.biomarker_mask[0] == 1.0);
    CHECK(s.targets.biomarkers[0] == doctest::Approx(scaler.transform("age", 40.0)));
    CHECK(s.targets.biomarker_mask[1] == 0.0);
    CHECK(s.targets.biomarkers[1] == 0.0);
  }
}

TEST_CASE("make_training_samples interpolates the reference onto frame times") {
  // a ramp reference stays a ramp at the frame times, so the standardized
  // target equals the standardized timestamp vector
  const double fps = 16.0;
  const Eigen::Index frames = 320;
  RoiTraceSet traces;
  traces.roi_names = {"a"};
  traces.timestamps_s = Eigen::VectorXd::LinSpaced(frames, 0.0, (frames - 1) / fps);
  traces.traces = Eigen::MatrixXd::Random(frames, 3);

  PpgSignal reference;
  reference.sample_rate_hz = 100.0;
  reference.samples = Eigen::VectorXd::LinSpaced(2100, 5.0, 8.0);

  const auto samples =
      make_training_samples(traces, reference, {}, StandardScaler{}, {"age"}, 20.0);
  REQUIRE(samples.size() == 1);
  const Eigen::VectorXd expected =
      standardize(PpgSignal{traces.timestamps_s, fps, 0.0}).samples;
  CHECK((samples[0].targets.ppg - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(samples[0].targets.biomarker_mask[0] == 0.0);
}

TEST_CASE("make_training_samples skips flat reference windows") {
  RoiTraceSet traces;
  traces.roi_names = {"a"};
  traces.timestamps_s = Eigen::VectorXd::LinSpaced(600, 0.0, 599.0 / 30.0);
  traces.traces = Eigen::MatrixXd::Random(600, 3);
  PpgSignal flat;
  flat.sample_rate_hz = 100.0;
  flat.samples = Eigen::VectorXd::Ones(2000);
  CHECK(make_training_samples(traces, flat, {}, StandardScaler{}, {"age"}, 20.0).empty());
  CHECK_THROWS_AS(make_training_samples(traces, flat, {}, StandardScaler{}, {"age"}, 0.0),
                  InvalidConfig);
}

TEST_CASE("forward is shift equivariant away from the borders") {
  const FpnModel m = make_fpn(FpnConfig{}, 0);
  const Eigen::MatrixXd x = random_input(m.config.in_channels, 256, 9);
  const Eigen::Index unit = m.config.min_input_length();  // 16
  const ForwardResult a = forward(m, x.leftCols(240));
  const ForwardResult b = forward(m, x.middleCols(unit, 224));
  // b's frame j sees the same receptive field as a's frame j + 16
  double worst = 0.0;
  for (Eigen::Index j = 48; j < 176; ++j)
    worst = std::max(worst, std::abs(b.ppg[j] - a.ppg[j + unit]));
  CHECK(worst < 1e-9 * a.ppg.cwiseAbs().maxCoeff());
}

TEST_CASE("a longer input does not disturb early outputs") {
  const FpnModel m = make_fpn(FpnConfig{}, 0);
  const Eigen::MatrixXd x = random_input(m.config.in_channels, 512, 13);
  const ForwardResult full = forward(m, x);
  const ForwardResult half = forward(m, x.leftCols(256));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < 128; ++j)
    worst = std::max(worst, std::abs(full.ppg[j] - half.ppg[j]));
  CHECK(worst < 1e-9 * full.ppg.cwiseAbs().maxCoeff());
}

TEST_CASE("predict_recording undoes the scaler and names the outputs") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 0);
  for (auto& view : parameter_views(m)) view.setZero();

  RoiTraceSet traces;
  traces.roi_names = {"a"};
  traces.timestamps_s = Eigen::VectorXd::LinSpaced(300, 2.0, 2.0 + 299.0 / 30.0);
  traces.traces = Eigen::MatrixXd::Random(300, 3);

  std::map<std::string, std::vector<double>> table;
  table["age"] = {30.0, 50.0};
  const StandardScaler scaler = fit_scaler(table);

  const PredictOutput out = predict_recording(m, scaler, traces);
  CHECK(out.ppg.size() == 300);
  CHECK(out.ppg.sample_rate_hz == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(out.ppg.t0_s == 2.0);
  CHECK(out.ppg.samples.cwiseAbs().maxCoeff() == 0.0);
  // zero network output maps back to the training mean
  CHECK(out.biomarkers.at("age") == doctest::Approx(40.0).epsilon(1e-12));
  // weight is configured but was never fitted, so it is absent
  CHECK(out.biomarkers.count("weight") == 0);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const FpnConfig cfg = tiny_config();
  FpnModel m = make_fpn(cfg, 77);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "rppgkit_ckpt_roundtrip.bin";
  save_checkpoint(m, path);
  FpnModel loaded = load_checkpoint(path);

  CHECK(loaded.config.targets == cfg.targets);
  CHECK(loaded.config.num_stages == cfg.num_stages);
  CHECK(flat_params(loaded) == flat_params(m));

  const Eigen::MatrixXd x = random_input(cfg.in_channels, 100, 3);
  const ForwardResult a = forward(m, x);
  const ForwardResult b = forward(loaded, x);
  CHECK(a.ppg == b.ppg);
  CHECK(a.biomarkers == b.biomarkers);
  std::filesystem::remove(path);
}

TEST_CASE("load_checkpoint rejects foreign and truncated files") {
  const std::filesystem::path dir = std::filesystem::temp_directory_path();
  const std::filesystem::path garbage = dir / "rppgkit_ckpt_garbage.bin";
  {
    std::ofstream f(garbage, std::ios::binary);
    f << "this is not a checkpoint at all, not even close";
  }
  CHECK_THROWS_AS(load_checkpoint(garbage), SchemaError);
  std::filesystem::remove(garbage);

  FpnModel m = make_fpn(tiny_config(), 1);
  const std::filesystem::path whole = dir / "rppgkit_ckpt_whole.bin";
  save_checkpoint(m, whole);
  std::ifstream in(whole, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::filesystem::path cut = dir / "rppgkit_ckpt_cut.bin";
  {
    std::ofstream f(cut, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() * 6 / 10));
  }
  CHECK_THROWS_AS(load_checkpoint(cut), SchemaError);
  std::filesystem::remove(whole);
  std::filesystem::remove(cut);
}

TEST_CASE("loss_gradients needs a batch") {
  FpnModel m = make_fpn(tiny_config(), 0);
  std::vector<Eigen::VectorXd> grads;
  CHECK_THROWS_AS(loss_gradients(m, {}, grads), InsufficientData);
}
