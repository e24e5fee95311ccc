// Command-line surface over the rppg library. Exit codes: 0 success,
// 1 usage error, 2 data or processing error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rppg/evaluation.hpp"
#include "rppg/filtering.hpp"
#include "rppg/io.hpp"
#include "rppg/model.hpp"
#include "rppg/signal.hpp"
#include "rppg/sync.hpp"
#include "rppg/synth.hpp"
#include "rppg/unsupervised.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Values in a JSON config file override whatever the flags said. Keys are
// the long flag names with dashes turned into underscores.
class ConfigMap {
 public:
  template <class T>
  ConfigMap& bind(const std::string& key, T& var) {
    entries_[key] = [&var](const nlohmann::json& v) { var = v.get<T>(); };
    return *this;
  }

  void apply(const std::string& path) const {
    if (path.empty()) return;
    std::ifstream file(path, std::ios::binary);
    if (!file) throw rppg::SchemaError("cannot open config " + path);
    nlohmann::json j;
    try {
      file >> j;
    } catch (const nlohmann::json::exception& e) {
      throw rppg::SchemaError("bad config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw rppg::SchemaError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = entries_.find(key);
      if (it == entries_.end())
        throw rppg::SchemaError("unknown config key '" + key + "' in " + path);
      try {
        it->second(value);
      } catch (const nlohmann::json::exception& e) {
        throw rppg::SchemaError("bad config value for '" + key + "': " + e.what());
      }
    }
  }

 private:
  std::map<std::string, std::function<void(const nlohmann::json&)>> entries_;
};

void write_json(const fs::path& path, const ordered_json& j) {
  rppg::atomic_write_bytes(path, j.dump(2) + "\n");
}

std::map<std::string, double> biomarker_values(const rppg::RecordingManifest& m) {
  std::map<std::string, double> out;
  for (const auto& [name, bv] : m.biomarkers) out[name] = bv.value;
  return out;
}

std::vector<fs::path> find_manifests(const fs::path& root) {
  if (!fs::exists(root)) throw rppg::SchemaError("no such directory: " + root.string());
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) {
    out.push_back(root);
    return out;
  }
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw rppg::SchemaError("no manifest.json under " + root.string());
  return out;
}

rppg::PpgSignal run_unsupervised(const std::string& method, const rppg::RoiTraceSet& traces) {
  const rppg::RgbTrace rgb = rppg::average_rois(traces);
  if (method == "pos") return rppg::pos(rgb);
  if (method == "chrom") return rppg::chrom(rgb);
  if (method == "pbv") return rppg::pbv(rgb);
  if (method == "omit") return rppg::omit(rgb);
  throw rppg::InvalidConfig("unknown method '" + method + "'");
}

std::string cpu_model_name() {
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    const auto colon = line.find(':');
    if (line.rfind("model name", 0) == 0 && colon != std::string::npos) {
      const auto start = line.find_first_not_of(" \t", colon + 1);
      return start == std::string::npos ? "" : line.substr(start);
    }
  }
  return "unknown";
}

// ---- synth ----------------------------------------------------------------

struct SynthOpts {
  std::string out;
  std::string config;
  rppg::SynthConfig cfg;
  std::vector<double> baseline;
  std::vector<double> gain;
};

void setup_synth(CLI::App& app, SynthOpts& o) {
  CLI::App* sub = app.add_subcommand("synth", "Generate a synthetic recording");
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--duration", o.cfg.duration_s, "Length in seconds");
  sub->add_option("--fps", o.cfg.fps, "Video frame rate");
  sub->add_option("--ppg-rate", o.cfg.ppg_rate_hz, "Reference PPG sample rate");
  sub->add_option("--hr", o.cfg.hr_bpm, "Heart rate in bpm");
  sub->add_option("--drift", o.cfg.hr_drift_bpm_per_min, "Heart-rate drift in bpm per minute");
  sub->add_option("--snr", o.cfg.noise_snr_db, "Per-channel SNR in dB (omit for noiseless)");
  sub->add_option("--video-shift", o.cfg.injected_video_shift_s,
                  "Injected camera clock shift in seconds");
  sub->add_option("--ppg-shift", o.cfg.injected_ppg_shift_samples,
                  "Injected reference shift in samples");
  sub->add_option("--seed", o.cfg.seed, "Random seed");
  sub->add_option("--baseline", o.baseline, "Baseline R,G,B")->expected(3);
  sub->add_option("--gain", o.gain, "Pulse gain per channel R,G,B")->expected(3);
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("out", o.out)
        .bind("duration", o.cfg.duration_s)
        .bind("fps", o.cfg.fps)
        .bind("ppg_rate", o.cfg.ppg_rate_hz)
        .bind("hr", o.cfg.hr_bpm)
        .bind("drift", o.cfg.hr_drift_bpm_per_min)
        .bind("snr", o.cfg.noise_snr_db)
        .bind("video_shift", o.cfg.injected_video_shift_s)
        .bind("ppg_shift", o.cfg.injected_ppg_shift_samples)
        .bind("seed", o.cfg.seed)
        .bind("baseline", o.baseline)
        .bind("gain", o.gain)
        .apply(o.config);
    if (!o.baseline.empty()) {
      if (o.baseline.size() != 3) throw rppg::InvalidConfig("baseline needs 3 values");
      o.cfg.baseline_rgb = Eigen::Vector3d(o.baseline[0], o.baseline[1], o.baseline[2]);
    }
    if (!o.gain.empty()) {
      if (o.gain.size() != 3) throw rppg::InvalidConfig("gain needs 3 values");
      o.cfg.pulse_gain_rgb = Eigen::Vector3d(o.gain[0], o.gain[1], o.gain[2]);
    }

    const rppg::SyntheticRecording rec = rppg::generate_synthetic_recording(o.cfg);
    const fs::path dir(o.out);
    fs::create_directories(dir);
    rppg::write_trace_file(dir / "traces.csv", rec.traces);
    rppg::write_ppg_file(dir / "reference_ppg.csv", rec.reference_ppg);
    rppg::write_clock_label_file(dir / "clock_labels.csv", rec.clock_labels);
    rppg::write_manifest(dir / "manifest.json", rec.manifest);
    ordered_json truth;
    truth["hr_bpm"] = rec.ground_truth.hr_bpm;
    truth["hr_drift_bpm_per_min"] = rec.ground_truth.hr_drift_bpm_per_min;
    truth["mean_hr_bpm"] = rec.ground_truth.mean_hr_bpm;
    truth["video_shift_s"] = rec.ground_truth.video_shift_s;
    truth["ppg_shift_samples"] = rec.ground_truth.ppg_shift_samples;
    truth["seed"] = rec.ground_truth.seed;
    write_json(dir / "ground_truth.json", truth);
    std::cout << "wrote " << dir.string() << "\n";
  });
}

// ---- extract ---------------------------------------------------------------

struct ExtractOpts {
  std::string frames;
  std::string format = "ppm";
  long width = 0;
  long height = 0;
  std::string masks;
  double fps = 30.0;
  double t0 = 0.0;
  std::string out;
  std::string config;
};

void setup_extract(CLI::App& app, ExtractOpts& o) {
  CLI::App* sub = app.add_subcommand("extract", "Average region colors over video frames");
  sub->add_option("--frames", o.frames, "Directory of frame files")->required();
  sub->add_option("--format", o.format, "Frame file format")
      ->check(CLI::IsMember({"ppm", "raw"}));
  sub->add_option("--width", o.width, "Frame width (raw format)");
  sub->add_option("--height", o.height, "Frame height (raw format)");
  sub->add_option("--masks", o.masks, "Region polygon file (defaults to the built-in layout)");
  sub->add_option("--fps", o.fps, "Frame rate for the timestamps");
  sub->add_option("--t0", o.t0, "Timestamp of the first frame");
  sub->add_option("--out", o.out, "Output trace file")->required();
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("frames", o.frames)
        .bind("format", o.format)
        .bind("width", o.width)
        .bind("height", o.height)
        .bind("masks", o.masks)
        .bind("fps", o.fps)
        .bind("t0", o.t0)
        .bind("out", o.out)
        .apply(o.config);

    const bool raw = o.format == "raw";
    if (raw && (o.width < 1 || o.height < 1))
      throw rppg::InvalidConfig("raw frames need --width and --height");
    if (!(o.fps > 0.0)) throw rppg::InvalidRate("fps must be positive");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(o.frames))
      if (entry.is_regular_file() &&
          entry.path().extension() == (raw ? ".rgb" : ".ppm"))
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw rppg::SchemaError("no frame files in " + o.frames);

    std::vector<rppg::RoiMask> masks;
    rppg::RoiTraceSet traces;
    const Eigen::Index n = static_cast<Eigen::Index>(files.size());
    traces.timestamps_s.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const rppg::FrameImage frame =
          raw ? rppg::read_planar_rgb(files[static_cast<std::size_t>(i)], o.width, o.height)
              : rppg::read_ppm(files[static_cast<std::size_t>(i)]);
      if (masks.empty()) {
        if (o.masks.empty()) {
          masks = rppg::default_roi_masks(frame.width(), frame.height());
        } else {
          masks = rppg::parse_mask_file(o.masks);
          // mask files carry unit-square coordinates
          for (auto& m : masks)
            for (auto& v : m.polygon) {
              v.x() *= static_cast<double>(frame.width());
              v.y() *= static_cast<double>(frame.height());
            }
        }
        for (const auto& m : masks) traces.roi_names.push_back(m.name);
        traces.traces.resize(n, 3 * static_cast<Eigen::Index>(masks.size()));
      }
      traces.timestamps_s[i] = o.t0 + static_cast<double>(i) / o.fps;
      for (std::size_t m = 0; m < masks.size(); ++m) {
        const Eigen::Vector3d mean = rppg::roi_mean(frame, masks[m]);
        traces.traces.block(i, static_cast<Eigen::Index>(3 * m), 1, 3) = mean.transpose();
      }
    }
    rppg::write_trace_file(o.out, traces);
    std::cout << "wrote " << o.out << " (" << n << " frames, " << masks.size()
              << " regions)\n";
  });
}

// ---- rppg ------------------------------------------------------------------

struct RppgOpts {
  std::string traces;
  std::string method;
  std::string out;
  std::string checkpoint;
  std::string scaler;
  std::string biomarkers_out;
  std::string config;
};

void setup_rppg(CLI::App& app, RppgOpts& o) {
  CLI::App* sub = app.add_subcommand("rppg", "Reconstruct the pulse from region traces");
  sub->add_option("--traces", o.traces, "Input trace file")->required();
  sub->add_option("--method", o.method, "Reconstruction method")
      ->required()
      ->check(CLI::IsMember({"pos", "chrom", "pbv", "omit", "model"}));
  sub->add_option("--out", o.out, "Output PPG file")->required();
  sub->add_option("--checkpoint", o.checkpoint, "Model checkpoint (method=model)");
  sub->add_option("--scaler", o.scaler, "Target scaler file (method=model)");
  sub->add_option("--biomarkers-out", o.biomarkers_out,
                  "Where to write predicted biomarkers (method=model)");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("traces", o.traces)
        .bind("method", o.method)
        .bind("out", o.out)
        .bind("checkpoint", o.checkpoint)
        .bind("scaler", o.scaler)
        .bind("biomarkers_out", o.biomarkers_out)
        .apply(o.config);

    const rppg::RoiTraceSet traces = rppg::parse_trace_file(o.traces);
    if (o.method == "model") {
      if (o.checkpoint.empty() || o.scaler.empty())
        throw rppg::InvalidConfig("method=model needs --checkpoint and --scaler");
      const rppg::FpnModel model = rppg::load_checkpoint(o.checkpoint);
      const rppg::StandardScaler scaler = rppg::load_scaler(o.scaler);
      const rppg::PredictOutput pred = rppg::predict_recording(model, scaler, traces);
      rppg::write_ppg_file(o.out, pred.ppg);
      if (!o.biomarkers_out.empty()) {
        ordered_json j = ordered_json::object();
        for (const auto& [name, value] : pred.biomarkers) j[name] = value;
        write_json(o.biomarkers_out, j);
      }
    } else {
      rppg::write_ppg_file(o.out, run_unsupervised(o.method, traces));
    }
    std::cout << "wrote " << o.out << "\n";
  });
}

// ---- filter ----------------------------------------------------------------

struct FilterOpts {
  std::string in;
  std::string out;
  int order = 4;
  double low = 0.4;
  double high = 8.0;
  double atten = 30.0;
  std::string save_design;
  std::string config;
};

void setup_filter(CLI::App& app, FilterOpts& o) {
  CLI::App* sub = app.add_subcommand("filter", "Zero-phase band-pass a PPG file");
  sub->add_option("--in", o.in, "Input PPG file")->required();
  sub->add_option("--out", o.out, "Output PPG file")->required();
  sub->add_option("--order", o.order, "Analog prototype order (even)");
  sub->add_option("--low", o.low, "Lower stopband edge in Hz");
  sub->add_option("--high", o.high, "Upper stopband edge in Hz");
  sub->add_option("--atten", o.atten, "Stopband attenuation in dB");
  sub->add_option("--save-design", o.save_design, "Also write the filter sections here");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("in", o.in)
        .bind("out", o.out)
        .bind("order", o.order)
        .bind("low", o.low)
        .bind("high", o.high)
        .bind("atten", o.atten)
        .bind("save_design", o.save_design)
        .apply(o.config);

    const rppg::PpgSignal input = rppg::parse_ppg_file(o.in);
    const rppg::IirFilter filter =
        rppg::design_cheby2_bandpass(o.order, o.low, o.high, o.atten, input.sample_rate_hz);
    rppg::write_ppg_file(o.out, rppg::filtfilt(filter, input));
    if (!o.save_design.empty()) rppg::save_filter(filter, o.save_design);
    std::cout << "wrote " << o.out << "\n";
  });
}

// ---- hr --------------------------------------------------------------------

struct HrOpts {
  std::string input;
  double band_lo = 0.5;
  double band_hi = 3.0;
  std::string out;
  std::string config;
};

void setup_hr(CLI::App& app, HrOpts& o) {
  CLI::App* sub = app.add_subcommand("hr", "Estimate heart rate from a PPG file");
  sub->add_option("input", o.input, "PPG file")->required();
  sub->add_option("--band-lo", o.band_lo, "Search band lower edge in Hz");
  sub->add_option("--band-hi", o.band_hi, "Search band upper edge in Hz");
  sub->add_option("--out", o.out, "Also write the estimate as JSON here");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("input", o.input)
        .bind("band_lo", o.band_lo)
        .bind("band_hi", o.band_hi)
        .bind("out", o.out)
        .apply(o.config);

    const rppg::HrEstimate est =
        rppg::hr_from_ppg(rppg::parse_ppg_file(o.input), o.band_lo, o.band_hi);
    std::printf("%.1f\n", est.bpm);
    if (!o.out.empty()) {
      ordered_json j;
      j["hr_bpm"] = est.bpm;
      j["peak_power_fraction"] = est.peak_power_fraction;
      write_json(o.out, j);
    }
  });
}

// ---- sync-video ------------------------------------------------------------

struct SyncVideoOpts {
  std::vector<std::string> inputs;
  std::string out;
  std::string config;
};

void setup_sync_video(CLI::App& app, SyncVideoOpts& o) {
  CLI::App* sub =
      app.add_subcommand("sync-video", "Estimate camera clock shifts from clock labels");
  sub->add_option("inputs", o.inputs, "Clock label files")->required()->expected(-1);
  sub->add_option("--out", o.out, "Also write the estimates as JSON here");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap().bind("inputs", o.inputs).bind("out", o.out).apply(o.config);

    ordered_json cameras = ordered_json::array();
    std::vector<rppg::ShiftEstimate> estimates;
    for (const std::string& path : o.inputs) {
      const rppg::ClockLabelStream cleansed =
          rppg::cleanse_labels(rppg::parse_clock_label_file(path));
      const rppg::ShiftEstimate est = rppg::record_time_shift(cleansed);
      estimates.push_back(est);
      ordered_json c;
      c["camera_id"] = cleansed.camera_id;
      c["shift_s"] = est.shift_s;
      c["num_transitions"] = est.num_transitions;
      cameras.push_back(c);
      std::printf("%s: shift %.6f s over %d transitions\n", cleansed.camera_id.c_str(),
                  est.shift_s, est.num_transitions);
    }
    ordered_json j;
    j["cameras"] = cameras;
    if (estimates.size() == 2) {
      const double delta = rppg::pairwise_camera_delta(estimates[0], estimates[1]);
      j["delta_s"] = delta;
      std::printf("delta %.6f s\n", delta);
    }
    if (!o.out.empty()) write_json(o.out, j);
  });
}

// ---- sync-ppg --------------------------------------------------------------

struct SyncPpgOpts {
  std::string reference;
  std::string recovered;
  long max_shift = 150;
  std::string out;
  std::string config;
};

void setup_sync_ppg(CLI::App& app, SyncPpgOpts& o) {
  CLI::App* sub =
      app.add_subcommand("sync-ppg", "Align a recovered PPG against the reference");
  sub->add_option("--reference", o.reference, "Reference PPG file")->required();
  sub->add_option("--recovered", o.recovered, "Recovered PPG file")->required();
  sub->add_option("--max-shift", o.max_shift, "Largest shift to search, in samples");
  sub->add_option("--out", o.out, "Also write the result as JSON here");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("reference", o.reference)
        .bind("recovered", o.recovered)
        .bind("max_shift", o.max_shift)
        .bind("out", o.out)
        .apply(o.config);

    const rppg::PpgSignal reference = rppg::parse_ppg_file(o.reference);
    rppg::PpgSignal recovered = rppg::parse_ppg_file(o.recovered);
    if (recovered.sample_rate_hz != reference.sample_rate_hz)
      recovered = rppg::resample_linear(recovered, reference.sample_rate_hz);
    const rppg::AlignResult result = rppg::align_ppg(reference, recovered, o.max_shift);
    std::printf("shift %ld samples, correlation %.4f\n", result.shift_samples,
                result.correlation);
    if (!o.out.empty()) {
      ordered_json j;
      j["shift_samples"] = result.shift_samples;
      j["correlation"] = result.correlation;
      write_json(o.out, j);
    }
  });
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string out;
  int epochs = 30;
  double lr = 1e-3;
  int batch = 8;
  double window = 20.0;
  std::uint64_t seed = 0;
  std::string targets;
  std::string config;
};

void setup_train(CLI::App& app, TrainOpts& o) {
  CLI::App* sub = app.add_subcommand("train", "Train the pulse model on a recording set");
  sub->add_option("--data", o.data, "Directory scanned recursively for manifest.json")
      ->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--epochs", o.epochs, "Training epochs");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--batch", o.batch, "Batch size");
  sub->add_option("--window", o.window, "Training window length in seconds");
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--targets", o.targets, "Comma-separated biomarker targets");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("data", o.data)
        .bind("out", o.out)
        .bind("epochs", o.epochs)
        .bind("lr", o.lr)
        .bind("batch", o.batch)
        .bind("window", o.window)
        .bind("seed", o.seed)
        .bind("targets", o.targets)
        .apply(o.config);

    rppg::FpnConfig cfg;
    if (!o.targets.empty()) {
      cfg.targets.clear();
      std::istringstream is(o.targets);
      std::string name;
      while (std::getline(is, name, ','))
        if (!name.empty()) cfg.targets.push_back(name);
    }

    const std::vector<fs::path> manifests = find_manifests(o.data);
    std::vector<rppg::RoiTraceSet> traces;
    std::vector<rppg::PpgSignal> refs;
    std::vector<std::map<std::string, double>> bios;
    rppg::BiomarkerTable table;
    for (const fs::path& path : manifests) {
      const rppg::RecordingManifest manifest = rppg::parse_manifest(path, false);
      const fs::path base = path.parent_path();
      traces.push_back(rppg::parse_trace_file(base / manifest.trace_path));
      refs.push_back(rppg::parse_ppg_file(base / manifest.reference_ppg_path));
      bios.push_back(biomarker_values(manifest));
      for (const auto& [name, value] : bios.back()) table[name].push_back(value);
    }

    // Only targets the model predicts and that actually vary can be scaled.
    rppg::BiomarkerTable fit_table;
    for (const auto& [name, values] : table) {
      if (std::find(cfg.targets.begin(), cfg.targets.end(), name) == cfg.targets.end())
        continue;
      if (values.size() < 2) continue;
      const Eigen::Map<const Eigen::VectorXd> v(values.data(),
                                                static_cast<Eigen::Index>(values.size()));
      if (rppg::population_std(v) <= 0.0) continue;
      fit_table[name] = values;
    }
    const rppg::StandardScaler scaler = rppg::fit_scaler(fit_table);

    std::vector<rppg::TrainingSample> samples;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      auto recording_samples = rppg::make_training_samples(traces[i], refs[i], bios[i], scaler,
                                                           cfg.targets, o.window);
      for (auto& s : recording_samples) samples.push_back(std::move(s));
    }
    if (samples.empty()) throw rppg::InsufficientData("no training windows in " + o.data);

    rppg::FpnModel model = rppg::make_fpn(cfg, o.seed);
    rppg::TrainConfig tc;
    tc.window_s = o.window;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch;
    tc.epochs = o.epochs;
    tc.seed = o.seed;

    std::ostringstream log;
    rppg::train(model, samples, tc, [&log](const rppg::EpochLog& e) {
      ordered_json j;
      j["epoch"] = e.epoch;
      j["mean_loss"] = e.mean_loss;
      log << j.dump() << "\n";
      std::fprintf(stderr, "epoch %d loss %.6f\n", e.epoch, e.mean_loss);
    });

    const fs::path dir(o.out);
    fs::create_directories(dir);
    rppg::atomic_write_bytes(dir / "train_log.jsonl", log.str());
    rppg::save_checkpoint(model, dir / "checkpoint.bin");
    rppg::save_scaler(scaler, dir / "scaler.json");
    std::cout << "trained on " << samples.size() << " windows from " << manifests.size()
              << " recordings, " << rppg::parameter_count(model) << " parameters\n";
  });
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
  std::string data;
  std::string method;
  std::string checkpoint;
  std::string scaler;
  std::string out;
  std::string format = "jsonl";
  int jobs = 1;
  double segment = 10.0;
  std::string model_name;
  std::string dataset_name;
  std::string config;
};

void setup_eval(CLI::App& app, EvalOpts& o) {
  CLI::App* sub = app.add_subcommand("eval", "Evaluate a method over a recording set");
  sub->add_option("--data", o.data, "Directory scanned recursively for manifest.json")
      ->required();
  sub->add_option("--method", o.method, "Prediction method")
      ->required()
      ->check(CLI::IsMember({"pos", "chrom", "pbv", "omit", "model"}));
  sub->add_option("--checkpoint", o.checkpoint, "Model checkpoint (method=model)");
  sub->add_option("--scaler", o.scaler, "Target scaler file (method=model)");
  sub->add_option("--out", o.out, "Report file")->required();
  sub->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  sub->add_option("--jobs", o.jobs, "Worker threads");
  sub->add_option("--segment", o.segment, "Heart-rate segment length in seconds");
  sub->add_option("--model-name", o.model_name, "Name in the report (defaults to the method)");
  sub->add_option("--dataset-name", o.dataset_name,
                  "Name in the report (defaults to the data directory)");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("data", o.data)
        .bind("method", o.method)
        .bind("checkpoint", o.checkpoint)
        .bind("scaler", o.scaler)
        .bind("out", o.out)
        .bind("format", o.format)
        .bind("jobs", o.jobs)
        .bind("segment", o.segment)
        .bind("model_name", o.model_name)
        .bind("dataset_name", o.dataset_name)
        .apply(o.config);
    if (o.jobs < 1) throw rppg::InvalidConfig("jobs must be at least 1");

    const std::vector<fs::path> manifests = find_manifests(o.data);

    std::optional<rppg::FpnModel> model;
    std::optional<rppg::StandardScaler> scaler;
    if (o.method == "model") {
      if (o.checkpoint.empty() || o.scaler.empty())
        throw rppg::InvalidConfig("method=model needs --checkpoint and --scaler");
      model = rppg::load_checkpoint(o.checkpoint);
      scaler = rppg::load_scaler(o.scaler);
    }

    struct Slot {
      std::optional<rppg::RecordingPrediction> pred;
      std::string failure;
    };
    std::vector<Slot> slots(manifests.size());
    std::atomic<std::size_t> cursor{0};

    auto process = [&](std::size_t i) {
      const fs::path& path = manifests[i];
      const std::string id = path.parent_path().filename().string();
      try {
        const rppg::RecordingManifest manifest = rppg::parse_manifest(path, false);
        const fs::path base = path.parent_path();
        const rppg::RoiTraceSet traces = rppg::parse_trace_file(base / manifest.trace_path);

        rppg::RecordingPrediction pred;
        pred.recording_id = id;
        pred.reference_ppg = rppg::parse_ppg_file(base / manifest.reference_ppg_path);
        pred.true_biomarkers = biomarker_values(manifest);
        if (o.method == "model") {
          const rppg::PredictOutput out = rppg::predict_recording(*model, *scaler, traces);
          pred.predicted_ppg = out.ppg;
          pred.predicted_biomarkers = out.biomarkers;
        } else {
          rppg::PpgSignal raw = run_unsupervised(o.method, traces);
          pred.predicted_ppg =
              rppg::filtfilt(rppg::default_bandpass(raw.sample_rate_hz), raw);
        }
        slots[i].pred = std::move(pred);
      } catch (const rppg::Error& e) {
        slots[i].failure = id + ": " + e.what();
      }
    };

    auto worker = [&]() {
      for (std::size_t i = cursor.fetch_add(1); i < manifests.size();
           i = cursor.fetch_add(1))
        process(i);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < o.jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<rppg::RecordingPrediction> predictions;
    std::vector<std::string> load_failures;
    for (auto& slot : slots) {
      if (slot.pred)
        predictions.push_back(std::move(*slot.pred));
      else
        load_failures.push_back(slot.failure);
    }

    rppg::MetricReport report = rppg::evaluate_suite(predictions, o.segment);
    report.model_name = o.model_name.empty() ? o.method : o.model_name;
    report.dataset_name = o.dataset_name.empty()
                              ? fs::path(o.data).filename().string()
                              : o.dataset_name;
    report.num_recordings = static_cast<int>(manifests.size());
    report.num_failed += static_cast<int>(load_failures.size());
    for (auto& f : load_failures) report.failures.push_back(std::move(f));

    rppg::write_report(report, o.out,
                       o.format == "csv" ? rppg::ReportFormat::csv : rppg::ReportFormat::jsonl);
    for (const std::string& f : report.failures) std::cerr << "failed: " << f << "\n";
    std::printf("hr mae %.3f bpm, ppg mae %.4f over %d recordings (%d failed)\n",
                report.hr_mae_bpm, report.ppg_mae, report.num_recordings, report.num_failed);
  });
}

// ---- bench -----------------------------------------------------------------

struct BenchOpts {
  std::string checkpoint;
  double segment = 20.0;
  double fps = 30.0;
  int reps = 200;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

void setup_bench(CLI::App& app, BenchOpts& o) {
  CLI::App* sub = app.add_subcommand("bench", "Time forward passes of the pulse model");
  sub->add_option("--checkpoint", o.checkpoint,
                  "Model checkpoint (defaults to a freshly initialized default model)");
  sub->add_option("--segment", o.segment, "Segment length in seconds");
  sub->add_option("--fps", o.fps, "Frame rate of the timed segments");
  sub->add_option("--reps", o.reps, "Timed repetitions after 10 warmup passes");
  sub->add_option("--seed", o.seed, "Random seed for the generated traces");
  sub->add_option("--out", o.out, "Also write the timing record as JSON here");
  sub->add_option("--config", o.config, "JSON file whose values override the flags")
      ->envname("RPPGKIT_CONFIG");

  sub->callback([&o]() {
    ConfigMap()
        .bind("checkpoint", o.checkpoint)
        .bind("segment", o.segment)
        .bind("fps", o.fps)
        .bind("reps", o.reps)
        .bind("seed", o.seed)
        .bind("out", o.out)
        .apply(o.config);

    const rppg::FpnModel model = o.checkpoint.empty()
                                     ? rppg::make_fpn(rppg::FpnConfig{}, 0)
                                     : rppg::load_checkpoint(o.checkpoint);
    const rppg::BenchResult r =
        rppg::bench_inference(model, o.segment, o.fps, o.reps, o.seed);
    std::printf("mean %.3f ms, p50 %.3f ms, p95 %.3f ms over %d reps (%lld frames)\n",
                r.mean_ms, r.p50_ms, r.p95_ms, r.repetitions,
                static_cast<long long>(r.segment_frames));
    if (!o.out.empty()) {
      ordered_json j;
      j["mean_ms"] = r.mean_ms;
      j["p50_ms"] = r.p50_ms;
      j["p95_ms"] = r.p95_ms;
      j["repetitions"] = r.repetitions;
      j["segment_frames"] = r.segment_frames;
      j["hardware"] = cpu_model_name();
      write_json(o.out, j);
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rppgkit: pulse reconstruction, filtering, synchronization, and evaluation\n"
               "for remote-photoplethysmography recordings"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  ExtractOpts extract_opts;
  RppgOpts rppg_opts;
  FilterOpts filter_opts;
  HrOpts hr_opts;
  SyncVideoOpts sync_video_opts;
  SyncPpgOpts sync_ppg_opts;
  TrainOpts train_opts;
  EvalOpts eval_opts;
  BenchOpts bench_opts;

  setup_synth(app, synth_opts);
  setup_extract(app, extract_opts);
  setup_rppg(app, rppg_opts);
  setup_filter(app, filter_opts);
  setup_hr(app, hr_opts);
  setup_sync_video(app, sync_video_opts);
  setup_sync_ppg(app, sync_ppg_opts);
  setup_train(app, train_opts);
  setup_eval(app, eval_opts);
  setup_bench(app, bench_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const rppg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
