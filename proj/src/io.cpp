#include "rppg/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rppg/rng.hpp"

namespace rppg {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& token, int lineno) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, v);
  if (result.ec != std::errc() || result.ptr != end)
    throw SchemaError("bad number '" + token + "' at line " + std::to_string(lineno));
  return v;
}

long parse_long(const std::string& token, int lineno) {
  long v = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, v);
  if (result.ec != std::errc() || result.ptr != end)
    throw SchemaError("bad integer '" + token + "' at line " + std::to_string(lineno));
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw SchemaError("cannot open " + path.string());
  std::ostringstream os;
  os << file.rdbuf();
  return os.str();
}

// Strips one trailing '\r' so CRLF fixtures parse too.
std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void atomic_write_bytes(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp =
      path.string() + ".tmp" + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream file(tmp, std::ios::binary);
    if (!file) throw Error("cannot open " + tmp.string() + " for writing");
    file.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!file) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

void write_trace_file(const std::filesystem::path& path, const RoiTraceSet& traces) {
  validate(traces);
  std::ostringstream os;
  os << "timestamp_s";
  for (const std::string& name : traces.roi_names)
    os << "," << name << ".r," << name << ".g," << name << ".b";
  os << "\n";
  for (Eigen::Index i = 0; i < traces.num_frames(); ++i) {
    os << g17(traces.timestamps_s[i]);
    for (Eigen::Index c = 0; c < traces.traces.cols(); ++c)
      os << "," << g17(traces.traces(i, c));
    os << "\n";
  }
  atomic_write_bytes(path, os.str());
}

RoiTraceSet parse_trace_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw SchemaError("empty trace file " + path.string());

  const std::vector<std::string> header = split(lines[0], ',');
  if (header.empty() || header[0] != "timestamp_s")
    throw SchemaError("first column must be timestamp_s at line 1");
  if (header.size() < 4 || (header.size() - 1) % 3 != 0)
    throw SchemaError("expected roi triplets of .r/.g/.b columns at line 1");

  RoiTraceSet traces;
  for (std::size_t c = 1; c < header.size(); c += 3) {
    const std::string base = header[c].substr(0, header[c].rfind('.'));
    if (header[c] != base + ".r" || header[c + 1] != base + ".g" ||
        header[c + 2] != base + ".b")
      throw SchemaError("bad roi column group starting at '" + header[c] + "' at line 1");
    traces.roi_names.push_back(base);
  }

  const Eigen::Index cols = static_cast<Eigen::Index>(header.size()) - 1;
  const Eigen::Index rows = static_cast<Eigen::Index>(lines.size()) - 1;
  if (rows < 1) throw SchemaError("trace file has no data rows");
  traces.timestamps_s.resize(rows);
  traces.traces.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int lineno = static_cast<int>(i) + 2;
    const std::vector<std::string> fields = split(lines[static_cast<std::size_t>(i) + 1], ',');
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1)
      throw SchemaError("expected " + std::to_string(cols + 1) + " fields at line " +
                        std::to_string(lineno));
    traces.timestamps_s[i] = parse_double(fields[0], lineno);
    for (Eigen::Index c = 0; c < cols; ++c)
      traces.traces(i, c) = parse_double(fields[static_cast<std::size_t>(c) + 1], lineno);
  }
  validate(traces);
  return traces;
}

void write_ppg_file(const std::filesystem::path& path, const PpgSignal& signal) {
  validate(signal);
  std::ostringstream os;
  os << "# sample_rate_hz=" << g17(signal.sample_rate_hz) << "\n";
  os << "# t0_s=" << g17(signal.t0_s) << "\n";
  os << "value\n";
  for (Eigen::Index i = 0; i < signal.size(); ++i) os << g17(signal.samples[i]) << "\n";
  atomic_write_bytes(path, os.str());
}

PpgSignal parse_ppg_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  PpgSignal signal;
  bool have_rate = false;
  bool in_data = false;
  std::vector<double> values;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      const std::string val = line.substr(eq + 1);
      if (key == "sample_rate_hz") {
        signal.sample_rate_hz = parse_double(val, lineno);
        have_rate = true;
      } else if (key == "t0_s") {
        signal.t0_s = parse_double(val, lineno);
      }
      continue;
    }
    if (!in_data) {
      if (line != "value")
        throw SchemaError("expected 'value' header at line " + std::to_string(lineno));
      in_data = true;
      continue;
    }
    values.push_back(parse_double(line, lineno));
  }
  if (!have_rate) throw SchemaError("missing sample_rate_hz header in " + path.string());
  if (values.empty()) throw SchemaError("no samples in " + path.string());
  signal.samples =
      Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  validate(signal);
  return signal;
}

void write_clock_label_file(const std::filesystem::path& path, const ClockLabelStream& stream) {
  std::ostringstream os;
  os << "# camera_id=" << stream.camera_id << "\n";
  os << "frame_index,timestamp_s,label\n";
  for (const ClockLabelEntry& e : stream.entries)
    os << e.frame_index << "," << g17(e.timestamp_s) << "," << e.label.value_or("") << "\n";
  atomic_write_bytes(path, os.str());
}

ClockLabelStream parse_clock_label_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  ClockLabelStream stream;
  bool seen_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.substr(1, eq - 1).find("camera_id") != std::string::npos)
        stream.camera_id = line.substr(eq + 1);
      continue;
    }
    if (!seen_header) {
      if (line != "frame_index,timestamp_s,label")
        throw SchemaError("bad clock label header at line " + std::to_string(lineno));
      seen_header = true;
      continue;
    }
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 3)
      throw SchemaError("expected 3 fields at line " + std::to_string(lineno));
    ClockLabelEntry entry;
    entry.frame_index = parse_long(fields[0], lineno);
    entry.timestamp_s = parse_double(fields[1], lineno);
    if (!fields[2].empty()) entry.label = fields[2];
    if (!stream.entries.empty() && entry.timestamp_s <= stream.entries.back().timestamp_s)
      throw NonMonotoneTimestamps("timestamps must increase at line " + std::to_string(lineno));
    stream.entries.push_back(std::move(entry));
  }
  if (!seen_header) throw SchemaError("missing header in " + path.string());
  return stream;
}

const std::map<std::string, BiomarkerBound>& biomarker_bounds() {
  static const std::map<std::string, BiomarkerBound> bounds = {
      {"weight", {18.0, 193.0, "kg"}},
      {"height", {136.2, 211.8, "cm"}},
      {"bmi", {9.062, 53.358, "kg/m^2"}},
      {"age", {5.0, 96.0, "years"}},
      {"systolic_pressure", {55.6, 226.4, "mm Hg"}},
      {"diastolic_pressure", {38.4, 119.6, "mm Hg"}},
      {"saturation", {83.4, 101.6, "%"}},
      {"temperature", {35.7, 37.8, "C"}},
      {"hemoglobin", {6.26, 19.14, "g/dL"}},
      {"glycated_hemoglobin", {1.476, 14.944, "%"}},
      {"cholesterol", {-0.52, 9.42, "mmol/L"}},
      {"respiratory_rate", {13.2, 25.8, "rpm"}},
      {"heart_rate", {28.2, 173.8, "bpm"}},
      {"arterial_stiffness", {-4.704, 40.474, ""}},
      {"stress", {-0.304, 8.824, ""}},
      {"sex", {-0.2, 1.2, ""}},
  };
  return bounds;
}

void validate_manifest(const RecordingManifest& manifest,
                       const std::filesystem::path& base_dir, bool check_files) {
  if (manifest.state != "rest" && manifest.state != "post_exercise")
    throw SchemaError("state must be 'rest' or 'post_exercise', got '" + manifest.state + "'");
  if (!(manifest.fps > 0.0) || !std::isfinite(manifest.fps))
    throw SchemaError("fps must be positive");

  const auto& bounds = biomarker_bounds();
  for (const auto& [name, bv] : manifest.biomarkers) {
    const auto it = bounds.find(name);
    if (it == bounds.end()) throw SchemaError("unknown biomarker '" + name + "'");
    if (!std::isfinite(bv.value) || bv.value < it->second.lo || bv.value > it->second.hi)
      throw BiomarkerOutOfRange(name + " = " + g17(bv.value) + " outside [" +
                                g17(it->second.lo) + ", " + g17(it->second.hi) + "]");
  }

  if (!check_files) return;
  parse_trace_file(base_dir / manifest.trace_path);
  parse_ppg_file(base_dir / manifest.reference_ppg_path);
  if (manifest.clock_label_path) parse_clock_label_file(base_dir / *manifest.clock_label_path);
}

void write_manifest(const std::filesystem::path& path, const RecordingManifest& manifest) {
  ordered_json j;
  j["subject_id"] = manifest.subject_id;
  j["state"] = manifest.state;
  j["camera_id"] = manifest.camera_id;
  j["fps"] = manifest.fps;
  j["trace_path"] = manifest.trace_path.generic_string();
  j["reference_ppg_path"] = manifest.reference_ppg_path.generic_string();
  if (manifest.clock_label_path)
    j["clock_label_path"] = manifest.clock_label_path->generic_string();
  j["notes"] = manifest.notes;
  ordered_json bio = ordered_json::object();
  for (const auto& [name, bv] : manifest.biomarkers)
    bio[name] = ordered_json{{"value", bv.value}, {"unit", bv.unit}};
  j["biomarkers"] = bio;
  atomic_write_bytes(path, j.dump(2) + "\n");
}

RecordingManifest parse_manifest(const std::filesystem::path& path, bool check_files) {
  RecordingManifest manifest;
  try {
    const ordered_json j = ordered_json::parse(read_text(path));
    manifest.subject_id = j.at("subject_id").get<std::string>();
    manifest.state = j.at("state").get<std::string>();
    manifest.camera_id = j.at("camera_id").get<std::string>();
    manifest.fps = j.at("fps").get<double>();
    manifest.trace_path = j.at("trace_path").get<std::string>();
    manifest.reference_ppg_path = j.at("reference_ppg_path").get<std::string>();
    if (j.contains("clock_label_path"))
      manifest.clock_label_path = j.at("clock_label_path").get<std::string>();
    if (j.contains("notes")) manifest.notes = j.at("notes").get<std::string>();
    if (j.contains("biomarkers")) {
      for (const auto& [name, item] : j.at("biomarkers").items()) {
        BiomarkerValue bv;
        bv.value = item.at("value").get<double>();
        if (item.contains("unit")) bv.unit = item.at("unit").get<std::string>();
        manifest.biomarkers[name] = bv;
      }
    }
  } catch (const ordered_json::exception& e) {
    throw SchemaError("bad manifest " + path.string() + ": " + e.what());
  }
  validate_manifest(manifest, path.parent_path(), check_files);
  return manifest;
}

void save_scaler(const StandardScaler& scaler, const std::filesystem::path& path) {
  ordered_json j;
  j["targets"] = scaler.targets;
  j["mean"] = std::vector<double>(scaler.mean.data(), scaler.mean.data() + scaler.mean.size());
  j["stddev"] =
      std::vector<double>(scaler.stddev.data(), scaler.stddev.data() + scaler.stddev.size());
  atomic_write_bytes(path, j.dump(2) + "\n");
}

StandardScaler load_scaler(const std::filesystem::path& path) {
  try {
    const ordered_json j = ordered_json::parse(read_text(path));
    StandardScaler s;
    s.targets = j.at("targets").get<std::vector<std::string>>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto stddev = j.at("stddev").get<std::vector<double>>();
    if (mean.size() != s.targets.size() || stddev.size() != s.targets.size())
      throw SchemaError("scaler arrays disagree in length in " + path.string());
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                               static_cast<Eigen::Index>(mean.size()));
    s.stddev = Eigen::Map<const Eigen::VectorXd>(stddev.data(),
                                                 static_cast<Eigen::Index>(stddev.size()));
    for (Eigen::Index i = 0; i < s.stddev.size(); ++i)
      if (!(s.stddev[i] > 0.0)) throw SchemaError("non-positive stddev in " + path.string());
    return s;
  } catch (const ordered_json::exception& e) {
    throw SchemaError("bad scaler " + path.string() + ": " + e.what());
  }
}

namespace {

void append_record(std::ostringstream& jsonl, std::ostringstream& csv, ReportFormat format,
                   const MetricReport& r, const std::string& target, const std::string& metric,
                   double value) {
  if (format == ReportFormat::jsonl) {
    ordered_json j;
    j["model"] = r.model_name;
    j["dataset"] = r.dataset_name;
    j["target"] = target;
    j["metric"] = metric;
    j["value"] = value;
    j["num_recordings"] = r.num_recordings;
    j["num_segments"] = r.num_segments;
    j["num_failed"] = r.num_failed;
    jsonl << j.dump() << "\n";
  } else {
    auto quote = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string out = "\"";
      for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
      }
      return out + "\"";
    };
    csv << quote(r.model_name) << "," << quote(r.dataset_name) << "," << quote(target) << ","
        << quote(metric) << "," << g17(value) << "," << r.num_recordings << ","
        << r.num_segments << "," << r.num_failed << "\n";
  }
}

}  // namespace

std::string format_report(const MetricReport& report, ReportFormat format) {
  std::ostringstream jsonl, csv;
  if (format == ReportFormat::csv)
    csv << "model,dataset,target,metric,value,num_recordings,num_segments,num_failed\n";
  append_record(jsonl, csv, format, report, "hr", "mae_bpm", report.hr_mae_bpm);
  append_record(jsonl, csv, format, report, "ppg", "mae", report.ppg_mae);
  for (const auto& [name, mae] : report.biomarker_mae)
    append_record(jsonl, csv, format, report, name, "mae", mae);
  if (report.has_sex_accuracy)
    append_record(jsonl, csv, format, report, "sex", "accuracy", report.sex_accuracy);
  return format == ReportFormat::jsonl ? jsonl.str() : csv.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& path,
                  ReportFormat format) {
  atomic_write_bytes(path, format_report(report, format));
}

BenchResult bench_inference(const FpnModel& model, double segment_s, double fps,
                            int repetitions, std::uint64_t seed) {
  if (repetitions < 1) throw InvalidRepetitions("repetitions must be at least 1");
  if (!(segment_s > 0.0) || !(fps > 0.0)) throw InvalidConfig("segment and fps must be positive");
  constexpr int kWarmup = 10;
  const Eigen::Index frames = static_cast<Eigen::Index>(std::llround(segment_s * fps));
  if (frames < model.config.min_input_length())
    throw InvalidConfig("segment shorter than the model's minimum input");

  Rng rng(seed);
  std::vector<Eigen::MatrixXd> inputs;
  inputs.reserve(static_cast<std::size_t>(kWarmup + repetitions));
  for (int i = 0; i < kWarmup + repetitions; ++i) {
    Eigen::MatrixXd x(model.config.in_channels, frames);
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      for (Eigen::Index t = 0; t < x.cols(); ++t) x(c, t) = rng.normal();
    inputs.push_back(std::move(x));
  }

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(repetitions));
  double sink = 0.0;  // keeps the optimizer from dropping forward passes
  for (int i = 0; i < kWarmup + repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const ForwardResult out = forward(model, inputs[static_cast<std::size_t>(i)]);
    const auto stop = std::chrono::steady_clock::now();
    sink += out.ppg[0];
    if (i >= kWarmup)
      ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  if (!std::isfinite(sink)) throw Error("non-finite forward output during benchmark");

  std::sort(ms.begin(), ms.end());
  const auto rank = [&](double p) {
    const auto n = static_cast<double>(ms.size());
    const auto idx = static_cast<std::size_t>(std::ceil(p * n)) - 1;
    return ms[std::min(idx, ms.size() - 1)];
  };
  BenchResult result;
  result.repetitions = repetitions;
  result.segment_frames = frames;
  double sum = 0.0;
  for (double v : ms) sum += v;
  result.mean_ms = sum / static_cast<double>(ms.size());
  result.p50_ms = rank(0.50);
  result.p95_ms = rank(0.95);
  return result;
}

BenchResult bench_inference(const std::filesystem::path& checkpoint_path, double segment_s,
                            double fps, int repetitions, std::uint64_t seed) {
  const FpnModel model = load_checkpoint(checkpoint_path);
  return bench_inference(model, segment_s, fps, repetitions, seed);
}

FrameImage read_ppm(const std::filesystem::path& path) {
  const std::string data = read_text(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };

  if (next_token() != "P6") throw SchemaError("not a binary PPM: " + path.string());
  const long width = parse_long(next_token(), 1);
  const long height = parse_long(next_token(), 1);
  const long maxval = parse_long(next_token(), 1);
  if (width < 1 || height < 1 || maxval != 255)
    throw SchemaError("unsupported PPM geometry or depth in " + path.string());
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (data.size() - pos < need) throw SchemaError("truncated PPM " + path.string());

  FrameImage frame;
  frame.r.resize(height, width);
  frame.g.resize(height, width);
  frame.b.resize(height, width);
  for (long y = 0; y < height; ++y)
    for (long x = 0; x < width; ++x) {
      const std::size_t p = pos + 3 * (static_cast<std::size_t>(y) * width + x);
      frame.r(y, x) = static_cast<unsigned char>(data[p]) / 255.0;
      frame.g(y, x) = static_cast<unsigned char>(data[p + 1]) / 255.0;
      frame.b(y, x) = static_cast<unsigned char>(data[p + 2]) / 255.0;
    }
  return frame;
}

FrameImage read_planar_rgb(const std::filesystem::path& path, Eigen::Index width,
                           Eigen::Index height) {
  if (width < 1 || height < 1) throw SchemaError("frame geometry must be positive");
  const std::string data = read_text(path);
  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (data.size() != 3 * plane)
    throw SchemaError("expected " + std::to_string(3 * plane) + " bytes in " + path.string());

  FrameImage frame;
  frame.r.resize(height, width);
  frame.g.resize(height, width);
  frame.b.resize(height, width);
  for (Eigen::Index y = 0; y < height; ++y)
    for (Eigen::Index x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      frame.r(y, x) = static_cast<unsigned char>(data[i]) / 255.0;
      frame.g(y, x) = static_cast<unsigned char>(data[plane + i]) / 255.0;
      frame.b(y, x) = static_cast<unsigned char>(data[2 * plane + i]) / 255.0;
    }
  return frame;
}

std::vector<RoiMask> parse_mask_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<RoiMask> masks;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw SchemaError("expected 'name: x,y x,y ...' at line " + std::to_string(lineno));
    RoiMask mask;
    mask.name = line.substr(0, colon);
    std::istringstream rest(line.substr(colon + 1));
    std::string pair;
    while (rest >> pair) {
      const std::vector<std::string> xy = split(pair, ',');
      if (xy.size() != 2)
        throw SchemaError("bad point '" + pair + "' at line " + std::to_string(lineno));
      mask.polygon.emplace_back(parse_double(xy[0], lineno), parse_double(xy[1], lineno));
    }
    if (mask.polygon.size() < 3)
      throw SchemaError("polygon needs at least 3 points at line " + std::to_string(lineno));
    masks.push_back(std::move(mask));
  }
  if (masks.empty()) throw SchemaError("no regions in " + path.string());
  return masks;
}

}  // namespace rppg
