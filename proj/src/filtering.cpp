#include "rppg/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rppg {
namespace {

using cd = std::complex<double>;

// Roots are tracked as conjugate-pair representatives with Im >= 0; the
// partner is implicit. This keeps pairs exact under the transforms below.
struct PairedRoots {
  std::vector<cd> zeros;
  std::vector<cd> poles;
  double gain = 1.0;
};

cd canonical(cd r) { return r.imag() < 0.0 ? std::conj(r) : r; }

// Analog Chebyshev II low-pass prototype, unit stopband edge. Even order.
PairedRoots cheb2_prototype(int order, double stop_atten_db) {
  const int n = order;
  const double de = 1.0 / std::sqrt(std::pow(10.0, 0.1 * stop_atten_db) - 1.0);
  const double mu = std::asinh(1.0 / de) / n;
  PairedRoots out;
  double k = 1.0;
  for (int m = 1; m < n; m += 2) {
    const double theta = m * M_PI / (2.0 * n);
    const cd z(0.0, 1.0 / std::sin(theta));
    const cd h = -std::exp(cd(0.0, theta));
    const cd v(std::sinh(mu) * h.real(), std::cosh(mu) * h.imag());
    const cd p = canonical(1.0 / v);
    if (p.imag() < 1e-12 * std::abs(p))
      throw DesignFailure("prototype produced an unexpected real pole");
    out.zeros.push_back(z);
    out.poles.push_back(p);
    k *= std::norm(p) / std::norm(z);
  }
  out.gain = k;
  return out;
}

// Low-pass to band-pass in the analog domain; each pair splits in two.
PairedRoots lp_to_bandpass(const PairedRoots& lp, double wo, double bw) {
  auto transform = [&](const std::vector<cd>& reps) {
    std::vector<cd> out;
    for (const cd& r : reps) {
      const cd rl = r * (bw / 2.0);
      const cd d = std::sqrt(rl * rl - wo * wo);
      out.push_back(canonical(rl + d));
      out.push_back(canonical(rl - d));
    }
    return out;
  };
  PairedRoots out;
  out.zeros = transform(lp.zeros);
  out.poles = transform(lp.poles);
  out.gain = lp.gain;  // pole and zero counts match, so no extra bw factor
  return out;
}

PairedRoots bilinear(const PairedRoots& analog, double fs) {
  const double fs2 = 2.0 * fs;
  PairedRoots out;
  double k = analog.gain;
  for (const cd& z : analog.zeros) {
    out.zeros.push_back(canonical((fs2 + z) / (fs2 - z)));
    k *= std::norm(fs2 - z);
  }
  for (const cd& p : analog.poles) {
    out.poles.push_back(canonical((fs2 + p) / (fs2 - p)));
    k /= std::norm(fs2 - p);
  }
  out.gain = k;
  return out;
}

// One biquad per pole pair, each matched with the nearest remaining zero
// pair. Sections are ordered with poles furthest from the unit circle first
// and the overall gain folded into the first section's numerator.
std::vector<BiquadSection> to_sections(const PairedRoots& digital) {
  if (digital.zeros.size() != digital.poles.size())
    throw DesignFailure("pole and zero pair counts differ");

  std::vector<std::size_t> pole_order(digital.poles.size());
  for (std::size_t i = 0; i < pole_order.size(); ++i) pole_order[i] = i;
  std::sort(pole_order.begin(), pole_order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(digital.poles[a]) > std::abs(digital.poles[b]);
  });

  std::vector<bool> zero_used(digital.zeros.size(), false);
  std::vector<BiquadSection> sections;
  for (std::size_t pi : pole_order) {
    const cd p = digital.poles[pi];
    std::size_t best = digital.zeros.size();
    double best_dist = 0.0;
    for (std::size_t zi = 0; zi < digital.zeros.size(); ++zi) {
      if (zero_used[zi]) continue;
      const double dist = std::abs(digital.zeros[zi] - p);
      if (best == digital.zeros.size() || dist < best_dist) {
        best = zi;
        best_dist = dist;
      }
    }
    zero_used[best] = true;
    const cd z = digital.zeros[best];
    BiquadSection s;
    s.b0 = 1.0;
    s.b1 = -2.0 * z.real();
    s.b2 = std::norm(z);
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    sections.push_back(s);
  }
  std::reverse(sections.begin(), sections.end());
  sections.front().b0 *= digital.gain;
  sections.front().b1 *= digital.gain;
  sections.front().b2 *= digital.gain;
  return sections;
}

// Steady-state (unit step) state for each section of the cascade, direct
// form II transposed, including the DC gain accumulated upstream.
std::vector<std::array<double, 2>> steady_state(const IirFilter& f) {
  std::vector<std::array<double, 2>> zi(f.sections.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < f.sections.size(); ++i) {
    const BiquadSection& s = f.sections[i];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi[i][0] = scale * (s.b1 + s.b2 - (s.a1 + s.a2) * dc);
    zi[i][1] = scale * (s.b2 - s.a2 * dc);
    scale *= dc;
  }
  return zi;
}

Eigen::VectorXd run_cascade(const IirFilter& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                            std::vector<std::array<double, 2>> state) {
  Eigen::VectorXd y = x;
  for (std::size_t si = 0; si < f.sections.size(); ++si) {
    const BiquadSection& s = f.sections[si];
    double z1 = state[si][0];
    double z2 = state[si][1];
    for (Eigen::Index n = 0; n < y.size(); ++n) {
      const double xn = y[n];
      const double yn = s.b0 * xn + z1;
      z1 = s.b1 * xn - s.a1 * yn + z2;
      z2 = s.b2 * xn - s.a2 * yn;
      y[n] = yn;
    }
  }
  return y;
}

}  // namespace

IirFilter design_cheby2_bandpass(int order, double low_hz, double high_hz,
                                 double stop_atten_db, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw InvalidRate("sample rate must be positive and finite");
  if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < sample_rate_hz / 2.0))
    throw InvalidBand("need 0 < low < high < Nyquist");
  if (order < 2 || order % 2 != 0)
    throw DesignFailure("order must be even and at least 2");
  if (!(stop_atten_db > 0.0)) throw DesignFailure("stopband attenuation must be positive");

  const double w1 = 2.0 * sample_rate_hz * std::tan(M_PI * low_hz / sample_rate_hz);
  const double w2 = 2.0 * sample_rate_hz * std::tan(M_PI * high_hz / sample_rate_hz);
  const PairedRoots proto = cheb2_prototype(order, stop_atten_db);
  const PairedRoots analog = lp_to_bandpass(proto, std::sqrt(w1 * w2), w2 - w1);
  const PairedRoots digital = bilinear(analog, sample_rate_hz);

  IirFilter f;
  f.sections = to_sections(digital);
  f.design = {"cheby2", order, low_hz, high_hz, stop_atten_db, sample_rate_hz};
  if (!is_stable(f)) throw DesignFailure("design produced an unstable section");
  return f;
}

IirFilter default_bandpass(double sample_rate_hz) {
  return design_cheby2_bandpass(4, 0.4, 8.0, 30.0, sample_rate_hz);
}

bool is_stable(const IirFilter& f) {
  for (const BiquadSection& s : f.sections)
    if (!(std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2)) return false;
  return true;
}

std::vector<std::complex<double>> frequency_response(const IirFilter& f,
                                                     const std::vector<double>& freqs_hz) {
  std::vector<cd> out;
  out.reserve(freqs_hz.size());
  for (double hz : freqs_hz) {
    if (!(hz >= 0.0) || hz > f.design.sample_rate_hz / 2.0)
      throw InvalidFrequency("frequency outside [0, Nyquist]");
    const double w = 2.0 * M_PI * hz / f.design.sample_rate_hz;
    const cd e1 = std::exp(cd(0.0, -w));
    const cd e2 = e1 * e1;
    cd h(1.0, 0.0);
    for (const BiquadSection& s : f.sections)
      h *= (s.b0 + s.b1 * e1 + s.b2 * e2) / (1.0 + s.a1 * e1 + s.a2 * e2);
    out.push_back(h);
  }
  return out;
}

Eigen::VectorXd sosfilt(const IirFilter& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return run_cascade(f, x, std::vector<std::array<double, 2>>(f.sections.size(), {0.0, 0.0}));
}

Eigen::VectorXd filtfilt(const IirFilter& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index pad = 6 * static_cast<Eigen::Index>(f.sections.size());
  if (x.size() <= pad)
    throw SignalTooShort("need more than " + std::to_string(pad) + " samples");

  Eigen::VectorXd ext(x.size() + 2 * pad);
  for (Eigen::Index j = 0; j < pad; ++j) {
    ext[j] = 2.0 * x[0] - x[pad - j];
    ext[pad + x.size() + j] = 2.0 * x[x.size() - 1] - x[x.size() - 2 - j];
  }
  ext.segment(pad, x.size()) = x;

  const auto zi = steady_state(f);
  auto scaled = [&](double v) {
    auto z = zi;
    for (auto& s : z) {
      s[0] *= v;
      s[1] *= v;
    }
    return z;
  };

  Eigen::VectorXd fwd = run_cascade(f, ext, scaled(ext[0]));
  Eigen::VectorXd rev = fwd.reverse();
  Eigen::VectorXd back = run_cascade(f, rev, scaled(rev[0]));
  Eigen::VectorXd y = back.reverse();
  return y.segment(pad, x.size());
}

PpgSignal filtfilt(const IirFilter& f, const PpgSignal& s) {
  validate(s);
  if (std::abs(s.sample_rate_hz - f.design.sample_rate_hz) > 1e-9 * f.design.sample_rate_hz)
    throw InvalidRate("signal rate does not match the filter design rate");
  PpgSignal out = s;
  out.samples = filtfilt(f, s.samples);
  return out;
}

void save_filter(const IirFilter& f, const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "# family=" << f.design.family << "\n";
  os << "# order=" << f.design.order << "\n";
  os << "# low_hz=" << f.design.low_hz << "\n";
  os << "# high_hz=" << f.design.high_hz << "\n";
  os << "# stop_atten_db=" << f.design.stop_atten_db << "\n";
  os << "# sample_rate_hz=" << f.design.sample_rate_hz << "\n";
  for (const BiquadSection& s : f.sections)
    os << s.b0 << " " << s.b1 << " " << s.b2 << " " << s.a1 << " " << s.a2 << "\n";
  std::ofstream file(path);
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  file << os.str();
}

IirFilter load_filter(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open " + path.string());
  IirFilter f;
  std::string line;
  int lineno = 0;
  while (std::getline(file, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      const std::string val = line.substr(eq + 1);
      try {
        if (key == "family") {
          std::istringstream vs(val);
          vs >> f.design.family;
        } else if (key == "order")
          f.design.order = std::stoi(val);
        else if (key == "low_hz")
          f.design.low_hz = std::stod(val);
        else if (key == "high_hz")
          f.design.high_hz = std::stod(val);
        else if (key == "stop_atten_db")
          f.design.stop_atten_db = std::stod(val);
        else if (key == "sample_rate_hz")
          f.design.sample_rate_hz = std::stod(val);
      } catch (const std::exception&) {
        throw SchemaError("bad header value at line " + std::to_string(lineno));
      }
      continue;
    }
    std::istringstream ls(line);
    BiquadSection s;
    if (!(ls >> s.b0 >> s.b1 >> s.b2 >> s.a1 >> s.a2))
      throw SchemaError("expected 5 coefficients at line " + std::to_string(lineno));
    double extra;
    if (ls >> extra) throw SchemaError("trailing data at line " + std::to_string(lineno));
    f.sections.push_back(s);
  }
  if (f.sections.empty()) throw SchemaError("no sections in " + path.string());
  return f;
}

}  // namespace rppg
