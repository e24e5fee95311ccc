#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "rppg/filtering.hpp"
#include "test_support.hpp"

using namespace rppg;
using testsup::make_sine;

namespace {

// Independent magnitude oracle: evaluate each biquad's rational response on
// the unit circle directly and multiply.
double magnitude_oracle(const IirFilter& f, double freq_hz) {
  const double w = 2.0 * M_PI * freq_hz / f.design.sample_rate_hz;
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -w));
  std::complex<double> prod(1.0, 0.0);
  for (const BiquadSection& s : f.sections)
    prod *= (s.b0 + s.b1 * zinv + s.b2 * zinv * zinv) /
            (1.0 + s.a1 * zinv + s.a2 * zinv * zinv);
  return std::abs(prod);
}

// Same response from the cascade expanded into a single rational transfer
// function by coefficient convolution, Horner-evaluated. Ill-conditioned at
// low frequencies where the roots cluster near z = 1, hence only a loose
// cross-check.
double expanded_oracle(const IirFilter& f, double freq_hz) {
  std::vector<double> num{1.0}, den{1.0};
  auto convolve = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  };
  for (const BiquadSection& s : f.sections) {
    num = convolve(num, {s.b0, s.b1, s.b2});
    den = convolve(den, {1.0, s.a1, s.a2});
  }
  const double w = 2.0 * M_PI * freq_hz / f.design.sample_rate_hz;
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -w));
  auto horner = [&zinv](const std::vector<double>& poly) {
    std::complex<double> acc(0.0, 0.0);
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = acc * zinv + *it;
    return acc;
  };
  return std::abs(horner(num) / horner(den));
}

}  // namespace

TEST_CASE("pulse band design meets the stopband and passband targets") {
  const IirFilter f = design_cheby2_bandpass(4, 0.4, 8.0, 30.0, 100.0);
  REQUIRE(f.sections.size() == 4);
  CHECK(is_stable(f));

  const double floor_mag = std::pow(10.0, -30.0 / 20.0);
  CHECK(magnitude_oracle(f, 0.0) <= floor_mag * (1.0 + 1e-9));
  CHECK(magnitude_oracle(f, 0.4) <= floor_mag * (1.0 + 1e-9));
  CHECK(magnitude_oracle(f, 8.0) <= floor_mag * (1.0 + 1e-9));
  CHECK(magnitude_oracle(f, 20.0) <= floor_mag);

  const double mid = magnitude_oracle(f, 2.0);
  CHECK(mid >= 0.7);
  CHECK(mid <= 1.0 + 1e-9);
}

TEST_CASE("frequency_response agrees with the polynomial oracle") {
  const IirFilter f = design_cheby2_bandpass(4, 0.4, 8.0, 30.0, 100.0);
  const std::vector<double> freqs{0.0, 0.1, 0.4, 1.0, 2.0, 3.5, 8.0, 15.0, 20.0, 49.0};
  const auto resp = frequency_response(f, freqs);
  REQUIRE(resp.size() == freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    CHECK(std::abs(resp[i]) == doctest::Approx(magnitude_oracle(f, freqs[i])).epsilon(1e-12));
    CHECK(std::abs(resp[i]) == doctest::Approx(expanded_oracle(f, freqs[i])).epsilon(1e-5));
  }
  // even prototype order pins the response at DC to the ripple floor exactly
  CHECK(std::abs(frequency_response(f, {0.0}).front()) ==
        doctest::Approx(std::pow(10.0, -1.5)).epsilon(1e-12));
}

TEST_CASE("frequency_response handles the trivial cases") {
  const IirFilter f = design_cheby2_bandpass(4, 0.4, 8.0, 30.0, 100.0);
  CHECK(frequency_response(f, {}).empty());
  CHECK(std::abs(frequency_response(f, {0.01}).front()) <= std::pow(10.0, -30.0 / 20.0));

  IirFilter identity;
  identity.sections.push_back({1.0, 0.0, 0.0, 0.0, 0.0});
  identity.design.sample_rate_hz = 100.0;
  for (double freq : {0.0, 3.0, 17.0, 44.0})
    CHECK(std::abs(frequency_response(identity, {freq}).front()) ==
          doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(frequency_response(f, {60.0}), InvalidFrequency);
}

TEST_CASE("sosfilt steady-state gain matches the oracle on a passband sine") {
  const IirFilter f = design_cheby2_bandpass(4, 0.4, 8.0, 30.0, 100.0);
  const PpgSignal s = make_sine(2.0, 60.0, 100.0);
  const Eigen::VectorXd y = sosfilt(f, s.samples);
  // skip the first half so the transient has died out
  const Eigen::Index half = y.size() / 2;
  const double gain = testsup::rms(y.tail(half)) / testsup::rms(s.samples.tail(half));
  CHECK(gain == doctest::Approx(magnitude_oracle(f, 2.0)).epsilon(0.02));
}

TEST_CASE("design rejects invalid bands and orders") {
  CHECK_THROWS_AS(design_cheby2_bandpass(4, 8.0, 0.4, 30.0, 100.0), InvalidBand);
  CHECK_THROWS_AS(design_cheby2_bandpass(4, 0.4, 60.0, 30.0, 100.0), InvalidBand);
  CHECK_THROWS_AS(design_cheby2_bandpass(4, -1.0, 8.0, 30.0, 100.0), InvalidBand);
  CHECK_THROWS_AS(design_cheby2_bandpass(3, 0.4, 8.0, 30.0, 100.0), DesignFailure);
  CHECK_THROWS_AS(design_cheby2_bandpass(0, 0.4, 8.0, 30.0, 100.0), DesignFailure);
  CHECK_THROWS_AS(design_cheby2_bandpass(4, 0.4, 8.0, 30.0, -5.0), InvalidRate);
}

TEST_CASE("filtfilt maps zero to zero") {
  const IirFilter f = default_bandpass(100.0);
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(500);
  CHECK(filtfilt(f, zeros).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("filtfilt removes DC and preserves the pulse band") {
  const IirFilter f = default_bandpass(100.0);
  const double offset = 5.0;
  const PpgSignal s = make_sine(1.2, 30.0, 100.0, 1.0, 0.0, offset);
  const PpgSignal out = filtfilt(f, s);
  REQUIRE(out.size() == s.size());

  // Away from the edge transients the residual offset sits at the two-pass
  // stopband floor, 1e-3 of the input offset; it never drops below it.
  const Eigen::Index skip = 500;
  const double central = out.samples.segment(skip, s.size() - 2 * skip).mean();
  CHECK(std::abs(central) < 1.1e-3 * offset);
  CHECK(std::abs(central) > 0.8e-3 * offset);

  // compare 1.2 Hz content via the direct DFT oracle, away from the edges
  const Eigen::Index keep = s.size() - 2 * skip;
  const double in_amp =
      std::sqrt(testsup::dft_power_at(s.samples.segment(skip, keep), 1.2, 100.0));
  const double out_amp =
      std::sqrt(testsup::dft_power_at(out.samples.segment(skip, keep), 1.2, 100.0));
  CHECK(out_amp == doctest::Approx(in_amp).epsilon(0.05));
}

TEST_CASE("filtfilt attenuates a stopband sine") {
  const IirFilter f = default_bandpass(100.0);
  const PpgSignal s = make_sine(20.0, 20.0, 100.0);
  const PpgSignal out = filtfilt(f, s);
  // edge transients from the slow low-edge pole take seconds to die, so
  // judge the attenuation in the interior of the record
  const double interior = testsup::rms(out.samples.segment(600, 800));
  CHECK(interior < 1e-3 * testsup::rms(s.samples));
}

TEST_CASE("filtfilt is linear in the input") {
  const IirFilter f = default_bandpass(100.0);
  const PpgSignal s = make_sine(1.7, 10.0, 100.0, 1.0, 0.3, 0.2);
  const Eigen::VectorXd once = filtfilt(f, s.samples);
  const Eigen::VectorXd scaled = filtfilt(f, (7.5 * s.samples).eval());
  CHECK((scaled - 7.5 * once).cwiseAbs().maxCoeff() < 1e-9 * once.cwiseAbs().maxCoeff() * 7.5);
}

TEST_CASE("filtfilt needs enough samples for its padding") {
  const IirFilter f = default_bandpass(100.0);  // 4 sections, pad 24
  Eigen::VectorXd tiny = Eigen::VectorXd::LinSpaced(24, 0.0, 1.0);
  CHECK_THROWS_AS(filtfilt(f, tiny), SignalTooShort);
  Eigen::VectorXd enough = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
  CHECK_NOTHROW(filtfilt(f, enough));
}

TEST_CASE("designs stay stable across the supported sample rates") {
  for (double rate : {24.0, 30.0, 100.0}) {
    const IirFilter f = default_bandpass(rate);
    CHECK(is_stable(f));
    CHECK(f.sections.size() == 4);
  }
}

TEST_CASE("filter save/load round-trips exactly") {
  const IirFilter f = design_cheby2_bandpass(4, 0.4, 8.0, 30.0, 100.0);
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "rppgkit_filter_roundtrip.txt";
  save_filter(f, path);
  const IirFilter g = load_filter(path);
  REQUIRE(g.sections.size() == f.sections.size());
  for (std::size_t i = 0; i < f.sections.size(); ++i) {
    CHECK(g.sections[i].b0 == f.sections[i].b0);
    CHECK(g.sections[i].b1 == f.sections[i].b1);
    CHECK(g.sections[i].b2 == f.sections[i].b2);
    CHECK(g.sections[i].a1 == f.sections[i].a1);
    CHECK(g.sections[i].a2 == f.sections[i].a2);
  }
  CHECK(g.design.order == f.design.order);
  CHECK(g.design.sample_rate_hz == f.design.sample_rate_hz);
  std::filesystem::remove(path);
}

TEST_CASE("load_filter reports malformed files with a line number") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "rppgkit_filter_bad.txt";
  {
    std::ofstream file(path);
    file << "# family=cheby2 order=4 low_hz=0.4 high_hz=8 stop_atten_db=30 sample_rate_hz=100\n";
    file << "1.0 2.0 3.0 0.1 0.2\n";
    file << "1.0 2.0 oops 0.1 0.2\n";
  }
  CHECK_THROWS_AS(load_filter(path), SchemaError);
  try {
    load_filter(path);
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  std::filesystem::remove(path);
}
