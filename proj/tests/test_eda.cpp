#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "affectpipe/eda.hpp"
#include "oracles.hpp"

using namespace affectpipe;
using Catch::Approx;

namespace {

double scr_wave(double t, double tau0 = 2.0, double tau1 = 0.7) {
  if (t < 0.0) return 0.0;
  double tstar = std::log(tau0 / tau1) * tau0 * tau1 / (tau0 - tau1);
  double peak = std::exp(-tstar / tau0) - std::exp(-tstar / tau1);
  return (std::exp(-t / tau0) - std::exp(-t / tau1)) / peak;
}

}  // namespace

TEST_CASE("constant input decomposes to pure tonic") {
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, std::vector<double>(120, 2.0));
  EdaDecomposition d = cvxeda_decompose(seg);
  for (std::size_t i = 0; i < d.tonic.size(); ++i) {
    REQUIRE(d.tonic[i] == Approx(2.0).margin(1e-3));
    REQUIRE(std::abs(d.phasic[i]) < 1e-3);
    REQUIRE(d.driver[i] >= -1e-6);
  }
  REQUIRE(d.solver_stats.status == "solved");
}

TEST_CASE("an injected SCR is recovered as one driver burst at the right place") {
  const double fs = 4.0, amp = 0.5, onset = 20.0;
  std::vector<double> xs;
  for (int i = 0; i < 240; ++i) {
    double t = i / fs;
    xs.push_back(2.0 + 0.005 * t + amp * scr_wave(t - onset));
  }
  Segment seg = oracles::make_segment(SignalKind::Eda, fs, xs);
  EdaDecomposition d = cvxeda_decompose(seg);

  double maxdrv = *std::max_element(d.driver.begin(), d.driver.end());
  auto bursts = driver_bursts(d, fs, 0.01 * maxdrv, 1.0);
  REQUIRE(bursts.size() == 1);

  std::size_t pk = 0;
  for (std::size_t i = 0; i < d.phasic.size(); ++i)
    if (d.phasic[i] > d.phasic[pk]) pk = i;
  double t_peak = pk / fs;
  double t_expected = onset + std::log(2.0 / 0.7) * 2.0 * 0.7 / 1.3;
  REQUIRE(d.phasic[pk] == Approx(amp).margin(0.05));
  REQUIRE(t_peak == Approx(t_expected).margin(0.5));
}

TEST_CASE("reconstruction is exact and the residual is small") {
  std::mt19937_64 rng(3);
  std::vector<double> xs;
  for (int i = 0; i < 200; ++i) {
    double t = i / 4.0;
    xs.push_back(2.0 + 0.3 * std::sin(t / 20.0) + 0.4 * scr_wave(t - 12.0) +
                 0.3 * scr_wave(t - 31.0));
  }
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, xs);
  EdaDecomposition d = cvxeda_decompose(seg);

  double range = *std::max_element(xs.begin(), xs.end()) -
                 *std::min_element(xs.begin(), xs.end());
  double rms = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double recon = d.tonic[i] + d.phasic[i] + d.residual[i];
    REQUIRE(std::abs(xs[i] - recon) <= 1e-9);  // identity by construction
    rms += d.residual[i] * d.residual[i];
  }
  rms = std::sqrt(rms / xs.size());
  REQUIRE(rms <= 0.01 * range);
}

TEST_CASE("low-amplitude noise yields a near-zero driver") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1e-3);
  std::vector<double> xs(64, 2.0);
  for (auto& v : xs) v += g(rng);
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, xs);
  EdaDecomposition d = cvxeda_decompose(seg);
  double l1 = 0.0;
  for (double v : d.driver) l1 += std::max(v, 0.0);
  REQUIRE(l1 <= 0.01);
}

TEST_CASE("objective matches the dense projected-gradient oracle on small inputs") {
  CvxEdaParams prm;
  for (int trial = 0; trial < 3; ++trial) {
    std::mt19937_64 rng(100 + trial);
    std::normal_distribution<double> g(0.0, 0.02);
    std::vector<double> xs;
    int n = 48 + 8 * trial;  // <= 64 samples
    for (int i = 0; i < n; ++i) {
      double t = i / 4.0;
      xs.push_back(1.5 + 0.01 * t + 0.4 * scr_wave(t - 3.0) + g(rng));
    }
    Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, xs);
    EdaDecomposition d = cvxeda_decompose(seg, prm);
    auto oracle = oracles::solve_cvxeda_dense(xs, 4.0, prm);
    REQUIRE(d.solver_stats.objective == Approx(oracle.objective).margin(1e-6));
  }
}

TEST_CASE("scaling the input scales the decomposition when the l1 weight follows") {
  std::vector<double> xs;
  for (int i = 0; i < 160; ++i) {
    double t = i / 4.0;
    xs.push_back(2.0 + 0.5 * scr_wave(t - 10.0));
  }
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, xs);
  CvxEdaParams prm;
  EdaDecomposition d1 = cvxeda_decompose(seg, prm);

  const double c = 3.0;
  Segment scaled = seg;
  for (auto& v : scaled.samples) v *= c;
  CvxEdaParams prm_scaled = prm;
  prm_scaled.alpha *= c;
  EdaDecomposition dc = cvxeda_decompose(scaled, prm_scaled);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += std::abs(dc.phasic[i] - c * d1.phasic[i]) + std::abs(dc.tonic[i] - c * d1.tonic[i]);
    den += std::abs(c * d1.phasic[i]) + std::abs(c * d1.tonic[i]);
  }
  REQUIRE(num / den < 1e-4);
}

TEST_CASE("phasic_auc integrates the positive phasic part") {
  EdaDecomposition d;
  d.phasic.assign(41, 0.0);
  REQUIRE(phasic_auc(d, 4.0) == 0.0);

  d.phasic.assign(41, 1.0);  // 10 s rectangle at 4 Hz
  REQUIRE(phasic_auc(d, 4.0) == Approx(10.0).margin(0.25));

  // triangle: height 1, base 2 s (9 samples at 4 Hz), closed-form area 1
  d.phasic.assign(41, 0.0);
  for (int i = 0; i <= 4; ++i) {
    d.phasic[10 + i] = i / 4.0;
    d.phasic[18 - i] = i / 4.0;
  }
  REQUIRE(phasic_auc(d, 4.0) == Approx(1.0).margin(0.05));
}

TEST_CASE("segments shorter than 4 s are rejected") {
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, std::vector<double>(12, 2.0));
  REQUIRE_THROWS_AS(cvxeda_decompose(seg), Error);
}

TEST_CASE("short windows fall back to an affine-only tonic") {
  // 5 s at 4 Hz is shorter than the 10 s knot spacing
  std::vector<double> xs;
  for (int i = 0; i < 20; ++i) xs.push_back(1.0 + 0.02 * i);
  Segment seg = oracles::make_segment(SignalKind::Eda, 4.0, xs);
  EdaDecomposition d = cvxeda_decompose(seg);
  for (std::size_t i = 0; i < xs.size(); ++i)
    REQUIRE(d.tonic[i] == Approx(xs[i]).margin(0.02));
}
