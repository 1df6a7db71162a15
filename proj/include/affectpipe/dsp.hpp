#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "affectpipe/errors.hpp"
#include "affectpipe/model.hpp"

namespace affectpipe {

// ---------------------------------------------------------------------------
// EEG bands

struct BandSpec {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

// Default band edges. The conventional theta/alpha boundary is used; band
// edges are configurable where band powers are computed.
inline std::vector<BandSpec> default_bands() {
  return {{"delta", 0.5, 4.0},
          {"theta", 4.0, 7.5},
          {"alpha", 7.5, 12.5},
          {"beta", 12.5, 30.0},
          {"gamma", 30.0, 45.0}};
}

// ---------------------------------------------------------------------------
// Segments and baseline statistics

// A contiguous slice of one trace. Source interval is half-open [t0, t1).
struct Segment {
  SignalKind kind = SignalKind::Eda;
  double sample_rate_hz = 0.0;
  std::vector<double> samples;
  double t0_ms = 0.0;
  double t1_ms = 0.0;

  double duration_s() const { return samples.size() / sample_rate_hz; }
};

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;       // population (divide by n)
  bool degenerate = false;   // stddev == 0; normalization falls back to mean subtraction
};

struct BaselineStats {
  std::map<SignalKind, ChannelStats> per_kind;

  const ChannelStats* find(SignalKind k) const {
    auto it = per_kind.find(k);
    return it == per_kind.end() ? nullptr : &it->second;
  }
};

inline ChannelStats compute_stats(const std::vector<double>& xs) {
  ChannelStats st;
  if (xs.empty()) return st;
  double n = static_cast<double>(xs.size());
  st.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - st.mean) * (x - st.mean);
  st.stddev = std::sqrt(ss / n);
  st.degenerate = !(st.stddev > 0.0);
  return st;
}

// ---------------------------------------------------------------------------
// Window extraction

// Samples with timestamp in [t_end - duration, t_end). The window must be
// fully covered by the trace and free of gap annotations.
inline Segment extract_window(const SignalTrace& t, std::int64_t t_end_ms,
                              std::int64_t duration_ms = 10000) {
  std::int64_t t_start_ms = t_end_ms - duration_ms;
  if (!t.covers(t_start_ms, t_end_ms))
    fail(Errc::InsufficientData,
         std::string(kind_name(t.kind)) + " trace does not cover [" +
             std::to_string(t_start_ms) + ", " + std::to_string(t_end_ms) + ") ms");
  if (t.has_gap_in(t_start_ms, t_end_ms))
    fail(Errc::GapInWindow,
         std::string(kind_name(t.kind)) + " window [" + std::to_string(t_start_ms) + ", " +
             std::to_string(t_end_ms) + ") ms overlaps a recording gap");

  double period = t.period_ms();
  auto first_at_or_after = [&](std::int64_t tm) {
    double idx = (static_cast<double>(tm) - static_cast<double>(t.start_ms)) / period;
    auto i = static_cast<std::int64_t>(std::ceil(idx - 1e-9));
    return std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(t.samples.size()));
  };
  std::int64_t i0 = first_at_or_after(t_start_ms);
  std::int64_t i1 = first_at_or_after(t_end_ms);

  Segment seg;
  seg.kind = t.kind;
  seg.sample_rate_hz = t.sample_rate_hz;
  seg.t0_ms = static_cast<double>(t_start_ms);
  seg.t1_ms = static_cast<double>(t_end_ms);
  seg.samples.assign(t.samples.begin() + i0, t.samples.begin() + i1);
  return seg;
}

// Per-kind mean/std over the session's baseline interval.
inline BaselineStats baseline_stats(const SessionRecord& s) {
  BaselineStats b;
  for (const auto& [k, t] : s.traces) {
    Segment seg = extract_window(t, s.baseline_interval.t1_ms,
                                 s.baseline_interval.length_ms());
    if (seg.samples.empty())
      fail(Errc::InsufficientData,
           std::string(kind_name(k)) + " has no samples in the baseline interval");
    b.per_kind[k] = compute_stats(seg.samples);
  }
  return b;
}

inline Segment zscore_normalize(const Segment& seg, const BaselineStats& b) {
  const ChannelStats* st = b.find(seg.kind);
  if (!st)
    fail(Errc::MissingBaseline,
         std::string("no baseline stats for kind ") + kind_name(seg.kind));
  Segment out = seg;
  for (double& v : out.samples) {
    v -= st->mean;
    if (!st->degenerate) v /= st->stddev;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Welch band power

namespace detail {

// One-sided Welch PSD: Hann window, mean-detrended segments. Returns PSD
// values at frequencies k * fs / nper for k = 0..nper/2.
inline std::vector<double> welch_psd(const std::vector<double>& x, double fs, std::size_t nper) {
  std::size_t step = nper / 2;  // 50% overlap
  std::vector<double> window(nper);
  double u = 0.0;
  for (std::size_t i = 0; i < nper; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (nper - 1)));
    u += window[i] * window[i];
  }
  std::size_t nbins = nper / 2 + 1;
  std::vector<double> psd(nbins, 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  std::vector<double> buf(nper);
  std::size_t nseg = 0;
  for (std::size_t off = 0; off + nper <= x.size(); off += step) {
    double mean = std::accumulate(x.begin() + off, x.begin() + off + nper, 0.0) / nper;
    for (std::size_t i = 0; i < nper; ++i) buf[i] = (x[off + i] - mean) * window[i];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < nbins; ++k) {
      double scale = (k == 0 || (nper % 2 == 0 && k == nbins - 1)) ? 1.0 : 2.0;
      psd[k] += scale * std::norm(spec[k]) / (fs * u);
    }
    ++nseg;
  }
  if (nseg == 0) return {};
  for (double& v : psd) v /= nseg;
  return psd;
}

}  // namespace detail

// Mean band power per band from a Welch periodogram (2 s segments, 50%
// overlap, Hann window), integrated over [low, high).
inline std::map<std::string, double> band_powers(
    const Segment& seg, const std::vector<BandSpec>& bands = default_bands()) {
  double fs = seg.sample_rate_hz;
  for (const auto& b : bands) {
    if (!(0.0 <= b.low_hz && b.low_hz < b.high_hz && b.high_hz <= fs / 2.0))
      fail(Errc::OutOfRange, "band " + b.name + " outside [0, fs/2]");
  }
  auto nper = static_cast<std::size_t>(std::lround(2.0 * fs));
  if (seg.samples.size() < nper)
    fail(Errc::TooShort, "band_powers needs at least 2 s of signal, got " +
                             std::to_string(seg.samples.size()) + " samples");
  std::vector<double> psd = detail::welch_psd(seg.samples, fs, nper);
  double df = fs / static_cast<double>(nper);
  std::map<std::string, double> out;
  for (const auto& b : bands) {
    double p = 0.0;
    for (std::size_t k = 0; k < psd.size(); ++k) {
      double f = k * df;
      if (f >= b.low_hz && f < b.high_hz) p += psd[k] * df;
    }
    out[b.name] = p;
  }
  return out;
}

// Total signal power (population variance); Parseval-side of band_powers.
inline double total_power(const Segment& seg) {
  ChannelStats st = compute_stats(seg.samples);
  return st.stddev * st.stddev;
}

// ---------------------------------------------------------------------------
// Peak detection

struct Peak {
  std::size_t index = 0;
  double amplitude = 0.0;
};

// Strict interior local maxima with amplitude >= min_amp, thinned greedily by
// descending amplitude so surviving peaks are >= min_dist_ms apart.
inline std::vector<Peak> detect_peaks(const Segment& seg, double min_amp,
                                      double min_dist_ms) {
  const auto& x = seg.samples;
  std::vector<Peak> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] >= min_amp)
      cand.push_back({i, x[i]});
  }
  std::stable_sort(cand.begin(), cand.end(), [](const Peak& a, const Peak& b) {
    if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
    return a.index < b.index;
  });
  double min_dist_samples = min_dist_ms * seg.sample_rate_hz / 1000.0;
  std::vector<Peak> kept;
  for (const Peak& p : cand) {
    bool ok = true;
    for (const Peak& q : kept) {
      double d = p.index > q.index ? double(p.index - q.index) : double(q.index - p.index);
      if (d < min_dist_samples) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Peak& a, const Peak& b) { return a.index < b.index; });
  return kept;
}

// ---------------------------------------------------------------------------
// Butterworth band-pass (4th order) with zero-phase application

struct FilterCoeffs {
  std::vector<double> b;  // numerator, b[0] leading
  std::vector<double> a;  // denominator, a[0] == 1
};

namespace detail {

inline std::vector<std::complex<double>> poly_from_roots(
    const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  return c;
}

}  // namespace detail

// Butterworth band-pass of order 2*n_prototype via the analog band transform
// and bilinear mapping; gain normalized to 1 at the geometric band center.
inline FilterCoeffs butter_bandpass(double low_hz, double high_hz, double fs,
                                    int n_prototype = 2) {
  using cd = std::complex<double>;
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
    fail(Errc::OutOfRange, "band-pass edges must satisfy 0 < low < high < fs/2");
  double w1 = 2.0 * fs * std::tan(M_PI * low_hz / fs);
  double w2 = 2.0 * fs * std::tan(M_PI * high_hz / fs);
  double w0sq = w1 * w2;
  double bw = w2 - w1;

  std::vector<cd> zpoles;
  for (int k = 0; k < n_prototype; ++k) {
    double theta = M_PI * (2.0 * k + n_prototype + 1.0) / (2.0 * n_prototype);
    cd p = std::polar(1.0, theta);  // lowpass prototype pole, Re < 0
    cd bp = bw * p;
    cd disc = std::sqrt(bp * bp - 4.0 * w0sq);
    for (cd s : {(bp + disc) / 2.0, (bp - disc) / 2.0})
      zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));
  }
  std::vector<cd> zzeros;
  for (int k = 0; k < n_prototype; ++k) {
    zzeros.emplace_back(1.0);   // analog zeros at s = 0
    zzeros.emplace_back(-1.0);  // analog zeros at infinity
  }

  auto bnum = detail::poly_from_roots(zzeros);
  auto aden = detail::poly_from_roots(zpoles);
  FilterCoeffs f;
  f.b.resize(bnum.size());
  f.a.resize(aden.size());
  for (std::size_t i = 0; i < bnum.size(); ++i) f.b[i] = bnum[i].real();
  for (std::size_t i = 0; i < aden.size(); ++i) f.a[i] = aden[i].real();

  double wc = 2.0 * M_PI * std::sqrt(low_hz * high_hz) / fs;
  cd z = std::polar(1.0, wc);
  cd num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.b.size(); ++i) num += f.b[i] * std::pow(z, -double(i));
  for (std::size_t i = 0; i < f.a.size(); ++i) den += f.a[i] * std::pow(z, -double(i));
  double gain = std::abs(num / den);
  for (double& v : f.b) v /= gain;
  return f;
}

namespace detail {

// Direct form II transposed with initial state zi (scaled by caller).
inline std::vector<double> lfilter(const FilterCoeffs& f, const std::vector<double>& x,
                                   std::vector<double> z) {
  std::size_t n = f.a.size();
  z.resize(n - 1, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double yi = f.b[0] * x[i] + z[0];
    for (std::size_t j = 1; j < n; ++j) {
      double zj = (j < n - 1) ? z[j] : 0.0;
      z[j - 1] = f.b[j] * x[i] + zj - f.a[j] * yi;
    }
    y[i] = yi;
  }
  return y;
}

// Steady-state filter state for a unit step input; removes startup
// transients when scaled by the first sample.
inline std::vector<double> lfilter_zi(const FilterCoeffs& f) {
  int n = static_cast<int>(f.a.size()) - 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  // I - companion(a)^T
  for (int i = 0; i < n; ++i) m(i, 0) += f.a[i + 1];
  for (int i = 0; i + 1 < n; ++i) m(i, i + 1) -= 1.0;
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = f.b[i + 1] - f.a[i + 1] * f.b[0];
  Eigen::VectorXd zi = m.colPivHouseholderQr().solve(rhs);
  return std::vector<double>(zi.data(), zi.data() + n);
}

}  // namespace detail

// Forward-backward filtering with odd-symmetric edge extension.
inline std::vector<double> filtfilt(const FilterCoeffs& f, const std::vector<double>& x) {
  std::size_t order = std::max(f.a.size(), f.b.size());
  std::size_t padlen = 3 * order;
  if (x.size() <= padlen)
    fail(Errc::TooShort, "filtfilt input shorter than required padding of " +
                             std::to_string(padlen) + " samples");
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 2; i <= padlen + 1; ++i) ext.push_back(2.0 * x.back() - x[x.size() - i]);

  std::vector<double> zi = detail::lfilter_zi(f);
  auto scale = [&](double x0) {
    std::vector<double> z = zi;
    for (double& v : z) v *= x0;
    return z;
  };
  std::vector<double> y = detail::lfilter(f, ext, scale(ext.front()));
  std::reverse(y.begin(), y.end());
  y = detail::lfilter(f, y, scale(y.front()));
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + padlen, y.end() - padlen);
}

// ---------------------------------------------------------------------------
// Heart rate from BVP

struct HrDerivation {
  Segment hr;                        // 1 Hz bpm series
  bool in_physiological_range = true;  // all values within [30, 220] bpm
};

// Systolic beats from a 0.7-3.5 Hz band-limited BVP segment; HR at 1 Hz via
// 60 / mean inter-beat interval in a 5 s sliding window.
inline HrDerivation derive_hr(const Segment& seg) {
  if (seg.kind != SignalKind::Bvp)
    fail(Errc::SchemaMismatch, "derive_hr expects a BVP segment");
  if (seg.duration_s() < 10.0)
    fail(Errc::TooShort, "derive_hr needs at least 10 s of BVP");

  FilterCoeffs f = butter_bandpass(0.7, 3.5, seg.sample_rate_hz);
  Segment filt = seg;
  filt.samples = filtfilt(f, seg.samples);

  ChannelStats st = compute_stats(filt.samples);
  ChannelStats raw = compute_stats(seg.samples);
  // a constant input leaves only numerical noise after band-limiting
  double flat_floor = 1e-12 * std::max(1.0, std::abs(raw.mean) + raw.stddev);
  if (st.stddev <= flat_floor) fail(Errc::NoBeatsDetected, "BVP segment is flat");
  double min_amp = st.stddev * std::sqrt(2.0) * 0.5;  // half the amplitude of a pure tone
  std::vector<Peak> beats = detect_peaks(filt, min_amp, 60000.0 / 220.0);
  if (beats.size() < 2)
    fail(Errc::NoBeatsDetected, "fewer than two systolic peaks found");

  double period = 1000.0 / seg.sample_rate_hz;
  std::vector<double> ibi_ms, ibi_mid_ms;
  for (std::size_t i = 0; i + 1 < beats.size(); ++i) {
    double ta = seg.t0_ms + beats[i].index * period;
    double tb = seg.t0_ms + beats[i + 1].index * period;
    ibi_ms.push_back(tb - ta);
    ibi_mid_ms.push_back((ta + tb) / 2.0);
  }
  double global_mean = std::accumulate(ibi_ms.begin(), ibi_ms.end(), 0.0) / ibi_ms.size();

  HrDerivation out;
  out.hr.kind = SignalKind::Hr;
  out.hr.sample_rate_hz = 1.0;
  out.hr.t0_ms = seg.t0_ms;
  out.hr.t1_ms = seg.t1_ms;
  auto nsec = static_cast<std::size_t>(std::floor(seg.duration_s()));
  for (std::size_t j = 0; j < nsec; ++j) {
    double tc = seg.t0_ms + (j + 0.5) * 1000.0;
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < ibi_ms.size(); ++i) {
      if (std::abs(ibi_mid_ms[i] - tc) <= 2500.0) {
        sum += ibi_ms[i];
        ++cnt;
      }
    }
    double mean_ibi = cnt > 0 ? sum / cnt : global_mean;
    double bpm = 60000.0 / mean_ibi;
    if (bpm < 30.0 || bpm > 220.0) out.in_physiological_range = false;
    out.hr.samples.push_back(bpm);
  }
  return out;
}

}  // namespace affectpipe
