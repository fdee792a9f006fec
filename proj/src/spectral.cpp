// SPDX-License-Identifier: Apache-2.0
#include "faigcn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "binary_io.hpp"
#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::spectral {

namespace {

bool is_power_of_two(std::size_t n) { return n && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform. `twiddles` holds exp(-2 pi i k / m)
// for k < m/2, where m = a.size().
void radix2(std::vector<Complex>& a, const std::vector<Complex>& twiddles, bool inverse) {
  const std::size_t m = a.size();
  for (std::size_t i = 1, j = 0; i < m; ++i) {
    std::size_t bit = m >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= m; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = m / len;
    for (std::size_t start = 0; start < m; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        Complex w = twiddles[k * step];
        if (inverse) w = std::conj(w);
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(m);
    for (auto& x : a) x *= scale;
  }
}

void check_length(std::size_t n) {
  if (n < 2) throw ParameterError("transform length must be at least 2");
}

}  // namespace

Spectrum dft_naive(const TimeSeries& series) {
  const std::size_t n = series.samples.size();
  check_length(n);
  Spectrum out;
  out.coefficients.resize(n);
  out.resolution = series.sample_rate / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n before scaling so the angle stays accurate for large n.
      const std::size_t r = (k * t) % n;
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
      acc += series.samples[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out.coefficients[k] = acc;
  }
  return out;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  check_length(n);
  if (is_power_of_two(n)) {
    m_ = n;
  } else {
    m_ = 1;
    while (m_ < 2 * n - 1) m_ <<= 1;
  }
  twiddles_.resize(m_ / 2);
  for (std::size_t k = 0; k < m_ / 2; ++k) {
    twiddles_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                       static_cast<double>(m_));
  }
  if (m_ == n_) return;

  chirp_.resize(n_);
  const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n_);
  for (std::size_t k = 0; k < n_; ++k) {
    // exp(-i pi k^2 / n) has period 2n in k^2.
    const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % two_n;
    chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n_));
  }
  kernel_.assign(m_, Complex{});
  kernel_[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n_; ++k) {
    kernel_[k] = std::conj(chirp_[k]);
    kernel_[m_ - k] = std::conj(chirp_[k]);
  }
  radix2(kernel_, twiddles_, false);
}

std::vector<Complex> FftPlan::forward(std::span<const Complex> input) const {
  if (input.size() != n_) {
    throw DimensionError("FFT plan of length " + std::to_string(n_) + " given " +
                         std::to_string(input.size()) + " samples");
  }
  if (m_ == n_) {
    std::vector<Complex> a(input.begin(), input.end());
    radix2(a, twiddles_, false);
    return a;
  }
  std::vector<Complex> a(m_, Complex{});
  for (std::size_t k = 0; k < n_; ++k) a[k] = input[k] * chirp_[k];
  radix2(a, twiddles_, false);
  for (std::size_t k = 0; k < m_; ++k) a[k] *= kernel_[k];
  radix2(a, twiddles_, true);
  std::vector<Complex> out(n_);
  for (std::size_t k = 0; k < n_; ++k) out[k] = a[k] * chirp_[k];
  return out;
}

std::vector<Complex> FftPlan::forward_real(std::span<const double> input) const {
  std::vector<Complex> c(input.begin(), input.end());
  return forward(c);
}

Spectrum fft_bluestein(const TimeSeries& series) {
  FftPlan plan(series.samples.size());
  Spectrum out;
  out.coefficients = plan.forward_real(series.samples);
  out.resolution = series.sample_rate / static_cast<double>(series.samples.size());
  return out;
}

std::vector<int> bin_widths(int b0, double c, int coverage) {
  if (b0 < 1) throw ParameterError("initial bin width must be >= 1");
  if (!(c > 1.0)) throw ParameterError("growth parameter c must be > 1");
  if (coverage < 1) throw ParameterError("coverage must be >= 1");
  std::vector<int> widths;
  long long total = 0;
  for (int n = 0; total < coverage; ++n) {
    const double v = static_cast<double>(b0) * std::pow(c, n);
    const double w = v < 3.0 ? std::round(v) : std::ceil(v);
    widths.push_back(static_cast<int>(w));
    total += widths.back();
  }
  return widths;
}

bool BinSchedule::unit_width() const noexcept {
  return std::all_of(widths.begin(), widths.end(), [](int w) { return w == 1; });
}

namespace {

void finish_edges(BinSchedule& s) {
  s.edges.assign(1, 0);
  int acc = 0;
  for (int w : s.widths) {
    acc = std::min(acc + w, s.coverage);
    s.edges.push_back(acc);
  }
}

int coverage_for(double fps, int n_fft, double cutoff_hz) {
  if (!(fps >= 24.0 && fps <= 60.0)) throw ParameterError("reference fps must lie in [24, 60]");
  if (n_fft < 2) throw ParameterError("FFT length must be >= 2");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fps / 2.0)) {
    throw ParameterError("cutoff must lie in (0, fps/2)");
  }
  const int coverage = static_cast<int>(std::floor(cutoff_hz * n_fft / fps + 1e-9)) + 1;
  if (coverage < 2) throw ParameterError("FFT window too short for the cutoff frequency");
  return coverage;
}

}  // namespace

BinSchedule build_schedule(double fps, int n_fft, double cutoff_hz, double c) {
  BinSchedule s;
  s.c = c;
  s.cutoff_hz = cutoff_hz;
  s.ref_fps = fps;
  s.n_fft = n_fft;
  s.coverage = coverage_for(fps, n_fft, cutoff_hz);
  s.widths = bin_widths(s.b0, c, s.coverage);
  finish_edges(s);
  return s;
}

BinSchedule build_unit_schedule(double fps, int n_fft, double cutoff_hz) {
  BinSchedule s;
  s.c = 1.0;
  s.cutoff_hz = cutoff_hz;
  s.ref_fps = fps;
  s.n_fft = n_fft;
  s.coverage = coverage_for(fps, n_fft, cutoff_hz);
  s.widths.assign(static_cast<std::size_t>(s.coverage), 1);
  finish_edges(s);
  return s;
}

TimeSeries resample(const TimeSeries& series, double target_fps) {
  if (!(target_fps > 0.0)) throw ParameterError("target fps must be positive");
  if (!(series.sample_rate > 0.0)) throw ParameterError("sample rate must be positive");
  if (target_fps == series.sample_rate || series.samples.size() < 2) {
    return TimeSeries{series.samples, target_fps};
  }
  const auto& x = series.samples;
  const std::size_t n = x.size();
  const double duration = static_cast<double>(n - 1) / series.sample_rate;
  const auto m = static_cast<std::size_t>(std::floor(duration * target_fps + 1e-9)) + 1;
  TimeSeries out{std::vector<double>(m), target_fps};
  const double ratio = series.sample_rate / target_fps;
  for (std::size_t i = 0; i < m; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) {
      out.samples[i] = x[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    out.samples[i] = x[lo] + (x[lo + 1] - x[lo]) * frac;
  }
  return out;
}

namespace {

std::vector<double> magnitudes_with(const FftPlan& plan, std::span<const double> samples,
                                    double sample_rate, const BinSchedule& schedule) {
  TimeSeries ts{std::vector<double>(samples.begin(), samples.end()), sample_rate};
  if (sample_rate != schedule.ref_fps) ts = resample(ts, schedule.ref_fps);
  const auto n_fft = static_cast<std::size_t>(schedule.n_fft);
  if (ts.samples.size() > n_fft) ts.samples.resize(n_fft);
  const double mean = ts.samples.empty()
                          ? 0.0
                          : std::accumulate(ts.samples.begin(), ts.samples.end(), 0.0) /
                                static_cast<double>(ts.samples.size());
  for (auto& v : ts.samples) v -= mean;
  ts.samples.resize(n_fft, 0.0);
  const auto coeffs = plan.forward_real(ts.samples);
  std::vector<double> mags(static_cast<std::size_t>(schedule.coverage));
  for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(coeffs[k]);
  return mags;
}

}  // namespace

std::vector<double> channel_magnitudes(std::span<const double> samples, double sample_rate,
                                       const BinSchedule& schedule) {
  FftPlan plan(static_cast<std::size_t>(schedule.n_fft));
  return magnitudes_with(plan, samples, sample_rate, schedule);
}

SpectralFeatures extract_features(const PoseSequence& seq,
                                  std::shared_ptr<const BinSchedule> schedule) {
  if (!schedule) throw ParameterError("missing bin schedule");
  seq.validate();
  const FftPlan plan(static_cast<std::size_t>(schedule->n_fft));
  SpectralFeatures out;
  out.num_bins = schedule->num_bins();
  out.values.assign(out.num_bins * kNumJoints * kNumChannels, 0.0);
  out.subject_id = seq.subject_id;
  out.label = seq.label;

  std::vector<double> samples(seq.frames.size());
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
      for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        samples[f] = ch == 0 ? seq.frames[f][j].x : seq.frames[f][j].y;
      }
      const auto mags = magnitudes_with(plan, samples, seq.fps, *schedule);
      for (std::size_t b = 0; b < out.num_bins; ++b) {
        const auto lo = static_cast<std::size_t>(schedule->edges[b]);
        const auto hi = static_cast<std::size_t>(schedule->edges[b + 1]);
        double acc = 0.0;
        for (std::size_t k = lo; k < hi; ++k) acc += mags[k];
        out.values[(b * kNumJoints + j) * kNumChannels + ch] = acc / static_cast<double>(hi - lo);
      }
    }
  }
  out.schedule = std::move(schedule);
  return out;
}

double search_c(std::span<const double> grid, const std::function<double(double)>& accuracy) {
  if (grid.empty()) throw ParameterError("c grid is empty");
  for (double c : grid) {
    if (!(c > 1.0)) throw ParameterError("every c in the grid must be > 1");
  }
  double best_c = grid.front();
  double best_acc = accuracy(best_c);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double acc = accuracy(grid[i]);
    if (acc > best_acc || (acc == best_acc && grid[i] < best_c)) {
      best_acc = acc;
      best_c = grid[i];
    }
  }
  return best_c;
}

// --- serialization ----------------------------------------------------------

namespace {

std::shared_ptr<const BinSchedule> schedule_from(int b0, double c, double cutoff, double ref_fps,
                                                 int n_fft, int coverage, std::vector<int> widths) {
  auto s = std::make_shared<BinSchedule>();
  s->b0 = b0;
  s->c = c;
  s->cutoff_hz = cutoff;
  s->ref_fps = ref_fps;
  s->n_fft = n_fft;
  s->coverage = coverage;
  s->widths = std::move(widths);
  long long total = 0;
  for (int w : s->widths) {
    if (w < 1) throw FormatError("bin width must be >= 1");
    total += w;
  }
  if (total < coverage || s->widths.empty()) throw FormatError("bin widths do not cover the coefficients");
  finish_edges(*s);
  return s;
}

void check_schedule(const SpectralFeatures& f) {
  if (!f.schedule) throw FormatError("features carry no schedule");
  if (f.schedule->num_bins() != f.num_bins ||
      f.values.size() != f.num_bins * kNumJoints * kNumChannels) {
    throw DimensionError("feature tensor does not match its schedule");
  }
}

}  // namespace

std::string serialize_features_text(const SpectralFeatures& f) {
  check_schedule(f);
  const auto& s = *f.schedule;
  std::string out = "faigcn-features " + std::to_string(kFeatureFormatVersion) + "\n";
  out += "subject_id " + f.subject_id + "\n";
  out += "label ";
  out += f.label ? label_name(*f.label) : std::string_view("unknown");
  out += "\nshape " + std::to_string(f.num_bins) + " " + std::to_string(kNumJoints) + " " +
         std::to_string(kNumChannels) + "\n";
  out += "schedule " + std::to_string(s.b0) + " " + fmt::shortest(s.c) + " " +
         fmt::shortest(s.cutoff_hz) + " " + fmt::shortest(s.ref_fps) + " " +
         std::to_string(s.n_fft) + " " + std::to_string(s.coverage) + "\n";
  out += "widths";
  for (int w : s.widths) out += " " + std::to_string(w);
  out += "\n";
  for (std::size_t b = 0; b < f.num_bins; ++b) {
    for (std::size_t k = 0; k < kNumJoints * kNumChannels; ++k) {
      if (k) out += ' ';
      out += fmt::shortest(f.values[b * kNumJoints * kNumChannels + k]);
    }
    out += '\n';
  }
  return out;
}

SpectralFeatures parse_features_text(std::string_view text) {
  auto lines = fmt::split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t cursor = 0;
  auto fields = [&](std::string_view key) {
    if (cursor >= lines.size()) throw FormatError("feature file truncated before '" + std::string(key) + "'");
    auto toks = fmt::split_ws(lines[cursor++]);
    if (toks.empty() || toks.front() != key) {
      throw FormatError("feature file line " + std::to_string(cursor) + ": expected '" + std::string(key) + "'");
    }
    toks.erase(toks.begin());
    return toks;
  };
  auto version = fields("faigcn-features");
  if (version.size() != 1 || fmt::to_integer(version[0]) != kFeatureFormatVersion) {
    throw FormatError("unsupported feature format version");
  }
  SpectralFeatures f;
  auto subject = fields("subject_id");
  f.subject_id = subject.empty() ? "" : std::string(subject[0]);
  auto label = fields("label");
  if (label.size() != 1) throw FormatError("bad label line");
  if (label[0] != "unknown") {
    f.label = label_from_name(label[0]);
    if (!f.label) throw FormatError("unknown label '" + std::string(label[0]) + "'");
  }
  auto shape = fields("shape");
  if (shape.size() != 3 || fmt::to_integer(shape[1]) != static_cast<long long>(kNumJoints) ||
      fmt::to_integer(shape[2]) != static_cast<long long>(kNumChannels)) {
    throw FormatError("feature shape must be B x 18 x 2");
  }
  f.num_bins = static_cast<std::size_t>(fmt::to_integer(shape[0]));
  auto sched = fields("schedule");
  if (sched.size() != 6) throw FormatError("schedule line needs 6 fields");
  std::vector<int> widths;
  for (auto w : fields("widths")) widths.push_back(static_cast<int>(fmt::to_integer(w)));
  f.schedule = schedule_from(static_cast<int>(fmt::to_integer(sched[0])), fmt::to_double(sched[1]),
                             fmt::to_double(sched[2]), fmt::to_double(sched[3]),
                             static_cast<int>(fmt::to_integer(sched[4])),
                             static_cast<int>(fmt::to_integer(sched[5])), std::move(widths));
  if (lines.size() - cursor != f.num_bins) throw FormatError("feature row count does not match shape");
  f.values.reserve(f.num_bins * kNumJoints * kNumChannels);
  for (; cursor < lines.size(); ++cursor) {
    auto toks = fmt::split_ws(lines[cursor]);
    if (toks.size() != kNumJoints * kNumChannels) throw FormatError("feature row must have 36 values");
    for (auto t : toks) f.values.push_back(fmt::to_double(t));
  }
  check_schedule(f);
  return f;
}

namespace {
constexpr std::string_view kFeatureMagic = "FAIGFEAT";
}

std::string serialize_features_binary(const SpectralFeatures& f) {
  check_schedule(f);
  const auto& s = *f.schedule;
  detail::ByteWriter w;
  w.raw(kFeatureMagic);
  w.u32(kFeatureFormatVersion);
  w.str(f.subject_id);
  w.u8(f.label ? static_cast<std::uint8_t>(*f.label) : 0xFF);
  w.u64(f.num_bins);
  w.u32(kNumJoints);
  w.u32(kNumChannels);
  w.i32(s.b0);
  w.f64(s.c);
  w.f64(s.cutoff_hz);
  w.f64(s.ref_fps);
  w.i32(s.n_fft);
  w.i32(s.coverage);
  w.u32(static_cast<std::uint32_t>(s.widths.size()));
  for (int wd : s.widths) w.i32(wd);
  for (double v : f.values) w.f64(v);
  return w.take();
}

SpectralFeatures parse_features_binary(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(kFeatureMagic.size()) != kFeatureMagic) throw ParseError("not a binary feature file", 0);
  if (r.u32() != kFeatureFormatVersion) throw FormatError("unsupported feature format version");
  SpectralFeatures f;
  f.subject_id = r.str();
  const auto label = r.u8();
  if (label == 0 || label == 1) f.label = static_cast<Label>(label);
  else if (label != 0xFF) throw FormatError("bad label code");
  f.num_bins = r.u64();
  if (r.u32() != kNumJoints || r.u32() != kNumChannels) throw FormatError("feature shape must be B x 18 x 2");
  const int b0 = r.i32();
  const double c = r.f64();
  const double cutoff = r.f64();
  const double ref_fps = r.f64();
  const int n_fft = r.i32();
  const int coverage = r.i32();
  std::vector<int> widths(r.u32());
  for (auto& wd : widths) wd = r.i32();
  f.schedule = schedule_from(b0, c, cutoff, ref_fps, n_fft, coverage, std::move(widths));
  f.values.resize(f.num_bins * kNumJoints * kNumChannels);
  for (auto& v : f.values) v = r.f64();
  if (!r.done()) throw FormatError("trailing bytes in feature file");
  check_schedule(f);
  return f;
}

}  // namespace faigcn::spectral
