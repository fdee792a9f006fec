// SPDX-License-Identifier: Apache-2.0
#pragma once

// Frequency-domain features: arbitrary-length DFT via Bluestein's chirp-z
// algorithm, the exponential bin-width schedule, and per-joint binned
// magnitude spectra.

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/pose.hpp"

namespace faigcn::spectral {

using Complex = std::complex<double>;

struct TimeSeries {
  std::vector<double> samples;
  double sample_rate = 25.0;
};

struct Spectrum {
  std::vector<Complex> coefficients;
  double resolution = 0.0;  ///< Hz per coefficient (sample_rate / N)
};

/// Direct O(N^2) evaluation of X_k = sum_n x_n exp(-i 2 pi k n / N).
Spectrum dft_naive(const TimeSeries& series);

/// Reusable transform of one fixed length. Power-of-two lengths run a radix-2
/// FFT directly; every other length goes through the chirp-z reduction to a
/// power-of-two circular convolution. Immutable after construction.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::vector<Complex> forward(std::span<const Complex> input) const;
  std::vector<Complex> forward_real(std::span<const double> input) const;

 private:
  std::size_t n_;
  std::size_t m_;                  // convolution length (power of two); == n_ on the radix-2 path
  std::vector<Complex> twiddles_;  // exp(-2 pi i k / m_), k < m_/2
  std::vector<Complex> chirp_;     // exp(-i pi k^2 / n_)
  std::vector<Complex> kernel_;    // FFT of the conjugate chirp, wrapped to length m_
};

/// Exact DFT of any length N >= 2 (including prime N).
Spectrum fft_bluestein(const TimeSeries& series);

/// Widths b_n for n = 0, 1, ...: Round(b0 c^n) while b0 c^n < 3, Ceiling(b0 c^n)
/// afterwards (Round is half-away-from-zero). Stops once the running total
/// reaches `coverage`.
std::vector<int> bin_widths(int b0, double c, int coverage);

struct BinSchedule {
  int b0 = 1;
  double c = 1.00264;
  double cutoff_hz = 6.0;
  double ref_fps = 25.0;
  int n_fft = 1000;
  int coverage = 0;          ///< number of coefficients kept (indices 0..coverage-1)
  std::vector<int> widths;   ///< as emitted by bin_widths; the last may overhang
  std::vector<int> edges;    ///< size num_bins()+1, edges[0]=0, edges.back()=coverage

  std::size_t num_bins() const noexcept { return widths.size(); }
  double resolution() const noexcept { return ref_fps / n_fft; }
  /// True when every bin holds exactly one coefficient (the no-binning limit).
  bool unit_width() const noexcept;
};

inline constexpr double kDefaultC = 1.00264;
inline constexpr double kDefaultCutoffHz = 6.0;
inline constexpr double kReferenceFps = 25.0;
inline constexpr int kDefaultFftLength = 1000;

/// coverage = floor(cutoff_hz * n_fft / fps) + 1.
BinSchedule build_schedule(double fps = kReferenceFps, int n_fft = kDefaultFftLength,
                           double cutoff_hz = kDefaultCutoffHz, double c = kDefaultC);

/// Width-1 bins over the same coverage: the unbinned variant.
BinSchedule build_unit_schedule(double fps = kReferenceFps, int n_fft = kDefaultFftLength,
                                double cutoff_hz = kDefaultCutoffHz);

/// Linear interpolation onto a uniform grid at target_fps spanning the
/// original duration ((N-1) / sample_rate seconds).
TimeSeries resample(const TimeSeries& series, double target_fps);

inline constexpr std::size_t kNumChannels = 2;  // x, y

struct SpectralFeatures {
  std::size_t num_bins = 0;
  std::vector<double> values;  ///< row-major (bin, joint, channel)
  std::shared_ptr<const BinSchedule> schedule;
  std::string subject_id;
  std::optional<Label> label;

  double at(std::size_t bin, std::size_t joint, std::size_t channel) const {
    return values[(bin * kNumJoints + joint) * kNumChannels + channel];
  }
};

/// For every joint and channel: resample to the schedule's reference rate,
/// truncate to n_fft samples, subtract the mean, zero-pad to n_fft, transform,
/// and average |X_k| over the coefficients of each bin.
SpectralFeatures extract_features(const PoseSequence& seq,
                                  std::shared_ptr<const BinSchedule> schedule);

/// Magnitudes |X_k| for k < coverage of one prepared channel; exposed for
/// inspection tools and tests.
std::vector<double> channel_magnitudes(std::span<const double> samples, double sample_rate,
                                       const BinSchedule& schedule);

/// Grid search over c. Returns the value with the highest `accuracy(c)`;
/// ties go to the smallest c. Throws ParameterError on an empty grid or c <= 1.
double search_c(std::span<const double> grid, const std::function<double(double)>& accuracy);

// --- serialization ----------------------------------------------------------

inline constexpr int kFeatureFormatVersion = 1;

/// Text form: header lines then one row per bin (18 joints x 2 channels).
std::string serialize_features_text(const SpectralFeatures& features);
SpectralFeatures parse_features_text(std::string_view text);

/// Binary form: magic "FAIGFEAT", little-endian fields, IEEE-754 values.
std::string serialize_features_binary(const SpectralFeatures& features);
SpectralFeatures parse_features_binary(std::string_view bytes);

}  // namespace faigcn::spectral
