// Copyright 2026 longsv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "longsv/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "longsv/common.hpp"

namespace longsv::dsp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// FFTW plan creation is not thread-safe; executions on distinct buffers are.
// One PlanPair per FFT size, created under a lock, then reused read-only.
struct PlanPair {
  int n = 0;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  // Scratch owned by the plan for alignment; callers copy in/out under lock.
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};

std::mutex g_fft_mutex;
std::map<int, PlanPair>& plan_cache() {
  static std::map<int, PlanPair> cache;
  return cache;
}

PlanPair& get_plans(int n) {
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  PlanPair p;
  p.n = n;
  p.real = fftw_alloc_real(size_t(n));
  p.cplx = fftw_alloc_complex(size_t(n / 2 + 1));
  p.fwd = fftw_plan_dft_r2c_1d(n, p.real, p.cplx, FFTW_ESTIMATE);
  p.inv = fftw_plan_dft_c2r_1d(n, p.cplx, p.real, FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void FrameSpec::validate() const {
  require(hop_length > 0 && win_length > 0 && fft_size > 0, Err::BadRange,
          "frame lengths must be positive");
  require(hop_length <= win_length && win_length <= fft_size, Err::BadRange,
          "need hop <= win <= fft_size");
}

size_t num_frames(size_t n_samples, const FrameSpec& spec) {
  if (n_samples < size_t(spec.win_length)) return 0;
  return (n_samples - size_t(spec.win_length)) / size_t(spec.hop_length) + 1;
}

size_t covered_length(size_t n_samples, const FrameSpec& spec) {
  const size_t win = size_t(spec.win_length), hop = size_t(spec.hop_length);
  if (n_samples <= win) return win;
  size_t frames = (n_samples - win + hop - 1) / hop + 1;
  return (frames - 1) * hop + win;
}

std::vector<double> make_window(Window kind, int length) {
  std::vector<double> w(static_cast<size_t>(length));
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int n = 0; n < length; ++n) {
    double c = std::cos(kTwoPi * n / (length - 1));
    w[size_t(n)] = kind == Window::hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

void rfft(const std::vector<double>& in, int fft_size,
          std::vector<std::complex<double>>& out) {
  std::lock_guard<std::mutex> lock(g_fft_mutex);
  PlanPair& p = get_plans(fft_size);
  size_t n_copy = std::min(in.size(), size_t(fft_size));
  std::memcpy(p.real, in.data(), n_copy * sizeof(double));
  if (n_copy < size_t(fft_size))
    std::memset(p.real + n_copy, 0, (size_t(fft_size) - n_copy) * sizeof(double));
  fftw_execute(p.fwd);
  out.resize(size_t(fft_size / 2 + 1));
  std::memcpy(out.data(), p.cplx, out.size() * sizeof(std::complex<double>));
}

void irfft(const std::vector<std::complex<double>>& in, int fft_size,
           std::vector<double>& out) {
  require(in.size() == size_t(fft_size / 2 + 1), Err::DimMismatch,
          "irfft bin count");
  std::lock_guard<std::mutex> lock(g_fft_mutex);
  PlanPair& p = get_plans(fft_size);
  std::memcpy(p.cplx, in.data(), in.size() * sizeof(std::complex<double>));
  fftw_execute(p.inv);
  out.resize(size_t(fft_size));
  const double scale = 1.0 / fft_size;
  for (int i = 0; i < fft_size; ++i) out[size_t(i)] = p.real[i] * scale;
}

Spectrogram stft(const Waveform& wave, const FrameSpec& spec) {
  spec.validate();
  const size_t frames = num_frames(wave.samples.size(), spec);
  require(frames >= 1, Err::TooShort,
          "signal shorter than one window (" +
              std::to_string(wave.samples.size()) + " < " +
              std::to_string(spec.win_length) + ")");

  Spectrogram sg;
  sg.frames = int(frames);
  sg.bins = spec.bins();
  sg.spec = spec;
  sg.mag.resize(frames * size_t(sg.bins));
  sg.phase.resize(frames * size_t(sg.bins));

  const std::vector<double> win = make_window(spec.window, spec.win_length);
  std::vector<double> buf(size_t(spec.fft_size), 0.0);
  std::vector<std::complex<double>> bins;

  for (size_t t = 0; t < frames; ++t) {
    const double* x = wave.samples.data() + t * size_t(spec.hop_length);
    for (int n = 0; n < spec.win_length; ++n) buf[size_t(n)] = x[n] * win[size_t(n)];
    // fft_size >= win_length; tail of buf stays zero
    rfft(buf, spec.fft_size, bins);
    double* mrow = sg.mag.data() + t * size_t(sg.bins);
    double* prow = sg.phase.data() + t * size_t(sg.bins);
    for (int k = 0; k < sg.bins; ++k) {
      mrow[k] = std::abs(bins[size_t(k)]);
      prow[k] = std::arg(bins[size_t(k)]);
    }
  }
  return sg;
}

Waveform istft(const Spectrogram& sg, const FrameSpec& spec,
               size_t out_length) {
  spec.validate();
  require(sg.bins == spec.bins(), Err::DimMismatch, "bin count");
  require(sg.phase.size() == sg.mag.size(), Err::DimMismatch,
          "istft needs phase");

  // Allow out_length to disagree with the frame count by at most one frame.
  const size_t implied =
      out_length < size_t(spec.win_length)
          ? 0
          : (out_length - size_t(spec.win_length)) / size_t(spec.hop_length) + 1;
  const long diff = long(implied) - long(sg.frames);
  require(diff >= -1 && diff <= 1, Err::DimMismatch,
          "out_length implies " + std::to_string(implied) + " frames, have " +
              std::to_string(sg.frames));

  const std::vector<double> win = make_window(spec.window, spec.win_length);
  std::vector<double> num(out_length, 0.0);
  std::vector<double> den(out_length, 0.0);
  std::vector<std::complex<double>> bins(size_t(sg.bins));
  std::vector<double> frame;

  for (int t = 0; t < sg.frames; ++t) {
    const double* mrow = sg.mag.data() + size_t(t) * sg.bins;
    const double* prow = sg.phase.data() + size_t(t) * sg.bins;
    for (int k = 0; k < sg.bins; ++k)
      bins[size_t(k)] = std::polar(mrow[k], prow[k]);
    irfft(bins, spec.fft_size, frame);
    const size_t start = size_t(t) * size_t(spec.hop_length);
    for (int n = 0; n < spec.win_length; ++n) {
      size_t i = start + size_t(n);
      if (i >= out_length) break;
      num[i] += win[size_t(n)] * frame[size_t(n)];
      den[i] += win[size_t(n)] * win[size_t(n)];
    }
  }

  Waveform out;
  out.samples.assign(out_length, 0.0);
  for (size_t i = 0; i < out_length; ++i)
    if (den[i] > 1e-12) out.samples[i] = num[i] / den[i];
  return out;
}

}  // namespace longsv::dsp
