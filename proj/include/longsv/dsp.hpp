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

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "longsv/audio.hpp"

namespace longsv::dsp {

enum class Window { hann, hamming };

/// Frame geometry: 25 ms window / 10 ms hop at 16 kHz by default.
/// Framing is non-centered: frame t starts at sample t*hop.
struct FrameSpec {
  int win_length = 400;
  int hop_length = 160;
  int fft_size = 512;
  Window window = Window::hamming;

  int bins() const { return fft_size / 2 + 1; }
  void validate() const;
};

/// T = floor((n - win)/hop) + 1 for n >= win, else 0.
size_t num_frames(size_t n_samples, const FrameSpec& spec);

/// Shortest signal length whose frame count is >= the frame count of n,
/// covering every sample of the original (used to pad before filtering).
size_t covered_length(size_t n_samples, const FrameSpec& spec);

std::vector<double> make_window(Window kind, int length);

/// Magnitude + phase short-time spectra, frame-major.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> mag;    // frames*bins, row-major
  std::vector<double> phase;  // same layout; empty if magnitude-only
  FrameSpec spec;

  double& m(int t, int k) { return mag[size_t(t) * bins + k]; }
  double mv(int t, int k) const { return mag[size_t(t) * bins + k]; }
  double& p(int t, int k) { return phase[size_t(t) * bins + k]; }
  double pv(int t, int k) const { return phase[size_t(t) * bins + k]; }
};

/// Windowed DFT magnitudes and phases of non-centered frames.
/// Throws TooShort when the signal holds less than one window.
Spectrogram stft(const Waveform& wave, const FrameSpec& spec);

/// Weighted overlap-add inverse with window-squared normalization.
/// out_length may differ from the natural length by at most one frame's
/// worth of samples; beyond that it is a DimMismatch. Samples not covered
/// by any frame (at most hop-1 at the tail) come out as zero. The returned
/// sample rate is the default; callers stamp their own.
Waveform istft(const Spectrogram& sg, const FrameSpec& spec,
               size_t out_length);

/// Real FFT of size fft_size (input zero-padded/truncated as given),
/// returning fft_size/2+1 complex bins. Plans are cached per size.
void rfft(const std::vector<double>& in, int fft_size,
          std::vector<std::complex<double>>& out);

/// Inverse of rfft, already scaled by 1/fft_size.
void irfft(const std::vector<std::complex<double>>& in, int fft_size,
           std::vector<double>& out);

}  // namespace longsv::dsp

namespace longsv {
using dsp::covered_length;
using dsp::FrameSpec;
using dsp::irfft;
using dsp::istft;
using dsp::make_window;
using dsp::num_frames;
using dsp::rfft;
using dsp::Spectrogram;
using dsp::stft;
using dsp::Window;
}  // namespace longsv
