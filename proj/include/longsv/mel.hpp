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

#include <string>
#include <vector>

#include "longsv/dsp.hpp"

namespace longsv::dsp {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filterbank. Rows are non-negative and unimodal, ordered
/// by ascending center frequency, evaluated at the FFT bin frequencies.
struct MelMatrix {
  int n_mels = 80;
  int fft_size = 512;
  int sample_rate = 16000;
  double fmin = 0.0;
  double fmax = 8000.0;
  std::vector<double> weights;       // n_mels x bins, row-major
  std::vector<double> center_freqs;  // n_mels, Hz

  int bins() const { return fft_size / 2 + 1; }
  double w(int m, int k) const { return weights[size_t(m) * size_t(bins()) + size_t(k)]; }
};

/// Filter edges equally spaced on the mel scale between fmin and fmax.
/// Throws BadRange unless 0 <= fmin < fmax <= sample_rate/2 and every
/// filter covers at least one FFT bin.
MelMatrix mel_filterbank_matrix(int n_mels, int fft_size, int sample_rate,
                                double fmin = 0.0, double fmax = 8000.0);

/// T x n_mels log-mel filterbank energies.
struct FeatureMatrix {
  size_t frames = 0;
  int n_mels = 0;
  std::vector<double> data;  // frames x n_mels, row-major
  FrameSpec spec;

  double& at(size_t t, int m) { return data[t * size_t(n_mels) + size_t(m)]; }
  double v(size_t t, int m) const { return data[t * size_t(n_mels) + size_t(m)]; }
  const double* row(size_t t) const { return data.data() + t * size_t(n_mels); }
};

constexpr double kLogFloor = 1e-10;

/// log(max(mel_matrix . |X|^2, 1e-10)) per frame.
FeatureMatrix log_mel_fbank(const Waveform& wave, const FrameSpec& spec,
                            const MelMatrix& mel);

/// Same, starting from an existing magnitude spectrogram.
FeatureMatrix log_mel_of(const Spectrogram& sg, const MelMatrix& mel);

/// "FBNK" feature file: magic, u32 LE version (=1), u32 T, u32 F, then
/// T*F float32 LE values, frame-major.
void write_fbank(const std::string& path, const FeatureMatrix& feats);
FeatureMatrix read_fbank(const std::string& path);

}  // namespace longsv::dsp

namespace longsv {
using dsp::FeatureMatrix;
using dsp::hz_to_mel;
using dsp::kLogFloor;
using dsp::log_mel_fbank;
using dsp::log_mel_of;
using dsp::mel_filterbank_matrix;
using dsp::mel_to_hz;
using dsp::MelMatrix;
using dsp::read_fbank;
using dsp::write_fbank;
}  // namespace longsv
