// Copyright 2026 The longsv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "longsv/audio.hpp"
#include "longsv/dsp.hpp"
#include "longsv/mel.hpp"
#include "longsv/trials.hpp"

namespace longsv {

// Mel magnitudes as they cross the vocoder boundary: float32, mel-major.
// Both the in-process backend and the subprocess protocol consume exactly
// this representation, which is what makes the two paths bit-comparable.
struct MelSpectrogram {
  int n_mels = 0;
  int frames = 0;
  int sample_rate = 16000;
  std::vector<float> data;  // mel-major: data[m * frames + t]

  float& at(int m, int t) { return data[static_cast<size_t>(m) * frames + t]; }
  float v(int m, int t) const {
    return data[static_cast<size_t>(m) * frames + t];
  }
};

// Linear-magnitude mel analysis (|stft| through the filterbank), quantized
// to float32.
MelSpectrogram mel_spectrogram(const Waveform& wave, const FrameSpec& spec,
                               const MelMatrix& mel);

// Least-squares pseudo-inverse of the filterbank applied per frame, negatives
// clamped to zero. Returns a magnitude-only spectrogram (phase all zero).
Spectrogram mel_to_linear(const MelSpectrogram& mel_mag, const MelMatrix& mel,
                          const FrameSpec& spec);

// Classic alternating projection with zero phase init; the returned waveform
// is the reconstruction from the last iteration's phase estimate.
Waveform griffin_lim(const Spectrogram& magnitude, int iterations,
                     const FrameSpec& spec, int sample_rate = 16000);

// ||  |stft(x)| - target ||_F / || target ||_F
double spectral_convergence(const Waveform& x, const Spectrogram& target,
                            const FrameSpec& spec);

struct VocoderBackend {
  enum class Kind { griffin_lim, external };
  Kind kind = Kind::griffin_lim;
  int iterations = 32;
  std::string command;  // shell command line for the external kind
};

struct DenoiseConfig {
  double strength = 0.005;
  std::vector<double> bias_spectrum;  // one magnitude per STFT bin
};

// Spectral subtraction: mag' = max(mag - strength * bias, 0), phase kept.
Waveform denoise(const Waveform& wave, const DenoiseConfig& cfg,
                 const FrameSpec& spec);

// The backend's response to an all-zero mel, averaged into a per-bin
// magnitude spectrum.
std::vector<double> estimate_bias(const VocoderBackend& backend,
                                  const FrameSpec& spec, const MelMatrix& mel);

// Runs one mel matrix through the chosen backend. Output waveforms are
// PCM16-quantized on both paths (the external one arrives as a WAV).
Waveform run_backend(const MelSpectrogram& mel_mag,
                     const VocoderBackend& backend, const FrameSpec& spec,
                     const MelMatrix& mel);

// Subprocess protocol: writes a MELS message to the child's stdin and reads
// a complete RIFF PCM16 mono WAV from its stdout.
Waveform external_vocoder_call(const MelSpectrogram& mel_mag,
                               const std::string& command);

// wave -> mel -> backend -> denoise, trimmed or zero-padded back to the
// input length.
Waveform saa_roundtrip(const Waveform& wave, const VocoderBackend& backend,
                       const DenoiseConfig& dn, const FrameSpec& spec,
                       const MelMatrix& mel);

// Regenerates every utterance into out_dir with an `_saa` tag and returns
// the doubled manifest (originals first, synthetics after, labels kept).
CorpusManifest saa_corpus(const CorpusManifest& manifest,
                          const VocoderBackend& backend,
                          const DenoiseConfig& dn, const FrameSpec& spec,
                          const MelMatrix& mel, const std::string& out_dir,
                          int jobs = 1);

}  // namespace longsv
