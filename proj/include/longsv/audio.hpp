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

#include <cstdint>
#include <string>
#include <vector>

namespace longsv {

/// Mono audio. Samples are 64-bit reals, nominal range [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a RIFF/WAVE PCM16 mono file. Samples are int16/32768.
Waveform read_wav(const std::string& path);

/// Writes PCM16 mono. Values are clamped to [-1, 1 - 2^-15] before
/// quantization, so a read/write roundtrip is within 2^-15 per sample.
void write_wav(const std::string& path, const Waveform& wave);

/// In-memory codecs (same format), used by the vocoder subprocess protocol.
Waveform decode_wav(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_wav(const Waveform& wave);

/// PCM16 quantization of one sample, identical to what write_wav applies.
int16_t pcm16_quantize(double x);

/// Quantize-dequantize a whole waveform (what a WAV roundtrip would do).
Waveform pcm16_roundtrip(const Waveform& wave);

}  // namespace longsv
