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

// Reference external vocoder: reads one MELS message from stdin, resynthesizes
// with the in-process Griffin-Lim backend, writes a RIFF PCM16 WAV to stdout.
// Optional argv[1] overrides the iteration count (default 32).

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "longsv/common.hpp"
#include "longsv/mel.hpp"
#include "longsv/saa.hpp"

namespace {

longsv::u32 get_u32(const std::string& buf, size_t at) {
  const auto* b = reinterpret_cast<const unsigned char*>(buf.data() + at);
  return longsv::u32(b[0]) | longsv::u32(b[1]) << 8 | longsv::u32(b[2]) << 16 |
         longsv::u32(b[3]) << 24;
}

}  // namespace

int main(int argc, char** argv) {
  int iterations = 32;
  if (argc > 1) iterations = std::atoi(argv[1]);

  std::string input;
  char chunk[65536];
  while (std::cin.read(chunk, sizeof chunk) || std::cin.gcount() > 0)
    input.append(chunk, size_t(std::cin.gcount()));

  if (input.size() < 20 || std::memcmp(input.data(), "MELS", 4) != 0) {
    std::fprintf(stderr, "loopback: stdin is not a MELS message\n");
    return 3;
  }
  longsv::u32 version = get_u32(input, 4);
  if (version != 1) {
    std::fprintf(stderr, "loopback: unsupported MELS version %u\n", version);
    return 3;
  }
  longsv::MelSpectrogram mel;
  mel.n_mels = int(get_u32(input, 8));
  mel.frames = int(get_u32(input, 12));
  mel.sample_rate = int(get_u32(input, 16));
  size_t need = 20 + size_t(mel.n_mels) * size_t(mel.frames) * 4;
  if (mel.n_mels <= 0 || mel.frames <= 0 || input.size() != need) {
    std::fprintf(stderr, "loopback: MELS payload size mismatch\n");
    return 3;
  }
  mel.data.resize(size_t(mel.n_mels) * size_t(mel.frames));
  std::memcpy(mel.data.data(), input.data() + 20, mel.data.size() * 4);

  try {
    longsv::FrameSpec spec;
    longsv::MelMatrix matrix = longsv::mel_filterbank_matrix(
        mel.n_mels, spec.fft_size, mel.sample_rate, 0.0,
        mel.sample_rate / 2.0);
    longsv::VocoderBackend backend;
    backend.iterations = iterations;
    longsv::Waveform wave = longsv::run_backend(mel, backend, spec, matrix);
    std::vector<uint8_t> wav = longsv::encode_wav(wave);
    std::fwrite(wav.data(), 1, wav.size(), stdout);
    std::fflush(stdout);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "loopback: %s\n", e.what());
    return 1;
  }
  return 0;
}
