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

#include "longsv/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "longsv/common.hpp"

namespace longsv {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 24));
}

void wr_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
}

}  // namespace

int16_t pcm16_quantize(double x) {
  // Clamp to [-1, 1 - 2^-15] so the quantized value fits int16 exactly.
  const double hi = 1.0 - 0x1.0p-15;
  if (x > hi) x = hi;
  if (x < -1.0) x = -1.0;
  return int16_t(std::llround(x * 32768.0));
}

Waveform pcm16_roundtrip(const Waveform& wave) {
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.resize(wave.samples.size());
  for (size_t i = 0; i < wave.samples.size(); ++i)
    out.samples[i] = pcm16_quantize(wave.samples[i]) / 32768.0;
  return out;
}

Waveform decode_wav(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(Err::UnsupportedEncoding, "not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  Waveform wave;
  bool have_data = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    uint32_t chunk_size = rd_u32(bytes.data() + pos + 4);
    size_t body = pos + 8;
    if (body + chunk_size > bytes.size())
      chunk_size = uint32_t(bytes.size() - body);  // tolerate truncated size

    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16) fail(Err::UnsupportedEncoding, "short fmt chunk");
      format = rd_u16(bytes.data() + body);
      channels = rd_u16(bytes.data() + body + 2);
      rate = rd_u32(bytes.data() + body + 4);
      bits = rd_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) fail(Err::UnsupportedEncoding, "data chunk before fmt");
      if (channels != 1)
        fail(Err::UnsupportedChannels,
             "expected mono, got " + std::to_string(channels) + " channels");
      if (format != 1 || bits != 16)
        fail(Err::UnsupportedEncoding, "expected PCM16");
      size_t n = chunk_size / 2;
      wave.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t s = int16_t(rd_u16(bytes.data() + body + 2 * i));
        wave.samples[i] = s / 32768.0;
      }
      wave.sample_rate = int(rate);
      have_data = true;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_data) fail(Err::UnsupportedEncoding, "missing data chunk");
  return wave;
}

std::vector<uint8_t> encode_wav(const Waveform& wave) {
  const uint32_t n = uint32_t(wave.samples.size());
  const uint32_t data_bytes = 2 * n;
  std::vector<uint8_t> v;
  v.reserve(44 + data_bytes);
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  wr_u32(v, 36 + data_bytes);
  v.insert(v.end(), {'W', 'A', 'V', 'E'});
  v.insert(v.end(), {'f', 'm', 't', ' '});
  wr_u32(v, 16);
  wr_u16(v, 1);  // PCM
  wr_u16(v, 1);  // mono
  wr_u32(v, uint32_t(wave.sample_rate));
  wr_u32(v, uint32_t(wave.sample_rate) * 2);  // byte rate
  wr_u16(v, 2);                               // block align
  wr_u16(v, 16);                              // bits per sample
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  wr_u32(v, data_bytes);
  for (double x : wave.samples) {
    if (!std::isfinite(x)) fail(Err::IoError, "non-finite sample");
    wr_u16(v, uint16_t(pcm16_quantize(x)));
  }
  return v;
}

Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Err::NotFound, path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_wav(const std::string& path, const Waveform& wave) {
  std::vector<uint8_t> bytes = encode_wav(wave);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Err::IoError, "cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
  if (!f) fail(Err::IoError, "write failed: " + path);
}

}  // namespace longsv
