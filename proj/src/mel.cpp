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

#include "longsv/mel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "longsv/common.hpp"

namespace longsv::dsp {

MelMatrix mel_filterbank_matrix(int n_mels, int fft_size, int sample_rate,
                                double fmin, double fmax) {
  require(n_mels >= 1, Err::BadRange, "n_mels >= 1");
  require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
          Err::BadRange, "need 0 <= fmin < fmax <= sample_rate/2");

  MelMatrix mel;
  mel.n_mels = n_mels;
  mel.fft_size = fft_size;
  mel.sample_rate = sample_rate;
  mel.fmin = fmin;
  mel.fmax = fmax;
  const int bins = mel.bins();
  mel.weights.assign(size_t(n_mels) * size_t(bins), 0.0);
  mel.center_freqs.resize(size_t(n_mels));

  // n_mels + 2 edges, equally spaced in mel between fmin and fmax.
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edge_hz(size_t(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edge_hz[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  const double bin_hz = double(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double left = edge_hz[size_t(m)];
    const double center = edge_hz[size_t(m) + 1];
    const double right = edge_hz[size_t(m) + 2];
    mel.center_freqs[size_t(m)] = center;
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double v = 0.0;
      if (f > left && f < center)
        v = (f - left) / (center - left);
      else if (f >= center && f < right)
        v = (right - f) / (right - center);
      if (v > 0.0) {
        mel.weights[size_t(m) * size_t(bins) + size_t(k)] = v;
        any = true;
      }
    }
    require(any, Err::BadRange,
            "mel filter " + std::to_string(m) +
                " covers no FFT bin; lower n_mels or raise fft_size");
  }
  return mel;
}

FeatureMatrix log_mel_of(const Spectrogram& sg, const MelMatrix& mel) {
  require(sg.bins == mel.bins(), Err::DimMismatch,
          "spectrogram bins vs mel matrix");
  FeatureMatrix feats;
  feats.frames = size_t(sg.frames);
  feats.n_mels = mel.n_mels;
  feats.spec = sg.spec;
  feats.data.resize(size_t(sg.frames) * size_t(mel.n_mels));

  // Triangular filters are nonzero on one contiguous bin span each.
  std::vector<std::pair<int, int>> span(size_t(mel.n_mels), {0, 0});
  for (int m = 0; m < mel.n_mels; ++m) {
    int lo = sg.bins, hi = 0;
    for (int k = 0; k < sg.bins; ++k)
      if (mel.w(m, k) != 0.0) {
        lo = std::min(lo, k);
        hi = std::max(hi, k + 1);
      }
    span[size_t(m)] = {lo, hi};
  }

  std::vector<double> power(size_t(sg.bins));
  for (int t = 0; t < sg.frames; ++t) {
    const double* mrow = sg.mag.data() + size_t(t) * sg.bins;
    for (int k = 0; k < sg.bins; ++k) power[size_t(k)] = mrow[k] * mrow[k];
    double* out = feats.data.data() + size_t(t) * size_t(mel.n_mels);
    for (int m = 0; m < mel.n_mels; ++m) {
      const double* w = mel.weights.data() + size_t(m) * size_t(sg.bins);
      double acc = 0.0;
      for (int k = span[size_t(m)].first; k < span[size_t(m)].second; ++k)
        acc += w[k] * power[size_t(k)];
      out[m] = std::log(acc > kLogFloor ? acc : kLogFloor);
    }
  }
  return feats;
}

FeatureMatrix log_mel_fbank(const Waveform& wave, const FrameSpec& spec,
                            const MelMatrix& mel) {
  return log_mel_of(stft(wave, spec), mel);
}

void write_fbank(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Err::IoError, "cannot open " + path);
  auto wr_u32 = [&f](uint32_t x) {
    uint8_t b[4] = {uint8_t(x), uint8_t(x >> 8), uint8_t(x >> 16), uint8_t(x >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  f.write("FBNK", 4);
  wr_u32(1);
  wr_u32(uint32_t(feats.frames));
  wr_u32(uint32_t(feats.n_mels));
  std::vector<float> row(size_t(feats.n_mels));
  for (size_t t = 0; t < feats.frames; ++t) {
    for (int m = 0; m < feats.n_mels; ++m) row[size_t(m)] = float(feats.v(t, m));
    f.write(reinterpret_cast<const char*>(row.data()),
            std::streamsize(row.size() * sizeof(float)));
  }
  if (!f) fail(Err::IoError, "write failed: " + path);
}

FeatureMatrix read_fbank(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Err::NotFound, path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "FBNK", 4) != 0)
    fail(Err::BadMagic, path + ": not an FBNK file");
  auto rd_u32 = [&f, &path]() {
    uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) fail(Err::IoError, path + ": truncated");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  };
  uint32_t version = rd_u32();
  if (version != 1)
    fail(Err::VersionMismatch, path + ": FBNK version " + std::to_string(version));
  uint32_t t_count = rd_u32();
  uint32_t f_count = rd_u32();
  FeatureMatrix feats;
  feats.frames = t_count;
  feats.n_mels = int(f_count);
  feats.data.resize(size_t(t_count) * size_t(f_count));
  std::vector<float> raw(feats.data.size());
  f.read(reinterpret_cast<char*>(raw.data()),
         std::streamsize(raw.size() * sizeof(float)));
  if (!f) fail(Err::IoError, path + ": truncated data");
  for (size_t i = 0; i < raw.size(); ++i) feats.data[i] = double(raw[i]);
  return feats;
}

}  // namespace longsv::dsp
