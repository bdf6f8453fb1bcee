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

#include "longsv/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "longsv/common.hpp"

namespace longsv {

namespace {

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double peak_abs(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::fabs(v));
  return p;
}

}  // namespace

void AugmentConfig::validate() const {
  require(snr_min_db <= snr_max_db, Err::BadRange, "snr range empty");
  require(freq_drop_count_min >= 0 && freq_drop_count_min <= freq_drop_count_max,
          Err::BadRange, "freq drop count range empty");
  require(freq_drop_width > 0.0 && freq_drop_width < 1.0, Err::BadRange,
          "freq drop width outside (0,1)");
  require(chunk_length_min >= 1 && chunk_length_min <= chunk_length_max,
          Err::BadRange, "chunk length range empty");
  require(chunk_count_min >= 0 && chunk_count_min <= chunk_count_max,
          Err::BadRange, "chunk count range empty");
  require(noise_prob >= 0.0 && noise_prob <= 1.0 && rir_prob >= 0.0 &&
              rir_prob <= 1.0 && drop_freq_prob >= 0.0 && drop_freq_prob <= 1.0 &&
              drop_chunk_prob >= 0.0 && drop_chunk_prob <= 1.0,
          Err::BadRange, "apply probability outside [0,1]");
  frame_spec.validate();
}

Waveform mix_noise(const Waveform& clean, const Waveform& noise, double snr_db,
                   Rng& rng) {
  require(std::isfinite(snr_db), Err::BadRange, "snr_db not finite");
  require(clean.sample_rate == noise.sample_rate, Err::RateMismatch,
          "noise sample rate differs from clean");
  require(!noise.samples.empty(), Err::DegenerateNoise, "empty noise");

  double p_clean = mean_power(clean.samples);
  require(p_clean > 0.0, Err::DegenerateClean, "zero-power clean signal");

  size_t offset = rng.uniform_int(0, noise.size() - 1);
  std::vector<double> seg(clean.size());
  for (size_t i = 0; i < seg.size(); ++i)
    seg[i] = noise.samples[(offset + i) % noise.size()];

  double p_seg = mean_power(seg);
  require(p_seg > 0.0, Err::DegenerateNoise, "zero-power noise segment");

  double alpha = std::sqrt(p_clean / (p_seg * std::pow(10.0, snr_db / 10.0)));
  Waveform out = clean;
  for (size_t i = 0; i < out.size(); ++i) out.samples[i] += alpha * seg[i];
  return out;
}

Waveform apply_rir(const Waveform& clean, const Waveform& rir) {
  require(clean.sample_rate == rir.sample_rate, Err::RateMismatch,
          "rir sample rate differs from clean");
  require(!rir.samples.empty(), Err::BadRange, "empty rir");

  size_t n = clean.size();
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.assign(n, 0.0);
  // Tap-major accumulation keeps single-tap kernels exact (identity, delay).
  for (size_t k = 0; k < rir.size() && k < n; ++k) {
    double w = rir.samples[k];
    if (w == 0.0) continue;
    const double* src = clean.samples.data();
    double* dst = out.samples.data() + k;
    size_t len = n - k;
    for (size_t i = 0; i < len; ++i) dst[i] += w * src[i];
  }
  double pk_in = peak_abs(clean.samples);
  double pk_out = peak_abs(out.samples);
  if (pk_out > 0.0) {
    double scale = pk_in / pk_out;
    if (scale != 1.0)
      for (double& v : out.samples) v *= scale;
  }
  return out;
}

Waveform drop_freq_bands(const Waveform& wave, const FrameSpec& spec,
                         const std::vector<std::pair<double, double>>& bands) {
  if (bands.empty() || wave.samples.empty()) return wave;
  size_t n = wave.size();
  // Pad to full window coverage so the inverse transform is exact everywhere,
  // then trim back to the original length.
  Waveform padded = wave;
  padded.samples.resize(covered_length(n, spec), 0.0);
  Spectrogram sg = stft(padded, spec);

  double bin_hz = static_cast<double>(wave.sample_rate) / spec.fft_size;
  for (int k = 0; k < sg.bins; ++k) {
    double f = k * bin_hz;
    bool inside = false;
    for (const auto& b : bands)
      if (f >= b.first && f <= b.second) {
        inside = true;
        break;
      }
    if (!inside) continue;
    for (int t = 0; t < sg.frames; ++t) sg.m(t, k) = 0.0;
  }
  Waveform out = istft(sg, spec, padded.size());
  out.sample_rate = wave.sample_rate;
  out.samples.resize(n);
  return out;
}

Waveform drop_freq(const Waveform& wave, const AugmentConfig& cfg, Rng& rng) {
  int count = cfg.freq_drop_count_min == cfg.freq_drop_count_max
                  ? cfg.freq_drop_count_min
                  : static_cast<int>(rng.uniform_int(cfg.freq_drop_count_min,
                                                     cfg.freq_drop_count_max));
  double nyquist = wave.sample_rate / 2.0;
  double width = cfg.freq_drop_width * nyquist;
  std::vector<std::pair<double, double>> bands;
  for (int i = 0; i < count; ++i) {
    double center = rng.uniform(width / 2.0, nyquist - width / 2.0);
    bands.emplace_back(center - width / 2.0, center + width / 2.0);
  }
  if (bands.empty()) return wave;
  return drop_freq_bands(wave, cfg.frame_spec, bands);
}

Waveform drop_chunk(const Waveform& wave, const AugmentConfig& cfg, Rng& rng) {
  size_t n = wave.size();
  if (n < static_cast<size_t>(cfg.chunk_length_min)) return wave;
  int count = cfg.chunk_count_min == cfg.chunk_count_max
                  ? cfg.chunk_count_min
                  : static_cast<int>(rng.uniform_int(cfg.chunk_count_min,
                                                     cfg.chunk_count_max));
  Waveform out = wave;
  std::vector<std::pair<size_t, size_t>> placed;  // [begin, end)
  for (int c = 0; c < count; ++c) {
    size_t len = static_cast<size_t>(
        rng.uniform_int(cfg.chunk_length_min, cfg.chunk_length_max));
    len = std::min(len, n);
    // Chunks are kept one sample apart from each other so every zeroed run
    // stays within the configured length range.
    bool ok = false;
    size_t begin = 0;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      begin = rng.uniform_int(0, n - len);
      ok = true;
      for (const auto& p : placed) {
        size_t lo = p.first == 0 ? 0 : p.first - 1;
        size_t hi = p.second + 1;
        if (begin < hi && begin + len > lo) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;  // no room left for this chunk
    placed.emplace_back(begin, begin + len);
    std::fill(out.samples.begin() + begin, out.samples.begin() + begin + len,
              0.0);
  }
  return out;
}

Waveform augment_pipeline(const Waveform& wave, const AugmentConfig& cfg,
                          const std::vector<Waveform>& noise_pool,
                          const std::vector<Waveform>& rir_pool, Rng& rng) {
  cfg.validate();
  Waveform out = wave;
  if (cfg.noise_enabled) {
    require(!noise_pool.empty(), Err::EmptyPool, "noise pool empty");
    bool apply = rng.uniform() < cfg.noise_prob;
    if (apply) {
      size_t idx = rng.uniform_int(0, noise_pool.size() - 1);
      double snr = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
      out = mix_noise(out, noise_pool[idx], snr, rng);
    }
  }
  if (cfg.rir_enabled) {
    require(!rir_pool.empty(), Err::EmptyPool, "rir pool empty");
    bool apply = rng.uniform() < cfg.rir_prob;
    if (apply) {
      size_t idx = rng.uniform_int(0, rir_pool.size() - 1);
      out = apply_rir(out, rir_pool[idx]);
    }
  }
  if (cfg.drop_freq_enabled && rng.uniform() < cfg.drop_freq_prob)
    out = drop_freq(out, cfg, rng);
  if (cfg.drop_chunk_enabled && rng.uniform() < cfg.drop_chunk_prob)
    out = drop_chunk(out, cfg, rng);
  return out;
}

std::vector<std::string> list_wavs_sorted(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), Err::NotFound, "no such directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().extension() == ".wav") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

std::vector<Waveform> load_pool(const std::string& dir) {
  std::vector<Waveform> pool;
  for (const auto& p : list_wavs_sorted(dir)) pool.push_back(read_wav(p));
  return pool;
}

}  // namespace longsv
