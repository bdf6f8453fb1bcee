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
#include "longsv/rng.hpp"

namespace longsv {

// Waveform-level training augmentations. All of them are pure functions of
// their inputs plus an explicit Rng, so a derived per-utterance seed makes
// the whole pipeline reproducible.
struct AugmentConfig {
  double snr_min_db = 0.0;
  double snr_max_db = 15.0;
  int freq_drop_count_min = 1;
  int freq_drop_count_max = 3;
  double freq_drop_width = 0.05;  // fraction of Nyquist
  int chunk_length_min = 1000;    // samples
  int chunk_length_max = 2000;
  int chunk_count_min = 1;
  int chunk_count_max = 5;

  bool noise_enabled = true;
  bool rir_enabled = true;
  bool drop_freq_enabled = true;
  bool drop_chunk_enabled = true;

  double noise_prob = 1.0;
  double rir_prob = 1.0;
  double drop_freq_prob = 1.0;
  double drop_chunk_prob = 1.0;

  FrameSpec frame_spec;  // used by drop_freq

  bool any_enabled() const {
    return noise_enabled || rir_enabled || drop_freq_enabled || drop_chunk_enabled;
  }
  void validate() const;  // BadRange on empty/inverted ranges
};

// out = clean + alpha * noise_segment, alpha chosen so that the added
// component sits exactly snr_db below the clean signal power. The segment
// starts at a random offset and wraps around if the noise is shorter.
Waveform mix_noise(const Waveform& clean, const Waveform& noise, double snr_db,
                   Rng& rng);

// Full convolution truncated to the clean length, then rescaled so the output
// peak matches the clean peak. A unit impulse is an exact identity.
Waveform apply_rir(const Waveform& clean, const Waveform& rir);

// Band-stop via STFT-bin zeroing. Bands are [lo_hz, hi_hz] pairs; bins whose
// center frequency falls inside any band are zeroed, phase kept elsewhere.
Waveform drop_freq_bands(const Waveform& wave, const FrameSpec& spec,
                         const std::vector<std::pair<double, double>>& bands);

// Draws 1..3 random bands of width freq_drop_width * Nyquist, fully inside
// (0, Nyquist), and applies drop_freq_bands.
Waveform drop_freq(const Waveform& wave, const AugmentConfig& cfg, Rng& rng);

// Zeroes 1..5 random chunks of 1000..2000 samples. Chunks are drawn so they
// neither overlap nor abut, keeping every zeroed run inside the configured
// length range. Waves shorter than chunk_length_min pass through unchanged.
Waveform drop_chunk(const Waveform& wave, const AugmentConfig& cfg, Rng& rng);

// Enabled stages in fixed order noise -> rir -> drop_freq -> drop_chunk,
// each gated by its apply probability.
Waveform augment_pipeline(const Waveform& wave, const AugmentConfig& cfg,
                          const std::vector<Waveform>& noise_pool,
                          const std::vector<Waveform>& rir_pool, Rng& rng);

// Directory listing in sorted filename order, .wav entries only.
std::vector<std::string> list_wavs_sorted(const std::string& dir);
std::vector<Waveform> load_pool(const std::string& dir);

}  // namespace longsv
