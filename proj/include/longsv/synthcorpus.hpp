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
#include "longsv/common.hpp"
#include "longsv/rng.hpp"
#include "longsv/trials.hpp"

namespace longsv {

// A deterministic vocal caricature: harmonic source at a per-speaker pitch,
// three Lorentzian formant resonances, breath noise shaped by the same
// resonances. Ageing across grades lowers the pitch (f0_decay) and shifts the
// formants down (formant_shift), which is what makes cross-year trials harder
// than same-year ones.
struct SpeakerProfile {
  int index = 0;
  std::string speaker_id;
  double base_f0 = 0.0;           // Hz at grade 1
  double formants[3] = {0, 0, 0};  // Hz at grade 1
  double bandwidths[3] = {0, 0, 0};
  double f0_decay = 1.0;      // per-grade multiplier
  double formant_shift = 1.0;  // per-grade multiplier
  double jitter = 0.0;        // pitch wobble depth
  double noise_level = 0.0;   // breath noise vs voiced RMS

  double f0_at(int grade) const;
  double formant_at(int j, int grade) const;
};

// Draws one profile from the stream; the draw order is part of the format
// (identical seeds must give identical corpora).
SpeakerProfile draw_profile(int index, Rng& rng);

// One fully voiced utterance at 16 kHz with slow syllable-like amplitude
// modulation, faded in/out and peak-normalized to 0.5. Throws TooShort when
// duration_s < 0.5.
Waveform synth_utterance(const SpeakerProfile& profile, int grade,
                         double duration_s, Rng& rng);

struct CorpusParams {
  int n_speakers = 20;
  int grades = 4;
  int utts_per_grade = 12;
  double duration_s = 3.0;
  int train_speakers = 14;  // first speakers by index; the rest are eval
  u64 seed = 7;

  void validate() const;
};

struct GeneratedCorpus {
  CorpusManifest all, train, eval;
};

// Writes <spk>_g<grade>_<utt>.wav files plus manifest.csv, manifest_train.csv
// and manifest_eval.csv into out_dir. The split is by speaker, so eval
// speakers are never seen in training.
GeneratedCorpus gen_corpus(const std::string& out_dir,
                           const CorpusParams& params);

}  // namespace longsv
