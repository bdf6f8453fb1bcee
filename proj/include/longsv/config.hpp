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

#include "longsv/saa.hpp"
#include "longsv/synthcorpus.hpp"
#include "longsv/trainer.hpp"

namespace longsv {

// INI-style experiment configuration. Every field has a working default, so
// an empty file (or no file at all) is a valid configuration.
struct Config {
  // [dsp]
  FrameSpec frame_spec;
  int n_mels = 80;
  double fmin = 0.0, fmax = 8000.0;

  // [augment]
  bool augment_enabled = false;
  AugmentConfig augment;
  std::string noise_dir, rir_dir;

  // [saa]
  VocoderBackend backend;
  double denoise_strength = 0.005;

  // [model]
  ModelConfig model;

  // [train]
  int epochs = 15;
  int batch_size = 16;
  int crop_frames = 200;
  double lr = 1e-3;
  AdapterKind adapter = AdapterKind::none;
  Scope scope = Scope::joint;
  u64 seed = 0;

  // [trials]
  size_t n_pos = 1000, n_neg = 1000;
  bool negatives_from_enroll_grade = false;
  double min_segment_s = 2.0;
  bool vad_filter = false;

  // [corpus]
  CorpusParams corpus;

  TrainConfig train_config() const;
};

// Unknown sections are a ParseError, unknown keys an UnknownKey, malformed
// or out-of-range values an InvalidValue; all three name the line.
Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);

}  // namespace longsv
