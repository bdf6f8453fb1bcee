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

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "longsv/augment.hpp"
#include "longsv/mel.hpp"
#include "longsv/model.hpp"
#include "longsv/trials.hpp"

namespace longsv {

enum class Scope { joint, adapter_only };

struct TrainConfig {
  int epochs = 15;
  int batch_size = 16;
  int crop_frames = 200;
  double lr = 1e-3;
  u64 seed = 0;
  AdapterKind adapter = AdapterKind::none;
  Scope scope = Scope::joint;
  bool augment_enabled = false;
  AugmentConfig augment;
  std::string noise_dir, rir_dir;
  ModelConfig model;
  FrameSpec frame_spec;
  double fmin = 0.0, fmax = 8000.0;

  void validate() const;
};

struct TensorBlob {
  std::vector<int> shape;
  std::vector<double> data;
};

// Everything a training run leaves behind: named tensors (model weights plus
// meta.* scalars describing the architecture), the epoch counter, and the
// per-epoch mean loss history.
struct Checkpoint {
  std::vector<std::pair<std::string, TensorBlob>> tensors;
  u32 epoch = 0;
  std::vector<double> loss_history;

  const TensorBlob* find(const std::string& name) const;
  double meta(const std::string& name) const;  // NotFound if absent
};

// "CKPT" file: magic, u32 LE version (=1), u32 tensor count, per tensor a
// u16 name length + name, u8 rank, u32 dims, f64 LE row-major data; then
// u32 epoch and u32 count + f64 loss history.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

u64 speaker_set_hash(const std::vector<std::string>& sorted_ids);
std::vector<std::string> manifest_speakers(const CorpusManifest& manifest);

Checkpoint checkpoint_from_model(const SpeakerModel& model,
                                 const TrainConfig& cfg, u32 epoch,
                                 const std::vector<double>& loss_history,
                                 const std::vector<std::string>& speakers);
// Rebuilds the architecture from meta.* and loads every weight tensor.
SpeakerModel model_from_checkpoint(const Checkpoint& ckpt);

struct TrainResult {
  SpeakerModel model;
  std::vector<double> loss_history;       // mean per-sample loss per epoch
  std::vector<std::string> speakers;      // sorted; label = index
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Fresh model trained from scratch on the manifest. Each epoch reshuffles
// utterances and redraws augmentations from seeds derived per (epoch,
// utterance key), so a rerun with the same inputs is bit-identical.
TrainResult train(const CorpusManifest& manifest, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Continues from a checkpoint with a fresh optimizer. A requested adapter
// missing from the base is attached zero-initialized (an exact identity), the
// head is reused only when the speaker set is unchanged, and scope
// adapter_only freezes the backbone. Zero epochs leaves weights untouched.
TrainResult finetune(const Checkpoint& base, const CorpusManifest& manifest,
                     const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Full-length embeddings (no crop, no augmentation), keyed by utt_key.
EmbeddingMap embed_utterances(const CorpusManifest& manifest,
                              const SpeakerModel& model, const FrameSpec& spec,
                              const MelMatrix& mel, int jobs = 1);

}  // namespace longsv
