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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "longsv/common.hpp"
#include "longsv/rng.hpp"
#include "longsv/tensor.hpp"

namespace longsv {

// Residual feature adapter: layer norm, FC, then two 1D convolutions sliding
// over the frequency bins of each frame (frames act as the batch), added back
// to the raw input. The final conv starts zeroed, so a fresh adapter is an
// exact identity.
struct FtaParams {
  Var ln_gain, ln_bias;
  Var fc_w, fc_b;        // (F,F), (F)
  Var conv1_k, conv1_b;  // (C,1,K), (C)
  Var conv2_k, conv2_b;  // (1,C,K), (1)
  int n_mels = 80, channels = 16, kernel = 5;

  static FtaParams init(int n_mels, int channels, int kernel, Rng& rng);
  std::vector<Var> params() const;
  std::vector<std::pair<std::string, Var>> named_params() const;
  size_t param_count() const;
};

Var fta_forward(Var x, const FtaParams& p);

// Ablation variant: the convolutions replaced by a second FC layer.
struct RaParams {
  Var ln_gain, ln_bias;
  Var fc1_w, fc1_b;  // (F,F), (F)
  Var fc2_w, fc2_b;
  int n_mels = 80;

  static RaParams init(int n_mels, Rng& rng);
  std::vector<Var> params() const;
  std::vector<std::pair<std::string, Var>> named_params() const;
  size_t param_count() const;
};

Var ra_forward(Var x, const RaParams& p);

// Three dilated 1D convolutions over time, attentive statistics pooling,
// and a linear projection to the embedding.
struct BackboneParams {
  Var conv1_k, conv1_b;  // (C,F,5) dil 1
  Var conv2_k, conv2_b;  // (C,C,3) dil 2
  Var conv3_k, conv3_b;  // (C,C,3) dil 3
  Var attn_w1, attn_b1, attn_w2;  // (A,C), (A), (A)
  Var embed_w, embed_b;           // (E,2C), (E)
  int n_mels = 80, channels = 64, attention_dim = 32, embed_dim = 32;

  static BackboneParams init(int n_mels, int channels, int attention_dim,
                             int embed_dim, Rng& rng);
  std::vector<Var> params() const;
  std::vector<std::pair<std::string, Var>> named_params() const;
};

// h is (T,C); returns concat(weighted mean, weighted std) of length 2C with
// alpha = softmax over T of w2 . tanh(W1 h_t + b1).
Var attentive_stats_pool(Var h, Var w1, Var b1, Var w2);

enum class AdapterKind { none, ra, fta };

Var backbone_embed(Var x, const BackboneParams& bp, const FtaParams* fta,
                   const RaParams* ra);

enum class HeadKind { softmax_ce, aam };

struct HeadParams {
  Var w;  // (S,E)
  Var b;  // (S), used by the plain softmax head only
  HeadKind kind = HeadKind::softmax_ce;
  double margin = 0.2, scale = 30.0;
  int n_speakers = 0, embed_dim = 0;

  static HeadParams init(int embed_dim, int n_speakers, HeadKind kind,
                         Rng& rng, double margin = 0.2, double scale = 30.0);
  std::vector<Var> params() const;
  std::vector<std::pair<std::string, Var>> named_params() const;
};

Var classify_loss(Var emb, int label, const HeadParams& head);

struct ModelConfig {
  int n_mels = 80;
  int backbone_channels = 64;
  int attention_dim = 32;
  int embed_dim = 32;
  int fta_channels = 16;
  int fta_kernel = 5;
  HeadKind head = HeadKind::softmax_ce;
  double aam_margin = 0.2;
  double aam_scale = 30.0;
};

// Everything the trainer moves around: backbone, optional adapter, optional
// classification head.
struct SpeakerModel {
  ModelConfig cfg;
  AdapterKind adapter = AdapterKind::none;
  BackboneParams backbone;
  std::optional<FtaParams> fta;
  std::optional<RaParams> ra;
  std::optional<HeadParams> head;

  Var embed(Var x) const;
  Var loss(Var x, int label) const;
  std::vector<std::pair<std::string, Var>> named_params() const;
  std::vector<Var> trainable_params(bool adapter_only) const;
};

SpeakerModel make_model(const ModelConfig& cfg, AdapterKind adapter,
                        int n_speakers, u64 seed);

}  // namespace longsv
