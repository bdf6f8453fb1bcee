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

#include "longsv/model.hpp"

#include <cmath>

#include "longsv/common.hpp"

namespace longsv {

namespace {

// Kaiming-uniform fill: U(-b, b) with b = sqrt(6 / fan_in). Biases and the
// zero-initialized layers stay at 0.
Var kaiming(std::vector<int> shape, int fan_in, Rng& rng) {
  Var v = leaf(std::move(shape));
  double bound = std::sqrt(6.0 / fan_in);
  for (double& x : v->value) x = rng.uniform(-bound, bound);
  return v;
}

Var zeros(std::vector<int> shape) { return leaf(std::move(shape)); }

Var ones(std::vector<int> shape) {
  Var v = leaf(std::move(shape));
  std::fill(v->value.begin(), v->value.end(), 1.0);
  return v;
}

// y = x . W^T + b for x (T,in), W (out,in).
Var linear(Var x, Var w, Var b) { return add(matmul(x, transpose(w)), b); }

}  // namespace

FtaParams FtaParams::init(int n_mels, int channels, int kernel, Rng& rng) {
  require(kernel >= 1, Err::BadRange, "fta kernel must be >= 1");
  FtaParams p;
  p.n_mels = n_mels;
  p.channels = channels;
  p.kernel = kernel;
  p.ln_gain = ones({n_mels});
  p.ln_bias = zeros({n_mels});
  p.fc_w = kaiming({n_mels, n_mels}, n_mels, rng);
  p.fc_b = zeros({n_mels});
  p.conv1_k = kaiming({channels, 1, kernel}, kernel, rng);
  p.conv1_b = zeros({channels});
  p.conv2_k = zeros({1, channels, kernel});
  p.conv2_b = zeros({1});
  return p;
}

std::vector<Var> FtaParams::params() const {
  return {ln_gain, ln_bias, fc_w, fc_b, conv1_k, conv1_b, conv2_k, conv2_b};
}

std::vector<std::pair<std::string, Var>> FtaParams::named_params() const {
  return {{"fta.ln_gain", ln_gain},   {"fta.ln_bias", ln_bias},
          {"fta.fc_w", fc_w},         {"fta.fc_b", fc_b},
          {"fta.conv1_k", conv1_k},   {"fta.conv1_b", conv1_b},
          {"fta.conv2_k", conv2_k},   {"fta.conv2_b", conv2_b}};
}

size_t FtaParams::param_count() const {
  size_t n = 0;
  for (const Var& p : params()) n += p->size();
  return n;
}

Var fta_forward(Var x, const FtaParams& p) {
  require(x->rank() == 2 && x->shape[1] == p.n_mels, Err::ShapeMismatch,
          "fta_forward: input must be (T," + std::to_string(p.n_mels) + ")");
  int t = x->shape[0];
  Var h = layer_norm(x, p.ln_gain, p.ln_bias);
  h = linear(h, p.fc_w, p.fc_b);
  h = reshape(h, {t, 1, p.n_mels});
  h = relu(conv1d(h, p.conv1_k, p.conv1_b));
  h = conv1d(h, p.conv2_k, p.conv2_b);
  h = reshape(h, {t, p.n_mels});
  return add(x, h);
}

RaParams RaParams::init(int n_mels, Rng& rng) {
  RaParams p;
  p.n_mels = n_mels;
  p.ln_gain = ones({n_mels});
  p.ln_bias = zeros({n_mels});
  p.fc1_w = kaiming({n_mels, n_mels}, n_mels, rng);
  p.fc1_b = zeros({n_mels});
  p.fc2_w = zeros({n_mels, n_mels});
  p.fc2_b = zeros({n_mels});
  return p;
}

std::vector<Var> RaParams::params() const {
  return {ln_gain, ln_bias, fc1_w, fc1_b, fc2_w, fc2_b};
}

std::vector<std::pair<std::string, Var>> RaParams::named_params() const {
  return {{"ra.ln_gain", ln_gain}, {"ra.ln_bias", ln_bias},
          {"ra.fc1_w", fc1_w},     {"ra.fc1_b", fc1_b},
          {"ra.fc2_w", fc2_w},     {"ra.fc2_b", fc2_b}};
}

size_t RaParams::param_count() const {
  size_t n = 0;
  for (const Var& p : params()) n += p->size();
  return n;
}

Var ra_forward(Var x, const RaParams& p) {
  require(x->rank() == 2 && x->shape[1] == p.n_mels, Err::ShapeMismatch,
          "ra_forward: input must be (T," + std::to_string(p.n_mels) + ")");
  Var h = layer_norm(x, p.ln_gain, p.ln_bias);
  h = relu(linear(h, p.fc1_w, p.fc1_b));
  h = linear(h, p.fc2_w, p.fc2_b);
  return add(x, h);
}

BackboneParams BackboneParams::init(int n_mels, int channels, int attention_dim,
                                    int embed_dim, Rng& rng) {
  BackboneParams p;
  p.n_mels = n_mels;
  p.channels = channels;
  p.attention_dim = attention_dim;
  p.embed_dim = embed_dim;
  p.conv1_k = kaiming({channels, n_mels, 5}, n_mels * 5, rng);
  p.conv1_b = zeros({channels});
  p.conv2_k = kaiming({channels, channels, 3}, channels * 3, rng);
  p.conv2_b = zeros({channels});
  p.conv3_k = kaiming({channels, channels, 3}, channels * 3, rng);
  p.conv3_b = zeros({channels});
  p.attn_w1 = kaiming({attention_dim, channels}, channels, rng);
  p.attn_b1 = zeros({attention_dim});
  p.attn_w2 = kaiming({attention_dim}, attention_dim, rng);
  p.embed_w = kaiming({embed_dim, 2 * channels}, 2 * channels, rng);
  p.embed_b = zeros({embed_dim});
  return p;
}

std::vector<Var> BackboneParams::params() const {
  return {conv1_k, conv1_b, conv2_k, conv2_b, conv3_k, conv3_b,
          attn_w1, attn_b1, attn_w2, embed_w, embed_b};
}

std::vector<std::pair<std::string, Var>> BackboneParams::named_params() const {
  return {{"backbone.conv1_k", conv1_k}, {"backbone.conv1_b", conv1_b},
          {"backbone.conv2_k", conv2_k}, {"backbone.conv2_b", conv2_b},
          {"backbone.conv3_k", conv3_k}, {"backbone.conv3_b", conv3_b},
          {"backbone.attn_w1", attn_w1}, {"backbone.attn_b1", attn_b1},
          {"backbone.attn_w2", attn_w2}, {"backbone.embed_w", embed_w},
          {"backbone.embed_b", embed_b}};
}

Var attentive_stats_pool(Var h, Var w1, Var b1, Var w2) {
  require(h->rank() == 2, Err::ShapeMismatch,
          "attentive_stats_pool: (T,C) expected");
  Var scores = tanh(add(matmul(h, transpose(w1)), b1));  // (T,A)
  Var energies = matmul(scores, w2);                     // (T)
  Var alpha = softmax(energies);
  Var mu = matmul(alpha, h);              // (C)
  Var m2 = matmul(alpha, mul(h, h));      // (C)
  Var sigma = sqrt(add_const(sub(m2, mul(mu, mu)), 1e-9));
  return concat(mu, sigma, 0);
}

Var backbone_embed(Var x, const BackboneParams& bp, const FtaParams* fta,
                   const RaParams* ra) {
  require(x->rank() == 2 && x->shape[1] == bp.n_mels, Err::ShapeMismatch,
          "backbone_embed: input must be (T," + std::to_string(bp.n_mels) + ")");
  require(x->shape[0] >= 5, Err::ShapeMismatch,
          "backbone_embed: at least 5 frames required");
  Var h = x;
  if (fta) h = fta_forward(h, *fta);
  if (ra) h = ra_forward(h, *ra);
  Var ht = transpose(h);  // (F,T)
  ht = relu(conv1d(ht, bp.conv1_k, bp.conv1_b, 1));
  ht = relu(conv1d(ht, bp.conv2_k, bp.conv2_b, 2));
  ht = relu(conv1d(ht, bp.conv3_k, bp.conv3_b, 3));
  Var pooled = attentive_stats_pool(transpose(ht), bp.attn_w1, bp.attn_b1,
                                    bp.attn_w2);
  return add(matmul(bp.embed_w, pooled), bp.embed_b);
}

HeadParams HeadParams::init(int embed_dim, int n_speakers, HeadKind kind,
                            Rng& rng, double margin, double scale) {
  require(n_speakers >= 2, Err::TooFewSpeakers,
          "classification head needs at least 2 speakers");
  HeadParams p;
  p.kind = kind;
  p.margin = margin;
  p.scale = scale;
  p.n_speakers = n_speakers;
  p.embed_dim = embed_dim;
  p.w = kaiming({n_speakers, embed_dim}, embed_dim, rng);
  p.b = zeros({n_speakers});
  return p;
}

std::vector<Var> HeadParams::params() const {
  if (kind == HeadKind::aam) return {w};
  return {w, b};
}

std::vector<std::pair<std::string, Var>> HeadParams::named_params() const {
  if (kind == HeadKind::aam) return {{"head.w", w}};
  return {{"head.w", w}, {"head.b", b}};
}

Var classify_loss(Var emb, int label, const HeadParams& head) {
  require(label >= 0 && label < head.n_speakers, Err::BadLabel,
          "label outside speaker set");
  if (head.kind == HeadKind::softmax_ce) {
    Var logits = add(matmul(head.w, emb), head.b);
    return cross_entropy(logits, label);
  }
  // Additive angular margin on the target class over normalized directions.
  Var ne = l2_normalize(emb);
  Var nw = l2_normalize(head.w);
  Var cos_t = matmul(nw, ne);  // (S)
  double cm = std::cos(head.margin), sm = std::sin(head.margin);
  Var sin_t = sqrt(relu(add_const(mul_scalar(mul(cos_t, cos_t), -1.0), 1.0)));
  Var phi = sub(mul_scalar(cos_t, cm), mul_scalar(sin_t, sm));
  std::vector<double> oh(head.n_speakers, 0.0);
  oh[label] = 1.0;
  Var onehot = constant({head.n_speakers}, std::move(oh));
  Var logits = mul_scalar(add(cos_t, mul(onehot, sub(phi, cos_t))), head.scale);
  return cross_entropy(logits, label);
}

Var SpeakerModel::embed(Var x) const {
  return backbone_embed(x, backbone, fta ? &*fta : nullptr, ra ? &*ra : nullptr);
}

Var SpeakerModel::loss(Var x, int label) const {
  require(head.has_value(), Err::MissingEmbedding,
          "model has no classification head");
  return classify_loss(embed(x), label, *head);
}

std::vector<std::pair<std::string, Var>> SpeakerModel::named_params() const {
  std::vector<std::pair<std::string, Var>> out = backbone.named_params();
  if (fta)
    for (auto& kv : fta->named_params()) out.push_back(kv);
  if (ra)
    for (auto& kv : ra->named_params()) out.push_back(kv);
  if (head)
    for (auto& kv : head->named_params()) out.push_back(kv);
  return out;
}

std::vector<Var> SpeakerModel::trainable_params(bool adapter_only) const {
  std::vector<Var> out;
  if (!adapter_only)
    for (const Var& p : backbone.params()) out.push_back(p);
  if (fta)
    for (const Var& p : fta->params()) out.push_back(p);
  if (ra)
    for (const Var& p : ra->params()) out.push_back(p);
  if (head)
    for (const Var& p : head->params()) out.push_back(p);
  return out;
}

SpeakerModel make_model(const ModelConfig& cfg, AdapterKind adapter,
                        int n_speakers, u64 seed) {
  Rng rng(derive_seed(seed, "model-init"));
  SpeakerModel m;
  m.cfg = cfg;
  m.adapter = adapter;
  m.backbone = BackboneParams::init(cfg.n_mels, cfg.backbone_channels,
                                    cfg.attention_dim, cfg.embed_dim, rng);
  if (adapter == AdapterKind::fta)
    m.fta = FtaParams::init(cfg.n_mels, cfg.fta_channels, cfg.fta_kernel, rng);
  else if (adapter == AdapterKind::ra)
    m.ra = RaParams::init(cfg.n_mels, rng);
  if (n_speakers > 0) {
    Rng head_rng(derive_seed(seed, "head-init"));
    m.head = HeadParams::init(cfg.embed_dim, n_speakers, cfg.head, head_rng,
                              cfg.aam_margin, cfg.aam_scale);
  }
  return m;
}

}  // namespace longsv
