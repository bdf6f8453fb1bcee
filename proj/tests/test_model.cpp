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

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "longsv/common.hpp"
#include "longsv/model.hpp"
#include "longsv/optim.hpp"
#include "longsv/rng.hpp"
#include "longsv/tensor.hpp"

using namespace longsv;

namespace {

Var rand_features(int T, int F, Rng& rng) {
  std::vector<double> data(size_t(T) * size_t(F));
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return leaf({T, F}, std::move(data), false);
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.n_mels = 8;
  cfg.backbone_channels = 6;
  cfg.attention_dim = 4;
  cfg.embed_dim = 4;
  cfg.fta_channels = 6;
  cfg.fta_kernel = 3;
  return cfg;
}

}  // namespace

TEST_CASE("fresh feature adapter is an exact identity") {
  Rng rng(3);
  FtaParams p = FtaParams::init(16, 8, 3, rng);
  Var x = rand_features(12, 16, rng);
  Var y = fta_forward(x, p);
  REQUIRE(y->shape == x->shape);
  CHECK(std::memcmp(y->value.data(), x->value.data(),
                    x->size() * sizeof(double)) == 0);
}

TEST_CASE("fresh residual ablation adapter is an exact identity") {
  Rng rng(5);
  RaParams p = RaParams::init(16, rng);
  Var x = rand_features(12, 16, rng);
  Var y = ra_forward(x, p);
  REQUIRE(y->shape == x->shape);
  CHECK(std::memcmp(y->value.data(), x->value.data(),
                    x->size() * sizeof(double)) == 0);
}

TEST_CASE("perturbed adapter departs from identity") {
  Rng rng(7);
  FtaParams p = FtaParams::init(16, 8, 3, rng);
  for (auto& v : p.conv2_k->value) v = 0.05;
  Var x = rand_features(12, 16, rng);
  Var y = fta_forward(x, p);
  double diff = 0.0;
  for (size_t i = 0; i < x->size(); ++i)
    diff = std::max(diff, std::abs(y->value[i] - x->value[i]));
  CHECK(diff > 1e-4);
}

TEST_CASE("adapter parameter counts follow the architecture") {
  Rng rng(9);
  int F = 80, C = 16, K = 5;
  FtaParams p = FtaParams::init(F, C, K, rng);
  size_t expect = 2 * F          // layer norm
                  + F * F + F    // fc
                  + C * 1 * K + C  // conv1
                  + 1 * C * K + 1;  // conv2
  CHECK(p.param_count() == expect);
  RaParams r = RaParams::init(F, rng);
  CHECK(r.param_count() == size_t(2 * F + 2 * (F * F + F)));
}

TEST_CASE("attentive pooling with constant scores equals plain stats") {
  Rng rng(11);
  int T = 10, C = 6, A = 4;
  Var h = rand_features(T, C, rng);
  // Zero attention weights make every frame score identical, so the
  // softmax is uniform and pooling reduces to mean and population std.
  Var w1 = leaf({A, C}, std::vector<double>(size_t(A) * C, 0.0), false);
  Var b1 = leaf({A}, std::vector<double>(A, 0.0), false);
  Var w2 = leaf({A}, std::vector<double>(A, 0.0), false);
  Var pooled = attentive_stats_pool(h, w1, b1, w2);
  REQUIRE(pooled->shape == std::vector<int>{2 * C});
  for (int c = 0; c < C; ++c) {
    double m = 0.0;
    for (int t = 0; t < T; ++t) m += h->value[size_t(t) * C + c];
    m /= T;
    double s2 = 0.0;
    for (int t = 0; t < T; ++t) {
      double d = h->value[size_t(t) * C + c] - m;
      s2 += d * d;
    }
    s2 /= T;
    CHECK(pooled->value[size_t(c)] == doctest::Approx(m).epsilon(1e-10));
    CHECK(pooled->value[size_t(C + c)] ==
          doctest::Approx(std::sqrt(s2)).epsilon(1e-4));
  }
}

TEST_CASE("attentive pooling favors high-scoring frames") {
  int T = 4, C = 2, A = 1;
  // One attention unit keyed on channel 0: frames with larger channel-0
  // values should dominate the weighted mean.
  std::vector<double> hv = {5.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0};
  Var h = leaf({T, C}, hv, false);
  Var w1 = leaf({A, C}, {2.0, 0.0}, false);
  Var b1 = leaf({A}, {0.0}, false);
  Var w2 = leaf({A}, {3.0}, false);
  Var pooled = attentive_stats_pool(h, w1, b1, w2);
  // Frame 0 has by far the largest score; weighted mean of channel 1
  // should be pulled toward its value 1.0 rather than the plain mean 2.5.
  CHECK(pooled->value[1] < 1.5);
  CHECK(pooled->value[0] > 4.2);
}

TEST_CASE("embedding is deterministic in the seed") {
  ModelConfig cfg = tiny_config();
  SpeakerModel m1 = make_model(cfg, AdapterKind::fta, 3, 42);
  SpeakerModel m2 = make_model(cfg, AdapterKind::fta, 3, 42);
  SpeakerModel m3 = make_model(cfg, AdapterKind::fta, 3, 43);
  Rng rng(1);
  Var x = rand_features(12, cfg.n_mels, rng);
  Var e1 = m1.embed(x);
  Var e2 = m2.embed(x);
  Var e3 = m3.embed(x);
  REQUIRE(e1->shape == std::vector<int>{cfg.embed_dim});
  CHECK(std::memcmp(e1->value.data(), e2->value.data(),
                    e1->size() * sizeof(double)) == 0);
  bool same = std::memcmp(e1->value.data(), e3->value.data(),
                          e1->size() * sizeof(double)) == 0;
  CHECK_FALSE(same);
}

TEST_CASE("trainable_params splits adapter from backbone") {
  ModelConfig cfg = tiny_config();
  SpeakerModel m = make_model(cfg, AdapterKind::fta, 3, 1);
  auto all = m.trainable_params(false);
  auto adapter_only = m.trainable_params(true);
  CHECK(all.size() > adapter_only.size());
  REQUIRE(m.fta.has_value());
  auto fta_vars = m.fta->params();
  REQUIRE(m.head.has_value());
  auto head_vars = m.head->params();
  // adapter_only holds exactly the adapter and head parameters.
  CHECK(adapter_only.size() == fta_vars.size() + head_vars.size());
  for (const Var& v : fta_vars) {
    bool found = false;
    for (const Var& w : adapter_only) found = found || w.get() == v.get();
    CHECK(found);
  }
  for (const Var& v : m.backbone.params()) {
    for (const Var& w : adapter_only) CHECK(w.get() != v.get());
  }
}

TEST_CASE("full model gradient agrees with finite differences") {
  // Sharp test point: seeds picked so no parameter has a near-zero
  // gradient, keeping the FD comparison out of roundoff territory.
  // h trades truncation against roundoff for losses of this scale.
  ModelConfig cfg = tiny_config();
  SpeakerModel model = make_model(cfg, AdapterKind::fta, 2, 2);
  Rng rng(13);
  Var x = rand_features(10, cfg.n_mels, rng);
  auto f = [&] { return model.loss(x, 1); };
  double err = grad_check(f, model.trainable_params(false), 3e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("ra-adapter model gradient agrees with finite differences") {
  ModelConfig cfg = tiny_config();
  SpeakerModel model = make_model(cfg, AdapterKind::ra, 2, 9);
  Rng rng(41);
  Var x = rand_features(10, cfg.n_mels, rng);
  auto f = [&] { return model.loss(x, 0); };
  double err = grad_check(f, model.trainable_params(false), 3e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("aam head with zero margin matches scaled cosine softmax") {
  Rng rng(17);
  int E = 4, S = 3;
  HeadParams aam = HeadParams::init(E, S, HeadKind::aam, rng, 0.0, 30.0);
  Var emb = rand_features(1, E, rng);
  emb = l2_normalize(reshape(emb, {E}));
  Var loss = classify_loss(emb, 1, aam);
  // Manual: logits are scale * cos(theta_j) with W rows l2-normalized.
  std::vector<double> logits(S, 0.0);
  for (int s = 0; s < S; ++s) {
    double dot = 0.0, wn = 0.0;
    for (int e = 0; e < E; ++e) {
      double w = aam.w->value[size_t(s) * E + e];
      dot += w * emb->value[size_t(e)];
      wn += w * w;
    }
    logits[size_t(s)] = 30.0 * dot / std::sqrt(wn);
  }
  double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  double expect = -(logits[1] - mx - std::log(z));
  CHECK(loss->value[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("aam margin increases the loss of the target class") {
  Rng rng(19);
  int E = 4, S = 3;
  HeadParams plain = HeadParams::init(E, S, HeadKind::aam, rng, 0.0, 30.0);
  HeadParams margined = plain;
  margined.margin = 0.2;
  Var emb = rand_features(1, E, rng);
  emb = l2_normalize(reshape(emb, {E}));
  double l0 = classify_loss(emb, 1, plain)->value[0];
  double l1 = classify_loss(emb, 1, margined)->value[0];
  CHECK(l1 > l0);
}

TEST_CASE("model loss decreases under a few adam steps") {
  ModelConfig cfg = tiny_config();
  SpeakerModel model = make_model(cfg, AdapterKind::none, 2, 23);
  Rng rng(29);
  Var x0 = rand_features(10, cfg.n_mels, rng);
  Var x1 = rand_features(10, cfg.n_mels, rng);
  Adam opt(model.trainable_params(false), 0.01);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 30; ++i) {
    Var loss = mul_scalar(add(model.loss(x0, 0), model.loss(x1, 1)), 0.5);
    if (i == 0) first = loss->value[0];
    last = loss->value[0];
    backward(loss);
    opt.step();
  }
  CHECK(last < first * 0.5);
}

TEST_CASE("make_model speaker counts: 0 means headless, 1 is rejected") {
  ModelConfig cfg = tiny_config();
  CHECK_THROWS_AS(make_model(cfg, AdapterKind::none, 1, 0), Error);
  SpeakerModel headless = make_model(cfg, AdapterKind::none, 0, 0);
  CHECK_FALSE(headless.head.has_value());
  Rng rng(71);
  Var x = rand_features(10, cfg.n_mels, rng);
  CHECK_THROWS_AS(headless.loss(x, 0), Error);
  CHECK(headless.embed(x)->shape == std::vector<int>{cfg.embed_dim});
}
