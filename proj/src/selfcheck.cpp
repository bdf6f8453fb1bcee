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

#include "longsv/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "longsv/model.hpp"
#include "longsv/rng.hpp"
#include "longsv/tensor.hpp"
#include "longsv/trials.hpp"

namespace longsv {

namespace {

std::vector<double> random_values(size_t n, Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

CheckResult check_grad_elementwise() {
  Rng rng(11);
  Var a = leaf({3, 4}, random_values(12, rng, 0.2, 1.5));
  Var b = leaf({3, 4}, random_values(12, rng, 0.2, 1.5));
  auto f = [&] {
    return sum(mul(tanh(mul(a, b)), longsv::sqrt(add(relu(a), b))));
  };
  double err = grad_check(f, {a, b});
  return {"grad/elementwise", err < 1e-5, "max rel err " + std::to_string(err)};
}

CheckResult check_grad_matmul_ce() {
  Rng rng(12);
  Var w = leaf({4, 6}, random_values(24, rng));
  Var x = leaf({6}, random_values(6, rng));
  auto f = [&] { return cross_entropy(matmul(w, x), 2); };
  double err = grad_check(f, {w, x});
  return {"grad/matmul-ce", err < 1e-5, "max rel err " + std::to_string(err)};
}

CheckResult check_grad_model() {
  ModelConfig cfg;
  cfg.n_mels = 8;
  cfg.backbone_channels = 6;
  cfg.attention_dim = 4;
  cfg.embed_dim = 4;
  cfg.fta_channels = 2;
  cfg.fta_kernel = 3;
  SpeakerModel model = make_model(cfg, AdapterKind::fta, 2, 2);
  Rng rng(13);
  std::vector<double> x = random_values(10 * 8, rng);
  auto f = [&] { return model.loss(constant({10, 8}, x), 1); };
  // h trades truncation against roundoff; 3e-5 sits in the sharp zone for
  // a composition this deep.
  double err = grad_check(f, model.trainable_params(false), 3e-5);
  return {"grad/model", err < 1e-5, "max rel err " + std::to_string(err)};
}

// Independent oracle: scan candidate thresholds midway between adjacent
// scores and report (FAR+FRR)/2 where the two rates come closest.
double brute_force_eer(const std::vector<double>& scores,
                       const std::vector<int>& labels) {
  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> cands;
  cands.push_back(uniq.front() - 1.0);
  for (size_t i = 0; i + 1 < uniq.size(); ++i)
    cands.push_back((uniq[i] + uniq[i + 1]) / 2.0);
  cands.insert(cands.end(), uniq.begin(), uniq.end());
  cands.push_back(uniq.back() + 1.0);
  double best_gap = 1e9, best = 100.0;
  for (double t : cands) {
    size_t fa = 0, fr = 0, n_t = 0, n_n = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 1) {
        ++n_t;
        if (scores[i] < t) ++fr;
      } else {
        ++n_n;
        if (scores[i] >= t) ++fa;
      }
    }
    double far = double(fa) / double(n_n), frr = double(fr) / double(n_t);
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      best = 50.0 * (far + frr);
    }
  }
  return best;
}

CheckResult check_eer_hand_case() {
  std::vector<double> scores = {0.8, 0.6, 0.4, 0.7, 0.5, 0.3};
  std::vector<int> labels = {1, 1, 1, 0, 0, 0};
  auto [eer, thr] = compute_eer(scores, labels);
  bool ok = std::abs(eer - 100.0 / 3.0) < 0.01 && std::abs(thr - 0.6) < 1e-9;
  std::ostringstream detail;
  detail << "eer " << eer << " at threshold " << thr;
  return {"eer/hand-case", ok, detail.str()};
}

CheckResult check_eer_brute_force() {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    size_t n_t = size_t(rng.uniform_int(5, 100));
    size_t n_n = size_t(rng.uniform_int(5, 100));
    std::vector<double> scores;
    std::vector<int> labels;
    for (size_t i = 0; i < n_t; ++i) {
      scores.push_back(rng.gaussian() + 1.0);
      labels.push_back(1);
    }
    for (size_t i = 0; i < n_n; ++i) {
      scores.push_back(rng.gaussian());
      labels.push_back(0);
    }
    double got = compute_eer(scores, labels).first;
    double want = brute_force_eer(scores, labels);
    double tol = 100.0 / double(std::min(n_t, n_n));
    if (std::abs(got - want) > tol)
      return {"eer/brute-force", false,
              "trial " + std::to_string(trial) + ": got " +
                  std::to_string(got) + ", oracle " + std::to_string(want)};
  }
  return {"eer/brute-force", true, "20 random sets agree"};
}

CheckResult check_eer_monotone() {
  Rng rng(22);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    scores.push_back(rng.gaussian() + (i % 2));
    labels.push_back(i % 2);
  }
  double base = compute_eer(scores, labels).first;
  std::vector<double> mapped = scores;
  for (double& s : mapped) s = 2.0 * s + 1.0;
  double after = compute_eer(mapped, labels).first;
  return {"eer/monotone-invariance", base == after,
          std::to_string(base) + " vs " + std::to_string(after)};
}

CheckResult check_min_dcf_identical() {
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    scores.push_back(double((i / 2) % 10));
    labels.push_back(i % 2);
  }
  double dcf = compute_min_dcf(scores, labels);
  return {"mindcf/identical-distributions", std::abs(dcf - 1.0) < 1e-12,
          "min dcf " + std::to_string(dcf)};
}

CheckResult check_adapter_identity() {
  Rng init_rng(31);
  FtaParams fta = FtaParams::init(16, 4, 3, init_rng);
  RaParams ra = RaParams::init(16, init_rng);
  Rng rng(32);
  std::vector<double> data = random_values(12 * 16, rng, -2.0, 2.0);
  Var x1 = constant({12, 16}, data);
  Var y1 = fta_forward(x1, fta);
  Var y2 = ra_forward(x1, ra);
  bool ok = std::memcmp(y1->value.data(), data.data(),
                        data.size() * sizeof(double)) == 0 &&
            std::memcmp(y2->value.data(), data.data(),
                        data.size() * sizeof(double)) == 0;
  return {"adapter/fresh-identity", ok,
          ok ? "bit-exact" : "fresh adapter changed its input"};
}

}  // namespace

std::vector<CheckResult> run_selftests() {
  return {
      check_grad_elementwise(),   check_grad_matmul_ce(),
      check_grad_model(),         check_eer_hand_case(),
      check_eer_brute_force(),    check_eer_monotone(),
      check_min_dcf_identical(),  check_adapter_identity(),
  };
}

}  // namespace longsv
