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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "longsv/common.hpp"
#include "longsv/rng.hpp"
#include "longsv/trials.hpp"

using namespace longsv;

namespace {

// Slow exhaustive EER: try every threshold candidate and report the point
// where FAR and FRR come closest. Written independently of compute_eer.
double brute_eer_percent(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  std::vector<double> cands;
  double lo = *std::min_element(scores.begin(), scores.end());
  double hi = *std::max_element(scores.begin(), scores.end());
  cands.push_back(lo - 1.0);
  cands.push_back(hi + 1.0);
  std::vector<double> uniq(scores);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (size_t i = 0; i < uniq.size(); ++i) {
    cands.push_back(uniq[i]);
    if (i + 1 < uniq.size()) cands.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  }
  size_t nt = 0, nn = 0;
  for (int l : labels) (l ? nt : nn)++;
  double best_gap = 1e18, best = 0.0;
  for (double t : cands) {
    size_t fa = 0, fr = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 0 && scores[i] >= t) ++fa;
      if (labels[i] == 1 && scores[i] < t) ++fr;
    }
    double far = double(fa) / double(nn), frr = double(fr) / double(nt);
    double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best = 50.0 * (far + frr);
    }
  }
  return best;
}

// Slow exhaustive minDCF over the same candidate thresholds.
double brute_min_dcf(const std::vector<double>& scores,
                     const std::vector<int>& labels, double p_target) {
  std::vector<double> cands(scores);
  double lo = *std::min_element(scores.begin(), scores.end());
  double hi = *std::max_element(scores.begin(), scores.end());
  cands.push_back(lo - 1.0);
  cands.push_back(hi + 1.0);
  size_t nt = 0, nn = 0;
  for (int l : labels) (l ? nt : nn)++;
  double best = 1e18;
  for (double t : cands) {
    size_t fa = 0, fr = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 0 && scores[i] >= t) ++fa;
      if (labels[i] == 1 && scores[i] < t) ++fr;
    }
    double dcf = p_target * (double(fr) / double(nt)) +
                 (1.0 - p_target) * (double(fa) / double(nn));
    best = std::min(best, dcf);
  }
  // Normalize by the best trivial system.
  return best / std::min(p_target, 1.0 - p_target);
}

CorpusManifest toy_manifest(int speakers, int grades, int utts) {
  CorpusManifest m;
  for (int s = 0; s < speakers; ++s) {
    for (int g = 1; g <= grades; ++g) {
      for (int u = 0; u < utts; ++u) {
        ManifestRecord r;
        char buf[32];
        std::snprintf(buf, sizeof buf, "spk%02d", s);
        r.speaker_id = buf;
        r.grade = g;
        std::snprintf(buf, sizeof buf, "u%02d", u);
        r.utterance_id = buf;
        r.path = "/tmp/none.wav";
        r.duration_s = 3.0;
        m.push_back(r);
      }
    }
  }
  return m;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("eer hand case interpolates to one third") {
  std::vector<double> scores = {0.8, 0.6, 0.4, 0.7, 0.5, 0.3};
  std::vector<int> labels = {1, 1, 1, 0, 0, 0};
  auto [eer, thr] = compute_eer(scores, labels);
  CHECK(eer == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
  CHECK(thr == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("eer of perfect separation is zero") {
  std::vector<double> scores = {0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
  std::vector<int> labels = {1, 1, 1, 0, 0, 0};
  auto [eer, thr] = compute_eer(scores, labels);
  CHECK(eer == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(thr > 0.3);
  CHECK(thr <= 0.7);
}

TEST_CASE("eer of inverted labels is one hundred percent") {
  std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
  std::vector<int> labels = {0, 0, 1, 1};
  auto [eer, thr] = compute_eer(scores, labels);
  CHECK(eer == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("eer is invariant to monotone score transforms") {
  Rng rng(5);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) {
    bool target = rng.uniform() < 0.4;
    scores.push_back(target ? rng.gaussian() + 1.0 : rng.gaussian());
    labels.push_back(target ? 1 : 0);
  }
  auto [base, thr] = compute_eer(scores, labels);
  std::vector<double> warped(scores);
  for (double& s : warped) s = 2.0 * s + 1.0;  // affine, increasing
  auto [affine, thr2] = compute_eer(warped, labels);
  CHECK(affine == doctest::Approx(base).epsilon(1e-12));
  CHECK(thr2 == doctest::Approx(2.0 * thr + 1.0).epsilon(1e-9));
  for (double& s : warped) s = std::tanh(s);  // nonlinear, increasing
  auto [nonlin, thr3] = compute_eer(warped, labels);
  CHECK(nonlin == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("eer agrees with an exhaustive threshold scan") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    size_t nt = size_t(rng.uniform_int(5, 60));
    size_t nn = size_t(rng.uniform_int(5, 60));
    std::vector<double> scores;
    std::vector<int> labels;
    double sep = rng.uniform(0.0, 2.0);
    for (size_t i = 0; i < nt; ++i) {
      scores.push_back(rng.gaussian() + sep);
      labels.push_back(1);
    }
    for (size_t i = 0; i < nn; ++i) {
      scores.push_back(rng.gaussian());
      labels.push_back(0);
    }
    auto [eer, thr] = compute_eer(scores, labels);
    double brute = brute_eer_percent(scores, labels);
    // The scan cannot interpolate between operating points, so allow one
    // step of either error-rate staircase.
    double step = 100.0 / double(std::min(nt, nn));
    CHECK(std::abs(eer - brute) <= step + 1e-9);
    CHECK(eer >= 0.0);
    CHECK(eer <= 100.0);
  }
}

TEST_CASE("eer rejects degenerate label sets") {
  std::vector<double> s = {0.5, 0.6};
  CHECK_THROWS_AS(compute_eer(s, {1, 1}), Error);
  CHECK_THROWS_AS(compute_eer(s, {0, 0}), Error);
  CHECK_THROWS_AS(compute_eer({}, {}), Error);
  CHECK_THROWS_AS(compute_eer(s, {1}), Error);
}

TEST_CASE("min_dcf of identical distributions is the trivial cost") {
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(double((i / 2) % 10));
    labels.push_back(i % 2);
  }
  CHECK(compute_min_dcf(scores, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("min_dcf of perfect separation is zero") {
  std::vector<double> scores = {5.0, 4.0, 1.0, 0.0};
  std::vector<int> labels = {1, 1, 0, 0};
  CHECK(compute_min_dcf(scores, labels) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("min_dcf agrees with an exhaustive scan") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    size_t nt = size_t(rng.uniform_int(10, 80));
    size_t nn = size_t(rng.uniform_int(10, 80));
    double sep = rng.uniform(0.5, 2.5);
    for (size_t i = 0; i < nt; ++i) {
      scores.push_back(rng.gaussian() + sep);
      labels.push_back(1);
    }
    for (size_t i = 0; i < nn; ++i) {
      scores.push_back(rng.gaussian());
      labels.push_back(0);
    }
    double got = compute_min_dcf(scores, labels, 0.01);
    double brute = brute_min_dcf(scores, labels, 0.01);
    CHECK(got == doctest::Approx(brute).epsilon(1e-9));
  }
}

TEST_CASE("vad finds the voiced stretch of a gated tone") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000 * 6, 0.0);
  // Speech from 1.0 s to 4.0 s.
  for (size_t i = 16000; i < 64000; ++i)
    w.samples[i] = 0.4 * std::sin(2.0 * M_PI * 300.0 * double(i) / 16000.0);
  auto segs = energy_vad_segments(w, 2.0);
  REQUIRE(segs.size() == 1);
  CHECK(std::abs(double(segs[0].begin) - 16000.0) < 1600.0);
  CHECK(std::abs(double(segs[0].end) - 64000.0) < 1600.0);
}

TEST_CASE("vad merges short gaps and drops short segments") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000 * 6, 0.0);
  auto tone = [&](double t0, double t1) {
    for (size_t i = size_t(t0 * 16000); i < size_t(t1 * 16000); ++i)
      w.samples[i] = 0.4 * std::sin(2.0 * M_PI * 300.0 * double(i) / 16000.0);
  };
  // Two bursts separated by a 0.2 s gap (merged), plus an isolated 0.5 s
  // burst far away (dropped by the 2 s minimum).
  tone(1.0, 2.2);
  tone(2.4, 3.6);
  tone(5.0, 5.5);
  auto segs = energy_vad_segments(w, 2.0);
  REQUIRE(segs.size() == 1);
  CHECK(double(segs[0].end - segs[0].begin) / 16000.0 > 2.0);
}

TEST_CASE("vad of silence is empty") {
  Waveform w;
  w.samples.assign(16000 * 3, 0.0);
  CHECK(energy_vad_segments(w, 2.0).empty());
}

TEST_CASE("build_trials invariants hold on the exhaustive pools") {
  CorpusManifest m = toy_manifest(6, 3, 4);
  Rng rng(derive_seed(0, "trials-G1-G3"));
  TrialList list = build_trials(m, 1, 3, 40, 40, rng);
  CHECK(list.n_target() == 40);
  CHECK(list.n_nontarget() == 40);
  CHECK(list.target_shortfall == 0);
  CHECK(list.nontarget_shortfall == 0);
  std::set<std::pair<std::string, std::string>> seen;
  for (const Trial& t : list.trials) {
    // No duplicate pairs.
    CHECK(seen.insert({t.enroll, t.test}).second);
    // Targets span the grade pair; nontargets anchor in the test grade.
    if (t.label == 1) {
      CHECK(t.enroll.find("/1/") != std::string::npos);
      CHECK(t.test.find("/3/") != std::string::npos);
    } else {
      CHECK(t.enroll.find("/3/") != std::string::npos);
      CHECK(t.test.find("/3/") != std::string::npos);
    }
    std::string es = t.enroll.substr(0, t.enroll.find('/'));
    std::string ts = t.test.substr(0, t.test.find('/'));
    if (t.label == 1) CHECK(es == ts);
    else CHECK(es != ts);
  }
}

TEST_CASE("build_trials records shortfalls for small pools") {
  CorpusManifest m = toy_manifest(2, 2, 2);
  Rng rng(3);
  // Target pool: 2 speakers * 2*2 cross-grade pairs = 8. Nontarget pool in
  // grade 2: one speaker pair * 2*2 utterance pairs * 2 orders = 8.
  TrialList list = build_trials(m, 1, 2, 100, 100, rng);
  CHECK(list.n_target() == 8);
  CHECK(list.target_shortfall == 92);
  CHECK(list.n_nontarget() == 8);
  CHECK(list.nontarget_shortfall == 92);
}

TEST_CASE("build_trials nontargets anchor on the requested grade") {
  CorpusManifest m = toy_manifest(4, 2, 2);
  Rng r1(1), r2(1);
  TrialList test_anchor = build_trials(m, 1, 2, 10, 10, r1, false);
  for (const Trial& t : test_anchor.trials)
    if (t.label == 0) {
      CHECK(t.enroll.find("/2/") != std::string::npos);
      CHECK(t.test.find("/2/") != std::string::npos);
    }
  TrialList enroll_anchor = build_trials(m, 1, 2, 10, 10, r2, true);
  for (const Trial& t : enroll_anchor.trials)
    if (t.label == 0) {
      CHECK(t.enroll.find("/1/") != std::string::npos);
      CHECK(t.test.find("/1/") != std::string::npos);
    }
}

TEST_CASE("build_trials is deterministic in the rng") {
  CorpusManifest m = toy_manifest(5, 2, 3);
  Rng r1(7), r2(7);
  TrialList a = build_trials(m, 1, 2, 20, 20, r1);
  TrialList b = build_trials(m, 1, 2, 20, 20, r2);
  REQUIRE(a.trials.size() == b.trials.size());
  for (size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].enroll == b.trials[i].enroll);
    CHECK(a.trials[i].test == b.trials[i].test);
    CHECK(a.trials[i].label == b.trials[i].label);
  }
}

TEST_CASE("build_trials needs two speakers for nontargets") {
  CorpusManifest m = toy_manifest(1, 2, 3);
  Rng rng(1);
  CHECK_THROWS_AS(build_trials(m, 1, 2, 5, 5, rng), Error);
}

TEST_CASE("manifest trial and score files roundtrip") {
  CorpusManifest m = toy_manifest(3, 2, 2);
  std::string mpath = temp_path("longsv_test_manifest.csv");
  write_manifest(m, mpath);
  CorpusManifest m2 = read_manifest(mpath);
  REQUIRE(m2.size() == m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    CHECK(m2[i].speaker_id == m[i].speaker_id);
    CHECK(m2[i].grade == m[i].grade);
    CHECK(m2[i].utterance_id == m[i].utterance_id);
    CHECK(m2[i].path == m[i].path);
    CHECK(m2[i].duration_s == doctest::Approx(m[i].duration_s));
  }
  std::remove(mpath.c_str());

  Rng rng(9);
  TrialList list = build_trials(m, 1, 2, 10, 10, rng);
  list.name = "G1-G2";
  std::string tpath = temp_path("longsv_test_trials.txt");
  write_trials(list, tpath);
  TrialList list2 = read_trials(tpath, "G1-G2");
  REQUIRE(list2.trials.size() == list.trials.size());
  for (size_t i = 0; i < list.trials.size(); ++i) {
    CHECK(list2.trials[i].label == list.trials[i].label);
    CHECK(list2.trials[i].enroll == list.trials[i].enroll);
    CHECK(list2.trials[i].test == list.trials[i].test);
  }
  std::remove(tpath.c_str());
}

TEST_CASE("embeddings roundtrip and scoring joins correctly") {
  EmbeddingMap em;
  Rng rng(21);
  CorpusManifest m = toy_manifest(3, 2, 2);
  for (const auto& r : m) {
    std::vector<double> v(8);
    for (auto& x : v) x = rng.gaussian();
    em[utt_key(r)] = v;
  }
  std::string epath = temp_path("longsv_test_emb.bin");
  write_embeddings(em, epath);
  EmbeddingMap em2 = read_embeddings(epath);
  REQUIRE(em2.size() == em.size());
  for (const auto& [k, v] : em) {
    REQUIRE(em2.count(k) == 1);
    for (size_t i = 0; i < v.size(); ++i)
      CHECK(em2.at(k)[i] == doctest::Approx(v[i]).epsilon(1e-12));
  }
  std::remove(epath.c_str());

  Rng r2(5);
  TrialList list = build_trials(m, 1, 2, 8, 8, r2);
  auto scored = score_trials(list, em);
  REQUIRE(scored.size() == list.trials.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    double expect = cosine_score(em.at(list.trials[i].enroll),
                                 em.at(list.trials[i].test));
    CHECK(scored[i].score == doctest::Approx(expect).epsilon(1e-12));
    CHECK(scored[i].label == list.trials[i].label);
  }

  std::string spath = temp_path("longsv_test_scores.txt");
  write_scores(scored, spath);
  auto scored2 = read_scores(spath, list);
  REQUIRE(scored2.size() == scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    // Score files carry 6 decimals.
    CHECK(std::abs(scored2[i].score - scored[i].score) < 1e-6);
    CHECK(scored2[i].label == scored[i].label);
  }
  std::remove(spath.c_str());
}

TEST_CASE("score_trials flags missing embeddings") {
  EmbeddingMap em;
  em["a/1/u0"] = {1.0, 0.0};
  TrialList list;
  list.trials.push_back({1, "a/1/u0", "b/1/u0"});
  CHECK_THROWS_AS(score_trials(list, em), Error);
}

TEST_CASE("cosine_score matches the closed form and rejects zeros") {
  CHECK(cosine_score({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_score({1, 1}, {1, 1}) == doctest::Approx(1.0));
  CHECK(cosine_score({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_score({0, 0}, {1, 0}), Error);
  CHECK_THROWS_AS(cosine_score({1, 0}, {1, 0, 0}), Error);
}

TEST_CASE("evaluate bundles eer mindcf and counts") {
  std::vector<ScoredTrial> scored;
  for (int i = 0; i < 30; ++i)
    scored.push_back({"e", "t", i < 15 ? 0.8 - 0.01 * i : 0.2 + 0.01 * i,
                      i < 15 ? 1 : 0});
  EvalResult r = evaluate(scored);
  CHECK(r.n_target == 15);
  CHECK(r.n_nontarget == 15);
  CHECK(r.eer >= 0.0);
  CHECK(r.min_dcf >= 0.0);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : scored) {
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  CHECK(r.eer == doctest::Approx(compute_eer(scores, labels).first));
  CHECK(r.min_dcf == doctest::Approx(compute_min_dcf(scores, labels)));
}

TEST_CASE("results accumulate and render as a grid") {
  std::string rpath = temp_path("longsv_test_results.csv");
  std::remove(rpath.c_str());
  append_result(rpath, {"base", "G1-G2", 12.5, 0.61, 100, 200});
  append_result(rpath, {"base", "G1-G3", 15.0, 0.72, 100, 200});
  append_result(rpath, {"fta", "G1-G2", 10.0, 0.55, 100, 200});
  auto rows = read_results(rpath);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].set == "G1-G3");
  CHECK(rows[1].eer == doctest::Approx(15.0));
  CHECK(rows[2].system == "fta");
  CHECK(rows[2].n_nontarget == 200);
  std::string csv = report_csv(rows);
  CHECK(csv.find("G1-G2") != std::string::npos);
  CHECK(csv.find("G1-G3") != std::string::npos);
  CHECK(csv.find("12.50") != std::string::npos);
  CHECK(csv.find("10.00") != std::string::npos);
  std::string table = report_table(rows);
  CHECK(table.find("base") != std::string::npos);
  CHECK(table.find("fta") != std::string::npos);
  std::remove(rpath.c_str());
}
