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
#include <cstring>
#include <filesystem>
#include <set>
#include <vector>

#include "doctest.h"
#include "longsv/common.hpp"
#include "longsv/dsp.hpp"
#include "longsv/mel.hpp"
#include "longsv/rng.hpp"
#include "longsv/synthcorpus.hpp"

using namespace longsv;

namespace {

// Fundamental estimate via the autocorrelation peak in the plausible
// pitch lag range.
double estimate_f0(const Waveform& w) {
  int sr = w.sample_rate;
  int lag_min = sr / 400, lag_max = sr / 100;
  size_t n = std::min<size_t>(w.size(), size_t(sr));
  double best = 0.0;
  int best_lag = lag_min;
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double acc = 0.0;
    for (size_t i = size_t(lag); i < n; ++i)
      acc += w.samples[i] * w.samples[i - size_t(lag)];
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return double(sr) / best_lag;
}

double spectral_centroid(const Waveform& w) {
  FrameSpec spec;
  Spectrogram sg = stft(w, spec);
  double bin_hz = double(w.sample_rate) / spec.fft_size;
  double num = 0.0, den = 0.0;
  for (int t = 0; t < sg.frames; ++t) {
    for (int k = 0; k < sg.bins; ++k) {
      double p = sg.mv(t, k) * sg.mv(t, k);
      num += p * k * bin_hz;
      den += p;
    }
  }
  return num / den;
}

double feature_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  // Mean per-dimension distance between time-averaged log-mel vectors.
  std::vector<double> ma(size_t(a.n_mels), 0.0), mb(size_t(b.n_mels), 0.0);
  for (size_t t = 0; t < a.frames; ++t)
    for (int m = 0; m < a.n_mels; ++m) ma[size_t(m)] += a.v(t, m);
  for (size_t t = 0; t < b.frames; ++t)
    for (int m = 0; m < b.n_mels; ++m) mb[size_t(m)] += b.v(t, m);
  double d = 0.0;
  for (int m = 0; m < a.n_mels; ++m) {
    double x = ma[size_t(m)] / double(a.frames) - mb[size_t(m)] / double(b.frames);
    d += x * x;
  }
  return std::sqrt(d);
}

}  // namespace

TEST_CASE("profiles are drawn inside their documented ranges") {
  Rng rng(derive_seed(7, "corpus"));
  for (int i = 0; i < 30; ++i) {
    SpeakerProfile p = draw_profile(i, rng);
    CHECK(p.index == i);
    CHECK(p.base_f0 >= 200.0);
    CHECK(p.base_f0 <= 320.0);
    CHECK(p.formants[0] >= 400.0);
    CHECK(p.formants[0] <= 800.0);
    CHECK(p.formants[1] >= 1200.0);
    CHECK(p.formants[1] <= 2200.0);
    CHECK(p.formants[2] >= 2600.0);
    CHECK(p.formants[2] <= 3300.0);
    CHECK(p.f0_decay >= 0.93);
    CHECK(p.f0_decay <= 0.98);
    CHECK(p.formant_shift >= 0.95);
    CHECK(p.formant_shift <= 0.99);
    CHECK(p.jitter >= 0.004);
    CHECK(p.jitter <= 0.012);
    CHECK(p.noise_level >= 0.02);
    CHECK(p.noise_level <= 0.06);
    // Ageing laws.
    CHECK(p.f0_at(1) == doctest::Approx(p.base_f0));
    CHECK(p.f0_at(3) == doctest::Approx(p.base_f0 * p.f0_decay * p.f0_decay));
    CHECK(p.formant_at(1, 2) ==
          doctest::Approx(p.formants[1] * p.formant_shift));
  }
}

TEST_CASE("utterances are normalized faded and of the right length") {
  Rng prof_rng(derive_seed(3, "corpus"));
  SpeakerProfile p = draw_profile(0, prof_rng);
  Rng rng(5);
  Waveform w = synth_utterance(p, 1, 2.0, rng);
  REQUIRE(w.size() == 32000);
  CHECK(w.sample_rate == 16000);
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == doctest::Approx(0.5).epsilon(1e-9));
  // 20 ms raised-cosine fades keep the endpoints tiny.
  CHECK(std::abs(w.samples.front()) < 1e-6);
  CHECK(std::abs(w.samples.back()) < 1e-3);
  Rng rng2(5);
  CHECK_THROWS_AS(synth_utterance(p, 1, 0.3, rng2), Error);
}

TEST_CASE("synthesized pitch tracks the profile across grades") {
  Rng prof_rng(derive_seed(11, "corpus"));
  for (int i = 0; i < 4; ++i) {
    SpeakerProfile p = draw_profile(i, prof_rng);
    double prev = 1e9;
    for (int g = 1; g <= 4; ++g) {
      Rng rng(derive_seed(100, u64(g)));
      Waveform w = synth_utterance(p, g, 2.0, rng);
      double f0 = estimate_f0(w);
      CHECK(std::abs(f0 - p.f0_at(g)) / p.f0_at(g) < 0.12);
      CHECK(f0 < prev + 5.0);  // monotone decrease, small estimator slack
      prev = f0;
    }
  }
}

TEST_CASE("spectral centroid falls as formants shift down") {
  Rng prof_rng(derive_seed(13, "corpus"));
  SpeakerProfile p = draw_profile(0, prof_rng);
  Rng r1(1), r2(1);
  double c1 = spectral_centroid(synth_utterance(p, 1, 2.0, r1));
  double c4 = spectral_centroid(synth_utterance(p, 4, 2.0, r2));
  CHECK(c4 < c1);
}

TEST_CASE("same seed same audio, different seed different audio") {
  Rng prof_rng(derive_seed(17, "corpus"));
  SpeakerProfile p = draw_profile(0, prof_rng);
  Rng a(9), b(9), c(10);
  Waveform wa = synth_utterance(p, 2, 1.0, a);
  Waveform wb = synth_utterance(p, 2, 1.0, b);
  Waveform wc = synth_utterance(p, 2, 1.0, c);
  REQUIRE(wa.size() == wb.size());
  CHECK(std::memcmp(wa.samples.data(), wb.samples.data(),
                    wa.size() * sizeof(double)) == 0);
  bool same = std::memcmp(wa.samples.data(), wc.samples.data(),
                          wa.size() * sizeof(double)) == 0;
  CHECK_FALSE(same);
}

TEST_CASE("speakers are farther apart than repeated draws of one speaker") {
  // Log-mel distance between two utterances of the same speaker should sit
  // below the distance between different speakers, on average.
  Rng prof_rng(derive_seed(19, "corpus"));
  std::vector<SpeakerProfile> profs;
  for (int i = 0; i < 5; ++i) profs.push_back(draw_profile(i, prof_rng));
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(40, 512, 16000);
  std::vector<std::vector<FeatureMatrix>> feats(profs.size());
  for (size_t i = 0; i < profs.size(); ++i) {
    for (int u = 0; u < 2; ++u) {
      Rng rng(derive_seed(u64(i), u64(u)));
      feats[i].push_back(
          log_mel_fbank(synth_utterance(profs[i], 1, 1.5, rng), spec, mel));
    }
  }
  double intra = 0.0;
  for (size_t i = 0; i < profs.size(); ++i)
    intra += feature_distance(feats[i][0], feats[i][1]);
  intra /= double(profs.size());
  double inter = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < profs.size(); ++i)
    for (size_t j = i + 1; j < profs.size(); ++j) {
      inter += feature_distance(feats[i][0], feats[j][0]);
      ++pairs;
    }
  inter /= double(pairs);
  CHECK(intra < inter);
}

TEST_CASE("gen_corpus writes a consistent split and is reproducible") {
  namespace fs = std::filesystem;
  CorpusParams params;
  params.n_speakers = 4;
  params.grades = 2;
  params.utts_per_grade = 2;
  params.duration_s = 0.6;
  params.train_speakers = 3;
  params.seed = 21;
  fs::path dir = fs::temp_directory_path() / "longsv_test_corpus";
  fs::remove_all(dir);
  GeneratedCorpus c = gen_corpus(dir.string(), params);
  CHECK(c.all.size() == 16);
  CHECK(c.train.size() == 12);
  CHECK(c.eval.size() == 4);
  std::set<std::string> train_spk, eval_spk;
  for (const auto& r : c.train) train_spk.insert(r.speaker_id);
  for (const auto& r : c.eval) eval_spk.insert(r.speaker_id);
  CHECK(train_spk.size() == 3);
  CHECK(eval_spk.size() == 1);
  for (const auto& s : train_spk) CHECK(eval_spk.count(s) == 0);
  for (const auto& r : c.all) {
    CHECK(fs::exists(r.path));
    Waveform w = read_wav(r.path);
    CHECK(w.size() == 9600);
    CHECK(r.duration_s == doctest::Approx(0.6));
  }
  CorpusManifest disk = read_manifest((dir / "manifest.csv").string());
  REQUIRE(disk.size() == c.all.size());
  CHECK(fs::exists(dir / "manifest_train.csv"));
  CHECK(fs::exists(dir / "manifest_eval.csv"));

  // Second run in a fresh directory: byte-identical wavs.
  fs::path dir2 = fs::temp_directory_path() / "longsv_test_corpus2";
  fs::remove_all(dir2);
  GeneratedCorpus c2 = gen_corpus(dir2.string(), params);
  for (size_t i = 0; i < c.all.size(); ++i) {
    Waveform w1 = read_wav(c.all[i].path);
    Waveform w2 = read_wav(c2.all[i].path);
    REQUIRE(w1.size() == w2.size());
    CHECK(std::memcmp(w1.samples.data(), w2.samples.data(),
                      w1.size() * sizeof(double)) == 0);
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("corpus params are validated") {
  CorpusParams p;
  p.train_speakers = 25;
  CHECK_THROWS_AS(p.validate(), Error);
  CorpusParams q;
  q.n_speakers = 1;
  CHECK_THROWS_AS(q.validate(), Error);
  CorpusParams r;
  r.duration_s = 0.1;
  CHECK_THROWS_AS(r.validate(), Error);
  CorpusParams ok;
  CHECK_NOTHROW(ok.validate());
}
