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

#include "longsv/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>

#include "longsv/common.hpp"

namespace longsv {

namespace {

constexpr int kSampleRate = 16000;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double lorentzian(double f, double center, double bandwidth) {
  double hw = bandwidth / 2.0;
  double d = f - center;
  return hw * hw / (d * d + hw * hw);
}

}  // namespace

double SpeakerProfile::f0_at(int grade) const {
  return base_f0 * std::pow(f0_decay, grade - 1);
}

double SpeakerProfile::formant_at(int j, int grade) const {
  return formants[j] * std::pow(formant_shift, grade - 1);
}

SpeakerProfile draw_profile(int index, Rng& rng) {
  SpeakerProfile p;
  p.index = index;
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%02d", index);
  p.speaker_id = buf;
  p.base_f0 = rng.uniform(200.0, 320.0);
  p.formants[0] = rng.uniform(400.0, 800.0);
  p.formants[1] = rng.uniform(1200.0, 2200.0);
  p.formants[2] = rng.uniform(2600.0, 3300.0);
  p.bandwidths[0] = rng.uniform(80.0, 140.0);
  p.bandwidths[1] = rng.uniform(100.0, 180.0);
  p.bandwidths[2] = rng.uniform(150.0, 260.0);
  p.f0_decay = rng.uniform(0.93, 0.98);
  p.formant_shift = rng.uniform(0.95, 0.99);
  p.jitter = rng.uniform(0.004, 0.012);
  p.noise_level = rng.uniform(0.02, 0.06);
  return p;
}

Waveform synth_utterance(const SpeakerProfile& profile, int grade,
                         double duration_s, Rng& rng) {
  require(duration_s >= 0.5, Err::TooShort,
          "utterances must be at least 0.5 s");
  const size_t n = size_t(std::llround(duration_s * kSampleRate));
  const double f0g = profile.f0_at(grade);
  double centers[3], widths[3];
  for (int j = 0; j < 3; ++j) {
    centers[j] = profile.formant_at(j, grade);
    widths[j] = profile.bandwidths[j];
  }
  static const double kFormantWeight[3] = {1.0, 0.6, 0.35};
  auto envelope = [&](double f) {
    double g = 0.03;
    for (int j = 0; j < 3; ++j)
      g += kFormantWeight[j] * lorentzian(f, centers[j], widths[j]);
    return g;
  };

  // Harmonic amplitudes under the formant envelope. The cap keeps every
  // partial below Nyquist even at the top of the vibrato + jitter excursion.
  int n_harm = 0;
  while (n_harm < 40 && (n_harm + 1) * f0g * 1.12 < 7400.0) ++n_harm;
  std::vector<double> amp(static_cast<size_t>(n_harm));
  for (int h = 1; h <= n_harm; ++h)
    amp[size_t(h - 1)] = envelope(h * f0g) / std::sqrt(double(h));

  const double f_mod = rng.uniform(0.5, 1.5);
  const double phi_mod = rng.uniform(0.0, kTwoPi);
  const double syl_rate = rng.uniform(2.0, 4.0);
  const double phi_syl = rng.uniform(0.0, kTwoPi);

  // Slow AR(1) pitch wobble, one value per 10 ms frame.
  const int hop = kSampleRate / 100;
  const size_t n_frames = n / size_t(hop) + 2;
  std::vector<double> jit(n_frames, 0.0);
  for (size_t k = 1; k < n_frames; ++k) {
    double j = 0.9 * jit[k - 1] + profile.jitter * rng.gaussian();
    jit[k] = std::clamp(j, -0.02, 0.02);
  }

  std::vector<double> voiced(n);
  double phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double t = double(i) / kSampleRate;
    double f_i = f0g * (1.0 + 0.08 * std::sin(kTwoPi * f_mod * t + phi_mod) +
                        jit[i / size_t(hop)]);
    phase += kTwoPi * f_i / kSampleRate;
    double v = 0.0;
    for (int h = 1; h <= n_harm; ++h)
      v += amp[size_t(h - 1)] * std::sin(h * phase);
    double am = 0.6 + 0.4 * std::sin(kTwoPi * syl_rate * t + phi_syl);
    voiced[i] = v * am;
  }

  // Breath noise: white noise through the three formant resonators in
  // parallel, each a 2-pole section normalized to unit gain at resonance.
  std::vector<double> noise(n, 0.0);
  for (int j = 0; j < 3; ++j) {
    double r = std::exp(-M_PI * widths[j] / kSampleRate);
    double omega = kTwoPi * centers[j] / kSampleRate;
    double a1 = 2.0 * r * std::cos(omega), a2 = -r * r;
    std::complex<double> z = std::polar(1.0, omega);
    double g0 = std::abs(1.0 - a1 / z - a2 / (z * z));
    double y1 = 0.0, y2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double y = g0 * rng.gaussian() + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      noise[i] += y / 3.0;
    }
  }
  double voiced_rms = 0.0, noise_rms = 0.0;
  for (size_t i = 0; i < n; ++i) {
    voiced_rms += voiced[i] * voiced[i];
    noise_rms += noise[i] * noise[i];
  }
  voiced_rms = std::sqrt(voiced_rms / double(n));
  noise_rms = std::sqrt(noise_rms / double(n));
  double noise_gain =
      noise_rms > 0.0 ? voiced_rms * profile.noise_level * 2.0 / noise_rms
                      : 0.0;

  Waveform out;
  out.sample_rate = kSampleRate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    out.samples[i] = voiced[i] + noise_gain * noise[i];

  const size_t fade = size_t(kSampleRate) / 50;  // 20 ms
  for (size_t i = 0; i < fade && i < n; ++i) {
    double w = 0.5 - 0.5 * std::cos(M_PI * double(i) / double(fade));
    out.samples[i] *= w;
    out.samples[n - 1 - i] *= w;
  }

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out.samples) v *= 0.5 / peak;
  return out;
}

void CorpusParams::validate() const {
  require(n_speakers >= 2, Err::BadRange, "need at least 2 speakers");
  require(grades >= 1 && utts_per_grade >= 1, Err::BadRange,
          "grades and utts_per_grade must be positive");
  require(train_speakers >= 0 && train_speakers <= n_speakers, Err::BadRange,
          "train_speakers out of range");
  require(duration_s >= 0.5, Err::BadRange, "duration_s must be >= 0.5");
}

GeneratedCorpus gen_corpus(const std::string& out_dir,
                           const CorpusParams& params) {
  params.validate();
  std::filesystem::create_directories(out_dir);

  Rng profile_rng(derive_seed(params.seed, "corpus"));
  std::vector<SpeakerProfile> profiles;
  profiles.reserve(size_t(params.n_speakers));
  for (int s = 0; s < params.n_speakers; ++s)
    profiles.push_back(draw_profile(s, profile_rng));

  GeneratedCorpus corpus;
  for (const SpeakerProfile& p : profiles) {
    for (int g = 1; g <= params.grades; ++g) {
      for (int u = 0; u < params.utts_per_grade; ++u) {
        char ubuf[16];
        std::snprintf(ubuf, sizeof ubuf, "u%02d", u);
        ManifestRecord rec;
        rec.speaker_id = p.speaker_id;
        rec.grade = g;
        rec.utterance_id = ubuf;
        rec.path = out_dir + "/" + p.speaker_id + "_g" + std::to_string(g) +
                   "_" + ubuf + ".wav";
        Rng rng(derive_seed(params.seed, utt_key(rec)));
        Waveform wave = synth_utterance(p, g, params.duration_s, rng);
        rec.duration_s = wave.duration_s();
        write_wav(rec.path, wave);
        corpus.all.push_back(rec);
        if (p.index < params.train_speakers)
          corpus.train.push_back(rec);
        else
          corpus.eval.push_back(rec);
      }
    }
  }
  write_manifest(corpus.all, out_dir + "/manifest.csv");
  write_manifest(corpus.train, out_dir + "/manifest_train.csv");
  write_manifest(corpus.eval, out_dir + "/manifest_eval.csv");
  return corpus;
}

}  // namespace longsv
