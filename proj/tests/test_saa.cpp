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
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "longsv/audio.hpp"
#include "longsv/common.hpp"
#include "longsv/dsp.hpp"
#include "longsv/mel.hpp"
#include "longsv/rng.hpp"
#include "longsv/saa.hpp"
#include "longsv/synthcorpus.hpp"
#include "longsv/trials.hpp"

using namespace longsv;

namespace {

Waveform voiced(double f0, double dur_s, u64 seed) {
  // A few harmonics plus light noise, roughly voice-like.
  Waveform w;
  w.sample_rate = 16000;
  size_t n = size_t(dur_s * 16000);
  w.samples.resize(n);
  Rng rng(seed);
  double phase = rng.uniform(0.0, 2.0 * M_PI);
  for (size_t i = 0; i < n; ++i) {
    double t = double(i) / 16000.0;
    double v = 0.0;
    for (int h = 1; h <= 6; ++h)
      v += std::sin(2.0 * M_PI * f0 * h * t + phase * h) / double(h);
    w.samples[i] = 0.2 * v + 0.005 * rng.uniform(-1.0, 1.0);
  }
  return w;
}

double rms(const Waveform& w) {
  double p = 0.0;
  for (double s : w.samples) p += s * s;
  return std::sqrt(p / double(w.size()));
}

}  // namespace

TEST_CASE("mel_to_linear approximately inverts a smooth spectrum") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(80, 512, 16000, 0.0, 8000.0);
  Waveform w = voiced(220.0, 1.0, 3);
  Spectrogram target = stft(w, spec);
  MelSpectrogram mm = mel_spectrogram(w, spec, mel);
  REQUIRE(mm.n_mels == 80);
  REQUIRE(mm.frames == target.frames);
  Spectrogram approx = mel_to_linear(mm, mel, spec);
  REQUIRE(approx.frames == target.frames);
  REQUIRE(approx.bins == target.bins);
  // Relative L2 error over the filterbank's covered band. The pseudo-
  // inverse cannot be exact (80 mels vs 257 bins) but should be close for
  // a smooth harmonic spectrum.
  double num = 0.0, den = 0.0;
  for (int t = 0; t < target.frames; ++t) {
    for (int k = 2; k < target.bins - 2; ++k) {
      double d = approx.mv(t, k) - target.mv(t, k);
      num += d * d;
      den += target.mv(t, k) * target.mv(t, k);
    }
  }
  CHECK(std::sqrt(num / den) < 0.35);
  for (double v : approx.mag) CHECK(v >= 0.0);
}

TEST_CASE("griffin_lim converges monotonically-ish with iterations") {
  FrameSpec spec;
  Waveform w = voiced(250.0, 1.0, 7);
  Spectrogram target = stft(w, spec);
  target.phase.clear();  // magnitude-only target
  Waveform g2 = griffin_lim(target, 2, spec);
  Waveform g32 = griffin_lim(target, 32, spec);
  double c2 = spectral_convergence(g2, target, spec);
  double c32 = spectral_convergence(g32, target, spec);
  CHECK(c32 < c2);
  CHECK(c32 < 0.25);
  CHECK_THROWS_AS(griffin_lim(target, 0, spec), Error);
}

TEST_CASE("griffin_lim output length covers the analysis frames") {
  FrameSpec spec;
  Waveform w = voiced(200.0, 0.7, 9);
  Spectrogram sg = stft(w, spec);
  Waveform out = griffin_lim(sg, 4, spec);
  CHECK(out.size() ==
        size_t(spec.win_length) + size_t(sg.frames - 1) * spec.hop_length);
  CHECK(out.sample_rate == 16000);
}

TEST_CASE("denoise with zero strength is exact identity") {
  FrameSpec spec;
  Waveform w = voiced(230.0, 0.8, 11);
  DenoiseConfig dn;
  dn.strength = 0.0;
  dn.bias_spectrum.assign(size_t(spec.bins()), 1.0);
  Waveform out = denoise(w, dn, spec);
  REQUIRE(out.size() == w.size());
  double worst = 0.0;
  for (size_t i = 0; i < w.size(); ++i)
    worst = std::max(worst, std::abs(out.samples[i] - w.samples[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("denoise attenuates a constant hum") {
  FrameSpec spec;
  Waveform clean = voiced(240.0, 1.0, 13);
  // Add a strong 3 kHz hum.
  Waveform noisy = clean;
  for (size_t i = 0; i < noisy.size(); ++i)
    noisy.samples[i] += 0.1 * std::sin(2.0 * M_PI * 3000.0 * double(i) / 16000.0);
  // Bias spectrum: the hum's average magnitude per bin.
  Waveform hum;
  hum.samples.resize(noisy.size());
  for (size_t i = 0; i < hum.samples.size(); ++i)
    hum.samples[i] = 0.1 * std::sin(2.0 * M_PI * 3000.0 * double(i) / 16000.0);
  Spectrogram hsg = stft(hum, spec);
  DenoiseConfig dn;
  dn.strength = 1.0;
  dn.bias_spectrum.assign(size_t(spec.bins()), 0.0);
  for (int t = 0; t < hsg.frames; ++t)
    for (int k = 0; k < hsg.bins; ++k)
      dn.bias_spectrum[size_t(k)] += hsg.mv(t, k) / double(hsg.frames);
  Waveform out = denoise(noisy, dn, spec);
  // Residual against clean shrinks after subtraction (interior only).
  auto err = [&](const Waveform& x) {
    double e = 0.0;
    for (size_t i = 1000; i + 1000 < clean.size(); ++i)
      e += (x.samples[i] - clean.samples[i]) * (x.samples[i] - clean.samples[i]);
    return e;
  };
  CHECK(err(out) < err(noisy) * 0.25);
}

TEST_CASE("denoise validates bias and dims") {
  FrameSpec spec;
  Waveform w = voiced(220.0, 0.6, 15);
  DenoiseConfig dn;  // empty bias
  CHECK_THROWS_AS(denoise(w, dn, spec), Error);
  try {
    denoise(w, dn, spec);
  } catch (const Error& e) {
    CHECK(e.code() == Err::MissingBias);
  }
  dn.bias_spectrum.assign(10, 0.0);  // wrong bin count
  CHECK_THROWS_AS(denoise(w, dn, spec), Error);
}

TEST_CASE("estimate_bias reflects the backend's silence response") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(80, 512, 16000, 0.0, 8000.0);
  VocoderBackend gl;
  gl.iterations = 4;
  std::vector<double> bias = estimate_bias(gl, spec, mel);
  REQUIRE(int(bias.size()) == spec.bins());
  // Griffin-Lim of an all-zero mel is essentially silence, so the bias is
  // tiny but non-negative.
  for (double b : bias) {
    CHECK(b >= 0.0);
    CHECK(b < 1e-3);
  }
}

TEST_CASE("saa roundtrip keeps length pitch and energy") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(80, 512, 16000, 0.0, 8000.0);
  VocoderBackend gl;  // 32 iterations
  DenoiseConfig dn;
  dn.strength = 0.005;
  dn.bias_spectrum = estimate_bias(gl, spec, mel);
  Waveform w = voiced(260.0, 1.0, 17);
  Waveform out = saa_roundtrip(w, gl, dn, spec, mel);
  REQUIRE(out.size() == w.size());
  CHECK(out.sample_rate == w.sample_rate);
  // Energy within a factor of two, audio present.
  CHECK(rms(out) > rms(w) * 0.5);
  CHECK(rms(out) < rms(w) * 2.0);
  // The mel envelope survives: re-analysis close to the original's.
  MelSpectrogram ma = mel_spectrogram(w, spec, mel);
  MelSpectrogram mb = mel_spectrogram(out, spec, mel);
  REQUIRE(ma.frames == mb.frames);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ma.data.size(); ++i) {
    double d = double(ma.data[i]) - double(mb.data[i]);
    num += d * d;
    den += double(ma.data[i]) * double(ma.data[i]);
  }
  CHECK(std::sqrt(num / den) < 0.5);
  // But it is not a copy of the input (phase was re-estimated).
  double diff = 0.0;
  for (size_t i = 0; i < w.size(); ++i)
    diff = std::max(diff, std::abs(out.samples[i] - w.samples[i]));
  CHECK(diff > 1e-3);
}

TEST_CASE("in-process and loopback subprocess agree bit for bit") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(80, 512, 16000, 0.0, 8000.0);
  Waveform w = voiced(240.0, 0.8, 19);
  MelSpectrogram mm = mel_spectrogram(w, spec, mel);
  VocoderBackend gl;
  gl.iterations = 32;
  Waveform in_process = run_backend(mm, gl, spec, mel);
  VocoderBackend ext;
  ext.kind = VocoderBackend::Kind::external;
  ext.command = std::string(LONGSV_LOOPBACK_BIN);
  Waveform looped = run_backend(mm, ext, spec, mel);
  REQUIRE(in_process.size() == looped.size());
  CHECK(std::memcmp(in_process.samples.data(), looped.samples.data(),
                    in_process.size() * sizeof(double)) == 0);
  // Iteration count is part of the loopback protocol argv.
  VocoderBackend ext2 = ext;
  ext2.command = std::string(LONGSV_LOOPBACK_BIN) + " 2";
  Waveform low_iter = run_backend(mm, ext2, spec, mel);
  bool same = low_iter.size() == in_process.size() &&
              std::memcmp(in_process.samples.data(), low_iter.samples.data(),
                          in_process.size() * sizeof(double)) == 0;
  CHECK_FALSE(same);
}

TEST_CASE("external vocoder failure modes map to distinct errors") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(20, 512, 16000, 0.0, 8000.0);
  Waveform w = voiced(220.0, 0.5, 23);
  MelSpectrogram mm = mel_spectrogram(w, spec, mel);

  // Garbage stdout: protocol error.
  try {
    external_vocoder_call(mm, "cat");
    FAIL_CHECK("expected ProtocolError");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ProtocolError);
  }
  // Child exits nonzero with a diagnostic.
  try {
    external_vocoder_call(mm, "echo boom >&2; exit 3");
    FAIL_CHECK("expected ChildNonzeroExit");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ChildNonzeroExit);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  // Missing binary: command not found.
  try {
    external_vocoder_call(mm, "/no/such/binary_xyz");
    FAIL_CHECK("expected SpawnFailed");
  } catch (const Error& e) {
    CHECK(e.code() == Err::SpawnFailed);
  }
}

TEST_CASE("the loopback tool rejects malformed headers") {
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(20, 512, 16000, 0.0, 8000.0);
  Waveform w = voiced(220.0, 0.5, 29);
  MelSpectrogram mm = mel_spectrogram(w, spec, mel);
  // Pipe a plain string instead of a MELS message into the loopback.
  std::string cmd = std::string("printf JUNKJUNKJUNKJUNKJUNKJUNK | ") +
                    LONGSV_LOOPBACK_BIN;
  try {
    external_vocoder_call(mm, cmd + " ; exit $?");
    // The child ignores our stdin here; it must fail on its own input.
    FAIL_CHECK("expected a child failure");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ChildNonzeroExit);
  }
}

TEST_CASE("saa_corpus doubles the manifest and keeps labels") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "longsv_test_saa";
  fs::remove_all(dir);
  CorpusParams params;
  params.n_speakers = 2;
  params.grades = 2;
  params.utts_per_grade = 1;
  params.duration_s = 0.6;
  params.train_speakers = 2;
  params.seed = 33;
  GeneratedCorpus corpus = gen_corpus((dir / "in").string(), params);
  FrameSpec spec;
  MelMatrix mel = mel_filterbank_matrix(80, 512, 16000, 0.0, 8000.0);
  VocoderBackend gl;
  gl.iterations = 4;
  DenoiseConfig dn;
  dn.strength = 0.005;  // bias estimated internally when empty
  CorpusManifest doubled =
      saa_corpus(corpus.all, gl, dn, spec, mel, (dir / "out").string());
  REQUIRE(doubled.size() == corpus.all.size() * 2);
  for (size_t i = 0; i < corpus.all.size(); ++i) {
    const auto& orig = doubled[i];
    const auto& synth = doubled[corpus.all.size() + i];
    CHECK(orig.path == corpus.all[i].path);
    CHECK(synth.speaker_id == orig.speaker_id);
    CHECK(synth.grade == orig.grade);
    CHECK(synth.utterance_id == orig.utterance_id + "_saa");
    CHECK(fs::exists(synth.path));
    Waveform a = read_wav(orig.path);
    Waveform b = read_wav(synth.path);
    CHECK(a.size() == b.size());
  }
  fs::remove_all(dir);
}
