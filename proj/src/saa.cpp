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

#include "longsv/saa.hpp"

#include <errno.h>
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <mutex>

#include <Eigen/Dense>

#include "longsv/common.hpp"

namespace longsv {

MelSpectrogram mel_spectrogram(const Waveform& wave, const FrameSpec& spec,
                               const MelMatrix& mel) {
  Spectrogram sg = stft(wave, spec);
  MelSpectrogram out;
  out.n_mels = mel.n_mels;
  out.frames = sg.frames;
  out.sample_rate = wave.sample_rate;
  out.data.assign(static_cast<size_t>(mel.n_mels) * sg.frames, 0.0f);
  for (int m = 0; m < mel.n_mels; ++m) {
    const double* wrow = mel.weights.data() + static_cast<size_t>(m) * sg.bins;
    for (int t = 0; t < sg.frames; ++t) {
      const double* mag = sg.mag.data() + static_cast<size_t>(t) * sg.bins;
      double acc = 0.0;
      for (int k = 0; k < sg.bins; ++k) acc += wrow[k] * mag[k];
      out.at(m, t) = static_cast<float>(acc);
    }
  }
  return out;
}

Spectrogram mel_to_linear(const MelSpectrogram& mel_mag, const MelMatrix& mel,
                          const FrameSpec& spec) {
  require(mel_mag.n_mels == mel.n_mels, Err::DimMismatch,
          "mel dims: input " + std::to_string(mel_mag.n_mels) + " vs matrix " +
              std::to_string(mel.n_mels));
  int bins = mel.bins();
  require(bins == spec.bins(), Err::DimMismatch,
          "mel matrix fft size differs from frame spec");

  using Mat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> m(mel.weights.data(), mel.n_mels, bins);
  Mat mmt = m * m.transpose();
  Mat x = mmt.ldlt().solve(m);  // (n_mels, bins); pinv = x^T

  Spectrogram out;
  out.frames = mel_mag.frames;
  out.bins = bins;
  out.spec = spec;
  out.mag.assign(static_cast<size_t>(out.frames) * bins, 0.0);
  out.phase.assign(out.mag.size(), 0.0);
  for (int t = 0; t < out.frames; ++t) {
    double* dst = out.mag.data() + static_cast<size_t>(t) * bins;
    for (int mm = 0; mm < mel.n_mels; ++mm) {
      double v = mel_mag.v(mm, t);
      if (v == 0.0) continue;
      const double* prow = x.data() + static_cast<size_t>(mm) * bins;
      for (int k = 0; k < bins; ++k) dst[k] += prow[k] * v;
    }
    for (int k = 0; k < bins; ++k) dst[k] = std::max(dst[k], 0.0);
  }
  return out;
}

Waveform griffin_lim(const Spectrogram& magnitude, int iterations,
                     const FrameSpec& spec, int sample_rate) {
  require(iterations >= 1, Err::BadRange, "griffin_lim needs >= 1 iteration");
  size_t out_len = static_cast<size_t>(spec.win_length) +
                   static_cast<size_t>(magnitude.frames - 1) * spec.hop_length;
  Spectrogram sg = magnitude;
  sg.spec = spec;
  sg.phase.assign(sg.mag.size(), 0.0);
  Waveform x;
  for (int it = 0; it < iterations; ++it) {
    x = istft(sg, spec, out_len);
    if (it + 1 < iterations) {
      Spectrogram sx = stft(x, spec);
      sg.phase = std::move(sx.phase);
    }
  }
  x.sample_rate = sample_rate;
  return x;
}

double spectral_convergence(const Waveform& x, const Spectrogram& target,
                            const FrameSpec& spec) {
  Spectrogram sx = stft(x, spec);
  require(sx.frames == target.frames && sx.bins == target.bins,
          Err::DimMismatch, "spectral_convergence: frame mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < sx.mag.size(); ++i) {
    double d = sx.mag[i] - target.mag[i];
    num += d * d;
    den += target.mag[i] * target.mag[i];
  }
  if (den == 0.0) return 0.0;
  return std::sqrt(num / den);
}

Waveform denoise(const Waveform& wave, const DenoiseConfig& cfg,
                 const FrameSpec& spec) {
  require(!cfg.bias_spectrum.empty(), Err::MissingBias,
          "denoise bias spectrum not estimated");
  require(cfg.bias_spectrum.size() == static_cast<size_t>(spec.bins()),
          Err::DimMismatch, "bias spectrum bin count mismatch");
  size_t n = wave.size();
  Waveform padded = wave;
  padded.samples.resize(covered_length(n, spec), 0.0);
  Spectrogram sg = stft(padded, spec);
  for (int t = 0; t < sg.frames; ++t)
    for (int k = 0; k < sg.bins; ++k)
      sg.m(t, k) =
          std::max(sg.m(t, k) - cfg.strength * cfg.bias_spectrum[k], 0.0);
  Waveform out = istft(sg, spec, padded.size());
  out.sample_rate = wave.sample_rate;
  out.samples.resize(n);
  return out;
}

std::vector<double> estimate_bias(const VocoderBackend& backend,
                                  const FrameSpec& spec, const MelMatrix& mel) {
  MelSpectrogram zero;
  zero.n_mels = mel.n_mels;
  zero.frames = 50;
  zero.sample_rate = mel.sample_rate;
  zero.data.assign(static_cast<size_t>(zero.n_mels) * zero.frames, 0.0f);
  Waveform w = run_backend(zero, backend, spec, mel);
  Spectrogram sg = stft(w, spec);
  std::vector<double> bias(sg.bins, 0.0);
  for (int t = 0; t < sg.frames; ++t)
    for (int k = 0; k < sg.bins; ++k) bias[k] += sg.m(t, k);
  for (double& b : bias) b /= sg.frames;
  return bias;
}

Waveform run_backend(const MelSpectrogram& mel_mag,
                     const VocoderBackend& backend, const FrameSpec& spec,
                     const MelMatrix& mel) {
  if (backend.kind == VocoderBackend::Kind::external)
    return external_vocoder_call(mel_mag, backend.command);
  Spectrogram lin = mel_to_linear(mel_mag, mel, spec);
  Waveform w = griffin_lim(lin, backend.iterations, spec, mel_mag.sample_rate);
  return pcm16_roundtrip(w);
}

namespace {

void append_u32(std::string& buf, u32 v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::string mels_message(const MelSpectrogram& mel) {
  std::string buf;
  buf.reserve(20 + mel.data.size() * 4);
  buf += "MELS";
  append_u32(buf, 1);
  append_u32(buf, static_cast<u32>(mel.n_mels));
  append_u32(buf, static_cast<u32>(mel.frames));
  append_u32(buf, static_cast<u32>(mel.sample_rate));
  static_assert(sizeof(float) == 4);
  buf.append(reinterpret_cast<const char*>(mel.data.data()),
             mel.data.size() * 4);
  return buf;
}

void set_nonblock(int fd) { fcntl(fd, F_SETFL, O_NONBLOCK); }

std::string excerpt(const std::string& s, size_t limit = 400) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "...";
}

}  // namespace

Waveform external_vocoder_call(const MelSpectrogram& mel_mag,
                               const std::string& command) {
  require(!command.empty(), Err::SpawnFailed, "empty vocoder command");
  // A SIGPIPE from a child that exits early must surface as a write error,
  // not kill the process.
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });

  int in_pipe[2], out_pipe[2], err_pipe[2];
  require(pipe(in_pipe) == 0 && pipe(out_pipe) == 0 && pipe(err_pipe) == 0,
          Err::SpawnFailed, "pipe() failed");
  pid_t pid = fork();
  require(pid >= 0, Err::SpawnFailed, "fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], 0);
    dup2(out_pipe[1], 1);
    dup2(err_pipe[1], 2);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  int in_fd = in_pipe[1], out_fd = out_pipe[0], err_fd = err_pipe[0];
  set_nonblock(in_fd);
  set_nonblock(out_fd);
  set_nonblock(err_fd);

  std::string input = mels_message(mel_mag);
  size_t written = 0;
  std::string out_buf, err_buf;
  bool in_open = true, out_open = true, err_open = true;
  char chunk[65536];
  while (in_open || out_open || err_open) {
    struct pollfd fds[3];
    int nfds = 0;
    int in_slot = -1, out_slot = -1, err_slot = -1;
    if (in_open) {
      in_slot = nfds;
      fds[nfds++] = {in_fd, POLLOUT, 0};
    }
    if (out_open) {
      out_slot = nfds;
      fds[nfds++] = {out_fd, POLLIN, 0};
    }
    if (err_open) {
      err_slot = nfds;
      fds[nfds++] = {err_fd, POLLIN, 0};
    }
    int rc = poll(fds, nfds, -1);
    if (rc < 0 && errno == EINTR) continue;
    require(rc >= 0, Err::SpawnFailed, "poll() failed");
    if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t n = write(in_fd, input.data() + written,
                        std::min<size_t>(input.size() - written, sizeof chunk));
      if (n > 0) written += static_cast<size_t>(n);
      bool broken = n < 0 && errno != EAGAIN && errno != EWOULDBLOCK;
      if (written == input.size() || broken) {
        close(in_fd);
        in_open = false;
      }
    }
    if (out_slot >= 0 && (fds[out_slot].revents & (POLLIN | POLLERR | POLLHUP))) {
      ssize_t n = read(out_fd, chunk, sizeof chunk);
      if (n > 0) {
        out_buf.append(chunk, static_cast<size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)) {
        close(out_fd);
        out_open = false;
      }
    }
    if (err_slot >= 0 && (fds[err_slot].revents & (POLLIN | POLLERR | POLLHUP))) {
      ssize_t n = read(err_fd, chunk, sizeof chunk);
      if (n > 0) {
        err_buf.append(chunk, static_cast<size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)) {
        close(err_fd);
        err_open = false;
      }
    }
  }
  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status))
    fail(Err::ChildNonzeroExit,
         "vocoder terminated by signal; stderr: " + excerpt(err_buf));
  int code = WEXITSTATUS(status);
  if (code == 126 || code == 127)
    fail(Err::SpawnFailed, "vocoder command not runnable (exit " +
                               std::to_string(code) + "): " + command);
  if (code != 0)
    fail(Err::ChildNonzeroExit, "vocoder exited " + std::to_string(code) +
                                    "; stderr: " + excerpt(err_buf));
  try {
    std::vector<uint8_t> bytes(out_buf.begin(), out_buf.end());
    return decode_wav(bytes);
  } catch (const Error& e) {
    fail(Err::ProtocolError,
         std::string("vocoder stdout is not a valid WAV: ") + e.what());
  }
}

Waveform saa_roundtrip(const Waveform& wave, const VocoderBackend& backend,
                       const DenoiseConfig& dn, const FrameSpec& spec,
                       const MelMatrix& mel) {
  MelSpectrogram mel_mag = mel_spectrogram(wave, spec, mel);
  Waveform w = run_backend(mel_mag, backend, spec, mel);
  w = denoise(w, dn, spec);
  w.samples.resize(wave.size(), 0.0);
  w.sample_rate = wave.sample_rate;
  return w;
}

CorpusManifest saa_corpus(const CorpusManifest& manifest,
                          const VocoderBackend& backend,
                          const DenoiseConfig& dn, const FrameSpec& spec,
                          const MelMatrix& mel, const std::string& out_dir,
                          int jobs) {
  DenoiseConfig cfg = dn;
  if (cfg.bias_spectrum.empty())
    cfg.bias_spectrum = estimate_bias(backend, spec, mel);
  std::filesystem::create_directories(out_dir);

  std::vector<ManifestRecord> synth(manifest.size());
  std::vector<std::string> failures(manifest.size());
  parallel_for(manifest.size(), jobs, [&](size_t i) {
    const ManifestRecord& rec = manifest[i];
    ManifestRecord s = rec;
    s.utterance_id = rec.utterance_id + "_saa";
    std::string fname = rec.speaker_id + "_g" + std::to_string(rec.grade) +
                        "_" + rec.utterance_id + "_saa.wav";
    std::replace(fname.begin(), fname.end(), '/', '_');
    s.path = out_dir + "/" + fname;
    try {
      Waveform w = read_wav(rec.path);
      Waveform out = saa_roundtrip(w, backend, cfg, spec, mel);
      write_wav(s.path, out);
    } catch (const Error& e) {
      failures[i] = rec.path + ": " + e.what();
    }
    synth[i] = std::move(s);
  });

  std::string problems;
  for (const auto& f : failures)
    if (!f.empty()) problems += (problems.empty() ? "" : "; ") + f;
  require(problems.empty(), Err::IoError, "saa_corpus failures: " + problems);

  CorpusManifest out = manifest;
  out.insert(out.end(), synth.begin(), synth.end());
  return out;
}

}  // namespace longsv
