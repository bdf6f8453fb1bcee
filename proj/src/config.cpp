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

#include "longsv/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "longsv/common.hpp"

namespace longsv {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(int line, const std::string& key,
                            const std::string& value) {
  fail(Err::InvalidValue,
       "line " + std::to_string(line) + ": bad value '" + value + "' for " +
           key);
}

struct ValueParser {
  int line;
  const std::string& key;
  const std::string& value;

  int as_int() const {
    char* end = nullptr;
    long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') bad_value(line, key, value);
    return int(v);
  }
  u64 as_u64() const {
    char* end = nullptr;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') bad_value(line, key, value);
    return u64(v);
  }
  double as_double() const {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') bad_value(line, key, value);
    return v;
  }
  bool as_bool() const {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(line, key, value);
  }
};

void apply_dsp(Config& cfg, const ValueParser& p) {
  if (p.key == "win_length") cfg.frame_spec.win_length = p.as_int();
  else if (p.key == "hop_length") cfg.frame_spec.hop_length = p.as_int();
  else if (p.key == "fft_size") cfg.frame_spec.fft_size = p.as_int();
  else if (p.key == "window") {
    if (p.value == "hann") cfg.frame_spec.window = dsp::Window::hann;
    else if (p.value == "hamming") cfg.frame_spec.window = dsp::Window::hamming;
    else bad_value(p.line, p.key, p.value);
  } else if (p.key == "n_mels") cfg.n_mels = p.as_int();
  else if (p.key == "fmin") cfg.fmin = p.as_double();
  else if (p.key == "fmax") cfg.fmax = p.as_double();
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [dsp] key " + p.key);
}

void apply_augment(Config& cfg, const ValueParser& p) {
  AugmentConfig& a = cfg.augment;
  if (p.key == "enabled") cfg.augment_enabled = p.as_bool();
  else if (p.key == "snr_min") a.snr_min_db = p.as_double();
  else if (p.key == "snr_max") a.snr_max_db = p.as_double();
  else if (p.key == "freq_drop_count_min") a.freq_drop_count_min = p.as_int();
  else if (p.key == "freq_drop_count_max") a.freq_drop_count_max = p.as_int();
  else if (p.key == "freq_drop_width") a.freq_drop_width = p.as_double();
  else if (p.key == "chunk_length_min") a.chunk_length_min = p.as_int();
  else if (p.key == "chunk_length_max") a.chunk_length_max = p.as_int();
  else if (p.key == "chunk_count_min") a.chunk_count_min = p.as_int();
  else if (p.key == "chunk_count_max") a.chunk_count_max = p.as_int();
  else if (p.key == "noise_enabled") a.noise_enabled = p.as_bool();
  else if (p.key == "rir_enabled") a.rir_enabled = p.as_bool();
  else if (p.key == "drop_freq_enabled") a.drop_freq_enabled = p.as_bool();
  else if (p.key == "drop_chunk_enabled") a.drop_chunk_enabled = p.as_bool();
  else if (p.key == "noise_prob") a.noise_prob = p.as_double();
  else if (p.key == "rir_prob") a.rir_prob = p.as_double();
  else if (p.key == "drop_freq_prob") a.drop_freq_prob = p.as_double();
  else if (p.key == "drop_chunk_prob") a.drop_chunk_prob = p.as_double();
  else if (p.key == "noise_dir") cfg.noise_dir = p.value;
  else if (p.key == "rir_dir") cfg.rir_dir = p.value;
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [augment] key " + p.key);
}

void apply_saa(Config& cfg, const ValueParser& p) {
  if (p.key == "backend") {
    if (p.value == "griffin_lim") {
      cfg.backend.kind = VocoderBackend::Kind::griffin_lim;
    } else if (p.value.rfind("external:", 0) == 0) {
      cfg.backend.kind = VocoderBackend::Kind::external;
      cfg.backend.command = p.value.substr(9);
    } else if (p.value == "external") {
      cfg.backend.kind = VocoderBackend::Kind::external;
    } else {
      bad_value(p.line, p.key, p.value);
    }
  } else if (p.key == "iterations") cfg.backend.iterations = p.as_int();
  else if (p.key == "denoise_strength") cfg.denoise_strength = p.as_double();
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [saa] key " + p.key);
}

void apply_model(Config& cfg, const ValueParser& p) {
  ModelConfig& m = cfg.model;
  if (p.key == "backbone_channels") m.backbone_channels = p.as_int();
  else if (p.key == "attention_dim") m.attention_dim = p.as_int();
  else if (p.key == "embed_dim") m.embed_dim = p.as_int();
  else if (p.key == "fta_channels") m.fta_channels = p.as_int();
  else if (p.key == "fta_kernel") m.fta_kernel = p.as_int();
  else if (p.key == "head") {
    if (p.value == "softmax_ce") m.head = HeadKind::softmax_ce;
    else if (p.value == "aam") m.head = HeadKind::aam;
    else bad_value(p.line, p.key, p.value);
  } else if (p.key == "aam_margin") m.aam_margin = p.as_double();
  else if (p.key == "aam_scale") m.aam_scale = p.as_double();
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [model] key " + p.key);
}

void apply_train(Config& cfg, const ValueParser& p) {
  if (p.key == "epochs") cfg.epochs = p.as_int();
  else if (p.key == "batch_size") cfg.batch_size = p.as_int();
  else if (p.key == "lr") cfg.lr = p.as_double();
  else if (p.key == "crop_frames") cfg.crop_frames = p.as_int();
  else if (p.key == "seed") cfg.seed = p.as_u64();
  else if (p.key == "adapter") {
    if (p.value == "none") cfg.adapter = AdapterKind::none;
    else if (p.value == "ra") cfg.adapter = AdapterKind::ra;
    else if (p.value == "fta") cfg.adapter = AdapterKind::fta;
    else bad_value(p.line, p.key, p.value);
  } else if (p.key == "finetune_scope") {
    if (p.value == "joint") cfg.scope = Scope::joint;
    else if (p.value == "adapter_only") cfg.scope = Scope::adapter_only;
    else bad_value(p.line, p.key, p.value);
  } else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                   ": unknown [train] key " + p.key);
}

void apply_trials(Config& cfg, const ValueParser& p) {
  if (p.key == "n_pos") cfg.n_pos = size_t(p.as_int());
  else if (p.key == "n_neg") cfg.n_neg = size_t(p.as_int());
  else if (p.key == "negatives_anchor") {
    if (p.value == "test") cfg.negatives_from_enroll_grade = false;
    else if (p.value == "enroll") cfg.negatives_from_enroll_grade = true;
    else bad_value(p.line, p.key, p.value);
  } else if (p.key == "min_segment_s") cfg.min_segment_s = p.as_double();
  else if (p.key == "vad") cfg.vad_filter = p.as_bool();
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [trials] key " + p.key);
}

void apply_corpus(Config& cfg, const ValueParser& p) {
  CorpusParams& c = cfg.corpus;
  if (p.key == "n_speakers") c.n_speakers = p.as_int();
  else if (p.key == "grades") c.grades = p.as_int();
  else if (p.key == "utts_per_grade") c.utts_per_grade = p.as_int();
  else if (p.key == "duration_s") c.duration_s = p.as_double();
  else if (p.key == "train_speakers") c.train_speakers = p.as_int();
  else if (p.key == "seed") c.seed = p.as_u64();
  else fail(Err::UnknownKey, "line " + std::to_string(p.line) +
                                 ": unknown [corpus] key " + p.key);
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(Err::ParseError,
             "line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "dsp" && section != "augment" && section != "saa" &&
          section != "model" && section != "train" && section != "trials" &&
          section != "corpus")
        fail(Err::ParseError, "line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Err::ParseError,
           "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(Err::ParseError, "line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      fail(Err::ParseError, "line " + std::to_string(line_no) +
                                ": key outside of any section");
    ValueParser p{line_no, key, value};
    if (section == "dsp") apply_dsp(cfg, p);
    else if (section == "augment") apply_augment(cfg, p);
    else if (section == "saa") apply_saa(cfg, p);
    else if (section == "model") apply_model(cfg, p);
    else if (section == "train") apply_train(cfg, p);
    else if (section == "trials") apply_trials(cfg, p);
    else apply_corpus(cfg, p);
  }

  cfg.augment.frame_spec = cfg.frame_spec;
  cfg.model.n_mels = cfg.n_mels;
  try {
    cfg.frame_spec.validate();
    cfg.augment.validate();
    cfg.corpus.validate();
    cfg.train_config().validate();
    require(cfg.n_mels >= 1, Err::BadRange, "n_mels must be >= 1");
    require(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax, Err::BadRange,
            "need 0 <= fmin < fmax");
    require(cfg.backend.iterations >= 1, Err::BadRange,
            "iterations must be >= 1");
    require(cfg.denoise_strength >= 0.0, Err::BadRange,
            "denoise_strength must be >= 0");
    require(cfg.min_segment_s > 0.0, Err::BadRange,
            "min_segment_s must be positive");
  } catch (const Error& e) {
    fail(Err::InvalidValue, std::string("configuration invalid: ") + e.what());
  }
  return cfg;
}

Config parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Err::NotFound, path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

TrainConfig Config::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.crop_frames = crop_frames;
  t.lr = lr;
  t.seed = seed;
  t.adapter = adapter;
  t.scope = scope;
  t.augment_enabled = augment_enabled;
  t.augment = augment;
  t.augment.frame_spec = frame_spec;
  t.noise_dir = noise_dir;
  t.rir_dir = rir_dir;
  t.model = model;
  t.model.n_mels = n_mels;
  t.frame_spec = frame_spec;
  t.fmin = fmin;
  t.fmax = fmax;
  return t;
}

}  // namespace longsv
