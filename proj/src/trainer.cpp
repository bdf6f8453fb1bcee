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

#include "longsv/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "longsv/common.hpp"
#include "longsv/optim.hpp"

namespace longsv {

void TrainConfig::validate() const {
  require(epochs >= 0, Err::BadRange, "epochs must be >= 0");
  require(batch_size >= 1, Err::BadRange, "batch_size must be >= 1");
  require(crop_frames >= 5, Err::BadRange, "crop_frames must be >= 5");
  require(lr > 0.0, Err::BadRange, "lr must be positive");
  if (augment_enabled) augment.validate();
}

const TensorBlob* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

double Checkpoint::meta(const std::string& name) const {
  const TensorBlob* t = find(name);
  require(t != nullptr && !t->data.empty(), Err::NotFound,
          "checkpoint lacks " + name);
  return t->data[0];
}

namespace {

void wr_u16(std::ofstream& f, uint16_t v) {
  uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

void wr_u32(std::ofstream& f, u32 v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16),
                  uint8_t(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void wr_f64(std::ofstream& f, const double* p, size_t n) {
  // Little-endian host assumed throughout the file formats.
  f.write(reinterpret_cast<const char*>(p), std::streamsize(n * 8));
}

uint16_t rd_u16(std::ifstream& f, const std::string& path) {
  uint8_t b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  if (!f) fail(Err::IoError, path + ": truncated");
  return uint16_t(b[0] | (b[1] << 8));
}

u32 rd_u32(std::ifstream& f, const std::string& path) {
  uint8_t b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) fail(Err::IoError, path + ": truncated");
  return u32(b[0]) | u32(b[1]) << 8 | u32(b[2]) << 16 | u32(b[3]) << 24;
}

void rd_f64(std::ifstream& f, double* p, size_t n, const std::string& path) {
  f.read(reinterpret_cast<char*>(p), std::streamsize(n * 8));
  if (!f) fail(Err::IoError, path + ": truncated");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Err::IoError, "cannot open " + path);
  f.write("CKPT", 4);
  wr_u32(f, 1);
  wr_u32(f, u32(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    wr_u16(f, uint16_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    uint8_t rank = uint8_t(t.shape.size());
    f.write(reinterpret_cast<char*>(&rank), 1);
    size_t expect = 1;
    for (int d : t.shape) {
      wr_u32(f, u32(d));
      expect *= size_t(d);
    }
    require(expect == t.data.size(), Err::DimMismatch,
            "tensor " + name + " shape/data disagree");
    wr_f64(f, t.data.data(), t.data.size());
  }
  wr_u32(f, ckpt.epoch);
  wr_u32(f, u32(ckpt.loss_history.size()));
  if (!ckpt.loss_history.empty())
    wr_f64(f, ckpt.loss_history.data(), ckpt.loss_history.size());
  if (!f) fail(Err::IoError, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Err::NotFound, path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "CKPT", 4) != 0)
    fail(Err::BadMagic, path + ": not a CKPT file");
  u32 version = rd_u32(f, path);
  if (version != 1)
    fail(Err::VersionMismatch,
         path + ": CKPT version " + std::to_string(version));
  Checkpoint ckpt;
  u32 count = rd_u32(f, path);
  ckpt.tensors.reserve(count);
  for (u32 i = 0; i < count; ++i) {
    uint16_t name_len = rd_u16(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) fail(Err::IoError, path + ": truncated");
    uint8_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 1);
    if (!f) fail(Err::IoError, path + ": truncated");
    TensorBlob t;
    size_t total = 1;
    for (int r = 0; r < rank; ++r) {
      u32 d = rd_u32(f, path);
      t.shape.push_back(int(d));
      total *= d;
    }
    t.data.resize(total);
    rd_f64(f, t.data.data(), total, path);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  ckpt.epoch = rd_u32(f, path);
  u32 losses = rd_u32(f, path);
  ckpt.loss_history.resize(losses);
  if (losses) rd_f64(f, ckpt.loss_history.data(), losses, path);
  return ckpt;
}

u64 speaker_set_hash(const std::vector<std::string>& sorted_ids) {
  std::string joined;
  for (const auto& id : sorted_ids) {
    joined += id;
    joined += '\n';
  }
  return fnv1a64(joined);
}

std::vector<std::string> manifest_speakers(const CorpusManifest& manifest) {
  std::set<std::string> ids;
  for (const auto& rec : manifest) ids.insert(rec.speaker_id);
  return {ids.begin(), ids.end()};
}

namespace {

void push_meta(Checkpoint& ckpt, const std::string& name,
               std::vector<double> vals) {
  TensorBlob t;
  t.shape = {int(vals.size())};
  t.data = std::move(vals);
  ckpt.tensors.emplace_back(name, std::move(t));
}

std::vector<double> split_u64(u64 v) {
  return {double(u32(v & 0xFFFFFFFFULL)), double(u32(v >> 32))};
}

u64 join_u64(double lo, double hi) {
  return u64(u32(lo)) | (u64(u32(hi)) << 32);
}

}  // namespace

Checkpoint checkpoint_from_model(const SpeakerModel& model,
                                 const TrainConfig& cfg, u32 epoch,
                                 const std::vector<double>& loss_history,
                                 const std::vector<std::string>& speakers) {
  Checkpoint ckpt;
  for (const auto& [name, var] : model.named_params()) {
    TensorBlob t;
    t.shape = var->shape;
    t.data = var->value;
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  const ModelConfig& mc = model.cfg;
  push_meta(ckpt, "meta.n_mels", {double(mc.n_mels)});
  push_meta(ckpt, "meta.backbone_channels", {double(mc.backbone_channels)});
  push_meta(ckpt, "meta.attention_dim", {double(mc.attention_dim)});
  push_meta(ckpt, "meta.embed_dim", {double(mc.embed_dim)});
  push_meta(ckpt, "meta.fta_channels", {double(mc.fta_channels)});
  push_meta(ckpt, "meta.fta_kernel", {double(mc.fta_kernel)});
  push_meta(ckpt, "meta.adapter", {double(int(model.adapter))});
  push_meta(ckpt, "meta.head_kind", {double(int(mc.head))});
  push_meta(ckpt, "meta.aam_margin", {mc.aam_margin});
  push_meta(ckpt, "meta.aam_scale", {mc.aam_scale});
  push_meta(ckpt, "meta.n_speakers",
            {double(model.head ? model.head->n_speakers : 0)});
  push_meta(ckpt, "meta.speaker_hash", split_u64(speaker_set_hash(speakers)));
  push_meta(ckpt, "meta.cfg.epochs", {double(cfg.epochs)});
  push_meta(ckpt, "meta.cfg.batch_size", {double(cfg.batch_size)});
  push_meta(ckpt, "meta.cfg.crop_frames", {double(cfg.crop_frames)});
  push_meta(ckpt, "meta.cfg.lr", {cfg.lr});
  push_meta(ckpt, "meta.cfg.seed", split_u64(cfg.seed));
  push_meta(ckpt, "meta.cfg.scope", {double(int(cfg.scope))});
  push_meta(ckpt, "meta.cfg.augment_enabled", {double(cfg.augment_enabled)});
  push_meta(ckpt, "meta.cfg.win_length", {double(cfg.frame_spec.win_length)});
  push_meta(ckpt, "meta.cfg.hop_length", {double(cfg.frame_spec.hop_length)});
  push_meta(ckpt, "meta.cfg.fft_size", {double(cfg.frame_spec.fft_size)});
  push_meta(ckpt, "meta.cfg.window", {double(int(cfg.frame_spec.window))});
  push_meta(ckpt, "meta.cfg.fmin", {cfg.fmin});
  push_meta(ckpt, "meta.cfg.fmax", {cfg.fmax});
  ckpt.epoch = epoch;
  ckpt.loss_history = loss_history;
  return ckpt;
}

SpeakerModel model_from_checkpoint(const Checkpoint& ckpt) {
  ModelConfig mc;
  mc.n_mels = int(ckpt.meta("meta.n_mels"));
  mc.backbone_channels = int(ckpt.meta("meta.backbone_channels"));
  mc.attention_dim = int(ckpt.meta("meta.attention_dim"));
  mc.embed_dim = int(ckpt.meta("meta.embed_dim"));
  mc.fta_channels = int(ckpt.meta("meta.fta_channels"));
  mc.fta_kernel = int(ckpt.meta("meta.fta_kernel"));
  mc.head = HeadKind(int(ckpt.meta("meta.head_kind")));
  mc.aam_margin = ckpt.meta("meta.aam_margin");
  mc.aam_scale = ckpt.meta("meta.aam_scale");
  AdapterKind adapter = AdapterKind(int(ckpt.meta("meta.adapter")));
  int n_speakers = int(ckpt.meta("meta.n_speakers"));

  SpeakerModel model = make_model(mc, adapter, n_speakers, 0);
  for (auto& [name, var] : model.named_params()) {
    const TensorBlob* t = ckpt.find(name);
    require(t != nullptr, Err::NotFound, "checkpoint lacks tensor " + name);
    require(t->shape == var->shape, Err::DimMismatch,
            "checkpoint tensor " + name + " has a different shape");
    var->value = t->data;
  }
  return model;
}

namespace {

Var features_to_var(const dsp::FeatureMatrix& feats) {
  return constant({int(feats.frames), feats.n_mels}, feats.data);
}

// Random crop to crop_frames rows; shorter inputs are wrap-tiled. The crop
// offset draw happens after any augmentation draws on the same stream.
dsp::FeatureMatrix crop_features(const dsp::FeatureMatrix& feats,
                                 int crop_frames, Rng& rng) {
  int t_in = int(feats.frames);
  dsp::FeatureMatrix out;
  out.n_mels = feats.n_mels;
  out.spec = feats.spec;
  out.frames = size_t(crop_frames);
  out.data.resize(size_t(crop_frames) * size_t(feats.n_mels));
  int start = 0;
  if (t_in > crop_frames)
    start = int(rng.uniform_int(0, t_in - crop_frames));
  for (int t = 0; t < crop_frames; ++t) {
    int src = t_in > crop_frames ? start + t : t % t_in;
    std::memcpy(out.data.data() + size_t(t) * size_t(feats.n_mels),
                feats.row(size_t(src)),
                size_t(feats.n_mels) * sizeof(double));
  }
  return out;
}

struct TrainData {
  std::vector<Waveform> waves;
  std::vector<int> labels;
  std::vector<std::string> keys;
  std::vector<Waveform> noise_pool, rir_pool;
};

TrainData load_train_data(const CorpusManifest& manifest,
                          const TrainConfig& cfg,
                          const std::map<std::string, int>& label_of) {
  TrainData data;
  data.waves.reserve(manifest.size());
  data.labels.reserve(manifest.size());
  for (const auto& rec : manifest) {
    data.waves.push_back(read_wav(rec.path));
    data.labels.push_back(label_of.at(rec.speaker_id));
    data.keys.push_back(utt_key(rec));
  }
  if (cfg.augment_enabled) {
    if (cfg.augment.noise_enabled && !cfg.noise_dir.empty())
      data.noise_pool = load_pool(cfg.noise_dir);
    if (cfg.augment.rir_enabled && !cfg.rir_dir.empty())
      data.rir_pool = load_pool(cfg.rir_dir);
  }
  return data;
}

std::vector<double> run_training(SpeakerModel& model,
                                 const std::vector<Var>& params,
                                 const TrainData& data, const TrainConfig& cfg,
                                 const MelMatrix& mel,
                                 const EpochCallback& on_epoch) {
  Adam adam(params, cfg.lr);
  const size_t n = data.waves.size();
  std::vector<double> history;
  history.reserve(size_t(cfg.epochs));
  const u64 train_seed = derive_seed(cfg.seed, "epoch");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const u64 epoch_seed = derive_seed(train_seed, u64(epoch));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(epoch_seed, "shuffle"));
    for (size_t i = 0; i + 1 < n; ++i) {
      size_t j = size_t(shuffle_rng.uniform_int(int64_t(i), int64_t(n - 1)));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    for (size_t batch_start = 0; batch_start < n;
         batch_start += size_t(cfg.batch_size)) {
      size_t batch_end = std::min(n, batch_start + size_t(cfg.batch_size));
      Var total;
      for (size_t bi = batch_start; bi < batch_end; ++bi) {
        size_t idx = order[bi];
        Rng rng(derive_seed(epoch_seed, data.keys[idx]));
        Waveform wave = data.waves[idx];
        if (cfg.augment_enabled && cfg.augment.any_enabled())
          wave = augment_pipeline(wave, cfg.augment, data.noise_pool,
                                  data.rir_pool, rng);
        dsp::FeatureMatrix feats = log_mel_fbank(wave, cfg.frame_spec, mel);
        feats = crop_features(feats, cfg.crop_frames, rng);
        Var sample_loss = model.loss(features_to_var(feats), data.labels[idx]);
        total = total ? add(total, sample_loss) : sample_loss;
      }
      double batch_n = double(batch_end - batch_start);
      Var batch_loss = mul_scalar(total, 1.0 / batch_n);
      backward(batch_loss);
      adam.step();
      loss_sum += batch_loss->value[0] * batch_n;
    }
    double mean_loss = loss_sum / double(n);
    history.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return history;
}

std::map<std::string, int> label_map(const std::vector<std::string>& speakers) {
  std::map<std::string, int> m;
  for (size_t i = 0; i < speakers.size(); ++i) m[speakers[i]] = int(i);
  return m;
}

}  // namespace

TrainResult train(const CorpusManifest& manifest, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  require(!manifest.empty(), Err::EmptyManifest, "no utterances to train on");
  std::vector<std::string> speakers = manifest_speakers(manifest);
  require(speakers.size() >= 2, Err::TooFewSpeakers,
          "training needs >= 2 speakers, got " +
              std::to_string(speakers.size()));

  TrainResult result;
  result.speakers = speakers;
  result.model =
      make_model(cfg.model, cfg.adapter, int(speakers.size()), cfg.seed);
  std::vector<Var> params =
      result.model.trainable_params(cfg.scope == Scope::adapter_only);

  TrainData data = load_train_data(manifest, cfg, label_map(speakers));
  MelMatrix mel = mel_filterbank_matrix(cfg.model.n_mels,
                                        cfg.frame_spec.fft_size,
                                        data.waves.front().sample_rate,
                                        cfg.fmin, cfg.fmax);
  result.loss_history =
      run_training(result.model, params, data, cfg, mel, on_epoch);
  return result;
}

TrainResult finetune(const Checkpoint& base, const CorpusManifest& manifest,
                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require(!manifest.empty(), Err::EmptyManifest, "no utterances to train on");
  std::vector<std::string> speakers = manifest_speakers(manifest);
  require(speakers.size() >= 2, Err::TooFewSpeakers,
          "fine-tuning needs >= 2 speakers, got " +
              std::to_string(speakers.size()));

  SpeakerModel model = model_from_checkpoint(base);
  require(model.cfg.n_mels == cfg.model.n_mels &&
              model.cfg.backbone_channels == cfg.model.backbone_channels &&
              model.cfg.attention_dim == cfg.model.attention_dim &&
              model.cfg.embed_dim == cfg.model.embed_dim,
          Err::DimMismatch, "checkpoint architecture differs from config");

  // Attach the requested adapter when the base has none; a mismatch between
  // an existing adapter and the request cannot be reconciled.
  if (cfg.adapter != model.adapter) {
    require(model.adapter == AdapterKind::none, Err::DimMismatch,
            "checkpoint already carries a different adapter");
    Rng rng(derive_seed(cfg.seed, "adapter-init"));
    if (cfg.adapter == AdapterKind::fta) {
      model.fta = FtaParams::init(model.cfg.n_mels, model.cfg.fta_channels,
                                  model.cfg.fta_kernel, rng);
    } else if (cfg.adapter == AdapterKind::ra) {
      model.ra = RaParams::init(model.cfg.n_mels, rng);
    }
    model.adapter = cfg.adapter;
  }

  // The classification head transfers only when the speaker inventory is
  // exactly the one it was trained on.
  u64 hash = speaker_set_hash(speakers);
  bool head_matches =
      model.head && model.head->n_speakers == int(speakers.size()) &&
      base.find("meta.speaker_hash") != nullptr &&
      join_u64(base.find("meta.speaker_hash")->data[0],
               base.find("meta.speaker_hash")->data[1]) == hash;
  if (!head_matches) {
    Rng rng(derive_seed(cfg.seed, "head-init"));
    model.head =
        HeadParams::init(model.cfg.embed_dim, int(speakers.size()),
                         model.cfg.head, rng, model.cfg.aam_margin,
                         model.cfg.aam_scale);
  }

  std::vector<Var> params =
      model.trainable_params(cfg.scope == Scope::adapter_only);

  TrainData data = load_train_data(manifest, cfg, label_map(speakers));
  MelMatrix mel = mel_filterbank_matrix(cfg.model.n_mels,
                                        cfg.frame_spec.fft_size,
                                        data.waves.front().sample_rate,
                                        cfg.fmin, cfg.fmax);
  TrainResult result;
  result.speakers = speakers;
  result.loss_history = run_training(model, params, data, cfg, mel, on_epoch);
  result.model = std::move(model);
  return result;
}

EmbeddingMap embed_utterances(const CorpusManifest& manifest,
                              const SpeakerModel& model, const FrameSpec& spec,
                              const MelMatrix& mel, int jobs) {
  std::vector<std::vector<double>> embs(manifest.size());
  parallel_for(manifest.size(), jobs, [&](size_t i) {
    Waveform wave = read_wav(manifest[i].path);
    dsp::FeatureMatrix feats = log_mel_fbank(wave, spec, mel);
    Var emb = model.embed(features_to_var(feats));
    embs[i] = emb->value;
  });
  EmbeddingMap out;
  for (size_t i = 0; i < manifest.size(); ++i)
    out[utt_key(manifest[i])] = std::move(embs[i]);
  return out;
}

}  // namespace longsv
