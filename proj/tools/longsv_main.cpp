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

#include <clocale>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "longsv/config.hpp"
#include "longsv/selfcheck.hpp"

using namespace longsv;

namespace {

struct GlobalOpts {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
};

Config load_config(const GlobalOpts& g) {
  Config cfg;
  if (!g.config_path.empty()) cfg = parse_config_file(g.config_path);
  cfg.augment.frame_spec = cfg.frame_spec;
  cfg.model.n_mels = cfg.n_mels;
  if (g.seed_given) {
    cfg.seed = g.seed;
    cfg.corpus.seed = g.seed;
  }
  return cfg;
}

VocoderBackend parse_backend(const std::string& value, int iterations) {
  VocoderBackend b;
  b.iterations = iterations;
  if (value == "griffin_lim") {
    b.kind = VocoderBackend::Kind::griffin_lim;
  } else if (value.rfind("external:", 0) == 0) {
    b.kind = VocoderBackend::Kind::external;
    b.command = value.substr(9);
  } else {
    fail(Err::InvalidValue, "backend must be griffin_lim or external:<cmd>");
  }
  return b;
}

FrameSpec frame_spec_from_checkpoint(const Checkpoint& ckpt) {
  FrameSpec spec;
  spec.win_length = int(ckpt.meta("meta.cfg.win_length"));
  spec.hop_length = int(ckpt.meta("meta.cfg.hop_length"));
  spec.fft_size = int(ckpt.meta("meta.cfg.fft_size"));
  spec.window = dsp::Window(int(ckpt.meta("meta.cfg.window")));
  return spec;
}

CorpusManifest vad_filtered(const CorpusManifest& manifest, double min_s) {
  CorpusManifest kept;
  for (const auto& rec : manifest)
    if (!energy_vad_segments(read_wav(rec.path), min_s).empty())
      kept.push_back(rec);
  return kept;
}

std::string fbank_name(const ManifestRecord& rec) {
  std::string name = rec.speaker_id + "_g" + std::to_string(rec.grade) + "_" +
                     rec.utterance_id + ".fbnk";
  std::replace(name.begin(), name.end(), '/', '_');
  return name;
}

void print_epoch(int epoch, double loss) {
  std::printf("epoch %d loss %.6f\n", epoch + 1, loss);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"Longitudinal speaker verification experiments"};
  app.require_subcommand(1);
  int exit_code = 0;

  GlobalOpts g;
  app.add_option("--config", g.config_path, "INI configuration file")
      ->check(CLI::ExistingFile);
  auto* seed_opt =
      app.add_option("--seed", g.seed, "override every configured seed");
  seed_opt->each([&g](const std::string&) { g.seed_given = true; });
  app.add_option("--jobs", g.jobs, "worker threads for per-file stages");

  // gen-corpus
  auto* cmd_gen = app.add_subcommand(
      "gen-corpus", "synthesize a longitudinal corpus with manifests");
  std::string gen_out;
  cmd_gen->add_option("--out", gen_out, "output directory")->required();
  cmd_gen->callback([&] {
    Config cfg = load_config(g);
    GeneratedCorpus corpus = gen_corpus(gen_out, cfg.corpus);
    std::printf("wrote %zu utterances (%d speakers x %d grades x %d takes)\n",
                corpus.all.size(), cfg.corpus.n_speakers, cfg.corpus.grades,
                cfg.corpus.utts_per_grade);
  });

  // fbank
  auto* cmd_fbank =
      app.add_subcommand("fbank", "extract log-mel features for a manifest");
  std::string fb_manifest, fb_out;
  cmd_fbank->add_option("--manifest", fb_manifest, "corpus manifest")
      ->required();
  cmd_fbank->add_option("--out", fb_out, "output directory")->required();
  cmd_fbank->callback([&] {
    Config cfg = load_config(g);
    CorpusManifest manifest = read_manifest(fb_manifest);
    std::filesystem::create_directories(fb_out);
    int sr = read_wav(manifest.front().path).sample_rate;
    MelMatrix mel = mel_filterbank_matrix(cfg.n_mels, cfg.frame_spec.fft_size,
                                          sr, cfg.fmin, cfg.fmax);
    parallel_for(manifest.size(), g.jobs, [&](size_t i) {
      Waveform wave = read_wav(manifest[i].path);
      write_fbank(fb_out + "/" + fbank_name(manifest[i]),
                  log_mel_fbank(wave, cfg.frame_spec, mel));
    });
    std::printf("wrote %zu feature files\n", manifest.size());
  });

  // augment
  auto* cmd_aug =
      app.add_subcommand("augment", "run the augmentation pipeline on a WAV");
  std::string aug_in, aug_out, aug_noise_dir, aug_rir_dir;
  cmd_aug->add_option("--in", aug_in, "input WAV")->required();
  cmd_aug->add_option("--out", aug_out, "output WAV")->required();
  cmd_aug->add_option("--noise-dir", aug_noise_dir, "noise pool directory");
  cmd_aug->add_option("--rir-dir", aug_rir_dir, "impulse response directory");
  cmd_aug->callback([&] {
    Config cfg = load_config(g);
    if (!aug_noise_dir.empty()) cfg.noise_dir = aug_noise_dir;
    if (!aug_rir_dir.empty()) cfg.rir_dir = aug_rir_dir;
    std::vector<Waveform> noise_pool, rir_pool;
    if (cfg.augment.noise_enabled && !cfg.noise_dir.empty())
      noise_pool = load_pool(cfg.noise_dir);
    if (cfg.augment.rir_enabled && !cfg.rir_dir.empty())
      rir_pool = load_pool(cfg.rir_dir);
    Rng rng(derive_seed(cfg.seed, "augment-cli"));
    Waveform wave = read_wav(aug_in);
    write_wav(aug_out, augment_pipeline(wave, cfg.augment, noise_pool,
                                        rir_pool, rng));
  });

  // saa
  auto* cmd_saa = app.add_subcommand(
      "saa", "double a corpus with resynthesized copies of every utterance");
  std::string saa_manifest, saa_out_dir, saa_out_manifest, saa_backend;
  cmd_saa->add_option("--manifest", saa_manifest, "corpus manifest")
      ->required();
  cmd_saa->add_option("--out-dir", saa_out_dir, "directory for synthetic WAVs")
      ->required();
  cmd_saa
      ->add_option("--out-manifest", saa_out_manifest,
                   "path for the doubled manifest")
      ->required();
  cmd_saa->add_option("--backend", saa_backend,
                      "griffin_lim or external:<command>");
  cmd_saa->callback([&] {
    Config cfg = load_config(g);
    VocoderBackend backend = saa_backend.empty()
                                 ? cfg.backend
                                 : parse_backend(saa_backend,
                                                 cfg.backend.iterations);
    CorpusManifest manifest = read_manifest(saa_manifest);
    std::filesystem::create_directories(saa_out_dir);
    int sr = read_wav(manifest.front().path).sample_rate;
    MelMatrix mel = mel_filterbank_matrix(cfg.n_mels, cfg.frame_spec.fft_size,
                                          sr, cfg.fmin, cfg.fmax);
    DenoiseConfig dn;
    dn.strength = cfg.denoise_strength;
    CorpusManifest doubled = saa_corpus(manifest, backend, dn, cfg.frame_spec,
                                        mel, saa_out_dir, g.jobs);
    write_manifest(doubled, saa_out_manifest);
    std::printf("wrote %zu synthetic utterances\n",
                doubled.size() - manifest.size());
  });

  // train
  auto* cmd_train =
      app.add_subcommand("train", "train a speaker embedding model");
  std::string tr_manifest, tr_out;
  cmd_train->add_option("--manifest", tr_manifest, "training manifest")
      ->required();
  cmd_train->add_option("--out", tr_out, "checkpoint path")->required();
  cmd_train->callback([&] {
    Config cfg = load_config(g);
    TrainConfig tc = cfg.train_config();
    TrainResult result = train(read_manifest(tr_manifest), tc, print_epoch);
    save_checkpoint(checkpoint_from_model(result.model, tc, u32(tc.epochs),
                                          result.loss_history,
                                          result.speakers),
                    tr_out);
    std::printf("saved %s\n", tr_out.c_str());
  });

  // finetune
  auto* cmd_ft = app.add_subcommand(
      "finetune", "continue training a checkpoint on another manifest");
  std::string ft_base, ft_manifest, ft_out, ft_adapter, ft_scope;
  int ft_epochs = -1;
  cmd_ft->add_option("--base", ft_base, "starting checkpoint")->required();
  cmd_ft->add_option("--manifest", ft_manifest, "fine-tuning manifest")
      ->required();
  cmd_ft->add_option("--out", ft_out, "checkpoint path")->required();
  cmd_ft->add_option("--adapter", ft_adapter, "none, ra or fta")
      ->check(CLI::IsMember({"none", "ra", "fta"}));
  cmd_ft->add_option("--scope", ft_scope, "joint or adapter_only")
      ->check(CLI::IsMember({"joint", "adapter_only"}));
  cmd_ft->add_option("--epochs", ft_epochs, "override configured epochs");
  cmd_ft->callback([&] {
    Config cfg = load_config(g);
    TrainConfig tc = cfg.train_config();
    if (ft_adapter == "none") tc.adapter = AdapterKind::none;
    else if (ft_adapter == "ra") tc.adapter = AdapterKind::ra;
    else if (ft_adapter == "fta") tc.adapter = AdapterKind::fta;
    if (ft_scope == "joint") tc.scope = Scope::joint;
    else if (ft_scope == "adapter_only") tc.scope = Scope::adapter_only;
    if (ft_epochs >= 0) tc.epochs = ft_epochs;
    Checkpoint base = load_checkpoint(ft_base);
    TrainResult result =
        finetune(base, read_manifest(ft_manifest), tc, print_epoch);
    save_checkpoint(checkpoint_from_model(result.model, tc, u32(tc.epochs),
                                          result.loss_history,
                                          result.speakers),
                    ft_out);
    std::printf("saved %s\n", ft_out.c_str());
  });

  // embed
  auto* cmd_embed = app.add_subcommand(
      "embed", "compute embeddings for every utterance in a manifest");
  std::string em_ckpt, em_manifest, em_out;
  cmd_embed->add_option("--checkpoint", em_ckpt, "model checkpoint")
      ->required();
  cmd_embed->add_option("--manifest", em_manifest, "corpus manifest")
      ->required();
  cmd_embed->add_option("--out", em_out, "embedding file path")->required();
  cmd_embed->callback([&] {
    Checkpoint ckpt = load_checkpoint(em_ckpt);
    SpeakerModel model = model_from_checkpoint(ckpt);
    FrameSpec spec = frame_spec_from_checkpoint(ckpt);
    CorpusManifest manifest = read_manifest(em_manifest);
    int sr = read_wav(manifest.front().path).sample_rate;
    MelMatrix mel = mel_filterbank_matrix(model.cfg.n_mels, spec.fft_size, sr,
                                          ckpt.meta("meta.cfg.fmin"),
                                          ckpt.meta("meta.cfg.fmax"));
    write_embeddings(embed_utterances(manifest, model, spec, mel, g.jobs),
                     em_out);
    std::printf("wrote %zu embeddings\n", manifest.size());
  });

  // trials
  auto* cmd_trials = app.add_subcommand(
      "trials", "build a longitudinal trial list from a manifest");
  std::string tl_manifest, tl_out, tl_anchor;
  int tl_enroll = 0, tl_test = 0;
  int tl_pos = -1, tl_neg = -1;
  bool tl_vad = false;
  cmd_trials->add_option("--manifest", tl_manifest, "corpus manifest")
      ->required();
  cmd_trials->add_option("--enroll-grade", tl_enroll, "enrollment grade")
      ->required();
  cmd_trials->add_option("--test-grade", tl_test, "test grade")->required();
  cmd_trials->add_option("--out", tl_out, "trial list path")->required();
  cmd_trials->add_option("--n-pos", tl_pos, "target trial count");
  cmd_trials->add_option("--n-neg", tl_neg, "nontarget trial count");
  cmd_trials->add_option("--negatives-anchor", tl_anchor,
                         "year the nontarget pairs come from")
      ->check(CLI::IsMember({"test", "enroll"}));
  cmd_trials->add_flag("--vad", tl_vad,
                       "drop utterances without enough detected speech");
  cmd_trials->callback([&] {
    Config cfg = load_config(g);
    CorpusManifest manifest = read_manifest(tl_manifest);
    if (tl_vad || cfg.vad_filter)
      manifest = vad_filtered(manifest, cfg.min_segment_s);
    size_t n_pos = tl_pos >= 0 ? size_t(tl_pos) : cfg.n_pos;
    size_t n_neg = tl_neg >= 0 ? size_t(tl_neg) : cfg.n_neg;
    bool from_enroll = cfg.negatives_from_enroll_grade;
    if (tl_anchor == "enroll") from_enroll = true;
    else if (tl_anchor == "test") from_enroll = false;
    Rng rng(derive_seed(cfg.seed, "trials-G" + std::to_string(tl_enroll) +
                                      "-G" + std::to_string(tl_test)));
    TrialList list = build_trials(manifest, tl_enroll, tl_test, n_pos, n_neg,
                                  rng, from_enroll);
    write_trials(list, tl_out);
    std::printf("%s: %zu targets, %zu nontargets\n", list.name.c_str(),
                list.n_target(), list.n_nontarget());
    if (list.target_shortfall || list.nontarget_shortfall)
      std::fprintf(stderr, "warning: pool exhausted, short %zu targets, %zu nontargets\n",
                   list.target_shortfall, list.nontarget_shortfall);
  });

  // score
  auto* cmd_score =
      app.add_subcommand("score", "cosine-score a trial list");
  std::string sc_emb, sc_trials, sc_out;
  cmd_score->add_option("--embeddings", sc_emb, "embedding file")->required();
  cmd_score->add_option("--trials", sc_trials, "trial list")->required();
  cmd_score->add_option("--out", sc_out, "score file path")->required();
  cmd_score->callback([&] {
    EmbeddingMap embeddings = read_embeddings(sc_emb);
    TrialList list = read_trials(sc_trials);
    write_scores(score_trials(list, embeddings), sc_out);
    std::printf("scored %zu trials\n", list.trials.size());
  });

  // eval
  auto* cmd_eval =
      app.add_subcommand("eval", "EER and minDCF for a score file");
  std::string ev_scores, ev_trials, ev_system, ev_set, ev_append;
  cmd_eval->add_option("--scores", ev_scores, "score file")->required();
  cmd_eval->add_option("--trials", ev_trials, "trial list with labels")
      ->required();
  cmd_eval->add_option("--system", ev_system, "system name for --append");
  cmd_eval->add_option("--set", ev_set, "set name for --append");
  cmd_eval->add_option("--append", ev_append, "results CSV to append to");
  cmd_eval->callback([&] {
    TrialList list = read_trials(ev_trials);
    EvalResult res = evaluate(read_scores(ev_scores, list));
    std::printf("EER %.2f\n", res.eer);
    std::printf("minDCF %.4f\n", res.min_dcf);
    std::printf("threshold %.6f\n", res.eer_threshold);
    std::printf("targets %zu\nnontargets %zu\n", res.n_target,
                res.n_nontarget);
    if (!ev_append.empty()) {
      require(!ev_system.empty() && !ev_set.empty(), Err::InvalidValue,
              "--append needs --system and --set");
      append_result(ev_append, {ev_system, ev_set.empty() ? list.name : ev_set,
                                res.eer, res.min_dcf, res.n_target,
                                res.n_nontarget});
    }
  });

  // report
  auto* cmd_report = app.add_subcommand(
      "report", "grid of EERs per system and trial set");
  std::string rp_results, rp_format = "table";
  cmd_report->add_option("--results", rp_results, "results CSV")->required();
  cmd_report->add_option("--format", rp_format, "table or csv")
      ->check(CLI::IsMember({"table", "csv"}));
  cmd_report->callback([&] {
    std::vector<ResultRow> rows = read_results(rp_results);
    std::fputs((rp_format == "csv" ? report_csv(rows) : report_table(rows))
                   .c_str(),
               stdout);
  });

  // selftest
  auto* cmd_selftest =
      app.add_subcommand("selftest", "run the built-in diagnostics");
  cmd_selftest->callback([&] {
    for (const CheckResult& r : run_selftests()) {
      std::printf("%s %s (%s)\n", r.ok ? "PASS" : "FAIL", r.name.c_str(),
                  r.detail.c_str());
      if (!r.ok) exit_code = 1;
    }
  });

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
