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

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "longsv/audio.hpp"
#include "longsv/rng.hpp"

namespace longsv {

struct ManifestRecord {
  std::string speaker_id;
  int grade = 0;
  std::string utterance_id;
  std::string path;
  double duration_s = 0.0;
};

using CorpusManifest = std::vector<ManifestRecord>;

// Utterance key used in trial and score files: speaker_id/grade/utterance_id.
std::string utt_key(const ManifestRecord& rec);

CorpusManifest read_manifest(const std::string& path);
void write_manifest(const CorpusManifest& manifest, const std::string& path);

// Energy VAD: frame energies over 25 ms / 10 ms windows; a frame is speech
// when its energy exceeds 5% of the 95th-percentile energy. Gaps shorter
// than 0.3 s are merged, and only segments of at least min_dur_s survive.
struct Segment {
  size_t begin = 0, end = 0;  // sample range [begin, end)
};

std::vector<Segment> energy_vad_segments(const Waveform& wave,
                                         double min_dur_s = 2.0);

struct Trial {
  int label = 0;  // 1 target, 0 nontarget
  std::string enroll, test;
};

struct TrialList {
  std::string name;
  std::vector<Trial> trials;
  size_t target_shortfall = 0, nontarget_shortfall = 0;

  size_t n_target() const;
  size_t n_nontarget() const;
};

// Targets pair the same speaker across (enroll_grade, test_grade); nontargets
// pair different speakers inside one anchor year (the test grade by default).
// Pairs are sampled without replacement from the exhaustive pools; when a pool
// is smaller than requested, everything available is emitted and the shortfall
// recorded.
TrialList build_trials(const CorpusManifest& manifest, int enroll_grade,
                       int test_grade, size_t n_pos, size_t n_neg, Rng& rng,
                       bool negatives_from_enroll_grade = false);

void write_trials(const TrialList& list, const std::string& path);
TrialList read_trials(const std::string& path, const std::string& name = "");

using EmbeddingMap = std::map<std::string, std::vector<double>>;

void write_embeddings(const EmbeddingMap& embeddings, const std::string& path);
EmbeddingMap read_embeddings(const std::string& path);

double cosine_score(const std::vector<double>& e1, const std::vector<double>& e2);

struct ScoredTrial {
  std::string enroll, test;
  double score = 0.0;
  int label = 0;
};

std::vector<ScoredTrial> score_trials(const TrialList& list,
                                      const EmbeddingMap& embeddings);

void write_scores(const std::vector<ScoredTrial>& scores,
                  const std::string& path);
// Joins a score file with a trial list to recover labels.
std::vector<ScoredTrial> read_scores(const std::string& scores_path,
                                     const TrialList& list);

// EER in percent plus the interpolated threshold. FAR(t) is the fraction of
// nontargets scoring >= t, FRR(t) the fraction of targets scoring < t; the
// crossing is linearly interpolated between bracketing operating points.
std::pair<double, double> compute_eer(const std::vector<double>& scores,
                                      const std::vector<int>& labels);

double compute_min_dcf(const std::vector<double>& scores,
                       const std::vector<int>& labels, double p_target = 0.01,
                       double c_miss = 1.0, double c_fa = 1.0);

struct EvalResult {
  double eer = 0.0;  // percent
  double eer_threshold = 0.0;
  double min_dcf = 0.0;
  size_t n_target = 0, n_nontarget = 0;
};

EvalResult evaluate(const std::vector<ScoredTrial>& scored);

// Accumulated experiment results and the grid report built from them.
struct ResultRow {
  std::string system, set;
  double eer = 0.0, min_dcf = 0.0;
  size_t n_target = 0, n_nontarget = 0;
};

void append_result(const std::string& path, const ResultRow& row);
std::vector<ResultRow> read_results(const std::string& path);

// One row per system, one column per set, EER at 0.01 precision.
std::string report_csv(const std::vector<ResultRow>& rows);
std::string report_table(const std::vector<ResultRow>& rows);

}  // namespace longsv
