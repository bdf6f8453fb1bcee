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

#include "longsv/trials.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "longsv/common.hpp"

namespace longsv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void write_u32(std::ostream& out, u32 v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

u32 read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), Err::IoError, "unexpected end of file");
  return static_cast<u32>(b[0]) | static_cast<u32>(b[1]) << 8 |
         static_cast<u32>(b[2]) << 16 | static_cast<u32>(b[3]) << 24;
}

}  // namespace

std::string utt_key(const ManifestRecord& rec) {
  return rec.speaker_id + "/" + std::to_string(rec.grade) + "/" +
         rec.utterance_id;
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), Err::NotFound, "cannot open manifest: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Err::EmptyManifest,
          "empty manifest: " + path);
  require(trim(line) == "speaker_id,grade,utterance_id,path,duration_s",
          Err::ParseError, "bad manifest header: " + path);
  CorpusManifest out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(trim(line));
    require(f.size() == 5, Err::ParseError,
            "manifest line " + std::to_string(lineno) + ": expected 5 fields");
    ManifestRecord rec;
    rec.speaker_id = f[0];
    try {
      rec.grade = std::stoi(f[1]);
      rec.duration_s = std::stod(f[4]);
    } catch (const std::exception&) {
      fail(Err::ParseError, "manifest line " + std::to_string(lineno) +
                                ": bad numeric field");
    }
    rec.utterance_id = f[2];
    rec.path = f[3];
    require(rec.duration_s >= 0.0, Err::ParseError,
            "manifest line " + std::to_string(lineno) + ": negative duration");
    out.push_back(std::move(rec));
  }
  require(!out.empty(), Err::EmptyManifest, "manifest has no records: " + path);
  return out;
}

void write_manifest(const CorpusManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), Err::IoError, "cannot write manifest: " + path);
  out << "speaker_id,grade,utterance_id,path,duration_s\n";
  char buf[64];
  for (const auto& rec : manifest) {
    std::snprintf(buf, sizeof buf, "%.6f", rec.duration_s);
    out << rec.speaker_id << "," << rec.grade << "," << rec.utterance_id << ","
        << rec.path << "," << buf << "\n";
  }
  require(out.good(), Err::IoError, "write failed: " + path);
}

std::vector<Segment> energy_vad_segments(const Waveform& wave,
                                         double min_dur_s) {
  require(!wave.samples.empty(), Err::TooShort, "empty waveform");
  int win = static_cast<int>(std::lround(0.025 * wave.sample_rate));
  int hop = static_cast<int>(std::lround(0.010 * wave.sample_rate));
  if (wave.size() < static_cast<size_t>(win)) return {};
  size_t frames = (wave.size() - win) / hop + 1;
  std::vector<double> energy(frames);
  for (size_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    const double* x = wave.samples.data() + t * hop;
    for (int i = 0; i < win; ++i) acc += x[i] * x[i];
    energy[t] = acc;
  }
  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  double p95 = sorted[static_cast<size_t>(
      std::llround(0.95 * static_cast<double>(frames - 1)))];
  double threshold = 0.05 * p95;

  std::vector<char> speech(frames);
  for (size_t t = 0; t < frames; ++t) speech[t] = energy[t] > threshold;

  // Merge pauses shorter than 0.3 s.
  int max_gap = static_cast<int>(std::lround(0.3 * wave.sample_rate / hop));
  std::vector<std::pair<size_t, size_t>> runs;  // frame spans [first, last]
  for (size_t t = 0; t < frames; ++t) {
    if (!speech[t]) continue;
    if (!runs.empty() &&
        t - runs.back().second <= static_cast<size_t>(max_gap)) {
      runs.back().second = t;
    } else {
      runs.emplace_back(t, t);
    }
  }
  std::vector<Segment> out;
  size_t min_len = static_cast<size_t>(std::lround(min_dur_s * wave.sample_rate));
  for (const auto& r : runs) {
    Segment seg;
    seg.begin = r.first * hop;
    seg.end = std::min(wave.size(), r.second * hop + win);
    if (seg.end - seg.begin >= min_len) out.push_back(seg);
  }
  return out;
}

size_t TrialList::n_target() const {
  size_t n = 0;
  for (const auto& t : trials) n += t.label == 1;
  return n;
}

size_t TrialList::n_nontarget() const { return trials.size() - n_target(); }

namespace {

// Partial Fisher-Yates: keeps the first k entries as the sample.
template <typename T>
void sample_prefix(std::vector<T>& pool, size_t k, Rng& rng) {
  for (size_t i = 0; i < k && i + 1 < pool.size(); ++i) {
    size_t j = rng.uniform_int(i, pool.size() - 1);
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

TrialList build_trials(const CorpusManifest& manifest, int enroll_grade,
                       int test_grade, size_t n_pos, size_t n_neg, Rng& rng,
                       bool negatives_from_enroll_grade) {
  std::set<std::string> test_speakers;
  for (const auto& rec : manifest)
    if (rec.grade == test_grade) test_speakers.insert(rec.speaker_id);
  require(test_speakers.size() >= 2, Err::InsufficientSpeakers,
          "fewer than 2 speakers in grade " + std::to_string(test_grade));

  // Ordered speaker list keeps the sampling deterministic for a given
  // manifest regardless of record order within speakers.
  std::set<std::string> speaker_set;
  for (const auto& rec : manifest) speaker_set.insert(rec.speaker_id);
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());

  std::map<std::string, std::vector<size_t>> enroll_by_spk, test_by_spk;
  for (size_t i = 0; i < manifest.size(); ++i) {
    if (manifest[i].grade == enroll_grade)
      enroll_by_spk[manifest[i].speaker_id].push_back(i);
    if (manifest[i].grade == test_grade)
      test_by_spk[manifest[i].speaker_id].push_back(i);
  }

  std::vector<std::pair<size_t, size_t>> target_pool;
  for (const auto& spk : speakers) {
    auto ei = enroll_by_spk.find(spk);
    auto ti = test_by_spk.find(spk);
    if (ei == enroll_by_spk.end() || ti == test_by_spk.end()) continue;
    for (size_t e : ei->second)
      for (size_t t : ti->second) {
        if (e == t) continue;  // intra-year: never pair an utterance with itself
        target_pool.emplace_back(e, t);
      }
  }

  int anchor = negatives_from_enroll_grade ? enroll_grade : test_grade;
  std::vector<size_t> anchor_utts;
  for (size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].grade == anchor) anchor_utts.push_back(i);
  std::vector<std::pair<size_t, size_t>> nontarget_pool;
  for (size_t e : anchor_utts)
    for (size_t t : anchor_utts)
      if (manifest[e].speaker_id != manifest[t].speaker_id)
        nontarget_pool.emplace_back(e, t);

  size_t take_pos = std::min(n_pos, target_pool.size());
  size_t take_neg = std::min(n_neg, nontarget_pool.size());
  sample_prefix(target_pool, take_pos, rng);
  sample_prefix(nontarget_pool, take_neg, rng);

  TrialList out;
  out.name = "G" + std::to_string(enroll_grade) + "-G" +
             std::to_string(test_grade);
  out.target_shortfall = n_pos - take_pos;
  out.nontarget_shortfall = n_neg - take_neg;
  out.trials.reserve(take_pos + take_neg);
  for (size_t i = 0; i < take_pos; ++i)
    out.trials.push_back({1, utt_key(manifest[target_pool[i].first]),
                          utt_key(manifest[target_pool[i].second])});
  for (size_t i = 0; i < take_neg; ++i)
    out.trials.push_back({0, utt_key(manifest[nontarget_pool[i].first]),
                          utt_key(manifest[nontarget_pool[i].second])});
  return out;
}

void write_trials(const TrialList& list, const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), Err::IoError, "cannot write trials: " + path);
  for (const auto& t : list.trials)
    out << t.label << " " << t.enroll << " " << t.test << "\n";
  require(out.good(), Err::IoError, "write failed: " + path);
}

TrialList read_trials(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  require(in.is_open(), Err::NotFound, "cannot open trials: " + path);
  TrialList out;
  out.name = name;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    Trial t;
    std::string label;
    ss >> label >> t.enroll >> t.test;
    require(!ss.fail() && (label == "0" || label == "1"), Err::ParseError,
            "trials line " + std::to_string(lineno) + ": expected '<0|1> "
            "<enroll> <test>'");
    t.label = label == "1" ? 1 : 0;
    out.trials.push_back(std::move(t));
  }
  return out;
}

void write_embeddings(const EmbeddingMap& embeddings, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.is_open(), Err::IoError, "cannot write embeddings: " + path);
  out.write("EMBD", 4);
  write_u32(out, 1);
  write_u32(out, static_cast<u32>(embeddings.size()));
  for (const auto& [key, vec] : embeddings) {
    require(key.size() <= 0xFFFF, Err::IoError, "embedding key too long");
    unsigned char len[2] = {static_cast<unsigned char>(key.size() & 0xFF),
                            static_cast<unsigned char>(key.size() >> 8)};
    out.write(reinterpret_cast<const char*>(len), 2);
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    write_u32(out, static_cast<u32>(vec.size()));
    out.write(reinterpret_cast<const char*>(vec.data()),
              static_cast<std::streamsize>(vec.size() * sizeof(double)));
  }
  require(out.good(), Err::IoError, "write failed: " + path);
}

EmbeddingMap read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), Err::NotFound, "cannot open embeddings: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "EMBD", 4) == 0, Err::BadMagic,
          "not an embeddings file: " + path);
  u32 version = read_u32(in);
  require(version == 1, Err::VersionMismatch,
          "embeddings version " + std::to_string(version));
  u32 count = read_u32(in);
  EmbeddingMap out;
  for (u32 i = 0; i < count; ++i) {
    unsigned char len[2];
    in.read(reinterpret_cast<char*>(len), 2);
    require(in.good(), Err::IoError, "truncated embeddings file");
    size_t klen = static_cast<size_t>(len[0]) | static_cast<size_t>(len[1]) << 8;
    std::string key(klen, '\0');
    in.read(key.data(), static_cast<std::streamsize>(klen));
    u32 dim = read_u32(in);
    std::vector<double> vec(dim);
    in.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    require(in.good(), Err::IoError, "truncated embeddings file");
    out.emplace(std::move(key), std::move(vec));
  }
  return out;
}

double cosine_score(const std::vector<double>& e1,
                    const std::vector<double>& e2) {
  require(e1.size() == e2.size(), Err::DimMismatch,
          "embedding dims differ: " + std::to_string(e1.size()) + " vs " +
              std::to_string(e2.size()));
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (size_t i = 0; i < e1.size(); ++i) {
    uu += e1[i] * e1[i];
    vv += e2[i] * e2[i];
    uv += e1[i] * e2[i];
  }
  require(uu > 0.0 && vv > 0.0, Err::ZeroVector, "cosine of zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

std::vector<ScoredTrial> score_trials(const TrialList& list,
                                      const EmbeddingMap& embeddings) {
  std::vector<ScoredTrial> out;
  out.reserve(list.trials.size());
  for (const auto& t : list.trials) {
    auto e = embeddings.find(t.enroll);
    require(e != embeddings.end(), Err::MissingEmbedding,
            "no embedding for " + t.enroll);
    auto s = embeddings.find(t.test);
    require(s != embeddings.end(), Err::MissingEmbedding,
            "no embedding for " + t.test);
    out.push_back({t.enroll, t.test, cosine_score(e->second, s->second),
                   t.label});
  }
  return out;
}

void write_scores(const std::vector<ScoredTrial>& scores,
                  const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), Err::IoError, "cannot write scores: " + path);
  char buf[32];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof buf, "%.6f", s.score);
    out << s.enroll << " " << s.test << " " << buf << "\n";
  }
  require(out.good(), Err::IoError, "write failed: " + path);
}

std::vector<ScoredTrial> read_scores(const std::string& scores_path,
                                     const TrialList& list) {
  std::ifstream in(scores_path);
  require(in.is_open(), Err::NotFound, "cannot open scores: " + scores_path);
  std::map<std::pair<std::string, std::string>, double> by_pair;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string enroll, test;
    double score;
    ss >> enroll >> test >> score;
    require(!ss.fail(), Err::ParseError,
            "scores line " + std::to_string(lineno) + ": expected '<enroll> "
            "<test> <score>'");
    by_pair[{enroll, test}] = score;
  }
  std::vector<ScoredTrial> out;
  out.reserve(list.trials.size());
  for (const auto& t : list.trials) {
    auto it = by_pair.find({t.enroll, t.test});
    require(it != by_pair.end(), Err::MissingEmbedding,
            "no score for trial " + t.enroll + " " + t.test);
    out.push_back({t.enroll, t.test, it->second, t.label});
  }
  return out;
}

namespace {

struct ErrorCurve {
  std::vector<double> thresholds;  // ascending, with a sentinel past the max
  std::vector<double> far, frr;    // operating point at each threshold
};

ErrorCurve error_curve(const std::vector<double>& scores,
                       const std::vector<int>& labels) {
  require(scores.size() == labels.size(), Err::DimMismatch,
          "scores/labels length mismatch");
  std::vector<double> targets, nontargets;
  for (size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), Err::BadRange, "non-finite score");
    if (labels[i] == 1)
      targets.push_back(scores[i]);
    else
      nontargets.push_back(scores[i]);
  }
  require(!targets.empty() && !nontargets.empty(), Err::DegenerateLabels,
          "need at least one target and one nontarget");
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());

  std::vector<double> thr = scores;
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  thr.push_back(thr.back() + 1.0);

  ErrorCurve c;
  c.thresholds = thr;
  c.far.resize(thr.size());
  c.frr.resize(thr.size());
  for (size_t i = 0; i < thr.size(); ++i) {
    double t = thr[i];
    size_t nt_below =
        std::lower_bound(nontargets.begin(), nontargets.end(), t) -
        nontargets.begin();
    size_t tg_below =
        std::lower_bound(targets.begin(), targets.end(), t) - targets.begin();
    c.far[i] = static_cast<double>(nontargets.size() - nt_below) /
               static_cast<double>(nontargets.size());
    c.frr[i] = static_cast<double>(tg_below) / static_cast<double>(targets.size());
  }
  return c;
}

}  // namespace

std::pair<double, double> compute_eer(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
  ErrorCurve c = error_curve(scores, labels);
  for (size_t i = 0; i < c.thresholds.size(); ++i) {
    if (c.frr[i] < c.far[i]) continue;
    if (c.frr[i] == c.far[i]) return {100.0 * c.far[i], c.thresholds[i]};
    // FRR has just overtaken FAR; interpolate along the segment from the
    // previous operating point.
    require(i > 0, Err::DegenerateLabels, "no crossing found");
    double a1 = c.far[i - 1], r1 = c.frr[i - 1];
    double a2 = c.far[i], r2 = c.frr[i];
    double lambda = (a1 - r1) / ((a1 - r1) + (r2 - a2));
    double eer = (1.0 - lambda) * a1 + lambda * a2;
    double thr = (1.0 - lambda) * c.thresholds[i - 1] + lambda * c.thresholds[i];
    return {100.0 * eer, thr};
  }
  fail(Err::DegenerateLabels, "no crossing found");
}

double compute_min_dcf(const std::vector<double>& scores,
                       const std::vector<int>& labels, double p_target,
                       double c_miss, double c_fa) {
  require(p_target > 0.0 && p_target < 1.0, Err::BadRange,
          "p_target outside (0,1)");
  ErrorCurve c = error_curve(scores, labels);
  double best = 1e300;
  for (size_t i = 0; i < c.thresholds.size(); ++i)
    best = std::min(best, c_miss * p_target * c.frr[i] +
                              c_fa * (1.0 - p_target) * c.far[i]);
  return best / std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

EvalResult evaluate(const std::vector<ScoredTrial>& scored) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(scored.size());
  labels.reserve(scored.size());
  for (const auto& s : scored) {
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  EvalResult r;
  auto [eer, thr] = compute_eer(scores, labels);
  r.eer = eer;
  r.eer_threshold = thr;
  r.min_dcf = compute_min_dcf(scores, labels);
  for (int l : labels) {
    if (l == 1)
      ++r.n_target;
    else
      ++r.n_nontarget;
  }
  return r;
}

void append_result(const std::string& path, const ResultRow& row) {
  bool fresh = !std::ifstream(path).is_open();
  std::ofstream out(path, std::ios::app);
  require(out.is_open(), Err::IoError, "cannot write results: " + path);
  if (fresh) out << "system,set,eer,min_dcf,n_target,n_nontarget\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f,%.4f", row.eer, row.min_dcf);
  out << row.system << "," << row.set << "," << buf << "," << row.n_target
      << "," << row.n_nontarget << "\n";
  require(out.good(), Err::IoError, "write failed: " + path);
}

std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), Err::NotFound, "cannot open results: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Err::ParseError,
          "empty results file: " + path);
  require(trim(line) == "system,set,eer,min_dcf,n_target,n_nontarget",
          Err::ParseError, "bad results header: " + path);
  std::vector<ResultRow> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(trim(line));
    require(f.size() == 6, Err::ParseError,
            "results line " + std::to_string(lineno) + ": expected 6 fields");
    ResultRow r;
    r.system = f[0];
    r.set = f[1];
    try {
      r.eer = std::stod(f[2]);
      r.min_dcf = std::stod(f[3]);
      r.n_target = std::stoul(f[4]);
      r.n_nontarget = std::stoul(f[5]);
    } catch (const std::exception&) {
      fail(Err::ParseError,
           "results line " + std::to_string(lineno) + ": bad numeric field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

// Column order: first-seen order of sets; row order: first-seen systems.
struct Grid {
  std::vector<std::string> systems, sets;
  std::map<std::pair<std::string, std::string>, double> eer;
};

Grid build_grid(const std::vector<ResultRow>& rows) {
  Grid g;
  for (const auto& r : rows) {
    if (std::find(g.systems.begin(), g.systems.end(), r.system) ==
        g.systems.end())
      g.systems.push_back(r.system);
    if (std::find(g.sets.begin(), g.sets.end(), r.set) == g.sets.end())
      g.sets.push_back(r.set);
    g.eer[{r.system, r.set}] = r.eer;
  }
  return g;
}

}  // namespace

std::string report_csv(const std::vector<ResultRow>& rows) {
  Grid g = build_grid(rows);
  std::string out = "system";
  for (const auto& s : g.sets) out += "," + s;
  out += "\n";
  char buf[32];
  for (const auto& sys : g.systems) {
    out += sys;
    for (const auto& s : g.sets) {
      auto it = g.eer.find({sys, s});
      if (it == g.eer.end()) {
        out += ",";
      } else {
        std::snprintf(buf, sizeof buf, ",%.2f", it->second);
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

std::string report_table(const std::vector<ResultRow>& rows) {
  Grid g = build_grid(rows);
  size_t name_w = 6;
  for (const auto& sys : g.systems) name_w = std::max(name_w, sys.size());
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), "system");
  out += buf;
  for (const auto& s : g.sets) {
    std::snprintf(buf, sizeof buf, "  %8s", s.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& sys : g.systems) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w),
                  sys.c_str());
    out += buf;
    for (const auto& s : g.sets) {
      auto it = g.eer.find({sys, s});
      if (it == g.eer.end())
        std::snprintf(buf, sizeof buf, "  %8s", "-");
      else
        std::snprintf(buf, sizeof buf, "  %8.2f", it->second);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace longsv
