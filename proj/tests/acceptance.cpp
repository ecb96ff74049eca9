// tests/acceptance.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.


// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Tolerances and
// sizes are pinned below. Arguments select criteria (default: all). Exit
// status is 1 when any criterion fails and 77 when all selected were skipped.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frameforge/decode.hpp"
#include "frameforge/eval.hpp"
#include "frameforge/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace frameforge;
using namespace frameforge::oracle;

namespace {

// Criterion 1
constexpr int kViterbiCases = 500;
constexpr double kViterbiSeconds = 10.0;
constexpr double kTieTolerance = 1e-12;
// Criterion 2
constexpr int kEmTrials = 50;
constexpr double kEmTolerance = 1e-10;
// Criterion 3
constexpr int kNmfRuns = 100;
constexpr double kKlStepTolerance = 1e-9;
constexpr double kRankOneError = 1e-6;
// Criterion 4
constexpr int kSharingIterations = 3;
constexpr int kSharingCorpus = 50;
// Criterion 5
constexpr int kArShuffles = 100000;
constexpr double kArTolerance = 0.01;
// Criterion 6
constexpr int kSyntheticSize = 175;
constexpr int kSyntheticSeeds = 5;
constexpr int kSyntheticRuns = 3;
constexpr double kSyntheticTarget = 0.90;
constexpr double kSyntheticSeconds = 300.0;
// Criterion 7
constexpr double kPatcorLow = 0.87, kPatcorHigh = 0.98;  // 90-95 +-3 points
constexpr double kDealcardTarget = 0.97;

int failures = 0, passes = 0;

void report(int id, const std::string &status, const std::string &detail) {
  if (status == "FAIL") ++failures;
  if (status == "PASS") ++passes;
  std::printf("criterion %d %-4s %s\n", id, status.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CorpusEntry toy_entry(Frame f, std::vector<std::string> units) {
  CorpusEntry e;
  e.utterance.phonemic = units;
  e.utterance.orthographic = units;
  e.automatic_frame = f;
  e.oracle_frame = f;
  return e;
}

HmmModel toy_model(const FrameSchema &schema, const std::vector<std::string> &vocab,
                   SharingConfig config, std::mt19937_64 &rng) {
  const auto map = toy_map(schema, vocab, config.fillers != FillerMode::kNone, rng);
  Frame all{"t", {}};
  for (const auto &slot : schema.frame_type(0).slots)
    for (const auto &v : slot.values) all.fills[slot.name].insert(v);
  const std::vector<CorpusEntry> train{toy_entry(all, {vocab[0]})};
  return build_model(schema, map, config, train);
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  int cases = 0, agree = 0, tied = 0;
  while (cases < kViterbiCases) {
    const int vocab_size = 1 + int(rng() % 5);
    std::vector<std::string> vocab;
    for (int k = 0; k < vocab_size; ++k) vocab.push_back(std::string(1, char('a' + k)));
    const bool fillers = rng() % 3 == 0;
    const int a = 1 + int(rng() % 3), b = int(rng() % 3);
    auto m = toy_model(toy_schema(a, b), vocab,
                       {fillers ? FillerMode::kNonShared : FillerMode::kNone, false,
                        false, false},
                       rng);
    if (m.num_states() > 6) continue;
    randomize(m, rng);
    std::vector<int> units(1 + rng() % 6);
    for (auto &u : units) u = int(rng() % vocab_size);
    double best = 0;
    const auto ref = brute_force_viterbi(m.initial, m.transitions, m.emissions, units, &best);
    const auto got = viterbi(m, units);
    if (got == ref)
      ++agree;
    else if (std::abs(path_log_score(m.initial, m.transitions, m.emissions, got, units) -
                      best) <= kTieTolerance)
      ++tied;  // equal factors in another order: also an enumerated optimum
    ++cases;
  }
  const double secs = seconds_since(t0);
  const bool ok = agree + tied == cases && secs < kViterbiSeconds;
  report(1, ok ? "PASS" : "FAIL",
         "viterbi vs enumeration: " + std::to_string(agree) + "/" + std::to_string(cases) +
             " identical paths, " + std::to_string(tied) +
             " tied optima (log score within 1e-12), " + fmt("%.2f", secs) +
             " s (limit 10 s)");
}

void criterion_2() {
  std::mt19937_64 rng(202);
  double worst = 0;
  for (int trial = 0; trial < kEmTrials; ++trial) {
    const auto schema = toy_schema(1, 1);
    const Frame full{"t", {{"A", {"1"}}, {"B", {"1"}}}};
    auto model = toy_model(schema, {"a", "b"}, {}, rng);
    randomize(model, rng);
    std::vector<std::vector<int>> data(2 + rng() % 3);
    for (auto &u : data) {
      u.resize(1 + rng() % 4);
      for (auto &x : u) x = int(rng() % 2);
    }
    Eigen::VectorXd pi = model.initial;
    Eigen::MatrixXd a = model.transitions, b = model.emissions;
    for (int it = 0; it < 2; ++it) {
      Eigen::VectorXd pi_n = Eigen::VectorXd::Zero(2);
      Eigen::MatrixXd a_n = Eigen::MatrixXd::Zero(2, 2), b_n = Eigen::MatrixXd::Zero(2, 2);
      for (const auto &u : data) {
        const auto e = enumerate(pi, a, b, u);
        pi_n += e.gamma.col(0);
        for (const auto &x : e.xi) a_n += x;
        for (std::size_t t = 0; t < u.size(); ++t) b_n.col(u[t]) += e.gamma.col(Eigen::Index(t));
      }
      pi = pi_n / pi_n.sum();
      for (int i = 0; i < 2; ++i) {
        if (a_n.row(i).sum() > 0) a.row(i) = a_n.row(i) / a_n.row(i).sum();
        b.row(i) = b_n.row(i) / b_n.row(i).sum();
      }
      ExpectedCounts total = ExpectedCounts::zeros(model);
      for (const auto &u : data) total += e_step(model, u, full);
      model = m_step(total, model);
    }
    worst = std::max({worst, (model.initial - pi).cwiseAbs().maxCoeff(),
                      (model.transitions - a).cwiseAbs().maxCoeff(),
                      (model.emissions - b).cwiseAbs().maxCoeff()});
  }

  // Masking: states absent from the frame get exactly zero, the rest do not.
  int mask_errors = 0, mask_cases = 0;
  for (int trial = 0; trial < kEmTrials; ++trial) {
    const auto schema = toy_schema(2, 2);
    auto m = toy_model(schema, {"a", "b"}, {}, rng);
    randomize(m, rng);
    Frame f{"t", {}};
    f.fills["A"] = {std::to_string(1 + rng() % 2)};
    if (rng() % 2) f.fills["B"] = {std::to_string(1 + rng() % 2)};
    std::vector<int> units(1 + rng() % 4);
    for (auto &x : units) x = int(rng() % 2);
    const auto counts = e_step(m, units, f);
    for (int i = 0; i < int(m.states.size()); ++i) {
      const auto &s = m.states[i];
      const auto &slot = schema.slot(0, s.ref.slot).name;
      const bool present = f.fills.count(slot) && f.fills.at(slot).count(schema.value(s.ref));
      const double occ = counts.emissions.row(i).sum();
      ++mask_cases;
      if (present ? !(occ > 0) : occ != 0.0) ++mask_errors;
      if (!present && (counts.transitions.row(i).sum() != 0.0 ||
                       counts.transitions.col(i).sum() != 0.0))
        ++mask_errors;
    }
  }
  const bool ok = worst <= kEmTolerance && mask_errors == 0;
  report(2, ok ? "PASS" : "FAIL",
         "two EM iterations vs enumeration: max |diff| " + fmt("%.2e", worst) +
             " (tol 1e-10) over " + std::to_string(kEmTrials) + " models; masking " +
             std::to_string(mask_cases - mask_errors) + "/" + std::to_string(mask_cases) +
             " state checks");
}

void criterion_3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  int violations = 0;
  double worst_increase = 0;
  for (int run = 0; run < kNmfRuns; ++run) {
    Eigen::MatrixXd v(10, 8);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
    NmfOptions o;
    o.rank = 1 + run % 4;
    o.iterations = 200;
    o.tolerance = 0;
    o.seed = std::uint64_t(run);
    const auto f = factorize(v, o);
    double prev = f.initial_objective;
    for (double obj : f.objective) {
      worst_increase = std::max(worst_increase, obj - prev);
      if (obj > prev + kKlStepTolerance) ++violations;
      prev = obj;
    }
  }
  double worst_error = 0;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd a(3 + k % 5), b(2 + k % 6);
    for (auto &x : a) x = 0.1 + u(rng);
    for (auto &x : b) x = 0.1 + u(rng);
    NmfOptions o;
    o.rank = 1;
    o.iterations = 200;
    o.tolerance = 0;
    o.seed = std::uint64_t(k);
    const Eigen::MatrixXd v = a * b.transpose();
    const auto f = factorize(v, o);
    worst_error = std::max(worst_error, (v - f.w * f.h).norm());
  }
  const bool ok = violations == 0 && worst_error < kRankOneError;
  report(3, ok ? "PASS" : "FAIL",
         "KL non-increasing in " + std::to_string(kNmfRuns) + " runs (" +
             std::to_string(violations) + " steps above 1e-9, max rise " +
             fmt("%.1e", worst_increase) + "); rank-1 max error " +
             fmt("%.1e", worst_error) + " (< 1e-6)");
}

void criterion_4() {
  const auto &schema = patience_schema();
  const auto corpus = generate_synthetic(schema, patience_grammar(), kSharingCorpus, 404);
  const auto &train = corpus.speakers.begin()->second;
  int configs = 0, iterations = 0;
  long t_bad = 0, e_bad = 0, zero_bad = 0;
  for (auto fillers : {FillerMode::kNone, FillerMode::kNonShared, FillerMode::kAllShared,
                       FillerMode::kSlotShared})
    for (bool t : {false, true})
      for (bool en : {false, true})
        for (bool eh : {false, true}) {
          ExperimentConfig config;
          config.sharing = {fillers, t, en, eh};
          config.iterations = 0;
          auto model = *train_system(schema, train, config, 7).hmm;
          std::vector<std::vector<int>> encoded;
          for (const auto &e : train)
            encoded.push_back(model.encode(segment(e.utterance, Granularity::kWordUnigram)));
          ++configs;
          for (int it = 0; it < kSharingIterations; ++it) {
            auto total = ExpectedCounts::zeros(model);
            for (std::size_t k = 0; k < train.size(); ++k)
              total += e_step(model, encoded[k], train[k].automatic_frame);
            model = m_step(total, model);
            ++iterations;
            const auto n = model.num_states();
            std::map<std::string, std::vector<double>> groups;
            for (Eigen::Index i = 0; i < n; ++i)
              for (Eigen::Index j = 0; j < n; ++j) {
                const auto &a = model.states[i], &b = model.states[j];
                if (a.kind == StateKind::kSlotValue && b.kind == StateKind::kSlotValue &&
                    a.frame_type == b.frame_type && a.ref.slot == b.ref.slot && i != j &&
                    model.transitions(i, j) != 0.0)
                  ++zero_bad;
                if (!t || !model.allowed(i, j)) continue;
                auto key = [](const HmmState &s) {
                  return std::to_string(s.frame_type) + "/" +
                         std::to_string(s.kind == StateKind::kFrameType ? -1 : s.ref.slot) +
                         "/" + std::to_string(int(s.kind));
                };
                groups[key(a) + ">" + key(b)].push_back(model.transitions(i, j));
              }
            for (const auto &[_, values] : groups)
              for (double v : values)
                if (v != values.front()) ++t_bad;
            if (eh)
              for (const auto &set : schema.shared_sets()) {
                const int ft = *schema.frame_type_index(set.frame_type);
                const int s0 = *schema.slot_index(ft, set.slots[0]);
                for (const auto &value : schema.slot(ft, s0).values) {
                  std::vector<int> members;
                  for (const auto &slot : set.slots)
                    if (auto st = model.state_index(slot + "=" + value)) members.push_back(*st);
                  for (int m : members)
                    if (model.emissions.row(m) != model.emissions.row(members.front())) ++e_bad;
                }
              }
          }
        }
  const bool ok = t_bad == 0 && e_bad == 0 && zero_bad == 0;
  report(4, ok ? "PASS" : "FAIL",
         std::to_string(configs) + " configs x " + std::to_string(kSharingIterations) +
             " iterations: " + std::to_string(t_bad) + " untied transition entries, " +
             std::to_string(e_bad) + " untied shared emissions, " +
             std::to_string(zero_bad) + " non-zero within-slot transitions");
}

double exhaustive_p(const std::vector<SlotCounts> &a, const std::vector<SlotCounts> &b) {
  SlotCounts ta, tb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ta += a[i];
    tb += b[i];
  }
  const double observed = std::abs(prf(ta).f - prf(tb).f);
  long hits = 0;
  const long patterns = 1L << a.size();
  for (long mask = 0; mask < patterns; ++mask) {
    SlotCounts sa, sb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool swap = (mask >> i) & 1;
      sa += swap ? b[i] : a[i];
      sb += swap ? a[i] : b[i];
    }
    if (std::abs(prf(sa).f - prf(sb).f) >= observed - 1e-12) ++hits;
  }
  return double(hits) / double(patterns);
}

void criterion_5() {
  bool ok = true;
  const Frame i1{"movecard", {{"FS", {"c"}}, {"FV", {"11"}}, {"TS", {"h"}}, {"TV", {"12"}}}};
  const Frame o1{"movecard", {{"FS", {"c"}}, {"FV", {"11"}}, {"TS", {"h", "d"}}, {"TV", {"12"}}}};
  const auto c1 = score_pair(i1, o1);
  ok &= c1 == SlotCounts{4, 4, 4} && prf(c1).f == 1.0;
  const Frame i2{"movecard", {{"FS", {"c"}}, {"FV", {"11"}}, {"FC", {"3"}}}};
  const Frame o2{"movecard", {{"FS", {"c"}}, {"FV", {"11"}}}};
  const auto c2 = score_pair(i2, o2);
  const auto p2 = prf(c2);
  ok &= c2 == SlotCounts{2, 3, 2} && p2.precision == 2.0 / 3.0 && p2.recall == 1.0 &&
        std::abs(p2.f - 0.8) < 1e-15;
  const std::vector<SlotCounts> pair{{2, 3, 2}, {3, 3, 4}};
  const auto m = micro_average(pair);
  ok &= m.precision == 5.0 / 6.0 && m.recall == 5.0 / 6.0 && std::abs(m.f - 5.0 / 6.0) < 1e-15;
  const bool arithmetic = ok;

  std::mt19937_64 rng(505);
  double worst = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    std::vector<SlotCounts> a(n), b(n);
    for (auto *v : {&a, &b})
      for (auto &c : *v) {
        c.induced_filled = long(rng() % 5);
        c.oracle_filled = long(rng() % 5);
        c.correct = long(rng() % (std::min(c.induced_filled, c.oracle_filled) + 1));
      }
    const double exact = exhaustive_p(a, b);
    const double approx = approx_randomization_test(a, b, kArShuffles, n).p_value;
    worst = std::max(worst, std::abs(exact - approx));
  }
  ok &= worst <= kArTolerance;
  report(5, ok ? "PASS" : "FAIL",
         std::string("score_pair/micro_average examples ") +
             (arithmetic ? "exact" : "WRONG") +
             "; randomization vs exhaustive swaps (n=1..10, 100000 shuffles): max |dp| " +
             fmt("%.4f", worst) + " (tol 0.01)");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double f_at(const LearningCurve &c, std::size_t size) {
  for (const auto &p : c.points)
    if (p.training_size == size) return p.score.f;
  return -1;
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto &schema = patience_schema();
  ExperimentConfig full, none;
  full.sharing = {FillerMode::kSlotShared, true, true, true};
  none.sharing = {FillerMode::kNone, false, false, false};
  for (auto *c : {&full, &none}) {
    c->granularity = Granularity::kWordUnigram;
    c->runs = kSyntheticRuns;
    c->iterations = 20;
  }
  std::vector<double> full150, full25, full50, none25, none50;
  std::string per_seed;
  for (int seed = 1; seed <= kSyntheticSeeds; ++seed) {
    const auto corpus = generate_synthetic(schema, patience_grammar(), kSyntheticSize,
                                           std::uint64_t(seed));
    const auto speaker = corpus.speakers.begin()->first;
    full.seed = none.seed = std::uint64_t(seed);
    const auto cf = run_learning_curve(corpus, speaker, full, schema);
    const auto cn = run_learning_curve(corpus, speaker, none, schema);
    full150.push_back(f_at(cf, 150));
    full25.push_back(f_at(cf, 25));
    full50.push_back(f_at(cf, 50));
    none25.push_back(f_at(cn, 25));
    none50.push_back(f_at(cn, 50));
    per_seed += (seed > 1 ? " " : "") + fmt("%.3f", full150.back());
  }
  const double secs = seconds_since(t0);
  const double m150 = median(full150);
  const double f25 = median(full25), n25 = median(none25);
  const double f50 = median(full50), n50 = median(none50);
  const bool ok = m150 >= kSyntheticTarget && f25 > n25 && f50 > n50 &&
                  secs < kSyntheticSeconds;
  report(6, ok ? "PASS" : "FAIL",
         "synthetic 175: full-sharing median F@150 " + fmt("%.3f", m150) +
             " (target >= 0.90; seeds " + per_seed + "); F@25 full " + fmt("%.3f", f25) +
             " vs none " + fmt("%.3f", n25) + "; F@50 full " + fmt("%.3f", f50) +
             " vs none " + fmt("%.3f", n50) + "; " + fmt("%.0f", secs) + " s (limit 300 s)");
}

void criterion_7() {
  const char *path = std::getenv("FRAMEFORGE_PATCOR");
  if (path == nullptr || !fs::exists(path)) {
    report(7, "SKIP",
           "PATCOR corpus not available (set FRAMEFORGE_PATCOR to a corpus JSONL "
           "to run the speaker-9 checks)");
    return;
  }
  const char *spk = std::getenv("FRAMEFORGE_PATCOR_SPEAKER");
  const std::string speaker = spk ? spk : "9";
  const auto corpus = load_corpus(path);

  auto base = [](Granularity g, Decoder d, SharingConfig s) {
    ExperimentConfig c;
    c.granularity = g;
    c.decoder = d;
    c.sharing = s;
    c.test_anchor_count = 200;
    c.runs = 10;
    c.iterations = 20;
    return c;
  };
  // Top-ranked HMM configurations per input type.
  const std::map<Granularity, SharingConfig> top{
      {Granularity::kPhonemeUnigram, {FillerMode::kSlotShared, true, true, true}},
      {Granularity::kPhonemeBigram, {FillerMode::kNonShared, true, true, false}},
      {Granularity::kWordUnigram, {FillerMode::kSlotShared, true, true, true}},
      {Granularity::kWordBigram, {FillerMode::kSlotShared, false, false, false}}};
  std::map<Granularity, double> overall;
  double wu50 = -1, deal_min = 1;
  for (const auto &[g, s] : top) {
    const auto curve = run_learning_curve(corpus, speaker, base(g, Decoder::kHmm, s),
                                          patience_schema());
    SlotCounts all;
    for (const auto &p : curve.points) all += p.counts;
    overall[g] = prf(all).f;
    if (g == Granularity::kWordUnigram) wu50 = f_at(curve, 50);
    if (g == Granularity::kWordUnigram || g == Granularity::kPhonemeUnigram)
      for (const auto &p : curve.points)
        if (p.training_size <= 100) deal_min = std::min(deal_min, p.dealcard.f);
  }
  auto nmf = base(Granularity::kWordBigram, Decoder::kNmf, {});
  nmf.nmf_filler_column = true;
  SlotCounts nmf_all;
  for (const auto &p : run_learning_curve(corpus, speaker, nmf, patience_schema()).points)
    nmf_all += p.counts;
  const double nmf_bigram = prf(nmf_all).f;
  const double wb = overall[Granularity::kWordBigram];
  const bool bigram_lowest = wb < overall[Granularity::kWordUnigram] &&
                             wb < overall[Granularity::kPhonemeUnigram] &&
                             wb < overall[Granularity::kPhonemeBigram];
  const bool ok = wu50 >= kPatcorLow && wu50 <= kPatcorHigh && deal_min >= kDealcardTarget &&
                  bigram_lowest && nmf_bigram >= wb;
  report(7, ok ? "PASS" : "FAIL",
         "speaker " + speaker + ": word-unigram F@50 " + fmt("%.3f", wu50) +
             " (0.87-0.98); unigram dealcard F min " + fmt("%.3f", deal_min) +
             "; word bigram overall " + fmt("%.3f", wb) + (bigram_lowest ? " lowest" : " NOT lowest") +
             "; NMF bigram " + fmt("%.3f", nmf_bigram));
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_tool(const std::string &args) {
  const std::string cmd = std::string("\"") + FRAMEFORGE_BIN + "\" " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void criterion_8() {
  const auto &schema = patience_schema();
  const auto corpus = generate_synthetic(schema, patience_grammar(), 100, 808);
  const auto speaker = corpus.speakers.begin()->first;
  ExperimentConfig c;
  c.sharing = {FillerMode::kSlotShared, true, true, true};
  c.iterations = 5;
  c.runs = 2;
  c.seed = 8;
  auto csv = [&](int jobs) {
    const auto curve = run_learning_curve(corpus, speaker, c, schema, jobs);
    std::ostringstream out;
    write_results_csv(out, curve);
    write_summary_csv(out, curve);
    return out.str();
  };
  const bool in_process = csv(1) == csv(1) && csv(1) == csv(2);

  // Through the executable: two fresh output directories.
  const fs::path work = fs::temp_directory_path() / "frameforge_acceptance_8";
  fs::remove_all(work);
  fs::create_directories(work);
  {
    std::ofstream out(work / "corpus.jsonl", std::ios::binary);
    write_corpus(out, corpus);
    std::ofstream grid(work / "grid.json");
    grid << nlohmann::json{{"base", {{"iterations", 5}, {"runs", 2}, {"seed", 8}}},
                           {"fillers", {"slot-shared", "none"}},
                           {"e_sharing_hmm", {true}}}
                .dump();
  }
  bool cli = true;
  int cells = 0;
  for (const char *dir : {"a", "b"})
    cli &= run_tool("experiment --corpus \"" + (work / "corpus.jsonl").string() +
                    "\" --config \"" + (work / "grid.json").string() + "\" --out \"" +
                    (work / dir).string() + "\"") == 0;
  if (cli)
    for (const auto &entry : fs::directory_iterator(work / "a")) {
      if (!entry.is_directory()) continue;
      const auto name = entry.path().filename();
      const auto ma = nlohmann::json::parse(slurp(work / "a" / name / "manifest.json"));
      const auto mb = nlohmann::json::parse(slurp(work / "b" / name / "manifest.json"));
      cli &= ma["digest"] == mb["digest"];
      for (const char *f : {"results.csv", "summary.csv"})
        cli &= slurp(work / "a" / name / f) == slurp(work / "b" / name / f) &&
               !slurp(work / "a" / name / f).empty();
      ++cells;
    }
  fs::remove_all(work);
  const bool ok = in_process && cli && cells == 2;
  report(8, ok ? "PASS" : "FAIL",
         std::string("learning-curve CSVs byte-identical across reruns and job counts: ") +
             (in_process ? "yes" : "no") + "; CLI experiment reruns (" +
             std::to_string(cells) + " cells) with equal manifests byte-identical: " +
             (cli ? "yes" : "no"));
}

}  // namespace

int main(int argc, char **argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };
  const std::vector<void (*)()> criteria{criterion_1, criterion_2, criterion_3,
                                         criterion_4, criterion_5, criterion_6,
                                         criterion_7, criterion_8};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!wanted(int(i + 1))) continue;
    try {
      criteria[i]();
    } catch (const std::exception &e) {
      report(int(i + 1), "FAIL", std::string("error: ") + e.what());
    }
  }
  if (failures > 0) return 1;
  return passes == 0 ? 77 : 0;  // 77: everything selected was skipped
}
