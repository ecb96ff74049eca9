// src/eval.cpp

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

#include "frameforge/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

namespace frameforge {

using nlohmann::json;

SlotCounts score_pair(const Frame &induced, const Frame &oracle) {
  SlotCounts c;
  c.induced_filled = static_cast<long>(induced.filled_slots());
  c.oracle_filled = static_cast<long>(oracle.filled_slots());
  if (induced.type != oracle.type) return c;
  for (const auto &[slot, values] : induced.fills) {
    auto it = oracle.fills.find(slot);
    if (it == oracle.fills.end()) continue;
    // Induced slots hold one value; several would each need to match.
    const bool all_in = std::all_of(values.begin(), values.end(),
                                    [&](const std::string &v) {
                                      return it->second.count(v) > 0;
                                    });
    if (all_in && !values.empty()) ++c.correct;
  }
  return c;
}

SlotCounts frame_type_counts(const Frame &induced, const Frame &oracle,
                             std::string_view frame_type) {
  SlotCounts c;
  c.induced_filled = induced.type == frame_type;
  c.oracle_filled = oracle.type == frame_type;
  c.correct = c.induced_filled && c.oracle_filled;
  return c;
}

Prf prf(const SlotCounts &c) {
  Prf r;
  r.precision = c.induced_filled > 0 ? static_cast<double>(c.correct) /
                                           static_cast<double>(c.induced_filled)
                                     : 0.0;
  r.recall = c.oracle_filled > 0 ? static_cast<double>(c.correct) /
                                       static_cast<double>(c.oracle_filled)
                                 : 0.0;
  r.f = r.precision + r.recall > 0
            ? 2 * r.precision * r.recall / (r.precision + r.recall)
            : 0.0;
  return r;
}

Prf micro_average(std::span<const SlotCounts> counts) {
  SlotCounts total;
  for (const auto &c : counts) total += c;
  return prf(total);
}

RandomizationResult approx_randomization_test(std::span<const SlotCounts> a,
                                              std::span<const SlotCounts> b,
                                              int shuffles, std::uint64_t seed,
                                              double alpha) {
  if (a.size() != b.size())
    throw ValidationError("randomization test: lists differ in length");
  if (shuffles < 1) throw ValidationError("randomization test needs shuffles >= 1");
  SlotCounts ta, tb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ta += a[i];
    tb += b[i];
  }
  RandomizationResult r;
  r.observed = std::abs(prf(ta).f - prf(tb).f);

  std::mt19937_64 rng(seed);
  long at_least = 0;
  for (int s = 0; s < shuffles; ++s) {
    SlotCounts sa, sb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (rng() >> 63) {
        sa += b[i];
        sb += a[i];
      } else {
        sa += a[i];
        sb += b[i];
      }
    }
    if (std::abs(prf(sa).f - prf(sb).f) >= r.observed - 1e-12) ++at_least;
  }
  r.p_value = static_cast<double>(at_least + 1) / static_cast<double>(shuffles + 1);
  r.significant = r.p_value < alpha;
  return r;
}

// ---------------------------------------------------------------------------

std::string to_string(Decoder d) { return d == Decoder::kHmm ? "hmm" : "nmf"; }

Decoder decoder_from_string(std::string_view s) {
  if (s == "hmm") return Decoder::kHmm;
  if (s == "nmf") return Decoder::kNmf;
  throw ValidationError("unknown decoder '" + std::string(s) + "'");
}

namespace {

void check_keys(const json &j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!j.is_object())
    throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto &[key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("unknown key '" + key + "' in " + std::string(where));
}

}  // namespace

json nmf_options_to_json(const NmfOptions &o) {
  return {{"rank", o.rank},
          {"iterations", o.iterations},
          {"tolerance", o.tolerance},
          {"floor", o.floor}};
}

NmfOptions nmf_options_from_json(const json &j) {
  check_keys(j, {"rank", "iterations", "tolerance", "floor"}, "nmf");
  NmfOptions o;
  o.rank = j.value("rank", o.rank);
  o.iterations = j.value("iterations", o.iterations);
  o.tolerance = j.value("tolerance", o.tolerance);
  o.floor = j.value("floor", o.floor);
  if (o.rank < 0) throw ValidationError("nmf.rank must be >= 0");
  if (o.iterations < 1) throw ValidationError("nmf.iterations must be >= 1");
  return o;
}

bool ExperimentConfig::filler_row() const {
  return decoder == Decoder::kHmm ? sharing.fillers != FillerMode::kNone
                                  : nmf_filler_column;
}

json ExperimentConfig::to_json() const {
  return {{"granularity", to_string(granularity)},
          {"decoder", to_string(decoder)},
          {"sharing", sharing.to_json()},
          {"nmf_filler_column", nmf_filler_column},
          {"nmf_threshold", nmf_threshold},
          {"decode", decode.to_json()},
          {"hmm", hmm.to_json()},
          {"nmf", nmf_options_to_json(nmf)},
          {"iterations", iterations},
          {"runs", runs},
          {"seed", seed},
          {"partition_size", partition_size},
          {"test_anchor_count", test_anchor_count},
          {"max_partitions", max_partitions}};
}

ExperimentConfig ExperimentConfig::from_json(const json &j) {
  check_keys(j,
             {"granularity", "decoder", "sharing", "nmf_filler_column",
              "nmf_threshold", "decode", "hmm", "nmf", "iterations", "runs",
              "seed", "partition_size", "test_anchor_count", "max_partitions"},
             "config");
  try {
    ExperimentConfig c;
    if (j.contains("granularity"))
      c.granularity = granularity_from_string(j["granularity"].get<std::string>());
    if (j.contains("decoder"))
      c.decoder = decoder_from_string(j["decoder"].get<std::string>());
    if (j.contains("sharing")) {
      check_keys(j["sharing"],
                 {"fillers", "t_sharing", "e_sharing_nmf", "e_sharing_hmm"},
                 "sharing");
      c.sharing = SharingConfig::from_json(j["sharing"]);
    }
    c.nmf_filler_column = j.value("nmf_filler_column", c.nmf_filler_column);
    c.nmf_threshold = j.value("nmf_threshold", c.nmf_threshold);
    if (j.contains("decode")) c.decode = DecodeOptions::from_json(j["decode"]);
    if (j.contains("hmm")) {
      check_keys(j["hmm"], {"floor", "filler_entry", "filler_self_loop", "mask_fillers",
                  "masking"},
                 "hmm");
      c.hmm = HmmOptions::from_json(j["hmm"]);
    }
    if (j.contains("nmf")) c.nmf = nmf_options_from_json(j["nmf"]);
    c.iterations = j.value("iterations", c.iterations);
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
    c.partition_size = j.value("partition_size", c.partition_size);
    c.test_anchor_count = j.value("test_anchor_count", c.test_anchor_count);
    c.max_partitions = j.value("max_partitions", c.max_partitions);
    if (c.iterations < 0) throw ValidationError("iterations must be >= 0");
    if (c.runs < 1) throw ValidationError("runs must be >= 1");
    if (c.partition_size < 1) throw ValidationError("partition_size must be >= 1");
    return c;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

std::string ExperimentConfig::hash() const {
  return sha256_hex(to_json().dump()).substr(0, 12);
}

// ---------------------------------------------------------------------------

namespace {

std::array<unsigned char, 32> sha256(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static const char *digits = "0123456789abcdef";
  std::string hex;
  for (unsigned char b : sha256(data)) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 15]);
  }
  return hex;
}

std::string file_sha256(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                          std::string_view speaker, std::size_t k, int run) {
  std::ostringstream key;
  key << component << '|' << speaker << '|' << k << '|' << run << '|' << base;
  const auto digest = sha256(key.str());
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[static_cast<std::size_t>(i)];
  return seed;
}

// ---------------------------------------------------------------------------

TrainedSystem train_system(const FrameSchema &schema,
                           std::span<const CorpusEntry> train,
                           const ExperimentConfig &config,
                           std::uint64_t nmf_seed) {
  if (train.empty()) throw ValidationError("no training utterances");
  std::vector<SegmentedCommand> commands;
  commands.reserve(train.size());
  for (const auto &e : train)
    commands.push_back(segment(e.utterance, config.granularity));

  ActivationMatrices act{
      build_frame_matrix(train, schema, config.sharing.e_sharing_nmf,
                         config.filler_row()),
      build_command_matrix(commands)};
  NmfOptions nmf = config.nmf;
  nmf.seed = nmf_seed;
  const auto factors = factorize(act, nmf);

  TrainedSystem sys;
  sys.schema = schema;
  sys.granularity = config.granularity;
  sys.decoder = config.decoder;
  sys.map = association_map(factors, act);
  sys.decode = config.decode;
  sys.nmf_threshold = config.nmf_threshold;
  if (config.decoder == Decoder::kHmm) {
    auto model = build_model(schema, sys.map, config.sharing, train, config.hmm);
    auto [trained, trace] =
        frameforge::train(std::move(model), train, config.granularity,
                          config.iterations);
    sys.hmm = std::move(trained);
    sys.trace = std::move(trace);
  }
  return sys;
}

SystemOutput run_system(const TrainedSystem &system,
                        const SegmentedCommand &command) {
  SystemOutput out;
  if (system.decoder == Decoder::kHmm) {
    if (!system.hmm) throw ValidationError("system has no HMM");
    out.detail = decode(*system.hmm, command, system.decode);
    out.frame = out.detail->frame;
    return out;
  }
  if (command.units.empty()) throw DecodeError("cannot decode an empty command");
  const UnitDistance distance =
      system.decode.unknown == UnknownUnits::kMapFeature
          ? UnitDistance(feature_edit_distance)
          : UnitDistance(symbol_edit_distance);
  const auto known =
      system.decode.unknown == UnknownUnits::kIgnore
          ? drop_unknown_units(command, system.map.units, distance)
          : map_unknown_units(command, system.map.units, distance);
  out.frame = nmf_decode(known, system.map, system.schema, system.nmf_threshold);
  return out;
}

Frame run_system(const TrainedSystem &system, const Utterance &utterance) {
  return run_system(system, segment(utterance, system.granularity)).frame;
}

json TrainedSystem::to_json() const {
  json j = {{"format", "frameforge-system"},
            {"version", 1},
            {"schema", schema.to_json()},
            {"granularity", frameforge::to_string(granularity)},
            {"decoder", frameforge::to_string(decoder)},
            {"decode", decode.to_json()},
            {"nmf_threshold", nmf_threshold},
            {"association_map", map.to_json(schema)},
            {"training", {{"iterations", trace.iterations},
                          {"skipped", trace.skipped},
                          {"log_likelihood", trace.log_likelihood}}}};
  if (hmm) j["hmm"] = hmm->to_json();
  return j;
}

TrainedSystem TrainedSystem::from_json(const json &j) {
  try {
    if (j.value("format", std::string()) != "frameforge-system")
      throw ValidationError("not a frameforge model file");
    TrainedSystem s;
    s.schema = FrameSchema::from_json(j.at("schema"));
    s.granularity = granularity_from_string(j.at("granularity").get<std::string>());
    s.decoder = decoder_from_string(j.at("decoder").get<std::string>());
    s.decode = DecodeOptions::from_json(j.at("decode"));
    s.nmf_threshold = j.at("nmf_threshold").get<double>();
    s.map = AssociationMap::from_json(j.at("association_map"), s.schema);
    if (j.contains("hmm")) s.hmm = HmmModel::from_json(j["hmm"]);
    if (s.decoder == Decoder::kHmm && !s.hmm)
      throw ValidationError("HMM model file lacks the HMM");
    if (j.contains("training")) {
      const auto &t = j["training"];
      s.trace.iterations = t.value("iterations", 0);
      s.trace.skipped = t.value("skipped", 0);
      s.trace.log_likelihood =
          t.value("log_likelihood", std::vector<double>{});
    }
    return s;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)> &fn) {
  const auto workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

LearningCurve run_learning_curve(const Corpus &corpus,
                                 const std::string &speaker,
                                 const ExperimentConfig &config,
                                 const FrameSchema &schema, int jobs) {
  SplitOptions split_options;
  split_options.partition_size = config.partition_size;
  split_options.test_anchor_count = config.test_anchor_count;
  const auto split = split_experiment(corpus, speaker, split_options);
  std::size_t k_max = split.partitions.size();
  if (config.max_partitions > 0) k_max = std::min(k_max, config.max_partitions);
  if (k_max == 0)
    throw ValidationError("speaker '" + speaker +
                          "' has too few utterances for one training partition");

  std::string slotless;
  for (const auto &ft : schema.frame_types())
    if (ft.slots.empty()) {
      slotless = ft.name;
      break;
    }

  LearningCurve curve;
  curve.speaker = speaker;
  curve.config = config;
  curve.test_size = split.test.size();
  const auto runs = static_cast<std::size_t>(config.runs);
  curve.runs.resize(k_max * runs);

  parallel_for(curve.runs.size(), jobs, [&](std::size_t job) {
    const std::size_t k = job / runs + 1;
    const int run = static_cast<int>(job % runs);
    const auto train = split.training_prefix(k);
    const auto system = train_system(
        schema, train, config, derive_seed(config.seed, "nmf", speaker, k, run));
    RunResult r;
    r.training_size = train.size();
    r.run = run;
    r.skipped = system.trace.skipped;
    for (const auto &e : split.test) {
      const Frame induced = run_system(system, e.utterance);
      const auto c = score_pair(induced, e.oracle_frame);
      r.per_instance.push_back(c);
      r.counts += c;
      if (!slotless.empty())
        r.dealcard += frame_type_counts(induced, e.oracle_frame, slotless);
    }
    curve.runs[job] = std::move(r);
  });

  for (std::size_t k = 1; k <= k_max; ++k) {
    CurvePoint p;
    SlotCounts dealcard;
    for (std::size_t run = 0; run < runs; ++run) {
      const auto &r = curve.runs[(k - 1) * runs + run];
      p.training_size = r.training_size;
      p.counts += r.counts;
      dealcard += r.dealcard;
      curve.skipped += r.skipped;
    }
    p.score = prf(p.counts);
    p.dealcard = prf(dealcard);
    curve.points.push_back(p);
  }
  return curve;
}

namespace {

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

void write_results_header(std::ostream &out) {
  out << "speaker,granularity,config-hash,training_size,run,correct,"
         "induced_filled,oracle_filled,P,R,F\n";
}

void write_results_csv(std::ostream &out, const LearningCurve &curve) {
  const auto hash = curve.config.hash();
  const auto g = to_string(curve.config.granularity);
  for (const auto &r : curve.runs) {
    const auto s = prf(r.counts);
    out << curve.speaker << ',' << g << ',' << hash << ',' << r.training_size
        << ',' << r.run << ',' << r.counts.correct << ','
        << r.counts.induced_filled << ',' << r.counts.oracle_filled << ','
        << fixed(s.precision) << ',' << fixed(s.recall) << ',' << fixed(s.f)
        << '\n';
  }
}

void write_summary_header(std::ostream &out) {
  out << "speaker,granularity,config-hash,training_size,runs,correct,"
         "induced_filled,oracle_filled,P,R,F,dealcard_P,dealcard_R,dealcard_F\n";
}

void write_summary_csv(std::ostream &out, const LearningCurve &curve) {
  const auto hash = curve.config.hash();
  const auto g = to_string(curve.config.granularity);
  for (const auto &p : curve.points)
    out << curve.speaker << ',' << g << ',' << hash << ',' << p.training_size
        << ',' << curve.config.runs << ',' << p.counts.correct << ','
        << p.counts.induced_filled << ',' << p.counts.oracle_filled << ','
        << fixed(p.score.precision) << ',' << fixed(p.score.recall) << ','
        << fixed(p.score.f) << ',' << fixed(p.dealcard.precision) << ','
        << fixed(p.dealcard.recall) << ',' << fixed(p.dealcard.f) << '\n';
}

// ---------------------------------------------------------------------------

std::string cell_name(const ExperimentConfig &c) {
  std::string name = to_string(c.granularity) + "_" + to_string(c.decoder);
  if (c.decoder == Decoder::kHmm) {
    name += "_fillers-" + to_string(c.sharing.fillers);
    name += c.sharing.t_sharing ? "_t1" : "_t0";
    name += c.sharing.e_sharing_nmf ? "_enmf1" : "_enmf0";
    name += c.sharing.e_sharing_hmm ? "_ehmm1" : "_ehmm0";
  } else {
    name += c.sharing.e_sharing_nmf ? "_enmf1" : "_enmf0";
    name += c.nmf_filler_column ? "_fcol1" : "_fcol0";
  }
  return name;
}

namespace {

template <typename T, typename F>
std::vector<T> grid_values(const json &grid, const char *key,
                           std::vector<T> fallback, F &&parse) {
  if (!grid.contains(key)) return fallback;
  const auto &v = grid[key];
  if (!v.is_array() || v.empty())
    throw ValidationError(std::string("grid key '") + key +
                          "' must be a non-empty list");
  std::vector<T> out;
  for (const auto &x : v) out.push_back(parse(x));
  return out;
}

}  // namespace

std::vector<GridCell> expand_grid(const json &grid) {
  check_keys(grid,
             {"base", "speakers", "granularities", "decoders", "fillers",
              "t_sharing", "e_sharing_nmf", "e_sharing_hmm",
              "nmf_filler_column"},
             "grid");
  const auto base = ExperimentConfig::from_json(grid.value("base", json::object()));
  auto as_bool = [](const json &x) { return x.get<bool>(); };
  try {
    const auto granularities = grid_values<Granularity>(
        grid, "granularities", {base.granularity},
        [](const json &x) { return granularity_from_string(x.get<std::string>()); });
    const auto decoders = grid_values<Decoder>(
        grid, "decoders", {base.decoder},
        [](const json &x) { return decoder_from_string(x.get<std::string>()); });
    const auto fillers = grid_values<FillerMode>(
        grid, "fillers", {base.sharing.fillers},
        [](const json &x) { return filler_mode_from_string(x.get<std::string>()); });
    const auto t = grid_values<bool>(grid, "t_sharing", {base.sharing.t_sharing}, as_bool);
    const auto en = grid_values<bool>(grid, "e_sharing_nmf",
                                      {base.sharing.e_sharing_nmf}, as_bool);
    const auto eh = grid_values<bool>(grid, "e_sharing_hmm",
                                      {base.sharing.e_sharing_hmm}, as_bool);
    const auto fc = grid_values<bool>(grid, "nmf_filler_column",
                                      {base.nmf_filler_column}, as_bool);

    std::vector<GridCell> cells;
    std::set<std::string> seen;
    auto add = [&](ExperimentConfig c) {
      auto name = cell_name(c);
      if (seen.insert(name).second) cells.push_back({std::move(name), std::move(c)});
    };
    for (auto g : granularities)
      for (auto d : decoders) {
        ExperimentConfig c = base;
        c.granularity = g;
        c.decoder = d;
        if (d == Decoder::kHmm) {
          c.nmf_filler_column = false;
          for (auto f : fillers)
            for (bool ti : t)
              for (bool ei : en)
                for (bool hi : eh) {
                  c.sharing = {f, ti, ei, hi};
                  add(c);
                }
        } else {
          for (bool ei : en)
            for (bool fi : fc) {
              c.sharing = {FillerMode::kNone, false, ei, false};
              c.nmf_filler_column = fi;
              add(c);
            }
        }
      }
    return cells;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("grid: ") + e.what());
  }
}

}  // namespace frameforge
