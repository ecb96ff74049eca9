// tools/frameforge.cpp

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

// frameforge: corpus tools, training, decoding, scoring, experiment grids and
// synthetic data generation.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frameforge/corpus.hpp"
#include "frameforge/decode.hpp"
#include "frameforge/eval.hpp"
#include "frameforge/schema.hpp"
#include "frameforge/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace frameforge;

namespace {

constexpr const char *kVersion = FRAMEFORGE_VERSION;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  bool json_output = false;
};

void add_common(CLI::App *app, CommonFlags &flags) {
  app->add_option("--config", flags.config, "JSON configuration file");
  app->add_option("--seed", flags.seed, "Base seed");
  app->add_option("--out", flags.out, "Output path");
  app->add_option("--jobs", flags.jobs,
                  "Worker threads (default: FRAMEFORGE_JOBS, else 1)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--json", flags.json_output, "Machine-readable output");
}

json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

// Writes through a temporary file so a killed run never leaves a truncated
// output behind.
void write_file(const fs::path &path, const std::string &content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw ValidationError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// Output stream for "-"/empty (stdout) or a file.
class Output {
 public:
  explicit Output(const std::string &path) {
    if (!path.empty() && path != "-") {
      if (fs::path(path).has_parent_path())
        fs::create_directories(fs::path(path).parent_path());
      file_.open(path, std::ios::binary);
      if (!file_) throw ValidationError("cannot write '" + path + "'");
    }
  }
  std::ostream &stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

class Input {
 public:
  explicit Input(const std::string &path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw ValidationError("cannot open '" + path + "'");
    }
  }
  std::istream &stream() { return file_.is_open() ? file_ : std::cin; }

 private:
  std::ifstream file_;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool blank(const std::string &line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Config file (optional) with command-line overrides applied on top.
ExperimentConfig load_config(const CommonFlags &flags) {
  json j = json::object();
  if (!flags.config.empty()) j = read_json_file(flags.config);
  auto config = ExperimentConfig::from_json(j);
  if (flags.seed) config.seed = *flags.seed;
  return config;
}

// Identity of a run: everything except timestamps and output digests.
std::string manifest_digest(const json &manifest) {
  json identity = manifest;
  for (const char *key : {"digest", "started", "finished", "outputs"})
    identity.erase(key);
  return sha256_hex(identity.dump());
}

json seeds_json(std::uint64_t base) {
  return {{"base", base},
          {"derivation", "sha256(component|speaker|k|run|base)[0:8] big-endian"}};
}

// ---------------------------------------------------------------------------

int cmd_segment(const CommonFlags &flags, const std::string &input,
                std::optional<std::string> granularity_flag) {
  Granularity g = Granularity::kWordUnigram;
  if (!flags.config.empty()) g = load_config(flags).granularity;
  if (granularity_flag) g = granularity_from_string(*granularity_flag);

  Input in(input);
  std::ostringstream buffer;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in.stream(), line); ++lineno) {
    if (blank(line)) continue;
    CorpusEntry entry;
    SegmentedCommand cmd;
    try {
      entry = entry_from_json(json::parse(line));
      cmd = segment(entry.utterance, g);
    } catch (const json::exception &e) {
      throw ParseError(lineno, std::string("malformed record: ") + e.what());
    } catch (const ParseError &) {
      throw;
    } catch (const ValidationError &e) {
      throw ParseError(lineno, e.what());
    }
    if (flags.json_output) {
      buffer << json{{"id", entry.utterance.id}, {"units", cmd.units}}.dump()
             << '\n';
    } else {
      for (std::size_t i = 0; i < cmd.units.size(); ++i)
        buffer << (i ? " " : "") << cmd.units[i];
      buffer << '\n';
    }
  }
  Output out(flags.out);
  out.stream() << buffer.str();
  return 0;
}

int cmd_train(const CommonFlags &flags, const std::string &corpus_path,
              const std::string &speaker, std::optional<std::size_t> training_size,
              bool all_utterances) {
  if (flags.out.empty()) throw ValidationError("train needs --out");
  const auto config = load_config(flags);
  const auto &schema = patience_schema();
  const auto corpus = load_corpus(corpus_path, schema);
  if (!corpus.speakers.count(speaker))
    throw ValidationError("speaker '" + speaker + "' not in corpus");

  std::vector<CorpusEntry> train;
  std::size_t k = 0;
  if (all_utterances) {
    train = corpus.speaker(speaker);
  } else {
    SplitOptions so;
    so.partition_size = config.partition_size;
    so.test_anchor_count = config.test_anchor_count;
    const auto split = split_experiment(corpus, speaker, so);
    k = split.partitions.size();
    if (training_size) {
      if (*training_size == 0 || *training_size % config.partition_size != 0)
        throw ValidationError("--training-size must be a positive multiple of " +
                              std::to_string(config.partition_size));
      k = *training_size / config.partition_size;
      if (k > split.partitions.size())
        throw ValidationError("speaker '" + speaker + "' has only " +
                              std::to_string(split.partitions.size() *
                                             config.partition_size) +
                              " training utterances");
    }
    if (k == 0) throw ValidationError("insufficient training data");
    train = split.training_prefix(k);
  }
  if (train.empty()) throw ValidationError("insufficient training data");

  const std::uint64_t nmf_seed = derive_seed(config.seed, "nmf", speaker, k, 0);
  const std::string started = utc_now();
  const auto system = train_system(schema, train, config, nmf_seed);
  const std::string model = system.to_json().dump() + "\n";
  write_file(flags.out, model);

  json manifest = {{"tool", "frameforge train"},
                   {"version", kVersion},
                   {"config", config.to_json()},
                   {"speaker", speaker},
                   {"training_utterances", train.size()},
                   {"partitions", k},
                   {"seeds", seeds_json(config.seed)},
                   {"nmf_seed", nmf_seed},
                   {"inputs", {{"corpus", file_sha256(corpus_path)}}}};
  manifest["digest"] = manifest_digest(manifest);
  manifest["outputs"] = {{fs::path(flags.out).filename().string(), sha256_hex(model)}};
  manifest["started"] = started;
  manifest["finished"] = utc_now();
  write_file(flags.out + ".manifest.json", manifest.dump(2) + "\n");

  if (flags.json_output)
    std::cout << json{{"model", flags.out},
                      {"training_utterances", train.size()},
                      {"skipped", system.trace.skipped},
                      {"log_likelihood", system.trace.log_likelihood}}
                     .dump()
              << '\n';
  else
    std::cerr << "trained on " << train.size() << " utterances of speaker "
              << speaker << ", model written to " << flags.out << '\n';
  return 0;
}

int cmd_decode(const CommonFlags &flags, const std::string &model_path,
               const std::string &input, bool explain,
               std::optional<double> threshold) {
  auto system = TrainedSystem::from_json(read_json_file(model_path));
  if (!flags.config.empty()) {
    const json j = read_json_file(flags.config);
    system.decode = DecodeOptions::from_json(j.contains("decode") ? j["decode"] : j);
  }
  if (threshold) system.decode.threshold = *threshold;

  Input in(input);
  std::ostringstream buffer;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in.stream(), line); ++lineno) {
    if (blank(line)) continue;
    try {
      std::vector<std::string> words;
      const auto first = line.find_first_not_of(" \t");
      if (line[first] == '{') {
        words = entry_from_json(json::parse(line)).utterance.phonemic;
      } else {
        std::istringstream ws(line);
        for (std::string w; ws >> w;) words.push_back(w);
      }
      const auto out = run_system(system, segment(words, system.granularity));
      json j = out.detail ? out.detail->to_json(explain) : frame_to_json(out.frame);
      buffer << j.dump() << '\n';
    } catch (const json::exception &e) {
      throw ParseError(lineno, std::string("malformed record: ") + e.what());
    } catch (const ParseError &) {
      throw;
    } catch (const ValidationError &e) {
      throw ParseError(lineno, e.what());
    }
  }
  Output out(flags.out);
  out.stream() << buffer.str();
  return 0;
}

// A line holds a frame, a decode result, or a corpus record (whose oracle
// frame is used).
Frame frame_of(const json &j) {
  if (j.contains("oracle_frame")) return frame_from_json(j.at("oracle_frame"));
  return frame_from_json(j);
}

std::vector<Frame> read_frames(const std::string &path) {
  Input in(path);
  std::vector<Frame> frames;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in.stream(), line); ++lineno) {
    if (blank(line)) continue;
    try {
      frames.push_back(frame_of(json::parse(line)));
    } catch (const json::exception &e) {
      throw ParseError(lineno, "'" + path + "': " + e.what());
    }
  }
  return frames;
}

int cmd_score(const CommonFlags &flags, const std::string &induced_path,
              const std::string &oracle_path) {
  const auto induced = read_frames(induced_path);
  const auto oracle = read_frames(oracle_path);
  if (induced.size() != oracle.size())
    throw ValidationError("misaligned inputs: " + std::to_string(induced.size()) +
                          " induced frames, " + std::to_string(oracle.size()) +
                          " oracle frames");
  SlotCounts total;
  for (std::size_t i = 0; i < induced.size(); ++i)
    total += score_pair(induced[i], oracle[i]);
  const Prf s = prf(total);

  Output out(flags.out);
  if (flags.json_output) {
    out.stream() << json{{"frames", induced.size()},
                         {"correct", total.correct},
                         {"induced_filled", total.induced_filled},
                         {"oracle_filled", total.oracle_filled},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f", s.f}}
                        .dump()
                 << '\n';
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "frames=%zu correct=%ld induced=%ld oracle=%ld P=%.4f R=%.4f "
                  "F=%.4f\n",
                  induced.size(), total.correct, total.induced_filled,
                  total.oracle_filled, s.precision, s.recall, s.f);
    out.stream() << buf;
  }
  return 0;
}

struct CellOutcome {
  std::string name;
  std::string status;  // "done", "reused", "failed"
  std::string error;
};

CellOutcome run_cell(const GridCell &cell, const Corpus &corpus,
                     const std::vector<std::string> &speakers,
                     const std::string &corpus_digest, const fs::path &root,
                     int jobs) {
  const fs::path dir = root / cell.name;
  json manifest = {{"tool", "frameforge experiment"},
                   {"version", kVersion},
                   {"cell", cell.name},
                   {"config", cell.config.to_json()},
                   {"config_hash", cell.config.hash()},
                   {"speakers", speakers},
                   {"seeds", seeds_json(cell.config.seed)},
                   {"inputs", {{"corpus", corpus_digest}}}};
  const std::string digest = manifest_digest(manifest);

  // Resume: reuse a cell whose manifest matches and whose outputs are intact.
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      const json old = read_json_file(manifest_path.string());
      bool intact = old.value("digest", "") == digest && old.contains("outputs");
      if (intact)
        for (const auto &[file, sha] : old["outputs"].items())
          intact = intact && fs::exists(dir / file) &&
                   file_sha256((dir / file).string()) == sha.get<std::string>();
      if (intact) return {cell.name, "reused", ""};
    } catch (const std::exception &) {
      // unreadable manifest: recompute the cell
    }
  }

  try {
    const std::string started = utc_now();
    std::ostringstream results, summary;
    write_results_header(results);
    write_summary_header(summary);
    int skipped = 0;
    for (const auto &speaker : speakers) {
      const auto curve =
          run_learning_curve(corpus, speaker, cell.config, patience_schema(), jobs);
      write_results_csv(results, curve);
      write_summary_csv(summary, curve);
      skipped += curve.skipped;
    }
    fs::create_directories(dir);
    fs::remove(manifest_path);
    write_file(dir / "results.csv", results.str());
    write_file(dir / "summary.csv", summary.str());
    manifest["digest"] = digest;
    manifest["outputs"] = {{"results.csv", sha256_hex(results.str())},
                           {"summary.csv", sha256_hex(summary.str())}};
    manifest["skipped_training_utterances"] = skipped;
    manifest["started"] = started;
    manifest["finished"] = utc_now();
    write_file(manifest_path, manifest.dump(2) + "\n");
    return {cell.name, "done", ""};
  } catch (const std::exception &e) {
    return {cell.name, "failed", e.what()};
  }
}

int cmd_experiment(const CommonFlags &flags, const std::string &corpus_path,
                   std::vector<std::string> speakers, std::optional<int> runs) {
  if (flags.config.empty()) throw ValidationError("experiment needs --config GRID");
  if (flags.out.empty()) throw ValidationError("experiment needs --out DIR");
  json grid = read_json_file(flags.config);
  if (flags.seed || runs) {
    if (!grid.contains("base")) grid["base"] = json::object();
    if (flags.seed) grid["base"]["seed"] = *flags.seed;
    if (runs) grid["base"]["runs"] = *runs;
  }
  const auto cells = expand_grid(grid);
  const auto corpus = load_corpus(corpus_path, patience_schema());
  if (speakers.empty() && grid.contains("speakers"))
    speakers = grid["speakers"].get<std::vector<std::string>>();
  if (speakers.empty())
    for (const auto &[name, entries] : corpus.speakers) speakers.push_back(name);
  for (const auto &s : speakers)
    if (!corpus.speakers.count(s))
      throw ValidationError("speaker '" + s + "' not in corpus");

  const std::string digest = file_sha256(corpus_path);
  const fs::path root(flags.out);
  fs::create_directories(root);
  std::vector<CellOutcome> outcomes;
  int failed = 0;
  for (const auto &cell : cells) {
    outcomes.push_back(run_cell(cell, corpus, speakers, digest, root, flags.jobs));
    const auto &o = outcomes.back();
    if (o.status == "failed") {
      ++failed;
      std::cerr << "cell " << o.name << " failed: " << o.error << '\n';
    } else if (!flags.json_output) {
      std::cerr << "cell " << o.name << ": " << o.status << '\n';
    }
  }

  json report = {{"cells", json::array()}, {"failed", failed}};
  for (const auto &o : outcomes) {
    json c = {{"cell", o.name}, {"status", o.status}};
    if (!o.error.empty()) c["error"] = o.error;
    report["cells"].push_back(c);
  }
  write_file(root / "report.json", report.dump(2) + "\n");
  if (flags.json_output) std::cout << report.dump() << '\n';
  if (failed) {
    std::cerr << failed << " of " << cells.size() << " cells failed:";
    for (const auto &o : outcomes)
      if (o.status == "failed") std::cerr << ' ' << o.name;
    std::cerr << '\n';
    return 1;
  }
  return 0;
}

int cmd_generate(const CommonFlags &flags, int n,
                 std::optional<std::string> speaker) {
  TemplateGrammar grammar = patience_grammar();
  if (!flags.config.empty())
    grammar = TemplateGrammar::from_json(read_json_file(flags.config));
  if (speaker) grammar.speaker = *speaker;
  if (n < 0) throw ValidationError("-n must be non-negative");
  const auto corpus =
      generate_synthetic(patience_schema(), grammar, n, flags.seed.value_or(1));
  std::ostringstream buffer;
  write_corpus(buffer, corpus);
  Output out(flags.out);
  out.stream() << buffer.str();
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"frameforge: weakly supervised semantic frame induction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonFlags flags;

  std::string seg_input;
  std::optional<std::string> seg_granularity;
  auto *seg = app.add_subcommand("segment", "Segment corpus utterances into units");
  add_common(seg, flags);
  seg->add_option("input", seg_input, "Corpus JSONL (default stdin)");
  seg->add_option("-g,--granularity", seg_granularity,
                  "word-unigram, word-bigram, phoneme-unigram or phoneme-bigram");

  std::string train_corpus, train_speaker;
  std::optional<std::size_t> train_size;
  bool train_all = false;
  auto *train = app.add_subcommand("train", "Train a model for one speaker");
  add_common(train, flags);
  train->add_option("--corpus", train_corpus, "Corpus JSONL")->required();
  train->add_option("--speaker", train_speaker, "Speaker id")->required();
  auto *size_opt = train->add_option("--training-size", train_size,
                                     "Train on the first N split utterances");
  train->add_flag("--all-utterances", train_all,
                  "Train on every utterance of the speaker")
      ->excludes(size_opt);

  std::string dec_model, dec_input;
  bool dec_explain = false;
  std::optional<double> dec_threshold;
  auto *dec = app.add_subcommand("decode", "Decode commands to frames");
  add_common(dec, flags);
  dec->add_option("--model", dec_model, "Model JSON from train")->required();
  dec->add_option("input", dec_input,
                  "Commands, one per line: phonemic words or corpus records "
                  "(default stdin)");
  dec->add_flag("--explain", dec_explain, "Add state path and slot totals");
  dec->add_option("--threshold", dec_threshold, "Slot fill threshold");

  std::string score_induced, score_oracle;
  auto *score = app.add_subcommand("score", "Slot precision, recall and F");
  add_common(score, flags);
  score->add_option("induced", score_induced, "Induced frames JSONL")->required();
  score->add_option("oracle", score_oracle,
                    "Oracle frames or corpus JSONL")->required();

  std::string exp_corpus;
  std::vector<std::string> exp_speakers;
  std::optional<int> exp_runs;
  auto *exp = app.add_subcommand("experiment", "Run a learning-curve grid");
  add_common(exp, flags);
  exp->add_option("--corpus", exp_corpus, "Corpus JSONL")->required();
  exp->add_option("--speaker", exp_speakers, "Restrict to these speakers");
  exp->add_option("--runs", exp_runs, "Runs per curve point")
      ->check(CLI::PositiveNumber);

  int gen_n = 175;
  std::optional<std::string> gen_speaker;
  auto *gen = app.add_subcommand("generate", "Generate a synthetic corpus");
  add_common(gen, flags);
  gen->add_option("-n,--count", gen_n, "Number of utterances");
  gen->add_option("--speaker", gen_speaker, "Speaker id");

  CLI11_PARSE(app, argc, argv);
  bool jobs_given = false;
  for (auto *sub : app.get_subcommands())
    jobs_given |= sub->count("--jobs") > 0;
  if (const char *env = std::getenv("FRAMEFORGE_JOBS"); env && !jobs_given) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(env, &used);
    } catch (const std::exception &) {
    }
    if (used != std::string_view(env).size() || value < 1) {
      std::cerr << "frameforge: FRAMEFORGE_JOBS must be a positive integer\n";
      return 1;
    }
    flags.jobs = value;
  }

  try {
    if (*seg) return cmd_segment(flags, seg_input, seg_granularity);
    if (*train)
      return cmd_train(flags, train_corpus, train_speaker, train_size, train_all);
    if (*dec) return cmd_decode(flags, dec_model, dec_input, dec_explain, dec_threshold);
    if (*score) return cmd_score(flags, score_induced, score_oracle);
    if (*exp) return cmd_experiment(flags, exp_corpus, exp_speakers, exp_runs);
    if (*gen) return cmd_generate(flags, gen_n, gen_speaker);
  } catch (const std::exception &e) {
    std::cerr << "frameforge: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
