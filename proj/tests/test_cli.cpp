// tests/test_cli.cpp

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


// Drives the frameforge executable end to end.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "frameforge/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace frameforge;

namespace {

const fs::path kWork = FRAMEFORGE_TEST_DIR;

struct Result {
  int status = -1;
  std::string out;
};

// Runs the tool with `args` (shell syntax); stderr goes to <work>/stderr.txt.
Result run(const std::string &args) {
  const std::string cmd = std::string("\"") + FRAMEFORGE_BIN + "\" " + args +
                          " 2>\"" + (kWork / "stderr.txt").string() + "\"";
  Result r;
  FILE *pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string last_stderr() { return slurp(kWork / "stderr.txt"); }

void spit(const fs::path &p, const std::string &text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string q(const fs::path &p) { return "\"" + p.string() + "\""; }

const char *kTable1 =
    R"({"id":"t1","speaker":"s","ordinal":1,"ortho":"zwarte drie op rode vier",)"
    R"("phon":["zwArt@","dri","Op","roj@","vir"],)"
    R"("auto_frame":{"type":"movecard","fills":{"FS":["s"],"FV":["3"],"TS":["h"],"TV":["4"]}},)"
    R"("oracle_frame":{"type":"movecard","fills":{"FS":["s","c"],"FV":["3"],"TS":["h","d"],"TV":["4"]}}})";

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Workspace, "generate, segment and score") {
  const auto corpus = kWork / "corpus.jsonl";
  REQUIRE(run("generate -n 40 --seed 3 --out " + q(corpus)).status == 0);
  const auto again = run("generate -n 40 --seed 3");
  CHECK(again.status == 0);
  CHECK(again.out == slurp(corpus));
  CHECK(run("generate -n 0").status != 0);

  spit(kWork / "t1.jsonl", std::string(kTable1) + "\n");
  auto seg = run("segment " + q(kWork / "t1.jsonl") + " -g word-bigram");
  CHECK(seg.status == 0);
  CHECK(seg.out == "+_zwArt@ zwArt@_dri dri_Op Op_roj@ roj@_vir vir_+\n");
  seg = run("segment " + q(kWork / "t1.jsonl") + " --json -g phoneme-unigram");
  CHECK(json::parse(seg.out)["units"].size() == 18);

  spit(kWork / "empty.jsonl", "");
  seg = run("segment " + q(kWork / "empty.jsonl"));
  CHECK(seg.status == 0);
  CHECK(seg.out.empty());

  spit(kWork / "bad.jsonl", std::string(kTable1) + "\n{\"id\": oops\n");
  seg = run("segment " + q(kWork / "bad.jsonl"));
  CHECK(seg.status != 0);
  CHECK(last_stderr().find("line 2") != std::string::npos);

  // Scoring: identical files, the ambiguity-set example and misalignment.
  auto score = run("score --json " + q(corpus) + " " + q(corpus));
  CHECK(score.status == 0);
  CHECK(json::parse(score.out)["f"] == 1.0);

  spit(kWork / "induced.jsonl",
       R"({"type":"movecard","fills":{"FS":["c"],"FV":["11"],"TS":["h"],"TV":["12"]}})"
       "\n");
  spit(kWork / "oracle.jsonl",
       R"({"type":"movecard","fills":{"FS":["c"],"FV":["11"],"TS":["h","d"],"TV":["12"]}})"
       "\n");
  score = run("score --json " + q(kWork / "induced.jsonl") + " " + q(kWork / "oracle.jsonl"));
  CHECK(score.status == 0);
  const auto j = json::parse(score.out);
  CHECK(j["correct"] == 4);
  CHECK(j["induced_filled"] == 4);
  CHECK(j["oracle_filled"] == 4);
  CHECK(run("score " + q(kWork / "induced.jsonl") + " " + q(corpus)).status != 0);
}

TEST_CASE_FIXTURE(Workspace, "train and decode") {
  const auto corpus = kWork / "corpus.jsonl";
  REQUIRE(run("generate -n 70 --seed 5 --speaker spk --out " + q(corpus)).status == 0);
  spit(kWork / "config.json",
       R"({"sharing":{"fillers":"slot-shared","t_sharing":true,"e_sharing_nmf":true,"e_sharing_hmm":true},"iterations":5})");
  const std::string common = "train --corpus " + q(corpus) + " --speaker spk --config " +
                             q(kWork / "config.json") + " --seed 4 --out ";
  REQUIRE(run(common + q(kWork / "m1.json")).status == 0);
  REQUIRE(run(common + q(kWork / "m2.json")).status == 0);
  CHECK(slurp(kWork / "m1.json") == slurp(kWork / "m2.json"));
  const auto manifest = json::parse(slurp(kWork / "m1.json.manifest.json"));
  CHECK(manifest["config"]["seed"] == 4);
  CHECK(manifest["inputs"]["corpus"].get<std::string>().size() == 64);
  CHECK(manifest["partitions"].get<int>() >= 1);
  CHECK(manifest["training_utterances"] == 25 * manifest["partitions"].get<int>());

  CHECK(run("train --corpus " + q(corpus) + " --speaker nobody --out " +
            q(kWork / "m3.json")).status != 0);
  spit(kWork / "badconfig.json", R"({"iteratons": 3})");
  CHECK(run("train --corpus " + q(corpus) + " --speaker spk --config " +
            q(kWork / "badconfig.json") + " --out " + q(kWork / "m3.json")).status != 0);

  spit(kWork / "commands.txt", "twe Op dri\nharten vEif\n\n" + slurp(corpus).substr(0, slurp(corpus).find('\n')) + "\n");
  auto dec = run("decode --model " + q(kWork / "m1.json") + " " + q(kWork / "commands.txt"));
  CHECK(dec.status == 0);
  std::istringstream lines(dec.out);
  int count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    const auto j = json::parse(line);
    CHECK(j.contains("type"));
    CHECK(!j.contains("path"));
  }
  CHECK(count == 3);
  dec = run("decode --explain --model " + q(kWork / "m1.json") + " " + q(kWork / "commands.txt"));
  CHECK(dec.status == 0);
  const auto first = json::parse(dec.out.substr(0, dec.out.find('\n')));
  CHECK(first["path"].size() == 3);
  CHECK(first.contains("totals"));
  CHECK(run("decode --model " + q(kWork / "missing.json")).status != 0);
}

TEST_CASE_FIXTURE(Workspace, "experiment grid, resume and failures") {
  const auto corpus = kWork / "corpus.jsonl";
  REQUIRE(run("generate -n 80 --seed 9 --speaker spk --out " + q(corpus)).status == 0);
  const json base = {{"iterations", 3}, {"runs", 2}, {"max_partitions", 2}};
  spit(kWork / "grid.json",
       json{{"base", base},
            {"fillers", {"slot-shared"}},
            {"t_sharing", {true}},
            {"e_sharing_nmf", {true}},
            {"e_sharing_hmm", {false, true}}}
           .dump());
  const auto out = kWork / "exp";
  const std::string cmd = "experiment --corpus " + q(corpus) + " --config " +
                          q(kWork / "grid.json") + " --seed 2 --jobs 2 --out " + q(out);
  REQUIRE(run(cmd).status == 0);
  const std::string cell = "word-unigram_hmm_fillers-slot-shared_t1_enmf1_ehmm1";
  const auto results = slurp(out / cell / "results.csv");
  const auto manifest = json::parse(slurp(out / cell / "manifest.json"));
  CHECK(manifest["digest"].get<std::string>().size() == 64);

  // The cell equals an in-process learning curve with the same config.
  auto config = ExperimentConfig::from_json(base);
  config.seed = 2;
  config.sharing = {FillerMode::kSlotShared, true, true, true};
  const auto parsed = load_corpus(corpus);
  const auto curve = run_learning_curve(parsed, "spk", config);
  std::ostringstream expected;
  write_results_header(expected);
  write_results_csv(expected, curve);
  CHECK(results == expected.str());

  // Rerun: cells are reused and outputs stay byte-identical.
  const auto rerun = run(cmd + " --json");
  CHECK(rerun.status == 0);
  for (const auto &c : json::parse(rerun.out)["cells"]) CHECK(c["status"] == "reused");
  CHECK(slurp(out / cell / "results.csv") == results);

  // A damaged output is recomputed to the same bytes.
  spit(out / cell / "results.csv", "garbage");
  REQUIRE(run(cmd).status == 0);
  CHECK(slurp(out / cell / "results.csv") == results);

  // A cell that cannot run is reported and the exit status is nonzero.
  spit(kWork / "grid2.json",
       json{{"base", {{"iterations", 2}, {"runs", 1}, {"partition_size", 500}}},
            {"e_sharing_hmm", {false}}}
           .dump());
  const auto failed = run("experiment --corpus " + q(corpus) + " --config " +
                          q(kWork / "grid2.json") + " --out " + q(kWork / "exp2"));
  CHECK(failed.status != 0);
  CHECK(last_stderr().find("failed") != std::string::npos);
  const auto report = json::parse(slurp(kWork / "exp2" / "report.json"));
  CHECK(report["failed"] == 1);
}

TEST_CASE_FIXTURE(Workspace, "jobs from the environment") {
  const auto corpus = kWork / "corpus.jsonl";
  REQUIRE(run("generate -n 10 --out " + q(corpus)).status == 0);
  CHECK(run("segment " + q(corpus) + " --jobs 0").status != 0);
  // The variable is read: an invalid value is rejected like the flag.
  auto with_env = [&](const char *value) {
    const std::string cmd = std::string("env FRAMEFORGE_JOBS=") + value + " \"" +
                            FRAMEFORGE_BIN + "\" segment " + q(corpus) +
                            " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  CHECK(with_env("0") != 0);
  CHECK(with_env("2") == 0);
}
