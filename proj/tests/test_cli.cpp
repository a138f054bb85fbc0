#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mihst/model.hpp"
#include "mihst/selection.hpp"
#include "support.hpp"

using namespace mihst;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(const testing::TempDir& dir, const std::string& args) {
  const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = std::string(MIHST_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(o);
  r.err = testing::read_file(e);
  return r;
}

const char* kGenConfig =
    "train_admissions = 200\ndev_admissions = 80\nlabels = 4\nlab_features = 4\nnote_vocab = 64\nseed = 5\n";
const char* kRunConfig =
    "text_dim = 16\ntab_dim = 8\nencoder_heads = 2\nfusion_heads = 2\nfusion_layers = 1\nchunk_tokens = 24\n"
    "max_chunks = 4\nnote_vocab = 64\nepochs = 2\nseed = 3\nselection_scale = 0.02\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  testing::TempDir dir("cli_usage");
  testing::write_file(dir / "x.jsonl", "");
  Run r = run(dir, "eval --data " + (dir / "x.jsonl").string() + " --ckpt c --threshold 1.5 --out m.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("threshold must be in (0,1)") != std::string::npos);

  r = run(dir, "frobnicate");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("mihst: error:", 0) == 0);
  CHECK(r.out.find("gen") != std::string::npos);

  r = run(dir, "train --data only.jsonl");
  CHECK(r.code == 2);

  r = run(dir, "");
  CHECK(r.code == 2);

  r = run(dir, "--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("select-features") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1") {
  testing::TempDir dir("cli_runtime");
  Run r = run(dir, "eval --data " + (dir / "missing.jsonl").string() + " --ckpt " + (dir / "missing.ckpt").string() +
                       " --threshold 0.5 --out " + (dir / "m.json").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("mihst: error:") != std::string::npos);
  CHECK(r.err.find("missing") != std::string::npos);

  testing::write_file(dir / "bad.cfg", "labels = two\n");
  r = run(dir, "gen --config " + (dir / "bad.cfg").string() + " --out " + (dir / "g").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("full pipeline") {
  testing::TempDir dir("cli_pipeline");
  testing::write_file(dir / "gen.cfg", kGenConfig);
  testing::write_file(dir / "run.cfg", kRunConfig);
  const auto data = dir / "data";

  Run r = run(dir, "gen --config " + (dir / "gen.cfg").string() + " --out " + data.string());
  REQUIRE(r.code == 0);
  const std::string train_bytes = testing::read_file(data / "train.jsonl");
  r = run(dir, "gen --config " + (dir / "gen.cfg").string() + " --out " + (dir / "data2").string());
  REQUIRE(r.code == 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "labels.txt", "manifest.json"})
    CHECK(testing::read_file(data / f) == testing::read_file(dir / "data2" / f));
  CHECK(load_admissions(data / "train.jsonl").size() == 200);

  r = run(dir, "select-features --train " + (data / "train.jsonl").string() + " --dev " +
                   (data / "dev.jsonl").string() + " --labels " + (data / "labels.txt").string() + " --config " +
                   (dir / "run.cfg").string() + " --out " + (dir / "selection.json").string());
  REQUIRE(r.code == 0);
  const auto rep = FeatureSelectionReport::load(dir / "selection.json");
  const auto feats = read_feature_list(dir / "features.txt");
  CHECK(feats == rep.final_features);
  CHECK_FALSE(feats.empty());

  r = run(dir, "train --data " + (data / "train.jsonl").string() + " --labels " + (data / "labels.txt").string() +
                   " --features " + (dir / "features.txt").string() + " --config " + (dir / "run.cfg").string() +
                   " --out " + (dir / "model.ckpt").string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch 1 loss") != std::string::npos);
  CHECK(r.out.find("epoch 2 loss") != std::string::npos);
  const auto ck = Checkpoint::load(dir / "model.ckpt");
  CHECK(ck.prep.lab_features == feats);
  CHECK(ck.model.cfg.labels == 4);

  const std::string eval = "eval --data " + (data / "dev.jsonl").string() + " --ckpt " +
                           (dir / "model.ckpt").string() + " --threshold 0.5 --out ";
  r = run(dir, eval + (dir / "m1.json").string() + " --predictions " + (dir / "pred").string());
  REQUIRE(r.code == 0);
  const auto metrics = nlohmann::json::parse(testing::read_file(dir / "m1.json"));
  const double f1 = metrics.at("micro_f1").get<double>();
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 100.0);
  char expect[64];
  std::snprintf(expect, sizeof expect, "micro_f1 %.4f", f1);
  CHECK(r.out.find(expect) != std::string::npos);
  const std::string csv = testing::read_file(dir / "pred" / "A000201.csv");
  CHECK(csv.rfind("time,label_0,label_1,label_2,label_3\n", 0) == 0);

  r = run(dir, eval + (dir / "m2.json").string());
  REQUIRE(r.code == 0);
  CHECK(testing::read_file(dir / "m1.json") == testing::read_file(dir / "m2.json"));

  r = run(dir, eval + (dir / "m3.json").string() + " --cutoff 1000");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(testing::read_file(dir / "m3.json")).at("micro_f1").get<double>() == f1);
  CHECK(train_bytes == testing::read_file(data / "train.jsonl"));
}
