// mihst: generate synthetic admissions, select lab features, train, evaluate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mihst/error.hpp"
#include "mihst/generator.hpp"
#include "mihst/kv_config.hpp"
#include "mihst/model.hpp"
#include "mihst/selection.hpp"
#include "mihst/training.hpp"

namespace fs = std::filesystem;
using namespace mihst;

namespace {

struct Args {
  std::string config, out, train, dev, labels, data, features, ckpt, predictions, features_out;
  double threshold = 0.5;
  std::optional<double> cutoff;
};

int cmd_gen(const Args& a) {
  const GeneratorConfig cfg = GeneratorConfig::load(a.config);
  const GeneratedData data = generate(cfg);
  write_generated(data, a.out);
  std::cout << "wrote " << data.train.size() << " train, " << data.dev.size() << " dev, "
            << data.test.size() << " test admissions to " << a.out << '\n';
  return 0;
}

int cmd_select(const Args& a) {
  const RunConfig rc = a.config.empty() ? RunConfig::from_kv(KvConfig{}) : RunConfig::load(a.config);
  const auto train = load_admissions(a.train);
  const auto dev = load_admissions(a.dev);
  const auto labels = LabelVocabulary::load(a.labels);
  const auto rep = select_features(train, dev, labels, rc.selection);
  rep.save(a.out);
  const fs::path list = a.features_out.empty() ? fs::path(a.out).parent_path() / "features.txt"
                                               : fs::path(a.features_out);
  write_feature_list(list, rep.final_features);
  std::cout << rep.final_features.size() << " features selected; list in " << list.string() << '\n';
  return 0;
}

int cmd_train(const Args& a) {
  RunConfig rc = RunConfig::load(a.config);
  const auto data = load_admissions(a.data);
  auto labels = LabelVocabulary::load(a.labels);
  auto features = read_feature_list(a.features);
  rc.model.labels = labels.size();
  Checkpoint ck;
  ck.prep = Preprocessor::fit(std::move(labels), std::move(features), data);
  ck.model = MihstModel::init(rc.model, ck.prep.names.size(), rc.train.seed);
  train(ck.model, ck.prep, data, rc.train, [](std::size_t epoch, double loss) {
    std::printf("epoch %zu loss %.6f\n", epoch, loss);
    std::fflush(stdout);
  });
  ck.save(a.out);
  return 0;
}

int cmd_eval(const Args& a) {
  const Checkpoint ck = Checkpoint::load(a.ckpt);
  const auto data = load_admissions(a.data);
  const EvalReport rep = evaluate(ck.model, ck.prep, data, a.threshold, a.cutoff);
  {
    std::ofstream out(a.out);
    if (!out) throw IoError("cannot write " + a.out);
    out << rep.to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed for " + a.out);
  }
  if (!a.predictions.empty()) {
    std::error_code ec;
    fs::create_directories(a.predictions, ec);
    if (ec) throw IoError("cannot create directory " + a.predictions);
    for (const auto& adm : data) {
      const fs::path p = fs::path(a.predictions) / (adm.admission_id + ".csv");
      std::ofstream out(p);
      if (!out) throw IoError("cannot write " + p.string());
      write_prediction_csv(out, ck.model.forward(ck.prep.prepare(adm, ck.model.cfg)));
    }
  }
  std::printf("micro_f1 %.4f\n", rep.micro_f1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal early ICD code prediction on synthetic admissions", "mihst"};
  app.require_subcommand(1);
  Args a;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--config", a.config, "Generator config (key = value)")->required();
  gen->add_option("--out", a.out, "Output directory")->required();

  auto* sel = app.add_subcommand("select-features", "Three-phase lab feature selection");
  sel->add_option("--train", a.train, "Training admissions (JSONL)")->required();
  sel->add_option("--dev", a.dev, "Dev admissions (JSONL)")->required();
  sel->add_option("--labels", a.labels, "Label vocabulary")->required();
  sel->add_option("--out", a.out, "Report JSON")->required();
  sel->add_option("--config", a.config, "Run config (key = value)");
  sel->add_option("--features-out", a.features_out, "Feature list (default: features.txt next to the report)");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", a.data, "Training admissions (JSONL)")->required();
  tr->add_option("--labels", a.labels, "Label vocabulary")->required();
  tr->add_option("--features", a.features, "Lab feature list")->required();
  tr->add_option("--config", a.config, "Run config (key = value)")->required();
  tr->add_option("--out", a.out, "Checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", a.data, "Admissions (JSONL)")->required();
  ev->add_option("--ckpt", a.ckpt, "Checkpoint")->required();
  ev->add_option("--threshold", a.threshold, "Decision threshold in (0,1)")->required();
  ev->add_option("--cutoff", a.cutoff, "Only use events up to this many hours");
  ev->add_option("--out", a.out, "Metrics JSON")->required();
  ev->add_option("--predictions", a.predictions, "Write per-admission prediction CSVs here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "mihst: error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    std::cout << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*ev) {
      if (!(a.threshold > 0.0 && a.threshold < 1.0)) throw ConfigError("threshold must be in (0,1)");
      if (a.cutoff && !(*a.cutoff >= 0.0)) throw ConfigError("cutoff must be >= 0");
      return cmd_eval(a);
    }
    if (*gen) return cmd_gen(a);
    if (*sel) return cmd_select(a);
    if (*tr) return cmd_train(a);
  } catch (const ConfigError& e) {
    std::cerr << "mihst: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mihst: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
