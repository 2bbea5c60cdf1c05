#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "kbp/pipeline.hpp"
#include "kbp/synth.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  kbp::PipelineConfig overrides;
  bool has_kb = false, has_corpus = false, has_truth = false, has_workdir = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "key=value config file");
  cmd->add_option("--kb", opts.overrides.kb_path, "curated KB quad file")
      ->each([&](const std::string&) { opts.has_kb = true; });
  cmd->add_option("--corpus", opts.overrides.corpus_path, "corpus (jsonl or text)")
      ->each([&](const std::string&) { opts.has_corpus = true; });
  cmd->add_option("--truth", opts.overrides.truth_path, "ground-truth triple file")
      ->each([&](const std::string&) { opts.has_truth = true; });
  cmd->add_option("--workdir", opts.overrides.workdir, "working directory")
      ->each([&](const std::string&) { opts.has_workdir = true; });
}

kbp::PipelineConfig resolve(const CommonOpts& opts) {
  kbp::PipelineConfig c;
  if (!opts.config_path.empty()) c = kbp::load_pipeline_config(opts.config_path);
  if (opts.has_kb) c.kb_path = opts.overrides.kb_path;
  if (opts.has_corpus) c.corpus_path = opts.overrides.corpus_path;
  if (opts.has_truth) c.truth_path = opts.overrides.truth_path;
  if (opts.has_workdir) c.workdir = opts.overrides.workdir;
  return c;
}

void print_manifest(const kbp::RunManifest& manifest) {
  for (const auto& stage : manifest.stages) {
    std::printf("%-14s %s (%.2fs)\n", stage.name.c_str(),
                stage.skipped ? "skipped" : "done", stage.seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge base population with relation extraction, "
               "KB validation, and confidence re-estimation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  kbp::SynthConfig synth_cfg;
  std::string synth_out = "synth";
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--entities", synth_cfg.entities);
  synth->add_option("--relations", synth_cfg.relations);
  synth->add_option("--noise", synth_cfg.noise, "false fraction of assertions");
  synth->add_option("--kb-fraction", synth_cfg.kb_fraction);
  synth->add_option("--triples-per-entity", synth_cfg.triples_per_entity);
  synth->add_option("--seed", synth_cfg.seed);

  // run + per-stage subcommands
  CommonOpts opts;
  std::uint64_t seed = 1;
  bool force = false;
  double min_confidence = 0.1;
  std::string external_quads;
  std::string kbv_source = "kb";
  double l1 = 0.001;
  std::string features;
  std::vector<std::string> only_stages;
  kbp::KBVConfig kbv_defaults;

  auto* run = app.add_subcommand("run", "run the full pipeline");
  add_common(run, opts);
  run->add_option("--seed", seed);
  run->add_flag("--force", force, "rerun stages even when digests match");
  run->add_option("--stages", only_stages, "run only these stages");
  run->add_option("--min-confidence", min_confidence);
  run->add_option("--external-quads", external_quads,
                  "use this quad file instead of the built-in extractor");

  auto* supervise = app.add_subcommand("supervise", "build the context index");
  auto* train_re = app.add_subcommand("train-re", "train the relation extractor");
  auto* extract = app.add_subcommand("extract", "emit Q_IE");
  auto* train_kbv = app.add_subcommand("train-kbv", "train a KB validation model");
  auto* score = app.add_subcommand("score", "apply KBV models to Q_IE");
  auto* restack = app.add_subcommand("restack", "train the re-estimator, emit Q_final");
  auto* eval = app.add_subcommand("eval", "PR curves, ablation, buckets");
  for (CLI::App* cmd : {supervise, train_re, extract, train_kbv, score, restack, eval}) {
    add_common(cmd, opts);
    cmd->add_option("--seed", seed);
    cmd->add_flag("--force", force);
  }
  extract->add_option("--min-confidence", min_confidence);
  extract->add_option("--external-quads", external_quads);
  train_kbv->add_option("--source", kbv_source, "kb or ie")
      ->check(CLI::IsMember({"kb", "ie"}));
  train_kbv->add_option("--dim", kbv_defaults.dim);
  train_kbv->add_option("--epochs", kbv_defaults.epochs);
  train_kbv->add_option("--neg", kbv_defaults.negatives);
  train_kbv->add_option("--min-count", kbv_defaults.min_count);
  restack->add_option("--l1", l1);
  restack->add_option("--features", features, "ie | ie+kbv | ie+kbvie | all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      kbp::SynthData data = kbp::generate_synth(synth_cfg);
      kbp::write_synth(data, synth_out);
      std::printf("truth=%zu kb_train=%zu docs=%zu -> %s\n",
                  data.truth.quads().size(), data.kb_train.quads().size(),
                  data.corpus.docs.size(), synth_out.c_str());
      return 0;
    }

    kbp::PipelineConfig c = resolve(opts);
    c.seed = seed;
    c.force = force;
    c.min_confidence = min_confidence;
    c.external_quads = external_quads;
    if (run->parsed()) {
      c.stages = only_stages;
    } else if (supervise->parsed()) {
      c.stages = {"supervise"};
    } else if (train_re->parsed()) {
      c.stages = {"train-re"};
    } else if (extract->parsed()) {
      c.stages = {"extract"};
    } else if (train_kbv->parsed()) {
      c.kbv = kbv_defaults;
      c.stages = {kbv_source == "kb" ? "train-kbv-kb" : "train-kbv-ie"};
    } else if (score->parsed()) {
      c.stages = {"score"};
    } else if (restack->parsed()) {
      c.stacker_l1 = l1;
      if (!features.empty()) c.feature_subsets = {features};
      c.stages = {"restack"};
    } else if (eval->parsed()) {
      c.stages = {"eval"};
    }
    print_manifest(kbp::run_pipeline(c));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
