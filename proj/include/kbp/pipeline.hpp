#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kbp/extractor.hpp"
#include "kbp/kbv.hpp"
#include "kbp/kg.hpp"

namespace kbp {

struct PipelineConfig {
  std::string kb_path;
  std::string corpus_path;
  std::string truth_path;
  std::string workdir;
  std::string external_quads;  // bypass the built-in extractor if set

  int window = 20;
  double na_ratio = 1.0;
  REConfig re;
  double min_confidence = 0.1;
  KBVConfig kbv;
  double stacker_l1 = 0.001;
  std::uint64_t seed = 1;

  bool force = false;
  std::vector<std::string> stages;  // empty = all, in pipeline order
  // ablation variants handled by restack/eval
  std::vector<std::string> feature_subsets = {"ie", "ie+kbv", "ie+kbvie", "all"};
};

// key=value lines, '#' comments
PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& config, const std::string& path);

struct StageRecord {
  std::string name;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  double seconds = 0.0;
  bool skipped = false;
};

struct RunManifest {
  std::vector<StageRecord> stages;
};

// FNV-1a-64 over the file bytes, hex
std::string file_digest(const std::string& path);

// Runs supervise, train-re, extract, train-kbv-kb, train-kbv-ie, score,
// restack, eval in order; a stage is skipped when its recorded input and
// output digests still match, unless force. Writes the manifest and the
// resolved config into the workdir.
RunManifest run_pipeline(const PipelineConfig& config);

// workdir layout
std::string contexts_path(const PipelineConfig&);
std::string re_model_path(const PipelineConfig&);
std::string q_ie_path(const PipelineConfig&);
std::string kbv_model_path(const PipelineConfig&, const std::string& source);
std::string score_table_path(const PipelineConfig&);
std::string q_final_path(const PipelineConfig&, const std::string& features);

}  // namespace kbp
