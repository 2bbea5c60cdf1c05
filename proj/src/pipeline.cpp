#include "kbp/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "kbp/eval.hpp"
#include "kbp/stacker.hpp"
#include "kbp/text.hpp"

namespace fs = std::filesystem;

namespace kbp {

std::string contexts_path(const PipelineConfig& c) {
  return c.workdir + "/contexts/contexts.tsv";
}
std::string re_model_path(const PipelineConfig& c) {
  return c.workdir + "/models/re_model.txt";
}
std::string q_ie_path(const PipelineConfig& c) { return c.workdir + "/quads/q_ie.tsv"; }
std::string kbv_model_path(const PipelineConfig& c, const std::string& source) {
  return c.workdir + "/models/kbv_" + source + ".txt";
}
std::string score_table_path(const PipelineConfig& c) {
  return c.workdir + "/quads/scored.tsv";
}
std::string q_final_path(const PipelineConfig& c, const std::string& features) {
  if (features == "all") return c.workdir + "/quads/q_final.tsv";
  return c.workdir + "/quads/q_final_" + features + ".tsv";
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot digest missing file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  PipelineConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "kb") c.kb_path = val;
    else if (key == "corpus") c.corpus_path = val;
    else if (key == "truth") c.truth_path = val;
    else if (key == "workdir") c.workdir = val;
    else if (key == "external_quads") c.external_quads = val;
    else if (key == "window") c.window = std::stoi(val);
    else if (key == "na_ratio") c.na_ratio = std::stod(val);
    else if (key == "re_hash_bits") c.re.hash_bits = std::stoi(val);
    else if (key == "re_lr") c.re.learning_rate = std::stod(val);
    else if (key == "re_epochs") c.re.epochs = std::stoi(val);
    else if (key == "re_l2") c.re.l2 = std::stod(val);
    else if (key == "min_confidence") c.min_confidence = std::stod(val);
    else if (key == "kbv_dim") c.kbv.dim = std::stoi(val);
    else if (key == "kbv_lr") c.kbv.learning_rate = std::stod(val);
    else if (key == "kbv_epochs") c.kbv.epochs = std::stoi(val);
    else if (key == "kbv_negatives") c.kbv.negatives = std::stoi(val);
    else if (key == "kbv_min_count") c.kbv.min_count = std::stoi(val);
    else if (key == "stacker_l1") c.stacker_l1 = std::stod(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else throw std::runtime_error(path + ": unknown key '" + key + "'");
  }
  return c;
}

void save_pipeline_config(const PipelineConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "kb=" << c.kb_path << "\ncorpus=" << c.corpus_path
      << "\ntruth=" << c.truth_path << "\nworkdir=" << c.workdir << '\n';
  if (!c.external_quads.empty()) out << "external_quads=" << c.external_quads << '\n';
  out << "window=" << c.window << "\nna_ratio=" << num(c.na_ratio)
      << "\nre_hash_bits=" << c.re.hash_bits << "\nre_lr=" << num(c.re.learning_rate)
      << "\nre_epochs=" << c.re.epochs << "\nre_l2=" << num(c.re.l2)
      << "\nmin_confidence=" << num(c.min_confidence)
      << "\nkbv_dim=" << c.kbv.dim << "\nkbv_lr=" << num(c.kbv.learning_rate)
      << "\nkbv_epochs=" << c.kbv.epochs << "\nkbv_negatives=" << c.kbv.negatives
      << "\nkbv_min_count=" << c.kbv.min_count
      << "\nstacker_l1=" << num(c.stacker_l1) << "\nseed=" << c.seed << '\n';
}

namespace {

RunManifest load_manifest(const std::string& path) {
  RunManifest m;
  std::ifstream in(path);
  if (!in) return m;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) return m;
  for (const auto& s : j["stages"]) {
    StageRecord rec;
    rec.name = s.value("name", "");
    for (auto& [k, v] : s["inputs"].items()) rec.inputs[k] = v.get<std::string>();
    for (auto& [k, v] : s["outputs"].items()) rec.outputs[k] = v.get<std::string>();
    rec.seconds = s.value("seconds", 0.0);
    rec.skipped = s.value("skipped", false);
    m.stages.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["stages"] = nlohmann::json::array();
  for (const StageRecord& rec : m.stages) {
    nlohmann::json s;
    s["name"] = rec.name;
    s["inputs"] = rec.inputs;
    s["outputs"] = rec.outputs;
    s["seconds"] = rec.seconds;
    s["skipped"] = rec.skipped;
    j["stages"].push_back(std::move(s));
  }
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

struct Stage {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::function<void()> body;
};

std::vector<ScoredKey> load_scored_keys(const std::string& path) {
  KnowledgeGraph kg = load_quads(path);
  std::vector<ScoredKey> out;
  for (const Quad& q : kg.quads())
    out.push_back({{kg.entities().label(q.triple.subject),
                    kg.relations().label(q.triple.relation),
                    kg.entities().label(q.triple.object)},
                   q.confidence});
  return out;
}

std::set<TripleKey> triple_keys(const KnowledgeGraph& kg) {
  std::set<TripleKey> out;
  for (const Quad& q : kg.quads())
    out.insert({kg.entities().label(q.triple.subject),
                kg.relations().label(q.triple.relation),
                kg.entities().label(q.triple.object)});
  return out;
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& user_config) {
  PipelineConfig c = user_config;
  // single global seed fanned out per stage
  c.re.seed = c.seed + 11;
  std::uint64_t na_seed = c.seed + 55;
  KBVConfig kbv_kb = c.kbv;
  kbv_kb.seed = c.seed + 22;
  KBVConfig kbv_ie = c.kbv;
  kbv_ie.seed = c.seed + 33;
  std::uint64_t stacker_seed = c.seed + 44;

  for (const char* sub : {"", "/contexts", "/models", "/quads", "/eval"})
    fs::create_directories(c.workdir + sub);
  save_pipeline_config(c, c.workdir + "/config.resolved");

  std::vector<Stage> stages;

  stages.push_back(Stage{
      "supervise",
      {c.kb_path, c.corpus_path},
      {contexts_path(c)},
      [&] {
        KnowledgeGraph kb = load_quads(c.kb_path);
        Corpus corpus = read_corpus(c.corpus_path);
        Gazetteer gaz(kb.entities());
        ContextIndex index = build_context_index(corpus, gaz, c.window);
        dump_contexts(index, kb.entities(), contexts_path(c));
      }});

  stages.push_back(Stage{
      "train-re",
      {contexts_path(c), c.kb_path},
      {re_model_path(c)},
      [&] {
        KnowledgeGraph kb = load_quads(c.kb_path);
        Vocab corpus_entities;
        ContextIndex index = load_contexts(contexts_path(c), corpus_entities);
        auto bags = label_bags(index, kb, corpus_entities, c.na_ratio, na_seed);
        std::vector<std::string> rels;
        for (std::size_t r = 0; r < kb.relations().size(); ++r)
          rels.push_back(kb.relations().label(static_cast<int>(r)));
        RETrainResult result = train_re(bags, rels, c.re);
        result.model.save(re_model_path(c));
      }});

  if (c.external_quads.empty()) {
    stages.push_back(Stage{
        "extract",
        {contexts_path(c), re_model_path(c)},
        {q_ie_path(c)},
        [&] {
          Vocab corpus_entities;
          ContextIndex index = load_contexts(contexts_path(c), corpus_entities);
          REModel model = REModel::load(re_model_path(c));
          KnowledgeGraph q_ie =
              extract(model, index, corpus_entities, c.min_confidence);
          save_quads(q_ie, q_ie_path(c));
        }});
  } else {
    stages.push_back(Stage{
        "extract",
        {c.external_quads},
        {q_ie_path(c)},
        [&] {
          KnowledgeGraph q_ie = load_quads(c.external_quads);
          save_quads(q_ie, q_ie_path(c));
        }});
  }

  stages.push_back(Stage{
      "train-kbv-kb",
      {c.kb_path},
      {kbv_model_path(c, "kb")},
      [&] {
        KnowledgeGraph kb = load_quads(c.kb_path);
        KBVTrainResult result = train_kbv(kb, kbv_kb);
        result.model.save(kbv_model_path(c, "kb"));
      }});

  stages.push_back(Stage{
      "train-kbv-ie",
      {q_ie_path(c)},
      {kbv_model_path(c, "ie")},
      [&] {
        KnowledgeGraph q_ie = load_quads(q_ie_path(c));
        KBVTrainResult result = train_kbv(q_ie, kbv_ie);
        result.model.save(kbv_model_path(c, "ie"));
      }});

  stages.push_back(Stage{
      "score",
      {q_ie_path(c), kbv_model_path(c, "kb"), kbv_model_path(c, "ie")},
      {score_table_path(c)},
      [&] {
        KnowledgeGraph q_ie = load_quads(q_ie_path(c));
        KBVModel kbv = KBVModel::load(kbv_model_path(c, "kb"));
        KBVModel kbvie = KBVModel::load(kbv_model_path(c, "ie"));
        std::vector<ScoredTriple> rows;
        for (const Quad& q : q_ie.quads()) {
          ScoredTriple st;
          st.subject = q_ie.entities().label(q.triple.subject);
          st.relation = q_ie.relations().label(q.triple.relation);
          st.object = q_ie.entities().label(q.triple.object);
          st.s_ie = q.confidence;
          st.s_kbv = kbv.score(st.subject, st.relation, st.object);
          st.s_kbv_ie = kbvie.score(st.subject, st.relation, st.object);
          rows.push_back(std::move(st));
        }
        save_score_table(rows, score_table_path(c));
      }});

  {
    std::vector<std::string> outs;
    for (const std::string& f : c.feature_subsets) outs.push_back(q_final_path(c, f));
    for (const std::string& f : c.feature_subsets)
      outs.push_back(c.workdir + "/models/stacker_" + f + ".txt");
    stages.push_back(Stage{
        "restack",
        {score_table_path(c), c.truth_path},
        outs,
        [&] {
          std::vector<ScoredTriple> rows = load_score_table(score_table_path(c));
          KnowledgeGraph truth = load_quads(c.truth_path);
          std::set<TripleKey> truth_keys = triple_keys(truth);

          std::set<std::string> rel_set;
          for (const ScoredTriple& st : rows) rel_set.insert(st.relation);
          std::vector<std::string> rels(rel_set.begin(), rel_set.end());

          for (const std::string& name : c.feature_subsets) {
            FeatureOptions opts = FeatureOptions::subset(name);
            FeatureMap map(static_cast<int>(rels.size()), opts);
            std::vector<std::vector<double>> xs;
            std::vector<int> ys;
            for (const ScoredTriple& st : rows) {
              int rel = -1;
              for (std::size_t r = 0; r < rels.size(); ++r) {
                if (rels[r] == st.relation) rel = static_cast<int>(r);
              }
              xs.push_back(map.featurize(st.s_ie, st.s_kbv, st.s_kbv_ie, rel));
              ys.push_back(truth_keys.count({st.subject, st.relation, st.object})
                               ? 1
                               : 0);
            }
            StackerConfig sc;
            sc.l1 = c.stacker_l1;
            sc.seed = stacker_seed;
            StackerModel model =
                train_stacker(xs, ys, static_cast<int>(rels.size()), opts, sc);
            model.save(c.workdir + "/models/stacker_" + name + ".txt");

            std::vector<ScoredTriple> rescored = rows;
            rescore(model, map, rels, rescored);
            std::ofstream out(q_final_path(c, name));
            char buf[64];
            for (const ScoredTriple& st : rescored) {
              std::snprintf(buf, sizeof(buf), "%.6f", st.s_final);
              out << st.subject << '\t' << st.relation << '\t' << st.object
                  << '\t' << buf << '\n';
            }
          }
        }});
  }

  {
    std::vector<std::string> ins = {q_ie_path(c), c.truth_path};
    for (const std::string& f : c.feature_subsets) ins.push_back(q_final_path(c, f));
    stages.push_back(Stage{
        "eval",
        ins,
        {c.workdir + "/eval/ablation.csv", c.workdir + "/eval/buckets.csv",
         c.workdir + "/eval/pr.svg"},
        [&] {
          KnowledgeGraph q_ie = load_quads(q_ie_path(c));
          KnowledgeGraph truth = load_quads(c.truth_path);
          std::set<TripleKey> truth_keys = triple_keys(truth);
          std::set<TripleKey> base_keys = triple_keys(q_ie);
          std::vector<TripleKey> base_list(base_keys.begin(), base_keys.end());

          std::map<std::string, std::vector<ScoredKey>> variants;
          std::map<std::string, PRCurve> curves;
          for (const std::string& f : c.feature_subsets) {
            variants[f] = load_scored_keys(q_final_path(c, f));
            curves[f] = pr_curve(variants[f], truth_keys, base_keys);
            write_pr_csv(curves[f], c.workdir + "/eval/pr_" + f + ".csv");
          }
          write_pr_svg(curves, c.workdir + "/eval/pr.svg");
          if (variants.size() >= 2) {
            AblationTable table = ablation_table(variants, truth_keys, base_keys);
            std::ofstream(c.workdir + "/eval/ablation.csv") << ablation_csv(table);
          } else {
            std::ofstream(c.workdir + "/eval/ablation.csv")
                << "variant,auc\n" << variants.begin()->first << ','
                << curves.begin()->second.auc << '\n';
          }
          BucketReport buckets =
              bucket_analysis(variants, truth_keys, base_list, "ie");
          std::ofstream(c.workdir + "/eval/buckets.csv") << buckets_csv(buckets);
        }});
  }

  RunManifest old = load_manifest(c.workdir + "/manifest");
  RunManifest manifest;
  for (Stage& stage : stages) {
    if (!c.stages.empty() &&
        std::find(c.stages.begin(), c.stages.end(), stage.name) == c.stages.end())
      continue;

    StageRecord rec;
    rec.name = stage.name;
    try {
      for (const std::string& path : stage.inputs)
        rec.inputs[path] = file_digest(path);

      bool can_skip = !c.force;
      if (can_skip) {
        const StageRecord* prev = nullptr;
        for (const StageRecord& r : old.stages) {
          if (r.name == stage.name) prev = &r;
        }
        can_skip = prev && prev->inputs == rec.inputs;
        if (can_skip) {
          for (const std::string& path : stage.outputs) {
            if (!fs::exists(path) ||
                prev->outputs.count(path) == 0 ||
                prev->outputs.at(path) != file_digest(path)) {
              can_skip = false;
              break;
            }
          }
        }
      }

      auto start = std::chrono::steady_clock::now();
      if (!can_skip) stage.body();
      rec.skipped = can_skip;
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      for (const std::string& path : stage.outputs)
        rec.outputs[path] = file_digest(path);
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + stage.name + "' failed: " + e.what());
    }
    manifest.stages.push_back(std::move(rec));
  }
  // merge with untouched stages from the previous manifest
  for (const StageRecord& r : old.stages) {
    bool present = false;
    for (const StageRecord& n : manifest.stages) {
      if (n.name == r.name) present = true;
    }
    if (!present) manifest.stages.push_back(r);
  }
  save_manifest(manifest, c.workdir + "/manifest");
  return manifest;
}

}  // namespace kbp
