#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "kbp/pipeline.hpp"
#include "kbp/stacker.hpp"
#include "kbp/synth.hpp"

using namespace kbp;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

PipelineConfig toy_config(const TempDir& dir, std::uint64_t seed) {
  SynthConfig sc;
  sc.entities = 80;
  sc.relations = 4;
  sc.triples_per_entity = 4;
  sc.seed = seed;
  SynthData data = generate_synth(sc);
  std::string fixture = dir / "fixture";
  fs::create_directories(fixture);
  write_synth(data, fixture);

  PipelineConfig c;
  c.kb_path = fixture + "/kb_train.tsv";
  c.corpus_path = fixture + "/corpus.jsonl";
  c.truth_path = fixture + "/truth.tsv";
  c.workdir = dir / "work";
  c.re.epochs = 8;
  c.re.hash_bits = 16;
  c.kbv.epochs = 15;
  c.kbv.dim = 12;
  c.kbv.negatives = 8;
  c.kbv.min_count = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
  SynthConfig sc;
  sc.entities = 60;
  sc.seed = 9;
  SynthData a = generate_synth(sc);
  SynthData b = generate_synth(sc);
  REQUIRE(a.truth.quads().size() == b.truth.quads().size());
  for (std::size_t i = 0; i < a.truth.quads().size(); ++i)
    CHECK(a.truth.quads()[i].triple == b.truth.quads()[i].triple);
  REQUIRE(a.corpus.docs.size() == b.corpus.docs.size());
  CHECK(a.corpus.docs[3].text == b.corpus.docs[3].text);

  SynthConfig sc2 = sc;
  sc2.seed = 10;
  SynthData c = generate_synth(sc2);
  CHECK(a.corpus.docs[0].text != c.corpus.docs[0].text);
}

TEST_CASE("synthetic KB is a subset of the truth") {
  SynthData d = generate_synth({});
  for (const Quad& q : d.kb_train.quads()) {
    std::string s = d.kb_train.entities().label(q.triple.subject);
    std::string r = d.kb_train.relations().label(q.triple.relation);
    std::string o = d.kb_train.entities().label(q.triple.object);
    auto es = d.truth.entities().find(s);
    auto er = d.truth.relations().find(r);
    auto eo = d.truth.entities().find(o);
    REQUIRE(es);
    REQUIRE(er);
    REQUIRE(eo);
    CHECK(d.truth.contains({*es, *er, *eo}));
  }
  CHECK(d.kb_train.quads().size() < d.truth.quads().size());
}

TEST_CASE("full pipeline run produces a non-empty final ranking") {
  TempDir dir("kbp_pipe_full");
  PipelineConfig c = toy_config(dir, 3);
  RunManifest m = run_pipeline(c);
  CHECK(m.stages.size() == 8);
  for (const StageRecord& s : m.stages) CHECK(!s.skipped);

  KnowledgeGraph q_final = load_quads(q_final_path(c, "all"));
  CHECK(!q_final.quads().empty());

  // eval artifacts exist
  CHECK(fs::exists(fs::path(c.workdir) / "eval" / "ablation.csv"));
  CHECK(fs::exists(fs::path(c.workdir) / "eval" / "buckets.csv"));
  CHECK(fs::exists(fs::path(c.workdir) / "eval" / "pr.svg"));

  // ablation has one row per feature subset
  std::string csv = read_file((fs::path(c.workdir) / "eval" / "ablation.csv").string());
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 1 + 4);
}

TEST_CASE("second run skips every stage; forced rerun is byte-identical") {
  TempDir dir("kbp_pipe_rerun");
  PipelineConfig c = toy_config(dir, 5);
  run_pipeline(c);
  std::string first = read_file(q_final_path(c, "all"));

  RunManifest again = run_pipeline(c);
  for (const StageRecord& s : again.stages) CHECK(s.skipped);

  c.force = true;
  RunManifest forced = run_pipeline(c);
  for (const StageRecord& s : forced.stages) CHECK(!s.skipped);
  CHECK(read_file(q_final_path(c, "all")) == first);
}

TEST_CASE("ie-only restack preserves the extractor's rank order") {
  TempDir dir("kbp_pipe_ie");
  PipelineConfig c = toy_config(dir, 7);
  run_pipeline(c);

  auto scored = load_score_table(score_table_path(c));
  std::map<std::array<std::string, 3>, double> s_ie;
  for (const ScoredTriple& t : scored)
    s_ie[{t.subject, t.relation, t.object}] = t.s_ie;

  KnowledgeGraph q_ie_ranked = load_quads(q_final_path(c, "ie"));
  const auto& quads = q_ie_ranked.quads();
  double prev = 2.0;
  for (const Quad& q : quads) {
    double s = s_ie.at({q_ie_ranked.entities().label(q.triple.subject),
                        q_ie_ranked.relations().label(q.triple.relation),
                        q_ie_ranked.entities().label(q.triple.object)});
    CHECK(s <= prev + 1e-9);
    prev = s;
  }
}

TEST_CASE("stage filter requires prerequisites") {
  TempDir dir("kbp_pipe_missing");
  PipelineConfig c = toy_config(dir, 11);
  c.stages = {"extract"};  // no contexts or RE model yet
  CHECK_THROWS_AS(run_pipeline(c), std::runtime_error);
}

TEST_CASE("config save/load roundtrip") {
  TempDir dir("kbp_pipe_cfg");
  PipelineConfig c;
  c.kb_path = "kb.tsv";
  c.corpus_path = "corpus.jsonl";
  c.truth_path = "truth.tsv";
  c.workdir = "wd";
  c.window = 13;
  c.na_ratio = 0.5;
  c.re.hash_bits = 17;
  c.re.epochs = 21;
  c.min_confidence = 0.25;
  c.kbv.dim = 24;
  c.kbv.negatives = 10;
  c.kbv.min_count = 4;
  c.stacker_l1 = 0.005;
  c.seed = 99;
  std::string path = dir / "config.txt";
  save_pipeline_config(c, path);
  PipelineConfig l = load_pipeline_config(path);
  CHECK(l.kb_path == c.kb_path);
  CHECK(l.window == 13);
  CHECK(l.na_ratio == 0.5);
  CHECK(l.re.hash_bits == 17);
  CHECK(l.re.epochs == 21);
  CHECK(l.min_confidence == 0.25);
  CHECK(l.kbv.dim == 24);
  CHECK(l.kbv.negatives == 10);
  CHECK(l.kbv.min_count == 4);
  CHECK(l.stacker_l1 == 0.005);
  CHECK(l.seed == 99);
}

TEST_CASE("file digest distinguishes contents") {
  TempDir dir("kbp_pipe_digest");
  std::string a = dir / "a.txt";
  std::string b = dir / "b.txt";
  std::ofstream(a) << "hello";
  std::ofstream(b) << "hellp";
  CHECK(file_digest(a) != file_digest(b));
  std::string c = dir / "c.txt";
  std::ofstream(c) << "hello";
  CHECK(file_digest(a) == file_digest(c));
}
