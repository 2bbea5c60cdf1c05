#include "kbp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace kbp {

namespace {

constexpr int kClusters = 4;
const char* kPrefixes[kClusters] = {"Per", "Org", "Loc", "Wrk"};

const char* kPhrases[8] = {
    "works for",       "was born in",  "is located in", "starred in",
    "is a director of", "acquired",    "is married to", "founded",
};

std::pair<int, int> signature(int r) {
  int src = r % kClusters;
  int dst = (r + 1 + r / kClusters) % kClusters;
  if (dst == src) dst = (dst + 1) % kClusters;
  return {src, dst};
}

std::string phrase(int r) {
  if (r < 8) return kPhrases[r];
  return "relates as kind" + std::to_string(r) + " to";
}

}  // namespace

SynthData generate_synth(const SynthConfig& cfg) {
  if (cfg.entities < kClusters * 2 || cfg.relations < 1)
    throw std::runtime_error("synth: config too small");
  if (cfg.noise < 0 || cfg.noise >= 1)
    throw std::runtime_error("synth: noise must be in [0,1)");
  std::mt19937_64 rng(cfg.seed);

  // entity labels per cluster, skewed popularity within each cluster
  std::vector<std::vector<std::string>> members(kClusters);
  std::vector<std::discrete_distribution<int>> pick(kClusters);
  for (int c = 0; c < kClusters; ++c) {
    int n = cfg.entities / kClusters + (c < cfg.entities % kClusters ? 1 : 0);
    std::vector<double> weights(n);
    for (int i = 0; i < n; ++i) {
      members[c].push_back(std::string(kPrefixes[c]) + std::to_string(i));
      weights[i] = 1.0 / std::pow(1.0 + i, 0.7);
    }
    pick[c] = std::discrete_distribution<int>(weights.begin(), weights.end());
  }

  SynthData data;
  std::set<std::array<std::string, 3>> truth_set;
  int n_truth_target = cfg.entities * cfg.triples_per_entity;
  int per_rel = std::max(1, n_truth_target / cfg.relations);
  for (int r = 0; r < cfg.relations; ++r) {
    auto [src, dst] = signature(r);
    std::string rel = "rel" + std::to_string(r);
    int made = 0;
    for (int attempt = 0; made < per_rel && attempt < per_rel * 50; ++attempt) {
      const std::string& s = members[src][pick[src](rng)];
      const std::string& o = members[dst][pick[dst](rng)];
      if (s == o) continue;
      if (!truth_set.insert({s, rel, o}).second) continue;
      data.truth.add(s, rel, o, 1.0);
      ++made;
    }
  }

  std::bernoulli_distribution keep(cfg.kb_fraction);
  for (const Quad& q : data.truth.quads()) {
    if (keep(rng))
      data.kb_train.add(data.truth.entities().label(q.triple.subject),
                        data.truth.relations().label(q.triple.relation),
                        data.truth.entities().label(q.triple.object), 1.0);
  }

  // corpus assertions: all truth triples plus injected false ones
  struct Assertion {
    std::string s, o;
    int rel;
  };
  std::vector<Assertion> assertions;
  for (const Quad& q : data.truth.quads())
    assertions.push_back({data.truth.entities().label(q.triple.subject),
                          data.truth.entities().label(q.triple.object),
                          q.triple.relation});

  std::size_t n_truth = assertions.size();
  std::size_t n_false = static_cast<std::size_t>(
      std::llround(cfg.noise / (1.0 - cfg.noise) * static_cast<double>(n_truth)));
  std::set<std::array<std::string, 3>> false_set;
  std::uniform_int_distribution<int> any_cluster(0, kClusters - 1);
  std::size_t made = 0;
  for (std::size_t attempt = 0; made < n_false && attempt < n_false * 100;
       ++attempt) {
    int r = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.relations));
    auto [src, dst] = signature(r);
    bool easy = (made % 2 == 0);  // half violate the cluster signature
    int ocluster = dst;
    if (easy) {
      while (ocluster == dst) ocluster = any_cluster(rng);
    }
    const std::string& s = members[src][pick[src](rng)];
    const std::string& o = members[ocluster][pick[ocluster](rng)];
    if (s == o) continue;
    std::string rel = "rel" + std::to_string(r);
    if (truth_set.count({s, rel, o})) continue;
    if (!false_set.insert({s, rel, o}).second) continue;
    assertions.push_back({s, o, r});
    ++made;
  }

  std::shuffle(assertions.begin(), assertions.end(), rng);

  const char* prefixes[] = {"", "Reports say", "It is known that",
                            "Sources confirm"};
  const char* suffixes[] = {"", "these days", "according to records"};
  std::uniform_int_distribution<int> pre(0, 3), suf(0, 2);
  for (std::size_t i = 0; i < assertions.size(); ++i) {
    const Assertion& a = assertions[i];
    std::string text;
    std::string p = prefixes[pre(rng)];
    std::string x = suffixes[suf(rng)];
    if (!p.empty()) text += p + " ";
    text += a.s + " " + phrase(a.rel) + " " + a.o;
    if (!x.empty()) text += " " + x;
    text += " .";
    data.corpus.docs.push_back({"d" + std::to_string(i), std::move(text)});
  }
  return data;
}

void write_synth(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_quads(data.truth, dir + "/truth.tsv", /*with_confidence=*/false);
  save_quads(data.kb_train, dir + "/kb_train.tsv", /*with_confidence=*/false);
  std::ofstream out(dir + "/corpus.jsonl");
  if (!out) throw std::runtime_error("cannot write corpus in " + dir);
  for (const Document& doc : data.corpus.docs) {
    nlohmann::json j{{"id", doc.id}, {"text", doc.text}};
    out << j.dump() << '\n';
  }
}

}  // namespace kbp
