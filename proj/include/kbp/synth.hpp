#pragma once

#include <cstdint>
#include <string>

#include "kbp/kg.hpp"
#include "kbp/text.hpp"

namespace kbp {

// Synthetic KBP world: entities grouped into typed clusters, relations
// with cluster signatures, a skewed popularity distribution, a templated
// corpus asserting true triples plus a `noise` fraction of false ones.
struct SynthConfig {
  int entities = 300;
  int relations = 8;
  double noise = 0.3;          // false fraction of corpus assertions
  double kb_fraction = 0.5;    // fraction of truth kept as curated KB
  int triples_per_entity = 5;  // truth size ~ entities * this
  std::uint64_t seed = 1;
};

struct SynthData {
  KnowledgeGraph truth;     // full ground truth
  KnowledgeGraph kb_train;  // curated slice, confidence 1
  Corpus corpus;
};

SynthData generate_synth(const SynthConfig& config);

// Writes truth.tsv, kb_train.tsv, corpus.jsonl into dir.
void write_synth(const SynthData& data, const std::string& dir);

}  // namespace kbp
