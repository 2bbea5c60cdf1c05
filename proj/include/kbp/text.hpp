#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kbp/kg.hpp"

namespace kbp {

struct Document {
  std::string id;
  std::string text;
};

// One JSON object per line with "id" and "text", or plain text with one
// document per line (id = 1-based line number). Unreadable lines are
// skipped and counted, never fatal.
struct Corpus {
  std::vector<Document> docs;
  int skipped = 0;
};
Corpus read_corpus(const std::string& path);

// Naive segmentation on .!? followed by whitespace.
std::vector<std::string> split_sentences(const std::string& text);

// Whitespace split with punctuation broken out as single-char tokens.
std::vector<std::string> tokenize(const std::string& sentence);

struct Mention {
  int entity = -1;
  int begin = 0;  // token range [begin, end)
  int end = 0;
};

// Token-level dictionary matcher over the KB's entity labels.
// Case-insensitive after whitespace normalization, leftmost-longest.
class Gazetteer {
 public:
  explicit Gazetteer(const Vocab& entities);
  std::vector<Mention> match(std::span<const std::string> tokens) const;

 private:
  struct Entry {
    std::vector<std::string> tokens;  // lowercased
    int entity;
  };
  std::unordered_map<std::string, std::vector<Entry>> by_first_;  // longest first
};

// A sentence window containing two entity mentions. e1/span1 are the
// textually first mention; spans never overlap.
struct Context {
  std::string doc_id;
  std::vector<std::string> tokens;
  int e1 = -1;
  int e2 = -1;
  int span1_begin = 0, span1_end = 0;
  int span2_begin = 0, span2_end = 0;
};

// by_pair keys use the canonical order of the pair's first co-occurrence
// in the corpus; lookups check both orders.
class ContextIndex {
 public:
  void add(int a, int b, Context ctx);  // a, b in textual order

  std::span<const Context> pair_contexts(int a, int b) const;
  std::vector<const Context*> entity_contexts(int entity) const;

  // Deterministic iteration in key order.
  const std::map<std::pair<int, int>, std::vector<Context>>& by_pair() const {
    return by_pair_;
  }
  int skipped_docs = 0;

 private:
  std::map<std::pair<int, int>, std::vector<Context>> by_pair_;
  std::map<std::pair<int, int>, std::pair<int, int>> canon_;
};

// One Context per unordered mention pair per sentence, truncated to
// `window` tokens on each side of the mention spans.
ContextIndex build_context_index(const Corpus& corpus, const Gazetteer& gaz,
                                 int window = 20);

void dump_contexts(const ContextIndex& index, const Vocab& entities,
                   const std::string& path);
ContextIndex load_contexts(const std::string& path, Vocab& entities);

struct LabeledBag {
  std::pair<int, int> pair;
  std::span<const Context> contexts;
  std::vector<int> positive_relations;  // empty = NA bag
};

// Pairs related in kg_train (in canonical order) become positive bags
// with all their KB relations; unrelated co-occurring pairs are sampled
// as NA bags at na_ratio x the positive count.
std::vector<LabeledBag> label_bags(const ContextIndex& index,
                                   const KnowledgeGraph& kg_train,
                                   const Vocab& corpus_entities,
                                   double na_ratio, std::uint64_t seed);

}  // namespace kbp
