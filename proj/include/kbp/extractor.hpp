#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kbp/kg.hpp"
#include "kbp/text.hpp"

namespace kbp {

// index -> count, indices < 2^hash_bits
using SparseVec = std::vector<std::pair<int, double>>;

// Hashed bag of unigrams/bigrams from the three context pieces (before
// the first span, between spans, after the second span), each piece
// prefixed, plus an entity-distance bucket feature.
SparseVec featurize_context(const Context& ctx, int hash_bits);

struct REConfig {
  int hash_bits = 18;
  double learning_rate = 0.1;
  int epochs = 50;
  double l2 = 0.0;
  std::uint64_t seed = 1;
};

// Multinomial logistic scorer over |R|+1 classes; the last class is NA.
struct REModel {
  int hash_bits = 18;
  std::vector<std::string> class_labels;  // relations..., "<NA>"
  std::vector<double> weights;            // dim * classes, class-major per feature
  std::vector<double> bias;               // classes

  int dim() const { return 1 << hash_bits; }
  int num_classes() const { return static_cast<int>(class_labels.size()); }
  int na_class() const { return num_classes() - 1; }

  // softmax probabilities; sums to 1
  std::vector<double> score(const SparseVec& features) const;

  void save(const std::string& path) const;
  static REModel load(const std::string& path);
};

struct RETrainResult {
  REModel model;
  std::vector<double> loss_trace;  // mean bag loss per epoch
};

// Bag-level training: per-class max over the bag's context probabilities,
// renormalized, cross-entropy against the bag's label set (NA bags target
// the NA class). SGD over bags, deterministic per seed.
RETrainResult train_re(std::span<const LabeledBag> bags,
                       const std::vector<std::string>& relation_labels,
                       const REConfig& config);

// Emits Q_IE: per pair, per-relation confidence is the max over the
// pair's contexts; quads below min_confidence and NA are dropped.
// Output is sorted by (subject, relation, object).
KnowledgeGraph extract(const REModel& model, const ContextIndex& index,
                       const Vocab& corpus_entities, double min_confidence);

}  // namespace kbp
