#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbp/kg.hpp"

namespace kbp {

struct KBVConfig {
  int dim = 32;
  double learning_rate = 0.05;
  int epochs = 200;
  int negatives = 64;
  int min_count = 3;
  std::uint64_t seed = 1;
};

// Entities kept for embedding: those appearing in >= min_count training
// quads (a self-loop counts once).
struct EmbeddingVocab {
  std::vector<std::string> kept_labels;        // row -> label
  std::unordered_map<std::string, int> rows;   // label -> row

  std::optional<int> row(const std::string& label) const {
    auto it = rows.find(label);
    if (it == rows.end()) return std::nullopt;
    return it->second;
  }
};

EmbeddingVocab build_vocab(const KnowledgeGraph& kg, int min_count);

// One training instance: a (subject, relation) query with its candidate
// entities and confidence targets (sparse target restricted to the
// candidate set).
struct KBVQuery {
  int subject_row = -1;
  int relation = -1;  // [0, 2R): forward r, inverse r + R
  std::vector<int> candidates;
  std::vector<double> targets;
};

// Entity/relation embeddings plus the diagonal combination layer:
//   h = tanh(d_ent * emb(e1) + d_rel * emb(r) + comb_bias)
//   logit_i = emb(cand_i) . h + proj_bias[cand_i]
class KBVModel {
 public:
  int dim = 0;
  int num_relations = 0;  // rel_emb holds 2x this (forward + inverse)
  EmbeddingVocab vocab;
  std::vector<std::string> relation_labels;
  std::unordered_map<std::string, int> relation_ids;

  std::vector<double> ent_emb;    // rows x dim
  std::vector<double> rel_emb;    // 2R x dim
  std::vector<double> d_ent, d_rel, comb_bias;  // dim each
  std::vector<double> proj_bias;  // rows

  std::uint64_t seed = 0;
  int min_count = 0;

  int rows() const { return static_cast<int>(vocab.kept_labels.size()); }

  // softmax over the candidate list; deterministic
  std::vector<double> forward(int subject_row, int relation,
                              std::span<const int> candidates) const;

  // Mean of the forward and inverse full-vocabulary softmax probability;
  // nullopt = MissingEmbedding (entity below min_count or unknown
  // relation).
  std::optional<double> score(const std::string& subject,
                              const std::string& relation,
                              const std::string& object) const;

  void save(const std::string& path) const;
  static KBVModel load(const std::string& path);
};

// Confidence-weighted cross-entropy, mean over queries:
//   -(1/|Q|) sum_q sum_i s_i log v_i     (log clamped at 1e-12)
double kbv_loss(const KBVModel& model, std::span<const KBVQuery> queries);

// Dense gradients in the model's parameter layout.
struct KBVGradients {
  std::vector<double> ent_emb, rel_emb, d_ent, d_rel, comb_bias, proj_bias;
};
double kbv_loss_grad(const KBVModel& model, std::span<const KBVQuery> queries,
                     KBVGradients& grads);

struct KBVTrainResult {
  KBVModel model;
  std::vector<double> loss_trace;  // mean instance loss per epoch
};

// SGD over (quad, direction) instances; candidates are the query's
// positive objects plus `negatives` uniform samples. Deterministic per
// seed; embeddings initialized uniform in [-6/sqrt(dim), 6/sqrt(dim)].
KBVTrainResult train_kbv(const KnowledgeGraph& kg, const KBVConfig& config);

}  // namespace kbp
