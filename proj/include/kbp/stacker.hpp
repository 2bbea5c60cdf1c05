#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kbp {

// A Q_IE member with its per-system confidences. s_ie is always
// present; the KBV scores are missing when an entity lacks an embedding.
struct ScoredTriple {
  std::string subject, relation, object;
  double s_ie = 0.0;
  std::optional<double> s_kbv;
  std::optional<double> s_kbv_ie;
  double s_final = -1.0;
};

struct FeatureOptions {
  bool use_kbv = true;
  bool use_kbv_ie = true;
  bool logits = true;
  bool bins = true;
  bool rel_indicators = true;
  bool quadratic = true;
  bool rel_products = true;            // quadratic pairs involving relation indicators
  bool prune_structural_zeros = true;  // same-system bin x bin, rel x rel

  // "all" | "ie" | "ie+kbv" | "ie+kbvie"; "ie" keeps only the raw IE
  // confidence so the rescoring is a monotone recalibration
  static FeatureOptions subset(const std::string& name);
};

// Feature ledger: per present system raw confidence, logit, and five
// range bins; missing indicators for the KBV systems; per-relation
// indicators; optional quadratic block of distinct base-feature pairs;
// trailing bias term. Dimension is a pure function of |R| and the
// options.
class FeatureMap {
 public:
  explicit FeatureMap(int num_relations, FeatureOptions opts = {});

  int dim() const { return static_cast<int>(base_.size() + pairs_.size()) + 1; }
  int num_relations() const { return num_relations_; }
  const FeatureOptions& options() const { return opts_; }

  std::vector<double> featurize(double s_ie, std::optional<double> s_kbv,
                                std::optional<double> s_kbv_ie,
                                int relation) const;

 private:
  enum Kind { kRaw, kLogit, kBin, kMissing, kRel };
  enum System { kIE, kKBV, kKBVIE, kNone };
  struct Base {
    System system;
    Kind kind;
    int arg;  // bin index or relation id
  };
  int num_relations_;
  FeatureOptions opts_;
  std::vector<Base> base_;
  std::vector<std::pair<int, int>> pairs_;
};

// logit with clamp; strictly decreasing in s on [1e-6, 1-1e-6]
double confidence_logit(double s);
// [0,0.2) [0.2,0.4) [0.4,0.6) [0.6,0.8) [0.8,1.0]
int confidence_bin(double s);

struct StackerConfig {
  double l1 = 0.001;
  int max_epochs = 5000;
  double tolerance = 1e-7;
  std::uint64_t seed = 1;
};

// L1-regularized logistic regression; the trailing bias weight is the
// unregularized intercept.
struct StackerModel {
  int num_relations = 0;
  FeatureOptions options;
  std::vector<double> weights;
  double l1 = 0.0;
  std::uint64_t seed = 0;
  int epochs_run = 0;

  double predict(std::span<const double> features) const;

  void save(const std::string& path) const;
  static StackerModel load(const std::string& path);
};

// Full-batch proximal gradient descent on logistic loss + l1 |w|,
// deterministic. Errors if only one class is present.
StackerModel train_stacker(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, int num_relations,
                           FeatureOptions opts, const StackerConfig& config);

// Fills s_final = sigmoid(w . phi) and sorts by descending s_final
// (ties by triple). Errors on feature-dimension mismatch.
void rescore(const StackerModel& model, const FeatureMap& map,
             const std::vector<std::string>& relation_labels,
             std::vector<ScoredTriple>& scored);

// Tab-separated: subject, relation, object, s_ie, s_kbv|NA, s_kbv_ie|NA
std::vector<ScoredTriple> load_score_table(const std::string& path);
void save_score_table(const std::vector<ScoredTriple>& rows,
                      const std::string& path);

}  // namespace kbp
