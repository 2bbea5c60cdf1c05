#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kbp {

using TripleKey = std::array<std::string, 3>;  // subject, relation, object

struct ScoredKey {
  TripleKey triple;
  double score = 0.0;
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// One point per distinct confidence threshold, recall non-decreasing.
// AUC by trapezoidal integration over recall, anchored at recall 0 with
// the first threshold's precision.
struct PRCurve {
  std::vector<PRPoint> points;
  double auc = 0.0;
};

// Positive-unlabeled PR: truth membership defines correctness, the base
// (IE extraction) set defines the recall denominator. scored must be a
// subset of base; equal scores are grouped into one threshold.
PRCurve pr_curve(std::vector<ScoredKey> scored, const std::set<TripleKey>& truth,
                 const std::set<TripleKey>& base);

// Min-connectivity buckets [1,2) [2,4) [4,8) [8,16) [16,inf), computed
// over the base set. AUC is NaN for buckets where it is undefined.
struct BucketReport {
  struct Row {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    std::map<std::string, double> auc;    // variant -> AUC
    std::map<std::string, double> delta;  // variant -> AUC - AUC(ie)
  };
  std::vector<Row> rows;
};

BucketReport bucket_analysis(
    const std::map<std::string, std::vector<ScoredKey>>& variants,
    const std::set<TripleKey>& truth, const std::vector<TripleKey>& base,
    const std::string& baseline = "ie");

struct AblationTable {
  std::vector<std::pair<std::string, double>> rows;  // variant -> AUC
};

AblationTable ablation_table(
    const std::map<std::string, std::vector<ScoredKey>>& variants,
    const std::set<TripleKey>& truth, const std::set<TripleKey>& base);

std::string ablation_csv(const AblationTable& table);
std::string ablation_text(const AblationTable& table);
std::string buckets_csv(const BucketReport& report);

void write_pr_csv(const PRCurve& curve, const std::string& path);
// Self-contained static SVG with one polyline per curve.
void write_pr_svg(const std::map<std::string, PRCurve>& curves,
                  const std::string& path);

}  // namespace kbp
