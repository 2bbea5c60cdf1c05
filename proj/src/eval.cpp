#include "kbp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kbp {

PRCurve pr_curve(std::vector<ScoredKey> scored, const std::set<TripleKey>& truth,
                 const std::set<TripleKey>& base) {
  int total_true = 0;
  for (const TripleKey& t : base) {
    if (truth.count(t)) ++total_true;
  }
  if (total_true == 0) throw std::runtime_error("pr_curve: no true triples in base");
  for (const ScoredKey& s : scored) {
    if (!base.count(s.triple))
      throw std::runtime_error("pr_curve: scored triple not in base set");
  }

  std::sort(scored.begin(), scored.end(), [](const ScoredKey& a, const ScoredKey& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.triple < b.triple;
  });

  PRCurve curve;
  int tp = 0, pred = 0;
  std::size_t i = 0;
  while (i < scored.size()) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].score == scored[i].score) {
      if (truth.count(scored[j].triple)) ++tp;
      ++pred;
      ++j;
    }
    curve.points.push_back(
        {static_cast<double>(tp) / static_cast<double>(total_true),
         static_cast<double>(tp) / static_cast<double>(pred)});
    i = j;
  }

  double auc = 0.0;
  double prev_r = 0.0;
  double prev_p = curve.points.empty() ? 0.0 : curve.points.front().precision;
  for (const PRPoint& pt : curve.points) {
    auc += (pt.recall - prev_r) * 0.5 * (pt.precision + prev_p);
    prev_r = pt.recall;
    prev_p = pt.precision;
  }
  curve.auc = auc;
  return curve;
}

BucketReport bucket_analysis(
    const std::map<std::string, std::vector<ScoredKey>>& variants,
    const std::set<TripleKey>& truth, const std::vector<TripleKey>& base,
    const std::string& baseline) {
  if (!variants.count(baseline))
    throw std::runtime_error("bucket_analysis: missing baseline variant '" +
                             baseline + "'");
  std::map<std::string, int> degree;
  for (const TripleKey& t : base) {
    ++degree[t[0]];
    if (t[2] != t[0]) ++degree[t[2]];
  }
  auto min_conn = [&](const TripleKey& t) {
    return std::min(degree[t[0]], degree[t[2]]);
  };

  const double inf = std::numeric_limits<double>::infinity();
  const double edges[6] = {1, 2, 4, 8, 16, inf};
  auto bucket_of = [&](int c) {
    for (int b = 4; b >= 0; --b) {
      if (c >= edges[b]) return b;
    }
    return 0;
  };

  std::array<std::set<TripleKey>, 5> bucket_base;
  for (const TripleKey& t : base) bucket_base[bucket_of(min_conn(t))].insert(t);

  BucketReport report;
  for (int b = 0; b < 5; ++b) {
    BucketReport::Row row;
    row.lo = edges[b];
    row.hi = edges[b + 1];
    row.count = static_cast<int>(bucket_base[b].size());
    for (const auto& [name, scored] : variants) {
      std::vector<ScoredKey> sub;
      for (const ScoredKey& s : scored) {
        if (bucket_base[b].count(s.triple)) sub.push_back(s);
      }
      double auc = std::numeric_limits<double>::quiet_NaN();
      if (!sub.empty()) {
        try {
          auc = pr_curve(std::move(sub), truth, bucket_base[b]).auc;
        } catch (const std::runtime_error&) {
          // no true triples in this bucket: undefined, not fatal
        }
      }
      row.auc[name] = auc;
    }
    double base_auc = row.auc[baseline];
    for (const auto& [name, auc] : row.auc) row.delta[name] = auc - base_auc;
    report.rows.push_back(std::move(row));
  }
  return report;
}

AblationTable ablation_table(
    const std::map<std::string, std::vector<ScoredKey>>& variants,
    const std::set<TripleKey>& truth, const std::set<TripleKey>& base) {
  if (variants.size() < 2)
    throw std::runtime_error("ablation_table: need at least 2 variants");
  AblationTable table;
  for (const auto& [name, scored] : variants)
    table.rows.emplace_back(name, pr_curve(scored, truth, base).auc);
  return table;
}

std::string ablation_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "variant,auc\n";
  char buf[64];
  for (const auto& [name, auc] : table.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", auc);
    out << name << ',' << buf << '\n';
  }
  return out.str();
}

std::string ablation_text(const AblationTable& table) {
  std::size_t width = 7;
  for (const auto& [name, auc] : table.rows) width = std::max(width, name.size());
  std::ostringstream out;
  char buf[64];
  for (const auto& [name, auc] : table.rows) {
    out << name << std::string(width - name.size() + 2, ' ');
    std::snprintf(buf, sizeof(buf), "%.4f", auc);
    out << buf << '\n';
  }
  return out.str();
}

std::string buckets_csv(const BucketReport& report) {
  std::ostringstream out;
  out << "bucket_lo,bucket_hi,count";
  if (!report.rows.empty()) {
    for (const auto& [name, auc] : report.rows.front().auc)
      out << ",auc_" << name << ",delta_" << name;
  }
  out << '\n';
  char buf[64];
  for (const auto& row : report.rows) {
    out << row.lo << ',';
    if (std::isinf(row.hi))
      out << "inf";
    else
      out << row.hi;
    out << ',' << row.count;
    for (const auto& [name, auc] : row.auc) {
      for (double v : {auc, row.delta.at(name)}) {
        if (std::isnan(v)) {
          out << ",NA";
        } else {
          std::snprintf(buf, sizeof(buf), "%.6f", v);
          out << ',' << buf;
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_pr_csv(const PRCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "recall,precision\n";
  char buf[96];
  for (const PRPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", p.recall, p.precision);
    out << buf;
  }
}

void write_pr_svg(const std::map<std::string, PRCurve>& curves,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  const int w = 640, h = 480, margin = 50;
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\""
      << w - margin << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\">recall</text>\n"
      << "<text x=\"15\" y=\"" << h / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << h / 2
      << ")\">precision</text>\n";
  auto px = [&](double r) { return margin + r * (w - 2 * margin); };
  auto py = [&](double p) { return h - margin - p * (h - 2 * margin); };
  int ci = 0, legend_y = margin;
  char buf[128];
  for (const auto& [name, curve] : curves) {
    const char* color = colors[ci++ % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const PRPoint& p : curve.points) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(p.recall), py(p.precision));
      out << buf;
    }
    out << "\"/>\n<text x=\"" << w - margin - 120 << "\" y=\"" << legend_y
        << "\" fill=\"" << color << "\">" << name << "</text>\n";
    legend_y += 18;
  }
  out << "</svg>\n";
}

}  // namespace kbp
