#include "kbp/stacker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kbp {

FeatureOptions FeatureOptions::subset(const std::string& name) {
  FeatureOptions opts;
  if (name == "all") {
  } else if (name == "ie") {
    opts.use_kbv = false;
    opts.use_kbv_ie = false;
    opts.logits = false;
    opts.bins = false;
    opts.rel_indicators = false;
    opts.quadratic = false;
  } else if (name == "ie+kbv") {
    opts.use_kbv_ie = false;
  } else if (name == "ie+kbvie") {
    opts.use_kbv = false;
  } else {
    throw std::runtime_error("unknown feature subset: " + name);
  }
  return opts;
}

double confidence_logit(double s) {
  s = std::clamp(s, 1e-6, 1.0 - 1e-6);
  return std::log(1.0 / s - 1.0);
}

int confidence_bin(double s) {
  if (s < 0.2) return 0;
  if (s < 0.4) return 1;
  if (s < 0.6) return 2;
  if (s < 0.8) return 3;
  return 4;
}

FeatureMap::FeatureMap(int num_relations, FeatureOptions opts)
    : num_relations_(num_relations), opts_(opts) {
  auto add_system = [&](System sys) {
    base_.push_back({sys, kRaw, 0});
    if (opts_.logits) base_.push_back({sys, kLogit, 0});
    if (opts_.bins) {
      for (int b = 0; b < 5; ++b) base_.push_back({sys, kBin, b});
    }
  };
  add_system(kIE);
  if (opts_.use_kbv) add_system(kKBV);
  if (opts_.use_kbv_ie) add_system(kKBVIE);
  if (opts_.use_kbv) base_.push_back({kKBV, kMissing, 0});
  if (opts_.use_kbv_ie) base_.push_back({kKBVIE, kMissing, 0});
  if (opts_.rel_indicators) {
    for (int r = 0; r < num_relations_; ++r) base_.push_back({kNone, kRel, r});
  }

  if (opts_.quadratic) {
    int n = static_cast<int>(base_.size());
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Base& a = base_[i];
        const Base& b = base_[j];
        if (opts_.prune_structural_zeros) {
          if (a.kind == kBin && b.kind == kBin && a.system == b.system) continue;
          if (a.kind == kRel && b.kind == kRel) continue;
        }
        if (!opts_.rel_products && (a.kind == kRel) != (b.kind == kRel)) continue;
        pairs_.emplace_back(i, j);
      }
    }
  }
}

std::vector<double> FeatureMap::featurize(double s_ie, std::optional<double> s_kbv,
                                          std::optional<double> s_kbv_ie,
                                          int relation) const {
  if (relation < 0 || relation >= num_relations_)
    throw std::runtime_error("featurize: relation id " + std::to_string(relation) +
                             " out of range");
  auto system_score = [&](System sys) -> std::optional<double> {
    switch (sys) {
      case kIE: return s_ie;
      case kKBV: return s_kbv;
      case kKBVIE: return s_kbv_ie;
      default: return std::nullopt;
    }
  };
  for (System sys : {kIE, kKBV, kKBVIE}) {
    auto s = system_score(sys);
    if (s && (*s < 0.0 || *s > 1.0))
      throw std::runtime_error("confidence outside [0,1]");
  }

  std::vector<double> out(dim(), 0.0);
  for (std::size_t i = 0; i < base_.size(); ++i) {
    const Base& f = base_[i];
    switch (f.kind) {
      case kRaw: {
        auto s = system_score(f.system);
        out[i] = s ? *s : 0.0;
        break;
      }
      case kLogit: {
        auto s = system_score(f.system);
        out[i] = s ? confidence_logit(*s) : 0.0;
        break;
      }
      case kBin: {
        auto s = system_score(f.system);
        out[i] = (s && confidence_bin(*s) == f.arg) ? 1.0 : 0.0;
        break;
      }
      case kMissing:
        out[i] = system_score(f.system) ? 0.0 : 1.0;
        break;
      case kRel:
        out[i] = (relation == f.arg) ? 1.0 : 0.0;
        break;
    }
  }
  std::size_t n = base_.size();
  for (std::size_t p = 0; p < pairs_.size(); ++p)
    out[n + p] = out[pairs_[p].first] * out[pairs_[p].second];
  out.back() = 1.0;  // bias
  return out;
}

double StackerModel::predict(std::span<const double> features) const {
  if (features.size() != weights.size())
    throw std::runtime_error("feature dimension mismatch");
  double z = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) z += weights[i] * features[i];
  return 1.0 / (1.0 + std::exp(-z));
}

StackerModel train_stacker(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels, int num_relations,
                           FeatureOptions opts, const StackerConfig& config) {
  if (features.empty() || features.size() != labels.size())
    throw std::runtime_error("train_stacker: bad training set");
  bool has0 = false, has1 = false;
  for (int y : labels) (y ? has1 : has0) = true;
  if (!has0 || !has1)
    throw std::runtime_error("train_stacker: both classes required");

  std::size_t n = features.size();
  std::size_t d = features[0].size();
  double max_sq = 0.0;
  for (const auto& x : features) {
    double sq = 0.0;
    for (double v : x) sq += v * v;
    max_sq = std::max(max_sq, sq);
  }
  double lr = 4.0 / (max_sq + 1e-12);  // 1/L for the logistic loss

  StackerModel model;
  model.num_relations = num_relations;
  model.options = opts;
  model.weights.assign(d, 0.0);
  model.l1 = config.l1;
  model.seed = config.seed;

  std::vector<double> grad(d);
  double prev_obj = 1e300;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < d; ++j) z += model.weights[j] * features[i][j];
      double p = 1.0 / (1.0 + std::exp(-z));
      double y = static_cast<double>(labels[i]);
      loss += y > 0.5 ? -std::log(std::max(p, 1e-12))
                      : -std::log(std::max(1.0 - p, 1e-12));
      double g = (p - y) / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) grad[j] += g * features[i][j];
    }
    loss /= static_cast<double>(n);

    double l1_pen = 0.0;
    for (std::size_t j = 0; j + 1 < d; ++j) l1_pen += std::abs(model.weights[j]);
    double obj = loss + config.l1 * l1_pen;
    model.epochs_run = epoch + 1;
    if (std::abs(prev_obj - obj) < config.tolerance) break;
    prev_obj = obj;

    for (std::size_t j = 0; j < d; ++j) {
      double w = model.weights[j] - lr * grad[j];
      if (j + 1 < d) {  // intercept unregularized
        double thresh = lr * config.l1;
        if (w > thresh)
          w -= thresh;
        else if (w < -thresh)
          w += thresh;
        else
          w = 0.0;
      }
      model.weights[j] = w;
    }
  }
  return model;
}

void rescore(const StackerModel& model, const FeatureMap& map,
             const std::vector<std::string>& relation_labels,
             std::vector<ScoredTriple>& scored) {
  if (map.dim() != static_cast<int>(model.weights.size()))
    throw std::runtime_error("rescore: feature dimension mismatch");
  for (ScoredTriple& st : scored) {
    int rel = -1;
    for (std::size_t r = 0; r < relation_labels.size(); ++r) {
      if (relation_labels[r] == st.relation) {
        rel = static_cast<int>(r);
        break;
      }
    }
    std::vector<double> phi = map.featurize(st.s_ie, st.s_kbv, st.s_kbv_ie, rel);
    st.s_final = model.predict(phi);
  }
  std::sort(scored.begin(), scored.end(),
            [](const ScoredTriple& a, const ScoredTriple& b) {
              if (a.s_final != b.s_final) return a.s_final > b.s_final;
              return std::tie(a.subject, a.relation, a.object) <
                     std::tie(b.subject, b.relation, b.object);
            });
}

std::vector<ScoredTriple> load_score_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score table: " + path);
  std::vector<ScoredTriple> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 6)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 6 fields");
    ScoredTriple st;
    st.subject = fields[0];
    st.relation = fields[1];
    st.object = fields[2];
    st.s_ie = std::stod(fields[3]);
    if (fields[4] != "NA") st.s_kbv = std::stod(fields[4]);
    if (fields[5] != "NA") st.s_kbv_ie = std::stod(fields[5]);
    out.push_back(std::move(st));
  }
  return out;
}

void save_score_table(const std::vector<ScoredTriple>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write score table: " + path);
  char buf[64];
  auto fmt = [&](std::optional<double> v) -> std::string {
    if (!v) return "NA";
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
  };
  for (const ScoredTriple& st : rows) {
    out << st.subject << '\t' << st.relation << '\t' << st.object << '\t'
        << fmt(st.s_ie) << '\t' << fmt(st.s_kbv) << '\t' << fmt(st.s_kbv_ie)
        << '\n';
  }
}

void StackerModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model: " + path);
  out << "stacker 1 " << num_relations << ' ' << options.use_kbv << ' '
      << options.use_kbv_ie << ' ' << options.logits << ' ' << options.bins
      << ' ' << options.rel_indicators << ' ' << options.quadratic << ' '
      << options.rel_products << ' ' << options.prune_structural_zeros << ' '
      << l1 << ' ' << seed << ' ' << epochs_run << ' ' << weights.size() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", weights[i]);
    out << buf << ((i + 1) % 8 == 0 || i + 1 == weights.size() ? '\n' : ' ');
  }
}

StackerModel StackerModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  std::string magic;
  int version;
  in >> magic >> version;
  if (magic != "stacker" || version != 1)
    throw std::runtime_error("bad stacker model file: " + path);
  StackerModel m;
  std::size_t nw;
  in >> m.num_relations >> m.options.use_kbv >> m.options.use_kbv_ie >>
      m.options.logits >> m.options.bins >> m.options.rel_indicators >>
      m.options.quadratic >> m.options.rel_products >>
      m.options.prune_structural_zeros >> m.l1 >> m.seed >> m.epochs_run >> nw;
  m.weights.resize(nw);
  for (double& w : m.weights) in >> w;
  return m;
}

}  // namespace kbp
