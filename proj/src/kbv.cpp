#include "kbp/kbv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace kbp {

EmbeddingVocab build_vocab(const KnowledgeGraph& kg, int min_count) {
  if (min_count < 1) throw std::runtime_error("min_count must be >= 1");
  std::vector<int> counts(kg.entities().size(), 0);
  for (const Quad& q : kg.quads()) {
    ++counts[q.triple.subject];
    if (q.triple.object != q.triple.subject) ++counts[q.triple.object];
  }
  EmbeddingVocab vocab;
  for (std::size_t e = 0; e < counts.size(); ++e) {
    if (counts[e] >= min_count) {
      int row = static_cast<int>(vocab.kept_labels.size());
      vocab.kept_labels.push_back(kg.entities().label(static_cast<int>(e)));
      vocab.rows.emplace(vocab.kept_labels.back(), row);
    }
  }
  if (vocab.kept_labels.empty())
    throw std::runtime_error(
        "no entity meets min_count=" + std::to_string(min_count) +
        "; lower min_count");
  return vocab;
}

namespace {

// h = tanh(d_ent * e1 + d_rel * r + comb_bias)
std::vector<double> combine(const KBVModel& m, int subject_row, int relation) {
  const double* e = &m.ent_emb[static_cast<std::size_t>(subject_row) * m.dim];
  const double* r = &m.rel_emb[static_cast<std::size_t>(relation) * m.dim];
  std::vector<double> h(m.dim);
  for (int i = 0; i < m.dim; ++i)
    h[i] = std::tanh(m.d_ent[i] * e[i] + m.d_rel[i] * r[i] + m.comb_bias[i]);
  return h;
}

}  // namespace

std::vector<double> KBVModel::forward(int subject_row, int relation,
                                      std::span<const int> candidates) const {
  std::vector<double> h = combine(*this, subject_row, relation);
  std::vector<double> logits(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double* c = &ent_emb[static_cast<std::size_t>(candidates[i]) * dim];
    double z = proj_bias[candidates[i]];
    for (int j = 0; j < dim; ++j) z += c[j] * h[j];
    logits[i] = z;
  }
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return logits;
}

std::optional<double> KBVModel::score(const std::string& subject,
                                      const std::string& relation,
                                      const std::string& object) const {
  auto s_row = vocab.row(subject);
  auto o_row = vocab.row(object);
  auto rel = relation_ids.find(relation);
  if (!s_row || !o_row || rel == relation_ids.end()) return std::nullopt;

  std::vector<int> all(rows());
  std::iota(all.begin(), all.end(), 0);
  double fwd = forward(*s_row, rel->second, all)[*o_row];
  double inv = forward(*o_row, rel->second + num_relations, all)[*s_row];
  return 0.5 * (fwd + inv);
}

double kbv_loss(const KBVModel& model, std::span<const KBVQuery> queries) {
  double total = 0.0;
  for (const KBVQuery& q : queries) {
    std::vector<double> v = model.forward(q.subject_row, q.relation, q.candidates);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (q.targets[i] != 0.0)
        total -= q.targets[i] * std::log(std::max(v[i], 1e-12));
    }
  }
  return total / static_cast<double>(queries.size());
}

double kbv_loss_grad(const KBVModel& m, std::span<const KBVQuery> queries,
                     KBVGradients& g) {
  g.ent_emb.assign(m.ent_emb.size(), 0.0);
  g.rel_emb.assign(m.rel_emb.size(), 0.0);
  g.d_ent.assign(m.d_ent.size(), 0.0);
  g.d_rel.assign(m.d_rel.size(), 0.0);
  g.comb_bias.assign(m.comb_bias.size(), 0.0);
  g.proj_bias.assign(m.proj_bias.size(), 0.0);

  double total = 0.0;
  double norm = 1.0 / static_cast<double>(queries.size());
  for (const KBVQuery& q : queries) {
    std::vector<double> h = combine(m, q.subject_row, q.relation);
    std::vector<double> v = m.forward(q.subject_row, q.relation, q.candidates);
    double s_sum = std::accumulate(q.targets.begin(), q.targets.end(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (q.targets[i] != 0.0)
        total -= q.targets[i] * std::log(std::max(v[i], 1e-12));
    }

    // d loss / d logit_i = sum(s) * v_i - s_i
    std::vector<double> dh(m.dim, 0.0);
    for (std::size_t i = 0; i < q.candidates.size(); ++i) {
      double gz = norm * (s_sum * v[i] - q.targets[i]);
      int cand = q.candidates[i];
      const double* c = &m.ent_emb[static_cast<std::size_t>(cand) * m.dim];
      double* gc = &g.ent_emb[static_cast<std::size_t>(cand) * m.dim];
      g.proj_bias[cand] += gz;
      for (int j = 0; j < m.dim; ++j) {
        gc[j] += gz * h[j];
        dh[j] += gz * c[j];
      }
    }

    const double* e = &m.ent_emb[static_cast<std::size_t>(q.subject_row) * m.dim];
    const double* r = &m.rel_emb[static_cast<std::size_t>(q.relation) * m.dim];
    double* ge = &g.ent_emb[static_cast<std::size_t>(q.subject_row) * m.dim];
    double* gr = &g.rel_emb[static_cast<std::size_t>(q.relation) * m.dim];
    for (int j = 0; j < m.dim; ++j) {
      double da = dh[j] * (1.0 - h[j] * h[j]);
      g.d_ent[j] += da * e[j];
      g.d_rel[j] += da * r[j];
      g.comb_bias[j] += da;
      ge[j] += da * m.d_ent[j];
      gr[j] += da * m.d_rel[j];
    }
  }
  return total * norm;
}

namespace {

struct QueryKey {
  int subject_row;
  int relation;
  bool operator==(const QueryKey&) const = default;
};
struct QueryKeyHash {
  std::size_t operator()(const QueryKey& k) const {
    return std::hash<std::uint64_t>()(
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.subject_row)) << 32) |
        static_cast<std::uint32_t>(k.relation));
  }
};

// single-query SGD step, returns pre-update loss contribution
double sgd_step(KBVModel& m, const KBVQuery& q, double lr) {
  std::vector<double> h = combine(m, q.subject_row, q.relation);
  std::vector<double> v = m.forward(q.subject_row, q.relation, q.candidates);
  double s_sum = std::accumulate(q.targets.begin(), q.targets.end(), 0.0);

  double loss = 0.0;
  std::vector<double> dh(m.dim, 0.0);
  std::vector<double> gz(q.candidates.size());
  for (std::size_t i = 0; i < q.candidates.size(); ++i) {
    if (q.targets[i] != 0.0)
      loss -= q.targets[i] * std::log(std::max(v[i], 1e-12));
    gz[i] = s_sum * v[i] - q.targets[i];
    const double* c = &m.ent_emb[static_cast<std::size_t>(q.candidates[i]) * m.dim];
    for (int j = 0; j < m.dim; ++j) dh[j] += gz[i] * c[j];
  }

  const double* e = &m.ent_emb[static_cast<std::size_t>(q.subject_row) * m.dim];
  const double* r = &m.rel_emb[static_cast<std::size_t>(q.relation) * m.dim];
  std::vector<double> da(m.dim);
  std::vector<double> ge(m.dim), gr(m.dim);
  for (int j = 0; j < m.dim; ++j) {
    da[j] = dh[j] * (1.0 - h[j] * h[j]);
    ge[j] = da[j] * m.d_ent[j];
    gr[j] = da[j] * m.d_rel[j];
  }

  // candidate-side updates use h computed before any write
  for (std::size_t i = 0; i < q.candidates.size(); ++i) {
    int cand = q.candidates[i];
    double* c = &m.ent_emb[static_cast<std::size_t>(cand) * m.dim];
    m.proj_bias[cand] -= lr * gz[i];
    for (int j = 0; j < m.dim; ++j) c[j] -= lr * gz[i] * h[j];
  }
  double* ew = &m.ent_emb[static_cast<std::size_t>(q.subject_row) * m.dim];
  double* rw = &m.rel_emb[static_cast<std::size_t>(q.relation) * m.dim];
  for (int j = 0; j < m.dim; ++j) {
    m.d_ent[j] -= lr * da[j] * e[j];
    m.d_rel[j] -= lr * da[j] * r[j];
    m.comb_bias[j] -= lr * da[j];
    ew[j] -= lr * ge[j];
    rw[j] -= lr * gr[j];
  }
  return loss;
}

}  // namespace

KBVTrainResult train_kbv(const KnowledgeGraph& kg, const KBVConfig& config) {
  KBVModel model;
  model.dim = config.dim;
  model.num_relations = static_cast<int>(kg.relations().size());
  model.vocab = build_vocab(kg, config.min_count);
  for (std::size_t r = 0; r < kg.relations().size(); ++r) {
    model.relation_labels.push_back(kg.relations().label(static_cast<int>(r)));
    model.relation_ids.emplace(model.relation_labels.back(), static_cast<int>(r));
  }
  model.seed = config.seed;
  model.min_count = config.min_count;

  int rows = model.rows();
  std::mt19937_64 rng(config.seed);
  double bound = 6.0 / std::sqrt(static_cast<double>(config.dim));
  std::uniform_real_distribution<double> init(-bound, bound);
  model.ent_emb.resize(static_cast<std::size_t>(rows) * config.dim);
  for (double& x : model.ent_emb) x = init(rng);
  model.rel_emb.resize(static_cast<std::size_t>(2 * model.num_relations) * config.dim);
  for (double& x : model.rel_emb) x = init(rng);
  model.d_ent.assign(config.dim, 1.0);
  model.d_rel.assign(config.dim, 1.0);
  model.comb_bias.assign(config.dim, 0.0);
  model.proj_bias.assign(rows, 0.0);

  // (query -> positive objects with confidences), both directions
  std::unordered_map<QueryKey, std::vector<std::pair<int, double>>, QueryKeyHash>
      positives;
  for (const Quad& q : kg.quads()) {
    auto s_row = model.vocab.row(kg.entities().label(q.triple.subject));
    auto o_row = model.vocab.row(kg.entities().label(q.triple.object));
    if (!s_row || !o_row) continue;
    positives[{*s_row, q.triple.relation}].emplace_back(*o_row, q.confidence);
    positives[{*o_row, q.triple.relation + model.num_relations}].emplace_back(
        *s_row, q.confidence);
  }
  if (positives.empty())
    throw std::runtime_error("train_kbv: no quad has both arguments in vocabulary");

  std::vector<QueryKey> instances;
  for (const auto& [key, objs] : positives) instances.push_back(key);
  std::sort(instances.begin(), instances.end(), [](const QueryKey& a, const QueryKey& b) {
    return std::tie(a.subject_row, a.relation) < std::tie(b.subject_row, b.relation);
  });

  std::uniform_int_distribution<int> pick(0, rows - 1);
  KBVTrainResult result;
  KBVQuery query;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(instances.begin(), instances.end(), rng);
    double epoch_loss = 0.0;
    for (const QueryKey& key : instances) {
      const auto& objs = positives[key];
      query.subject_row = key.subject_row;
      query.relation = key.relation;
      query.candidates.clear();
      query.targets.clear();
      std::unordered_set<int> used;
      for (const auto& [row, conf] : objs) {
        query.candidates.push_back(row);
        query.targets.push_back(conf);
        used.insert(row);
      }
      int negs = std::min(config.negatives, rows - static_cast<int>(used.size()));
      for (int n = 0; n < negs;) {
        int cand = pick(rng);
        if (used.insert(cand).second) {
          query.candidates.push_back(cand);
          query.targets.push_back(0.0);
          ++n;
        }
      }
      epoch_loss += sgd_step(model, query, config.learning_rate);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(instances.size()));
  }
  result.model = std::move(model);
  return result;
}

void KBVModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model: " + path);
  out << "kbvmodel 1\n"
      << dim << ' ' << rows() << ' ' << 2 * num_relations << ' ' << seed << ' '
      << min_count << '\n';
  for (const auto& l : vocab.kept_labels) out << l << '\n';
  for (const auto& l : relation_labels) out << l << '\n';
  char buf[64];
  auto write_vec = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == v.size() ? '\n' : ' ');
    }
  };
  write_vec(ent_emb);
  write_vec(rel_emb);
  write_vec(d_ent);
  write_vec(d_rel);
  write_vec(comb_bias);
  write_vec(proj_bias);
}

KBVModel KBVModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  std::string magic;
  int version;
  in >> magic >> version;
  if (magic != "kbvmodel" || version != 1)
    throw std::runtime_error("bad KBV model file: " + path);
  KBVModel m;
  int rows, rels2;
  in >> m.dim >> rows >> rels2 >> m.seed >> m.min_count;
  m.num_relations = rels2 / 2;
  std::string line;
  std::getline(in, line);
  for (int i = 0; i < rows; ++i) {
    std::getline(in, line);
    m.vocab.kept_labels.push_back(line);
    m.vocab.rows.emplace(line, i);
  }
  for (int i = 0; i < m.num_relations; ++i) {
    std::getline(in, line);
    m.relation_labels.push_back(line);
    m.relation_ids.emplace(line, i);
  }
  auto read_vec = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) in >> v[i];
  };
  read_vec(m.ent_emb, static_cast<std::size_t>(rows) * m.dim);
  read_vec(m.rel_emb, static_cast<std::size_t>(rels2) * m.dim);
  read_vec(m.d_ent, m.dim);
  read_vec(m.d_rel, m.dim);
  read_vec(m.comb_bias, m.dim);
  read_vec(m.proj_bias, rows);
  return m;
}

}  // namespace kbp
