#include "kbp/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kbp {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void add_feature(SparseVec& out, const std::string& key, int mask) {
  out.emplace_back(static_cast<int>(fnv1a(key) & static_cast<std::uint64_t>(mask)),
                   1.0);
}

void add_piece(SparseVec& out, const char* prefix,
               std::span<const std::string> tokens, int mask) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(out, std::string(prefix) + tokens[i], mask);
    if (i + 1 < tokens.size())
      add_feature(out, std::string(prefix) + tokens[i] + "_" + tokens[i + 1], mask);
  }
}

std::vector<double> softmax(std::vector<double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return logits;
}

}  // namespace

SparseVec featurize_context(const Context& ctx, int hash_bits) {
  int mask = (1 << hash_bits) - 1;
  SparseVec out;
  std::span<const std::string> toks(ctx.tokens);
  add_piece(out, "B:", toks.subspan(0, ctx.span1_begin), mask);
  add_piece(out, "M:",
            toks.subspan(ctx.span1_end, ctx.span2_begin - ctx.span1_end), mask);
  add_piece(out, "A:", toks.subspan(ctx.span2_end), mask);
  int dist = ctx.span2_begin - ctx.span1_end;
  add_feature(out, "D:" + std::to_string(std::min(dist / 5, 5)), mask);

  // merge duplicate indices so the vector is a well-defined count map
  std::sort(out.begin(), out.end());
  SparseVec merged;
  for (const auto& [idx, val] : out) {
    if (!merged.empty() && merged.back().first == idx)
      merged.back().second += val;
    else
      merged.emplace_back(idx, val);
  }
  return merged;
}

std::vector<double> REModel::score(const SparseVec& features) const {
  int k = num_classes();
  std::vector<double> logits(bias);
  for (const auto& [idx, val] : features) {
    const double* w = &weights[static_cast<std::size_t>(idx) * k];
    for (int c = 0; c < k; ++c) logits[c] += w[c] * val;
  }
  return softmax(std::move(logits));
}

RETrainResult train_re(std::span<const LabeledBag> bags,
                       const std::vector<std::string>& relation_labels,
                       const REConfig& config) {
  if (bags.empty()) throw std::runtime_error("train_re: no bags");
  bool any_positive = std::any_of(bags.begin(), bags.end(), [](const LabeledBag& b) {
    return !b.positive_relations.empty();
  });
  if (!any_positive) throw std::runtime_error("train_re: no positive bags");

  REModel model;
  model.hash_bits = config.hash_bits;
  model.class_labels = relation_labels;
  model.class_labels.push_back("<NA>");
  int k = model.num_classes();
  model.weights.assign(static_cast<std::size_t>(model.dim()) * k, 0.0);
  model.bias.assign(k, 0.0);

  // precompute features, flatten contexts per bag
  std::vector<std::vector<SparseVec>> feats(bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    for (const Context& c : bags[b].contexts)
      feats[b].push_back(featurize_context(c, config.hash_bits));
  }

  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);

  RETrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b : order) {
      const LabeledBag& bag = bags[b];
      const auto& ctx_feats = feats[b];
      if (ctx_feats.empty()) continue;
      std::size_t m = ctx_feats.size();

      std::vector<std::vector<double>> probs(m);
      for (std::size_t c = 0; c < m; ++c) probs[c] = model.score(ctx_feats[c]);

      // per-class max over contexts, renormalized
      std::vector<double> agg(k, 0.0);
      std::vector<int> arg(k, 0);
      for (int cls = 0; cls < k; ++cls) {
        for (std::size_t c = 0; c < m; ++c) {
          if (probs[c][cls] > agg[cls]) {
            agg[cls] = probs[c][cls];
            arg[cls] = static_cast<int>(c);
          }
        }
      }
      double total = std::accumulate(agg.begin(), agg.end(), 0.0);

      std::vector<int> labels = bag.positive_relations;
      if (labels.empty()) labels.push_back(model.na_class());
      double inv_l = 1.0 / static_cast<double>(labels.size());

      double loss = 0.0;
      for (int r : labels) loss -= inv_l * std::log(std::max(agg[r] / total, 1e-12));
      epoch_loss += loss;

      // d loss / d agg[k] = 1/total - [k in labels]/(|L| agg[k])
      std::vector<double> dagg(k, 1.0 / total);
      for (int r : labels) dagg[r] -= inv_l / std::max(agg[r], 1e-12);

      // route each class gradient to its argmax context, backprop softmax
      std::vector<std::vector<double>> dz(m, std::vector<double>(k, 0.0));
      for (std::size_t c = 0; c < m; ++c) {
        double dot = 0.0;
        for (int cls = 0; cls < k; ++cls) {
          if (arg[cls] == static_cast<int>(c)) dot += dagg[cls] * probs[c][cls];
        }
        for (int j = 0; j < k; ++j) {
          double g = (arg[j] == static_cast<int>(c)) ? dagg[j] : 0.0;
          dz[c][j] = probs[c][j] * (g - dot);
        }
      }

      double lr = config.learning_rate;
      for (std::size_t c = 0; c < m; ++c) {
        for (const auto& [idx, val] : ctx_feats[c]) {
          double* w = &model.weights[static_cast<std::size_t>(idx) * k];
          for (int j = 0; j < k; ++j) {
            if (config.l2 > 0) w[j] *= 1.0 - lr * config.l2;
            w[j] -= lr * dz[c][j] * val;
          }
        }
        for (int j = 0; j < k; ++j) model.bias[j] -= lr * dz[c][j];
      }
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(bags.size()));
  }
  result.model = std::move(model);
  return result;
}

KnowledgeGraph extract(const REModel& model, const ContextIndex& index,
                       const Vocab& corpus_entities, double min_confidence) {
  if (min_confidence < 0 || min_confidence > 1)
    throw std::runtime_error("min_confidence must be in [0,1]");
  int k = model.num_classes();
  struct Emit {
    std::string s, r, o;
    double conf;
  };
  std::vector<Emit> emits;
  for (const auto& [key, ctxs] : index.by_pair()) {
    std::vector<double> best(k, 0.0);
    for (const Context& c : ctxs) {
      std::vector<double> p = model.score(featurize_context(c, model.hash_bits));
      for (int cls = 0; cls < k; ++cls) best[cls] = std::max(best[cls], p[cls]);
    }
    for (int cls = 0; cls < model.na_class(); ++cls) {
      if (best[cls] >= min_confidence)
        emits.push_back(Emit{corpus_entities.label(key.first),
                             model.class_labels[cls],
                             corpus_entities.label(key.second), best[cls]});
    }
  }
  std::sort(emits.begin(), emits.end(), [](const Emit& a, const Emit& b) {
    return std::tie(a.s, a.r, a.o) < std::tie(b.s, b.r, b.o);
  });
  KnowledgeGraph out;
  for (const Emit& e : emits) out.add(e.s, e.r, e.o, e.conf);
  return out;
}

void REModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model: " + path);
  out << "remodel 1 " << hash_bits << ' ' << num_classes() << '\n';
  for (const auto& l : class_labels) out << l << '\n';
  char buf[64];
  out << "bias";
  for (double b : bias) {
    std::snprintf(buf, sizeof(buf), " %.17g", b);
    out << buf;
  }
  out << '\n';
  int k = num_classes();
  for (int f = 0; f < dim(); ++f) {
    const double* w = &weights[static_cast<std::size_t>(f) * k];
    bool any = std::any_of(w, w + k, [](double x) { return x != 0.0; });
    if (!any) continue;
    out << f;
    for (int j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof(buf), " %.17g", w[j]);
      out << buf;
    }
    out << '\n';
  }
}

REModel REModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  std::string magic;
  int version, bits, k;
  in >> magic >> version >> bits >> k;
  if (magic != "remodel" || version != 1)
    throw std::runtime_error("bad RE model file: " + path);
  std::string line;
  std::getline(in, line);
  REModel model;
  model.hash_bits = bits;
  for (int i = 0; i < k; ++i) {
    std::getline(in, line);
    model.class_labels.push_back(line);
  }
  model.weights.assign(static_cast<std::size_t>(model.dim()) * k, 0.0);
  model.bias.assign(k, 0.0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string head;
    row >> head;
    if (head == "bias") {
      for (int j = 0; j < k; ++j) row >> model.bias[j];
    } else {
      int f = std::stoi(head);
      for (int j = 0; j < k; ++j)
        row >> model.weights[static_cast<std::size_t>(f) * k + j];
    }
  }
  return model;
}

}  // namespace kbp
