#include "kbp/kg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kbp {

int Vocab::intern(const std::string& label) {
  auto it = ids_.find(label);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(labels_.size());
  labels_.push_back(label);
  ids_.emplace(label, id);
  return id;
}

std::optional<int> Vocab::find(const std::string& label) const {
  auto it = ids_.find(label);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {
std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}
}  // namespace

int KnowledgeGraph::add(const std::string& subject, const std::string& relation,
                        const std::string& object, double confidence) {
  Triple t{entities_.intern(subject), relations_.intern(relation),
           entities_.intern(object)};
  return add(t, confidence);
}

int KnowledgeGraph::add(const Triple& t, double confidence) {
  auto it = by_triple_.find(t);
  if (it != by_triple_.end()) {
    int idx = it->second;
    quads_[idx].confidence = std::max(quads_[idx].confidence, confidence);
    return idx;
  }
  int idx = static_cast<int>(quads_.size());
  quads_.push_back(Quad{t, confidence});
  by_triple_.emplace(t, idx);
  by_subject_[t.subject].push_back(idx);
  by_object_[t.object].push_back(idx);
  by_pair_[pair_key(t.subject, t.object)].push_back(idx);
  return idx;
}

std::optional<double> KnowledgeGraph::confidence(const Triple& t) const {
  auto it = by_triple_.find(t);
  if (it == by_triple_.end()) return std::nullopt;
  return quads_[it->second].confidence;
}

namespace {
std::span<const int> lookup(const std::unordered_map<int, std::vector<int>>& m,
                            int key) {
  auto it = m.find(key);
  if (it == m.end()) return {};
  return it->second;
}
}  // namespace

std::span<const int> KnowledgeGraph::quads_with_subject(int entity) const {
  return lookup(by_subject_, entity);
}

std::span<const int> KnowledgeGraph::quads_with_object(int entity) const {
  return lookup(by_object_, entity);
}

std::span<const int> KnowledgeGraph::quads_with_pair(int subject, int object) const {
  auto it = by_pair_.find(pair_key(subject, object));
  if (it == by_pair_.end()) return {};
  return it->second;
}

int KnowledgeGraph::connectivity(int entity) const {
  auto subj = quads_with_subject(entity);
  auto obj = quads_with_object(entity);
  int count = static_cast<int>(subj.size());
  for (int idx : obj) {
    if (quads_[idx].triple.subject != entity) ++count;  // self-loops once
  }
  return count;
}

int connectivity(int entity, std::span<const Quad> quads) {
  int count = 0;
  for (const Quad& q : quads) {
    if (q.triple.subject == entity || q.triple.object == entity) ++count;
  }
  return count;
}

KnowledgeGraph load_quads(const std::string& path, double default_confidence) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open quad file: " + path);
  KnowledgeGraph kg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 3 && fields.size() != 4)
      fail("expected 3 or 4 tab-separated fields, got " +
           std::to_string(fields.size()));
    double conf = default_confidence;
    if (fields.size() == 4) {
      try {
        std::size_t pos = 0;
        conf = std::stod(fields[3], &pos);
        if (pos != fields[3].size()) fail("non-numeric confidence '" + fields[3] + "'");
      } catch (const std::logic_error&) {
        fail("non-numeric confidence '" + fields[3] + "'");
      }
      if (conf < 0.0 || conf > 1.0)
        fail("confidence " + fields[3] + " outside [0,1]");
    }
    kg.add(fields[0], fields[1], fields[2], conf);
  }
  return kg;
}

void save_quads(const KnowledgeGraph& kg, const std::string& path,
                bool with_confidence) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write quad file: " + path);
  char buf[64];
  for (const Quad& q : kg.quads()) {
    out << kg.entities().label(q.triple.subject) << '\t'
        << kg.relations().label(q.triple.relation) << '\t'
        << kg.entities().label(q.triple.object);
    if (with_confidence) {
      std::snprintf(buf, sizeof(buf), "%.6f", q.confidence);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

DatasetSplit split(const KnowledgeGraph& kg, std::array<double, 3> fractions,
                   std::uint64_t seed) {
  double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::runtime_error("split fractions must sum to 1");
  for (double f : fractions) {
    if (f <= 0.0) throw std::runtime_error("split fractions must be positive");
  }
  const auto& quads = kg.quads();
  std::vector<std::size_t> order(quads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n = quads.size();
  std::size_t n_train = static_cast<std::size_t>(n * fractions[0]);
  std::size_t n_valid = static_cast<std::size_t>(n * fractions[1]);
  DatasetSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    const Quad& q = quads[order[i]];
    if (i < n_train)
      out.train.push_back(q);
    else if (i < n_train + n_valid)
      out.validation.push_back(q);
    else
      out.test.push_back(q);
  }
  return out;
}

}  // namespace kbp
