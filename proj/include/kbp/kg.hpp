#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kbp {

// Interning vocabulary. Ids are dense in [0, size()) and label <-> id
// roundtrips exactly. Labels are case-sensitive.
class Vocab {
 public:
  int intern(const std::string& label);
  std::optional<int> find(const std::string& label) const;
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> ids_;
};

struct Triple {
  int subject = -1;
  int relation = -1;
  int object = -1;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : {t.subject, t.relation, t.object}) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct Quad {
  Triple triple;
  double confidence = 1.0;
};

// Drops the confidence of a quad.
inline Triple tau(const Quad& q) { return q.triple; }

// Entity/relation vocabularies plus an indexed quad store. Duplicate
// triples keep the maximum confidence. Immutable once built; concurrent
// readers are safe after the last add().
class KnowledgeGraph {
 public:
  Vocab& entities() { return entities_; }
  const Vocab& entities() const { return entities_; }
  Vocab& relations() { return relations_; }
  const Vocab& relations() const { return relations_; }

  // Interns labels as needed; returns the index of the stored quad.
  int add(const std::string& subject, const std::string& relation,
          const std::string& object, double confidence);
  int add(const Triple& t, double confidence);

  const std::vector<Quad>& quads() const { return quads_; }
  bool contains(const Triple& t) const { return by_triple_.count(t) > 0; }
  std::optional<double> confidence(const Triple& t) const;

  std::span<const int> quads_with_subject(int entity) const;
  std::span<const int> quads_with_object(int entity) const;
  // Quads with exactly this (subject, object) pair, in that order.
  std::span<const int> quads_with_pair(int subject, int object) const;

  // Number of quads in which the entity is subject or object; a
  // self-loop counts once.
  int connectivity(int entity) const;

 private:
  Vocab entities_;
  Vocab relations_;
  std::vector<Quad> quads_;
  std::unordered_map<Triple, int, TripleHash> by_triple_;
  std::unordered_map<int, std::vector<int>> by_subject_;
  std::unordered_map<int, std::vector<int>> by_object_;
  std::unordered_map<std::uint64_t, std::vector<int>> by_pair_;
};

// Linear-scan connectivity, shared by the indexed version's tests.
int connectivity(int entity, std::span<const Quad> quads);

struct DatasetSplit {
  std::vector<Quad> train;
  std::vector<Quad> validation;
  std::vector<Quad> test;
};

// Tab-separated, one record per line, '#' starts a comment line.
// 3 fields = triple (gets default_confidence), 4 fields = quad.
// Malformed lines raise std::runtime_error naming the line number.
KnowledgeGraph load_quads(const std::string& path, double default_confidence = 1.0);
void save_quads(const KnowledgeGraph& kg, const std::string& path,
                bool with_confidence = true);

// Deterministic per seed. Fractions must be positive and sum to 1
// within 1e-9; train and validation take the floor, test the remainder.
DatasetSplit split(const KnowledgeGraph& kg, std::array<double, 3> fractions,
                   std::uint64_t seed);

}  // namespace kbp
