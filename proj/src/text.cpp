#include "kbp/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kbp {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);
  Corpus corpus;
  std::string line;
  int lineno = 0;
  bool jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (jsonl || line[0] == '{') {
      auto parsed = nlohmann::json::parse(line, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("id") || !parsed.contains("text")) {
        ++corpus.skipped;
        continue;
      }
      corpus.docs.push_back({parsed["id"].get<std::string>(),
                             parsed["text"].get<std::string>()});
    } else {
      corpus.docs.push_back({std::to_string(lineno), line});
    }
  }
  return corpus;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur.push_back(text[i]);
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() ||
         std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (cur.find_first_not_of(" \t\r\n") != std::string::npos) out.push_back(cur);
  return out;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (char c : sentence) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct(c)) {
      flush();
      tokens.push_back(std::string(1, c));
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tokens;
}

Gazetteer::Gazetteer(const Vocab& entities) {
  for (std::size_t id = 0; id < entities.size(); ++id) {
    std::vector<std::string> toks = tokenize(entities.label(static_cast<int>(id)));
    if (toks.empty()) continue;
    for (auto& t : toks) t = lower(t);
    std::string first = toks.front();
    by_first_[first].push_back(Entry{std::move(toks), static_cast<int>(id)});
  }
  for (auto& [first, entries] : by_first_) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) {
                if (a.tokens.size() != b.tokens.size())
                  return a.tokens.size() > b.tokens.size();
                return a.entity < b.entity;
              });
  }
}

std::vector<Mention> Gazetteer::match(std::span<const std::string> tokens) const {
  std::vector<std::string> low(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) low[i] = lower(tokens[i]);

  std::vector<Mention> mentions;
  std::size_t i = 0;
  while (i < tokens.size()) {
    auto it = by_first_.find(low[i]);
    const Entry* hit = nullptr;
    if (it != by_first_.end()) {
      for (const Entry& e : it->second) {  // longest first
        if (i + e.tokens.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t j = 1; j < e.tokens.size(); ++j) {
          if (low[i + j] != e.tokens[j]) {
            ok = false;
            break;
          }
        }
        if (ok) {
          hit = &e;
          break;
        }
      }
    }
    if (hit) {
      mentions.push_back(Mention{hit->entity, static_cast<int>(i),
                                 static_cast<int>(i + hit->tokens.size())});
      i += hit->tokens.size();
    } else {
      ++i;
    }
  }
  return mentions;
}

void ContextIndex::add(int a, int b, Context ctx) {
  std::pair<int, int> norm{std::min(a, b), std::max(a, b)};
  auto it = canon_.find(norm);
  if (it == canon_.end()) it = canon_.emplace(norm, std::make_pair(a, b)).first;
  by_pair_[it->second].push_back(std::move(ctx));
}

std::span<const Context> ContextIndex::pair_contexts(int a, int b) const {
  auto it = canon_.find({std::min(a, b), std::max(a, b)});
  if (it == canon_.end()) return {};
  auto jt = by_pair_.find(it->second);
  if (jt == by_pair_.end()) return {};
  return jt->second;
}

std::vector<const Context*> ContextIndex::entity_contexts(int entity) const {
  std::vector<const Context*> out;
  for (const auto& [key, ctxs] : by_pair_) {
    if (key.first != entity && key.second != entity) continue;
    for (const Context& c : ctxs) out.push_back(&c);
  }
  return out;
}

ContextIndex build_context_index(const Corpus& corpus, const Gazetteer& gaz,
                                 int window) {
  if (window < 1) throw std::runtime_error("window must be >= 1");
  ContextIndex index;
  index.skipped_docs = corpus.skipped;
  for (const Document& doc : corpus.docs) {
    for (const std::string& sentence : split_sentences(doc.text)) {
      std::vector<std::string> tokens = tokenize(sentence);
      std::vector<Mention> mentions = gaz.match(tokens);
      if (mentions.size() < 2) continue;
      // one context per unordered pair of distinct entities, first
      // mention pair wins
      std::vector<std::pair<int, int>> seen;
      for (std::size_t i = 0; i < mentions.size(); ++i) {
        for (std::size_t j = i + 1; j < mentions.size(); ++j) {
          const Mention& m1 = mentions[i];
          const Mention& m2 = mentions[j];
          if (m1.entity == m2.entity) continue;
          std::pair<int, int> norm{std::min(m1.entity, m2.entity),
                                   std::max(m1.entity, m2.entity)};
          if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
          seen.push_back(norm);

          int lo = std::max(0, m1.begin - window);
          int hi = std::min(static_cast<int>(tokens.size()), m2.end + window);
          Context ctx;
          ctx.doc_id = doc.id;
          ctx.tokens.assign(tokens.begin() + lo, tokens.begin() + hi);
          ctx.e1 = m1.entity;
          ctx.e2 = m2.entity;
          ctx.span1_begin = m1.begin - lo;
          ctx.span1_end = m1.end - lo;
          ctx.span2_begin = m2.begin - lo;
          ctx.span2_end = m2.end - lo;
          index.add(m1.entity, m2.entity, std::move(ctx));
        }
      }
    }
  }
  return index;
}

void dump_contexts(const ContextIndex& index, const Vocab& entities,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write contexts: " + path);
  for (const auto& [key, ctxs] : index.by_pair()) {
    for (const Context& c : ctxs) {
      out << c.doc_id << '\t' << entities.label(c.e1) << '\t'
          << entities.label(c.e2) << '\t' << c.span1_begin << ':' << c.span1_end
          << '\t' << c.span2_begin << ':' << c.span2_end << '\t';
      for (std::size_t i = 0; i < c.tokens.size(); ++i) {
        if (i) out << ' ';
        out << c.tokens[i];
      }
      out << '\n';
    }
  }
}

ContextIndex load_contexts(const std::string& path, Vocab& entities) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open contexts: " + path);
  ContextIndex index;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
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
    auto parse_span = [&](const std::string& s, int& b, int& e) {
      std::size_t colon = s.find(':');
      b = std::stoi(s.substr(0, colon));
      e = std::stoi(s.substr(colon + 1));
    };
    Context ctx;
    ctx.doc_id = fields[0];
    ctx.e1 = entities.intern(fields[1]);
    ctx.e2 = entities.intern(fields[2]);
    parse_span(fields[3], ctx.span1_begin, ctx.span1_end);
    parse_span(fields[4], ctx.span2_begin, ctx.span2_end);
    std::istringstream toks(fields[5]);
    std::string t;
    while (toks >> t) ctx.tokens.push_back(t);
    index.add(ctx.e1, ctx.e2, std::move(ctx));
  }
  return index;
}

std::vector<LabeledBag> label_bags(const ContextIndex& index,
                                   const KnowledgeGraph& kg_train,
                                   const Vocab& corpus_entities,
                                   double na_ratio, std::uint64_t seed) {
  if (na_ratio < 0) throw std::runtime_error("na_ratio must be >= 0");
  std::vector<LabeledBag> positives;
  std::vector<LabeledBag> na_candidates;
  for (const auto& [key, ctxs] : index.by_pair()) {
    LabeledBag bag;
    bag.pair = key;
    bag.contexts = ctxs;
    auto a = kg_train.entities().find(corpus_entities.label(key.first));
    auto b = kg_train.entities().find(corpus_entities.label(key.second));
    if (a && b) {
      for (int idx : kg_train.quads_with_pair(*a, *b))
        bag.positive_relations.push_back(kg_train.quads()[idx].triple.relation);
      std::sort(bag.positive_relations.begin(), bag.positive_relations.end());
    }
    if (!bag.positive_relations.empty())
      positives.push_back(std::move(bag));
    else
      na_candidates.push_back(std::move(bag));
  }

  std::size_t n_na = static_cast<std::size_t>(
      std::llround(na_ratio * static_cast<double>(positives.size())));
  n_na = std::min(n_na, na_candidates.size());
  std::mt19937_64 rng(seed);
  std::shuffle(na_candidates.begin(), na_candidates.end(), rng);
  na_candidates.resize(n_na);
  std::sort(na_candidates.begin(), na_candidates.end(),
            [](const LabeledBag& x, const LabeledBag& y) { return x.pair < y.pair; });

  std::vector<LabeledBag> out = std::move(positives);
  out.insert(out.end(), std::make_move_iterator(na_candidates.begin()),
             std::make_move_iterator(na_candidates.end()));
  return out;
}

}  // namespace kbp
