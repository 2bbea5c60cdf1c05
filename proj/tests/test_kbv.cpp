#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "kbp/kbv.hpp"

using namespace kbp;

namespace {

KBVModel tiny_model(int dim, int rows, int relations, std::uint64_t seed) {
  KBVModel m;
  m.dim = dim;
  m.num_relations = relations;
  for (int i = 0; i < rows; ++i) {
    m.vocab.kept_labels.push_back("e" + std::to_string(i));
    m.vocab.rows.emplace(m.vocab.kept_labels.back(), i);
  }
  for (int r = 0; r < relations; ++r) {
    m.relation_labels.push_back("r" + std::to_string(r));
    m.relation_ids.emplace(m.relation_labels.back(), r);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  m.ent_emb.resize(static_cast<std::size_t>(rows) * dim);
  m.rel_emb.resize(static_cast<std::size_t>(2 * relations) * dim);
  for (double& x : m.ent_emb) x = u(rng);
  for (double& x : m.rel_emb) x = u(rng);
  m.d_ent.resize(dim);
  m.d_rel.resize(dim);
  m.comb_bias.resize(dim);
  for (double& x : m.d_ent) x = u(rng);
  for (double& x : m.d_rel) x = u(rng);
  for (double& x : m.comb_bias) x = u(rng);
  m.proj_bias.resize(rows);
  for (double& x : m.proj_bias) x = u(rng);
  return m;
}

KnowledgeGraph chain_kg(int n) {
  KnowledgeGraph kg;
  for (int i = 0; i < n; ++i)
    kg.add("a" + std::to_string(i), "r", "b" + std::to_string(i % 3), 1.0);
  return kg;
}

}  // namespace

TEST_CASE("build_vocab applies the min-count threshold") {
  KnowledgeGraph kg;
  // e3 appears 3 times, e2 twice, others once
  kg.add("e3", "r", "e2", 1.0);
  kg.add("e3", "r", "x1", 1.0);
  kg.add("x2", "r", "e3", 1.0);
  kg.add("e2", "r", "x3", 1.0);

  EmbeddingVocab v3 = build_vocab(kg, 3);
  CHECK(v3.row("e3"));
  CHECK(!v3.row("e2"));
  CHECK(!v3.row("x1"));

  EmbeddingVocab v1 = build_vocab(kg, 1);
  CHECK(v1.kept_labels.size() == kg.entities().size());

  CHECK_THROWS_AS(build_vocab(kg, 100), std::runtime_error);
}

TEST_CASE("forward: zero parameters give the uniform distribution") {
  KBVModel m = tiny_model(4, 5, 2, 1);
  std::fill(m.ent_emb.begin(), m.ent_emb.end(), 0.0);
  std::fill(m.rel_emb.begin(), m.rel_emb.end(), 0.0);
  std::fill(m.d_ent.begin(), m.d_ent.end(), 0.0);
  std::fill(m.d_rel.begin(), m.d_rel.end(), 0.0);
  std::fill(m.comb_bias.begin(), m.comb_bias.end(), 0.0);
  std::fill(m.proj_bias.begin(), m.proj_bias.end(), 0.0);
  std::vector<int> cands{0, 1, 2, 3};
  auto v = m.forward(0, 0, cands);
  for (double p : v) CHECK(p == doctest::Approx(0.25));

  std::vector<int> one{2};
  CHECK(m.forward(0, 1, one)[0] == doctest::Approx(1.0));
}

TEST_CASE("forward matches a hand-computed tanh/softmax at d=2") {
  KBVModel m = tiny_model(2, 3, 1, 1);
  m.ent_emb = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6};  // e0, e1, e2
  m.rel_emb = {0.2, 0.1, 0.0, 0.0};              // r0 fwd, r0 inv
  m.d_ent = {1.5, -0.5};
  m.d_rel = {2.0, 1.0};
  m.comb_bias = {0.05, -0.1};
  m.proj_bias = {0.01, 0.02, 0.03};

  double h0 = std::tanh(1.5 * 0.1 + 2.0 * 0.2 + 0.05);
  double h1 = std::tanh(-0.5 * -0.2 + 1.0 * 0.1 + -0.1);
  double z0 = 0.1 * h0 + -0.2 * h1 + 0.01;
  double z1 = 0.3 * h0 + 0.4 * h1 + 0.02;
  double z2 = -0.5 * h0 + 0.6 * h1 + 0.03;
  double mx = std::max({z0, z1, z2});
  double s = std::exp(z0 - mx) + std::exp(z1 - mx) + std::exp(z2 - mx);

  std::vector<int> cands{0, 1, 2};
  auto v = m.forward(0, 0, cands);
  CHECK(v[0] == doctest::Approx(std::exp(z0 - mx) / s).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(std::exp(z1 - mx) / s).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(std::exp(z2 - mx) / s).epsilon(1e-12));
}

TEST_CASE("forward is permutation-equivariant in the candidate list") {
  KBVModel m = tiny_model(4, 6, 2, 7);
  std::vector<int> cands{0, 2, 4, 5};
  std::vector<int> perm{5, 0, 4, 2};
  auto a = m.forward(1, 1, cands);
  auto b = m.forward(1, 1, perm);
  CHECK(a[0] == doctest::Approx(b[1]).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(b[3]).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(b[2]).epsilon(1e-12));
  CHECK(a[3] == doctest::Approx(b[0]).epsilon(1e-12));
}

TEST_CASE("loss: hand examples") {
  KBVModel m = tiny_model(4, 5, 1, 3);

  SUBCASE("one-hot target against uniform gives ln(n)") {
    // zero the parameters so the prediction is uniform over 4 candidates
    std::fill(m.ent_emb.begin(), m.ent_emb.end(), 0.0);
    std::fill(m.proj_bias.begin(), m.proj_bias.end(), 0.0);
    KBVQuery q;
    q.subject_row = 0;
    q.relation = 0;
    q.candidates = {1, 2, 3, 4};
    q.targets = {0, 1, 0, 0};
    CHECK(kbv_loss(m, std::span(&q, 1)) == doctest::Approx(std::log(4.0)));
  }
  SUBCASE("all-zero target contributes zero") {
    KBVQuery q;
    q.subject_row = 0;
    q.relation = 0;
    q.candidates = {1, 2};
    q.targets = {0, 0};
    CHECK(kbv_loss(m, std::span(&q, 1)) == doctest::Approx(0.0));
  }
}

TEST_CASE("loss equals the direct weighted-cross-entropy hand computation") {
  // v = (0.5, 0.25, 0.25), s = (0, 0.7, 0.3)
  // -(0.7 ln 0.25 + 0.3 ln 0.25) = 1.386294...
  // build a model whose softmax over 3 candidates is exactly (0.5,.25,.25):
  // logits ln2, 0, 0 via proj_bias with zero embeddings
  KBVModel m = tiny_model(2, 3, 1, 1);
  std::fill(m.ent_emb.begin(), m.ent_emb.end(), 0.0);
  m.proj_bias = {std::log(2.0), 0.0, 0.0};
  KBVQuery q;
  q.subject_row = 0;
  q.relation = 0;
  q.candidates = {0, 1, 2};
  q.targets = {0.0, 0.7, 0.3};
  CHECK(kbv_loss(m, std::span(&q, 1)) == doctest::Approx(1.3862943611).epsilon(1e-9));
}

TEST_CASE("one-hot degeneracy: loss equals standard cross-entropy") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    KBVModel m = tiny_model(3, 8, 2, rng());
    KBVQuery q;
    q.subject_row = static_cast<int>(rng() % 8);
    q.relation = static_cast<int>(rng() % 4);
    q.candidates = {0, 1, 2, 3, 4};
    q.targets.assign(5, 0.0);
    std::size_t hot = rng() % 5;
    q.targets[hot] = 1.0;

    // independent standard CE: -log softmax[hot]
    auto v = m.forward(q.subject_row, q.relation, q.candidates);
    double expected = -std::log(v[hot]);
    CHECK(kbv_loss(m, std::span(&q, 1)) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("scaling targets by c scales the loss by c") {
  KBVModel m = tiny_model(4, 6, 1, 3);
  KBVQuery q;
  q.subject_row = 2;
  q.relation = 1;
  q.candidates = {0, 1, 3, 5};
  q.targets = {0.2, 0.0, 0.5, 0.1};
  double base = kbv_loss(m, std::span(&q, 1));
  KBVQuery scaled = q;
  for (double& t : scaled.targets) t *= 0.37;
  CHECK(kbv_loss(m, std::span(&scaled, 1)) ==
        doctest::Approx(0.37 * base).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    int dim = 2 + static_cast<int>(rng() % 7);     // d <= 8
    int rows = 4 + static_cast<int>(rng() % 17);   // |E| <= 20
    int rels = 1 + static_cast<int>(rng() % 3);
    KBVModel m = tiny_model(dim, rows, rels, rng());

    std::vector<KBVQuery> queries(2);
    for (KBVQuery& q : queries) {
      q.subject_row = static_cast<int>(rng() % rows);
      q.relation = static_cast<int>(rng() % (2 * rels));
      int nc = 3 + static_cast<int>(rng() % 4);
      for (int i = 0; i < nc; ++i) {
        q.candidates.push_back(static_cast<int>(rng() % rows));
        q.targets.push_back(u(rng));
      }
    }

    KBVGradients g;
    kbv_loss_grad(m, queries, g);

    auto check_param = [&](std::vector<double>& param, std::vector<double>& grad) {
      for (std::size_t i = 0; i < param.size(); i += 1 + param.size() / 7) {
        double keep = param[i];
        const double h = 1e-5;
        param[i] = keep + h;
        double up = kbv_loss(m, queries);
        param[i] = keep - h;
        double dn = kbv_loss(m, queries);
        param[i] = keep;
        double fd = (up - dn) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        CHECK(std::abs(fd - grad[i]) / denom < 1e-4);
      }
    };
    check_param(m.ent_emb, g.ent_emb);
    check_param(m.rel_emb, g.rel_emb);
    check_param(m.d_ent, g.d_ent);
    check_param(m.d_rel, g.d_rel);
    check_param(m.comb_bias, g.comb_bias);
    check_param(m.proj_bias, g.proj_bias);
  }
}

TEST_CASE("training is deterministic per seed") {
  KnowledgeGraph kg = chain_kg(20);
  KBVConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 5;
  cfg.negatives = 4;
  cfg.min_count = 1;
  KBVTrainResult a = train_kbv(kg, cfg);
  KBVTrainResult b = train_kbv(kg, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.model.ent_emb == b.model.ent_emb);
}

TEST_CASE("confidence-1 quads match an all-ones target run") {
  // same KG loaded with explicit 1.0 confidences vs default: identical trace
  KnowledgeGraph kg1 = chain_kg(15);
  KnowledgeGraph kg2;
  for (const Quad& q : kg1.quads())
    kg2.add(kg1.entities().label(q.triple.subject),
            kg1.relations().label(q.triple.relation),
            kg1.entities().label(q.triple.object), 1.0);
  KBVConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 3;
  cfg.negatives = 4;
  cfg.min_count = 1;
  CHECK(train_kbv(kg1, cfg).loss_trace == train_kbv(kg2, cfg).loss_trace);
}

namespace {

// two deterministic relation patterns over 30 entities:
// likes: g_i -> h_i, made: h_i -> g_((i+1) mod 10)
KnowledgeGraph toy_patterned() {
  KnowledgeGraph kg;
  for (int i = 0; i < 10; ++i) {
    std::string g = "g" + std::to_string(i), h = "h" + std::to_string(i);
    kg.add(g, "likes", h, 1.0);
    kg.add(h, "made", "g" + std::to_string((i + 1) % 10), 1.0);
    kg.add(g, "likes", "h" + std::to_string((i + 5) % 10), 1.0);
    kg.add("h" + std::to_string((i + 3) % 10), "made", g, 1.0);
  }
  return kg;
}

}  // namespace

TEST_CASE("toy KG: held-out true triples rank above corruptions, MRR > 0.5") {
  KnowledgeGraph kg = toy_patterned();
  KBVConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 200;
  cfg.negatives = 16;
  cfg.min_count = 1;
  cfg.learning_rate = 0.05;
  KBVTrainResult r = train_kbv(kg, cfg);

  // brute-force ranking oracle: rank each training triple's score among
  // all object corruptions
  double mrr = 0.0;
  int n = 0;
  for (const Quad& q : kg.quads()) {
    std::string s = kg.entities().label(q.triple.subject);
    std::string rel = kg.relations().label(q.triple.relation);
    std::string o = kg.entities().label(q.triple.object);
    double true_score = *r.model.score(s, rel, o);
    int rank = 1;
    for (const std::string& cand : r.model.vocab.kept_labels) {
      if (cand == o) continue;
      if (kg.contains({q.triple.subject, q.triple.relation,
                       *kg.entities().find(cand)}))
        continue;  // filtered ranking
      if (*r.model.score(s, rel, cand) > true_score) ++rank;
    }
    mrr += 1.0 / rank;
    ++n;
  }
  mrr /= n;
  CHECK(mrr > 0.5);
}

TEST_CASE("score_triple: missing embeddings and range") {
  KnowledgeGraph kg;
  // "rare" appears twice, everything else 3+ times
  kg.add("a", "r", "b", 1.0);
  kg.add("b", "r", "c", 1.0);
  kg.add("c", "r", "a", 1.0);
  kg.add("a", "r", "c", 1.0);
  kg.add("b", "r", "a", 1.0);
  kg.add("rare", "r", "a", 1.0);
  kg.add("rare", "r", "b", 1.0);
  KBVConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 5;
  cfg.negatives = 2;
  cfg.min_count = 3;
  KBVTrainResult r = train_kbv(kg, cfg);

  CHECK(!r.model.score("rare", "r", "a"));        // below min_count
  CHECK(!r.model.score("unknown", "r", "a"));     // never seen
  auto s = r.model.score("a", "r", "b");
  REQUIRE(s);
  CHECK(*s >= 0.0);
  CHECK(*s <= 1.0);
}

TEST_CASE("model save/load roundtrip preserves scores") {
  KnowledgeGraph kg = chain_kg(12);
  KBVConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 4;
  cfg.negatives = 3;
  cfg.min_count = 1;
  KBVTrainResult r = train_kbv(kg, cfg);
  std::string path = "/tmp/kbp_kbv_model_test.txt";
  r.model.save(path);
  KBVModel loaded = KBVModel::load(path);
  auto a = r.model.score("a0", "r", "b0");
  auto b = loaded.score("a0", "r", "b0");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a == doctest::Approx(*b).epsilon(1e-12));
}
