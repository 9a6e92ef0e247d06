#include "doctest.h"

#include "fixtures.hpp"
#include "stats.hpp"

#include "kged/errors.hpp"
#include "kged/noise.hpp"
#include "kged/synthetic.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>

using namespace kged;
using kged::testing::TempDir;

namespace {

const KnowledgeGraph& small_synthetic() {
  static const KnowledgeGraph kg = [] {
    SyntheticConfig c;
    c.entities = 60;
    c.relations = 4;
    c.triplets = 400;
    c.clusters = 3;
    c.seed = 5;
    return make_synthetic_kg(c);
  }();
  return kg;
}

AdversarialConfig quick_adversarial() {
  AdversarialConfig a;
  a.transe.dim = 8;
  a.transe.epochs = 10;
  a.transe.seed = 3;
  return a;
}

void check_dataset(const KnowledgeGraph& kg, const NoisyDataset& d, Index expected_noise) {
  CHECK(d.noisy_count() == expected_noise);
  CHECK(static_cast<Index>(d.items.size()) == kg.triplet_count() + expected_noise);
  TripletSet seen;
  for (const auto& n : d.items) {
    CHECK(seen.insert(n.triplet).second);
    if (n.noisy) {
      CHECK_FALSE(kg.contains(n.triplet));
      CHECK(kg.contains(n.provenance));
      const int changed = (n.triplet.head != n.provenance.head) + (n.triplet.relation != n.provenance.relation) +
                          (n.triplet.tail != n.provenance.tail);
      CHECK(changed == 1);
    } else {
      CHECK(kg.contains(n.triplet));
      CHECK(n.kind == NoiseKind::None);
    }
  }
}

}  // namespace

TEST_CASE("noise counts") {
  CHECK(noise_target(5000, 0.05) == 250);
  CHECK(noise_target(1000, 0.05) == 50);
  CHECK(noise_target(100, 0.07) == 7);
  CHECK(noise_target(10, 0.15) == 1);
  const KnowledgeGraph& kg = small_synthetic();
  check_dataset(kg, inject_random(kg, 0.1, 1), 40);
  check_dataset(kg, inject_semantic(kg, 0.1, HashedEmbedder(), 1), 40);
  CHECK_THROWS_AS(inject_random(kg, 0.0, 1), UsageError);
  CHECK_THROWS_AS(inject_random(kg, 1.0, 1), UsageError);
}

TEST_CASE("a complete graph leaves no room for random noise") {
  const KnowledgeGraph kg({{0, "a", "a", ""}, {1, "b", "b", ""}}, {{0, "r", "r"}},
                          {{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}});
  CHECK_THROWS_AS(inject_random(kg, 0.5, 3), DataError);
}

TEST_CASE("random noise picks each slot a third of the time") {
  const KnowledgeGraph kg = kged::testing::word_graph(200, 20, 3000, 8);
  const NoisyDataset d = inject_random(kg, 0.9, 4);
  std::map<Slot, long> slots;
  long total = 0;
  for (std::uint64_t seed = 4; total < 30000; ++seed)
    for (const auto& n : inject_random(kg, 0.9, seed).items)
      if (n.noisy) {
        ++slots[n.slot];
        ++total;
      }
  for (Slot s : {Slot::Head, Slot::Relation, Slot::Tail})
    CHECK(std::abs(static_cast<double>(slots[s]) / static_cast<double>(total) - 1.0 / 3.0) <= 0.02);
  check_dataset(kg, d, noise_target(3000, 0.9));
}

TEST_CASE("hashed embedder") {
  const HashedEmbedder emb(64);
  const Entity e{0, "x", "Red River", "the stone tower"};
  CHECK(emb.embed(e) == emb.embed(e));
  CHECK(emb.embed(e).norm() == doctest::Approx(1.0));
  CHECK(emb.embed(e) == emb.embed_words({"red", "river", "the", "stone", "tower"}));
  CHECK(emb.embed({0, "tok", "", ""}).norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(HashedEmbedder(4), UsageError);

  // Unrelated single words are close to orthogonal on average.
  const HashedEmbedder wide(256);
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < 60; ++i)
    for (int j = i + 1; j < 60; ++j) {
      sum += wide.embed_words({"w" + std::to_string(i)}).dot(wide.embed_words({"w" + std::to_string(j)}));
      ++pairs;
    }
  CHECK(std::abs(sum / pairs) < 0.05);
}

TEST_CASE("semantic sampling distribution") {
  RowVector a(2);
  a << 1.0, 0.0;
  RowVector c1(2), c2(2), c3(2);
  c1 << 2.0, 0.0;
  c2 << 1.0, 5.0;
  c3 << 0.0, 1.0;
  const auto p = semantic_distribution(a, {c1, c2, c3});
  CHECK(p[0] == doctest::Approx(0.66524).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(semantic_distribution(a, {}).empty());

  // Draws follow the distribution.
  Rng rng(9);
  for (int set = 0; set < 5; ++set) {
    std::vector<RowVector> cand;
    const RowVector anchor = RowVector::NullaryExpr(6, [&] { return rng.normal(); });
    const std::size_t n = 3 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) cand.push_back(RowVector::NullaryExpr(6, [&] { return 0.5 * rng.normal(); }));
    const auto q = semantic_distribution(anchor, cand);
    std::vector<long> hits(n, 0);
    for (int k = 0; k < 20000; ++k) ++hits[sample_discrete(q, rng)];
    CHECK(kged::testing::chi_square(hits, q).p_value > 0.001);
  }
}

TEST_CASE("semantic noise stays within the relation's observed entities") {
  const KnowledgeGraph& kg = small_synthetic();
  const NoisyDataset d = inject_semantic(kg, 0.2, HashedEmbedder(), 2);
  for (const auto& n : d.items) {
    if (!n.noisy) continue;
    CHECK(n.kind == NoiseKind::Semantic);
    CHECK(n.slot != Slot::Relation);
    const auto& pool = n.slot == Slot::Head ? kg.heads_of(n.triplet.relation) : kg.tails_of(n.triplet.relation);
    const Index e = n.slot == Slot::Head ? n.triplet.head : n.triplet.tail;
    CHECK(std::binary_search(pool.begin(), pool.end(), e));
  }
  CHECK(inject_semantic(kg, 0.2, HashedEmbedder(), 2).triplets() == d.triplets());
}

TEST_CASE("adversarial noise comes from the trained model's top ten") {
  const KnowledgeGraph& kg = small_synthetic();
  AdversarialTrace trace;
  const NoisyDataset d = inject_adversarial(kg, 0.05, quick_adversarial(), 6, &trace);
  check_dataset(kg, d, 20);
  REQUIRE(trace.noise.size() == 20);
  std::map<Triplet, Triplet> source;
  for (const auto& n : d.items)
    if (n.noisy) source[n.triplet] = n.provenance;
  for (std::size_t i = 0; i < trace.noise.size(); ++i) {
    const Triplet t = trace.noise[i];
    const EmbeddingModel& m = trace.models.at(static_cast<std::size_t>(trace.iteration[i]));
    std::vector<std::pair<double, Index>> all;
    for (Index e = 0; e < kg.entity_count(); ++e) all.push_back({baseline_score(m, t.head, t.relation, e), e});
    std::sort(all.begin(), all.end());
    bool in_top = false;
    for (int k = 0; k < 10; ++k) in_top |= all[static_cast<std::size_t>(k)].second == t.tail;
    CHECK(in_top);
    CHECK(t.tail != source.at(t).tail);
  }
}

TEST_CASE("mixed noise splits the budget evenly") {
  const KnowledgeGraph& kg = small_synthetic();
  const auto d = inject_mixed(kg, 0.1, {NoiseKind::Random, NoiseKind::Semantic, NoiseKind::Adversarial},
                              HashedEmbedder(), quick_adversarial(), 8);
  check_dataset(kg, d, 40);
  CHECK(d.count(NoiseKind::Random) == 14);
  CHECK(d.count(NoiseKind::Semantic) == 13);
  CHECK(d.count(NoiseKind::Adversarial) == 13);
  CHECK_THROWS_AS(inject_mixed(kg, 0.1, {}, HashedEmbedder(), quick_adversarial(), 8), UsageError);
}

TEST_CASE("dataset files round trip") {
  const KnowledgeGraph& kg = small_synthetic();
  const NoisyDataset d = inject_random(kg, 0.05, 11);
  TempDir dir("noise_files");
  save_kg(kg, dir.path / "t.tsv", dir.path / "e.tsv", dir.path / "r.tsv");
  write_dataset(dir.path / "d.tsv", d, kg);
  write_manifest(dir.path / "m.json", d);

  const auto lines = read_lines(dir.path / "d.tsv");
  REQUIRE(lines.size() == d.items.size());
  const auto f = split_tabs(lines[0]);
  REQUIRE(f.size() == 5);
  CHECK(f[3] == (d.items[0].noisy ? "1" : "0"));
  CHECK(f[4] == noise_name(d.items[0].kind));

  const LabeledGraph back = load_dataset(dir.path / "d.tsv", dir.path / "e.tsv", dir.path / "r.tsv");
  REQUIRE(back.kg.triplet_count() == static_cast<Index>(d.items.size()));
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    CHECK(back.labels[i] == d.items[i].noisy);
    CHECK(back.kinds[i] == d.items[i].kind);
    const Triplet t = back.kg.triplets()[i];
    CHECK(back.kg.entities()[t.head].token == kg.entities()[d.items[i].triplet.head].token);
  }

  const auto m = nlohmann::json::parse(std::ifstream(dir.path / "m.json"));
  CHECK(m["noisy"] == 20);
  CHECK(m["correct"] == 400);
  CHECK(m["counts"]["random"] == 20);
  CHECK(m["kind_mix"] == nlohmann::json::array({"random"}));

  dir.write("bad.tsv", "e0\tr0\te1\t2\trandom\n");
  CHECK_THROWS_AS(load_dataset(dir.path / "bad.tsv", dir.path / "e.tsv", dir.path / "r.tsv"), DataError);
}

TEST_CASE("synthetic graphs") {
  SyntheticConfig c;
  c.entities = 80;
  c.relations = 5;
  c.triplets = 600;
  c.seed = 2;
  const KnowledgeGraph kg = make_synthetic_kg(c);
  CHECK(kg.triplet_count() == 600);
  CHECK(kg.duplicates_dropped() == 0);
  for (Index r = 0; r < 5; ++r) CHECK(kg.tails_of(r).size() >= 2);
  for (const auto& e : kg.entities()) CHECK_FALSE(e.description.empty());
  const KnowledgeGraph again = make_synthetic_kg(c);
  CHECK(again.triplets() == kg.triplets());
  CHECK(again.entities()[7].description == kg.entities()[7].description);

  // One cluster: every description draws on the same cluster vocabulary.
  c.clusters = 1;
  CHECK(make_synthetic_kg(c).triplet_count() == 600);
  c.triplets = 80 * 80 * 5 + 1;
  CHECK_THROWS_AS(make_synthetic_kg(c), UsageError);
}
