#include "kged/synthetic.hpp"

#include "kged/errors.hpp"
#include "kged/rng.hpp"

#include <array>
#include <string>
#include <unordered_set>

namespace kged {

namespace {

constexpr std::array<std::string_view, 16> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n",
                                                   "p", "r", "s", "t", "v", "z", "ch", "sh"};
constexpr std::array<std::string_view, 6> kVowels{"a", "e", "i", "o", "u", "y"};

// Distinct pronounceable words drawn from one seeded stream.
class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed) {}

  std::string make(int syllables) {
    while (true) {
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += kOnsets[rng_.below(kOnsets.size())];
        w += kVowels[rng_.below(kVowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng rng_;
  std::unordered_set<std::string> used_;
};

}  // namespace

KnowledgeGraph make_synthetic_kg(const SyntheticConfig& c) {
  if (c.entities < 2 || c.relations < 1 || c.triplets < 1 || c.clusters < 1 || c.facets < 1)
    throw UsageError("synthetic graph counts must be positive (and at least two entities)");
  if (c.clusters > c.entities) throw UsageError("more clusters than entities");
  const double possible = static_cast<double>(c.entities) * static_cast<double>(c.entities - 1) *
                          static_cast<double>(c.relations);
  if (static_cast<double>(c.triplets) > possible)
    throw UsageError("cannot place " + std::to_string(c.triplets) + " distinct triplets: only " +
                     std::to_string(static_cast<long long>(possible)) + " non-loop edges exist");
  if (c.triplets < 2 * c.relations)
    throw UsageError("need at least two triplets per relation so that every relation reaches two tails");

  Rng rng(derive_seed(c.seed, {0x73796e}));
  WordMaker words(derive_seed(c.seed, {0x776f7264}));

  // Balanced cluster and facet assignment.
  std::vector<Index> cluster(static_cast<std::size_t>(c.entities)), facet(cluster.size());
  for (Index e = 0; e < c.entities; ++e) {
    cluster[static_cast<std::size_t>(e)] = e % c.clusters;
    facet[static_cast<std::size_t>(e)] = (e / c.clusters) % c.facets;
  }
  rng.shuffle(cluster);
  rng.shuffle(facet);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(c.clusters * c.facets));
  std::vector<std::vector<Index>> in_cluster(static_cast<std::size_t>(c.clusters));
  for (Index e = 0; e < c.entities; ++e) {
    const auto k = static_cast<std::size_t>(cluster[static_cast<std::size_t>(e)]);
    in_cluster[k].push_back(e);
    members[k * static_cast<std::size_t>(c.facets) + static_cast<std::size_t>(facet[static_cast<std::size_t>(e)])]
        .push_back(e);
  }

  // Vocabularies.
  auto vocabulary = [&](Index n, int syllables) {
    std::vector<std::string> v;
    for (Index i = 0; i < n; ++i) v.push_back(words.make(syllables));
    return v;
  };
  std::vector<std::vector<std::string>> cluster_words, facet_words;
  for (Index k = 0; k < c.clusters; ++k) cluster_words.push_back(vocabulary(12, 3));
  for (Index f = 0; f < c.facets; ++f) facet_words.push_back(vocabulary(6, 3));
  const std::vector<std::string> filler = vocabulary(24, 2);

  std::vector<Entity> entities;
  for (Index e = 0; e < c.entities; ++e) {
    Entity ent;
    ent.id = e;
    ent.token = "e" + std::to_string(e);
    ent.name = words.make(2) + " " + words.make(2);
    const auto& cw = cluster_words[static_cast<std::size_t>(cluster[static_cast<std::size_t>(e)])];
    const auto& fw = facet_words[static_cast<std::size_t>(facet[static_cast<std::size_t>(e)])];
    std::string d;
    for (Index w = 0; w < c.description_words; ++w) {
      const double u = rng.uniform();
      const std::string& word = u < 0.45 ? cw[rng.below(cw.size())] : u < 0.75 ? fw[rng.below(fw.size())]
                                                                             : filler[rng.below(filler.size())];
      if (!d.empty()) d += ' ';
      d += word;
    }
    ent.description = std::move(d);
    entities.push_back(std::move(ent));
  }

  struct Pattern {
    Index source, target;
    bool coupled;
    std::vector<Index> facet_map;
  };
  std::vector<Relation> relations;
  std::vector<Pattern> patterns;
  const Index coupled = static_cast<Index>(c.coupled_share * static_cast<double>(c.relations) + 0.5);
  for (Index r = 0; r < c.relations; ++r) {
    relations.push_back({r, "r" + std::to_string(r), words.make(2) + " " + words.make(2)});
    Pattern p;
    p.source = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.clusters)));
    p.target = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.clusters)));
    p.coupled = r < coupled;
    for (Index f = 0; f < c.facets; ++f) p.facet_map.push_back(f);
    rng.shuffle(p.facet_map);
    patterns.push_back(std::move(p));
  }

  TripletSet seen;
  std::vector<Triplet> triplets;
  auto place = [&](const Triplet& t) {
    if (t.head == t.tail || !seen.insert(t).second) return false;
    triplets.push_back(t);
    return true;
  };
  auto pick = [&](const std::vector<Index>& pool) { return pool[rng.below(pool.size())]; };
  auto uniform_entity = [&] { return static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.entities))); };

  // Patterned draws; after repeated failures a relation falls back to
  // uniform endpoints so dense requests still terminate.
  std::vector<int> misses(static_cast<std::size_t>(c.relations), 0);
  while (static_cast<Index>(triplets.size()) < c.triplets) {
    const Index r = static_cast<Index>(triplets.size()) < 2 * c.relations
                        ? static_cast<Index>(triplets.size()) / 2
                        : static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.relations)));
    const Pattern& p = patterns[static_cast<std::size_t>(r)];
    Triplet t{0, r, 0};
    const bool saturated = misses[static_cast<std::size_t>(r)] > 200;
    if (!saturated && rng.uniform() < c.cluster_fidelity) {
      t.head = pick(in_cluster[static_cast<std::size_t>(p.source)]);
      if (p.coupled) {
        const Index f = p.facet_map[static_cast<std::size_t>(facet[static_cast<std::size_t>(t.head)])];
        const auto& pool = members[static_cast<std::size_t>(p.target * c.facets + f)];
        t.tail = pool.empty() ? pick(in_cluster[static_cast<std::size_t>(p.target)]) : pick(pool);
      } else {
        t.tail = pick(in_cluster[static_cast<std::size_t>(p.target)]);
      }
    } else {
      t.head = uniform_entity();
      t.tail = uniform_entity();
    }
    if (place(t))
      misses[static_cast<std::size_t>(r)] = 0;
    else
      ++misses[static_cast<std::size_t>(r)];
  }

  KnowledgeGraph kg(std::move(entities), std::move(relations), std::move(triplets));
  for (Index r = 0; r < kg.relation_count(); ++r)
    if (kg.tails_of(r).size() < 2) throw DataError("synthetic relation " + std::to_string(r) + " reached one tail");
  return kg;
}

}  // namespace kged
