#include "kged/noise.hpp"

#include "kged/errors.hpp"
#include "kged/vocab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace kged {

namespace {

constexpr int kMaxAttempts = 1000;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Draws `count` noises of one kind, avoiding Γ and `taken`.
class Forge {
 public:
  Forge(const KnowledgeGraph& kg, TripletSet& taken) : kg_(kg), taken_(taken) {}

  bool fresh(const Triplet& t) const { return !kg_.contains(t) && !taken_.contains(t); }
  void accept(const NoisyTriplet& n, std::vector<NoisyTriplet>& out) {
    taken_.insert(n.triplet);
    out.push_back(n);
  }

  const KnowledgeGraph& kg_;
  TripletSet& taken_;
};

Index other_id(Index current, Index count, Rng& rng) {
  Index v = static_cast<Index>(rng.below(static_cast<std::uint64_t>(count - 1)));
  return v >= current ? v + 1 : v;
}

std::vector<NoisyTriplet> random_noise(const KnowledgeGraph& kg, Index count, Rng& rng, TripletSet& taken) {
  Forge forge(kg, taken);
  std::vector<NoisyTriplet> out;
  const auto& ts = kg.triplets();
  while (static_cast<Index>(out.size()) < count) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const Triplet src = ts[rng.below(ts.size())];
      const Slot slot = static_cast<Slot>(rng.below(3));
      Triplet t = src;
      const Index n = slot == Slot::Relation ? kg.relation_count() : kg.entity_count();
      if (n < 2) continue;
      Index& field = slot == Slot::Head ? t.head : slot == Slot::Relation ? t.relation : t.tail;
      field = other_id(field, n, rng);
      if (!forge.fresh(t)) continue;
      forge.accept({t, true, NoiseKind::Random, src, slot}, out);
      placed = true;
    }
    if (!placed)
      throw DataError("random noise: no collision-free replacement after " + std::to_string(kMaxAttempts) +
                      " attempts (generated " + std::to_string(out.size()) + " of " + std::to_string(count) + ")");
  }
  return out;
}

std::vector<NoisyTriplet> semantic_noise(const KnowledgeGraph& kg, Index count, const TextEmbedder& embedder, Rng& rng,
                                         TripletSet& taken, Index& skipped) {
  Forge forge(kg, taken);
  std::vector<RowVector> vec;
  vec.reserve(static_cast<std::size_t>(kg.entity_count()));
  for (const auto& e : kg.entities()) vec.push_back(embedder.embed(e));

  std::vector<std::size_t> sources(kg.triplets().size());
  std::iota(sources.begin(), sources.end(), 0);
  rng.shuffle(sources);

  std::vector<NoisyTriplet> out;
  for (std::size_t s = 0; s < sources.size() && static_cast<Index>(out.size()) < count; ++s) {
    const Triplet src = kg.triplets()[sources[s]];
    const bool head = rng.coin();
    const Index anchor = head ? src.head : src.tail;
    std::vector<Index> support;
    for (Index e : head ? kg.heads_of(src.relation) : kg.tails_of(src.relation))
      if (e != anchor) support.push_back(e);
    if (support.empty()) {
      ++skipped;
      continue;
    }
    std::vector<RowVector> cand;
    cand.reserve(support.size());
    for (Index e : support) cand.push_back(vec[static_cast<std::size_t>(e)]);
    const auto p = semantic_distribution(vec[static_cast<std::size_t>(anchor)], cand);
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Triplet t = src;
      (head ? t.head : t.tail) = support[sample_discrete(p, rng)];
      if (!forge.fresh(t)) continue;
      forge.accept({t, true, NoiseKind::Semantic, src, head ? Slot::Head : Slot::Tail}, out);
      placed = true;
    }
    if (!placed) ++skipped;
  }
  if (static_cast<Index>(out.size()) < count)
    throw DataError("semantic noise: sources exhausted after " + std::to_string(out.size()) + " of " +
                    std::to_string(count) + " noisy triplets");
  return out;
}

std::vector<NoisyTriplet> adversarial_noise(const KnowledgeGraph& kg, Index count, const AdversarialConfig& config,
                                            Rng& rng, TripletSet& taken, AdversarialTrace* trace) {
  if (!(config.split > 0.0 && config.split < 1.0)) throw UsageError("adversarial split must lie in (0, 1)");
  Forge forge(kg, taken);
  std::vector<NoisyTriplet> out;
  const auto& ts = kg.triplets();
  std::vector<std::size_t> order(ts.size());
  std::iota(order.begin(), order.end(), 0);
  for (int it = 0; it < config.max_iterations && static_cast<Index>(out.size()) < count; ++it) {
    rng.shuffle(order);
    const std::size_t cut = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(config.split * static_cast<double>(ts.size()))), 1, ts.size() - 1);
    std::vector<Triplet> train;
    train.reserve(cut);
    for (std::size_t k = 0; k < cut; ++k) train.push_back(ts[order[k]]);
    BaselineConfig bc = config.transe;
    bc.kind = BaselineKind::TransE;
    bc.seed = derive_seed(config.transe.seed, {static_cast<std::uint64_t>(it)});
    EmbeddingModel model = train_baseline(kg, train, bc);
    for (std::size_t k = cut; k < ts.size() && static_cast<Index>(out.size()) < count; ++k) {
      const Triplet src = ts[order[k]];
      const auto ranked = rank_all_tails(model, src.head, src.relation);
      std::vector<Index> pool;
      for (std::size_t q = 0; q < std::min<std::size_t>(10, ranked.size()); ++q) {
        Triplet t = src;
        t.tail = ranked[q];
        if (ranked[q] != src.tail && forge.fresh(t)) pool.push_back(ranked[q]);
      }
      if (pool.empty()) continue;
      Triplet t = src;
      t.tail = pool[rng.below(pool.size())];
      forge.accept({t, true, NoiseKind::Adversarial, src, Slot::Tail}, out);
      if (trace) {
        trace->iteration.push_back(it);
        trace->noise.push_back(t);
      }
    }
    if (trace) trace->models.push_back(std::move(model));
  }
  if (static_cast<Index>(out.size()) < count)
    throw DataError("adversarial noise: reached " + std::to_string(out.size()) + " of " + std::to_string(count) +
                    " noisy triplets within " + std::to_string(config.max_iterations) + " iterations");
  return out;
}

NoisyDataset assemble(const KnowledgeGraph& kg, std::vector<NoisyTriplet> noise, double ratio, std::uint64_t seed,
                      std::vector<NoiseKind> mix, Index skipped) {
  NoisyDataset d;
  d.ratio = ratio;
  d.seed = seed;
  d.mix = std::move(mix);
  d.skipped_sources = skipped;
  d.items.reserve(kg.triplets().size() + noise.size());
  for (const auto& t : kg.triplets()) d.items.push_back({t, false, NoiseKind::None, t, Slot::Tail});
  for (auto& n : noise) d.items.push_back(n);
  Rng rng(derive_seed(seed, {0x73687566}));
  rng.shuffle(d.items);
  return d;
}

void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("noise ratio must lie in (0, 1)");
}

}  // namespace

std::string_view noise_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Random: return "random";
    case NoiseKind::Semantic: return "semantic";
    case NoiseKind::Adversarial: return "adversarial";
  }
  return "?";
}

NoiseKind noise_from_name(std::string_view name) {
  for (auto k : {NoiseKind::None, NoiseKind::Random, NoiseKind::Semantic, NoiseKind::Adversarial})
    if (noise_name(k) == name) return k;
  throw UsageError("unknown noise kind '" + std::string(name) + "'");
}

Index NoisyDataset::noisy_count() const {
  return static_cast<Index>(std::count_if(items.begin(), items.end(), [](const auto& n) { return n.noisy; }));
}

Index NoisyDataset::count(NoiseKind kind) const {
  return static_cast<Index>(std::count_if(items.begin(), items.end(), [&](const auto& n) { return n.kind == kind; }));
}

std::vector<Triplet> NoisyDataset::triplets() const {
  std::vector<Triplet> out;
  out.reserve(items.size());
  for (const auto& n : items) out.push_back(n.triplet);
  return out;
}

std::vector<bool> NoisyDataset::labels() const {
  std::vector<bool> out;
  out.reserve(items.size());
  for (const auto& n : items) out.push_back(n.noisy);
  return out;
}

Index noise_target(Index correct, double ratio) {
  return static_cast<Index>(std::floor(ratio * static_cast<double>(correct) + 1e-9));
}

HashedEmbedder::HashedEmbedder(Index dim) : dim_(dim) {
  if (dim < 8) throw UsageError("embedding dimension must be at least 8");
}

RowVector HashedEmbedder::embed_words(const std::vector<std::string>& words) const {
  RowVector v = RowVector::Zero(dim_);
  for (const auto& w : words) {
    const std::uint64_t h = fnv1a(w);
    v(static_cast<Index>((h & 0x7fffffffffffffffULL) % static_cast<std::uint64_t>(dim_))) += (h >> 63) ? -1.0 : 1.0;
  }
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

RowVector HashedEmbedder::embed(const Entity& e) const {
  auto words = Vocabulary::words(e.name);
  const auto desc = Vocabulary::words(e.description);
  words.insert(words.end(), desc.begin(), desc.end());
  RowVector v = embed_words(words);
  // Signed hashes can cancel out; fall back to the raw name as one feature.
  if (v.squaredNorm() == 0.0) v = embed_words({e.name.empty() ? e.token : e.name});
  return v;
}

RowVector describe_embed(const Entity& entity, Index dim) { return HashedEmbedder(dim).embed(entity); }

std::vector<double> semantic_distribution(const RowVector& anchor, const std::vector<RowVector>& candidates) {
  std::vector<double> logits(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) logits[i] = anchor.dot(candidates[i]);
  if (logits.empty()) return logits;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) z += (l = std::exp(l - mx));
  for (auto& l : logits) l /= z;
  return logits;
}

std::size_t sample_discrete(const std::vector<double>& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

NoisyDataset inject_random(const KnowledgeGraph& kg, double ratio, std::uint64_t seed) {
  check_ratio(ratio);
  Rng rng(derive_seed(seed, {1}));
  TripletSet taken;
  auto noise = random_noise(kg, noise_target(kg.triplet_count(), ratio), rng, taken);
  return assemble(kg, std::move(noise), ratio, seed, {NoiseKind::Random}, 0);
}

NoisyDataset inject_semantic(const KnowledgeGraph& kg, double ratio, const TextEmbedder& embedder, std::uint64_t seed) {
  check_ratio(ratio);
  Rng rng(derive_seed(seed, {2}));
  TripletSet taken;
  Index skipped = 0;
  auto noise = semantic_noise(kg, noise_target(kg.triplet_count(), ratio), embedder, rng, taken, skipped);
  return assemble(kg, std::move(noise), ratio, seed, {NoiseKind::Semantic}, skipped);
}

NoisyDataset inject_adversarial(const KnowledgeGraph& kg, double ratio, const AdversarialConfig& config,
                                std::uint64_t seed, AdversarialTrace* trace) {
  check_ratio(ratio);
  if (kg.triplet_count() < 2) throw DataError("adversarial noise needs at least two triplets to split");
  Rng rng(derive_seed(seed, {3}));
  TripletSet taken;
  auto noise = adversarial_noise(kg, noise_target(kg.triplet_count(), ratio), config, rng, taken, trace);
  return assemble(kg, std::move(noise), ratio, seed, {NoiseKind::Adversarial}, 0);
}

NoisyDataset inject_mixed(const KnowledgeGraph& kg, double ratio, const std::vector<NoiseKind>& kinds,
                          const TextEmbedder& embedder, const AdversarialConfig& adversarial, std::uint64_t seed) {
  check_ratio(ratio);
  if (kinds.empty()) throw UsageError("mixed noise needs at least one kind");
  const Index total = noise_target(kg.triplet_count(), ratio);
  const Index k = static_cast<Index>(kinds.size());
  TripletSet taken;
  std::vector<NoisyTriplet> noise;
  Index skipped = 0;
  for (Index i = 0; i < k; ++i) {
    const Index share = total / k + (i < total % k ? 1 : 0);
    Rng rng(derive_seed(seed, {4, static_cast<std::uint64_t>(i)}));
    std::vector<NoisyTriplet> part;
    switch (kinds[static_cast<std::size_t>(i)]) {
      case NoiseKind::Random: part = random_noise(kg, share, rng, taken); break;
      case NoiseKind::Semantic: part = semantic_noise(kg, share, embedder, rng, taken, skipped); break;
      case NoiseKind::Adversarial: part = adversarial_noise(kg, share, adversarial, rng, taken, nullptr); break;
      case NoiseKind::None: throw UsageError("'none' is not a noise kind");
    }
    noise.insert(noise.end(), part.begin(), part.end());
  }
  return assemble(kg, std::move(noise), ratio, seed, kinds, skipped);
}

void write_dataset(const std::filesystem::path& path, const NoisyDataset& data, const KnowledgeGraph& kg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& n : data.items)
    os << kg.entities()[static_cast<std::size_t>(n.triplet.head)].token << '\t'
       << kg.relations()[static_cast<std::size_t>(n.triplet.relation)].token << '\t'
       << kg.entities()[static_cast<std::size_t>(n.triplet.tail)].token << '\t' << (n.noisy ? 1 : 0) << '\t'
       << noise_name(n.kind) << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

void write_manifest(const std::filesystem::path& path, const NoisyDataset& data) {
  nlohmann::ordered_json j;
  j["ratio"] = data.ratio;
  j["seed"] = data.seed;
  std::vector<std::string> mix;
  for (auto k : data.mix) mix.emplace_back(noise_name(k));
  j["kind_mix"] = mix;
  j["correct"] = static_cast<Index>(data.items.size()) - data.noisy_count();
  j["noisy"] = data.noisy_count();
  nlohmann::ordered_json counts;
  for (auto k : {NoiseKind::Random, NoiseKind::Semantic, NoiseKind::Adversarial}) counts[std::string(noise_name(k))] = data.count(k);
  j["counts"] = counts;
  j["skipped_sources"] = data.skipped_sources;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

LabeledGraph load_dataset(const std::filesystem::path& dataset, const std::filesystem::path& entity_text,
                          const std::filesystem::path& relation_text) {
  const TextCatalog catalog = load_text_catalog(entity_text, relation_text);
  const auto lines = read_lines(dataset);
  std::vector<std::array<std::string, 3>> rows;
  LabeledGraph out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_tabs(lines[i]);
    const std::string where = dataset.string() + ":" + std::to_string(i + 1) + ": ";
    if (f.size() != 5) throw DataError(where + "expected head, relation, tail, label and kind");
    if (f[3] != "0" && f[3] != "1") throw DataError(where + "label must be 0 or 1");
    NoiseKind kind;
    try {
      kind = noise_from_name(f[4]);
    } catch (const UsageError&) {
      throw DataError(where + "unknown noise kind '" + f[4] + "'");
    }
    rows.push_back({f[0], f[1], f[2]});
    out.labels.push_back(f[3] == "1");
    out.kinds.push_back(kind);
  }
  LoadReport report;
  out.kg = build_kg(rows, catalog, &report);
  if (report.duplicate_triplets > 0) throw DataError(dataset.string() + ": dataset lists a triplet twice");
  return out;
}

LabeledGraph labeled_graph(const KnowledgeGraph& clean, const NoisyDataset& data) {
  LabeledGraph out;
  out.kg = clean.with_triplets(data.triplets());
  out.labels = data.labels();
  for (const auto& n : data.items) out.kinds.push_back(n.kind);
  return out;
}

}  // namespace kged
