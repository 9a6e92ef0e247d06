#include "kged/fusion.hpp"

#include "kged/errors.hpp"
#include "kged/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace kged {

double fuse_reconstruction(double score_text, double score_struct, double lambda) {
  return score_text + lambda * score_struct;
}

std::vector<double> fuse_reconstruction(const std::vector<double>& score_text, const std::vector<double>& score_struct,
                                        double lambda) {
  if (score_text.size() != score_struct.size()) throw UsageError("score vectors differ in length");
  std::vector<double> out(score_text.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fuse_reconstruction(score_text[i], score_struct[i], lambda);
  return out;
}

std::vector<Index> error_ranks(const std::vector<double>& scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  std::vector<Index> rank(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<Index>(k + 1);
  return rank;
}

double rank_fuse(Index r1, Index r2, Index gamma, double beta) {
  const Index b1 = (r1 + gamma - 1) / gamma;
  const Index b2 = (r2 + gamma - 1) / gamma;
  return 1.0 / static_cast<double>(b1) + 1.0 / std::pow(static_cast<double>(b2), beta);
}

std::vector<double> sample_pseudo_labels(Index n, double mu, double rho, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = rng.normal(mu, rho);
  std::sort(z.begin(), z.end());
  return z;
}

std::vector<double> normalize_pseudo_labels(std::vector<double> z) {
  if (z.empty()) return z;
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  const double min = *lo, spread = *hi - *lo;
  for (auto& v : z) v = spread > 0.0 ? std::max(0.01, (v - min) / spread) : 1.0;
  return z;
}

std::vector<double> make_pseudo_labels(Index n, double mu, double rho, std::uint64_t seed) {
  return normalize_pseudo_labels(sample_pseudo_labels(n, mu, rho, seed));
}

Assignment assign_confidence(const std::vector<double>& fused, const std::vector<double>& z) {
  if (fused.size() != z.size())
    throw UsageError("got " + std::to_string(z.size()) + " pseudo labels for " + std::to_string(fused.size()) +
                     " scores");
  Assignment a;
  a.rank = error_ranks(fused, true);
  a.confidence.resize(fused.size());
  for (std::size_t i = 0; i < fused.size(); ++i) a.confidence[i] = z[static_cast<std::size_t>(a.rank[i] - 1)];
  return a;
}

std::vector<double> ConfidenceTable::confidences() const {
  std::vector<double> c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back(r.confidence);
  return c;
}

std::vector<std::size_t> ConfidenceTable::detection_order() const {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].confidence != rows[b].confidence) return rows[a].confidence < rows[b].confidence;
    return rows[a].rank < rows[b].rank;
  });
  return order;
}

ConfidenceTable uniform_table(const std::vector<Triplet>& triplets) {
  ConfidenceTable t;
  t.rows.reserve(triplets.size());
  for (const auto& tr : triplets) t.rows.push_back({.triplet = tr});
  return t;
}

ConfidenceTable build_confidence_table(const std::vector<Triplet>& triplets, const std::vector<TripletLossBundle>& scores,
                                       const HyperParams& hp, const ModelVariant& variant, std::uint64_t seed) {
  if (scores.size() != triplets.size()) throw UsageError("one score bundle per triplet required");
  if (!variant.text && !variant.structure) throw UsageError("a model variant needs at least one view");
  const std::size_t n = triplets.size();
  ConfidenceTable table = uniform_table(triplets);
  if (n == 0) return table;

  std::vector<double> recon(n), contr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = scores[i];
    recon[i] = (variant.text ? s.score_text() : 0.0) + (variant.structure ? hp.lambda * s.score_struct() : 0.0);
    contr[i] = s.score_contrastive;
  }
  const bool use_contrastive = variant.contrastive && variant.text && variant.structure;
  const std::vector<Index> r1 = error_ranks(recon, true);
  const std::vector<Index> r2 = use_contrastive ? error_ranks(contr, false) : std::vector<Index>{};
  const Index gamma = hp.bucket_size(static_cast<Index>(n));
  std::vector<double> fused(n);
  for (std::size_t i = 0; i < n; ++i)
    fused[i] = use_contrastive ? rank_fuse(r1[i], r2[i], gamma, hp.beta)
                               : 1.0 / static_cast<double>((r1[i] + gamma - 1) / gamma);

  const auto z = make_pseudo_labels(static_cast<Index>(n), hp.mu, hp.rho, seed);
  const Assignment a = assign_confidence(fused, z);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = table.rows[i];
    row.score_reconstruct = recon[i];
    row.score_contrastive = contr[i];
    row.r1 = r1[i];
    row.r2 = use_contrastive ? r2[i] : 0;
    row.fused = fused[i];
    row.rank = a.rank[i];
    row.confidence = a.confidence[i];
  }
  return table;
}

void write_confidence_table(const std::filesystem::path& path, const ConfidenceTable& table, const KnowledgeGraph& kg,
                            const std::vector<std::size_t>& order) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(17);
  auto line = [&](const ConfidenceRow& r) {
    os << kg.entities()[static_cast<std::size_t>(r.triplet.head)].token << '\t'
       << kg.relations()[static_cast<std::size_t>(r.triplet.relation)].token << '\t'
       << kg.entities()[static_cast<std::size_t>(r.triplet.tail)].token << '\t' << r.score_reconstruct << '\t'
       << r.score_contrastive << '\t' << r.fused << '\t' << r.rank << '\t' << r.confidence << '\n';
  };
  if (order.empty())
    for (const auto& r : table.rows) line(r);
  else
    for (std::size_t i : order) line(table.rows.at(i));
  if (!os) throw DataError("failed writing " + path.string());
}

}  // namespace kged
