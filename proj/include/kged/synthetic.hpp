#pragma once

// Clustered toy graphs with generated names and descriptions.

#include "kged/kg.hpp"

#include <cstdint>

namespace kged {

struct SyntheticConfig {
  Index entities = 300;
  Index relations = 12;
  Index triplets = 5000;
  Index clusters = 6;
  Index facets = 3;              // attribute values shared across clusters
  double coupled_share = 1.0;    // relations whose tail facet depends on the head facet
  double cluster_fidelity = 0.99;  // chance that an edge follows its relation's cluster pair
  Index description_words = 8;
  std::uint64_t seed = 0;
};

// Each relation links a source cluster to a target cluster. Coupled
// relations also map the head's facet to a fixed tail facet. Descriptions
// mix words of the entity's cluster vocabulary, its facet vocabulary and a
// shared filler vocabulary, so text carries both signals.
//
// Throws UsageError when the request cannot be met: more triplets than
// distinct non-loop edges, or too few entities for every relation to reach
// two tails.
KnowledgeGraph make_synthetic_kg(const SyntheticConfig& config);

}  // namespace kged
