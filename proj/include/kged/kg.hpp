#pragma once

#include "kged/tensor.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kged {

struct Entity {
  Index id = 0;
  std::string token;
  std::string name;
  std::string description;
};

struct Relation {
  Index id = 0;
  std::string token;
  std::string name;
};

struct Triplet {
  Index head = 0;
  Index relation = 0;
  Index tail = 0;

  auto operator<=>(const Triplet&) const = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept;
};

using TripletSet = std::unordered_set<Triplet, TripletHash>;

// One side of an edge seen from an entity: the other endpoint and the relation.
struct Neighbor {
  Index entity = 0;
  Index relation = 0;

  bool operator==(const Neighbor&) const = default;
};

enum class Direction { In, Out };

// Immutable after construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // Validates ids and drops duplicate triplets (counted in duplicates_dropped()).
  KnowledgeGraph(std::vector<Entity> entities, std::vector<Relation> relations, std::vector<Triplet> triplets);

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  Index entity_count() const { return static_cast<Index>(entities_.size()); }
  Index relation_count() const { return static_cast<Index>(relations_.size()); }
  Index triplet_count() const { return static_cast<Index>(triplets_.size()); }

  // (h', r') with (h', r', e) in the graph, in triplet order.
  std::span<const Neighbor> in_neighbors(Index e) const { return in_[static_cast<std::size_t>(e)]; }
  // (t', r') with (e, r', t') in the graph, in triplet order.
  std::span<const Neighbor> out_neighbors(Index e) const { return out_[static_cast<std::size_t>(e)]; }
  std::span<const Neighbor> neighbors(Index e, Direction d) const {
    return d == Direction::In ? in_neighbors(e) : out_neighbors(e);
  }
  Index degree(Index e) const;

  bool contains(const Triplet& t) const { return set_.contains(t); }
  // Distinct tails (heads) of a relation in ascending id order.
  const std::vector<Index>& tails_of(Index relation) const { return tails_[static_cast<std::size_t>(relation)]; }
  const std::vector<Index>& heads_of(Index relation) const { return heads_[static_cast<std::size_t>(relation)]; }

  std::optional<Index> entity_id(const std::string& token) const;
  std::optional<Index> relation_id(const std::string& token) const;

  Index duplicates_dropped() const { return duplicates_; }

  // Same catalogs, different triplet list.
  KnowledgeGraph with_triplets(std::vector<Triplet> triplets) const;

 private:
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<Triplet> triplets_;
  std::vector<std::vector<Neighbor>> in_;
  std::vector<std::vector<Neighbor>> out_;
  std::vector<std::vector<Index>> tails_;
  std::vector<std::vector<Index>> heads_;
  TripletSet set_;
  std::unordered_map<std::string, Index> entity_ids_;
  std::unordered_map<std::string, Index> relation_ids_;
  Index duplicates_ = 0;
};

struct LoadReport {
  Index text_only_entities_dropped = 0;  // present in the text file, absent from triplets
  Index text_only_relations_dropped = 0;
  Index entities_without_text = 0;  // created with name = raw token
  Index relations_without_text = 0;
  Index duplicate_triplets = 0;
};

// Triplet file: head<TAB>relation<TAB>tail per line. Entity text file:
// token<TAB>name[<TAB>description]. Relation text file: token<TAB>name.
// Entity and relation ids follow first appearance in the triplet file.
KnowledgeGraph load_kg(const std::filesystem::path& triplets, const std::filesystem::path& entity_text,
                       const std::filesystem::path& relation_text, LoadReport* report = nullptr);

// Reads catalogs and an arbitrary triplet-token list; used by loaders of
// derived files that share the entity/relation text.
struct TextCatalog {
  std::unordered_map<std::string, std::pair<std::string, std::string>> entities;  // token -> (name, description)
  std::unordered_map<std::string, std::string> relations;                        // token -> name
};
TextCatalog load_text_catalog(const std::filesystem::path& entity_text, const std::filesystem::path& relation_text);
KnowledgeGraph build_kg(const std::vector<std::array<std::string, 3>>& rows, const TextCatalog& catalog,
                        LoadReport* report = nullptr);

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triplets, const std::filesystem::path& entity_text,
             const std::filesystem::path& relation_text);

// Splits a line on tabs.
std::vector<std::string> split_tabs(const std::string& line);
// Reads every line of a UTF-8 text file, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::filesystem::path& path);

struct NeighborQuery {
  Index entity = 0;
  Direction direction = Direction::Out;
  std::size_t max_count = 8;
  std::optional<Triplet> exclude;             // edge never returned
  std::optional<Index> exclude_entity;        // endpoint never returned
  std::uint64_t seed = 0;
};

// Uniform sample without replacement from the entity's neighbor set minus
// the exclusions; the whole (shuffled) set when it has at most max_count
// members. Deterministic per seed.
std::vector<Neighbor> sample_neighbors(const KnowledgeGraph& kg, const NeighborQuery& query);

struct GraphStats {
  Index entities = 0;
  Index relations = 0;
  Index triplets = 0;
  double average_degree = 0.0;  // 2 |triplets| / |entities|
};

GraphStats stats(const KnowledgeGraph& kg);

}  // namespace kged
