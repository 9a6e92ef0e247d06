#include "kged/kg.hpp"

#include "kged/errors.hpp"
#include "kged/rng.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace kged {

std::size_t TripletHash::operator()(const Triplet& t) const noexcept {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(t.head));
  h = splitmix64(h ^ static_cast<std::uint64_t>(t.relation));
  h = splitmix64(h ^ static_cast<std::uint64_t>(t.tail));
  return static_cast<std::size_t>(h);
}

KnowledgeGraph::KnowledgeGraph(std::vector<Entity> entities, std::vector<Relation> relations,
                               std::vector<Triplet> triplets)
    : entities_(std::move(entities)), relations_(std::move(relations)) {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].id != static_cast<Index>(i)) throw DataError("entity ids must be contiguous from 0");
    if (entities_[i].name.empty()) throw DataError("entity '" + entities_[i].token + "' has an empty name");
    entity_ids_.emplace(entities_[i].token, entities_[i].id);
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (relations_[i].id != static_cast<Index>(i)) throw DataError("relation ids must be contiguous from 0");
    relation_ids_.emplace(relations_[i].token, relations_[i].id);
  }
  const auto ne = entities_.size();
  const auto nr = relations_.size();
  in_.resize(ne);
  out_.resize(ne);
  std::vector<std::set<Index>> tails(nr), heads(nr);
  triplets_.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (t.head < 0 || t.tail < 0 || t.relation < 0 || static_cast<std::size_t>(t.head) >= ne ||
        static_cast<std::size_t>(t.tail) >= ne || static_cast<std::size_t>(t.relation) >= nr)
      throw DataError("triplet references an unknown id");
    if (!set_.insert(t).second) {
      ++duplicates_;
      continue;
    }
    triplets_.push_back(t);
    out_[static_cast<std::size_t>(t.head)].push_back({t.tail, t.relation});
    in_[static_cast<std::size_t>(t.tail)].push_back({t.head, t.relation});
    tails[static_cast<std::size_t>(t.relation)].insert(t.tail);
    heads[static_cast<std::size_t>(t.relation)].insert(t.head);
  }
  tails_.resize(nr);
  heads_.resize(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    tails_[r].assign(tails[r].begin(), tails[r].end());
    heads_[r].assign(heads[r].begin(), heads[r].end());
  }
}

Index KnowledgeGraph::degree(Index e) const {
  return static_cast<Index>(in_neighbors(e).size() + out_neighbors(e).size());
}

std::optional<Index> KnowledgeGraph::entity_id(const std::string& token) const {
  auto it = entity_ids_.find(token);
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> KnowledgeGraph::relation_id(const std::string& token) const {
  auto it = relation_ids_.find(token);
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph KnowledgeGraph::with_triplets(std::vector<Triplet> triplets) const {
  return KnowledgeGraph(entities_, relations_, std::move(triplets));
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

TextCatalog load_text_catalog(const std::filesystem::path& entity_text, const std::filesystem::path& relation_text) {
  TextCatalog cat;
  const auto elines = read_lines(entity_text);
  for (std::size_t i = 0; i < elines.size(); ++i) {
    if (elines[i].empty()) continue;
    const auto f = split_tabs(elines[i]);
    if (f.size() < 2 || f.size() > 3 || f[0].empty())
      throw DataError(entity_text.string() + ":" + std::to_string(i + 1) + ": expected token<TAB>name[<TAB>description]");
    if (!cat.entities.emplace(f[0], std::pair{f[1].empty() ? f[0] : f[1], f.size() == 3 ? f[2] : ""}).second)
      throw DataError(entity_text.string() + ":" + std::to_string(i + 1) + ": duplicate token '" + f[0] + "'");
  }
  const auto rlines = read_lines(relation_text);
  for (std::size_t i = 0; i < rlines.size(); ++i) {
    if (rlines[i].empty()) continue;
    const auto f = split_tabs(rlines[i]);
    if (f.size() != 2 || f[0].empty())
      throw DataError(relation_text.string() + ":" + std::to_string(i + 1) + ": expected token<TAB>name");
    if (!cat.relations.emplace(f[0], f[1].empty() ? f[0] : f[1]).second)
      throw DataError(relation_text.string() + ":" + std::to_string(i + 1) + ": duplicate token '" + f[0] + "'");
  }
  return cat;
}

KnowledgeGraph build_kg(const std::vector<std::array<std::string, 3>>& rows, const TextCatalog& catalog,
                        LoadReport* report) {
  LoadReport rep;
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  std::unordered_map<std::string, Index> eid, rid;
  auto entity = [&](const std::string& tok) {
    auto [it, fresh] = eid.emplace(tok, static_cast<Index>(entities.size()));
    if (fresh) {
      Entity e{it->second, tok, tok, ""};
      if (auto c = catalog.entities.find(tok); c != catalog.entities.end()) {
        e.name = c->second.first;
        e.description = c->second.second;
      } else {
        ++rep.entities_without_text;
      }
      entities.push_back(std::move(e));
    }
    return it->second;
  };
  auto relation = [&](const std::string& tok) {
    auto [it, fresh] = rid.emplace(tok, static_cast<Index>(relations.size()));
    if (fresh) {
      Relation r{it->second, tok, tok};
      if (auto c = catalog.relations.find(tok); c != catalog.relations.end())
        r.name = c->second;
      else
        ++rep.relations_without_text;
      relations.push_back(std::move(r));
    }
    return it->second;
  };
  std::vector<Triplet> triplets;
  triplets.reserve(rows.size());
  for (const auto& row : rows) {
    const Index h = entity(row[0]);
    const Index r = relation(row[1]);
    const Index t = entity(row[2]);
    triplets.push_back({h, r, t});
  }
  for (const auto& [tok, _] : catalog.entities)
    if (!eid.contains(tok)) ++rep.text_only_entities_dropped;
  for (const auto& [tok, _] : catalog.relations)
    if (!rid.contains(tok)) ++rep.text_only_relations_dropped;
  KnowledgeGraph kg(std::move(entities), std::move(relations), std::move(triplets));
  rep.duplicate_triplets = kg.duplicates_dropped();
  if (report) *report = rep;
  return kg;
}

KnowledgeGraph load_kg(const std::filesystem::path& triplets, const std::filesystem::path& entity_text,
                       const std::filesystem::path& relation_text, LoadReport* report) {
  const TextCatalog catalog = load_text_catalog(entity_text, relation_text);
  std::vector<std::array<std::string, 3>> rows;
  const auto lines = read_lines(triplets);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_tabs(lines[i]);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
      throw DataError(triplets.string() + ":" + std::to_string(i + 1) + ": expected head<TAB>relation<TAB>tail");
    rows.push_back({f[0], f[1], f[2]});
  }
  return build_kg(rows, catalog, report);
}

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& triplets, const std::filesystem::path& entity_text,
             const std::filesystem::path& relation_text) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw DataError("cannot write " + p.string());
    return os;
  };
  auto tos = open(triplets);
  for (const auto& t : kg.triplets())
    tos << kg.entities()[t.head].token << '\t' << kg.relations()[t.relation].token << '\t' << kg.entities()[t.tail].token
        << '\n';
  auto eos = open(entity_text);
  for (const auto& e : kg.entities()) {
    eos << e.token << '\t' << e.name;
    if (!e.description.empty()) eos << '\t' << e.description;
    eos << '\n';
  }
  auto ros = open(relation_text);
  for (const auto& r : kg.relations()) ros << r.token << '\t' << r.name << '\n';
  if (!tos || !eos || !ros) throw DataError("failed writing graph files");
}

std::vector<Neighbor> sample_neighbors(const KnowledgeGraph& kg, const NeighborQuery& q) {
  std::vector<Neighbor> pool;
  for (const Neighbor& n : kg.neighbors(q.entity, q.direction)) {
    if (q.exclude) {
      const Triplet edge = q.direction == Direction::Out ? Triplet{q.entity, n.relation, n.entity}
                                                         : Triplet{n.entity, n.relation, q.entity};
      if (edge == *q.exclude) continue;
    }
    if (q.exclude_entity && n.entity == *q.exclude_entity) continue;
    pool.push_back(n);
  }
  Rng rng(q.seed);
  const std::size_t take = std::min(q.max_count, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

GraphStats stats(const KnowledgeGraph& kg) {
  GraphStats s{kg.entity_count(), kg.relation_count(), kg.triplet_count(), 0.0};
  if (s.entities > 0) s.average_degree = 2.0 * static_cast<double>(s.triplets) / static_cast<double>(s.entities);
  return s;
}

}  // namespace kged
