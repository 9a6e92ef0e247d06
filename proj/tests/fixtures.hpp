#pragma once

#include "kged/config.hpp"
#include "kged/kg.hpp"
#include "kged/rng.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace kged::testing {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) : path(std::filesystem::temp_directory_path() / ("kged_" + tag)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path / name) << content;
    return path / name;
  }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Small graph with names and descriptions drawn from a fixed word list.
inline KnowledgeGraph word_graph(Index entities, Index relations, Index triplets, std::uint64_t seed,
                                 bool allow_loops = false) {
  static const std::vector<std::string> words{"red",  "blue",  "river", "stone", "north", "south", "old",
                                              "new",  "city",  "field", "song",  "glass", "iron",  "wood",
                                              "lake", "storm", "gold",  "salt",  "moon",  "tower"};
  Rng rng(seed);
  std::vector<Entity> ents;
  for (Index i = 0; i < entities; ++i) {
    std::string desc;
    const auto len = rng.below(6);
    for (std::uint64_t w = 0; w < len; ++w) desc += (w ? " " : "") + words[rng.below(words.size())];
    ents.push_back({i, "e" + std::to_string(i), words[rng.below(words.size())] + " " + std::to_string(i), desc});
  }
  std::vector<Relation> rels;
  for (Index r = 0; r < relations; ++r) rels.push_back({r, "r" + std::to_string(r), "rel " + words[r % words.size()]});
  TripletSet seen;
  std::vector<Triplet> ts;
  while (static_cast<Index>(ts.size()) < triplets) {
    Triplet t{static_cast<Index>(rng.below(entities)), static_cast<Index>(rng.below(relations)),
              static_cast<Index>(rng.below(entities))};
    if (!allow_loops && t.head == t.tail) continue;
    if (seen.insert(t).second) ts.push_back(t);
  }
  return KnowledgeGraph(ents, rels, ts);
}

// Tiny encoders for gradient checks and fast end-to-end tests.
inline RunConfig toy_config(Index width = 8) {
  RunConfig c;
  for (EncoderConfig* e : {&c.text_encoder, &c.structure_encoder}) {
    e->layers = 1;
    e->heads = 2;
    e->width = width;
    e->ff_width = 2 * width;
    e->max_length = 24;
    e->dropout = 0.0;
    e->init_std = 0.3;
  }
  c.structure_encoder.neighbors = 3;
  c.projection_dim = 4;
  c.batch_size = 4;
  c.epochs = 1;
  c.hyper.corrupted_pairs = 2;
  return c;
}

}  // namespace kged::testing
