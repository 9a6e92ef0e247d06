#pragma once

#include "kged/kg.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kged {

struct VocabConfig {
  std::size_t max_words = 4000;  // most frequent whole words kept
  std::size_t piece_length = 3;  // other words split into pieces of this many bytes
};

// Token ids, in order: [CLS] [SEP] [MASK] [PAD]; four soft separators per
// relation; one token per relation; one token per entity; word pieces.
class Vocabulary {
 public:
  static constexpr Index kCls = 0;
  static constexpr Index kSep = 1;
  static constexpr Index kMask = 2;
  static constexpr Index kPad = 3;
  static constexpr int kSoftSeparators = 4;

  static Vocabulary build(const KnowledgeGraph& kg, const VocabConfig& config = {});
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  Index size() const { return static_cast<Index>(tokens_.size()); }
  Index entity_count() const { return entities_; }
  Index relation_count() const { return relations_; }

  // slot in 1..4
  Index soft_separator(Index relation, int slot) const { return 4 + relation * kSoftSeparators + (slot - 1); }
  Index relation_token(Index relation) const { return 4 + relations_ * kSoftSeparators + relation; }
  Index entity_token(Index entity) const { return 4 + relations_ * (kSoftSeparators + 1) + entity; }
  std::vector<Index> entity_tokens() const;

  const std::string& token(Index id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<Index> find(const std::string& token) const;

  // Lower-cased words split on ASCII punctuation and whitespace. Words
  // outside the kept set fall back to fixed-length pieces, then to single
  // characters; characters absent from the vocabulary are dropped.
  std::vector<Index> word_pieces(std::string_view text) const;

  static std::vector<std::string> words(std::string_view text);

 private:
  Index add(std::string token);
  std::vector<Index> pieces_of(const std::string& word) const;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> ids_;
  Index entities_ = 0;
  Index relations_ = 0;
  std::size_t piece_length_ = 3;
};

}  // namespace kged
