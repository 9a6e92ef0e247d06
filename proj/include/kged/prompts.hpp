#pragma once

#include "kged/kg.hpp"
#include "kged/vocab.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace kged {

enum class PromptKind : std::uint8_t { TextHead, TextTail, StructHead, StructTail, Description };

struct PromptSequence {
  std::vector<Index> tokens;
  Index mask_position = 0;
  PromptKind kind = PromptKind::TextTail;
  Triplet source;
  Index target = 0;  // entity hidden behind [MASK]

  Index length() const { return static_cast<Index>(tokens.size()); }
};

struct TextPrompts {
  PromptSequence head;  // head masked, tail side visible with D_t
  PromptSequence tail;  // tail masked, head side visible with D_h
};

struct StructPrompts {
  PromptSequence head;
  PromptSequence tail;
};

// Tail prompt: [CLS] s1 [h] N_h s2 N_r s3 [MASK] s4 D_h, with s1..s4 the
// relation's soft separators; the head prompt mirrors it with D_t. Over-long
// prompts lose description pieces from the end first, then name pieces.
// For a self-loop the visible entity token is left out.
TextPrompts build_text_prompts(const Triplet& t, const KnowledgeGraph& kg, const Vocabulary& vocab, Index max_length);

// Tail prompt: [CLS] [h] [SEP] [r] [SEP] [MASK] [SEP] h'1 r'1 [SEP] h'2 r'2 ...
// over sampled in-neighbors of h; the head prompt uses out-neighbors of h.
// The triplet itself and the masked entity are never sampled as context.
// Contexts come from sample_neighbors seeded with context_seed(seed, kind).
StructPrompts build_struct_prompts(const Triplet& t, const KnowledgeGraph& kg, const Vocabulary& vocab,
                                   std::size_t neighbors, std::uint64_t seed, Index max_length);

std::uint64_t context_seed(std::uint64_t seed, PromptKind kind);

// [CLS] the description of [MASK] is D_e
PromptSequence build_description_prompt(Index entity, const KnowledgeGraph& kg, const Vocabulary& vocab,
                                        Index max_length);

}  // namespace kged
