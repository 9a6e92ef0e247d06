#include "kged/prompts.hpp"

#include "kged/errors.hpp"
#include "kged/rng.hpp"

#include <algorithm>
#include <initializer_list>

namespace kged {

namespace {

void append(std::vector<Index>& out, const std::vector<Index>& part) { out.insert(out.end(), part.begin(), part.end()); }

// Shrinks the pieces so that fixed + sum(sizes) <= max_length, cutting from
// the back of each piece in the order given.
void fit(std::size_t fixed, std::initializer_list<std::vector<Index>*> shrink_order, Index max_length) {
  std::size_t total = fixed;
  for (auto* p : shrink_order) total += p->size();
  for (auto* p : shrink_order) {
    if (total <= static_cast<std::size_t>(max_length)) return;
    const std::size_t cut = std::min(p->size(), total - static_cast<std::size_t>(max_length));
    p->resize(p->size() - cut);
    total -= cut;
  }
  if (total > static_cast<std::size_t>(max_length))
    throw UsageError("prompt skeleton of " + std::to_string(total) + " tokens exceeds max length " +
                     std::to_string(max_length));
}

}  // namespace

TextPrompts build_text_prompts(const Triplet& t, const KnowledgeGraph& kg, const Vocabulary& vocab, Index max_length) {
  const auto& ents = kg.entities();
  const std::vector<Index> relation_name = vocab.word_pieces(kg.relations()[static_cast<std::size_t>(t.relation)].name);
  const bool self_loop = t.head == t.tail;
  auto sep = [&](int slot) { return vocab.soft_separator(t.relation, slot); };

  // Visible side of each prompt: entity token, name pieces, description pieces.
  auto build = [&](Index visible, Index masked, bool mask_head) {
    const Entity& e = ents[static_cast<std::size_t>(visible)];
    std::vector<Index> name = vocab.word_pieces(e.name);
    std::vector<Index> rel = relation_name;
    std::vector<Index> desc = vocab.word_pieces(e.description);
    const std::size_t fixed = 6 + (self_loop ? 0 : 1);
    fit(fixed, {&desc, &name, &rel}, max_length);

    std::vector<Index> entity_slot;
    if (!self_loop) entity_slot.push_back(vocab.entity_token(visible));
    append(entity_slot, name);

    PromptSequence p;
    p.source = t;
    p.target = masked;
    p.kind = mask_head ? PromptKind::TextHead : PromptKind::TextTail;
    auto& s = p.tokens;
    s.push_back(Vocabulary::kCls);
    s.push_back(sep(1));
    if (mask_head) {
      p.mask_position = static_cast<Index>(s.size());
      s.push_back(Vocabulary::kMask);
      s.push_back(sep(2));
      append(s, rel);
      s.push_back(sep(3));
      append(s, entity_slot);
    } else {
      append(s, entity_slot);
      s.push_back(sep(2));
      append(s, rel);
      s.push_back(sep(3));
      p.mask_position = static_cast<Index>(s.size());
      s.push_back(Vocabulary::kMask);
    }
    s.push_back(sep(4));
    append(s, desc);
    return p;
  };
  return {build(t.tail, t.head, true), build(t.head, t.tail, false)};
}

StructPrompts build_struct_prompts(const Triplet& t, const KnowledgeGraph& kg, const Vocabulary& vocab,
                                   std::size_t neighbors, std::uint64_t seed, Index max_length) {
  // Each pair costs three tokens except the last, which drops its trailing [SEP].
  const std::size_t room = max_length >= 7 ? static_cast<std::size_t>(max_length - 7 + 1) / 3 : 0;
  if (max_length < 7)
    throw UsageError("structure prompts need at least 7 tokens, max length is " + std::to_string(max_length));
  const std::size_t count = std::min(neighbors, room);

  auto context = [&](Direction d, Index masked, PromptKind kind) {
    std::vector<Index> out;
    if (count == 0) return out;
    const auto sample = sample_neighbors(kg, {.entity = t.head,
                                              .direction = d,
                                              .max_count = count,
                                              .exclude = t,
                                              .exclude_entity = masked,
                                              .seed = context_seed(seed, kind)});
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (i > 0) out.push_back(Vocabulary::kSep);
      out.push_back(vocab.entity_token(sample[i].entity));
      out.push_back(vocab.relation_token(sample[i].relation));
    }
    return out;
  };

  StructPrompts out;
  {
    PromptSequence& p = out.tail;
    p.kind = PromptKind::StructTail;
    p.source = t;
    p.target = t.tail;
    p.tokens = {Vocabulary::kCls, vocab.entity_token(t.head), Vocabulary::kSep, vocab.relation_token(t.relation),
                Vocabulary::kSep, Vocabulary::kMask, Vocabulary::kSep};
    p.mask_position = 5;
    append(p.tokens, context(Direction::In, t.tail, PromptKind::StructTail));
  }
  {
    PromptSequence& p = out.head;
    p.kind = PromptKind::StructHead;
    p.source = t;
    p.target = t.head;
    p.tokens = {Vocabulary::kCls, Vocabulary::kMask, Vocabulary::kSep, vocab.relation_token(t.relation),
                Vocabulary::kSep, vocab.entity_token(t.tail), Vocabulary::kSep};
    p.mask_position = 1;
    append(p.tokens, context(Direction::Out, t.head, PromptKind::StructHead));
  }
  if (t.head == t.tail) {
    // The visible slot would name the hidden entity.
    out.tail.tokens[1] = Vocabulary::kPad;
    out.head.tokens[5] = Vocabulary::kPad;
  }
  return out;
}

std::uint64_t context_seed(std::uint64_t seed, PromptKind kind) {
  return derive_seed(seed, {static_cast<std::uint64_t>(kind)});
}

PromptSequence build_description_prompt(Index entity, const KnowledgeGraph& kg, const Vocabulary& vocab,
                                        Index max_length) {
  PromptSequence p;
  p.kind = PromptKind::Description;
  p.source = {entity, 0, entity};
  p.target = entity;
  const std::vector<Index> lead = vocab.word_pieces("the description of");
  const std::vector<Index> is = vocab.word_pieces("is");
  std::vector<Index> desc = vocab.word_pieces(kg.entities()[static_cast<std::size_t>(entity)].description);
  fit(1 + lead.size() + 1 + is.size(), {&desc}, max_length);
  p.tokens.push_back(Vocabulary::kCls);
  append(p.tokens, lead);
  p.mask_position = static_cast<Index>(p.tokens.size());
  p.tokens.push_back(Vocabulary::kMask);
  append(p.tokens, is);
  append(p.tokens, desc);
  return p;
}

}  // namespace kged
