#include "kged/vocab.hpp"

#include "kged/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace kged {

namespace {

// Words of the description-initialization prompt.
constexpr std::string_view kTemplateText = "the description of is";

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string entity_symbol(const Entity& e) { return "[E:" + e.token + "]"; }
std::string relation_symbol(const Relation& r) { return "[R:" + r.token + "]"; }

}  // namespace

std::vector<std::string> Vocabulary::words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Index Vocabulary::add(std::string token) {
  auto [it, fresh] = ids_.emplace(token, static_cast<Index>(tokens_.size()));
  if (fresh) tokens_.push_back(std::move(token));
  return it->second;
}

std::optional<Index> Vocabulary::find(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<Index> Vocabulary::entity_tokens() const {
  std::vector<Index> out(static_cast<std::size_t>(entities_));
  for (Index e = 0; e < entities_; ++e) out[static_cast<std::size_t>(e)] = entity_token(e);
  return out;
}

Vocabulary Vocabulary::build(const KnowledgeGraph& kg, const VocabConfig& config) {
  Vocabulary v;
  v.piece_length_ = std::max<std::size_t>(1, config.piece_length);
  v.entities_ = kg.entity_count();
  v.relations_ = kg.relation_count();
  for (const char* s : {"[CLS]", "[SEP]", "[MASK]", "[PAD]"}) v.add(s);
  for (const auto& r : kg.relations())
    for (int i = 1; i <= kSoftSeparators; ++i) v.add("[SEP" + std::to_string(i) + ":" + r.token + "]");
  for (const auto& r : kg.relations()) v.add(relation_symbol(r));
  for (const auto& e : kg.entities()) v.add(entity_symbol(e));
  if (v.size() != 4 + v.relations_ * (kSoftSeparators + 1) + v.entities_)
    throw DataError("vocabulary: entity or relation tokens collide");

  std::map<std::string, std::size_t> freq;
  auto count = [&](std::string_view text) {
    for (auto& w : words(text)) ++freq[w];
  };
  count(kTemplateText);
  for (const auto& e : kg.entities()) {
    count(e.name);
    count(e.description);
  }
  for (const auto& r : kg.relations()) count(r.name);

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (char c = 'a'; c <= 'z'; ++c) {
    v.add(std::string(1, c));
    v.add("##" + std::string(1, c));
  }
  for (char c = '0'; c <= '9'; ++c) {
    v.add(std::string(1, c));
    v.add("##" + std::string(1, c));
  }
  for (const auto& w : words(kTemplateText)) v.add(w);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const std::string& w = ranked[i].first;
    if (i < config.max_words) {
      v.add(w);
      continue;
    }
    for (std::size_t off = 0; off < w.size(); off += v.piece_length_) {
      const std::string piece = w.substr(off, v.piece_length_);
      v.add(off == 0 ? piece : "##" + piece);
    }
  }
  return v;
}

std::vector<Index> Vocabulary::pieces_of(const std::string& word) const {
  std::vector<Index> out;
  if (auto id = find(word); id && *id >= 4 + relations_ * (kSoftSeparators + 1) + entities_) {
    out.push_back(*id);
    return out;
  }
  for (std::size_t off = 0; off < word.size(); off += piece_length_) {
    const std::string piece = word.substr(off, piece_length_);
    const std::string prefix = off == 0 ? "" : "##";
    if (auto id = find(prefix + piece)) {
      out.push_back(*id);
      continue;
    }
    for (char c : piece)
      if (auto id = find(prefix + std::string(1, c))) out.push_back(*id);
  }
  return out;
}

std::vector<Index> Vocabulary::word_pieces(std::string_view text) const {
  std::vector<Index> out;
  for (const auto& w : words(text)) {
    const auto p = pieces_of(w);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write vocabulary " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << i << '\n';
  if (!os) throw DataError("failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  Vocabulary v;
  v.piece_length_ = 1;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_tabs(lines[i]);
    if (f.size() != 2 || std::to_string(v.tokens_.size()) != f[1])
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected token<TAB>id with dense ids");
    const std::string& tok = f[0];
    if (tok.starts_with("[R:")) ++v.relations_;
    if (tok.starts_with("[E:")) ++v.entities_;
    if (tok.starts_with("##")) v.piece_length_ = std::max(v.piece_length_, tok.size() - 2);
    v.tokens_.push_back(tok);
    v.ids_.emplace(tok, static_cast<Index>(i));
  }
  if (v.size() < 4 || v.tokens_[0] != "[CLS]" || v.tokens_[2] != "[MASK]")
    throw DataError(path.string() + ": special tokens missing");
  return v;
}

}  // namespace kged
