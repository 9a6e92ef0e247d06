#include "kged/evaluation.hpp"

#include "kged/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace kged {

namespace {

std::string key_of(const std::vector<std::string>& f) { return f[0] + '\t' + f[1] + '\t' + f[2]; }

constexpr NoiseKind kNoiseKinds[] = {NoiseKind::Random, NoiseKind::Semantic, NoiseKind::Adversarial};

}  // namespace

Index top_k_cutoff(double k, Index n) {
  if (!(k > 0.0 && k <= 1.0)) throw UsageError("K must lie in (0, 1]");
  const Index c = static_cast<Index>(std::ceil(k * static_cast<double>(n) - 1e-9));
  if (c < 1) throw UsageError("K = " + std::to_string(k) + " inspects no triplet of " + std::to_string(n));
  return std::min(c, n);
}

EvalReport evaluate(const std::vector<NoiseKind>& kinds, std::vector<double> ks) {
  std::sort(ks.begin(), ks.end());
  EvalReport r;
  r.total = static_cast<Index>(kinds.size());
  for (auto k : kinds)
    if (k != NoiseKind::None) {
      ++r.noisy;
      ++r.kind_totals[k];
    }
  for (double k : ks) {
    KResult kr;
    kr.k = k;
    kr.inspected = top_k_cutoff(k, r.total);
    for (Index i = 0; i < kr.inspected; ++i)
      if (kinds[static_cast<std::size_t>(i)] != NoiseKind::None) {
        ++kr.hits;
        ++kr.kind_hits[kinds[static_cast<std::size_t>(i)]];
      }
    if (r.noisy > 0) {
      kr.precision = static_cast<double>(kr.hits) / static_cast<double>(kr.inspected);
      kr.recall = static_cast<double>(kr.hits) / static_cast<double>(r.noisy);
    }
    r.per_k.push_back(std::move(kr));
  }
  return r;
}

EvalReport evaluate_files(const std::filesystem::path& ranking, const std::filesystem::path& labels,
                          const std::vector<double>& ks) {
  std::unordered_map<std::string, NoiseKind> truth;
  const auto label_lines = read_lines(labels);
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    if (label_lines[i].empty()) continue;
    const auto f = split_tabs(label_lines[i]);
    if (f.size() != 5 || (f[3] != "0" && f[3] != "1"))
      throw DataError(labels.string() + ":" + std::to_string(i + 1) + ": expected head, relation, tail, label, kind");
    NoiseKind kind = NoiseKind::None;
    if (f[3] == "1") {
      try {
        kind = noise_from_name(f[4]);
      } catch (const UsageError&) {
        throw DataError(labels.string() + ":" + std::to_string(i + 1) + ": unknown noise kind '" + f[4] + "'");
      }
      // Labelled noisy without a kind still counts as noise.
      if (kind == NoiseKind::None) kind = NoiseKind::Random;
    }
    truth[key_of(f)] = kind;
  }
  std::vector<NoiseKind> kinds;
  const auto rank_lines = read_lines(ranking);
  for (std::size_t i = 0; i < rank_lines.size(); ++i) {
    if (rank_lines[i].empty()) continue;
    const auto f = split_tabs(rank_lines[i]);
    if (f.size() < 3) throw DataError(ranking.string() + ":" + std::to_string(i + 1) + ": expected a triplet");
    auto it = truth.find(key_of(f));
    if (it == truth.end())
      throw DataError(ranking.string() + ":" + std::to_string(i + 1) + ": triplet has no label");
    kinds.push_back(it->second);
  }
  if (kinds.size() != truth.size())
    throw DataError("ranking lists " + std::to_string(kinds.size()) + " triplets, labels cover " +
                    std::to_string(truth.size()));
  EvalReport r = evaluate(kinds, ks);
  r.ranking_path = ranking.string();
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["ranking"] = r.ranking_path;
  j["triplets"] = r.total;
  j["noisy"] = r.noisy;
  nlohmann::ordered_json totals = nlohmann::ordered_json::object();
  for (auto k : kNoiseKinds)
    if (r.kind_totals.contains(k)) totals[std::string(noise_name(k))] = r.kind_totals.at(k);
  j["kind_totals"] = totals;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& kr : r.per_k) {
    nlohmann::ordered_json row;
    row["k"] = kr.k;
    row["inspected"] = kr.inspected;
    row["hits"] = kr.hits;
    row["precision"] = kr.precision ? nlohmann::ordered_json(*kr.precision) : nlohmann::ordered_json("n/a");
    row["recall"] = kr.recall ? nlohmann::ordered_json(*kr.recall) : nlohmann::ordered_json("n/a");
    nlohmann::ordered_json by_kind = nlohmann::ordered_json::object();
    for (auto k : kNoiseKinds)
      if (r.kind_totals.contains(k)) {
        const Index h = kr.kind_hits.contains(k) ? kr.kind_hits.at(k) : 0;
        by_kind[std::string(noise_name(k))] = {{"hits", h},
                                               {"recall", static_cast<double>(h) / static_cast<double>(r.kind_totals.at(k))}};
      }
    row["by_kind"] = by_kind;
    rows.push_back(row);
  }
  j["results"] = rows;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.ranking_path = j.at("ranking").get<std::string>();
    r.total = j.at("triplets").get<Index>();
    r.noisy = j.at("noisy").get<Index>();
    for (auto it = j.at("kind_totals").begin(); it != j.at("kind_totals").end(); ++it)
      r.kind_totals[noise_from_name(it.key())] = it->get<Index>();
    for (const auto& row : j.at("results")) {
      KResult kr;
      kr.k = row.at("k").get<double>();
      kr.inspected = row.at("inspected").get<Index>();
      kr.hits = row.at("hits").get<Index>();
      if (row.at("precision").is_number()) kr.precision = row.at("precision").get<double>();
      if (row.at("recall").is_number()) kr.recall = row.at("recall").get<double>();
      for (auto it = row.at("by_kind").begin(); it != row.at("by_kind").end(); ++it)
        kr.kind_hits[noise_from_name(it.key())] = it->at("hits").get<Index>();
      r.per_k.push_back(std::move(kr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
  std::sort(r.per_k.begin(), r.per_k.end(), [](const KResult& a, const KResult& b) { return a.k < b.k; });
  return r;
}

std::string format_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%8s %10s %6s %10s %10s\n", "K", "inspected", "hits", "precision", "recall");
  os << buf;
  auto cell = [](const std::optional<double>& v) {
    char b[32];
    if (v)
      std::snprintf(b, sizeof b, "%10.4f", *v);
    else
      std::snprintf(b, sizeof b, "%10s", "n/a");
    return std::string(b);
  };
  for (const auto& kr : r.per_k) {
    std::snprintf(buf, sizeof buf, "%8.4f %10lld %6lld ", kr.k, static_cast<long long>(kr.inspected),
                  static_cast<long long>(kr.hits));
    os << buf << cell(kr.precision) << ' ' << cell(kr.recall) << '\n';
  }
  return os.str();
}

}  // namespace kged
