#pragma once

// precision@top-K and recall@top-K over a suspicion ranking.

#include "kged/noise.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kged {

struct KResult {
  double k = 0.0;
  Index inspected = 0;  // ceil(K · n)
  Index hits = 0;       // noisy triplets among the inspected
  std::optional<double> precision;  // empty when the dataset has no noise
  std::optional<double> recall;
  std::map<NoiseKind, Index> kind_hits;
};

struct EvalReport {
  Index total = 0;
  Index noisy = 0;
  std::map<NoiseKind, Index> kind_totals;
  std::vector<KResult> per_k;  // ascending K
  std::string ranking_path;
  double seconds = 0.0;  // wall clock, kept out of the JSON so reports stay byte-stable
};

// ceil(K · n), robust to K · n landing a hair above an integer.
Index top_k_cutoff(double k, Index n);

// `kinds[i]` is the noise kind of the triplet ranked i-th (None = correct).
EvalReport evaluate(const std::vector<NoiseKind>& ranked_kinds, std::vector<double> ks);

// Matches a ranking TSV against a labeled dataset TSV by triplet tokens.
EvalReport evaluate_files(const std::filesystem::path& ranking, const std::filesystem::path& labels,
                          const std::vector<double>& ks);

nlohmann::ordered_json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string format_table(const EvalReport& r);

}  // namespace kged
