// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Usage: acceptance <path-to-kged-cli> [ids...]

#include "fixtures.hpp"
#include "primitive_checks.hpp"
#include "stats.hpp"

#include "kged/baselines.hpp"
#include "kged/evaluation.hpp"
#include "kged/fusion.hpp"
#include "kged/grad_check.hpp"
#include "kged/model.hpp"
#include "kged/noise.hpp"
#include "kged/objectives.hpp"
#include "kged/ops.hpp"
#include "kged/study.hpp"
#include "kged/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>

using namespace kged;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr int kGradPoints = 100;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kLossTolerance = 1e-9;
constexpr int kLossTrials = 500;
constexpr double kChiSquareAlpha = 0.01;
constexpr double kAdversarialBudgetSeconds = 60.0;
constexpr double kRandomRankingSlack = 0.01;
constexpr double kSmokePrecision = 0.60;
constexpr double kSmokeBudgetSeconds = 15 * 60.0;
constexpr double kTrendGap = 0.10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double cosine(const Matrix& a, Index i, const Matrix& b, Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  Rng rng(1001);
  for (const auto& c : kged::testing::primitive_cases())
    for (int p = 0; p < kGradPoints; ++p) {
      const double e = c.trial(rng);
      if (e > worst) worst = e, worst_name = c.name;
    }

  // Composed encoder losses on a graph with one-word names, which keeps the
  // vocabulary (and so the coordinate count) small.
  std::vector<Entity> ents;
  for (Index i = 0; i < 5; ++i) ents.push_back({i, "e" + std::to_string(i), "n" + std::to_string(i), i % 2 ? "ab c" : ""});
  const KnowledgeGraph kg(ents, {{0, "r0", "x"}, {1, "r1", "y"}}, {{0, 0, 1}, {1, 1, 2}, {2, 0, 3}, {3, 1, 4}, {4, 0, 0}, {1, 0, 3}});
  RunConfig cfg = kged::testing::toy_config(4);
  cfg.pretrain_entity_tokens = false;
  cfg.vocab.max_words = 4;
  cfg.text_encoder.max_length = 16;
  cfg.structure_encoder.max_length = 13;
  cfg.structure_encoder.neighbors = 2;
  for (const char* variant : {"text-only", "structure-only", "full"}) {
    cfg.variant = variant;
    for (int p = 0; p < kGradPoints; ++p) {
      cfg.seed = static_cast<std::uint64_t>(p);
      DualModel model(kg, cfg);
      Rng pick(derive_seed(77, {static_cast<std::uint64_t>(p)}));
      std::vector<Triplet> batch;
      for (int b = 0; b < 2; ++b) batch.push_back(kg.triplets()[pick.below(6)]);
      const std::vector<double> c{0.3 + pick.uniform(), pick.uniform()};
      const double alpha = cfg.model_variant().structure ? (cfg.model_variant().text ? 0.4 : 0.0) : 1.0;
      auto loss = [&] {
        const auto f = model.forward(kg, batch, static_cast<std::uint64_t>(p), nullptr, nullptr);
        Tensor l = weighted_reconstruction_loss(f.losses, c, alpha);
        if (f.icl) l = add(l, contrastive_loss(*f.icl, c));
        return l;
      };
      const double e = grad_check(loss, model.parameters());
      if (e > worst) worst = e, worst_name = std::string("encoder loss (") + variant + ")";
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradTolerance && secs < kGradBudgetSeconds,
          fmt("max relative error %.2e", worst) + " (" + worst_name + "), " + fmt("%.1f s", secs)};
}

Outcome loss_oracles() {
  Rng rng(2002);
  double worst = 0.0;
  for (int trial = 0; trial < kLossTrials; ++trial) {
    const Index b = 1 + static_cast<Index>(rng.below(8));
    const Index p = 2 + static_cast<Index>(rng.below(7));
    const int x = 1 + static_cast<int>(rng.below(6));
    Matrix vh = kged::testing::random_matrix(rng, b, p), vt = kged::testing::random_matrix(rng, b, p);
    Matrix uh = kged::testing::random_matrix(rng, b, p), ut = kged::testing::random_matrix(rng, b, p);
    const auto corr = draw_corruptions(b, x, rng);
    const BatchViews views{Tensor::constant(vh), Tensor::constant(vt), Tensor::constant(uh), Tensor::constant(ut), corr};
    std::vector<double> c(static_cast<std::size_t>(b));
    for (auto& v : c) v = rng.uniform();
    const double alpha = rng.uniform();

    const Tensor neg1 = negative_similarity(views, false), neg2 = negative_similarity(views, true);
    const IclLosses icl = icl_losses(views);
    Matrix rec[4];
    for (auto& m : rec) m = (5.0 * kged::testing::random_positive(rng, b, 1)).eval();
    const ReconstructionLosses rl{Tensor::constant(rec[0]), Tensor::constant(rec[1]), Tensor::constant(rec[2]),
                                  Tensor::constant(rec[3])};

    double brute_contr = 0.0, brute_rec = 0.0;
    for (Index i = 0; i < b; ++i) {
      double n1 = 0.0, n2 = 0.0;
      for (Index j = 0; j < b; ++j)
        if (j != i) {
          n1 += std::exp(cosine(vh, i, ut, j));
          n2 += std::exp(cosine(vt, i, uh, j));
        }
      for (const auto& pc : corr[static_cast<std::size_t>(i)]) {
        // Head corruption swaps the head-side vector: v^h in the first
        // pair, u^h in the second.
        n1 += std::exp(pc.head ? cosine(vh, pc.partner, ut, i) : cosine(vh, i, ut, pc.partner));
        n2 += std::exp(pc.head ? cosine(vt, i, uh, pc.partner) : cosine(vt, pc.partner, uh, i));
      }
      const double s1 = cosine(vh, i, ut, i), s2 = cosine(vt, i, uh, i);
      const double l1 = -std::log(std::exp(s1) / (std::exp(s1) + n1));
      const double l2 = -std::log(std::exp(s2) / (std::exp(s2) + n2));
      worst = std::max({worst, std::abs(neg1.value()(i, 0) - n1), std::abs(neg2.value()(i, 0) - n2),
                        std::abs(icl.first.value()(i, 0) - l1), std::abs(icl.second.value()(i, 0) - l2)});
      const double ci = c[static_cast<std::size_t>(i)];
      brute_contr += ci * (l1 + l2);
      brute_rec += alpha * ci * (rec[0](i, 0) + rec[1](i, 0)) + (1.0 - alpha) * ci * (rec[2](i, 0) + rec[3](i, 0));
    }
    worst = std::max({worst, std::abs(contrastive_loss(icl, c).item() - brute_contr),
                      std::abs(weighted_reconstruction_loss(rl, c, alpha).item() - brute_rec),
                      std::abs(weighted_reconstruction_loss(bundles(rl), c, alpha) - brute_rec)});
  }
  return {worst <= kLossTolerance, fmt("max absolute deviation %.2e over %g trials", worst, kLossTrials)};
}

Outcome fusion_oracle() {
  Rng rng(3003);
  int fuse_mismatch = 0, order_mismatch = 0;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Index r1 = 1 + static_cast<Index>(rng.below(100000)), r2 = 1 + static_cast<Index>(rng.below(100000));
    const Index gamma = 1 + static_cast<Index>(rng.below(200));
    const double beta = 0.05 + 4.0 * rng.uniform();
    const double direct = 1.0 / std::ceil(static_cast<double>(r1) / static_cast<double>(gamma)) +
                          1.0 / std::pow(std::ceil(static_cast<double>(r2) / static_cast<double>(gamma)), beta);
    fuse_mismatch += rank_fuse(r1, r2, gamma, beta) != direct;
  }
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> fused(n);
    for (auto& f : fused) f = i % 3 == 0 ? static_cast<double>(rng.below(5)) : rng.normal();
    const auto z = make_pseudo_labels(static_cast<Index>(n), 0.5, 0.15, static_cast<std::uint64_t>(i));
    const Assignment a = assign_confidence(fused, z);
    std::vector<std::size_t> oracle(n);
    std::iota(oracle.begin(), oracle.end(), 0);
    std::stable_sort(oracle.begin(), oracle.end(), [&](auto x, auto y) { return fused[x] > fused[y]; });
    for (std::size_t k = 0; k < n; ++k) {
      order_mismatch += a.confidence[oracle[k]] != z[k] || a.rank[oracle[k]] != static_cast<Index>(k + 1);
      lo = std::min(lo, a.confidence[k]);
      hi = std::max(hi, a.confidence[k]);
    }
  }
  return {fuse_mismatch == 0 && order_mismatch == 0 && lo >= 0.01 && hi <= 1.0,
          fmt("%g fusion mismatches, %g ordering mismatches, confidences in [%.4f, %.4f]", fuse_mismatch,
              order_mismatch, lo, hi)};
}

Outcome semantic_fidelity() {
  Rng rng(4004);
  double min_p = 1.0;
  for (int set = 0; set < 20; ++set) {
    // Unit-norm candidates as the hashed embedder produces, at a spread
    // that makes the softmax clearly non-uniform.
    const std::size_t n = 2 + rng.below(30);
    auto unit = [&] {
      RowVector v = RowVector::NullaryExpr(16, [&] { return rng.normal(); });
      return RowVector(v / v.norm());
    };
    const RowVector anchor = 3.0 * unit();
    std::vector<RowVector> cand;
    for (std::size_t i = 0; i < n; ++i) cand.push_back(unit());
    const auto p = semantic_distribution(anchor, cand);
    std::vector<long> hits(n, 0);
    Rng draws(derive_seed(4004, {static_cast<std::uint64_t>(set)}));
    for (int k = 0; k < 100000; ++k) ++hits[sample_discrete(p, draws)];
    min_p = std::min(min_p, kged::testing::chi_square(hits, p).p_value);
  }
  return {min_p > kChiSquareAlpha, fmt("smallest p-value over 20 sets: %.4f", min_p)};
}

Outcome adversarial_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig sc;
  sc.entities = 80;
  sc.relations = 5;
  sc.triplets = 800;
  sc.clusters = 4;
  sc.seed = 5;
  const KnowledgeGraph kg = make_synthetic_kg(sc);
  AdversarialConfig ac;
  ac.transe.dim = 16;
  ac.transe.epochs = 30;
  ac.transe.seed = 9;
  AdversarialTrace trace;
  const NoisyDataset d = inject_adversarial(kg, 0.05, ac, 13, &trace);
  std::map<Triplet, Triplet> source;
  for (const auto& n : d.items)
    if (n.noisy) source[n.triplet] = n.provenance;
  int outside = 0, true_tail = 0;
  for (std::size_t i = 0; i < trace.noise.size(); ++i) {
    const Triplet t = trace.noise[i];
    const EmbeddingModel& m = trace.models.at(static_cast<std::size_t>(trace.iteration[i]));
    std::vector<std::pair<double, Index>> all;
    for (Index e = 0; e < kg.entity_count(); ++e) {
      const RowVector diff = m.entities.row(t.head) + m.relations.row(t.relation) - m.entities.row(e);
      all.push_back({diff.norm(), e});
    }
    std::sort(all.begin(), all.end());
    bool top = false;
    for (std::size_t k = 0; k < 10; ++k) top |= all[k].second == t.tail;
    outside += !top;
    true_tail += t.tail == source.at(t).tail;
  }
  const double secs = seconds_since(t0);
  const bool ok = outside == 0 && true_tail == 0 && static_cast<Index>(trace.noise.size()) == d.noisy_count() &&
                  d.noisy_count() == 40 && secs < kAdversarialBudgetSeconds;
  return {ok, fmt("%g noises, %g outside the top 10, %g equal to the true tail, %.1f s",
                  static_cast<double>(trace.noise.size()), outside, true_tail, secs)};
}

Outcome evaluation_harness() {
  // 950 clean triplets plus 50 noisy ones: noise is exactly 5% of the ranked set.
  SyntheticConfig sc;
  sc.entities = 120;
  sc.relations = 6;
  sc.triplets = 950;
  sc.clusters = 4;
  sc.seed = 6;
  const KnowledgeGraph kg = make_synthetic_kg(sc);
  const NoisyDataset d = inject_random(kg, 50.0 / 950.0, 14);
  const LabeledGraph g = labeled_graph(kg, d);
  BaselineConfig bc;
  bc.dim = 16;
  bc.epochs = 30;
  const auto order = baseline_ranking(train_baseline(g.kg, bc), g.kg.triplets());
  std::vector<NoiseKind> ranked;
  for (auto i : order) ranked.push_back(g.kinds[i]);
  const KResult k5 = evaluate(ranked, {0.05}).per_k[0];
  const bool equal = d.noisy_count() == 50 && ranked.size() == 1000 && *k5.precision == *k5.recall;

  Rng rng(6006);
  double sum = 0.0;
  for (int s = 0; s < 1000; ++s) {
    rng.shuffle(ranked);
    sum += *evaluate(ranked, {0.05}).per_k[0].precision;
  }
  const double mean = sum / 1000.0;
  return {equal && std::abs(mean - 0.05) <= kRandomRankingSlack,
          fmt("TransE ranking precision@5%% %.4f, recall@5%% %.4f; shuffled mean precision@5%% %.4f", *k5.precision,
              *k5.recall, mean)};
}

// ---------------------------------------------------------------------------

StudyConfig smoke_study() {
  StudyConfig s;
  s.synthetic = SyntheticConfig{};
  s.synthetic->cluster_fidelity = 0.99;
  s.synthetic->coupled_share = 1.0;
  s.synthetic->seed = 1;
  s.kinds = {NoiseKind::Random, NoiseKind::Semantic};
  s.models = {"full", "transe", "structure-only"};
  s.ratio = 0.05;
  s.noise_seed = 7;
  s.baseline.dim = 32;
  s.baseline.epochs = 100;
  s.baseline.learning_rate = 0.01;

  RunConfig& r = s.run;
  r.epochs = 6;
  r.batch_size = 32;
  for (EncoderConfig* e : {&r.text_encoder, &r.structure_encoder}) {
    e->layers = 2;
    e->heads = 4;
    e->width = 64;
    e->ff_width = 128;
    e->dropout = 0.1;
  }
  r.text_encoder.max_length = 40;
  r.structure_encoder.max_length = 32;
  r.structure_encoder.neighbors = 8;
  r.projection_dim = 32;
  r.optimizer.learning_rate = 0.002;
  r.eval_k = {0.05};
  return s;
}

struct StudyRun {
  StudyResult result;
  double setup_seconds = 0.0;
};

const StudyRun& smoke_results() {
  static const StudyRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const StudyConfig c = smoke_study();
    const KnowledgeGraph kg = study_graph(c);
    StudyRun out;
    out.setup_seconds = seconds_since(t0);
    out.result = empirical_study(kg, c);
    return out;
  }();
  return run;
}

double precision_at_5(const StudyResult& r, NoiseKind kind, const std::string& model) {
  return r.at(kind, model).report.per_k.at(0).precision.value();
}

Outcome smoke() {
  const StudyRun& s = smoke_results();
  const double full = precision_at_5(s.result, NoiseKind::Random, "full");
  const double transe = precision_at_5(s.result, NoiseKind::Random, "transe");
  const double secs = s.setup_seconds + s.result.at(NoiseKind::Random, "full").report.seconds +
                      s.result.at(NoiseKind::Random, "transe").report.seconds;
  return {full >= kSmokePrecision && full >= transe && secs <= kSmokeBudgetSeconds,
          fmt("full precision@5%% %.4f, TransE %.4f, %.0f s", full, transe, secs)};
}

Outcome trend() {
  const StudyResult& r = smoke_results().result;
  const double s_rand = precision_at_5(r, NoiseKind::Random, "structure-only");
  const double s_sem = precision_at_5(r, NoiseKind::Semantic, "structure-only");
  const double f_rand = precision_at_5(r, NoiseKind::Random, "full");
  const double f_sem = precision_at_5(r, NoiseKind::Semantic, "full");
  const double s_gap = s_rand - s_sem, f_gap = f_rand - f_sem;
  return {s_gap >= kTrendGap && f_gap < s_gap,
          fmt("structure-only %.4f random vs %.4f semantic", s_rand, s_sem) +
              fmt("; full %.4f random vs %.4f semantic", f_rand, f_sem)};
}

// ---------------------------------------------------------------------------

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  kged::testing::TempDir dir("acceptance_cli");
  const fs::path root = dir.path;
  const std::string q = "'" + cli + "'";
  if (run(q + " synth --entities 60 --relations 4 --triplets 400 --clusters 3 --seed 3 --out '" + (root / "g").string() + "'"))
    return {false, "synth failed"};
  const std::string graph = " --triplets '" + (root / "g/triplets.tsv").string() + "' --entities '" +
                            (root / "g/entities.tsv").string() + "' --relations '" + (root / "g/relations.tsv").string() + "'";
  std::vector<std::string> diffs;
  std::vector<std::string> failures;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path p = root / ("pass" + std::to_string(pass));
    fs::create_directories(p);
    std::ofstream(p / "config.json") << R"({"triplets": ")" << (p / "noise/dataset.tsv").string() << R"(", "entities": ")"
                                     << (root / "g/entities.tsv").string() << R"(", "relations": ")"
                                     << (root / "g/relations.tsv").string() << R"(", "output_dir": ")"
                                     << (p / "run").string() << R"(", "epochs": 2, "batch_size": 16, "seed": 5,
      "text_encoder": {"layers": 1, "heads": 2, "width": 16, "ff_width": 32, "max_length": 32},
      "structure_encoder": {"layers": 1, "heads": 2, "width": 16, "ff_width": 32, "max_length": 16, "neighbors": 3},
      "projection_dim": 8})";
    const std::vector<std::pair<std::string, std::string>> steps{
        {"inject", q + " inject" + graph + " --kind mixed --ratio 0.05 --seed 11 --transe-epochs 5 --out '" +
                       (p / "noise").string() + "'"},
        {"train", q + " train --config '" + (p / "config.json").string() + "'"},
        {"detect", q + " detect --checkpoint '" + (p / "run").string() + "' --out '" + (p / "ranking.tsv").string() + "'"},
        {"eval", q + " eval --ranking '" + (p / "ranking.tsv").string() + "' --labels '" +
                     (p / "noise/dataset.tsv").string() + "' --k 0.01,0.05 --out '" + (p / "run/eval.json").string() + "'"},
    };
    for (const auto& [name, cmd] : steps)
      if (run(cmd) != 0) failures.push_back(name + " (pass " + std::to_string(pass + 1) + ")");
  }
  if (!failures.empty()) return {false, "command failed: " + failures.front()};
  const std::vector<std::string> outputs{"noise/dataset.tsv", "noise/manifest.json", "run/model.ckpt",
                                         "run/confidences.tsv", "run/metrics.tsv", "ranking.tsv", "run/eval.json"};
  for (const auto& f : outputs) {
    const std::string a = kged::testing::read_file(root / "pass0" / f), b = kged::testing::read_file(root / "pass1" / f);
    if (a.empty() || a != b) diffs.push_back(f);
  }
  std::string detail = std::to_string(outputs.size() - diffs.size()) + " of " + std::to_string(outputs.size()) +
                       " outputs identical";
  for (const auto& d : diffs) detail += "; differs: " + d;
  return {diffs.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"loss oracle equivalence", loss_oracles},
      {"fusion oracle", fusion_oracle},
      {"semantic-noise fidelity", semantic_fidelity},
      {"adversarial-noise soundness", adversarial_soundness},
      {"evaluation harness", evaluation_harness},
      {"end-to-end smoke", smoke},
      {"noise-kind trend", trend},
      {"CLI determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
