#include "kged/training.hpp"

#include "kged/checkpoint.hpp"
#include "kged/errors.hpp"
#include "kged/ops.hpp"
#include "kged/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace kged {

namespace {

constexpr std::uint64_t kEvalNeighbors = 0x6576616c;
constexpr std::uint64_t kFinalLabels = 0x66696e616c;

double column_dot(const Tensor& t, const std::vector<double>& c) {
  if (!t.defined()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * t.value()(static_cast<Index>(i), 0);
  return s;
}

}  // namespace

LabeledGraph load_training_graph(const RunConfig& config) {
  if (config.triplets.empty() || config.entities.empty() || config.relations.empty())
    throw UsageError("config must name triplets, entities and relations files");
  const auto lines = read_lines(config.triplets);
  const bool labeled = !lines.empty() && split_tabs(lines.front()).size() == 5;
  if (labeled) return load_dataset(config.triplets, config.entities, config.relations);
  LabeledGraph g;
  g.kg = load_kg(config.triplets, config.entities, config.relations);
  g.labels.assign(static_cast<std::size_t>(g.kg.triplet_count()), false);
  g.kinds.assign(g.labels.size(), NoiseKind::None);
  return g;
}

ConfidenceTable score_table(const DualModel& model, const RunConfig& config, const KnowledgeGraph& kg) {
  const auto scores = model.score(kg, derive_seed(config.seed, {kEvalNeighbors}));
  return build_confidence_table(kg.triplets(), scores, config.hyper, model.variant(),
                                derive_seed(config.seed, {kFinalLabels}));
}

TrainingResult run_training(const RunConfig& config) {
  const LabeledGraph g = load_training_graph(config);
  return run_training(config, g.kg);
}

TrainingResult run_training(const RunConfig& config, const KnowledgeGraph& kg, bool write_files) {
  config.validate();
  const std::filesystem::path out = config.output_dir;
  if (write_files) std::filesystem::create_directories(out);

  TrainingResult result;
  result.model = std::make_unique<DualModel>(kg, config);
  DualModel& model = *result.model;
  const ModelVariant variant = model.variant();
  const auto& ts = kg.triplets();
  const std::size_t n = ts.size();
  std::vector<double> confidence(n, 1.0);

  const Index batch = config.batch_size;
  const long batches = static_cast<long>((static_cast<Index>(n) + batch - 1) / batch);
  const long total = std::max<long>(1, batches * config.epochs);
  CosineSchedule schedule{config.optimizer.learning_rate,
                          static_cast<long>(std::floor(config.optimizer.warmup_fraction * static_cast<double>(total))),
                          total};
  std::vector<Tensor> params = model.parameters();
  AdamW opt(params, schedule,
            {config.optimizer.beta1, config.optimizer.beta2, 1e-8, config.optimizer.weight_decay});

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double alpha = variant.text && variant.structure ? config.hyper.alpha : variant.text ? 1.0 : 0.0;
  if (write_files) {
    model.save(out);
    write_metrics(out / "metrics.tsv", {});
  }
  int refreshes = 0;

  for (int epoch = 0; epoch < config.epochs && n > 0; ++epoch) {
    Rng shuffle(derive_seed(config.seed, {0x65706f6368, static_cast<std::uint64_t>(epoch)}));
    shuffle.shuffle(order);
    Rng dropout(derive_seed(config.seed, {0x64726f70, static_cast<std::uint64_t>(epoch)}));
    Rng corruption(derive_seed(config.seed, {0x636f7272, static_cast<std::uint64_t>(epoch)}));
    const std::uint64_t neighbor_seed = derive_seed(config.seed, {0x6e656967, static_cast<std::uint64_t>(epoch)});
    EpochMetrics m;
    m.epoch = epoch + 1;
    for (long b = 0; b < batches; ++b) {
      const std::size_t start = static_cast<std::size_t>(b * batch);
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch));
      std::vector<Triplet> items;
      std::vector<double> c;
      for (std::size_t k = start; k < end; ++k) {
        items.push_back(ts[order[k]]);
        c.push_back(confidence[order[k]]);
      }
      const auto f = model.forward(kg, items, neighbor_seed, &dropout, &corruption);
      Tensor loss = weighted_reconstruction_loss(f.losses, c, alpha);
      if (f.icl) loss = add(loss, contrastive_loss(*f.icl, c));
      loss = scale(loss, 1.0 / static_cast<double>(items.size()));
      if (!std::isfinite(loss.item()))
        throw NumericalError("loss is not finite in epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(b + 1));
      m.text += column_dot(f.losses.text_head, c) + column_dot(f.losses.text_tail, c);
      m.structure += column_dot(f.losses.struct_head, c) + column_dot(f.losses.struct_tail, c);
      if (f.icl) m.contrastive += column_dot(f.icl->first, c) + column_dot(f.icl->second, c);
      for (auto& p : params) p.zero_grad();
      backward(loss);
      opt.step();
    }
    m.text /= static_cast<double>(n);
    m.structure /= static_cast<double>(n);
    m.contrastive /= static_cast<double>(n);
    result.metrics.push_back(m);

    if (variant.adaptive_confidence && (epoch + 1) % config.refresh_period == 0) {
      const auto scores = model.score(kg, derive_seed(config.seed, {kEvalNeighbors}));
      result.history.push_back(build_confidence_table(
          ts, scores, config.hyper, variant, derive_seed(config.seed, {0x7265, static_cast<std::uint64_t>(refreshes)})));
      ++refreshes;
      confidence = result.history.back().confidences();
    }
    if (write_files) {
      save_checkpoint(out / "model.ckpt", params);
      write_metrics(out / "metrics.tsv", result.metrics);
    }
  }
  result.final_table = result.history.empty() ? uniform_table(ts) : result.history.back();
  if (write_files) write_confidence_table(out / "confidences.tsv", result.final_table, kg);
  return result;
}

std::vector<std::size_t> detect(const ConfidenceTable& table) { return table.detection_order(); }

void write_ranking(const std::filesystem::path& path, const ConfidenceTable& table, const KnowledgeGraph& kg) {
  write_confidence_table(path, table, kg, detect(table));
}

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(17);
  os << "epoch\tL_text\tL_struct\tL_contr\n";
  for (const auto& m : metrics) os << m.epoch << '\t' << m.text << '\t' << m.structure << '\t' << m.contrastive << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

}  // namespace kged
