#include "kged/baselines.hpp"

#include "kged/checkpoint.hpp"
#include "kged/errors.hpp"
#include "kged/optimizer.hpp"
#include "kged/rng.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace kged {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void normalize_rows(Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
}

struct Batch {
  std::vector<Triplet> positive;
  std::vector<Triplet> negative;  // `negatives` per positive, in order
};

Triplet corrupt(const Triplet& t, Index entities, Rng& rng, const KnowledgeGraph& kg) {
  // A few retries keep most negatives false without biasing the draw much.
  for (int attempt = 0; attempt < 10; ++attempt) {
    Triplet c = t;
    const Index e = static_cast<Index>(rng.below(static_cast<std::uint64_t>(entities)));
    (rng.coin() ? c.head : c.tail) = e;
    if (c != t && !kg.contains(c)) return c;
  }
  Triplet c = t;
  c.tail = static_cast<Index>(rng.below(static_cast<std::uint64_t>(entities)));
  return c;
}

// Adds d score / d embeddings, scaled by `coef`, into the gradient buffers.
void accumulate_bilinear(const EmbeddingModel& m, const Triplet& t, double coef, Matrix& ge, Matrix& gr) {
  const Index d = m.dim;
  auto h = m.entities.row(t.head);
  auto r = m.relations.row(t.relation);
  auto e = m.entities.row(t.tail);
  if (m.kind == BaselineKind::DistMult) {
    ge.row(t.head) += coef * r.cwiseProduct(e);
    ge.row(t.tail) += coef * h.cwiseProduct(r);
    gr.row(t.relation) += coef * h.cwiseProduct(e);
    return;
  }
  const auto hr = h.head(d), hi = h.tail(d), rr = r.head(d), ri = r.tail(d), tr = e.head(d), ti = e.tail(d);
  ge.row(t.head).head(d) += coef * (rr.cwiseProduct(tr) + ri.cwiseProduct(ti));
  ge.row(t.head).tail(d) += coef * (rr.cwiseProduct(ti) - ri.cwiseProduct(tr));
  gr.row(t.relation).head(d) += coef * (hr.cwiseProduct(tr) + hi.cwiseProduct(ti));
  gr.row(t.relation).tail(d) += coef * (hr.cwiseProduct(ti) - hi.cwiseProduct(tr));
  ge.row(t.tail).head(d) += coef * (hr.cwiseProduct(rr) - hi.cwiseProduct(ri));
  ge.row(t.tail).tail(d) += coef * (hi.cwiseProduct(rr) + hr.cwiseProduct(ri));
}

}  // namespace

std::string_view baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::TransE: return "transe";
    case BaselineKind::DistMult: return "distmult";
    case BaselineKind::ComplEx: return "complex";
  }
  return "?";
}

BaselineKind baseline_from_name(std::string_view name) {
  for (auto k : {BaselineKind::TransE, BaselineKind::DistMult, BaselineKind::ComplEx})
    if (baseline_name(k) == name) return k;
  throw UsageError("unknown baseline '" + std::string(name) + "' (expected transe, distmult or complex)");
}

EmbeddingModel init_baseline(Index entities, Index relations, const BaselineConfig& config) {
  if (config.dim < 1) throw UsageError("baseline dimension must be positive");
  EmbeddingModel m;
  m.kind = config.kind;
  m.dim = config.dim;
  const Index width = config.kind == BaselineKind::ComplEx ? 2 * config.dim : config.dim;
  Rng rng(derive_seed(config.seed, {0x62617365}));
  const double bound = config.kind == BaselineKind::TransE ? 6.0 / std::sqrt(static_cast<double>(config.dim)) : 0.1;
  auto fill = [&](Index rows) {
    Matrix x(rows, width);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
    return x;
  };
  m.relations = fill(relations);
  m.entities = fill(entities);
  if (config.kind == BaselineKind::TransE) {
    normalize_rows(m.relations);
    normalize_rows(m.entities);
  }
  return m;
}

double raw_score(const EmbeddingModel& m, Index h, Index r, Index t) {
  const auto eh = m.entities.row(h), er = m.relations.row(r), et = m.entities.row(t);
  switch (m.kind) {
    case BaselineKind::TransE: return (eh + er - et).norm();
    case BaselineKind::DistMult: return (eh.array() * er.array() * et.array()).sum();
    case BaselineKind::ComplEx: {
      const Index d = m.dim;
      const auto hr = eh.head(d).array(), hi = eh.tail(d).array();
      const auto rr = er.head(d).array(), ri = er.tail(d).array();
      const auto tr = et.head(d).array(), ti = et.tail(d).array();
      return (hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr).sum();
    }
  }
  return 0.0;
}

double baseline_score(const EmbeddingModel& m, Index h, Index r, Index t) {
  const double s = raw_score(m, h, r, t);
  return m.kind == BaselineKind::TransE ? s : -s;
}

EmbeddingModel train_baseline(const KnowledgeGraph& kg, const BaselineConfig& config, std::vector<double>* losses) {
  return train_baseline(kg, kg.triplets(), config, losses);
}

EmbeddingModel train_baseline(const KnowledgeGraph& kg, const std::vector<Triplet>& triplets,
                              const BaselineConfig& config, std::vector<double>* losses) {
  if (config.epochs < 0 || config.batch_size < 1 || config.negatives < 1)
    throw UsageError("baseline epochs, batch size and negatives must be positive");
  EmbeddingModel m = init_baseline(kg.entity_count(), kg.relation_count(), config);
  if (triplets.empty() || config.epochs == 0) return m;
  Rng rng(derive_seed(config.seed, {0x747261696e}));

  const Index n = static_cast<Index>(triplets.size());
  const long batches = static_cast<long>((n + config.batch_size - 1) / config.batch_size);
  std::vector<Tensor> params{Tensor::parameter(m.entities, "entities"), Tensor::parameter(m.relations, "relations")};
  const bool bilinear = config.kind != BaselineKind::TransE;
  std::unique_ptr<AdamW> adam;
  if (bilinear)
    adam = std::make_unique<AdamW>(params, CosineSchedule{config.learning_rate, 0, batches * config.epochs + 1},
                                   AdamWConfig{.weight_decay = config.weight_decay});

  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Matrix& E = params[0].mutable_value();
      Matrix& R = params[1].mutable_value();
      m.entities = E;  // scoring helpers read the model
      m.relations = R;
      Matrix ge = Matrix::Zero(E.rows(), E.cols());
      Matrix gr = Matrix::Zero(R.rows(), R.cols());
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Triplet& p = triplets[order[k]];
        for (int q = 0; q < config.negatives; ++q) {
          const Triplet c = corrupt(p, kg.entity_count(), rng, kg);
          if (!bilinear) {
            const RowVector dp = E.row(p.head) + R.row(p.relation) - E.row(p.tail);
            const RowVector dn = E.row(c.head) + R.row(c.relation) - E.row(c.tail);
            const double np = dp.norm(), nn = dn.norm();
            const double l = config.margin + np - nn;
            if (l <= 0.0) continue;
            batch_loss += l;
            const RowVector gp = np > 0 ? RowVector(dp / np) : RowVector::Zero(dp.size());
            const RowVector gn = nn > 0 ? RowVector(dn / nn) : RowVector::Zero(dn.size());
            ge.row(p.head) += gp;
            gr.row(p.relation) += gp;
            ge.row(p.tail) -= gp;
            ge.row(c.head) -= gn;
            gr.row(c.relation) -= gn;
            ge.row(c.tail) += gn;
          } else {
            const double sp = raw_score(m, p.head, p.relation, p.tail);
            const double sn = raw_score(m, c.head, c.relation, c.tail);
            batch_loss += softplus(-sp) + softplus(sn);
            accumulate_bilinear(m, p, -sigmoid(-sp), ge, gr);
            accumulate_bilinear(m, c, sigmoid(sn), ge, gr);
          }
        }
      }
      const double scale = 1.0 / static_cast<double>((end - start) * static_cast<std::size_t>(config.negatives));
      if (!std::isfinite(batch_loss))
        throw NumericalError(std::string(baseline_name(config.kind)) + " diverged in epoch " + std::to_string(epoch));
      total += batch_loss;
      params[0].node()->grad = ge * scale;
      params[1].node()->grad = gr * scale;
      if (bilinear) {
        adam->step();
      } else {
        sgd_step(params, config.learning_rate);
        normalize_rows(params[0].mutable_value());
      }
    }
    if (losses) losses->push_back(total / static_cast<double>(n * config.negatives));
  }
  m.entities = params[0].value();
  m.relations = params[1].value();
  return m;
}

std::vector<Index> rank_all_tails(const EmbeddingModel& m, Index h, Index r) {
  const Index n = m.entities.rows();
  std::vector<double> s(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) s[static_cast<std::size_t>(t)] = baseline_score(m, h, r, t);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return s[static_cast<std::size_t>(a)] < s[static_cast<std::size_t>(b)]; });
  return order;
}

std::vector<std::size_t> baseline_ranking(const EmbeddingModel& m, const std::vector<Triplet>& triplets) {
  std::vector<double> s(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i)
    s[i] = baseline_score(m, triplets[i].head, triplets[i].relation, triplets[i].tail);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return order;
}

void save_baseline(const std::filesystem::path& path, const EmbeddingModel& m) {
  Matrix meta(1, 2);
  meta << static_cast<double>(static_cast<int>(m.kind)), static_cast<double>(m.dim);
  save_checkpoint(path, {Tensor::parameter(meta, "baseline.meta"), Tensor::parameter(m.entities, "baseline.entities"),
                         Tensor::parameter(m.relations, "baseline.relations")});
}

EmbeddingModel load_baseline(const std::filesystem::path& path) {
  const auto items = load_checkpoint(path);
  if (items.size() != 3 || items[0].name != "baseline.meta" || items[0].value.size() != 2)
    throw DataError(path.string() + ": not a baseline checkpoint");
  EmbeddingModel m;
  m.kind = static_cast<BaselineKind>(static_cast<int>(items[0].value(0, 0)));
  m.dim = static_cast<Index>(items[0].value(0, 1));
  m.entities = items[1].value;
  m.relations = items[2].value;
  return m;
}

}  // namespace kged
