#include "kged/config.hpp"

#include "kged/errors.hpp"
#include "strict_reader.hpp"

#include <fstream>
#include <map>

namespace kged {

namespace {

using nlohmann::json;
using detail::Reader;

void read_encoder(Reader& r, EncoderConfig& e, bool structure) {
  r.get("layers", e.layers);
  r.get("heads", e.heads);
  r.get("width", e.width);
  r.get("ff_width", e.ff_width);
  r.get("max_length", e.max_length);
  if (structure) r.get("neighbors", e.neighbors);
  r.get("dropout", e.dropout);
  r.get("init_std", e.init_std);
}

nlohmann::ordered_json encoder_json(const EncoderConfig& e, bool structure) {
  nlohmann::ordered_json j;
  j["layers"] = e.layers;
  j["heads"] = e.heads;
  j["width"] = e.width;
  j["ff_width"] = e.ff_width;
  j["max_length"] = e.max_length;
  if (structure) j["neighbors"] = e.neighbors;
  j["dropout"] = e.dropout;
  j["init_std"] = e.init_std;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  hyper.validate();
  text_encoder.validate();
  structure_encoder.validate();
  model_variant();
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  if (refresh_period < 1) throw UsageError("refresh_period must be at least 1");
  if (projection_dim < 1) throw UsageError("projection_dim must be positive");
  if (!(optimizer.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (!(optimizer.warmup_fraction >= 0.0 && optimizer.warmup_fraction < 1.0))
    throw UsageError("warmup_fraction must lie in [0, 1)");
  for (double k : eval_k)
    if (!(k > 0.0 && k <= 1.0)) throw UsageError("evaluation K values must lie in (0, 1]");
}

ModelVariant RunConfig::model_variant() const {
  static const std::map<std::string, ModelVariant> variants{
      {"full", ModelVariant::full()},
      {"structure-only", ModelVariant::structure_only()},
      {"text-only", ModelVariant::text_only()},
      {"no-contrastive", {true, true, false, true}},
      {"no-confidence", {true, true, true, false}},
  };
  auto it = variants.find(variant);
  if (it == variants.end()) throw UsageError("unknown model variant '" + variant + "'");
  return it->second;
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("triplets", c.triplets);
  r.get("entities", c.entities);
  r.get("relations", c.relations);
  r.get("output_dir", c.output_dir);
  r.get("variant", c.variant);
  r.object("hyper", [&](Reader& h) {
    h.get("alpha", c.hyper.alpha);
    h.get("lambda", c.hyper.lambda);
    h.get("gamma", c.hyper.gamma);
    h.get("beta", c.hyper.beta);
    h.get("corrupted_pairs", c.hyper.corrupted_pairs);
    h.get("mu", c.hyper.mu);
    h.get("rho", c.hyper.rho);
  });
  r.object("text_encoder", [&](Reader& e) { read_encoder(e, c.text_encoder, false); });
  r.object("structure_encoder", [&](Reader& e) { read_encoder(e, c.structure_encoder, true); });
  r.object("vocab", [&](Reader& v) {
    v.get("max_words", c.vocab.max_words);
    v.get("piece_length", c.vocab.piece_length);
  });
  r.get("projection_dim", c.projection_dim);
  r.get("pretrain_entity_tokens", c.pretrain_entity_tokens);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("refresh_period", c.refresh_period);
  r.object("optimizer", [&](Reader& o) {
    o.get("learning_rate", c.optimizer.learning_rate);
    o.get("warmup_fraction", c.optimizer.warmup_fraction);
    o.get("weight_decay", c.optimizer.weight_decay);
    o.get("beta1", c.optimizer.beta1);
    o.get("beta2", c.optimizer.beta2);
  });
  r.get("eval_k", c.eval_k);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["triplets"] = c.triplets;
  j["entities"] = c.entities;
  j["relations"] = c.relations;
  j["output_dir"] = c.output_dir;
  j["variant"] = c.variant;
  j["hyper"] = {{"alpha", c.hyper.alpha}, {"lambda", c.hyper.lambda}, {"gamma", c.hyper.gamma},
                {"beta", c.hyper.beta},   {"corrupted_pairs", c.hyper.corrupted_pairs},
                {"mu", c.hyper.mu},       {"rho", c.hyper.rho}};
  j["text_encoder"] = encoder_json(c.text_encoder, false);
  j["structure_encoder"] = encoder_json(c.structure_encoder, true);
  j["vocab"] = {{"max_words", c.vocab.max_words}, {"piece_length", c.vocab.piece_length}};
  j["projection_dim"] = c.projection_dim;
  j["pretrain_entity_tokens"] = c.pretrain_entity_tokens;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["refresh_period"] = c.refresh_period;
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"warmup_fraction", c.optimizer.warmup_fraction},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2}};
  j["eval_k"] = c.eval_k;
  j["seed"] = c.seed;
  return j;
}

}  // namespace kged
