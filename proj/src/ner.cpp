#include "nerguide/ner.hpp"

#include <algorithm>
#include <cmath>

#include "nerguide/common.hpp"
#include "nerguide/nn/checkpoint.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::ner {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow; -log sigmoid(z) == softplus(-z).
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

void check_alignment(const corpus::Sentence& sentence,
                     const corpus::SpanLabels& span,
                     const corpus::CategoryLabels& category) {
  const std::size_t n = sentence.tokens.size();
  if (span.size() != n || category.size() != n) {
    throw DataError("labels for sentence " + std::to_string(sentence.id) +
                    " are not aligned to its " + std::to_string(n) +
                    " tokens");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (span.is_entity[j] != category.cats[j].has_value()) {
      throw DataError("category presence disagrees with span mark at token " +
                      std::to_string(j) + " of sentence " +
                      std::to_string(sentence.id));
    }
  }
}

}  // namespace

void InferenceConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("entity threshold must lie strictly inside (0, 1)");
  }
}

WeightMap WeightMap::uniform(std::size_t tokens, double value) {
  WeightMap map;
  map.span.assign(tokens, value);
  map.category.assign(tokens, value);
  return map;
}

void WeightMap::validate(std::size_t tokens) const {
  if (span.size() != tokens || category.size() != tokens) {
    throw DataError("weight map does not cover all " +
                    std::to_string(tokens) + " tokens");
  }
  for (const double w : span) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw DataError("span weight " + std::to_string(w) +
                      " outside [0, 1]");
    }
  }
  for (const double w : category) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw DataError("category weight " + std::to_string(w) +
                      " outside [0, 1]");
    }
  }
}

WeightMap weights_from_entities(std::size_t tokens,
                                const std::vector<corpus::Entity>& entities,
                                const std::vector<double>& span_scores,
                                const std::vector<double>& category_scores,
                                double o_weight) {
  if (entities.size() != span_scores.size() ||
      entities.size() != category_scores.size()) {
    throw DataError("one span and one category score per entity required");
  }
  WeightMap map;
  map.span.assign(tokens, o_weight);
  map.category.assign(tokens, 0.0);
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const corpus::Entity& entity = entities[i];
    if (entity.start < 0 || entity.end > static_cast<int>(tokens)) {
      throw DataError("entity span outside the sentence");
    }
    for (int t = entity.start; t < entity.end; ++t) {
      map.span[static_cast<std::size_t>(t)] = span_scores[i];
      map.category[static_cast<std::size_t>(t)] = category_scores[i];
    }
  }
  map.validate(tokens);
  return map;
}

NerModel::NerModel(std::shared_ptr<TokenEncoder> encoder,
                   std::vector<std::string> classes, std::uint64_t seed)
    : encoder_(std::move(encoder)), classes_(std::move(classes)) {
  if (!encoder_) throw ConfigError("NER model needs an encoder");
  std::sort(classes_.begin(), classes_.end());
  classes_.erase(std::unique(classes_.begin(), classes_.end()),
                 classes_.end());
  if (classes_.empty()) throw ConfigError("NER model needs at least 1 class");
  const int d = encoder_->dim();
  entity_head_ = nn::Linear("entity_head", d, 1);
  class_head_ =
      nn::Linear("class_head", d, static_cast<Eigen::Index>(classes_.size()));
  Rng rng = Rng::derive(seed, 0x6e6572);  // "ner"
  entity_head_.init(rng, 0.02);
  class_head_.init(rng, 0.02);
}

int NerModel::class_id(const std::string& cls) const {
  const auto it = std::lower_bound(classes_.begin(), classes_.end(), cls);
  if (it == classes_.end() || *it != cls) {
    throw DataError("class '" + cls + "' not in the model's class set");
  }
  return static_cast<int>(it - classes_.begin());
}

NerOutput NerModel::forward(const corpus::Sentence& sentence,
                            const demos::Demonstration* demo) {
  std::vector<std::string> appended;
  if (demo != nullptr && !demo->empty()) {
    const int budget =
        encoder_->max_input_len() - static_cast<int>(sentence.tokens.size());
    appended = demo->tokens_limited(
        budget > 0 ? static_cast<std::size_t>(budget) : 0);
  }
  const Eigen::MatrixXd repr = encoder_->encode(sentence.tokens, appended);
  const Eigen::MatrixXd z_e = entity_head_.forward(repr);
  const Eigen::MatrixXd z_c = class_head_.forward(repr);
  NerOutput out;
  out.entity_probs = z_e.col(0).unaryExpr([](double z) { return sigmoid(z); });
  out.class_dists = nn::row_softmax(z_c);
  return out;
}

corpus::LabelSequence decode_outputs(const NerOutput& outputs,
                                     const InferenceConfig& config,
                                     const std::vector<std::string>& classes) {
  config.validate();
  if (outputs.class_dists.cols() != static_cast<Eigen::Index>(classes.size())) {
    throw DataError("class distribution width does not match the class set");
  }
  corpus::LabelSequence labels;
  labels.tags.reserve(static_cast<std::size_t>(outputs.entity_probs.size()));
  bool prev_entity = false;
  int prev_class = -1;
  for (Eigen::Index j = 0; j < outputs.entity_probs.size(); ++j) {
    if (outputs.entity_probs(j) <= config.threshold) {
      labels.tags.push_back(corpus::BioTag::o());
      prev_entity = false;
      prev_class = -1;
      continue;
    }
    Eigen::Index cls = 0;
    outputs.class_dists.row(j).maxCoeff(&cls);
    const std::string& name = classes[static_cast<std::size_t>(cls)];
    if (prev_entity && cls == prev_class) {
      labels.tags.push_back(corpus::BioTag::i(name));
    } else {
      labels.tags.push_back(corpus::BioTag::b(name));
    }
    prev_entity = true;
    prev_class = static_cast<int>(cls);
  }
  return labels;
}

corpus::LabelSequence NerModel::predict(const corpus::Sentence& sentence,
                                        const InferenceConfig& config) {
  config.validate();
  return decode_outputs(forward(sentence, nullptr), config, classes_);
}

corpus::AnnotatedDataset NerModel::predict_dataset(
    const std::vector<corpus::Sentence>& sentences,
    const InferenceConfig& config) {
  corpus::AnnotatedDataset out;
  out.flavor = corpus::DatasetFlavor::Gold;
  out.class_set = classes_;
  out.sentences = sentences;
  out.labels.reserve(sentences.size());
  for (const corpus::Sentence& sentence : sentences) {
    out.labels.push_back(predict(sentence, config));
  }
  return out;
}

double NerModel::supervised_loss(const corpus::Sentence& sentence,
                                 const corpus::SpanLabels& span,
                                 const corpus::CategoryLabels& category,
                                 const demos::Demonstration* demo) {
  return sentence_objective(sentence, span, category, nullptr, demo, 0.0,
                            false);
}

double NerModel::self_training_loss(const corpus::Sentence& sentence,
                                    const corpus::LabelSequence& pseudo,
                                    const demos::Demonstration* demo) {
  const auto [span, category] = corpus::decompose(pseudo);
  return sentence_objective(sentence, span, category, nullptr, demo, 0.0,
                            false);
}

double NerModel::drl_loss(const corpus::Sentence& sentence,
                          const corpus::SpanLabels& span,
                          const corpus::CategoryLabels& category,
                          const WeightMap& weights,
                          const demos::Demonstration* demo) {
  return sentence_objective(sentence, span, category, &weights, demo, 0.0,
                            false);
}

double NerModel::sentence_objective(const corpus::Sentence& sentence,
                                    const corpus::SpanLabels& span,
                                    const corpus::CategoryLabels& category,
                                    const WeightMap* weights,
                                    const demos::Demonstration* demo,
                                    double grad_scale, bool with_grads) {
  check_alignment(sentence, span, category);
  const std::size_t n = sentence.tokens.size();
  if (weights != nullptr) weights->validate(n);

  std::vector<std::string> appended;
  if (demo != nullptr && !demo->empty()) {
    const int budget = encoder_->max_input_len() - static_cast<int>(n);
    appended = demo->tokens_limited(
        budget > 0 ? static_cast<std::size_t>(budget) : 0);
  }
  const Eigen::MatrixXd repr = encoder_->encode(sentence.tokens, appended);
  const Eigen::MatrixXd z_e = entity_head_.forward(repr);
  const Eigen::MatrixXd z_c = class_head_.forward(repr);
  const Eigen::MatrixXd q = nn::row_softmax(z_c);

  std::size_t entity_tokens = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (span.is_entity[j]) ++entity_tokens;
  }

  double span_sum = 0.0;
  double cat_sum = 0.0;
  Eigen::MatrixXd d_z_e;
  Eigen::MatrixXd d_z_c;
  if (with_grads) {
    d_z_e = Eigen::MatrixXd::Zero(z_e.rows(), 1);
    d_z_c = Eigen::MatrixXd::Zero(z_c.rows(), z_c.cols());
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_ent =
      entity_tokens > 0 ? 1.0 / static_cast<double>(entity_tokens) : 0.0;

  for (std::size_t j = 0; j < n; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    const bool is_entity = span.is_entity[j];
    const double w_span = weights != nullptr ? weights->span[j] : 1.0;
    const double z = z_e(row, 0);
    // -log p(label) for the logistic head, computed from the logit.
    span_sum += w_span * (is_entity ? softplus(-z) : softplus(z));
    if (with_grads) {
      const double target = is_entity ? 1.0 : 0.0;
      d_z_e(row, 0) = grad_scale * w_span * (sigmoid(z) - target) * inv_n;
    }
    if (!is_entity) continue;

    const double w_cat = weights != nullptr ? weights->category[j] : 1.0;
    const int cls = class_id(*category.cats[j]);
    // -log q[cls] via a log-sum-exp over the logits row.
    const double zmax = z_c.row(row).maxCoeff();
    const double lse =
        zmax + std::log((z_c.row(row).array() - zmax).exp().sum());
    cat_sum += w_cat * (lse - z_c(row, cls));
    if (with_grads) {
      d_z_c.row(row) = grad_scale * w_cat * inv_ent * q.row(row);
      d_z_c(row, cls) -= grad_scale * w_cat * inv_ent;
    }
  }

  const double loss = span_sum * inv_n + cat_sum * inv_ent;
  if (with_grads) {
    const Eigen::MatrixXd d_repr =
        entity_head_.backward(d_z_e) + class_head_.backward(d_z_c);
    encoder_->backward(d_repr);
  }
  return loss;
}

std::vector<nn::Tensor*> NerModel::parameters() {
  std::vector<nn::Tensor*> params = encoder_->parameters();
  entity_head_.collect(params);
  class_head_.collect(params);
  return params;
}

std::vector<nn::Tensor*> NerModel::head_parameters() {
  std::vector<nn::Tensor*> params;
  entity_head_.collect(params);
  class_head_.collect(params);
  return params;
}

long NerModel::parameter_total() { return nn::parameter_count(parameters()); }

void NerModel::save(const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["model"] = "ner";
  meta["classes"] = classes_;
  meta["threshold"] = inference.threshold;
  meta["encoder_id"] = encoder_->model_id();
  if (auto* enc = dynamic_cast<TransformerTokenEncoder*>(encoder_.get())) {
    meta["encoder_meta"] = enc->metadata();
  }
  nn::save_checkpoint(path, meta, parameters());
}

NerModel NerModel::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::peek_checkpoint(path);
  if (!meta.contains("encoder_meta")) {
    throw DataError("checkpoint " + path.string() +
                    " references an external encoder; supply one explicitly");
  }
  auto encoder = std::make_shared<TransformerTokenEncoder>(
      TransformerTokenEncoder::from_metadata(meta["encoder_meta"]));
  return load_with_encoder(path, std::move(encoder));
}

NerModel NerModel::load_with_encoder(const std::filesystem::path& path,
                                     std::shared_ptr<TokenEncoder> encoder) {
  const nlohmann::json meta = nn::peek_checkpoint(path);
  if (meta.value("model", "") != "ner") {
    throw DataError("checkpoint " + path.string() + " is not a NER model");
  }
  if (!encoder) throw ConfigError("NER checkpoint loading needs an encoder");
  if (meta.value("encoder_id", "") != encoder->model_id()) {
    throw DataError("checkpoint encoder '" + meta.value("encoder_id", "") +
                    "' does not match the supplied encoder '" +
                    encoder->model_id() + "'");
  }
  NerModel model(std::move(encoder),
                 meta.at("classes").get<std::vector<std::string>>(),
                 /*seed=*/0);
  model.inference.threshold = meta.value("threshold", 0.5);
  model.inference.validate();
  nn::load_checkpoint(path, model.parameters());
  return model;
}

double NerModel::accumulate(const TrainExample& example, LossKind kind,
                            double grad_scale) {
  if (example.sentence == nullptr) {
    throw DataError("train example without a sentence");
  }
  const WeightMap* weights = kind == LossKind::Drl ? &example.weights : nullptr;
  return sentence_objective(*example.sentence, example.span, example.category,
                            weights, example.demo, grad_scale, true);
}

TrainExample make_example(const corpus::Sentence& sentence,
                          const corpus::LabelSequence& labels) {
  TrainExample example;
  example.sentence = &sentence;
  auto [span, category] = corpus::decompose(labels);
  example.span = std::move(span);
  example.category = std::move(category);
  return example;
}

double train_step(NerModel& model, const std::vector<TrainExample>& batch,
                  LossKind kind, nn::AdamW& optimizer) {
  if (batch.empty()) throw DataError("train step needs a non-empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const TrainExample& example : batch) {
    const double loss = model.accumulate(example, kind, inv_batch);
    if (!std::isfinite(loss)) {
      throw TrainError("non-finite loss on sentence " +
                       std::to_string(example.sentence->id));
    }
    total += loss * inv_batch;
  }
  optimizer.step();
  return total;
}

}  // namespace nerguide::ner
