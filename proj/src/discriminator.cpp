#include "nerguide/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include "nerguide/common.hpp"
#include "nerguide/nn/adamw.hpp"
#include "nerguide/nn/checkpoint.hpp"
#include "nerguide/noise_lab.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::disc {
namespace {

constexpr double kClamp = 1e-7;
constexpr std::uint64_t kSpanNegStream = 0x6e6567;    // "neg"
constexpr std::uint64_t kClassNegStream = 0x666c70;   // "flp"
constexpr std::uint64_t kShuffleStream = 0x64697363;  // "disc"

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Maps sentence ids to dataset indices; entities reference sentences by id.
std::map<int, int> sentence_index_map(const corpus::AnnotatedDataset& data) {
  std::map<int, int> map;
  for (std::size_t i = 0; i < data.sentences.size(); ++i) {
    map[data.sentences[i].id] = static_cast<int>(i);
  }
  return map;
}

int context_index(const std::map<int, int>& map, const corpus::Entity& entity) {
  const auto it = map.find(entity.sentence_id);
  if (it == map.end()) {
    throw DataError("entity references sentence id " +
                    std::to_string(entity.sentence_id) +
                    " missing from the context dataset");
  }
  return it->second;
}

void check_entity_bounds(const corpus::Sentence& sentence,
                         const corpus::Entity& entity) {
  if (entity.start < 0 || entity.end > static_cast<int>(sentence.size()) ||
      entity.start >= entity.end) {
    throw DataError("entity span [" + std::to_string(entity.start) + ", " +
                    std::to_string(entity.end) +
                    ") out of bounds in sentence " +
                    std::to_string(sentence.id));
  }
}

// One paired training unit: a positive and the negatives simulated from it.
struct PairedSample {
  int positive_index = 0;
  const NegativeSample* span_negative = nullptr;   // may be absent
  const NegativeSample* class_negative = nullptr;  // may be absent
};

std::vector<PairedSample> pair_up(const std::vector<corpus::Entity>& positives,
                                  const NegativeSampleSet& negatives) {
  std::vector<PairedSample> pairs(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    pairs[i].positive_index = static_cast<int>(i);
  }
  for (const NegativeSample& sample : negatives.samples) {
    if (sample.source_index < 0 ||
        sample.source_index >= static_cast<int>(pairs.size())) {
      throw DataError("negative sample references an unknown positive");
    }
    auto& pair = pairs[static_cast<std::size_t>(sample.source_index)];
    if (sample.kind == NegativeKind::SpanPerturbed) {
      pair.span_negative = &sample;
    } else {
      pair.class_negative = &sample;
    }
  }
  return pairs;
}

// The four mean terms of the discrimination loss over one batch of paired
// samples. Gradients accumulate into the model when with_grads is set; the
// caller decides when to take an optimizer step.
double batch_loss(Discriminator& disc, const corpus::AnnotatedDataset& context,
                  const std::map<int, int>& index_map,
                  const std::vector<corpus::Entity>& positives,
                  const std::vector<const PairedSample*>& batch,
                  const demos::DemoProvider& demos, bool with_grads) {
  int span_negs = 0, class_negs = 0;
  for (const PairedSample* pair : batch) {
    if (pair->span_negative != nullptr) ++span_negs;
    if (pair->class_negative != nullptr) ++class_negs;
  }
  const double inv_pos = 1.0 / static_cast<double>(batch.size());
  const double inv_span = span_negs > 0 ? 1.0 / span_negs : 0.0;
  const double inv_class = class_negs > 0 ? 1.0 / class_negs : 0.0;
  const auto scale = [with_grads](double inv) {
    return with_grads ? inv : 0.0;
  };

  double total = 0.0;
  for (const PairedSample* pair : batch) {
    const corpus::Entity& positive =
        positives[static_cast<std::size_t>(pair->positive_index)];
    const corpus::Sentence& sentence =
        context.sentences[static_cast<std::size_t>(
            context_index(index_map, positive))];
    const auto demo = demos.demo_for(sentence);
    const demos::Demonstration* demo_ptr =
        demo.has_value() && !demo->empty() ? &*demo : nullptr;

    total += inv_pos * disc.prompt_loss(PromptKind::Span, sentence, positive,
                                        nullptr, true, demo_ptr,
                                        scale(inv_pos));
    total += inv_pos * disc.prompt_loss(PromptKind::Category, sentence,
                                        positive, &positive.cls, true,
                                        demo_ptr, scale(inv_pos));
    if (pair->span_negative != nullptr) {
      total += inv_span * disc.prompt_loss(PromptKind::Span, sentence,
                                           pair->span_negative->entity,
                                           nullptr, false, demo_ptr,
                                           scale(inv_span));
    }
    if (pair->class_negative != nullptr) {
      const NegativeSample& negative = *pair->class_negative;
      total += inv_class * disc.prompt_loss(PromptKind::Category, sentence,
                                            negative.entity,
                                            &negative.flipped_class, false,
                                            demo_ptr, scale(inv_class));
    }
  }
  return total;
}

DiscTrainReport run_training(Discriminator& disc,
                             const corpus::AnnotatedDataset& context,
                             const std::vector<corpus::Entity>& positives,
                             const DiscTrainConfig& config,
                             const demos::DemoProvider& demos) {
  config.validate();
  const NegativeSampleSet negatives =
      make_negatives(context, positives, config.seed);
  const std::vector<PairedSample> pairs = pair_up(positives, negatives);
  const auto index_map = sentence_index_map(context);

  DiscTrainReport report;
  report.negatives_skipped = negatives.span_moves_skipped;

  nn::AdamW::Options options;
  options.lr = config.lr;
  options.weight_decay = config.weight_decay;
  nn::AdamW optimizer(disc.parameters(), options);
  nn::zero_all_grads(disc.parameters());

  Rng shuffle_rng = Rng::derive(config.seed, kShuffleStream);
  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;
    int steps = 0;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const PairedSample*> batch;
      for (std::size_t j = at;
           j < std::min(order.size(),
                        at + static_cast<std::size_t>(config.batch_size));
           ++j) {
        batch.push_back(&pairs[static_cast<std::size_t>(order[j])]);
      }
      const double loss = batch_loss(disc, context, index_map, positives,
                                     batch, demos, /*with_grads=*/true);
      if (!std::isfinite(loss)) {
        throw TrainError("discriminator loss became non-finite at step " +
                         std::to_string(report.step_losses.size()));
      }
      optimizer.step();
      report.step_losses.push_back(loss);
      epoch_sum += loss;
      ++steps;
    }
    report.epoch_losses.push_back(steps > 0 ? epoch_sum / steps : 0.0);
  }
  return report;
}

}  // namespace

Prompt build_prompt(PromptKind kind, const corpus::Sentence& sentence,
                    const corpus::Entity& entity, const std::string* cls,
                    const corpus::Verbalizer& verbalizer) {
  check_entity_bounds(sentence, entity);
  if (kind == PromptKind::Category && cls == nullptr) {
    throw DataError("category prompt requires a class");
  }
  for (const std::string& token : sentence.tokens) {
    if (token == nn::Vocab::kMask) {
      throw DataError("sentence " + std::to_string(sentence.id) +
                      " already contains the mask token");
    }
  }
  Prompt prompt;
  prompt.tokens = sentence.tokens;
  prompt.tokens.push_back(".");
  for (int t = entity.start; t < entity.end; ++t) {
    prompt.tokens.push_back(sentence.tokens[static_cast<std::size_t>(t)]);
  }
  prompt.tokens.push_back("is");
  prompt.tokens.push_back("a");
  prompt.mask_index = prompt.tokens.size();
  prompt.tokens.push_back(nn::Vocab::kMask);
  if (kind == PromptKind::Category) {
    for (const std::string& w : verbalizer.verbalize_tokens(*cls)) {
      prompt.tokens.push_back(w);
    }
  }
  prompt.tokens.push_back("entity");
  prompt.tokens.push_back(".");
  return prompt;
}

std::vector<const NegativeSample*> NegativeSampleSet::of_kind(
    NegativeKind kind) const {
  std::vector<const NegativeSample*> out;
  for (const NegativeSample& sample : samples) {
    if (sample.kind == kind) out.push_back(&sample);
  }
  return out;
}

NegativeSampleSet make_negatives(const corpus::AnnotatedDataset& context,
                                 const std::vector<corpus::Entity>& positives,
                                 std::uint64_t seed) {
  if (context.class_set.size() < 2) {
    throw DataError("negative simulation needs at least 2 classes");
  }
  const auto index_map = sentence_index_map(context);
  NegativeSampleSet set;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const corpus::Entity& positive = positives[i];
    const int ctx = context_index(index_map, positive);
    const corpus::Sentence& sentence =
        context.sentences[static_cast<std::size_t>(ctx)];
    check_entity_bounds(sentence, positive);
    const corpus::LabelSequence& labels =
        context.labels[static_cast<std::size_t>(ctx)];

    // Span negative: one boundary token added or removed, uniform over the
    // feasible moves given the surrounding labels.
    const auto moves = noise::feasible_span_moves(labels, positive);
    if (moves.empty()) {
      ++set.span_moves_skipped;
    } else {
      Rng rng = Rng::derive(seed, kSpanNegStream, i);
      const noise::NoiseAction move = rng.pick(moves);
      corpus::LabelSequence scratch = labels;
      const auto [start, end] = noise::apply_span_move(scratch, positive, move);
      NegativeSample sample;
      sample.kind = NegativeKind::SpanPerturbed;
      sample.entity = positive;
      sample.entity.start = start;
      sample.entity.end = end;
      sample.entity.surface = corpus::join_tokens(sentence.tokens, start, end);
      sample.source_index = static_cast<int>(i);
      set.samples.push_back(std::move(sample));
    }

    // Category negative: uniform flip to a different class.
    std::vector<std::string> others;
    for (const std::string& c : context.class_set) {
      if (c != positive.cls) others.push_back(c);
    }
    Rng rng = Rng::derive(seed, kClassNegStream, i);
    NegativeSample flip;
    flip.kind = NegativeKind::ClassFlipped;
    flip.entity = positive;
    flip.flipped_class = rng.pick(others);
    flip.source_index = static_cast<int>(i);
    set.samples.push_back(std::move(flip));
  }
  return set;
}

void DiscTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("discriminator epochs must be >= 0");
  if (batch_size <= 0) {
    throw ConfigError("discriminator batch_size must be positive");
  }
  if (lr <= 0.0) throw ConfigError("discriminator lr must be positive");
  if (weight_decay < 0.0) {
    throw ConfigError("discriminator weight_decay must be non-negative");
  }
}

Discriminator::Discriminator(nn::Vocab vocab, const nn::EncoderConfig& config,
                             std::uint64_t seed, corpus::Verbalizer verbalizer)
    : vocab_(std::move(vocab)), verbalizer_(std::move(verbalizer)) {
  nn::EncoderConfig effective = config;
  effective.vocab_size = vocab_.size();
  effective.validate();
  encoder_ = nn::TransformerEncoderModel(effective);
  encoder_.init(seed);
  head_ = nn::MlmHead(effective.dim, effective.vocab_size);
  head_.init(seed + 1);
  correct_id_ = vocab_.id("correct");
  wrong_id_ = vocab_.id("wrong");
  if (correct_id_ == vocab_.unk_id() || wrong_id_ == vocab_.unk_id()) {
    throw ConfigError(
        "discriminator vocabulary must contain the answer words "
        "'correct' and 'wrong'");
  }
}

double Discriminator::forward_w(const Prompt& prompt,
                                const demos::Demonstration* demo,
                                Eigen::Index* rows, Eigen::Index* cols) {
  if (prompt.mask_index >= prompt.tokens.size() ||
      prompt.tokens[prompt.mask_index] != nn::Vocab::kMask) {
    throw DataError("prompt mask index does not point at the mask token");
  }
  std::vector<std::string> tokens = prompt.tokens;
  if (demo != nullptr && !demo->empty()) {
    const int budget = max_input_len() - static_cast<int>(tokens.size());
    const auto extra =
        demo->tokens_limited(budget > 0 ? static_cast<std::size_t>(budget) : 0);
    tokens.insert(tokens.end(), extra.begin(), extra.end());
  }
  if (static_cast<int>(tokens.size()) > max_input_len()) {
    throw DataError("prompt of " + std::to_string(tokens.size()) +
                    " tokens exceeds the discriminator maximum of " +
                    std::to_string(max_input_len()));
  }
  const std::vector<int> ids = vocab_.encode(tokens);
  const Eigen::MatrixXd repr = encoder_.forward(ids);
  const Eigen::MatrixXd logits = head_.forward(repr);
  *rows = logits.rows();
  *cols = logits.cols();
  const auto mask = static_cast<Eigen::Index>(prompt.mask_index);
  return sigmoid(logits(mask, correct_id_) - logits(mask, wrong_id_));
}

double Discriminator::prompt_objective(const Prompt& prompt,
                                       const demos::Demonstration* demo,
                                       bool positive, double grad_scale,
                                       bool with_grads) {
  Eigen::Index rows = 0, cols = 0;
  const double w = forward_w(prompt, demo, &rows, &cols);
  const double clamped = std::clamp(w, kClamp, 1.0 - kClamp);
  const double loss = positive ? -std::log(clamped) : -std::log(1.0 - clamped);

  if (with_grads) {
    // d loss / d (logit_correct - logit_wrong) for the unclamped objective.
    const double d_delta = grad_scale * (positive ? -(1.0 - w) : w);
    Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(rows, cols);
    const auto mask = static_cast<Eigen::Index>(prompt.mask_index);
    d_logits(mask, correct_id_) = d_delta;
    d_logits(mask, wrong_id_) = -d_delta;
    encoder_.backward(head_.backward(d_logits));
  }
  return loss;
}

double Discriminator::prompt_loss(PromptKind kind,
                                  const corpus::Sentence& sentence,
                                  const corpus::Entity& entity,
                                  const std::string* cls, bool positive,
                                  const demos::Demonstration* demo,
                                  double grad_scale) {
  const Prompt prompt = build_prompt(kind, sentence, entity, cls, verbalizer_);
  return prompt_objective(prompt, demo, positive, grad_scale,
                          grad_scale != 0.0);
}

double Discriminator::score_span(const corpus::Sentence& sentence,
                                 const corpus::Entity& entity,
                                 const demos::Demonstration* demo) {
  const Prompt prompt =
      build_prompt(PromptKind::Span, sentence, entity, nullptr, verbalizer_);
  Eigen::Index rows = 0, cols = 0;
  return forward_w(prompt, demo, &rows, &cols);
}

double Discriminator::score_category(const corpus::Sentence& sentence,
                                     const corpus::Entity& entity,
                                     const std::string& cls,
                                     const demos::Demonstration* demo) {
  const Prompt prompt =
      build_prompt(PromptKind::Category, sentence, entity, &cls, verbalizer_);
  Eigen::Index rows = 0, cols = 0;
  return forward_w(prompt, demo, &rows, &cols);
}

nn::MlmReport Discriminator::mlm_warmup(
    const std::vector<std::vector<std::string>>& sentences,
    const nn::MlmConfig& config) {
  std::vector<std::vector<int>> encoded;
  encoded.reserve(sentences.size());
  for (const auto& tokens : sentences) encoded.push_back(vocab_.encode(tokens));
  return nn::mlm_pretrain(encoder_, head_, vocab_, encoded, config);
}

std::vector<nn::Tensor*> Discriminator::parameters() {
  std::vector<nn::Tensor*> params = encoder_.parameters();
  for (nn::Tensor* t : head_.parameters()) params.push_back(t);
  return params;
}

long Discriminator::parameter_total() {
  return nn::parameter_count(parameters());
}

void Discriminator::save(const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["model"] = "discriminator";
  const nn::EncoderConfig& c = encoder_.config();
  meta["dim"] = c.dim;
  meta["layers"] = c.layers;
  meta["heads"] = c.heads;
  meta["ffn_mult"] = c.ffn_mult;
  meta["max_len"] = c.max_len;
  const std::vector<std::string> words(vocab_.tokens().begin() + 3,
                                       vocab_.tokens().end());
  meta["vocab"] = words;
  meta["verbalizer"] = verbalizer_.table();
  nn::save_checkpoint(path, meta, parameters());
}

Discriminator Discriminator::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::peek_checkpoint(path);
  if (meta.value("model", "") != "discriminator") {
    throw DataError("checkpoint " + path.string() + " is not a discriminator");
  }
  try {
    nn::EncoderConfig config;
    config.dim = meta.at("dim").get<int>();
    config.layers = meta.at("layers").get<int>();
    config.heads = meta.at("heads").get<int>();
    config.ffn_mult = meta.at("ffn_mult").get<int>();
    config.max_len = meta.at("max_len").get<int>();
    const auto words = meta.at("vocab").get<std::vector<std::string>>();
    corpus::Verbalizer verbalizer;
    for (const auto& [cls, word] :
         meta.at("verbalizer").get<std::map<std::string, std::string>>()) {
      verbalizer.set(cls, word);
    }
    Discriminator disc(nn::Vocab(words), config, /*seed=*/0,
                       std::move(verbalizer));
    nn::load_checkpoint(path, disc.parameters());
    return disc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("discriminator metadata is incomplete: ") +
                    e.what());
  }
}

double pretrain_loss(Discriminator& disc,
                     const corpus::AnnotatedDataset& context,
                     const std::vector<corpus::Entity>& positives,
                     const NegativeSampleSet& negatives,
                     const demos::DemoProvider& demos) {
  if (positives.empty() || negatives.samples.empty()) {
    throw DataError("discrimination loss needs positives and negatives");
  }
  const std::vector<PairedSample> pairs = pair_up(positives, negatives);
  std::vector<const PairedSample*> all;
  all.reserve(pairs.size());
  for (const PairedSample& pair : pairs) all.push_back(&pair);
  const auto index_map = sentence_index_map(context);
  return batch_loss(disc, context, index_map, positives, all, demos,
                    /*with_grads=*/false);
}

DiscTrainReport pretrain(Discriminator& disc,
                         const corpus::AnnotatedDataset& guidance,
                         const DiscTrainConfig& config,
                         const demos::DemoProvider& demos) {
  const std::vector<corpus::Entity> positives = guidance.all_entities();
  if (positives.empty()) {
    throw DataError("discriminator pretraining needs guidance entities");
  }
  return run_training(disc, guidance, positives, config, demos);
}

DiscTrainReport finetune(Discriminator& disc,
                         const corpus::AnnotatedDataset& pseudo_context,
                         const std::vector<corpus::Entity>& pseudo_positives,
                         const DiscTrainConfig& config,
                         const demos::DemoProvider& demos) {
  if (pseudo_positives.empty()) {
    std::cerr << "warning: no pseudo positives selected; "
                 "discriminator fine-tuning skipped\n";
    DiscTrainReport report;
    report.skipped = true;
    return report;
  }
  DiscTrainConfig one_pass = config;
  one_pass.epochs = 1;
  return run_training(disc, pseudo_context, pseudo_positives, one_pass, demos);
}

double rank_auc(const std::vector<double>& positive_scores,
                const std::vector<double>& negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw DataError("AUC needs both positive and negative scores");
  }
  double wins = 0.0;
  for (const double p : positive_scores) {
    for (const double n : negative_scores) {
      if (p > n) {
        wins += 1.0;
      } else if (p == n) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(positive_scores.size()) *
                 static_cast<double>(negative_scores.size()));
}

}  // namespace nerguide::disc
