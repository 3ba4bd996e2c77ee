#include "nerguide/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "nerguide/encoder.hpp"
#include "nerguide/common.hpp"
#include "nerguide/eval.hpp"
#include "nerguide/nn/adamw.hpp"
#include "nerguide/nn/mlm.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::cotrain {

namespace {

// Shuffle streams; stage I iterations and stage II passes run in dataset
// order so round-level identities stay replayable.
constexpr std::uint64_t kWarmShuffleStream = 0x7761726d;    // "warm"
constexpr std::uint64_t kStage3ShuffleStream = 0x73746733;  // "stg3"

void require_positive(double value, const char* field) {
  if (!(value > 0.0))
    throw ConfigError(std::string(field) + " must be positive");
}

void require_positive(int value, const char* field) {
  if (value < 1) throw ConfigError(std::string(field) + " must be at least 1");
}

void require_non_negative(int value, const char* field) {
  if (value < 0)
    throw ConfigError(std::string(field) + " must not be negative");
}

// KL(p || m) in base 2, skipping zero entries of p.
double kl_base2(const Eigen::VectorXd& p, const Eigen::VectorXd& m) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    total += p(i) * std::log2(p(i) / m(i));
  }
  return total;
}

double jsd_base2(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const Eigen::VectorXd m = 0.5 * (p + q);
  const double value = 0.5 * kl_base2(p, m) + 0.5 * kl_base2(q, m);
  return std::clamp(value, 0.0, 1.0);
}

void check_distribution(const Eigen::VectorXd& pred) {
  if (pred.size() < 2)
    throw DataError("a probability distribution needs at least two entries");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (pred(i) < -1e-9 || !std::isfinite(pred(i)))
      throw DataError("distribution entries must be non-negative");
    sum += pred(i);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("distribution entries must sum to 1");
}

std::vector<int> identity_order(std::size_t n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

// One pass over `examples` in the given order, batched; returns the mean
// batch loss.
double run_epoch(ner::NerModel& model,
                 const std::vector<ner::TrainExample>& examples,
                 const std::vector<int>& order, ner::LossKind kind,
                 nn::AdamW& optimizer, int batch_size) {
  double total = 0.0;
  int steps = 0;
  const std::size_t stride = static_cast<std::size_t>(batch_size);
  for (std::size_t pos = 0; pos < order.size(); pos += stride) {
    const std::size_t end = std::min(order.size(), pos + stride);
    std::vector<ner::TrainExample> batch;
    batch.reserve(end - pos);
    for (std::size_t j = pos; j < end; ++j)
      batch.push_back(examples[static_cast<std::size_t>(order[j])]);
    total += ner::train_step(model, batch, kind, optimizer);
    ++steps;
  }
  return steps > 0 ? total / steps : 0.0;
}

nn::AdamW::Options ner_options(const TrainConfig& config) {
  nn::AdamW::Options options;
  options.lr = config.ner_lr;
  options.weight_decay = config.weight_decay;
  return options;
}

std::string full_precision(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  require_positive(ner_lr, "ner_lr");
  require_positive(disc_pretrain_lr, "disc_pretrain_lr");
  require_positive(disc_cotrain_lr, "disc_cotrain_lr");
  require_positive(mlm_lr, "mlm_lr");
  if (weight_decay < 0.0)
    throw ConfigError("weight_decay must not be negative");
  require_positive(batch_size, "batch_size");
  require_positive(disc_batch_size, "disc_batch_size");
  require_positive(mlm_batch_size, "mlm_batch_size");
  require_non_negative(disc_pretrain_epochs, "disc_pretrain_epochs");
  require_non_negative(warm_epochs, "warm_epochs");
  require_positive(warm_patience, "warm_patience");
  require_non_negative(stage1_iterations, "stage1_iterations");
  require_non_negative(stage2_rounds, "stage2_rounds");
  require_non_negative(stage3_epochs, "stage3_epochs");
  require_non_negative(mlm_steps, "mlm_steps");
  require_positive(top_k, "top_k");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ConfigError("threshold must lie strictly inside (0, 1)");
  if (o_weight < 0.0 || o_weight > 1.0)
    throw ConfigError("o_weight must lie in [0, 1]");
  if (epsilon <= 0.0 || epsilon >= 0.5)
    throw ConfigError("epsilon must lie strictly inside (0, 0.5)");
  require_positive(demo_k, "demo_k");
}

nlohmann::json TrainConfig::to_json() const {
  auto encoder_json = [](const nn::EncoderConfig& e) {
    return nlohmann::json{{"vocab_size", e.vocab_size}, {"dim", e.dim},
                          {"layers", e.layers},         {"heads", e.heads},
                          {"ffn_mult", e.ffn_mult},     {"max_len", e.max_len}};
  };
  return nlohmann::json{
      {"ner_lr", ner_lr},
      {"batch_size", batch_size},
      {"weight_decay", weight_decay},
      {"disc_pretrain_lr", disc_pretrain_lr},
      {"disc_cotrain_lr", disc_cotrain_lr},
      {"disc_batch_size", disc_batch_size},
      {"disc_pretrain_epochs", disc_pretrain_epochs},
      {"warm_epochs", warm_epochs},
      {"warm_patience", warm_patience},
      {"stage1_iterations", stage1_iterations},
      {"stage2_rounds", stage2_rounds},
      {"stage3_epochs", stage3_epochs},
      {"mlm_steps", mlm_steps},
      {"mlm_batch_size", mlm_batch_size},
      {"mlm_lr", mlm_lr},
      {"top_k", top_k},
      {"threshold", threshold},
      {"o_weight", o_weight},
      {"epsilon", epsilon},
      {"demo_k", demo_k},
      {"use_demos", use_demos},
      {"ner_encoder", encoder_json(ner_encoder)},
      {"disc_encoder", encoder_json(disc_encoder)},
      {"seed", seed}};
}

Eigen::VectorXd smooth_one_hot(int index, int size, double epsilon) {
  if (size < 2) throw DataError("smooth_one_hot needs at least two classes");
  if (index < 0 || index >= size)
    throw DataError("smooth_one_hot index out of range");
  if (epsilon < 0.0 || epsilon >= 1.0)
    throw ConfigError("smoothing epsilon must lie in [0, 1)");
  Eigen::VectorXd out =
      Eigen::VectorXd::Constant(size, epsilon / static_cast<double>(size));
  out(index) += 1.0 - epsilon;
  return out;
}

double compute_q(const Eigen::VectorXd& pred, int observed, double epsilon) {
  check_distribution(pred);
  const Eigen::VectorXd target =
      smooth_one_hot(observed, static_cast<int>(pred.size()), epsilon);
  Eigen::VectorXd clipped = pred.cwiseMax(0.0);
  return std::clamp(1.0 - jsd_base2(clipped, target), 0.0, 1.0);
}

double compute_informativeness(double w) {
  if (!(w >= 0.0 && w <= 1.0))
    throw DataError("discriminator score must lie in [0, 1]");
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return std::clamp(term(w) + term(1.0 - w), 0.0, 1.0);
}

SelectionRecord score_entity(const corpus::Entity& entity,
                             const ner::NerOutput& outputs,
                             double span_weight, double category_weight,
                             const corpus::LabelSequence& observed,
                             const std::vector<std::string>& classes,
                             double epsilon) {
  const Eigen::Index n = outputs.entity_probs.size();
  if (outputs.class_dists.rows() != n ||
      static_cast<Eigen::Index>(observed.tags.size()) != n)
    throw DataError("model outputs and observed labels are misaligned");
  if (outputs.class_dists.cols() != static_cast<Eigen::Index>(classes.size()))
    throw DataError(
        "class distribution width does not match the class set");
  if (entity.start < 0 || entity.end > static_cast<int>(n) ||
      entity.start >= entity.end)
    throw DataError("entity span out of sentence bounds");

  const double h_e = compute_informativeness(span_weight);
  const double h_c = compute_informativeness(category_weight);

  SelectionRecord record;
  record.entity = entity;
  for (int i = entity.start; i < entity.end; ++i) {
    // Binary entity-vs-O distribution, entity mass first.
    Eigen::VectorXd span_dist(2);
    span_dist << outputs.entity_probs(i), 1.0 - outputs.entity_probs(i);
    const corpus::BioTag& tag = observed.tags[static_cast<std::size_t>(i)];
    const bool observed_entity = tag.is_entity();
    const double q_e =
        compute_q(span_dist, observed_entity ? 0 : 1, epsilon);

    double q_c = 0.0;
    if (observed_entity) {
      const std::string& cls = tag.cls;
      const auto it = std::find(classes.begin(), classes.end(), cls);
      if (it == classes.end())
        throw DataError("observed class '" + cls +
                        "' is not in the model's class set");
      const int cls_id = static_cast<int>(it - classes.begin());
      q_c = compute_q(outputs.class_dists.row(i).transpose(), cls_id,
                      epsilon);
    }
    // Observed-O tokens carry no observed category, so the category score
    // contributes nothing for them.
    record.q_span.push_back(q_e);
    record.q_category.push_back(q_c);
    record.h_span.push_back(h_e);
    record.h_category.push_back(h_c);
    record.s_span.push_back(h_e * q_e);
    record.s_category.push_back(observed_entity ? h_c * q_c : 0.0);
  }
  const double count = static_cast<double>(record.s_span.size());
  record.span_score =
      std::accumulate(record.s_span.begin(), record.s_span.end(), 0.0) /
      count;
  record.category_score = std::accumulate(record.s_category.begin(),
                                          record.s_category.end(), 0.0) /
                          count;
  return record;
}

std::vector<SelectionRecord> select_topk(
    const std::vector<SelectionRecord>& records, int k) {
  if (k < 1) throw ConfigError("top_k must be at least 1");
  std::map<std::string, std::vector<const SelectionRecord*>> by_class;
  for (const SelectionRecord& record : records)
    by_class[record.entity.cls].push_back(&record);

  std::vector<SelectionRecord> selected;
  for (auto& [cls, group] : by_class) {
    std::sort(group.begin(), group.end(),
              [](const SelectionRecord* a, const SelectionRecord* b) {
                if (a->combined() != b->combined())
                  return a->combined() > b->combined();
                if (a->entity.sentence_id != b->entity.sentence_id)
                  return a->entity.sentence_id < b->entity.sentence_id;
                return a->entity.start < b->entity.start;
              });
    const std::size_t keep =
        std::min(group.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < keep; ++i) selected.push_back(*group[i]);
  }
  return selected;
}

double DiscriminatorWeightSource::span_weight(
    const corpus::Sentence& sentence, const corpus::Entity& entity,
    const demos::Demonstration* demo) {
  return disc_->score_span(sentence, entity, demo);
}

double DiscriminatorWeightSource::category_weight(
    const corpus::Sentence& sentence, const corpus::Entity& entity,
    const demos::Demonstration* demo) {
  return disc_->score_category(sentence, entity, entity.cls, demo);
}

int PseudoLabels::total_entities() const {
  int total = 0;
  for (const auto& sentence_entities : entities)
    total += static_cast<int>(sentence_entities.size());
  return total;
}

PseudoLabels generate_pseudo_labels(ner::NerModel& model,
                                    const corpus::AnnotatedDataset& data,
                                    const demos::DemoProvider& provider) {
  const std::size_t n = data.sentences.size();
  PseudoLabels out;
  out.labels.reserve(n);
  out.outputs.reserve(n);
  out.entities.reserve(n);
  out.demos.resize(n);
  model.inference.validate();
  for (std::size_t i = 0; i < n; ++i) {
    const corpus::Sentence& sentence = data.sentences[i];
    auto demo = provider.demo_for(sentence);
    if (demo.has_value() && !demo->empty()) out.demos[i] = std::move(*demo);
    const demos::Demonstration* demo_ptr =
        out.demos[i] ? &*out.demos[i] : nullptr;
    ner::NerOutput outputs = model.forward(sentence, demo_ptr);
    corpus::LabelSequence labels =
        ner::decode_outputs(outputs, model.inference, model.classes());
    out.entities.push_back(corpus::extract_entities(sentence, labels));
    out.outputs.push_back(std::move(outputs));
    out.labels.push_back(std::move(labels));
  }
  return out;
}

double dataset_f1(ner::NerModel& model,
                  const corpus::AnnotatedDataset& data) {
  const corpus::AnnotatedDataset pred =
      model.predict_dataset(data.sentences, model.inference);
  return eval::evaluate(pred, data).micro.f1();
}

std::vector<double> warm_start(ner::NerModel& model,
                               const corpus::AnnotatedDataset& noisy,
                               const corpus::AnnotatedDataset& guidance,
                               const TrainConfig& config) {
  config.validate();
  std::vector<double> losses;
  if (config.warm_epochs == 0) return losses;

  std::vector<ner::TrainExample> examples;
  examples.reserve(noisy.sentences.size());
  for (std::size_t i = 0; i < noisy.sentences.size(); ++i)
    examples.push_back(ner::make_example(noisy.sentences[i], noisy.labels[i]));

  nn::AdamW optimizer(model.parameters(), ner_options(config));
  double best_f1 = -1.0;
  std::vector<Eigen::MatrixXd> best;
  int since_best = 0;
  for (int epoch = 0; epoch < config.warm_epochs; ++epoch) {
    std::vector<int> order = identity_order(examples.size());
    Rng rng = Rng::derive(config.seed, kWarmShuffleStream,
                          static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    losses.push_back(run_epoch(model, examples, order,
                               ner::LossKind::Supervised, optimizer,
                               config.batch_size));
    const double f1 = dataset_f1(model, guidance);
    if (f1 > best_f1) {
      best_f1 = f1;
      since_best = 0;
      best.clear();
      for (nn::Tensor* t : model.parameters()) best.push_back(t->value);
    } else if (++since_best >= config.warm_patience) {
      break;
    }
  }
  std::vector<nn::Tensor*> params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return losses;
}

std::vector<double> stage1(ner::NerModel& model,
                           const corpus::AnnotatedDataset& noisy,
                           const demos::DemoProvider& provider,
                           const TrainConfig& config,
                           const Stage1Observer& observer) {
  config.validate();
  std::vector<double> losses;
  if (config.stage1_iterations == 0) return losses;
  nn::AdamW optimizer(model.parameters(), ner_options(config));
  for (int iteration = 0; iteration < config.stage1_iterations; ++iteration) {
    const PseudoLabels pseudo = generate_pseudo_labels(model, noisy, provider);
    if (observer) observer(iteration, pseudo);
    std::vector<ner::TrainExample> examples;
    examples.reserve(noisy.sentences.size());
    for (std::size_t i = 0; i < noisy.sentences.size(); ++i) {
      ner::TrainExample example =
          ner::make_example(noisy.sentences[i], pseudo.labels[i]);
      example.demo = pseudo.demos[i] ? &*pseudo.demos[i] : nullptr;
      examples.push_back(example);
    }
    losses.push_back(run_epoch(model, examples,
                               identity_order(examples.size()),
                               ner::LossKind::SelfTraining, optimizer,
                               config.batch_size));
  }
  return losses;
}

int RoundStats::selected_total() const {
  int total = 0;
  for (const auto& [cls, count] : selected_per_class) total += count;
  return total;
}

std::vector<RoundStats> stage2(ner::NerModel& model,
                               disc::Discriminator& discriminator,
                               const corpus::AnnotatedDataset& noisy,
                               const corpus::AnnotatedDataset& guidance,
                               const demos::DemoProvider& provider,
                               const TrainConfig& config,
                               WeightSource* weight_override) {
  config.validate();
  DiscriminatorWeightSource default_source(discriminator);
  WeightSource* source =
      weight_override != nullptr ? weight_override : &default_source;

  std::vector<RoundStats> rounds;
  nn::AdamW optimizer(model.parameters(), ner_options(config));
  for (int round = 0; round < config.stage2_rounds; ++round) {
    RoundStats stats;
    stats.round = round;

    const PseudoLabels pseudo = generate_pseudo_labels(model, noisy, provider);
    stats.pseudo_entities = pseudo.total_entities();

    // Score every pseudo entity, broadcast the weights to its tokens, and
    // collect the selection evidence from the same forward pass.
    std::vector<ner::TrainExample> examples;
    examples.reserve(noisy.sentences.size());
    std::vector<SelectionRecord> records;
    double span_sum = 0.0, category_sum = 0.0;
    for (std::size_t i = 0; i < noisy.sentences.size(); ++i) {
      const corpus::Sentence& sentence = noisy.sentences[i];
      const demos::Demonstration* demo_ptr =
          pseudo.demos[i] ? &*pseudo.demos[i] : nullptr;
      const std::vector<corpus::Entity>& entities = pseudo.entities[i];
      std::vector<double> span_scores(entities.size());
      std::vector<double> category_scores(entities.size());
      for (std::size_t j = 0; j < entities.size(); ++j) {
        span_scores[j] = source->span_weight(sentence, entities[j], demo_ptr);
        category_scores[j] =
            source->category_weight(sentence, entities[j], demo_ptr);
        span_sum += span_scores[j];
        category_sum += category_scores[j];
        records.push_back(score_entity(entities[j], pseudo.outputs[i],
                                       span_scores[j], category_scores[j],
                                       noisy.labels[i], model.classes(),
                                       config.epsilon));
      }
      ner::TrainExample example =
          ner::make_example(sentence, pseudo.labels[i]);
      example.weights = ner::weights_from_entities(
          sentence.tokens.size(), entities, span_scores, category_scores,
          config.o_weight);
      example.demo = demo_ptr;
      examples.push_back(example);
    }
    if (stats.pseudo_entities > 0) {
      stats.mean_span_weight = span_sum / stats.pseudo_entities;
      stats.mean_category_weight = category_sum / stats.pseudo_entities;
    }

    stats.ner_loss =
        run_epoch(model, examples, identity_order(examples.size()),
                  ner::LossKind::Drl, optimizer, config.batch_size);

    // Selection feeds the discriminator's fine-tuning pass; negatives are
    // simulated against the pseudo labels.
    const std::vector<SelectionRecord> selected =
        select_topk(records, config.top_k);
    std::vector<corpus::Entity> positives;
    positives.reserve(selected.size());
    for (const SelectionRecord& record : selected) {
      ++stats.selected_per_class[record.entity.cls];
      positives.push_back(record.entity);
    }
    corpus::AnnotatedDataset pseudo_context;
    pseudo_context.flavor = corpus::DatasetFlavor::Noisy;
    pseudo_context.class_set = model.classes();
    pseudo_context.sentences = noisy.sentences;
    pseudo_context.labels = pseudo.labels;

    disc::DiscTrainConfig finetune_config;
    finetune_config.batch_size = config.disc_batch_size;
    finetune_config.lr = config.disc_cotrain_lr;
    finetune_config.weight_decay = config.weight_decay;
    finetune_config.seed =
        config.seed + 7919 * static_cast<std::uint64_t>(round + 1);
    demos::DemoProvider disc_provider = provider;
    const disc::DiscTrainReport finetune_report = disc::finetune(
        discriminator, pseudo_context, positives, finetune_config,
        disc_provider);
    stats.disc_skipped = finetune_report.skipped;
    if (!finetune_report.epoch_losses.empty())
      stats.disc_loss = finetune_report.epoch_losses.front();

    stats.guidance_f1 = dataset_f1(model, guidance);
    rounds.push_back(std::move(stats));
  }
  return rounds;
}

std::vector<double> stage3(ner::NerModel& model,
                           const corpus::AnnotatedDataset& guidance,
                           const TrainConfig& config) {
  config.validate();
  std::vector<double> losses;
  if (config.stage3_epochs == 0) return losses;
  std::vector<ner::TrainExample> examples;
  examples.reserve(guidance.sentences.size());
  for (std::size_t i = 0; i < guidance.sentences.size(); ++i)
    examples.push_back(
        ner::make_example(guidance.sentences[i], guidance.labels[i]));
  nn::AdamW optimizer(model.parameters(), ner_options(config));
  for (int epoch = 0; epoch < config.stage3_epochs; ++epoch) {
    std::vector<int> order = identity_order(examples.size());
    Rng rng = Rng::derive(config.seed, kStage3ShuffleStream,
                          static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    losses.push_back(run_epoch(model, examples, order,
                               ner::LossKind::Supervised, optimizer,
                               config.batch_size));
  }
  return losses;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["hyperparameters"] = hyperparameters;
  j["warmup"] = warmup;
  j["stages"] = nlohmann::json::array();
  for (const StageRecord& stage : stages)
    j["stages"].push_back({{"name", stage.name},
                           {"losses", stage.losses},
                           {"guidance_f1", stage.guidance_f1}});
  j["rounds"] = nlohmann::json::array();
  for (const RoundStats& round : rounds) {
    nlohmann::json r{{"round", round.round},
                     {"pseudo_entities", round.pseudo_entities},
                     {"mean_span_weight", round.mean_span_weight},
                     {"mean_category_weight", round.mean_category_weight},
                     {"selected_per_class", round.selected_per_class},
                     {"selected_total", round.selected_total()},
                     {"ner_loss", round.ner_loss},
                     {"disc_loss", round.disc_loss},
                     {"disc_skipped", round.disc_skipped},
                     {"guidance_f1", round.guidance_f1}};
    j["rounds"].push_back(std::move(r));
  }
  return j;
}

std::string RunReport::rounds_csv() const {
  std::ostringstream out;
  out << "round,pseudo_entities,mean_span_weight,mean_category_weight,"
         "selected,selected_total,ner_loss,disc_loss,disc_skipped,"
         "guidance_f1\n";
  for (const RoundStats& round : rounds) {
    std::string selected;
    for (const auto& [cls, count] : round.selected_per_class) {
      if (!selected.empty()) selected += '|';
      selected += cls + '=' + std::to_string(count);
    }
    out << round.round << ',' << round.pseudo_entities << ','
        << full_precision(round.mean_span_weight) << ','
        << full_precision(round.mean_category_weight) << ',' << selected
        << ',' << round.selected_total() << ','
        << full_precision(round.ner_loss) << ','
        << full_precision(round.disc_loss) << ','
        << (round.disc_skipped ? 1 : 0) << ','
        << full_precision(round.guidance_f1) << '\n';
  }
  return out.str();
}

void RunReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "run_report.json");
    if (!out) throw DataError("cannot write run_report.json");
    out << to_json().dump(2) << '\n';
  }
  std::ofstream out(dir / "rounds.csv");
  if (!out) throw DataError("cannot write rounds.csv");
  out << rounds_csv();
}

PipelineResult run_pipeline(const corpus::AnnotatedDataset& noisy,
                            const corpus::AnnotatedDataset& guidance,
                            const TrainConfig& config,
                            const std::filesystem::path& out_dir,
                            const corpus::Verbalizer& verbalizer) {
  config.validate();
  noisy.validate();
  guidance.validate();
  if (guidance.sentences.empty())
    throw DataError("the guidance set is empty");

  std::vector<std::string> classes = noisy.class_set;
  for (const std::string& cls : guidance.class_set)
    if (std::find(classes.begin(), classes.end(), cls) == classes.end())
      classes.push_back(cls);
  std::sort(classes.begin(), classes.end());
  if (classes.size() < 2)
    throw DataError("the pipeline needs at least two entity classes");

  // Closed vocabulary over both corpora plus the scaffolding words every
  // prompt and demonstration can introduce.
  std::set<std::string> words;
  for (const corpus::AnnotatedDataset* dataset : {&noisy, &guidance})
    for (const corpus::Sentence& sentence : dataset->sentences)
      for (const std::string& token : sentence.tokens) words.insert(token);
  for (const std::string& token : encoder_support_tokens(verbalizer))
    words.insert(token);
  nn::Vocab vocab(std::vector<std::string>(words.begin(), words.end()));

  TrainConfig effective = config;
  effective.ner_encoder.vocab_size = static_cast<int>(vocab.size());
  effective.disc_encoder.vocab_size = static_cast<int>(vocab.size());

  const bool persist = !out_dir.empty();
  if (persist) std::filesystem::create_directories(out_dir);

  RunReport report;
  report.hyperparameters = effective.to_json();

  auto encoder = std::make_shared<TransformerTokenEncoder>(
      vocab, effective.ner_encoder, config.seed);
  ner::NerModel model(encoder, classes, config.seed + 1);
  model.inference.threshold = config.threshold;
  disc::Discriminator discriminator(vocab, effective.disc_encoder,
                                    config.seed + 2, verbalizer);

  if (config.mlm_steps > 0) {
    std::vector<std::vector<int>> id_sentences;
    std::vector<std::vector<std::string>> word_sentences;
    for (const corpus::AnnotatedDataset* dataset : {&noisy, &guidance})
      for (const corpus::Sentence& sentence : dataset->sentences) {
        id_sentences.push_back(vocab.encode(sentence.tokens));
        word_sentences.push_back(sentence.tokens);
      }
    nn::MlmConfig mlm;
    mlm.steps = config.mlm_steps;
    mlm.batch_size = config.mlm_batch_size;
    mlm.lr = config.mlm_lr;
    mlm.seed = config.seed + 3;
    nn::MlmHead scratch_head(effective.ner_encoder.dim,
                             static_cast<int>(vocab.size()));
    scratch_head.init(config.seed + 4);
    const nn::MlmReport ner_mlm =
        nn::mlm_pretrain(encoder->model(), scratch_head, vocab, id_sentences,
                         mlm);
    nn::MlmConfig disc_mlm_config = mlm;
    disc_mlm_config.seed = config.seed + 5;
    const nn::MlmReport disc_mlm =
        discriminator.mlm_warmup(word_sentences, disc_mlm_config);
    report.warmup = {{"ner_mlm_loss", ner_mlm.final_loss()},
                     {"disc_mlm_loss", disc_mlm.final_loss()}};
  }

  demos::HashedBowEmbedder embedder;
  std::optional<demos::GuidanceIndex> index;
  if (config.use_demos) {
    if (persist)
      index.emplace(guidance, embedder, out_dir / "demo_cache.bin");
    else
      index.emplace(guidance, embedder);
  }
  demos::DemoProvider provider;
  provider.index = index ? &*index : nullptr;
  provider.k = config.demo_k;
  provider.verbalizer = verbalizer;

  try {
    StageRecord warm{"warm-start",
                     warm_start(model, noisy, guidance, effective), 0.0};
    warm.guidance_f1 = dataset_f1(model, guidance);
    report.stages.push_back(std::move(warm));
    if (persist) model.save(out_dir / "model_warm.ckpt");

    disc::DiscTrainConfig pretrain_config;
    pretrain_config.epochs = config.disc_pretrain_epochs;
    pretrain_config.batch_size = config.disc_batch_size;
    pretrain_config.lr = config.disc_pretrain_lr;
    pretrain_config.weight_decay = config.weight_decay;
    pretrain_config.seed = config.seed + 6;
    const disc::DiscTrainReport pretrain_report =
        disc::pretrain(discriminator, guidance, pretrain_config, provider);
    report.stages.push_back({"pretrain-disc", pretrain_report.epoch_losses,
                             dataset_f1(model, guidance)});
    if (persist) discriminator.save(out_dir / "disc_pretrained.ckpt");

    report.stages.push_back({"stage1",
                             stage1(model, noisy, provider, effective),
                             dataset_f1(model, guidance)});
    if (persist) model.save(out_dir / "model_stage1.ckpt");

    report.rounds =
        stage2(model, discriminator, noisy, guidance, provider, effective);
    std::vector<double> round_losses;
    for (const RoundStats& round : report.rounds)
      round_losses.push_back(round.ner_loss);
    report.stages.push_back(
        {"stage2", round_losses, dataset_f1(model, guidance)});
    if (persist) {
      model.save(out_dir / "model_stage2.ckpt");
      discriminator.save(out_dir / "disc_stage2.ckpt");
    }

    report.stages.push_back({"stage3", stage3(model, guidance, effective),
                             dataset_f1(model, guidance)});
    if (persist) model.save(out_dir / "model_final.ckpt");
  } catch (...) {
    if (persist) report.write(out_dir);
    throw;
  }
  if (persist) report.write(out_dir);
  return PipelineResult{std::move(model), std::move(discriminator),
                        std::move(report)};
}

}  // namespace nerguide::cotrain
