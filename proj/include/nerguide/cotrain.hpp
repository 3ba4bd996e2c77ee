#ifndef NERGUIDE_COTRAIN_HPP_
#define NERGUIDE_COTRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nerguide/corpus.hpp"
#include "nerguide/demonstrations.hpp"
#include "nerguide/discriminator.hpp"
#include "nerguide/ner.hpp"
#include "nerguide/nn/transformer.hpp"

namespace nerguide::cotrain {

// Every knob of the training pipeline. Defaults follow the reference
// protocol; toy-scale runs typically override the learning rates upward
// (the in-repo encoder trains from scratch) and shrink the schedule.
struct TrainConfig {
  // Tagger optimization.
  double ner_lr = 5e-6;
  int batch_size = 64;
  double weight_decay = 0.01;

  // Discriminator optimization.
  double disc_pretrain_lr = 2e-5;
  double disc_cotrain_lr = 5e-6;
  int disc_batch_size = 16;
  int disc_pretrain_epochs = 3;

  // Schedule: warm start with early stopping, then the three stages.
  int warm_epochs = 3;
  int warm_patience = 1;  // non-improving epochs tolerated before stopping
  int stage1_iterations = 2;
  int stage2_rounds = 3;
  int stage3_epochs = 2;

  // Masked-language-model warmup applied to both encoders before training.
  int mlm_steps = 300;
  int mlm_batch_size = 8;
  double mlm_lr = 2e-3;

  // Selection and reweighting.
  int top_k = 20;        // pseudo positives kept per predicted class
  double threshold = 0.5;  // entity-vs-O decision threshold
  double o_weight = 0.5;   // weight of observed-O tokens in stage II
  double epsilon = 0.1;    // label smoothing inside the agreement score

  // Demonstrations.
  int demo_k = 1;          // guidance sentences retrieved per query
  bool use_demos = true;

  // Encoder shapes; vocab_size is filled in from the corpus at build time.
  nn::EncoderConfig ner_encoder;
  nn::EncoderConfig disc_encoder;

  std::uint64_t seed = 1;

  // Throws ConfigError when any rate is non-positive, a count that must be
  // positive is not, top_k < 1, threshold outside (0,1), o_weight outside
  // [0,1], or epsilon outside (0, 0.5).
  void validate() const;

  // Every effective value, for the run report ("no silent defaults").
  nlohmann::json to_json() const;
};

// Smoothed hard label: (1 - epsilon) * one_hot(index) + epsilon / size.
Eigen::VectorXd smooth_one_hot(int index, int size, double epsilon);

// Agreement between a predicted distribution and an observed hard label:
// q = 1 - JSD(pred || smooth_one_hot(observed, epsilon)) with base-2
// logarithms, so q lies in [0,1]. Throws DataError when pred is not a
// probability vector or observed is out of range.
double compute_q(const Eigen::VectorXd& pred, int observed, double epsilon);

// Informativeness of a discriminator score: binary entropy of w in base 2
// (1 at w = 0.5, 0 at the endpoints). Throws DataError when w is outside
// [0,1].
double compute_informativeness(double w);

// Per-entity selection evidence. Token vectors run over the L entity
// tokens; entity scores are their means. Tokens whose observed label is O
// have no observed category to agree with, so their category score is 0.
struct SelectionRecord {
  corpus::Entity entity;  // predicted span and class
  std::vector<double> q_span, q_category;  // agreement per token
  std::vector<double> h_span, h_category;  // informativeness per token
  std::vector<double> s_span, s_category;  // s = h * q per token
  double span_score = 0.0;      // mean of s_span
  double category_score = 0.0;  // mean of s_category

  // Single ranking key merging the two entity scores.
  double combined() const { return 0.5 * (span_score + category_score); }
};

// Scores one pseudo entity against the model outputs for its sentence and
// the observed (noisy) labels. span_weight / category_weight are the
// discriminator scores for the entity, broadcast to its tokens.
SelectionRecord score_entity(const corpus::Entity& entity,
                             const ner::NerOutput& outputs,
                             double span_weight, double category_weight,
                             const corpus::LabelSequence& observed,
                             const std::vector<std::string>& classes,
                             double epsilon);

// Top-k records per predicted class by combined score, descending; ties
// break toward the smaller sentence id, then the smaller span start.
// Classes appear in sorted order in the result. Throws ConfigError when
// k < 1.
std::vector<SelectionRecord> select_topk(
    const std::vector<SelectionRecord>& records, int k);

// Where stage II gets its per-entity weights. The default implementation
// asks the discriminator; tests substitute stubs (constant weights, oracle
// weights) to isolate the tagger update.
class WeightSource {
 public:
  virtual ~WeightSource() = default;
  virtual double span_weight(const corpus::Sentence& sentence,
                             const corpus::Entity& entity,
                             const demos::Demonstration* demo) = 0;
  virtual double category_weight(const corpus::Sentence& sentence,
                                 const corpus::Entity& entity,
                                 const demos::Demonstration* demo) = 0;
};

class DiscriminatorWeightSource final : public WeightSource {
 public:
  explicit DiscriminatorWeightSource(disc::Discriminator& discriminator)
      : disc_(&discriminator) {}
  double span_weight(const corpus::Sentence& sentence,
                     const corpus::Entity& entity,
                     const demos::Demonstration* demo) override;
  double category_weight(const corpus::Sentence& sentence,
                         const corpus::Entity& entity,
                         const demos::Demonstration* demo) override;

 private:
  disc::Discriminator* disc_;
};

class ConstantWeightSource final : public WeightSource {
 public:
  explicit ConstantWeightSource(double value = 1.0) : value_(value) {}
  double span_weight(const corpus::Sentence&, const corpus::Entity&,
                     const demos::Demonstration*) override {
    return value_;
  }
  double category_weight(const corpus::Sentence&, const corpus::Entity&,
                         const demos::Demonstration*) override {
    return value_;
  }

 private:
  double value_;
};

// One demonstration-augmented labeling pass over a dataset with the current
// model. Keeps everything later steps need: the decoded labels, the raw
// head outputs (for agreement scores), the retrieved demonstrations (so
// training reuses exactly the inputs that produced the labels), and the
// extracted entities per sentence.
struct PseudoLabels {
  std::vector<corpus::LabelSequence> labels;
  std::vector<ner::NerOutput> outputs;
  std::vector<std::optional<demos::Demonstration>> demos;
  std::vector<std::vector<corpus::Entity>> entities;

  int total_entities() const;
};

PseudoLabels generate_pseudo_labels(ner::NerModel& model,
                                    const corpus::AnnotatedDataset& data,
                                    const demos::DemoProvider& demos);

// Mean micro F1 of the model's predictions on a labeled set (inference
// only, never demonstration-augmented).
double dataset_f1(ner::NerModel& model, const corpus::AnnotatedDataset& data);

// Warm start: plain supervised training on the noisy labels with early
// stopping on guidance F1 (the best epoch's parameters are restored).
// Returns the per-epoch mean losses.
std::vector<double> warm_start(ner::NerModel& model,
                               const corpus::AnnotatedDataset& noisy,
                               const corpus::AnnotatedDataset& guidance,
                               const TrainConfig& config);

// Stage I: demonstrative self-training. Each iteration relabels the noisy
// set with the current model (demonstration-augmented forward) and trains
// one epoch on its own pseudo labels. Returns the per-iteration mean
// losses. The observer, when set, sees each iteration's pseudo labels
// before the update (protocol probes in tests).
using Stage1Observer =
    std::function<void(int iteration, const PseudoLabels& pseudo)>;
std::vector<double> stage1(ner::NerModel& model,
                           const corpus::AnnotatedDataset& noisy,
                           const demos::DemoProvider& demos,
                           const TrainConfig& config,
                           const Stage1Observer& observer = {});

// Per-round bookkeeping for stage II, and one row of the rounds CSV.
struct RoundStats {
  int round = 0;
  int pseudo_entities = 0;
  double mean_span_weight = 0.0;      // mean w^e over pseudo entities
  double mean_category_weight = 0.0;  // mean w^c over pseudo entities
  std::map<std::string, int> selected_per_class;
  double ner_loss = 0.0;   // mean reweighted loss of the round's pass
  double disc_loss = 0.0;  // mean fine-tuning loss (0 when skipped)
  bool disc_skipped = false;  // no pseudo entities -> no fine-tuning
  double guidance_f1 = 0.0;   // micro F1 on guidance after the round

  int selected_total() const;
};

// Stage II: discriminator-guided co-training. Per round: relabel with the
// current model, score every pseudo entity with the weight source
// (discriminator by default), update the tagger with the reweighted loss
// (observed-O tokens get o_weight), then select top-k pseudo positives per
// class, simulate negatives against the pseudo labels, and fine-tune the
// discriminator with demonstrations. A round with zero pseudo entities
// skips the fine-tuning step with a warning.
std::vector<RoundStats> stage2(ner::NerModel& model,
                               disc::Discriminator& discriminator,
                               const corpus::AnnotatedDataset& noisy,
                               const corpus::AnnotatedDataset& guidance,
                               const demos::DemoProvider& demos,
                               const TrainConfig& config,
                               WeightSource* weight_override = nullptr);

// Stage III: supervised fine-tuning on the guidance set only, without
// demonstrations. Returns the per-epoch mean losses.
std::vector<double> stage3(ner::NerModel& model,
                           const corpus::AnnotatedDataset& guidance,
                           const TrainConfig& config);

// Record of one completed training stage.
struct StageRecord {
  std::string name;
  std::vector<double> losses;  // per epoch / iteration / round
  double guidance_f1 = 0.0;    // micro F1 on guidance after the stage
};

// Everything a finished (or aborted) run reports: the effective
// hyperparameters, encoder warmup losses, the stage sequence, and the
// per-round co-training statistics.
struct RunReport {
  nlohmann::json hyperparameters;
  nlohmann::json warmup;  // final masked-LM losses of the two encoders
  std::vector<StageRecord> stages;
  std::vector<RoundStats> rounds;

  nlohmann::json to_json() const;
  // Header row plus one row per co-training round; selected-per-class is
  // rendered as "CLS=n" pairs joined by '|'.
  std::string rounds_csv() const;
  // Writes run_report.json and rounds.csv into the directory.
  void write(const std::filesystem::path& dir) const;
};

struct PipelineResult {
  ner::NerModel model;
  disc::Discriminator discriminator;
  RunReport report;
};

// Full pipeline: build vocabulary and models from the corpora, warm up both
// encoders, then warm start -> discriminator pretraining -> stage I ->
// stage II -> stage III. When out_dir is nonempty, checkpoints are written
// after every stage and the report files at the end; if a stage throws, the
// partial report is persisted before the error propagates.
PipelineResult run_pipeline(
    const corpus::AnnotatedDataset& noisy,
    const corpus::AnnotatedDataset& guidance, const TrainConfig& config,
    const std::filesystem::path& out_dir = {},
    const corpus::Verbalizer& verbalizer = corpus::Verbalizer::defaults());

}  // namespace nerguide::cotrain

#endif  // NERGUIDE_COTRAIN_HPP_
