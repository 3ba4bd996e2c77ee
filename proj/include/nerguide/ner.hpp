#ifndef NERGUIDE_NER_HPP_
#define NERGUIDE_NER_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nerguide/corpus.hpp"
#include "nerguide/demonstrations.hpp"
#include "nerguide/encoder.hpp"
#include "nerguide/nn/adamw.hpp"
#include "nerguide/nn/layers.hpp"

namespace nerguide::ner {

struct InferenceConfig {
  double threshold = 0.5;

  void validate() const;  // threshold strictly inside (0, 1)
};

// Per-token loss weights for the discriminative reweight loss. Tokens of
// one entity are expected to carry equal weights (the builders below
// guarantee it); O tokens default to 0.5 on the span side and are never
// read on the category side.
struct WeightMap {
  std::vector<double> span;
  std::vector<double> category;

  static WeightMap uniform(std::size_t tokens, double value = 1.0);
  void validate(std::size_t tokens) const;  // sizes match, entries in [0,1]
};

// Builds a WeightMap from per-entity scores: every token of entities[i]
// receives span weight span_scores[i] and category weight
// category_scores[i]; all other tokens get o_weight on the span side.
WeightMap weights_from_entities(std::size_t tokens,
                                const std::vector<corpus::Entity>& entities,
                                const std::vector<double>& span_scores,
                                const std::vector<double>& category_scores,
                                double o_weight);

struct NerOutput {
  Eigen::VectorXd entity_probs;  // per token, in [0, 1]
  Eigen::MatrixXd class_dists;   // one distribution row per token
};

// Renders head outputs into BIO tags: a token is O iff its entity
// probability is <= the threshold; entity runs take per-token argmax
// classes, and a class change inside a run starts a new B tag. `classes`
// names the columns of the class distributions.
corpus::LabelSequence decode_outputs(const NerOutput& outputs,
                                     const InferenceConfig& config,
                                     const std::vector<std::string>& classes);

enum class LossKind { Supervised, SelfTraining, Drl };

struct TrainExample;
class NerModel;

// One optimizer update on the mean batch loss. Returns the batch loss;
// throws TrainError (with the offending sentence id) if it is non-finite.
double train_step(NerModel& model, const std::vector<TrainExample>& batch,
                  LossKind kind, nn::AdamW& optimizer);

// Dual-head token classifier over a pluggable contextual encoder: a
// logistic entity head deciding entity-vs-O per token and a softmax
// classification head assigning a class to entity tokens.
class NerModel {
 public:
  NerModel(std::shared_ptr<TokenEncoder> encoder,
           std::vector<std::string> classes, std::uint64_t seed);

  // One probability and one class distribution per original token. The
  // demonstration (when given) is appended to the encoder input, truncated
  // clause-by-clause to fit the encoder budget.
  NerOutput forward(const corpus::Sentence& sentence,
                    const demos::Demonstration* demo = nullptr);

  // Thresholded two-stage decision rendered in BIO form: a token is O iff
  // its entity probability is <= threshold; entity runs take per-token
  // argmax classes, and a class change inside a run starts a new B tag.
  // Inference never sees demonstrations.
  corpus::LabelSequence predict(const corpus::Sentence& sentence,
                                const InferenceConfig& config);

  corpus::AnnotatedDataset predict_dataset(
      const std::vector<corpus::Sentence>& sentences,
      const InferenceConfig& config);

  // Mean over tokens of the binary span cross-entropy plus mean over
  // entity tokens of the class cross-entropy.
  double supervised_loss(const corpus::Sentence& sentence,
                         const corpus::SpanLabels& span,
                         const corpus::CategoryLabels& category,
                         const demos::Demonstration* demo = nullptr);

  // supervised_loss with pseudo labels substituted for observed ones.
  double self_training_loss(const corpus::Sentence& sentence,
                            const corpus::LabelSequence& pseudo,
                            const demos::Demonstration* demo = nullptr);

  // Weighted form: each token's span term scales with its span weight and
  // each entity token's category term with its category weight; the
  // normalizers stay 1/tokens and 1/entity-tokens, so all-ones weights
  // reproduce self_training_loss exactly.
  double drl_loss(const corpus::Sentence& sentence,
                  const corpus::SpanLabels& span,
                  const corpus::CategoryLabels& category,
                  const WeightMap& weights,
                  const demos::Demonstration* demo = nullptr);

  // Building block of train_step: computes the example's loss and
  // accumulates dloss/dparam (times grad_scale) into every parameter's
  // gradient buffer. The caller owns zeroing gradients and stepping the
  // optimizer.
  double accumulate(const TrainExample& example, LossKind kind,
                    double grad_scale);

  const std::vector<std::string>& classes() const { return classes_; }
  int class_id(const std::string& cls) const;  // DataError if unknown

  TokenEncoder& encoder() { return *encoder_; }
  const std::shared_ptr<TokenEncoder>& encoder_ptr() const { return encoder_; }

  std::vector<nn::Tensor*> parameters();       // encoder + heads
  std::vector<nn::Tensor*> head_parameters();  // heads only
  long parameter_total();

  // Default decision threshold carried with the model (checkpointed).
  InferenceConfig inference;

  // Checkpoint: encoder identity and shape, class set, threshold, and the
  // full tensor payload; values round-trip bit-exactly.
  void save(const std::filesystem::path& path);
  // Rebuilds the encoder from checkpoint metadata (in-repo transformer
  // encoders only).
  static NerModel load(const std::filesystem::path& path);
  // Loads into a caller-provided encoder whose model_id must match.
  static NerModel load_with_encoder(const std::filesystem::path& path,
                                    std::shared_ptr<TokenEncoder> encoder);

 private:
  // Shared core of the three losses; accumulates gradients (scaled by
  // grad_scale) into the heads and the encoder when with_grads is set.
  double sentence_objective(const corpus::Sentence& sentence,
                            const corpus::SpanLabels& span,
                            const corpus::CategoryLabels& category,
                            const WeightMap* weights,
                            const demos::Demonstration* demo,
                            double grad_scale, bool with_grads);

  std::shared_ptr<TokenEncoder> encoder_;
  std::vector<std::string> classes_;
  nn::Linear entity_head_;
  nn::Linear class_head_;
};

// One training example: a sentence with decomposed labels, optional DRL
// weights, and an optional demonstration to append.
struct TrainExample {
  const corpus::Sentence* sentence = nullptr;
  corpus::SpanLabels span;
  corpus::CategoryLabels category;
  WeightMap weights;  // consulted only for LossKind::Drl
  const demos::Demonstration* demo = nullptr;
};

TrainExample make_example(const corpus::Sentence& sentence,
                          const corpus::LabelSequence& labels);

}  // namespace nerguide::ner

#endif  // NERGUIDE_NER_HPP_
