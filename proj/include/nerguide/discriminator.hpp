#ifndef NERGUIDE_DISCRIMINATOR_HPP_
#define NERGUIDE_DISCRIMINATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nerguide/corpus.hpp"
#include "nerguide/demonstrations.hpp"
#include "nerguide/nn/mlm.hpp"
#include "nerguide/nn/transformer.hpp"
#include "nerguide/nn/vocab.hpp"
#include "nerguide/verbalizer.hpp"

namespace nerguide::disc {

enum class PromptKind { Span, Category };

// A cloze prompt with exactly one mask position:
//   span:     "<sentence> . <surface> is a [MASK] entity ."
//   category: "<sentence> . <surface> is a [MASK] <verbalized class> entity ."
struct Prompt {
  std::vector<std::string> tokens;
  std::size_t mask_index = 0;
};

Prompt build_prompt(PromptKind kind, const corpus::Sentence& sentence,
                    const corpus::Entity& entity, const std::string* cls,
                    const corpus::Verbalizer& verbalizer);

enum class NegativeKind { SpanPerturbed, ClassFlipped };

struct NegativeSample {
  NegativeKind kind = NegativeKind::SpanPerturbed;
  corpus::Entity entity;  // perturbed span, or original span for class flips
  std::string flipped_class;  // set only for ClassFlipped
  int source_index = 0;       // index of the positive it was simulated from
};

struct NegativeSampleSet {
  std::vector<NegativeSample> samples;
  int span_moves_skipped = 0;  // positives with no feasible boundary move

  std::vector<const NegativeSample*> of_kind(NegativeKind kind) const;
};

// Simulates negatives from trusted positives: per positive, one
// span-negative (a single boundary token added or removed, uniform over the
// feasible moves given the context labels) and one category-negative (a
// uniform flip to a different class). Deterministic given the seed; the
// random stream per positive depends only on the seed and its index.
NegativeSampleSet make_negatives(const corpus::AnnotatedDataset& context,
                                 const std::vector<corpus::Entity>& positives,
                                 std::uint64_t seed);

struct DiscTrainConfig {
  int epochs = 1;
  int batch_size = 16;     // paired samples (positive + its negatives)
  double lr = 2e-5;        // pretraining default; co-training uses 5e-6
  double weight_decay = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DiscTrainReport {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;  // mean step loss per epoch
  int negatives_skipped = 0;
  bool skipped = false;  // empty-input no-op
};

// Prompt-based label-quality scorer: an MLM encoder reads the filled
// template and the score is the two-way probability of answering "correct"
// rather than "wrong" at the mask. Scores are renormalized over the two
// answer words, so score + P(wrong) == 1 exactly.
class Discriminator {
 public:
  Discriminator(nn::Vocab vocab, const nn::EncoderConfig& config,
                std::uint64_t seed, corpus::Verbalizer verbalizer);

  double score_span(const corpus::Sentence& sentence,
                    const corpus::Entity& entity,
                    const demos::Demonstration* demo = nullptr);
  double score_category(const corpus::Sentence& sentence,
                        const corpus::Entity& entity, const std::string& cls,
                        const demos::Demonstration* demo = nullptr);

  // Loss of one prompt given its desired answer (-log of the clamped score
  // for positives, -log of the clamped complement for negatives). When
  // grad_scale is nonzero, gradients accumulate into the parameters.
  double prompt_loss(PromptKind kind, const corpus::Sentence& sentence,
                     const corpus::Entity& entity, const std::string* cls,
                     bool positive, const demos::Demonstration* demo,
                     double grad_scale);

  // Masked-language-model warmup of the underlying encoder on raw token
  // sequences, run before any discriminative training.
  nn::MlmReport mlm_warmup(
      const std::vector<std::vector<std::string>>& sentences,
      const nn::MlmConfig& config);

  std::vector<nn::Tensor*> parameters();
  long parameter_total();
  const corpus::Verbalizer& verbalizer() const { return verbalizer_; }
  const nn::Vocab& vocab() const { return vocab_; }
  int max_input_len() const { return encoder_.config().max_len; }

  void save(const std::filesystem::path& path);
  static Discriminator load(const std::filesystem::path& path);

 private:
  // Runs the encoder over the prompt (plus a truncated demonstration) and
  // returns w = sigma(logit_correct - logit_wrong) at the mask position.
  // The logits shape is reported for the matching backward pass.
  double forward_w(const Prompt& prompt, const demos::Demonstration* demo,
                   Eigen::Index* rows, Eigen::Index* cols);
  double prompt_objective(const Prompt& prompt,
                          const demos::Demonstration* demo, bool positive,
                          double grad_scale, bool with_grads);

  nn::Vocab vocab_;
  nn::TransformerEncoderModel encoder_;
  nn::MlmHead head_;
  corpus::Verbalizer verbalizer_;
  int correct_id_ = 0;
  int wrong_id_ = 0;
};

// Mean of the four loss terms over explicit positive and negative sets:
// -log w^e and -log w^c averaged over positives, -log(1 - w^e) over
// span-negatives, -log(1 - w^c) over category-negatives. Both sets must be
// nonempty.
double pretrain_loss(Discriminator& disc,
                     const corpus::AnnotatedDataset& context,
                     const std::vector<corpus::Entity>& positives,
                     const NegativeSampleSet& negatives,
                     const demos::DemoProvider& demos = {});

// Pretrains on guidance positives plus simulated negatives.
DiscTrainReport pretrain(Discriminator& disc,
                         const corpus::AnnotatedDataset& guidance,
                         const DiscTrainConfig& config,
                         const demos::DemoProvider& demos = {});

// One fine-tuning pass over selected pseudo positives; negatives are
// simulated exactly as in make_negatives against the pseudo context.
// An empty selection is a warned no-op.
DiscTrainReport finetune(Discriminator& disc,
                         const corpus::AnnotatedDataset& pseudo_context,
                         const std::vector<corpus::Entity>& pseudo_positives,
                         const DiscTrainConfig& config,
                         const demos::DemoProvider& demos = {});

// Probability that a random positive outscores a random negative, ties at
// half weight (rank-based AUC). Both vectors must be nonempty.
double rank_auc(const std::vector<double>& positive_scores,
                const std::vector<double>& negative_scores);

}  // namespace nerguide::disc

#endif  // NERGUIDE_DISCRIMINATOR_HPP_
