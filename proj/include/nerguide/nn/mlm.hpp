#ifndef NERGUIDE_NN_MLM_HPP_
#define NERGUIDE_NN_MLM_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nerguide/nn/transformer.hpp"
#include "nerguide/nn/vocab.hpp"

namespace nerguide::nn {

// Masked-language-model pretraining for the transformer encoder.  Each step
// samples a batch of sentences, masks a random subset of positions (with the
// usual mask/random/keep split), and minimises mean cross-entropy over the
// masked positions.
struct MlmConfig {
  int steps = 300;
  int batch_size = 8;
  double mask_prob = 0.15;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MlmReport {
  std::vector<double> step_losses;  // mean masked CE per optimiser step

  double final_loss() const;
  // Mean loss over the first / last `window` steps; used to verify the
  // curve actually went down.
  double head_mean(std::size_t window) const;
  double tail_mean(std::size_t window) const;
};

// Pretrains `encoder` and `head` in place on the given id sequences.
// Sentences shorter than two tokens are skipped (nothing to predict from).
// Throws TrainError if the loss turns non-finite.
MlmReport mlm_pretrain(TransformerEncoderModel& encoder, MlmHead& head,
                       const Vocab& vocab,
                       const std::vector<std::vector<int>>& sentences,
                       const MlmConfig& config);

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_MLM_HPP_
