#include "nerguide/nn/mlm.hpp"

#include <cmath>
#include <numeric>

#include "nerguide/common.hpp"
#include "nerguide/nn/adamw.hpp"
#include "nerguide/nn/layers.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::nn {

void MlmConfig::validate() const {
  if (steps <= 0) throw ConfigError("mlm steps must be positive");
  if (batch_size <= 0) throw ConfigError("mlm batch_size must be positive");
  if (mask_prob <= 0.0 || mask_prob >= 1.0) {
    throw ConfigError("mlm mask_prob must lie in (0, 1)");
  }
  if (lr <= 0.0) throw ConfigError("mlm lr must be positive");
  if (weight_decay < 0.0) {
    throw ConfigError("mlm weight_decay must be non-negative");
  }
}

double MlmReport::final_loss() const {
  if (step_losses.empty()) throw DataError("MLM report has no steps");
  return step_losses.back();
}

double MlmReport::head_mean(std::size_t window) const {
  if (step_losses.size() < window || window == 0) {
    throw DataError("MLM report shorter than requested window");
  }
  return std::accumulate(step_losses.begin(), step_losses.begin() + window,
                         0.0) /
         static_cast<double>(window);
}

double MlmReport::tail_mean(std::size_t window) const {
  if (step_losses.size() < window || window == 0) {
    throw DataError("MLM report shorter than requested window");
  }
  return std::accumulate(step_losses.end() - window, step_losses.end(), 0.0) /
         static_cast<double>(window);
}

namespace {

struct MaskedSentence {
  std::vector<int> corrupted;   // input ids after masking
  std::vector<int> positions;   // masked positions
  std::vector<int> targets;     // original ids at those positions
};

// BERT-style corruption: every position is masked with `mask_prob`; a masked
// position becomes [MASK] 80% of the time, a random vocabulary id 10%, and is
// left untouched 10%.  At least one position is always masked so every
// sentence contributes to the loss.
MaskedSentence mask_sentence(const std::vector<int>& ids, const Vocab& vocab,
                             double mask_prob, Rng& rng) {
  MaskedSentence out;
  out.corrupted = ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (rng.uniform() >= mask_prob) continue;
    out.positions.push_back(static_cast<int>(i));
    out.targets.push_back(ids[i]);
    const double roll = rng.uniform();
    if (roll < 0.8) {
      out.corrupted[i] = vocab.mask_id();
    } else if (roll < 0.9) {
      out.corrupted[i] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.size())));
    }  // else keep the original id
  }
  if (out.positions.empty()) {
    const int pos = static_cast<int>(rng.below(ids.size()));
    out.positions.push_back(pos);
    out.targets.push_back(ids[pos]);
    out.corrupted[pos] = vocab.mask_id();
  }
  return out;
}

}  // namespace

MlmReport mlm_pretrain(TransformerEncoderModel& encoder, MlmHead& head,
                       const Vocab& vocab,
                       const std::vector<std::vector<int>>& sentences,
                       const MlmConfig& config) {
  config.validate();
  std::vector<const std::vector<int>*> usable;
  for (const auto& s : sentences) {
    if (s.size() >= 2) usable.push_back(&s);
  }
  if (usable.empty()) {
    throw DataError("MLM pretraining needs sentences with at least 2 tokens");
  }

  std::vector<Tensor*> params = encoder.parameters();
  for (Tensor* t : head.parameters()) params.push_back(t);
  AdamW::Options opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;
  AdamW optimizer(params, opt);

  Rng rng = Rng::derive(config.seed, 0x6d6c6d70);  // "mlmp"
  MlmReport report;
  report.step_losses.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    // Draw the whole batch (and its masks) up front so the loss can be
    // normalised by the total number of masked positions.
    std::vector<MaskedSentence> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    std::size_t total_masked = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& ids = *usable[rng.below(usable.size())];
      batch.push_back(mask_sentence(ids, vocab, config.mask_prob, rng));
      total_masked += batch.back().positions.size();
    }

    double loss_sum = 0.0;
    const double inv_masked = 1.0 / static_cast<double>(total_masked);
    for (const MaskedSentence& ms : batch) {
      const Eigen::MatrixXd repr = encoder.forward(ms.corrupted);
      const Eigen::MatrixXd logits = head.forward(repr);
      Eigen::MatrixXd d_logits =
          Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
      for (std::size_t m = 0; m < ms.positions.size(); ++m) {
        const int row = ms.positions[m];
        const int target = ms.targets[m];
        const Eigen::RowVectorXd probs = row_softmax(logits.row(row));
        loss_sum -= std::log(std::max(probs(target), 1e-300));
        d_logits.row(row) = probs * inv_masked;
        d_logits(row, target) -= inv_masked;
      }
      encoder.backward(head.backward(d_logits));
    }
    const double loss = loss_sum * inv_masked;
    if (!std::isfinite(loss)) {
      throw TrainError("MLM loss became non-finite at step " +
                       std::to_string(step));
    }
    report.step_losses.push_back(loss);
    optimizer.step();
  }
  return report;
}

}  // namespace nerguide::nn
