#ifndef NERGUIDE_ENCODER_HPP_
#define NERGUIDE_ENCODER_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nerguide/nn/tensor.hpp"
#include "nerguide/nn/transformer.hpp"
#include "nerguide/nn/vocab.hpp"
#include "nerguide/verbalizer.hpp"

namespace nerguide {

// Contextual token encoder contract. encode() returns one row of dimension
// dim() per token in `tokens`; the `appended` tokens (demonstration clauses,
// already rendered) influence those rows through attention but receive no
// output rows of their own. Encoders are stateful across a call pair: each
// backward() consumes the cache left by the encode() immediately before it.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;

  virtual int dim() const = 0;
  virtual int max_input_len() const = 0;
  virtual const std::string& model_id() const = 0;

  virtual Eigen::MatrixXd encode(const std::vector<std::string>& tokens,
                                 const std::vector<std::string>& appended) = 0;
  // d_repr has one row per original token; rows for appended tokens are
  // treated as zero.
  virtual void backward(const Eigen::MatrixXd& d_repr) = 0;

  // Empty for frozen or non-trainable encoders.
  virtual std::vector<nn::Tensor*> parameters() = 0;
};

// Every non-corpus word the downstream components can feed an encoder:
// demonstration and prompt scaffolding ("is", "a", ".", "entity"), the
// discriminator answer words ("correct", "wrong"), and all words appearing
// in class verbalizations. Union these with the corpus vocabulary when
// building a closed word list.
std::vector<std::string> encoder_support_tokens(
    const corpus::Verbalizer& verbalizer);

// The in-repo trainable encoder: a word-level vocabulary in front of the
// small transformer. Unknown words map to [UNK].
class TransformerTokenEncoder : public TokenEncoder {
 public:
  TransformerTokenEncoder(nn::Vocab vocab, const nn::EncoderConfig& config,
                          std::uint64_t seed);

  int dim() const override { return model_.config().dim; }
  int max_input_len() const override { return model_.config().max_len; }
  const std::string& model_id() const override { return id_; }

  Eigen::MatrixXd encode(const std::vector<std::string>& tokens,
                         const std::vector<std::string>& appended) override;
  void backward(const Eigen::MatrixXd& d_repr) override;
  std::vector<nn::Tensor*> parameters() override;

  const nn::Vocab& vocab() const { return vocab_; }
  nn::TransformerEncoderModel& model() { return model_; }

  // Everything needed to rebuild this encoder shape-identically (the tensor
  // payload travels separately through the checkpoint code).
  nlohmann::json metadata() const;
  static TransformerTokenEncoder from_metadata(const nlohmann::json& metadata);

 private:
  nn::Vocab vocab_;
  nn::TransformerEncoderModel model_;
  std::string id_;
  Eigen::Index last_original_ = 0;
  Eigen::Index last_total_ = 0;
};

}  // namespace nerguide

#endif  // NERGUIDE_ENCODER_HPP_
