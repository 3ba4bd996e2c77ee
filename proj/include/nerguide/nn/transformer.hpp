#ifndef NERGUIDE_NN_TRANSFORMER_HPP_
#define NERGUIDE_NN_TRANSFORMER_HPP_

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nerguide/nn/layers.hpp"
#include "nerguide/nn/tensor.hpp"
#include "nerguide/nn/vocab.hpp"

namespace nerguide::nn {

struct EncoderConfig {
  int vocab_size = 0;
  int dim = 40;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_len = 128;

  void validate() const;  // dim divisible by heads, everything positive
  bool operator==(const EncoderConfig&) const = default;
};

// Full bidirectional multi-head self-attention over one sequence. Sequences
// are processed one at a time (no padding, no mask).
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, int dim, int heads);

  void init(Rng& rng, double stddev);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  void collect(std::vector<Tensor*>& out);

 private:
  int dim_ = 0;
  int heads_ = 0;
  int head_dim_ = 0;
  Linear q_, k_, v_, o_;
  Eigen::MatrixXd q_all_, k_all_, v_all_;       // cached projections
  std::vector<Eigen::MatrixXd> attn_;           // per-head softmax output
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const std::string& name, int dim, int hidden);

  void init(Rng& rng, double stddev);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  void collect(std::vector<Tensor*>& out);

 private:
  Linear up_, down_;
  Eigen::MatrixXd pre_;  // cached pre-activation
};

// Pre-LN residual block: x + Attn(LN(x)), then + FFN(LN(.)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(const std::string& name, const EncoderConfig& config);

  void init(Rng& rng, double stddev);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);
  void collect(std::vector<Tensor*>& out);

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadSelfAttention attn_;
  FeedForward ffn_;
};

// Token + learned position embeddings, a stack of pre-LN transformer layers
// and a final layer norm. Maps a token-id sequence to one row per token.
class TransformerEncoderModel {
 public:
  TransformerEncoderModel() = default;
  explicit TransformerEncoderModel(const EncoderConfig& config);

  // Deterministic initialization from the seed.
  void init(std::uint64_t seed, double stddev = 0.02);

  Eigen::MatrixXd forward(const std::vector<int>& ids);
  void backward(const Eigen::MatrixXd& d_repr);

  std::vector<Tensor*> parameters();
  const EncoderConfig& config() const { return config_; }
  long parameter_total();

 private:
  EncoderConfig config_;
  Tensor tok_emb_;  // (vocab x dim)
  Tensor pos_emb_;  // (max_len x dim)
  std::vector<TransformerLayer> layers_;
  LayerNorm final_ln_;
  std::vector<int> ids_;  // cached for the embedding scatter
};

// Projection from hidden states to vocabulary logits.
class MlmHead {
 public:
  MlmHead() = default;
  MlmHead(int dim, int vocab_size);

  void init(std::uint64_t seed, double stddev = 0.02);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& h);   // (n x vocab)
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);  // d h

  std::vector<Tensor*> parameters();

 private:
  Linear proj_;
};

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_TRANSFORMER_HPP_
