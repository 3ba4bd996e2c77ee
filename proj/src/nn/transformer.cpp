#include "nerguide/nn/transformer.hpp"

#include <cmath>

#include "nerguide/common.hpp"

namespace nerguide::nn {

void EncoderConfig::validate() const {
  if (vocab_size <= 0) throw ConfigError("encoder vocab_size must be positive");
  if (dim <= 0 || layers <= 0 || heads <= 0 || ffn_mult <= 0 || max_len <= 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (dim % heads != 0) {
    throw ConfigError("encoder dim " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
}

MultiHeadSelfAttention::MultiHeadSelfAttention(const std::string& name,
                                               int dim, int heads)
    : dim_(dim),
      heads_(heads),
      head_dim_(dim / heads),
      q_(name + ".q", dim, dim),
      k_(name + ".k", dim, dim),
      v_(name + ".v", dim, dim),
      o_(name + ".o", dim, dim) {}

void MultiHeadSelfAttention::init(Rng& rng, double stddev) {
  q_.init(rng, stddev);
  k_.init(rng, stddev);
  v_.init(rng, stddev);
  o_.init(rng, stddev);
}

Eigen::MatrixXd MultiHeadSelfAttention::forward(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  q_all_ = q_.forward(x);
  k_all_ = k_.forward(x);
  v_all_ = v_.forward(x);
  attn_.assign(static_cast<std::size_t>(heads_), Eigen::MatrixXd());

  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Eigen::MatrixXd concat(n, dim_);
  for (int h = 0; h < heads_; ++h) {
    const auto qh = q_all_.middleCols(h * head_dim_, head_dim_);
    const auto kh = k_all_.middleCols(h * head_dim_, head_dim_);
    const auto vh = v_all_.middleCols(h * head_dim_, head_dim_);
    Eigen::MatrixXd scores = qh * kh.transpose() * scale;
    attn_[static_cast<std::size_t>(h)] = row_softmax(scores);
    concat.middleCols(h * head_dim_, head_dim_) =
        attn_[static_cast<std::size_t>(h)] * vh;
  }
  return o_.forward(concat);
}

Eigen::MatrixXd MultiHeadSelfAttention::backward(const Eigen::MatrixXd& dy) {
  const Eigen::Index n = dy.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Eigen::MatrixXd d_concat = o_.backward(dy);

  Eigen::MatrixXd dq(n, dim_), dk(n, dim_), dv(n, dim_);
  for (int h = 0; h < heads_; ++h) {
    const auto qh = q_all_.middleCols(h * head_dim_, head_dim_);
    const auto kh = k_all_.middleCols(h * head_dim_, head_dim_);
    const auto vh = v_all_.middleCols(h * head_dim_, head_dim_);
    const Eigen::MatrixXd& p = attn_[static_cast<std::size_t>(h)];
    const auto d_oh = d_concat.middleCols(h * head_dim_, head_dim_);

    Eigen::MatrixXd dp = d_oh * vh.transpose();
    Eigen::MatrixXd ds = row_softmax_backward(p, dp) * scale;
    dq.middleCols(h * head_dim_, head_dim_) = ds * kh;
    dk.middleCols(h * head_dim_, head_dim_) = ds.transpose() * qh;
    dv.middleCols(h * head_dim_, head_dim_) = p.transpose() * d_oh;
  }
  Eigen::MatrixXd dx = q_.backward(dq);
  dx += k_.backward(dk);
  dx += v_.backward(dv);
  return dx;
}

void MultiHeadSelfAttention::collect(std::vector<Tensor*>& out) {
  q_.collect(out);
  k_.collect(out);
  v_.collect(out);
  o_.collect(out);
}

FeedForward::FeedForward(const std::string& name, int dim, int hidden)
    : up_(name + ".up", dim, hidden), down_(name + ".down", hidden, dim) {}

void FeedForward::init(Rng& rng, double stddev) {
  up_.init(rng, stddev);
  down_.init(rng, stddev);
}

Eigen::MatrixXd FeedForward::forward(const Eigen::MatrixXd& x) {
  pre_ = up_.forward(x);
  return down_.forward(gelu(pre_));
}

Eigen::MatrixXd FeedForward::backward(const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd d_act = down_.backward(dy);
  Eigen::MatrixXd d_pre = d_act.array() * gelu_grad(pre_).array();
  return up_.backward(d_pre);
}

void FeedForward::collect(std::vector<Tensor*>& out) {
  up_.collect(out);
  down_.collect(out);
}

TransformerLayer::TransformerLayer(const std::string& name,
                                   const EncoderConfig& config)
    : ln1_(name + ".ln1", config.dim),
      ln2_(name + ".ln2", config.dim),
      attn_(name + ".attn", config.dim, config.heads),
      ffn_(name + ".ffn", config.dim, config.dim * config.ffn_mult) {}

void TransformerLayer::init(Rng& rng, double stddev) {
  attn_.init(rng, stddev);
  ffn_.init(rng, stddev);
}

Eigen::MatrixXd TransformerLayer::forward(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = x + attn_.forward(ln1_.forward(x));
  return y + ffn_.forward(ln2_.forward(y));
}

Eigen::MatrixXd TransformerLayer::backward(const Eigen::MatrixXd& dz) {
  Eigen::MatrixXd dy = dz + ln2_.backward(ffn_.backward(dz));
  return dy + ln1_.backward(attn_.backward(dy));
}

void TransformerLayer::collect(std::vector<Tensor*>& out) {
  ln1_.collect(out);
  attn_.collect(out);
  ln2_.collect(out);
  ffn_.collect(out);
}

TransformerEncoderModel::TransformerEncoderModel(const EncoderConfig& config)
    : config_(config),
      tok_emb_("tok_emb", config.vocab_size, config.dim),
      pos_emb_("pos_emb", config.max_len, config.dim),
      final_ln_("final_ln", config.dim) {
  config.validate();
  layers_.reserve(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    layers_.emplace_back("layer" + std::to_string(l), config);
  }
}

void TransformerEncoderModel::init(std::uint64_t seed, double stddev) {
  Rng rng = Rng::derive(seed, 0x656e63);  // "enc"
  init_normal(tok_emb_, rng, stddev);
  init_normal(pos_emb_, rng, stddev);
  for (TransformerLayer& layer : layers_) layer.init(rng, stddev);
}

Eigen::MatrixXd TransformerEncoderModel::forward(const std::vector<int>& ids) {
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw DataError("encoder got an empty sequence");
  if (n > config_.max_len) {
    throw DataError("sequence of " + std::to_string(n) +
                    " tokens exceeds the encoder maximum " +
                    std::to_string(config_.max_len));
  }
  ids_ = ids;
  Eigen::MatrixXd x(n, config_.dim);
  for (int i = 0; i < n; ++i) {
    if (ids[static_cast<std::size_t>(i)] < 0 ||
        ids[static_cast<std::size_t>(i)] >= config_.vocab_size) {
      throw DataError("token id out of vocabulary range");
    }
    x.row(i) = tok_emb_.value.row(ids[static_cast<std::size_t>(i)]) +
               pos_emb_.value.row(i);
  }
  for (TransformerLayer& layer : layers_) x = layer.forward(x);
  return final_ln_.forward(x);
}

void TransformerEncoderModel::backward(const Eigen::MatrixXd& d_repr) {
  Eigen::MatrixXd dx = final_ln_.backward(d_repr);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    dx = it->backward(dx);
  }
  for (int i = 0; i < static_cast<int>(ids_.size()); ++i) {
    tok_emb_.grad.row(ids_[static_cast<std::size_t>(i)]) += dx.row(i);
    pos_emb_.grad.row(i) += dx.row(i);
  }
}

std::vector<Tensor*> TransformerEncoderModel::parameters() {
  std::vector<Tensor*> out;
  out.push_back(&tok_emb_);
  out.push_back(&pos_emb_);
  for (TransformerLayer& layer : layers_) layer.collect(out);
  final_ln_.collect(out);
  return out;
}

long TransformerEncoderModel::parameter_total() {
  return parameter_count(parameters());
}

MlmHead::MlmHead(int dim, int vocab_size)
    : proj_("mlm_head", dim, vocab_size) {}

void MlmHead::init(std::uint64_t seed, double stddev) {
  Rng rng = Rng::derive(seed, 0x6d6c6d);  // "mlm"
  proj_.init(rng, stddev);
}

Eigen::MatrixXd MlmHead::forward(const Eigen::MatrixXd& h) {
  return proj_.forward(h);
}

Eigen::MatrixXd MlmHead::backward(const Eigen::MatrixXd& dy) {
  return proj_.backward(dy);
}

std::vector<Tensor*> MlmHead::parameters() {
  std::vector<Tensor*> out;
  proj_.collect(out);
  return out;
}

}  // namespace nerguide::nn
