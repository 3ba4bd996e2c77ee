#include "nerguide/encoder.hpp"

#include <algorithm>
#include <set>

#include "nerguide/common.hpp"

namespace nerguide {

std::vector<std::string> encoder_support_tokens(
    const corpus::Verbalizer& verbalizer) {
  std::set<std::string> words = {"is", "a", ".", "entity", "correct", "wrong"};
  for (const std::string& w : verbalizer.all_word_tokens()) words.insert(w);
  return {words.begin(), words.end()};
}

TransformerTokenEncoder::TransformerTokenEncoder(nn::Vocab vocab,
                                                 const nn::EncoderConfig& config,
                                                 std::uint64_t seed)
    : vocab_(std::move(vocab)) {
  nn::EncoderConfig effective = config;
  effective.vocab_size = vocab_.size();
  effective.validate();
  model_ = nn::TransformerEncoderModel(effective);
  model_.init(seed);
  id_ = "toy-transformer-d" + std::to_string(effective.dim) + "-l" +
        std::to_string(effective.layers);
}

Eigen::MatrixXd TransformerTokenEncoder::encode(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& appended) {
  if (tokens.empty()) throw DataError("cannot encode an empty sentence");
  if (static_cast<int>(tokens.size()) > max_input_len()) {
    throw DataError("sentence of " + std::to_string(tokens.size()) +
                    " tokens exceeds the encoder maximum of " +
                    std::to_string(max_input_len()));
  }
  if (static_cast<int>(tokens.size() + appended.size()) > max_input_len()) {
    throw DataError("sentence plus appended tokens exceed the encoder "
                    "maximum; truncate the demonstration first");
  }
  std::vector<int> ids = vocab_.encode(tokens);
  for (const std::string& t : appended) ids.push_back(vocab_.id(t));
  last_original_ = static_cast<Eigen::Index>(tokens.size());
  last_total_ = static_cast<Eigen::Index>(ids.size());
  return model_.forward(ids).topRows(last_original_);
}

void TransformerTokenEncoder::backward(const Eigen::MatrixXd& d_repr) {
  if (d_repr.rows() != last_original_) {
    throw DataError("gradient has " + std::to_string(d_repr.rows()) +
                    " rows, the last encode produced " +
                    std::to_string(last_original_));
  }
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(last_total_, d_repr.cols());
  full.topRows(last_original_) = d_repr;
  model_.backward(full);
}

std::vector<nn::Tensor*> TransformerTokenEncoder::parameters() {
  return model_.parameters();
}

nlohmann::json TransformerTokenEncoder::metadata() const {
  const nn::EncoderConfig& c = model_.config();
  nlohmann::json meta;
  meta["encoder"] = id_;
  meta["dim"] = c.dim;
  meta["layers"] = c.layers;
  meta["heads"] = c.heads;
  meta["ffn_mult"] = c.ffn_mult;
  meta["max_len"] = c.max_len;
  // Specials are implied by the Vocab constructor; store only the words.
  std::vector<std::string> words(vocab_.tokens().begin() + 3,
                                 vocab_.tokens().end());
  meta["vocab"] = words;
  return meta;
}

TransformerTokenEncoder TransformerTokenEncoder::from_metadata(
    const nlohmann::json& metadata) {
  nn::EncoderConfig config;
  try {
    config.dim = metadata.at("dim").get<int>();
    config.layers = metadata.at("layers").get<int>();
    config.heads = metadata.at("heads").get<int>();
    config.ffn_mult = metadata.at("ffn_mult").get<int>();
    config.max_len = metadata.at("max_len").get<int>();
    const auto words = metadata.at("vocab").get<std::vector<std::string>>();
    return TransformerTokenEncoder(nn::Vocab(words), config, /*seed=*/0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("encoder metadata is incomplete: ") +
                    e.what());
  }
}

}  // namespace nerguide
