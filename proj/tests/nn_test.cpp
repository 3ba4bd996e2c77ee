#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nerguide/common.hpp"
#include "nerguide/nn/adamw.hpp"
#include "nerguide/nn/checkpoint.hpp"
#include "nerguide/nn/layers.hpp"
#include "nerguide/nn/mlm.hpp"
#include "nerguide/nn/tensor.hpp"
#include "nerguide/nn/transformer.hpp"
#include "nerguide/nn/vocab.hpp"
#include "nerguide/rng.hpp"
#include "support/fd.hpp"
#include "support/toy_corpus.hpp"

using namespace nerguide;
using namespace nerguide::nn;
using testsupport::central_diff;
using testsupport::max_input_rel_err;
using testsupport::max_param_rel_err;
using testsupport::random_matrix;
using testsupport::rel_err;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("vocab assigns stable ids independent of word order") {
  Vocab a({"delta", "alpha", "charlie", "bravo"});
  Vocab b({"bravo", "charlie", "alpha", "delta", "alpha"});
  CHECK(a == b);
  CHECK(a.size() == 7);  // 3 specials + 4 words
  CHECK(a.id(Vocab::kUnk) == a.unk_id());
  CHECK(a.id(Vocab::kMask) == a.mask_id());
  CHECK(a.id(Vocab::kSep) == a.sep_id());
  CHECK(a.id("alpha") == 3);
  CHECK(a.id("delta") == 6);
  CHECK(a.id("missing") == a.unk_id());
  CHECK(a.token(3) == "alpha");
  CHECK_THROWS_AS(a.token(99), DataError);
  const auto ids = a.encode({"alpha", "missing", "delta"});
  CHECK(ids == std::vector<int>{3, 0, 6});
}

TEST_CASE("gelu matches its closed-form derivative") {
  Eigen::MatrixXd x = random_matrix(4, 5, 11);
  const Eigen::MatrixXd g = gelu_grad(x);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double numeric = central_diff(
        x.data() + i, 1e-6, [&] { return gelu(x).sum(); });
    worst = std::max(worst, rel_err(g.data()[i], numeric));
  }
  CHECK(worst < 1e-6);
  CHECK(gelu(Eigen::MatrixXd::Zero(1, 1))(0, 0) == 0.0);
  CHECK(gelu(Eigen::MatrixXd::Constant(1, 1, 8.0))(0, 0) ==
        doctest::Approx(8.0).epsilon(1e-12));
  CHECK(std::abs(gelu(Eigen::MatrixXd::Constant(1, 1, -8.0))(0, 0)) < 1e-12);
}

TEST_CASE("row softmax normalizes and its backward matches finite differences") {
  Eigen::MatrixXd s = random_matrix(3, 6, 21);
  const Eigen::MatrixXd p = row_softmax(s);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.row(r).minCoeff() > 0.0);
  }
  const Eigen::MatrixXd weights = random_matrix(3, 6, 22);
  auto loss = [&] { return row_softmax(s).cwiseProduct(weights).sum(); };
  const Eigen::MatrixXd ds = row_softmax_backward(row_softmax(s), weights);
  CHECK(max_input_rel_err(s, ds, loss) < 1e-4);
}

TEST_CASE("linear layer gradients match finite differences") {
  Rng rng = Rng::derive(31, 0);
  Linear lin("lin", 4, 3);
  lin.init(rng, 0.5);
  Eigen::MatrixXd x = random_matrix(5, 4, 32);
  const Eigen::MatrixXd weights = random_matrix(5, 3, 33);
  std::vector<Tensor*> params;
  lin.collect(params);
  auto loss = [&] { return lin.forward(x).cwiseProduct(weights).sum(); };
  Eigen::MatrixXd dx;
  auto grad = [&] {
    lin.forward(x);
    dx = lin.backward(weights);
  };
  CHECK(max_param_rel_err(params, loss, grad) < 1e-4);
  CHECK(max_input_rel_err(x, dx, loss) < 1e-4);
}

TEST_CASE("layer norm gradients match finite differences") {
  Rng rng = Rng::derive(41, 0);
  LayerNorm ln("ln", 6);
  // Non-trivial gain/shift so the test exercises both parameters.
  init_normal(ln.gamma, rng, 0.3);
  ln.gamma.value.array() += 1.0;
  init_normal(ln.beta, rng, 0.3);
  Eigen::MatrixXd x = random_matrix(4, 6, 42);
  const Eigen::MatrixXd weights = random_matrix(4, 6, 43);
  std::vector<Tensor*> params;
  ln.collect(params);
  auto loss = [&] { return ln.forward(x).cwiseProduct(weights).sum(); };
  Eigen::MatrixXd dx;
  auto grad = [&] {
    ln.forward(x);
    dx = ln.backward(weights);
  };
  CHECK(max_param_rel_err(params, loss, grad) < 1e-4);
  CHECK(max_input_rel_err(x, dx, loss) < 1e-4);
}

TEST_CASE("multi-head attention gradients match finite differences") {
  Rng rng = Rng::derive(51, 0);
  MultiHeadSelfAttention attn("attn", 6, 2);
  attn.init(rng, 0.5);
  Eigen::MatrixXd x = random_matrix(4, 6, 52);
  const Eigen::MatrixXd weights = random_matrix(4, 6, 53);
  std::vector<Tensor*> params;
  attn.collect(params);
  auto loss = [&] { return attn.forward(x).cwiseProduct(weights).sum(); };
  Eigen::MatrixXd dx;
  auto grad = [&] {
    attn.forward(x);
    dx = attn.backward(weights);
  };
  CHECK(max_param_rel_err(params, loss, grad) < 1e-4);
  CHECK(max_input_rel_err(x, dx, loss) < 1e-4);
}

TEST_CASE("transformer layer gradients match finite differences") {
  EncoderConfig config;
  config.vocab_size = 11;
  config.dim = 6;
  config.layers = 1;
  config.heads = 2;
  config.ffn_mult = 2;
  config.max_len = 8;
  Rng rng = Rng::derive(61, 0);
  TransformerLayer layer("block", config);
  layer.init(rng, 0.4);
  Eigen::MatrixXd x = random_matrix(3, 6, 62);
  const Eigen::MatrixXd weights = random_matrix(3, 6, 63);
  std::vector<Tensor*> params;
  layer.collect(params);
  auto loss = [&] { return layer.forward(x).cwiseProduct(weights).sum(); };
  Eigen::MatrixXd dx;
  auto grad = [&] {
    layer.forward(x);
    dx = layer.backward(weights);
  };
  CHECK(max_param_rel_err(params, loss, grad) < 1e-4);
  CHECK(max_input_rel_err(x, dx, loss) < 1e-4);
}

TEST_CASE("encoder with MLM head: end-to-end gradient check on a CE loss") {
  EncoderConfig config;
  config.vocab_size = 11;
  config.dim = 6;
  config.layers = 2;
  config.heads = 2;
  config.ffn_mult = 2;
  config.max_len = 16;
  TransformerEncoderModel encoder(config);
  encoder.init(71, 0.3);
  MlmHead head(config.dim, config.vocab_size);
  head.init(72, 0.3);

  const std::vector<int> ids = {4, 1, 7, 1, 9};
  const std::vector<int> positions = {1, 3};
  const std::vector<int> targets = {5, 8};

  auto ce = [&](const Eigen::MatrixXd& logits) {
    double total = 0.0;
    for (std::size_t m = 0; m < positions.size(); ++m) {
      const Eigen::MatrixXd p = row_softmax(logits.row(positions[m]));
      total -= std::log(p(0, targets[m]));
    }
    return total / static_cast<double>(positions.size());
  };
  auto loss = [&] { return ce(head.forward(encoder.forward(ids))); };
  auto grad = [&] {
    const Eigen::MatrixXd logits = head.forward(encoder.forward(ids));
    Eigen::MatrixXd d_logits =
        Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
    const double inv = 1.0 / static_cast<double>(positions.size());
    for (std::size_t m = 0; m < positions.size(); ++m) {
      const Eigen::MatrixXd p = row_softmax(logits.row(positions[m]));
      d_logits.row(positions[m]) = p * inv;
      d_logits(positions[m], targets[m]) -= inv;
    }
    encoder.backward(head.backward(d_logits));
  };

  std::vector<Tensor*> params = encoder.parameters();
  for (Tensor* t : head.parameters()) params.push_back(t);
  CHECK(max_param_rel_err(params, loss, grad) < 1e-3);
}

TEST_CASE("encoder rejects bad input") {
  EncoderConfig config;
  config.vocab_size = 10;
  config.dim = 4;
  config.layers = 1;
  config.heads = 2;
  config.ffn_mult = 2;
  config.max_len = 4;
  TransformerEncoderModel encoder(config);
  encoder.init(5);
  CHECK_THROWS_AS(encoder.forward({}), DataError);
  CHECK_THROWS_AS(encoder.forward({1, 2, 3, 4, 5}), DataError);  // too long
  CHECK_THROWS_AS(encoder.forward({1, 10}), DataError);  // id out of range
  CHECK_THROWS_AS(encoder.forward({-1}), DataError);

  EncoderConfig bad = config;
  bad.heads = 3;  // does not divide dim
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder initialization is a pure function of the seed") {
  EncoderConfig config;
  config.vocab_size = 13;
  config.dim = 8;
  config.layers = 2;
  config.heads = 2;
  config.ffn_mult = 2;
  config.max_len = 12;
  TransformerEncoderModel a(config), b(config), c(config);
  a.init(99);
  b.init(99);
  c.init(100);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool identical = true, all_same_as_c = true;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) identical = false;
    if (pa[i]->value != pc[i]->value) all_same_as_c = false;
  }
  CHECK(identical);
  CHECK_FALSE(all_same_as_c);
  CHECK(a.parameter_total() == parameter_count(pa));
}

TEST_CASE("adamw drives a quadratic to its minimum") {
  Tensor p("p", 3, 2);
  Rng rng = Rng::derive(81, 0);
  init_normal(p, rng, 2.0);
  const Eigen::MatrixXd target = random_matrix(3, 2, 82);
  AdamW::Options options;
  options.lr = 0.05;
  options.weight_decay = 0.0;
  AdamW opt({&p}, options);
  for (int step = 0; step < 800; ++step) {
    p.grad = 2.0 * (p.value - target);
    opt.step();
  }
  CHECK((p.value - target).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(opt.step_count() == 800);
}

TEST_CASE("adamw weight decay is decoupled from the gradient") {
  Tensor p("p", 2, 2);
  p.value.setConstant(1.0);
  AdamW::Options options;
  options.lr = 0.1;
  options.weight_decay = 0.5;
  AdamW opt({&p}, options);
  // Zero gradient: the update must reduce to pure multiplicative decay.
  p.zero_grad();
  opt.step();
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-12));
  opt.step();
  CHECK(p.value(1, 1) ==
        doctest::Approx((1.0 - 0.1 * 0.5) * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("checkpoints restore tensor values bit-exactly") {
  Tensor a("a", 3, 4), b("b", 2, 2);
  Rng rng = Rng::derive(91, 0);
  init_normal(a, rng, 1.0);
  init_normal(b, rng, 1.0);
  // Include values that stress formatting-based serialization.
  a.value(0, 0) = 1.0 / 3.0;
  a.value(0, 1) = 1e-300;
  b.value(0, 0) = -0.0;

  const auto path = temp_path("nerguide_ckpt_test.bin");
  nlohmann::json meta;
  meta["purpose"] = "unit-test";
  meta["step"] = 7;
  save_checkpoint(path, meta, {&a, &b});

  Tensor a2("a", 3, 4), b2("b", 2, 2);
  const nlohmann::json loaded = load_checkpoint(path, {&a2, &b2});
  CHECK(loaded["purpose"] == "unit-test");
  CHECK(loaded["step"] == 7);
  CHECK(std::memcmp(a.value.data(), a2.value.data(),
                    sizeof(double) * a.value.size()) == 0);
  CHECK(std::memcmp(b.value.data(), b2.value.data(),
                    sizeof(double) * b.value.size()) == 0);

  const nlohmann::json peeked = peek_checkpoint(path);
  CHECK(peeked["step"] == 7);

  Tensor wrong("a", 4, 3);
  CHECK_THROWS_AS(load_checkpoint(path, {&wrong, &b2}), DataError);
  Tensor extra("c", 1, 1);
  CHECK_THROWS_AS(load_checkpoint(path, {&a2, &b2, &extra}), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects non-checkpoint files") {
  const auto path = temp_path("nerguide_ckpt_garbage.bin");
  {
    std::ofstream out(path);
    out << "this is not a checkpoint\n";
  }
  Tensor t("t", 1, 1);
  CHECK_THROWS_AS(load_checkpoint(path, {&t}), DataError);
  CHECK_THROWS_AS(peek_checkpoint(path), DataError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(peek_checkpoint(path), DataError);  // missing file
}

TEST_CASE("mlm pretraining reduces the masked cross-entropy") {
  testsupport::ToyCorpusOptions corpus_options;
  corpus_options.sentences = 150;
  corpus_options.seed = 3;
  const corpus::AnnotatedDataset data =
      testsupport::make_toy_corpus(corpus_options);
  const Vocab vocab(testsupport::toy_vocabulary());

  std::vector<std::vector<int>> encoded;
  for (const auto& sentence : data.sentences) {
    encoded.push_back(vocab.encode(sentence.tokens));
  }

  EncoderConfig config;
  config.vocab_size = vocab.size();
  config.dim = 16;
  config.layers = 1;
  config.heads = 2;
  config.ffn_mult = 2;
  config.max_len = 32;
  TransformerEncoderModel encoder(config);
  encoder.init(17);
  MlmHead head(config.dim, config.vocab_size);
  head.init(18);

  MlmConfig mlm;
  mlm.steps = 150;
  mlm.batch_size = 4;
  mlm.lr = 2e-3;
  mlm.seed = 19;
  const MlmReport report = mlm_pretrain(encoder, head, vocab, encoded, mlm);
  REQUIRE(report.step_losses.size() == 150);
  const double before = report.head_mean(20);
  const double after = report.tail_mean(20);
  CHECK(after < before);
  // Should comfortably beat the uniform-guess baseline by the end.
  CHECK(after < std::log(static_cast<double>(vocab.size())));

  // Bitwise-deterministic given identical seeds.
  TransformerEncoderModel encoder2(config);
  encoder2.init(17);
  MlmHead head2(config.dim, config.vocab_size);
  head2.init(18);
  const MlmReport rerun = mlm_pretrain(encoder2, head2, vocab, encoded, mlm);
  CHECK(report.step_losses == rerun.step_losses);
}

TEST_CASE("mlm config validation") {
  MlmConfig bad;
  bad.mask_prob = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = MlmConfig{};
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = MlmConfig{};
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
