#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "nerguide/common.hpp"
#include "nerguide/demonstrations.hpp"
#include "nerguide/verbalizer.hpp"
#include "support/toy_corpus.hpp"

using namespace nerguide;
using namespace nerguide::demos;

namespace {

corpus::Sentence sentence_of(int id, std::vector<std::string> tokens) {
  corpus::Sentence s;
  s.id = id;
  s.tokens = std::move(tokens);
  return s;
}

// Tiny hand-built guidance set used across the formatting tests.
corpus::AnnotatedDataset small_guidance() {
  corpus::AnnotatedDataset data;
  data.flavor = corpus::DatasetFlavor::Guidance;
  data.class_set = {"LOC", "ORG"};

  data.sentences.push_back(
      sentence_of(0, {"we", "visited", "San", "Jose", "today"}));
  corpus::LabelSequence l0;
  l0.tags = {corpus::BioTag::o(), corpus::BioTag::o(),
             corpus::BioTag::b("LOC"), corpus::BioTag::i("LOC"),
             corpus::BioTag::o()};
  data.labels.push_back(l0);

  data.sentences.push_back(
      sentence_of(1, {"Paris", "hosted", "IBM", "last", "year"}));
  corpus::LabelSequence l1;
  l1.tags = {corpus::BioTag::b("LOC"), corpus::BioTag::o(),
             corpus::BioTag::b("ORG"), corpus::BioTag::o(),
             corpus::BioTag::o()};
  data.labels.push_back(l1);

  data.sentences.push_back(sentence_of(2, {"nothing", "notable", "here"}));
  corpus::LabelSequence l2;
  l2.tags = {corpus::BioTag::o(), corpus::BioTag::o(), corpus::BioTag::o()};
  data.labels.push_back(l2);

  data.validate();
  return data;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("hashed bag-of-words embedder is deterministic") {
  HashedBowEmbedder embedder(64);
  const auto s = sentence_of(0, {"the", "cat", "sat"});
  const Eigen::VectorXd a = embedder.embed(s);
  const Eigen::VectorXd b = embedder.embed(s);
  CHECK(a == b);
  CHECK(a.size() == 64);
  CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-6));

  // A second instance with the same dimension agrees exactly.
  HashedBowEmbedder again(64);
  CHECK(again.embed(s) == a);
  CHECK(embedder.model_id() == again.model_id());

  // Different sentences produce different vectors.
  const Eigen::VectorXd c = embedder.embed(sentence_of(1, {"dogs", "bark"}));
  CHECK(a != c);
}

TEST_CASE("embedded vectors are unit length for non-empty sentences") {
  HashedBowEmbedder embedder(128);
  const Eigen::VectorXd v =
      embedder.embed(sentence_of(0, {"alpha", "beta", "gamma", "alpha"}));
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("retrieval ranks an exact duplicate first") {
  const auto guidance = small_guidance();
  HashedBowEmbedder embedder;
  GuidanceIndex index(guidance, embedder);

  const auto query = guidance.sentences[1];
  const std::vector<int> top = index.retrieve(query, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0] == 1);

  // k larger than the guidance set returns everything.
  CHECK(index.retrieve(query, 10).size() == guidance.sentences.size());
}

TEST_CASE("retrieval ordering matches a brute-force cosine sort") {
  testsupport::ToyCorpusOptions options;
  options.sentences = 40;
  options.seed = 91;
  const auto guidance = testsupport::make_toy_corpus(options);
  HashedBowEmbedder embedder;
  GuidanceIndex index(guidance, embedder);

  // The index rows are the (re-normalized) embedder outputs.
  for (std::size_t i = 0; i < guidance.sentences.size(); ++i) {
    const Eigen::VectorXd e = embedder.embed(guidance.sentences[i]);
    CHECK((index.embeddings().row(static_cast<Eigen::Index>(i)) -
           e.transpose())
              .norm() < 1e-12);
  }

  const auto query =
      sentence_of(999, {"yesterday", "Alda", "Ashgrove", "visited", "a",
                        "festival"});
  const std::vector<int> got = index.retrieve(query, 40);

  Eigen::VectorXd q = embedder.embed(query);
  if (q.norm() > 0.0) q /= q.norm();
  const Eigen::VectorXd scores = index.embeddings() * q;
  std::vector<int> expected(guidance.sentences.size());
  std::iota(expected.begin(), expected.end(), 0);
  std::sort(expected.begin(), expected.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return guidance.sentences[a].id < guidance.sentences[b].id;
  });
  CHECK(got == expected);

  // Cosine sanity on the winner: it scores at least as high as everyone
  // else by the independent formula too.
  const double best = cosine(embedder.embed(query),
                             embedder.embed(guidance.sentences[got[0]]));
  for (std::size_t i = 0; i < guidance.sentences.size(); ++i) {
    CHECK(best >= cosine(embedder.embed(query),
                         embedder.embed(guidance.sentences[i])) -
                      1e-9);
  }
}

TEST_CASE("retrieval ties break toward the smaller sentence id") {
  corpus::AnnotatedDataset guidance;
  guidance.flavor = corpus::DatasetFlavor::Guidance;
  guidance.class_set = {};
  // Two identical sentences with different ids, deliberately out of order.
  guidance.sentences.push_back(sentence_of(7, {"same", "words"}));
  guidance.sentences.push_back(sentence_of(3, {"same", "words"}));
  corpus::LabelSequence empty2;
  empty2.tags = {corpus::BioTag::o(), corpus::BioTag::o()};
  guidance.labels = {empty2, empty2};

  HashedBowEmbedder embedder;
  GuidanceIndex index(guidance, embedder);
  const auto top = index.retrieve(sentence_of(0, {"same", "words"}), 2);
  REQUIRE(top.size() == 2);
  CHECK(guidance.sentences[top[0]].id == 3);
  CHECK(guidance.sentences[top[1]].id == 7);
}

TEST_CASE("retrieval rejects bad arguments") {
  corpus::AnnotatedDataset empty;
  HashedBowEmbedder embedder;
  GuidanceIndex index(empty, embedder);
  CHECK_THROWS_AS(index.retrieve(sentence_of(0, {"x"}), 1), DataError);

  const auto guidance = small_guidance();
  GuidanceIndex filled(guidance, embedder);
  CHECK_THROWS_AS(filled.retrieve(sentence_of(0, {"x"}), 0), ConfigError);
}

TEST_CASE("format_demo renders the documented clause shape") {
  const auto guidance = small_guidance();
  const auto verbalizer = corpus::Verbalizer::defaults();

  const Demonstration san_jose = format_demo(guidance, {0}, verbalizer);
  CHECK(san_jose.text() == "[SEP] San Jose is a location");
  CHECK(san_jose.source_ids == std::vector<int>{0});

  const Demonstration both = format_demo(guidance, {1}, verbalizer);
  CHECK(both.text() == "[SEP] Paris is a location . IBM is a organization");

  const Demonstration nothing = format_demo(guidance, {2}, verbalizer);
  CHECK(nothing.empty());
  CHECK(nothing.tokens().empty());
  CHECK(nothing.text().empty());

  // Retrieval order first, then entity order within a sentence.
  const Demonstration multi = format_demo(guidance, {1, 0}, verbalizer);
  CHECK(multi.text() ==
        "[SEP] Paris is a location . IBM is a organization . San Jose is a "
        "location");

  CHECK_THROWS_AS(format_demo(guidance, {5}, verbalizer), DataError);
}

TEST_CASE("rendered clauses parse back to surface and verbalized class") {
  corpus::AnnotatedDataset guidance;
  guidance.flavor = corpus::DatasetFlavor::Guidance;
  guidance.class_set = {"LOC", "WORK_OF_ART"};
  guidance.sentences.push_back(
      sentence_of(0, {"read", "Moby", "Dick", "in", "Boston"}));
  corpus::LabelSequence labels;
  labels.tags = {corpus::BioTag::o(), corpus::BioTag::b("WORK_OF_ART"),
                 corpus::BioTag::i("WORK_OF_ART"), corpus::BioTag::o(),
                 corpus::BioTag::b("LOC")};
  guidance.labels.push_back(labels);
  guidance.validate();

  const auto verbalizer = corpus::Verbalizer::defaults();
  const Demonstration demo = format_demo(guidance, {0}, verbalizer);
  CHECK(demo.text() ==
        "[SEP] Moby Dick is a work of art . Boston is a location");

  // The clause pattern "<surface> is a <verbalized>" recovers both parts.
  for (const DemoClause& clause : demo.clauses) {
    std::vector<std::string> tokens = clause.tokens;
    auto it = std::find(tokens.begin(), tokens.end(), "is");
    REQUIRE(it != tokens.end());
    std::string surface;
    for (auto t = tokens.begin(); t != it; ++t) {
      if (!surface.empty()) surface += ' ';
      surface += *t;
    }
    std::string verbalized;
    for (auto t = it + 2; t != tokens.end(); ++t) {
      if (!verbalized.empty()) verbalized += ' ';
      verbalized += *t;
    }
    CHECK(surface == clause.surface);
    CHECK(verbalized == clause.verbalized);
  }
}

TEST_CASE("tokens_limited drops clauses from the end to fit a budget") {
  const auto guidance = small_guidance();
  const auto verbalizer = corpus::Verbalizer::defaults();
  const Demonstration demo = format_demo(guidance, {1, 0}, verbalizer);
  REQUIRE(demo.clauses.size() == 3);

  const auto full = demo.tokens();
  CHECK(demo.tokens_limited(full.size()) == full);
  CHECK(demo.tokens_limited(1000) == full);

  // One token short of the full rendering drops the last clause.
  const auto trimmed = demo.tokens_limited(full.size() - 1);
  Demonstration two;
  two.clauses = {demo.clauses[0], demo.clauses[1]};
  CHECK(trimmed == two.tokens());

  // Too small for even the first clause: nothing at all.
  CHECK(demo.tokens_limited(3).empty());
  CHECK(demo.tokens_limited(0).empty());

  // Exactly the first clause plus separator.
  Demonstration one;
  one.clauses = {demo.clauses[0]};
  CHECK(demo.tokens_limited(one.tokens().size()) == one.tokens());
}

TEST_CASE("dataset content hash tracks tokens and tags") {
  const auto a = small_guidance();
  auto b = small_guidance();
  CHECK(dataset_content_hash(a) == dataset_content_hash(b));

  b.labels[1].tags[0] = corpus::BioTag::b("ORG");
  CHECK(dataset_content_hash(a) != dataset_content_hash(b));

  auto c = small_guidance();
  c.sentences[0].tokens[0] = "they";
  CHECK(dataset_content_hash(a) != dataset_content_hash(c));
}

TEST_CASE("embedding cache round-trips and invalidates correctly") {
  const auto guidance = small_guidance();
  HashedBowEmbedder embedder;
  const auto cache = temp_path("nerguide_demo_cache.bin");
  std::filesystem::remove(cache);

  GuidanceIndex first(guidance, embedder, cache);
  CHECK_FALSE(first.loaded_from_cache());
  REQUIRE(std::filesystem::exists(cache));

  GuidanceIndex second(guidance, embedder, cache);
  CHECK(second.loaded_from_cache());
  CHECK(first.embeddings() == second.embeddings());
  CHECK(second.retrieve(guidance.sentences[0], 2) ==
        first.retrieve(guidance.sentences[0], 2));

  // Changing the dataset invalidates the cache.
  auto altered = guidance;
  altered.sentences[0].tokens[0] = "they";
  GuidanceIndex third(altered, embedder, cache);
  CHECK_FALSE(third.loaded_from_cache());

  // Changing the embedder invalidates it again.
  HashedBowEmbedder wider(1024);
  GuidanceIndex fourth(altered, wider, cache);
  CHECK_FALSE(fourth.loaded_from_cache());

  // A truncated cache file is rebuilt rather than trusted.
  {
    std::ofstream out(cache, std::ios::binary | std::ios::trunc);
    out << "{\"magic\":\"ngdemocache1\"}\n";
  }
  GuidanceIndex fifth(altered, wider, cache);
  CHECK_FALSE(fifth.loaded_from_cache());
  GuidanceIndex sixth(altered, wider, cache);
  CHECK(sixth.loaded_from_cache());
  std::filesystem::remove(cache);
}

TEST_CASE("demo_for combines retrieval and formatting") {
  const auto guidance = small_guidance();
  HashedBowEmbedder embedder;
  GuidanceIndex index(guidance, embedder);
  const auto verbalizer = corpus::Verbalizer::defaults();

  const Demonstration demo =
      index.demo_for(guidance.sentences[0], 1, verbalizer);
  CHECK(demo.text() == "[SEP] San Jose is a location");
}
