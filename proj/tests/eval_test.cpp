#include "nerguide/eval.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "nerguide/common.hpp"
#include "nerguide/corpus.hpp"
#include "nerguide/corpus_io.hpp"
#include "nerguide/noise_lab.hpp"
#include "nerguide/rng.hpp"
#include "support/toy_corpus.hpp"

using namespace nerguide;
using namespace nerguide::corpus;
using namespace nerguide::eval;

namespace {

LabelSequence tags(std::initializer_list<const char*> strs) {
  LabelSequence seq;
  for (const char* s : strs) seq.tags.push_back(BioTag::parse(s));
  return seq;
}

AnnotatedDataset single_sentence(std::vector<std::string> tokens,
                                 LabelSequence labels,
                                 DatasetFlavor flavor = DatasetFlavor::Gold) {
  AnnotatedDataset d;
  d.flavor = flavor;
  Sentence s;
  s.id = 0;
  s.tokens = std::move(tokens);
  d.sentences.push_back(std::move(s));
  d.class_set = collect_classes({labels});
  d.labels.push_back(std::move(labels));
  return d;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("perfect prediction scores one everywhere") {
  testsupport::ToyCorpusOptions options;
  options.sentences = 40;
  auto gold = testsupport::make_toy_corpus(options);
  EvalResult r = evaluate(gold, gold);
  CHECK(r.micro.precision() == doctest::Approx(1.0));
  CHECK(r.micro.recall() == doctest::Approx(1.0));
  CHECK(r.micro.f1() == doctest::Approx(1.0));
  CHECK(r.micro.fp == 0);
  CHECK(r.micro.fn == 0);
  for (const auto& [cls, counts] : r.per_class) {
    CHECK(counts.fp == 0);
    CHECK(counts.fn == 0);
  }
}

TEST_CASE("one exact match and one spurious entity halve the scores") {
  auto gold = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "B-LOC", "O"}));
  // Prediction keeps the PER, misses the LOC, invents an entity on "today".
  auto pred = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "O", "B-LOC"}),
                              DatasetFlavor::Noisy);
  EvalResult r = evaluate(pred, gold);
  CHECK(r.micro.tp == 1);
  CHECK(r.micro.fp == 1);
  CHECK(r.micro.fn == 1);
  CHECK(r.micro.precision() == doctest::Approx(0.5));
  CHECK(r.micro.recall() == doctest::Approx(0.5));
  CHECK(r.micro.f1() == doctest::Approx(0.5));
}

TEST_CASE("empty prediction hits the zero-denominator convention") {
  auto gold = single_sentence({"Alda", "visited", "Virelia"},
                              tags({"B-PER", "O", "B-LOC"}));
  auto pred = single_sentence({"Alda", "visited", "Virelia"},
                              tags({"O", "O", "O"}), DatasetFlavor::Noisy);
  EvalResult r = evaluate(pred, gold);
  CHECK(r.micro.precision() == 0.0);
  CHECK(r.micro.recall() == 0.0);
  CHECK(r.micro.f1() == 0.0);
}

TEST_CASE("span or class mismatches earn no partial credit") {
  auto gold = single_sentence({"Acme", "Industries", "hired", "Boric"},
                              tags({"B-ORG", "I-ORG", "O", "B-PER"}));
  auto shrunk = single_sentence({"Acme", "Industries", "hired", "Boric"},
                                tags({"B-ORG", "O", "O", "B-PER"}),
                                DatasetFlavor::Noisy);
  EvalResult r1 = evaluate(shrunk, gold);
  CHECK(r1.micro.tp == 1);  // only Boric
  CHECK(r1.micro.fp == 1);
  CHECK(r1.micro.fn == 1);

  auto flipped = single_sentence({"Acme", "Industries", "hired", "Boric"},
                                 tags({"B-LOC", "I-LOC", "O", "B-PER"}),
                                 DatasetFlavor::Noisy);
  EvalResult r2 = evaluate(flipped, gold);
  CHECK(r2.micro.tp == 1);
  CHECK(r2.micro.fp == 1);
  CHECK(r2.micro.fn == 1);
  CHECK(r2.per_class.at("LOC").fp == 1);
  CHECK(r2.per_class.at("ORG").fn == 1);
}

TEST_CASE("swapping prediction and gold swaps precision and recall") {
  Rng rng(61);
  testsupport::ToyCorpusOptions options;
  options.sentences = 25;
  for (int trial = 0; trial < 100; ++trial) {
    options.seed = 100 + static_cast<std::uint64_t>(trial);
    auto gold = testsupport::make_toy_corpus(options);
    noise::NoiseSpec spec;
    spec.span_rate = 0.4;
    spec.category_rate = 0.0;
    spec.seed = rng.next_u64();
    auto [noisy, manifest] = noise::inject_span_noise(gold, spec);

    EvalResult forward = evaluate(noisy, gold);
    AnnotatedDataset gold_as_pred = gold;
    gold_as_pred.flavor = DatasetFlavor::Noisy;
    AnnotatedDataset noisy_as_gold = noisy;
    noisy_as_gold.flavor = DatasetFlavor::Gold;
    EvalResult backward = evaluate(gold_as_pred, noisy_as_gold);
    CHECK(forward.micro.precision() == backward.micro.recall());
    CHECK(forward.micro.recall() == backward.micro.precision());
    CHECK(forward.micro.f1() == doctest::Approx(backward.micro.f1()));

    // Per-class true positives sum to the micro count.
    long tp_sum = 0;
    for (const auto& [cls, counts] : forward.per_class) tp_sum += counts.tp;
    CHECK(tp_sum == forward.micro.tp);
  }
}

TEST_CASE("evaluate rejects misaligned datasets") {
  auto gold = single_sentence({"a", "b"}, tags({"O", "O"}));
  auto pred = single_sentence({"a", "c"}, tags({"O", "O"}),
                              DatasetFlavor::Noisy);
  CHECK_THROWS_AS(evaluate(pred, gold), DataError);
}

TEST_CASE("eval result exports to json and csv consistently") {
  auto gold = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "B-LOC", "O"}));
  auto pred = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "O", "B-LOC"}),
                              DatasetFlavor::Noisy);
  EvalResult r = evaluate(pred, gold);
  auto j = eval_to_json(r);
  CHECK(j["micro"]["tp"] == 1);
  CHECK(j["micro"]["precision"] == 0.5);
  CHECK(j["per_class"]["PER"]["tp"] == 1);

  std::string csv = eval_to_csv(r);
  auto lines = csv_lines(csv);
  REQUIRE(lines.size() == 4);  // header + LOC + PER + micro
  CHECK(lines[0] == "class,tp,fp,fn,precision,recall,f1");
  CHECK(lines[3].substr(0, 6) == "micro,");
  // Re-parse the micro row to the exact values.
  std::istringstream micro_row(lines[3].substr(6));
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(micro_row, field, ',')) fields.push_back(field);
  REQUIRE(fields.size() == 6);
  CHECK(std::stod(fields[3]) == r.micro.precision());
  CHECK(std::stod(fields[4]) == r.micro.recall());
  CHECK(std::stod(fields[5]) == r.micro.f1());
}

TEST_CASE("compare sorts runs by f1 descending") {
  auto gold = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "B-LOC", "O"}));
  auto half = single_sentence({"Alda", "went", "to", "Virelia", "today"},
                              tags({"B-PER", "O", "O", "O", "B-LOC"}),
                              DatasetFlavor::Noisy);
  EvalResult perfect = evaluate(gold, gold);
  EvalResult halved = evaluate(half, gold);

  ComparisonTable table = compare({{"noisy", halved}, {"clean", perfect}});
  auto lines = csv_lines(table.csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "run,precision,recall,f1");
  CHECK(lines[1].substr(0, 6) == "clean,");  // higher f1 first
  CHECK(lines[2].substr(0, 6) == "noisy,");
  CHECK(table.text.find("clean") < table.text.find("noisy"));

  ComparisonTable single = compare({{"only", perfect}});
  CHECK(csv_lines(single.csv).size() == 2);

  CHECK_THROWS_AS(compare({}), DataError);
}

TEST_CASE("trend plot writes svg and an exact csv sidecar") {
  namespace fs = std::filesystem;
  const fs::path svg = fs::temp_directory_path() / "trend_test.svg";
  const fs::path csv = csv_sidecar_path(svg);

  std::vector<double> xs = {0.2, 0.4, 0.6};
  TrendSeries ours{"pipeline", {0.9, 0.85, 0.8}, {0.01, 0.02, 0.01}};
  TrendSeries base{"baseline", {0.8, 0.6, 0.45}, {0.02, 0.03, 0.05}};
  plot_trend(xs, {ours, base}, svg);

  REQUIRE(fs::exists(svg));
  REQUIRE(fs::exists(csv));
  std::ifstream svg_in(svg);
  std::stringstream svg_text;
  svg_text << svg_in.rdbuf();
  CHECK(svg_text.str().find("<svg") != std::string::npos);
  CHECK(svg_text.str().find("polyline") != std::string::npos);
  CHECK(svg_text.str().find("pipeline") != std::string::npos);
  CHECK(svg_text.str().find("baseline") != std::string::npos);

  std::ifstream csv_in(csv);
  std::stringstream csv_text;
  csv_text << csv_in.rdbuf();
  auto lines = csv_lines(csv_text.str());
  REQUIRE(lines.size() == 7);  // header + 2 series x 3 points
  CHECK(lines[0] == "series,x,value,stddev");
  CHECK(lines[1].substr(0, 9) == "pipeline,");

  // Values re-parse exactly.
  std::istringstream row(lines[4]);
  std::string series_name, x_s, v_s, sd_s;
  std::getline(row, series_name, ',');
  std::getline(row, x_s, ',');
  std::getline(row, v_s, ',');
  std::getline(row, sd_s, ',');
  CHECK(series_name == "baseline");
  CHECK(std::stod(x_s) == 0.2);
  CHECK(std::stod(v_s) == 0.8);
  CHECK(std::stod(sd_s) == 0.02);

  fs::remove(svg);
  fs::remove(csv);
}

TEST_CASE("degenerate single-point plot still renders") {
  namespace fs = std::filesystem;
  const fs::path svg = fs::temp_directory_path() / "trend_single.svg";
  plot_trend({50.0}, {TrendSeries{"runs", {0.7}, {}}}, svg);
  CHECK(fs::exists(svg));
  fs::remove(svg);
  fs::remove(csv_sidecar_path(svg));
}

TEST_CASE("trend plot rejects ragged series") {
  TrendSeries short_series{"s", {0.5}, {}};
  CHECK_THROWS_AS(plot_trend({0.1, 0.2}, {short_series},
                             std::filesystem::temp_directory_path() /
                                 "never_written.svg"),
                  DataError);
}

TEST_CASE("heatmap renders every cell with its count") {
  namespace fs = std::filesystem;
  auto gold = single_sentence({"a", "b"}, tags({"B-LOC", "O"}));
  auto noisy = single_sentence({"a", "b"}, tags({"B-ORG", "O"}),
                               DatasetFlavor::Noisy);
  noise::ConfusionMatrix m = noise::confusion_matrix(noisy, gold, false);
  const fs::path svg = fs::temp_directory_path() / "heatmap_test.svg";
  plot_heatmap(m, svg);
  std::ifstream in(svg);
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str().find("B-LOC") != std::string::npos);
  CHECK(text.str().find("B-ORG") != std::string::npos);
  CHECK(text.str().find("ground-truth label") != std::string::npos);
  fs::remove(svg);
}
