#include "nerguide/cli.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <CLI11.hpp>

#include "nerguide/common.hpp"
#include "nerguide/corpus_io.hpp"
#include "nerguide/demonstrations.hpp"
#include "nerguide/discriminator.hpp"
#include "nerguide/encoder.hpp"
#include "nerguide/eval.hpp"
#include "nerguide/ner.hpp"
#include "nerguide/nn/mlm.hpp"

namespace fs = std::filesystem;

namespace nerguide::cli {
namespace {

std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])))
    ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1])))
    --end;
  return text.substr(begin, end - begin);
}

std::string full_precision(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

double parse_double_value(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text +
                      "' as a number");
  }
}

int parse_int_value(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    if (v < std::numeric_limits<int>::min() ||
        v > std::numeric_limits<int>::max())
      throw std::out_of_range(text);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text +
                      "' as an integer");
  }
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& text) {
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
    std::size_t pos = 0;
    unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text +
                      "' as a non-negative integer");
  }
}

bool parse_bool_value(const std::string& key, const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  if (lower == "true" || lower == "yes" || lower == "1") return true;
  if (lower == "false" || lower == "no" || lower == "0") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + text +
                    "' as a boolean (use true/false)");
}

// Typed access over a parsed KvConfig that records which keys were read, so
// anything left over can be reported as a typo.
class Reader {
 public:
  explicit Reader(const KvConfig& kv) : kv_(kv) {}

  std::string get_string(const std::string& key, std::string fallback) {
    const std::string* raw = lookup(key);
    return raw ? *raw : std::move(fallback);
  }
  double get_double(const std::string& key, double fallback) {
    const std::string* raw = lookup(key);
    return raw ? parse_double_value(key, *raw) : fallback;
  }
  int get_int(const std::string& key, int fallback) {
    const std::string* raw = lookup(key);
    return raw ? parse_int_value(key, *raw) : fallback;
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const std::string* raw = lookup(key);
    return raw ? parse_u64_value(key, *raw) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) {
    const std::string* raw = lookup(key);
    return raw ? parse_bool_value(key, *raw) : fallback;
  }

  // Every key that was never requested is unknown by definition.
  void finish() const {
    for (const auto& [key, value] : kv_.values)
      if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

 private:
  const std::string* lookup(const std::string& key) {
    used_.insert(key);
    auto it = kv_.values.find(key);
    return it == kv_.values.end() ? nullptr : &it->second;
  }

  const KvConfig& kv_;
  std::set<std::string> used_;
};

void read_encoder_shape(Reader& reader, const std::string& prefix,
                        nn::EncoderConfig& shape) {
  shape.dim = reader.get_int(prefix + "dim", shape.dim);
  shape.layers = reader.get_int(prefix + "layers", shape.layers);
  shape.heads = reader.get_int(prefix + "heads", shape.heads);
  shape.ffn_mult = reader.get_int(prefix + "ffn_mult", shape.ffn_mult);
  shape.max_len = reader.get_int(prefix + "max_len", shape.max_len);
}

// The RunConfig invariant: every configured input path must exist before any
// work starts.
void check_referenced_paths(const RunConfig& config) {
  const std::pair<const char*, const fs::path*> inputs[] = {
      {"paths.noisy", &config.noisy_path},
      {"paths.gold", &config.gold_path},
      {"paths.guidance", &config.guidance_path},
      {"paths.verbalizer", &config.verbalizer_path},
  };
  for (const auto& [key, path] : inputs)
    if (!path->empty() && !fs::exists(*path))
      throw ConfigError(std::string(key) + ": path does not exist: " +
                        path->string());
}

corpus::Verbalizer load_verbalizer(const RunConfig& config) {
  if (config.verbalizer_path.empty()) return corpus::Verbalizer::defaults();
  return corpus::Verbalizer::from_file(config.verbalizer_path);
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("failed while writing " + path.string());
}

void write_json_file(const fs::path& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

// Comma-split without quoting rules; none of the formats read here quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

// Guidance resolution shared by training-side commands: an explicit file
// wins; otherwise the guidance set is sampled from the gold corpus. The
// sampled split and the parsed gold corpus are kept so the training corpus
// can be derived from the same objects.
struct GuidanceResolution {
  corpus::AnnotatedDataset guidance;
  std::optional<corpus::GuidanceSplit> split;
  std::optional<corpus::AnnotatedDataset> gold;

  const corpus::AnnotatedDataset& gold_corpus(const RunConfig& config) {
    if (!gold)
      gold = corpus::parse_corpus_file(config.gold_path,
                                       corpus::DatasetFlavor::Gold)
                 .dataset;
    return *gold;
  }
};

GuidanceResolution resolve_guidance(const RunConfig& config) {
  GuidanceResolution result;
  if (!config.guidance_path.empty()) {
    result.guidance = corpus::parse_corpus_file(
                          config.guidance_path, corpus::DatasetFlavor::Guidance)
                          .dataset;
    return result;
  }
  if (config.gold_path.empty())
    throw ConfigError(
        "no guidance source: set paths.guidance, or paths.gold with "
        "guidance.size");
  if (config.guidance_size < 1)
    throw ConfigError("guidance.size must be at least 1");
  result.split = corpus::sample_guidance(result.gold_corpus(config),
                                         config.guidance_size,
                                         config.guidance_seed);
  result.guidance = result.split->guidance;
  return result;
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Errors surface as exceptions; run_cli maps them onto
// exit codes.

int cmd_analyze(const fs::path& noisy_path, const fs::path& gold_path,
                const fs::path& out_dir) {
  const corpus::AnnotatedDataset noisy =
      corpus::parse_corpus_file(noisy_path, corpus::DatasetFlavor::Noisy)
          .dataset;
  const corpus::AnnotatedDataset gold =
      corpus::parse_corpus_file(gold_path, corpus::DatasetFlavor::Gold).dataset;

  const double span_rate = noise::span_mismatch_rate(noisy, gold);
  const double missing_rate = noise::missing_entity_rate(noisy, gold);
  const noise::ConfusionMatrix matrix = noise::confusion_matrix(noisy, gold);

  fs::create_directories(out_dir);
  write_json_file(out_dir / "noise_report.json",
                  {{"span_mismatch_rate", span_rate},
                   {"missing_entity_rate", missing_rate},
                   {"noisy", corpus::dataset_metadata(noisy)},
                   {"gold", corpus::dataset_metadata(gold)}});
  write_text_file(out_dir / "confusion.csv", matrix.to_csv());
  eval::plot_heatmap(matrix, out_dir / "confusion.svg");

  std::cout << "span mismatch rate: " << full_precision(span_rate) << "\n"
            << "missing entity rate: " << full_precision(missing_rate) << "\n"
            << "artifacts: " << out_dir.string() << "\n";
  return 0;
}

int cmd_inject(const fs::path& gold_path, const noise::NoiseSpec& spec,
               const fs::path& out_dir) {
  spec.validate();
  if (spec.span_rate > 0 && spec.category_rate > 0)
    throw ConfigError(
        "inject applies one noise kind per invocation; run it twice to chain "
        "span and category noise");
  const corpus::AnnotatedDataset gold =
      corpus::parse_corpus_file(gold_path, corpus::DatasetFlavor::Gold).dataset;

  auto [noisy, manifest] = spec.category_rate > 0
                               ? noise::inject_category_noise(gold, spec)
                               : noise::inject_span_noise(gold, spec);

  fs::create_directories(out_dir);
  corpus::write_corpus_file(noisy, out_dir / "noisy.txt");
  noise::write_manifest_file(manifest, out_dir / "manifest.jsonl");

  std::cout << "perturbed " << manifest.perturbed_count() << " of "
            << manifest.records.size() << " entities\n"
            << "artifacts: " << out_dir.string() << "\n";
  return 0;
}

int cmd_pretrain_disc(const RunConfig& config) {
  config.train.validate();
  check_referenced_paths(config);
  if (config.out_dir.empty())
    throw ConfigError("pretrain-disc needs an output directory (--out or paths.out)");
  const ResolvedInputs inputs = resolve_inputs(config);
  const corpus::Verbalizer verbalizer = load_verbalizer(config);

  // Standalone artifact, so the vocabulary covers only the guidance corpus
  // plus the scaffolding words prompts can introduce.
  std::set<std::string> words;
  for (const corpus::Sentence& sentence : inputs.guidance.sentences)
    for (const std::string& token : sentence.tokens) words.insert(token);
  for (const std::string& token : encoder_support_tokens(verbalizer))
    words.insert(token);
  nn::Vocab vocab(std::vector<std::string>(words.begin(), words.end()));

  nn::EncoderConfig shape = config.train.disc_encoder;
  shape.vocab_size = vocab.size();
  disc::Discriminator discriminator(vocab, shape, config.train.seed + 2,
                                    verbalizer);

  nlohmann::json report{{"config", config.to_json()}};
  if (config.train.mlm_steps > 0) {
    std::vector<std::vector<std::string>> sentences;
    for (const corpus::Sentence& sentence : inputs.guidance.sentences)
      sentences.push_back(sentence.tokens);
    nn::MlmConfig mlm;
    mlm.steps = config.train.mlm_steps;
    mlm.batch_size = config.train.mlm_batch_size;
    mlm.lr = config.train.mlm_lr;
    mlm.seed = config.train.seed + 5;
    report["mlm_loss"] = discriminator.mlm_warmup(sentences, mlm).final_loss();
  }

  demos::HashedBowEmbedder embedder;
  std::optional<demos::GuidanceIndex> index;
  if (config.train.use_demos) index.emplace(inputs.guidance, embedder);
  demos::DemoProvider provider;
  provider.index = index ? &*index : nullptr;
  provider.k = config.train.demo_k;
  provider.verbalizer = verbalizer;

  disc::DiscTrainConfig disc_config;
  disc_config.epochs = config.train.disc_pretrain_epochs;
  disc_config.batch_size = config.train.disc_batch_size;
  disc_config.lr = config.train.disc_pretrain_lr;
  disc_config.weight_decay = config.train.weight_decay;
  disc_config.seed = config.train.seed + 6;
  const disc::DiscTrainReport trained =
      disc::pretrain(discriminator, inputs.guidance, disc_config, provider);
  report["epoch_losses"] = trained.epoch_losses;
  report["negatives_skipped"] = trained.negatives_skipped;

  fs::create_directories(config.out_dir);
  discriminator.save(config.out_dir / "disc_pretrained.ckpt");
  write_json_file(config.out_dir / "disc_pretrain.json", report);

  std::cout << "pretrained on " << inputs.guidance.sentences.size()
            << " guidance sentences";
  if (!trained.epoch_losses.empty())
    std::cout << "; final epoch loss "
              << full_precision(trained.epoch_losses.back());
  std::cout << "\nartifacts: " << config.out_dir.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, bool dry_run) {
  config.train.validate();
  config.noise.validate();
  check_referenced_paths(config);
  if (dry_run) {
    std::cout << config.to_json().dump(2) << "\n";
    return 0;
  }
  if (config.out_dir.empty())
    throw ConfigError("train needs an output directory (--out or paths.out)");

  const ResolvedInputs inputs = resolve_inputs(config);
  const corpus::Verbalizer verbalizer = load_verbalizer(config);

  const cotrain::PipelineResult result = cotrain::run_pipeline(
      inputs.noisy, inputs.guidance, config.train, config.out_dir, verbalizer);

  // Synthetic runs keep their generated corpus and manifests next to the
  // report, so the exact training data can be reconstructed.
  if (inputs.synthetic) {
    corpus::write_corpus_file(inputs.noisy, config.out_dir / "noisy_used.txt");
    if (!inputs.span_manifest.records.empty())
      noise::write_manifest_file(inputs.span_manifest,
                                 config.out_dir / "span_manifest.jsonl");
    if (!inputs.category_manifest.records.empty())
      noise::write_manifest_file(inputs.category_manifest,
                                 config.out_dir / "category_manifest.jsonl");
  }

  for (const cotrain::StageRecord& stage : result.report.stages)
    std::cout << stage.name
              << " guidance F1: " << full_precision(stage.guidance_f1) << "\n";
  std::cout << "artifacts: " << config.out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& test_path,
             const fs::path& out_dir) {
  ner::NerModel model = ner::NerModel::load(checkpoint);
  const corpus::AnnotatedDataset test =
      corpus::parse_corpus_file(test_path, corpus::DatasetFlavor::Gold).dataset;

  const std::set<std::string> model_classes(model.classes().begin(),
                                            model.classes().end());
  const std::set<std::string> corpus_classes(test.class_set.begin(),
                                             test.class_set.end());
  if (model_classes != corpus_classes) {
    auto join = [](const std::set<std::string>& classes) {
      std::string text;
      for (const std::string& cls : classes) {
        if (!text.empty()) text += ", ";
        text += cls;
      }
      return text.empty() ? std::string("<none>") : text;
    };
    throw DataError("class-set mismatch: checkpoint has {" +
                    join(model_classes) + "} but the corpus has {" +
                    join(corpus_classes) + "}");
  }

  const corpus::AnnotatedDataset pred =
      model.predict_dataset(test.sentences, model.inference);
  const eval::EvalResult result = eval::evaluate(pred, test);

  fs::create_directories(out_dir);
  write_json_file(out_dir / "eval.json", eval::eval_to_json(result));
  write_text_file(out_dir / "eval.csv", eval::eval_to_csv(result));

  std::cout << "micro precision: " << full_precision(result.micro.precision())
            << "\n"
            << "micro recall: " << full_precision(result.micro.recall()) << "\n"
            << "micro f1: " << full_precision(result.micro.f1()) << "\n"
            << "artifacts: " << out_dir.string() << "\n";
  return 0;
}

int cmd_plot(const fs::path& data_path, const fs::path& svg_path) {
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw DataError("cannot open trend data file: " + data_path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line) != "series,x,value,stddev")
    throw DataError(data_path.string() +
                    ": expected header 'series,x,value,stddev'");

  std::vector<eval::TrendSeries> series;
  std::vector<std::vector<double>> xs_per_series;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4)
      throw DataError(data_path.string() + " line " + std::to_string(line_no) +
                      ": expected 4 comma-separated fields");
    const std::string name = fields[0];
    auto number = [&](const std::string& text) {
      try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != trim(text).size() && pos != text.size())
          throw std::invalid_argument(text);
        return v;
      } catch (const std::exception&) {
        throw DataError(data_path.string() + " line " +
                        std::to_string(line_no) + ": cannot parse '" + text +
                        "' as a number");
      }
    };
    std::size_t slot = 0;
    while (slot < series.size() && series[slot].name != name) ++slot;
    if (slot == series.size()) {
      series.push_back({name, {}, {}});
      xs_per_series.emplace_back();
    }
    xs_per_series[slot].push_back(number(fields[1]));
    series[slot].values.push_back(number(fields[2]));
    series[slot].stddev.push_back(number(fields[3]));
  }
  if (series.empty())
    throw DataError(data_path.string() + ": no data rows to plot");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (xs_per_series[i] != xs_per_series[0])
      throw DataError("series '" + series[i].name +
                      "' lists different x values than series '" +
                      series[0].name + "'");

  if (svg_path.has_parent_path()) fs::create_directories(svg_path.parent_path());
  eval::plot_trend(xs_per_series[0], series, svg_path);
  std::cout << "wrote " << svg_path.string() << " (data sidecar: "
            << eval::csv_sidecar_path(svg_path).string() << ")\n";
  return 0;
}

int cmd_score(const fs::path& checkpoint, const fs::path& corpus_path,
              const fs::path& candidates_path, const fs::path& out_csv) {
  disc::Discriminator discriminator = disc::Discriminator::load(checkpoint);
  const corpus::AnnotatedDataset data =
      corpus::parse_corpus_file(corpus_path, corpus::DatasetFlavor::Noisy)
          .dataset;
  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < data.sentences.size(); ++i)
    by_id[data.sentences[i].id] = i;

  std::ifstream in(candidates_path, std::ios::binary);
  if (!in)
    throw DataError("cannot open candidate file: " + candidates_path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "sentence_id,start,end,class")
    throw DataError(candidates_path.string() +
                    ": expected header 'sentence_id,start,end,class'");

  std::ostringstream out;
  out << "sentence_id,start,end,class,span_score,category_score\n";
  int line_no = 1;
  int scored = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4)
      throw DataError(candidates_path.string() + " line " +
                      std::to_string(line_no) +
                      ": expected 4 comma-separated fields");
    const std::string where =
        candidates_path.string() + " line " + std::to_string(line_no);
    const int sentence_id = parse_int_value(where, trim(fields[0]));
    const int start = parse_int_value(where, trim(fields[1]));
    const int end = parse_int_value(where, trim(fields[2]));
    const std::string cls = trim(fields[3]);

    auto it = by_id.find(sentence_id);
    if (it == by_id.end())
      throw DataError(where + ": sentence id " + std::to_string(sentence_id) +
                      " is not in the corpus");
    const corpus::Sentence& sentence = data.sentences[it->second];
    const int tokens = static_cast<int>(sentence.tokens.size());
    if (start < 0 || end <= start || end > tokens)
      throw DataError(where + ": span [" + std::to_string(start) + ", " +
                      std::to_string(end) + ") is out of bounds for a " +
                      std::to_string(tokens) + "-token sentence");

    corpus::Entity entity{sentence_id, start, end,
                          corpus::join_tokens(sentence.tokens, start, end),
                          cls};
    const double span_score = discriminator.score_span(sentence, entity);
    const double category_score =
        discriminator.score_category(sentence, entity, cls);
    out << sentence_id << ',' << start << ',' << end << ',' << cls << ','
        << full_precision(span_score) << ',' << full_precision(category_score)
        << "\n";
    ++scored;
  }

  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_text_file(out_csv, out.str());
  std::cout << "scored " << scored << " candidates -> " << out_csv.string()
            << "\n";
  return 0;
}

// Flags shared by every subcommand, per the interface contract. Commands
// without any randomness accept --seed and ignore it.
struct CommonFlags {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* sub, bool config_required) {
    config_opt = sub->add_option(
        "--config", config_path,
        "Key=value config file supplying defaults for this command");
    if (config_required) config_opt->required();
    out_opt = sub->add_option("--out", out,
                              "Output location (overrides paths.out)");
    seed_opt = sub->add_option(
        "--seed", seed, "Seed override (deterministic commands ignore it)");
  }

  RunConfig load() const {
    return config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
  }
  bool given(const CLI::Option* option) const {
    return option != nullptr && option->count() > 0;
  }
};

fs::path pick_path(const std::string& flag_value, const fs::path& config_value,
                   const std::string& what) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw ConfigError("missing " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config file handling.

KvConfig KvConfig::parse(std::istream& in) {
  KvConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    if (!config.values.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
  }
  return config;
}

KvConfig KvConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

KvConfig KvConfig::parse_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  try {
    return parse(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig RunConfig::from_kv(const KvConfig& kv) {
  Reader reader(kv);
  RunConfig config;
  config.noisy_path = reader.get_string("paths.noisy", "");
  config.gold_path = reader.get_string("paths.gold", "");
  config.guidance_path = reader.get_string("paths.guidance", "");
  config.verbalizer_path = reader.get_string("paths.verbalizer", "");
  config.out_dir = reader.get_string("paths.out", "");

  config.guidance_size = reader.get_int("guidance.size", config.guidance_size);
  config.guidance_seed = reader.get_u64("guidance.seed", config.guidance_seed);

  config.embedder = reader.get_string("encoder.embedder", config.embedder);
  if (config.embedder != "hashed-bow")
    throw ConfigError("encoder.embedder: unknown embedder '" +
                      config.embedder + "' (supported: hashed-bow)");

  config.noise.span_rate =
      reader.get_double("noise.span_rate", config.noise.span_rate);
  config.noise.category_rate =
      reader.get_double("noise.category_rate", config.noise.category_rate);
  config.noise.seed = reader.get_u64("noise.seed", config.noise.seed);

  cotrain::TrainConfig& train = config.train;
  train.ner_lr = reader.get_double("train.ner_lr", train.ner_lr);
  train.batch_size = reader.get_int("train.batch_size", train.batch_size);
  train.weight_decay =
      reader.get_double("train.weight_decay", train.weight_decay);
  train.disc_pretrain_lr =
      reader.get_double("train.disc_pretrain_lr", train.disc_pretrain_lr);
  train.disc_cotrain_lr =
      reader.get_double("train.disc_cotrain_lr", train.disc_cotrain_lr);
  train.disc_batch_size =
      reader.get_int("train.disc_batch_size", train.disc_batch_size);
  train.disc_pretrain_epochs =
      reader.get_int("train.disc_pretrain_epochs", train.disc_pretrain_epochs);
  train.warm_epochs = reader.get_int("train.warm_epochs", train.warm_epochs);
  train.warm_patience =
      reader.get_int("train.warm_patience", train.warm_patience);
  train.stage1_iterations =
      reader.get_int("train.stage1_iterations", train.stage1_iterations);
  train.stage2_rounds =
      reader.get_int("train.stage2_rounds", train.stage2_rounds);
  train.stage3_epochs =
      reader.get_int("train.stage3_epochs", train.stage3_epochs);
  train.mlm_steps = reader.get_int("train.mlm_steps", train.mlm_steps);
  train.mlm_batch_size =
      reader.get_int("train.mlm_batch_size", train.mlm_batch_size);
  train.mlm_lr = reader.get_double("train.mlm_lr", train.mlm_lr);
  train.top_k = reader.get_int("train.top_k", train.top_k);
  train.threshold = reader.get_double("train.threshold", train.threshold);
  train.o_weight = reader.get_double("train.o_weight", train.o_weight);
  train.epsilon = reader.get_double("train.epsilon", train.epsilon);
  train.demo_k = reader.get_int("train.demo_k", train.demo_k);
  train.use_demos = reader.get_bool("train.use_demos", train.use_demos);
  train.seed = reader.get_u64("train.seed", train.seed);

  read_encoder_shape(reader, "encoder.ner.", train.ner_encoder);
  read_encoder_shape(reader, "encoder.disc.", train.disc_encoder);

  reader.finish();
  return config;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_kv(KvConfig::parse_file(path));
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"paths",
       {{"noisy", noisy_path.string()},
        {"gold", gold_path.string()},
        {"guidance", guidance_path.string()},
        {"verbalizer", verbalizer_path.string()},
        {"out", out_dir.string()}}},
      {"guidance", {{"size", guidance_size}, {"seed", guidance_seed}}},
      {"embedder", embedder},
      {"noise",
       {{"span_rate", noise.span_rate},
        {"category_rate", noise.category_rate},
        {"seed", noise.seed}}},
      {"train", train.to_json()}};
}

ResolvedInputs resolve_inputs(const RunConfig& config) {
  config.noise.validate();
  ResolvedInputs inputs;

  std::optional<corpus::AnnotatedDataset> gold;
  auto load_gold = [&]() -> const corpus::AnnotatedDataset& {
    if (!gold)
      gold = corpus::parse_corpus_file(config.gold_path,
                                       corpus::DatasetFlavor::Gold)
                 .dataset;
    return *gold;
  };

  // Guidance: an explicit file wins; otherwise sample from the gold corpus.
  std::optional<corpus::GuidanceSplit> split;
  if (!config.guidance_path.empty()) {
    inputs.guidance = corpus::parse_corpus_file(
                          config.guidance_path, corpus::DatasetFlavor::Guidance)
                          .dataset;
  } else {
    if (config.gold_path.empty())
      throw ConfigError(
          "no guidance source: set paths.guidance, or paths.gold with "
          "guidance.size");
    if (config.guidance_size < 1)
      throw ConfigError("guidance.size must be at least 1");
    split = corpus::sample_guidance(load_gold(), config.guidance_size,
                                    config.guidance_seed);
    inputs.guidance = std::move(split->guidance);
  }

  // Training corpus: an explicit noisy file wins; otherwise corrupt the gold
  // corpus (minus any sampled guidance sentences) at the configured rates.
  if (!config.noisy_path.empty()) {
    inputs.noisy = corpus::parse_corpus_file(config.noisy_path,
                                             corpus::DatasetFlavor::Noisy)
                       .dataset;
    return inputs;
  }
  if (config.noise.span_rate <= 0 && config.noise.category_rate <= 0)
    throw ConfigError(
        "no training corpus: set paths.noisy, or paths.gold with a positive "
        "noise rate");
  if (config.gold_path.empty())
    throw ConfigError("synthetic noise needs paths.gold");

  corpus::AnnotatedDataset staged = split ? std::move(split->remainder)
                                          : load_gold();
  inputs.synthetic = true;
  if (config.noise.span_rate > 0) {
    auto [noisy, manifest] = noise::inject_span_noise(staged, config.noise);
    staged = std::move(noisy);
    inputs.span_manifest = std::move(manifest);
  }
  if (config.noise.category_rate > 0) {
    // The category manifest is recorded relative to the span-noised corpus;
    // the injectors draw from separate random streams, so one seed is fine.
    staged.flavor = corpus::DatasetFlavor::Gold;
    auto [noisy, manifest] = noise::inject_category_noise(staged, config.noise);
    staged = std::move(noisy);
    inputs.category_manifest = std::move(manifest);
  }
  staged.flavor = corpus::DatasetFlavor::Noisy;
  inputs.noisy = std::move(staged);
  return inputs;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Guided denoising for NER models trained on noisy labels"};
  app.require_subcommand(1);
  int exit_code = 0;

  // analyze
  CommonFlags an_common;
  std::string an_noisy, an_gold;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Compare a noisy corpus against gold and report noise rates");
  analyze->add_option("--noisy", an_noisy,
                      "Noisy corpus (default: paths.noisy from --config)");
  analyze->add_option("--gold", an_gold,
                      "Gold corpus (default: paths.gold from --config)");
  an_common.attach(analyze, false);
  analyze->callback([&] {
    const RunConfig config = an_common.load();
    exit_code = cmd_analyze(
        pick_path(an_noisy, config.noisy_path, "--noisy (or paths.noisy)"),
        pick_path(an_gold, config.gold_path, "--gold (or paths.gold)"),
        pick_path(an_common.out, config.out_dir, "--out (or paths.out)"));
  });

  // inject
  CommonFlags in_common;
  std::string in_gold;
  double in_span_rate = 0.0, in_category_rate = 0.0;
  CLI::App* inject = app.add_subcommand(
      "inject", "Corrupt a gold corpus with synthetic labeling noise");
  inject->add_option("--gold", in_gold,
                     "Gold corpus (default: paths.gold from --config)");
  CLI::Option* span_opt = inject->add_option(
      "--span-rate", in_span_rate, "Per-entity span perturbation probability");
  CLI::Option* category_opt = inject->add_option(
      "--category-rate", in_category_rate,
      "Per-entity class flip probability");
  in_common.attach(inject, false);
  inject->callback([&] {
    const RunConfig config = in_common.load();
    noise::NoiseSpec spec = config.noise;
    if (span_opt->count() > 0) spec.span_rate = in_span_rate;
    if (category_opt->count() > 0) spec.category_rate = in_category_rate;
    if (in_common.given(in_common.seed_opt)) spec.seed = in_common.seed;
    exit_code = cmd_inject(
        pick_path(in_gold, config.gold_path, "--gold (or paths.gold)"), spec,
        pick_path(in_common.out, config.out_dir, "--out (or paths.out)"));
  });

  // pretrain-disc
  CommonFlags pd_common;
  CLI::App* pretrain_disc = app.add_subcommand(
      "pretrain-disc",
      "Pretrain the label-quality discriminator on the guidance set");
  pd_common.attach(pretrain_disc, true);
  pretrain_disc->callback([&] {
    RunConfig config = pd_common.load();
    if (pd_common.given(pd_common.out_opt)) config.out_dir = pd_common.out;
    if (pd_common.given(pd_common.seed_opt)) config.train.seed = pd_common.seed;
    exit_code = cmd_pretrain_disc(config);
  });

  // train
  CommonFlags tr_common;
  bool tr_dry_run = false;
  CLI::App* train = app.add_subcommand(
      "train", "Run the full denoising pipeline from a config file");
  train->add_flag("--dry-run", tr_dry_run,
                  "Validate and echo the configuration, then exit");
  tr_common.attach(train, true);
  train->callback([&] {
    RunConfig config = tr_common.load();
    if (tr_common.given(tr_common.out_opt)) config.out_dir = tr_common.out;
    if (tr_common.given(tr_common.seed_opt)) config.train.seed = tr_common.seed;
    exit_code = cmd_train(config, tr_dry_run);
  });

  // eval
  CommonFlags ev_common;
  std::string ev_checkpoint, ev_test;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a tagger checkpoint on a gold corpus");
  eval_cmd->add_option("--checkpoint", ev_checkpoint, "Tagger checkpoint")
      ->required();
  eval_cmd->add_option("--test", ev_test, "Gold corpus to evaluate on")
      ->required();
  ev_common.attach(eval_cmd, false);
  eval_cmd->callback([&] {
    const RunConfig config = ev_common.load();
    exit_code = cmd_eval(
        ev_checkpoint, ev_test,
        pick_path(ev_common.out, config.out_dir, "--out (or paths.out)"));
  });

  // plot
  CommonFlags pl_common;
  std::string pl_data;
  CLI::App* plot = app.add_subcommand(
      "plot", "Render a series,x,value,stddev CSV as a trend plot");
  plot->add_option("--data", pl_data, "Trend data CSV")->required();
  pl_common.attach(plot, false);
  plot->callback([&] {
    const RunConfig config = pl_common.load();
    fs::path svg = pl_common.out;
    if (svg.empty() && !config.out_dir.empty())
      svg = config.out_dir / "trend.svg";
    if (svg.empty()) throw ConfigError("missing --out (or paths.out)");
    exit_code = cmd_plot(pl_data, svg);
  });

  // score
  CommonFlags sc_common;
  std::string sc_checkpoint, sc_corpus, sc_candidates;
  CLI::App* score = app.add_subcommand(
      "score",
      "Score (sentence, span, class) candidates with a discriminator");
  score->add_option("--checkpoint", sc_checkpoint, "Discriminator checkpoint")
      ->required();
  score->add_option("--corpus", sc_corpus, "Corpus holding the sentences")
      ->required();
  score
      ->add_option("--candidates", sc_candidates,
                   "CSV of sentence_id,start,end,class rows")
      ->required();
  sc_common.attach(score, false);
  score->callback([&] {
    const RunConfig config = sc_common.load();
    fs::path out_csv = sc_common.out;
    if (out_csv.empty() && !config.out_dir.empty())
      out_csv = config.out_dir / "scores.csv";
    if (out_csv.empty()) throw ConfigError("missing --out (or paths.out)");
    exit_code = cmd_score(sc_checkpoint, sc_corpus, sc_candidates, out_csv);
  });

  try {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("nerguide");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& arg : full) argv.push_back(arg.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    return exit_code;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help text or the usage error
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nerguide::cli
