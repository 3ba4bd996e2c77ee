#ifndef NERGUIDE_CLI_HPP_
#define NERGUIDE_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nerguide/cotrain.hpp"
#include "nerguide/noise_lab.hpp"

namespace nerguide::cli {

// Flat key=value configuration file. One `key = value` pair per line, dotted
// section keys (`train.ner_lr`), `#` comments and blank lines ignored.
// Duplicate keys and lines without `=` are errors, reported with their line
// number.
struct KvConfig {
  std::map<std::string, std::string> values;

  static KvConfig parse(std::istream& in);
  static KvConfig parse_string(const std::string& text);
  static KvConfig parse_file(const std::filesystem::path& path);
};

// Everything one run needs: corpus paths, output location, synthetic-noise
// settings and the full training configuration. Every key has a default, so
// an empty file is a valid (if useless) config; unknown keys are hard errors
// so hyperparameter typos cannot silently fall back to defaults.
struct RunConfig {
  std::filesystem::path noisy_path;       // paths.noisy
  std::filesystem::path gold_path;        // paths.gold
  std::filesystem::path guidance_path;    // paths.guidance
  std::filesystem::path verbalizer_path;  // paths.verbalizer
  std::filesystem::path out_dir;          // paths.out

  // When paths.guidance is empty, the guidance set is sampled from the gold
  // corpus instead.
  int guidance_size = 50;          // guidance.size
  std::uint64_t guidance_seed = 1; // guidance.seed

  // Sentence embedder behind demonstration retrieval. Only one implementation
  // exists; the key guards against configs written for a different build.
  std::string embedder = "hashed-bow";  // encoder.embedder

  noise::NoiseSpec noise;       // noise.* — synthetic corruption of the gold corpus
  cotrain::TrainConfig train;   // train.* and encoder.{ner,disc}.*

  static RunConfig from_kv(const KvConfig& kv);  // unknown keys -> ConfigError
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
};

// The corpora a training run operates on, resolved from a RunConfig: the
// noisy training set is either read from paths.noisy or synthesized by
// corrupting the gold corpus, and the guidance set is either read from
// paths.guidance or sampled from the gold corpus.
struct ResolvedInputs {
  corpus::AnnotatedDataset noisy;
  corpus::AnnotatedDataset guidance;
  bool synthetic = false;  // noisy was generated, not read from disk
  noise::NoiseManifest span_manifest;
  noise::NoiseManifest category_manifest;
};

ResolvedInputs resolve_inputs(const RunConfig& config);

// Runs one command line (excluding the program name) and returns the process
// exit code: 0 success, 1 usage or configuration error, 2 data error,
// 3 training failure. Diagnostics go to stderr, results to stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace nerguide::cli

#endif  // NERGUIDE_CLI_HPP_
