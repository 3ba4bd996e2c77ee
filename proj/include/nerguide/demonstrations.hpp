#ifndef NERGUIDE_DEMONSTRATIONS_HPP_
#define NERGUIDE_DEMONSTRATIONS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nerguide/corpus.hpp"
#include "nerguide/verbalizer.hpp"

namespace nerguide::demos {

// Maps a sentence to a fixed-dimension vector for similarity retrieval.
// Must be deterministic: the same sentence always embeds identically.
class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual int dim() const = 0;
  virtual const std::string& model_id() const = 0;
  virtual Eigen::VectorXd embed(const corpus::Sentence& sentence) const = 0;
};

// Signed feature hashing over unigrams: each token flips one coordinate up
// or down, and the result is L2-normalized. Deterministic across platforms
// (the hash is FNV-1a, not std::hash). Sentences sharing many tokens land
// close in cosine, which is all retrieval needs.
class HashedBowEmbedder : public SentenceEmbedder {
 public:
  explicit HashedBowEmbedder(int dim = 512);

  int dim() const override { return dim_; }
  const std::string& model_id() const override { return id_; }
  Eigen::VectorXd embed(const corpus::Sentence& sentence) const override;

 private:
  int dim_;
  std::string id_;
};

// One clean demonstration: a separator token, then one clause per guidance
// entity ("<surface> is a <verbalized class>"), clauses joined by ".".
struct DemoClause {
  std::string surface;             // space-joined entity tokens
  std::string verbalized;          // class verbalization
  std::vector<std::string> tokens; // "<surface...> is a <verbalized...>"
};

struct Demonstration {
  std::vector<int> source_ids;  // guidance sentences the clauses came from
  std::vector<DemoClause> clauses;

  bool empty() const { return clauses.empty(); }

  // Full rendered token sequence; an empty demonstration renders to nothing
  // (not even the separator).
  std::vector<std::string> tokens() const;

  // Longest prefix of clauses whose rendering fits in `budget` tokens;
  // clauses are dropped from the end, never the front.
  std::vector<std::string> tokens_limited(std::size_t budget) const;

  std::string text() const;  // space-joined tokens(), for logs and tests
};

// Renders the entities of the selected guidance sentences (retrieval order,
// then entity order within each sentence) into one demonstration.
Demonstration format_demo(const corpus::AnnotatedDataset& guidance,
                          const std::vector<int>& indices,
                          const corpus::Verbalizer& verbalizer);

// Content fingerprint of a dataset (tokens and tags), used to key the
// embedding cache.
std::uint64_t dataset_content_hash(const corpus::AnnotatedDataset& dataset);

// Pre-embedded guidance set supporting cosine top-k retrieval. The index
// copies the guidance data, so it outlives the dataset it was built from;
// the embedder is only referenced and must outlive the index.
class GuidanceIndex {
 public:
  GuidanceIndex(const corpus::AnnotatedDataset& guidance,
                const SentenceEmbedder& embedder);
  // Same, but reads the embeddings from `cache_path` when the file matches
  // this dataset and embedder, and (re)writes it otherwise.
  GuidanceIndex(const corpus::AnnotatedDataset& guidance,
                const SentenceEmbedder& embedder,
                const std::filesystem::path& cache_path);

  // Indices into the guidance set, sorted by descending cosine similarity
  // to the query; ties break toward the smaller sentence id.
  std::vector<int> retrieve(const corpus::Sentence& query, int k) const;

  // retrieve + format_demo in one step.
  Demonstration demo_for(const corpus::Sentence& query, int k,
                         const corpus::Verbalizer& verbalizer) const;

  const corpus::AnnotatedDataset& guidance() const { return guidance_; }
  const Eigen::MatrixXd& embeddings() const { return embeddings_; }
  bool loaded_from_cache() const { return loaded_from_cache_; }

 private:
  void build();

  corpus::AnnotatedDataset guidance_;
  const SentenceEmbedder* embedder_;
  Eigen::MatrixXd embeddings_;  // one L2-normalized row per sentence
  bool loaded_from_cache_ = false;
};

// Convenience wrapper used by training loops: retrieves one demonstration
// per sentence from a guidance index, or nothing when the index is null
// (demonstrations disabled).
struct DemoProvider {
  const GuidanceIndex* index = nullptr;
  int k = 1;
  corpus::Verbalizer verbalizer = corpus::Verbalizer::defaults();

  std::optional<Demonstration> demo_for(const corpus::Sentence& sentence) const;
};

}  // namespace nerguide::demos

#endif  // NERGUIDE_DEMONSTRATIONS_HPP_
