#ifndef NERGUIDE_NOISE_LAB_HPP_
#define NERGUIDE_NOISE_LAB_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nerguide/corpus.hpp"

namespace nerguide::noise {

using corpus::AnnotatedDataset;
using corpus::BioTag;
using corpus::Entity;
using corpus::LabelSequence;

struct NoiseSpec {
  double span_rate = 0.0;      // per-entity probability of a span perturbation
  double category_rate = 0.0;  // per-entity probability of a class flip
  std::uint64_t seed = 0;

  void validate() const;  // rates must lie in [0, 1]
};

// Token-level confusion counts between aligned gold and noisy labelings at
// full BIO granularity (B-X / I-X / O). Rows are ground-truth tags, columns
// noisy tags.
struct ConfusionMatrix {
  std::vector<std::string> tags;
  std::vector<std::vector<std::int64_t>> counts;
  bool diagonal_zeroed = false;

  // Row-normalized counts; all-zero rows stay zero.
  std::vector<std::vector<double>> frequencies() const;
  std::int64_t total() const;
  std::string to_csv() const;
};

enum class NoiseAction : std::uint8_t {
  None,
  ExtendLeft,
  ExtendRight,
  ShrinkLeft,
  ShrinkRight,
  ClassFlip,
};

std::string action_name(NoiseAction action);
NoiseAction parse_action(const std::string& name);

// What happened to one gold entity during injection. Span fields are
// half-open token intervals within the entity's sentence.
struct NoiseRecord {
  int entity_index = 0;  // ordinal over the dataset's entities
  int sentence_id = 0;
  NoiseAction action = NoiseAction::None;
  int before_start = 0, before_end = 0;
  int after_start = 0, after_end = 0;
  std::string before_class, after_class;
};

// One record per gold entity, in entity order. Replaying a manifest against
// the gold dataset reproduces the noisy dataset exactly.
struct NoiseManifest {
  std::vector<NoiseRecord> records;

  int perturbed_count() const;
};

// Newline-delimited JSON records.
void write_manifest(const NoiseManifest& manifest, std::ostream& out);
void write_manifest_file(const NoiseManifest& manifest,
                         const std::filesystem::path& path);
NoiseManifest read_manifest(std::istream& in);
NoiseManifest read_manifest_file(const std::filesystem::path& path);

// Most frequent tag among the annotators' votes; ties go to the
// lexicographically smallest tag string. The list must be nonempty.
BioTag majority_vote(const std::vector<BioTag>& annotations);

// Fraction of noisy entities that overlap a gold entity by at least one
// token but are not span-identical to any gold entity (class is ignored).
// Returns 0 when the noisy dataset has no entities.
double span_mismatch_rate(const AnnotatedDataset& noisy,
                          const AnnotatedDataset& gold);

// Fraction of gold entities with zero token overlap with any noisy entity.
double missing_entity_rate(const AnnotatedDataset& noisy,
                           const AnnotatedDataset& gold);

ConfusionMatrix confusion_matrix(const AnnotatedDataset& noisy,
                                 const AnnotatedDataset& gold,
                                 bool zero_diagonal);

// The span moves applicable to `entity` given the surrounding labels:
// extending is feasible only into an O-labeled neighbor inside the sentence,
// shrinking only when the entity keeps at least one token.
std::vector<NoiseAction> feasible_span_moves(const LabelSequence& labels,
                                             const Entity& entity);

// Applies one span move to the label sequence in place and returns the
// entity's new [start, end) interval.
std::pair<int, int> apply_span_move(LabelSequence& labels, const Entity& entity,
                                    NoiseAction action);

// Independently perturbs each gold entity's span with probability
// spec.span_rate: one token added at or removed from one boundary, chosen
// uniformly among the feasible moves (recorded as None when no move is
// feasible). Sentence tokens are never changed. Deterministic given
// spec.seed; the random stream for an entity depends only on the seed and
// the entity's ordinal.
std::pair<AnnotatedDataset, NoiseManifest> inject_span_noise(
    const AnnotatedDataset& gold, const NoiseSpec& spec);

// Flips each gold entity's class with probability spec.category_rate to a
// uniformly chosen different class. Requires at least two classes when the
// rate is positive.
std::pair<AnnotatedDataset, NoiseManifest> inject_category_noise(
    const AnnotatedDataset& gold, const NoiseSpec& spec);

// Mechanically re-applies a manifest to the gold dataset.
AnnotatedDataset replay_manifest(const AnnotatedDataset& gold,
                                 const NoiseManifest& manifest);

}  // namespace nerguide::noise

#endif  // NERGUIDE_NOISE_LAB_HPP_
