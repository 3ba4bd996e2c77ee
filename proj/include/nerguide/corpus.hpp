#ifndef NERGUIDE_CORPUS_HPP_
#define NERGUIDE_CORPUS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nerguide/common.hpp"

namespace nerguide::corpus {

// A pre-tokenized sentence. Tokens are surface strings; tokenization of raw
// text is out of scope.
struct Sentence {
  int id = 0;
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  std::string text() const;  // tokens joined by single spaces

  bool operator==(const Sentence&) const = default;
};

enum class TagKind : std::uint8_t { O, B, I };

// One BIO tag. `cls` is nonempty exactly when kind != O.
struct BioTag {
  TagKind kind = TagKind::O;
  std::string cls;

  static BioTag o() { return {}; }
  static BioTag b(std::string cls) { return {TagKind::B, std::move(cls)}; }
  static BioTag i(std::string cls) { return {TagKind::I, std::move(cls)}; }

  bool is_entity() const { return kind != TagKind::O; }
  std::string str() const;  // "O", "B-LOC", "I-LOC", ...

  // Parses "O" / "B-X" / "I-X"; anything else is a DataError.
  static BioTag parse(const std::string& text);

  bool operator==(const BioTag&) const = default;
};

struct LabelSequence {
  std::vector<BioTag> tags;

  std::size_t size() const { return tags.size(); }
  bool operator==(const LabelSequence&) const = default;
};

// A sequence is canonical iff every I-X is preceded by B-X or I-X of the
// same class X.
bool is_canonical(const LabelSequence& labels);

// Repairs a non-canonical sequence in place: I-X after O (or at position 0)
// becomes B-X; I-Y directly after a different class Y' becomes B-Y.
// Returns the number of tags changed.
int repair_labels(LabelSequence& labels);

// Per-token binary span marks: true = entity token (E), false = O.
struct SpanLabels {
  std::vector<bool> is_entity;

  std::size_t size() const { return is_entity.size(); }
  bool operator==(const SpanLabels&) const = default;
};

// Per-token category labels, present exactly where the span mark is E.
struct CategoryLabels {
  std::vector<std::optional<std::string>> cats;

  std::size_t size() const { return cats.size(); }
  bool operator==(const CategoryLabels&) const = default;
};

// A contiguous labeled span. `span` is the half-open token interval
// [start, end) within the sentence identified by sentence_id.
struct Entity {
  int sentence_id = 0;
  int start = 0;
  int end = 0;
  std::string surface;  // covered tokens joined by spaces
  std::string cls;

  int length() const { return end - start; }
  bool same_span(const Entity& other) const {
    return start == other.start && end == other.end;
  }
  bool overlaps(const Entity& other) const {
    return start < other.end && other.start < end;
  }
  bool operator==(const Entity&) const = default;
};

enum class DatasetFlavor : std::uint8_t { Noisy, Guidance, Gold };

std::string flavor_name(DatasetFlavor flavor);

// Sentences with aligned BIO label sequences. Immutable by convention once
// built; every library function takes datasets by const reference and
// returns new ones.
struct AnnotatedDataset {
  DatasetFlavor flavor = DatasetFlavor::Noisy;
  std::vector<Sentence> sentences;
  std::vector<LabelSequence> labels;
  std::vector<std::string> class_set;  // sorted, unique

  std::size_t size() const { return sentences.size(); }

  // Throws DataError if labels are misaligned, tags use classes outside
  // class_set, or sentences are malformed.
  void validate() const;

  // All entities across all sentences, in sentence order then span order.
  std::vector<Entity> all_entities() const;

  std::size_t token_count() const;
};

// Collects the sorted unique classes appearing in `labels`.
std::vector<std::string> collect_classes(const std::vector<LabelSequence>& labels);

// Splits a label sequence into binary span marks and per-token categories.
// Precondition: `labels` canonical (throws DataError otherwise).
std::pair<SpanLabels, CategoryLabels> decompose(const LabelSequence& labels);

// Inverse of decompose: contiguous E-runs become B-X I-X...; a class change
// inside a run starts a new B tag. Throws DataError when the category
// presence pattern disagrees with the span marks.
LabelSequence recompose(const SpanLabels& spans, const CategoryLabels& cats);

// One Entity per maximal B-X (I-X)* run, ordered by start index.
// Precondition: labels canonical.
std::vector<Entity> extract_entities(const Sentence& sentence,
                                     const LabelSequence& labels);

std::string join_tokens(const std::vector<std::string>& tokens, int start, int end);

struct GuidanceSplit {
  AnnotatedDataset guidance;
  AnnotatedDataset remainder;
  int attempts = 0;  // rejection-sampling attempts used
};

// Samples `size` sentences from a gold dataset such that every class is
// covered by at least floor(size / #classes) guidance entities. Rejection
// sampling over seeded random subsets; deterministic given seed. Throws
// DataError when coverage is infeasible (naming the class) or when the
// attempt cap is exhausted.
GuidanceSplit sample_guidance(const AnnotatedDataset& gold, int size,
                              std::uint64_t seed, int max_attempts = 1000);

}  // namespace nerguide::corpus

#endif  // NERGUIDE_CORPUS_HPP_
