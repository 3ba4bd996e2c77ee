#include "nerguide/noise_lab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "nerguide/common.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::noise {
namespace {

using json = nlohmann::json;

// Substream tags so span and category injection draw from unrelated
// sequences even when they share a seed.
constexpr std::uint64_t kSpanStream = 0x7370616e;      // "span"
constexpr std::uint64_t kCategoryStream = 0x63617467;  // "catg"

void require_aligned(const AnnotatedDataset& noisy,
                     const AnnotatedDataset& gold) {
  if (noisy.sentences.size() != gold.sentences.size()) {
    throw DataError("datasets are not aligned: " +
                    std::to_string(noisy.sentences.size()) + " vs " +
                    std::to_string(gold.sentences.size()) + " sentences");
  }
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    if (noisy.sentences[i].tokens != gold.sentences[i].tokens) {
      throw DataError("datasets are not aligned: sentence " +
                      std::to_string(gold.sentences[i].id) +
                      " differs between the two corpora");
    }
  }
}

void require_gold(const AnnotatedDataset& dataset, const char* what) {
  if (dataset.flavor != corpus::DatasetFlavor::Gold) {
    throw DataError(std::string(what) + " expects a gold dataset, got " +
                    corpus::flavor_name(dataset.flavor));
  }
}

}  // namespace

void NoiseSpec::validate() const {
  if (span_rate < 0.0 || span_rate > 1.0) {
    throw ConfigError("span_rate must lie in [0, 1], got " +
                      std::to_string(span_rate));
  }
  if (category_rate < 0.0 || category_rate > 1.0) {
    throw ConfigError("category_rate must lie in [0, 1], got " +
                      std::to_string(category_rate));
  }
}

std::vector<std::vector<double>> ConfusionMatrix::frequencies() const {
  std::vector<std::vector<double>> rows(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) {
    std::int64_t row_total = 0;
    for (std::int64_t c : counts[r]) row_total += c;
    rows[r].assign(counts[r].size(), 0.0);
    if (row_total == 0) continue;
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      rows[r][c] = static_cast<double>(counts[r][c]) /
                   static_cast<double>(row_total);
    }
  }
  return rows;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) sum += c;
  }
  return sum;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "tag";
  for (const auto& tag : tags) out << ',' << tag;
  out << '\n';
  for (std::size_t r = 0; r < tags.size(); ++r) {
    out << tags[r];
    for (std::size_t c = 0; c < tags.size(); ++c) out << ',' << counts[r][c];
    out << '\n';
  }
  return out.str();
}

std::string action_name(NoiseAction action) {
  switch (action) {
    case NoiseAction::None: return "none";
    case NoiseAction::ExtendLeft: return "extend_left";
    case NoiseAction::ExtendRight: return "extend_right";
    case NoiseAction::ShrinkLeft: return "shrink_left";
    case NoiseAction::ShrinkRight: return "shrink_right";
    case NoiseAction::ClassFlip: return "class_flip";
  }
  throw DataError("unknown noise action value");
}

NoiseAction parse_action(const std::string& name) {
  if (name == "none") return NoiseAction::None;
  if (name == "extend_left") return NoiseAction::ExtendLeft;
  if (name == "extend_right") return NoiseAction::ExtendRight;
  if (name == "shrink_left") return NoiseAction::ShrinkLeft;
  if (name == "shrink_right") return NoiseAction::ShrinkRight;
  if (name == "class_flip") return NoiseAction::ClassFlip;
  throw DataError("unknown noise action \"" + name + "\"");
}

int NoiseManifest::perturbed_count() const {
  int n = 0;
  for (const auto& rec : records) {
    if (rec.action != NoiseAction::None) ++n;
  }
  return n;
}

void write_manifest(const NoiseManifest& manifest, std::ostream& out) {
  for (const auto& rec : manifest.records) {
    json line{{"entity", rec.entity_index},
              {"sentence", rec.sentence_id},
              {"action", action_name(rec.action)},
              {"before_start", rec.before_start},
              {"before_end", rec.before_end},
              {"after_start", rec.after_start},
              {"after_end", rec.after_end},
              {"before_class", rec.before_class},
              {"after_class", rec.after_class}};
    out << line.dump() << '\n';
  }
}

void write_manifest_file(const NoiseManifest& manifest,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_manifest(manifest, out);
  if (!out) throw DataError("failed while writing " + path.string());
}

NoiseManifest read_manifest(std::istream& in) {
  NoiseManifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      " is not valid JSON: " + e.what());
    }
    try {
      NoiseRecord rec;
      rec.entity_index = parsed.at("entity").get<int>();
      rec.sentence_id = parsed.at("sentence").get<int>();
      rec.action = parse_action(parsed.at("action").get<std::string>());
      rec.before_start = parsed.at("before_start").get<int>();
      rec.before_end = parsed.at("before_end").get<int>();
      rec.after_start = parsed.at("after_start").get<int>();
      rec.after_end = parsed.at("after_end").get<int>();
      rec.before_class = parsed.at("before_class").get<std::string>();
      rec.after_class = parsed.at("after_class").get<std::string>();
      manifest.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      " is missing a field: " + e.what());
    }
  }
  return manifest;
}

NoiseManifest read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return read_manifest(in);
}

BioTag majority_vote(const std::vector<BioTag>& annotations) {
  if (annotations.empty()) {
    throw DataError("majority_vote needs at least one annotation");
  }
  std::map<std::string, int> votes;  // ordered: ties resolve to smallest key
  for (const auto& tag : annotations) ++votes[tag.str()];
  const std::string* best = nullptr;
  int best_count = 0;
  for (const auto& [tag, count] : votes) {
    if (count > best_count) {
      best = &tag;
      best_count = count;
    }
  }
  return BioTag::parse(*best);
}

double span_mismatch_rate(const AnnotatedDataset& noisy,
                          const AnnotatedDataset& gold) {
  require_aligned(noisy, gold);
  std::int64_t mismatched = 0;
  std::int64_t noisy_total = 0;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    auto noisy_entities =
        corpus::extract_entities(noisy.sentences[i], noisy.labels[i]);
    auto gold_entities =
        corpus::extract_entities(gold.sentences[i], gold.labels[i]);
    noisy_total += static_cast<std::int64_t>(noisy_entities.size());
    for (const auto& ne : noisy_entities) {
      bool overlaps = false;
      bool exact = false;
      for (const auto& ge : gold_entities) {
        if (ne.overlaps(ge)) overlaps = true;
        if (ne.same_span(ge)) exact = true;
      }
      if (overlaps && !exact) ++mismatched;
    }
  }
  if (noisy_total == 0) return 0.0;
  return static_cast<double>(mismatched) / static_cast<double>(noisy_total);
}

double missing_entity_rate(const AnnotatedDataset& noisy,
                           const AnnotatedDataset& gold) {
  require_aligned(noisy, gold);
  std::int64_t missing = 0;
  std::int64_t gold_total = 0;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    auto noisy_entities =
        corpus::extract_entities(noisy.sentences[i], noisy.labels[i]);
    auto gold_entities =
        corpus::extract_entities(gold.sentences[i], gold.labels[i]);
    gold_total += static_cast<std::int64_t>(gold_entities.size());
    for (const auto& ge : gold_entities) {
      bool overlaps = false;
      for (const auto& ne : noisy_entities) {
        if (ge.overlaps(ne)) {
          overlaps = true;
          break;
        }
      }
      if (!overlaps) ++missing;
    }
  }
  if (gold_total == 0) return 0.0;
  return static_cast<double>(missing) / static_cast<double>(gold_total);
}

ConfusionMatrix confusion_matrix(const AnnotatedDataset& noisy,
                                 const AnnotatedDataset& gold,
                                 bool zero_diagonal) {
  require_aligned(noisy, gold);
  // Tag axis: every tag observed in either labeling, lexicographically
  // sorted (B-* before I-* before O).
  std::map<std::string, std::size_t> index;
  for (const auto& seq : gold.labels) {
    for (const auto& tag : seq.tags) index.emplace(tag.str(), 0);
  }
  for (const auto& seq : noisy.labels) {
    for (const auto& tag : seq.tags) index.emplace(tag.str(), 0);
  }
  ConfusionMatrix matrix;
  for (auto& [tag, slot] : index) {
    slot = matrix.tags.size();
    matrix.tags.push_back(tag);
  }
  matrix.counts.assign(matrix.tags.size(),
                       std::vector<std::int64_t>(matrix.tags.size(), 0));
  for (std::size_t i = 0; i < gold.labels.size(); ++i) {
    if (gold.labels[i].size() != noisy.labels[i].size()) {
      throw DataError("datasets are not aligned: label length differs at "
                      "sentence " +
                      std::to_string(gold.sentences[i].id));
    }
    for (std::size_t j = 0; j < gold.labels[i].size(); ++j) {
      std::size_t r = index[gold.labels[i].tags[j].str()];
      std::size_t c = index[noisy.labels[i].tags[j].str()];
      ++matrix.counts[r][c];
    }
  }
  if (zero_diagonal) {
    for (std::size_t d = 0; d < matrix.tags.size(); ++d) {
      matrix.counts[d][d] = 0;
    }
    matrix.diagonal_zeroed = true;
  }
  return matrix;
}

std::vector<NoiseAction> feasible_span_moves(const LabelSequence& labels,
                                             const Entity& entity) {
  std::vector<NoiseAction> moves;
  const int len = static_cast<int>(labels.size());
  if (entity.start > 0 && !labels.tags[entity.start - 1].is_entity()) {
    moves.push_back(NoiseAction::ExtendLeft);
  }
  if (entity.end < len && !labels.tags[entity.end].is_entity()) {
    moves.push_back(NoiseAction::ExtendRight);
  }
  if (entity.length() >= 2) {
    moves.push_back(NoiseAction::ShrinkLeft);
    moves.push_back(NoiseAction::ShrinkRight);
  }
  return moves;
}

std::pair<int, int> apply_span_move(LabelSequence& labels, const Entity& entity,
                                    NoiseAction action) {
  const int len = static_cast<int>(labels.size());
  auto infeasible = [&](const char* why) -> DataError {
    return DataError("cannot " + action_name(action) + " entity [" +
                     std::to_string(entity.start) + ", " +
                     std::to_string(entity.end) + ") in sentence " +
                     std::to_string(entity.sentence_id) + ": " + why);
  };
  switch (action) {
    case NoiseAction::ExtendLeft:
      if (entity.start == 0) throw infeasible("at sentence start");
      if (labels.tags[entity.start - 1].is_entity()) {
        throw infeasible("left neighbor belongs to an entity");
      }
      labels.tags[entity.start - 1] = BioTag::b(entity.cls);
      labels.tags[entity.start] = BioTag::i(entity.cls);
      return {entity.start - 1, entity.end};
    case NoiseAction::ExtendRight:
      if (entity.end >= len) throw infeasible("at sentence end");
      if (labels.tags[entity.end].is_entity()) {
        throw infeasible("right neighbor belongs to an entity");
      }
      labels.tags[entity.end] = BioTag::i(entity.cls);
      return {entity.start, entity.end + 1};
    case NoiseAction::ShrinkLeft:
      if (entity.length() < 2) throw infeasible("entity has a single token");
      labels.tags[entity.start] = BioTag::o();
      labels.tags[entity.start + 1] = BioTag::b(entity.cls);
      return {entity.start + 1, entity.end};
    case NoiseAction::ShrinkRight:
      if (entity.length() < 2) throw infeasible("entity has a single token");
      labels.tags[entity.end - 1] = BioTag::o();
      return {entity.start, entity.end - 1};
    case NoiseAction::None:
      return {entity.start, entity.end};
    case NoiseAction::ClassFlip:
      throw infeasible("class_flip is not a span move");
  }
  throw DataError("unknown noise action value");
}

std::pair<AnnotatedDataset, NoiseManifest> inject_span_noise(
    const AnnotatedDataset& gold, const NoiseSpec& spec) {
  spec.validate();
  require_gold(gold, "span injector");
  AnnotatedDataset noisy = gold;
  noisy.flavor = corpus::DatasetFlavor::Noisy;
  NoiseManifest manifest;

  // Map sentence id -> index so entities can address their label sequence.
  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    by_id[gold.sentences[i].id] = i;
  }

  auto entities = gold.all_entities();
  for (std::size_t ord = 0; ord < entities.size(); ++ord) {
    const Entity& entity = entities[ord];
    NoiseRecord rec;
    rec.entity_index = static_cast<int>(ord);
    rec.sentence_id = entity.sentence_id;
    rec.before_start = rec.after_start = entity.start;
    rec.before_end = rec.after_end = entity.end;
    rec.before_class = rec.after_class = entity.cls;

    Rng rng = Rng::derive(spec.seed, kSpanStream, ord);
    if (rng.uniform() < spec.span_rate) {
      // Feasibility is judged against the working labels, not the gold
      // ones, so that an earlier entity extending into a shared O gap
      // blocks this one from extending into the same token.
      LabelSequence& labels = noisy.labels[by_id.at(entity.sentence_id)];
      auto moves = feasible_span_moves(labels, entity);
      if (!moves.empty()) {
        NoiseAction move = moves[rng.below(moves.size())];
        auto [after_start, after_end] = apply_span_move(labels, entity, move);
        rec.action = move;
        rec.after_start = after_start;
        rec.after_end = after_end;
      }
    }
    manifest.records.push_back(std::move(rec));
  }
  return {std::move(noisy), std::move(manifest)};
}

std::pair<AnnotatedDataset, NoiseManifest> inject_category_noise(
    const AnnotatedDataset& gold, const NoiseSpec& spec) {
  spec.validate();
  require_gold(gold, "category injector");
  if (spec.category_rate > 0.0 && gold.class_set.size() < 2) {
    throw DataError("category noise needs at least two classes; dataset has " +
                    std::to_string(gold.class_set.size()));
  }
  AnnotatedDataset noisy = gold;
  noisy.flavor = corpus::DatasetFlavor::Noisy;
  NoiseManifest manifest;

  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    by_id[gold.sentences[i].id] = i;
  }

  auto entities = gold.all_entities();
  for (std::size_t ord = 0; ord < entities.size(); ++ord) {
    const Entity& entity = entities[ord];
    NoiseRecord rec;
    rec.entity_index = static_cast<int>(ord);
    rec.sentence_id = entity.sentence_id;
    rec.before_start = rec.after_start = entity.start;
    rec.before_end = rec.after_end = entity.end;
    rec.before_class = rec.after_class = entity.cls;

    Rng rng = Rng::derive(spec.seed, kCategoryStream, ord);
    if (rng.uniform() < spec.category_rate) {
      std::vector<std::string> others;
      for (const auto& cls : gold.class_set) {
        if (cls != entity.cls) others.push_back(cls);
      }
      const std::string& flipped = others[rng.below(others.size())];
      LabelSequence& labels = noisy.labels[by_id.at(entity.sentence_id)];
      labels.tags[entity.start] = BioTag::b(flipped);
      for (int j = entity.start + 1; j < entity.end; ++j) {
        labels.tags[j] = BioTag::i(flipped);
      }
      rec.action = NoiseAction::ClassFlip;
      rec.after_class = flipped;
    }
    manifest.records.push_back(std::move(rec));
  }
  return {std::move(noisy), std::move(manifest)};
}

AnnotatedDataset replay_manifest(const AnnotatedDataset& gold,
                                 const NoiseManifest& manifest) {
  auto entities = gold.all_entities();
  if (manifest.records.size() != entities.size()) {
    throw DataError("manifest has " + std::to_string(manifest.records.size()) +
                    " records but the dataset has " +
                    std::to_string(entities.size()) + " entities");
  }
  AnnotatedDataset noisy = gold;
  noisy.flavor = corpus::DatasetFlavor::Noisy;

  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    by_id[gold.sentences[i].id] = i;
  }

  for (std::size_t ord = 0; ord < manifest.records.size(); ++ord) {
    const NoiseRecord& rec = manifest.records[ord];
    const Entity& entity = entities[ord];
    if (rec.sentence_id != entity.sentence_id ||
        rec.before_start != entity.start || rec.before_end != entity.end ||
        rec.before_class != entity.cls) {
      throw DataError("manifest record " + std::to_string(ord) +
                      " does not match entity " + std::to_string(ord) +
                      " of the dataset");
    }
    if (rec.action == NoiseAction::None) continue;
    LabelSequence& labels = noisy.labels[by_id.at(rec.sentence_id)];
    if (rec.action == NoiseAction::ClassFlip) {
      labels.tags[entity.start] = BioTag::b(rec.after_class);
      for (int j = entity.start + 1; j < entity.end; ++j) {
        labels.tags[j] = BioTag::i(rec.after_class);
      }
      continue;
    }
    auto [after_start, after_end] = apply_span_move(labels, entity, rec.action);
    if (after_start != rec.after_start || after_end != rec.after_end) {
      throw DataError("manifest record " + std::to_string(ord) +
                      " replays to a different span than it recorded");
    }
  }
  return noisy;
}

}  // namespace nerguide::noise
