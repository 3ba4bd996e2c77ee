#include "nerguide/corpus.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "nerguide/rng.hpp"

namespace nerguide::corpus {

std::string Sentence::text() const {
  return join_tokens(tokens, 0, static_cast<int>(tokens.size()));
}

std::string BioTag::str() const {
  switch (kind) {
    case TagKind::O:
      return "O";
    case TagKind::B:
      return "B-" + cls;
    case TagKind::I:
      return "I-" + cls;
  }
  return "O";
}

BioTag BioTag::parse(const std::string& text) {
  if (text == "O") return BioTag::o();
  if (text.size() >= 3 && text[1] == '-') {
    if (text[0] == 'B') return BioTag::b(text.substr(2));
    if (text[0] == 'I') return BioTag::i(text.substr(2));
  }
  throw DataError("unknown tag string: '" + text + "'");
}

bool is_canonical(const LabelSequence& labels) {
  for (std::size_t i = 0; i < labels.tags.size(); ++i) {
    const BioTag& tag = labels.tags[i];
    if (tag.kind != TagKind::I) continue;
    if (i == 0) return false;
    const BioTag& prev = labels.tags[i - 1];
    if (prev.kind == TagKind::O || prev.cls != tag.cls) return false;
  }
  return true;
}

int repair_labels(LabelSequence& labels) {
  int repaired = 0;
  for (std::size_t i = 0; i < labels.tags.size(); ++i) {
    BioTag& tag = labels.tags[i];
    if (tag.kind != TagKind::I) continue;
    const bool orphan =
        i == 0 || labels.tags[i - 1].kind == TagKind::O ||
        labels.tags[i - 1].cls != tag.cls;
    if (orphan) {
      tag.kind = TagKind::B;
      ++repaired;
    }
  }
  return repaired;
}

std::string flavor_name(DatasetFlavor flavor) {
  switch (flavor) {
    case DatasetFlavor::Noisy:
      return "noisy";
    case DatasetFlavor::Guidance:
      return "guidance";
    case DatasetFlavor::Gold:
      return "gold";
  }
  return "noisy";
}

void AnnotatedDataset::validate() const {
  if (sentences.size() != labels.size())
    throw DataError("dataset has " + std::to_string(sentences.size()) +
                    " sentences but " + std::to_string(labels.size()) +
                    " label sequences");
  std::set<std::string> classes(class_set.begin(), class_set.end());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Sentence& s = sentences[i];
    if (s.tokens.empty())
      throw DataError("sentence " + std::to_string(s.id) + " has no tokens");
    for (const std::string& tok : s.tokens)
      if (tok.empty())
        throw DataError("sentence " + std::to_string(s.id) +
                        " contains an empty token");
    if (labels[i].size() != s.size())
      throw DataError("sentence " + std::to_string(s.id) +
                      ": label sequence length " +
                      std::to_string(labels[i].size()) +
                      " does not match token count " + std::to_string(s.size()));
    for (const BioTag& tag : labels[i].tags)
      if (tag.is_entity() && classes.find(tag.cls) == classes.end())
        throw DataError("sentence " + std::to_string(s.id) + ": class '" +
                        tag.cls + "' not in declared class set");
  }
}

std::vector<Entity> AnnotatedDataset::all_entities() const {
  std::vector<Entity> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::vector<Entity> es = extract_entities(sentences[i], labels[i]);
    out.insert(out.end(), es.begin(), es.end());
  }
  return out;
}

std::size_t AnnotatedDataset::token_count() const {
  std::size_t n = 0;
  for (const Sentence& s : sentences) n += s.size();
  return n;
}

std::vector<std::string> collect_classes(const std::vector<LabelSequence>& labels) {
  std::set<std::string> classes;
  for (const LabelSequence& seq : labels)
    for (const BioTag& tag : seq.tags)
      if (tag.is_entity()) classes.insert(tag.cls);
  return {classes.begin(), classes.end()};
}

std::pair<SpanLabels, CategoryLabels> decompose(const LabelSequence& labels) {
  if (!is_canonical(labels))
    throw DataError("decompose: label sequence is not canonical; repair first");
  SpanLabels spans;
  CategoryLabels cats;
  spans.is_entity.reserve(labels.size());
  cats.cats.reserve(labels.size());
  for (const BioTag& tag : labels.tags) {
    spans.is_entity.push_back(tag.is_entity());
    if (tag.is_entity())
      cats.cats.emplace_back(tag.cls);
    else
      cats.cats.emplace_back(std::nullopt);
  }
  return {std::move(spans), std::move(cats)};
}

LabelSequence recompose(const SpanLabels& spans, const CategoryLabels& cats) {
  if (spans.size() != cats.size())
    throw DataError("recompose: span/category length mismatch");
  LabelSequence out;
  out.tags.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans.is_entity[i]) {
      if (!cats.cats[i].has_value())
        throw DataError("recompose: missing category on entity mark at token " +
                        std::to_string(i));
      const std::string& cls = *cats.cats[i];
      const bool starts_entity =
          i == 0 || !spans.is_entity[i - 1] || *cats.cats[i - 1] != cls;
      out.tags.push_back(starts_entity ? BioTag::b(cls) : BioTag::i(cls));
    } else {
      if (cats.cats[i].has_value())
        throw DataError("recompose: category present on an O mark at token " +
                        std::to_string(i));
      out.tags.push_back(BioTag::o());
    }
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, int start, int end) {
  std::string out;
  for (int i = start; i < end; ++i) {
    if (i > start) out += ' ';
    out += tokens[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<Entity> extract_entities(const Sentence& sentence,
                                     const LabelSequence& labels) {
  if (labels.size() != sentence.size())
    throw DataError("extract_entities: label/token length mismatch in sentence " +
                    std::to_string(sentence.id));
  if (!is_canonical(labels))
    throw DataError("extract_entities: non-canonical labels in sentence " +
                    std::to_string(sentence.id));
  std::vector<Entity> out;
  const int n = static_cast<int>(sentence.size());
  int i = 0;
  while (i < n) {
    const BioTag& tag = labels.tags[static_cast<std::size_t>(i)];
    if (tag.kind != TagKind::B) {
      ++i;
      continue;
    }
    int end = i + 1;
    while (end < n) {
      const BioTag& next = labels.tags[static_cast<std::size_t>(end)];
      if (next.kind != TagKind::I || next.cls != tag.cls) break;
      ++end;
    }
    out.push_back(Entity{sentence.id, i, end,
                         join_tokens(sentence.tokens, i, end), tag.cls});
    i = end;
  }
  return out;
}

GuidanceSplit sample_guidance(const AnnotatedDataset& gold, int size,
                              std::uint64_t seed, int max_attempts) {
  if (gold.flavor != DatasetFlavor::Gold)
    throw DataError("sample_guidance: input dataset must be gold-flavored");
  const int n = static_cast<int>(gold.size());
  if (size < 0 || size > n)
    throw DataError("sample_guidance: size " + std::to_string(size) +
                    " out of range for " + std::to_string(n) + " sentences");
  const int num_classes = static_cast<int>(gold.class_set.size());
  const int floor_count = num_classes > 0 ? size / num_classes : 0;

  // Coverage is infeasible outright if some class is too rare in gold.
  std::map<std::string, int> total_counts;
  for (const std::string& cls : gold.class_set) total_counts[cls] = 0;
  std::vector<std::vector<Entity>> per_sentence(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    per_sentence[i] = extract_entities(gold.sentences[i], gold.labels[i]);
    for (const Entity& e : per_sentence[i]) total_counts[e.cls]++;
  }
  for (const auto& [cls, count] : total_counts)
    if (count < floor_count)
      throw DataError("sample_guidance: class '" + cls + "' occurs only " +
                      std::to_string(count) + " times in gold, below the " +
                      "coverage floor " + std::to_string(floor_count));

  std::vector<int> order(gold.size());
  std::iota(order.begin(), order.end(), 0);

  std::string worst_class;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(attempt));
    std::vector<int> shuffled = order;
    rng.shuffle(shuffled);
    std::vector<int> chosen(shuffled.begin(), shuffled.begin() + size);
    std::sort(chosen.begin(), chosen.end());

    std::map<std::string, int> counts;
    for (const std::string& cls : gold.class_set) counts[cls] = 0;
    for (int idx : chosen)
      for (const Entity& e : per_sentence[static_cast<std::size_t>(idx)])
        counts[e.cls]++;

    bool ok = true;
    for (const auto& [cls, count] : counts) {
      if (count < floor_count) {
        ok = false;
        worst_class = cls;
        break;
      }
    }
    if (!ok) continue;

    GuidanceSplit split;
    split.attempts = attempt + 1;
    split.guidance.flavor = DatasetFlavor::Guidance;
    split.guidance.class_set = gold.class_set;
    split.remainder.flavor = DatasetFlavor::Gold;
    split.remainder.class_set = gold.class_set;
    std::vector<bool> in_guidance(gold.size(), false);
    for (int idx : chosen) in_guidance[static_cast<std::size_t>(idx)] = true;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      AnnotatedDataset& target = in_guidance[i] ? split.guidance : split.remainder;
      target.sentences.push_back(gold.sentences[i]);
      target.labels.push_back(gold.labels[i]);
    }
    return split;
  }
  throw DataError("sample_guidance: coverage floor not met after " +
                  std::to_string(max_attempts) + " attempts (class '" +
                  worst_class + "' kept falling short)");
}

}  // namespace nerguide::corpus
