#include "nerguide/corpus_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace nerguide::corpus {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string field;
  while (ss >> field) fields.push_back(field);
  return fields;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

ParseResult parse_corpus(std::istream& in, DatasetFlavor flavor) {
  ParseResult result;
  result.dataset.flavor = flavor;

  Sentence current;
  LabelSequence current_labels;
  int line_no = 0;
  int next_id = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    current.id = next_id++;
    result.repaired_tags += repair_labels(current_labels);
    result.dataset.sentences.push_back(std::move(current));
    result.dataset.labels.push_back(std::move(current_labels));
    current = Sentence{};
    current_labels = LabelSequence{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      flush();
      continue;
    }
    std::vector<std::string> fields = split_ws(line);
    if (fields.size() < 2)
      throw DataError("parse error at line " + std::to_string(line_no) +
                      ": expected at least 2 columns (token and tag), got " +
                      std::to_string(fields.size()));
    BioTag tag;
    try {
      tag = BioTag::parse(fields.back());
    } catch (const DataError& e) {
      throw DataError("parse error at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    current.tokens.push_back(fields.front());
    current_labels.tags.push_back(std::move(tag));
  }
  flush();

  result.dataset.class_set = collect_classes(result.dataset.labels);
  result.dataset.validate();
  return result;
}

ParseResult parse_corpus(const std::string& text, DatasetFlavor flavor) {
  std::istringstream ss(text);
  return parse_corpus(ss, flavor);
}

ParseResult parse_corpus_file(const std::filesystem::path& path,
                              DatasetFlavor flavor) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open corpus file: " + path.string());
  try {
    return parse_corpus(in, flavor);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_corpus(const AnnotatedDataset& dataset, std::ostream& out) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Sentence& s = dataset.sentences[i];
    const LabelSequence& labels = dataset.labels[i];
    for (std::size_t j = 0; j < s.size(); ++j)
      out << s.tokens[j] << ' ' << labels.tags[j].str() << '\n';
    out << '\n';
  }
}

void write_corpus_file(const AnnotatedDataset& dataset,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write corpus file: " + path.string());
  write_corpus(dataset, out);
}

nlohmann::json dataset_metadata(const AnnotatedDataset& dataset) {
  std::map<std::string, int> per_class;
  for (const std::string& cls : dataset.class_set) per_class[cls] = 0;
  std::vector<Entity> entities = dataset.all_entities();
  for (const Entity& e : entities) per_class[e.cls]++;

  nlohmann::json j;
  j["flavor"] = flavor_name(dataset.flavor);
  j["classes"] = dataset.class_set;
  j["num_sentences"] = dataset.size();
  j["num_tokens"] = dataset.token_count();
  j["num_entities"] = entities.size();
  j["entities_per_class"] = per_class;
  return j;
}

}  // namespace nerguide::corpus
