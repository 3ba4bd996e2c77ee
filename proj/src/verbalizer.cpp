#include "nerguide/verbalizer.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace nerguide::corpus {

Verbalizer Verbalizer::defaults() {
  Verbalizer v;
  // CoNLL03 / Wikigold tag set.
  v.table_ = {
      {"PER", "person"},
      {"LOC", "location"},
      {"ORG", "organization"},
      {"MISC", "other"},
      // OntoNotes 5.0 tag set.
      {"WORK_OF_ART", "work of art"},
      {"PRODUCT", "product"},
      {"NORP", "affiliation"},
      {"FAC", "facility"},
      {"GPE", "geo-political"},
      {"PERSON", "person"},
      {"EVENT", "event"},
      {"LAW", "law"},
      {"LANGUAGE", "language"},
      {"PERCENT", "percent"},
      {"ORDINAL", "ordinal"},
      {"QUANTITY", "quantity"},
      {"CARDINAL", "cardinal"},
      {"TIME", "time"},
      {"DATE", "date"},
      {"MONEY", "money"},
  };
  return v;
}

Verbalizer Verbalizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open verbalizer file: " + path.string());
  Verbalizer v = defaults();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'CLS = word' line");
      continue;
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string{};
      const std::size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string cls = trim(line.substr(0, eq));
    const std::string word = trim(line.substr(eq + 1));
    if (cls.empty() || word.empty())
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": empty class or verbalization");
    v.table_[cls] = word;
  }
  return v;
}

const std::string& Verbalizer::verbalize(const std::string& cls) const {
  auto it = table_.find(cls);
  if (it == table_.end())
    throw DataError("verbalizer has no entry for class '" + cls + "'");
  return it->second;
}

std::vector<std::string> Verbalizer::verbalize_tokens(const std::string& cls) const {
  std::istringstream ss(verbalize(cls));
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

bool Verbalizer::contains(const std::string& cls) const {
  return table_.find(cls) != table_.end();
}

void Verbalizer::set(const std::string& cls, const std::string& word) {
  if (cls.empty() || word.empty())
    throw DataError("verbalizer entries must be nonempty");
  table_[cls] = word;
}

std::vector<std::string> Verbalizer::all_word_tokens() const {
  std::set<std::string> words;
  for (const auto& [cls, phrase] : table_) {
    std::istringstream ss(phrase);
    std::string tok;
    while (ss >> tok) words.insert(tok);
  }
  return {words.begin(), words.end()};
}

}  // namespace nerguide::corpus
