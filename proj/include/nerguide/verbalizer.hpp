#ifndef NERGUIDE_VERBALIZER_HPP_
#define NERGUIDE_VERBALIZER_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nerguide/common.hpp"

namespace nerguide::corpus {

// Maps class identifiers (case-sensitive) to the natural-language words used
// inside prompts and demonstrations, e.g. LOC -> "location". Ships with
// defaults for the common newswire tag sets; entries can be overridden or
// extended from a plain key=value file.
class Verbalizer {
 public:
  // The built-in table.
  static Verbalizer defaults();

  // Lines of the form "CLS = word or phrase"; '#' starts a comment. Entries
  // overlay the defaults.
  static Verbalizer from_file(const std::filesystem::path& path);

  // Natural-language form; throws DataError listing the class when unmapped.
  const std::string& verbalize(const std::string& cls) const;

  // The verbalization split into whitespace tokens ("work of art" -> 3).
  std::vector<std::string> verbalize_tokens(const std::string& cls) const;

  bool contains(const std::string& cls) const;
  void set(const std::string& cls, const std::string& word);

  // Every word token that can appear in a verbalization, deduplicated;
  // used for vocabulary construction.
  std::vector<std::string> all_word_tokens() const;

  const std::map<std::string, std::string>& table() const { return table_; }

 private:
  std::map<std::string, std::string> table_;
};

}  // namespace nerguide::corpus

#endif  // NERGUIDE_VERBALIZER_HPP_
