#ifndef NERGUIDE_NN_VOCAB_HPP_
#define NERGUIDE_NN_VOCAB_HPP_

#include <map>
#include <string>
#include <vector>

namespace nerguide::nn {

// Closed word-level vocabulary. The three specials occupy fixed slots at the
// front; the remaining words are stored sorted, so the id assignment is a
// pure function of the word set.
class Vocab {
 public:
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kMask = "[MASK]";
  static constexpr const char* kSep = "[SEP]";

  Vocab() = default;
  explicit Vocab(const std::vector<std::string>& words);

  int id(const std::string& token) const;  // unk_id() for unknown tokens
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  int unk_id() const { return 0; }
  int mask_id() const { return 1; }
  int sep_id() const { return 2; }

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_VOCAB_HPP_
