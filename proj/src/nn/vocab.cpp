#include "nerguide/nn/vocab.hpp"

#include <set>

#include "nerguide/common.hpp"

namespace nerguide::nn {

Vocab::Vocab(const std::vector<std::string>& words) {
  tokens_ = {kUnk, kMask, kSep};
  std::set<std::string> unique(words.begin(), words.end());
  for (const char* special : {kUnk, kMask, kSep}) unique.erase(special);
  unique.erase("");
  tokens_.insert(tokens_.end(), unique.begin(), unique.end());
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    index_[tokens_[static_cast<std::size_t>(i)]] = i;
  }
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_id() : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError("vocab id " + std::to_string(id) + " out of range [0, " +
                    std::to_string(size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

}  // namespace nerguide::nn
