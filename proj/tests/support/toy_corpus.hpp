#ifndef NERGUIDE_TESTS_SUPPORT_TOY_CORPUS_HPP_
#define NERGUIDE_TESTS_SUPPORT_TOY_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nerguide/corpus.hpp"

namespace nerguide::testsupport {

// Synthetic four-class corpus (PER / LOC / ORG / MISC) used across the test
// suite. Entity surface tokens come from class-specific lexicons that are
// disjoint from each other and from the filler vocabulary, so the class of
// every entity token is recoverable from the token identity alone — which
// makes the corpus learnable to near-saturation by a small encoder. Templates
// keep at least one filler token between entities, so span perturbations
// never make two entities adjacent.
struct ToyCorpusOptions {
  int sentences = 200;
  std::uint64_t seed = 7;
};

corpus::AnnotatedDataset make_toy_corpus(const ToyCorpusOptions& options);

// Every token that can appear in a toy corpus, regardless of seed. Useful
// for building a closed vocabulary before seeing the data.
std::vector<std::string> toy_vocabulary();

}  // namespace nerguide::testsupport

#endif  // NERGUIDE_TESTS_SUPPORT_TOY_CORPUS_HPP_
