#include "support/toy_corpus.hpp"

#include <set>

#include "nerguide/rng.hpp"

namespace nerguide::testsupport {
namespace {

using corpus::AnnotatedDataset;
using corpus::BioTag;
using corpus::LabelSequence;
using corpus::Sentence;

const std::vector<std::string> kPerFirst = {
    "Alda", "Boric", "Cerin",  "Dova", "Elmar", "Fenna", "Goric", "Hest",
    "Ilka", "Jorv",  "Kessa", "Lund", "Mirel", "Nolt",  "Orsa",  "Pevin"};

const std::vector<std::string> kPerLast = {
    "Ashgrove", "Birchall",  "Cradden",   "Droswell", "Eastmere", "Fallowby",
    "Grimsden", "Hollowell", "Ingleford", "Jarrowick", "Kelfring", "Lowbridge"};

const std::vector<std::string> kLocSingle = {
    "Virelia", "Tornbeck", "Quellmoor", "Sarvine", "Ostfell",
    "Lurneth", "Caldmere", "Brundale",  "Ashvale", "Pellmont"};

const std::vector<std::string> kLocPrefix = {"North", "South", "East", "West",
                                             "Upper"};
const std::vector<std::string> kLocSuffix = {"Hillford", "Marshwick",
                                             "Stonebay", "Fenholt", "Glenmoor"};

const std::vector<std::string> kOrgHead = {
    "Acme",    "Borealis", "Cinder",   "Dynatek",  "Emberline",
    "Fathom",  "Gearport", "Halcyon",  "Ironroot", "Jetline"};
const std::vector<std::string> kOrgTail = {"Industries", "Holdings", "Labs",
                                           "Logistics",  "Partners", "Works"};

const std::vector<std::string> kMisc = {
    "Zorvian", "Quellic",   "Tarvish", "Umbric",  "Velsic",
    "Wexian",  "Yarlish",   "Osmic",   "Runovian", "Sablic",
    "Thornic", "Ulverian",  "Vandric", "Weltish",  "Xanthic",
    "Yolvic",  "Zemlic",    "Arvish",  "Bolenic",  "Cravic",
    "Dunlish", "Erlovian",  "Fennic",  "Gorvish",  "Harlic"};

// Templates: whitespace-separated words; {PER} {LOC} {ORG} {MISC} are entity
// slots, everything else is a literal filler token.
const std::vector<std::string> kTemplates = {
    "yesterday {PER} visited {LOC} with friends",
    "{ORG} hired {PER} last spring",
    "the {MISC} festival returned to {LOC} again",
    "reporters say {ORG} will expand near {LOC} soon",
    "{PER} joined {ORG} as an adviser",
    "officials in {LOC} praised the {MISC} delegation",
    "{PER} wrote about {MISC} traditions for years",
    "analysts expect {ORG} to leave {LOC} quietly",
    "the mayor of {LOC} met {PER} on monday",
    "{MISC} athletes trained with {ORG} coaches",
    "a spokesman for {ORG} thanked {PER} warmly",
    "{LOC} welcomed the {MISC} orchestra last night",
    "{PER} and {PER} debated in {LOC} today",
    "shares of {ORG} rose after the {MISC} summit",
    "{PER} flew from {LOC} to {LOC} overnight",
};

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t space = text.find(' ', pos);
    if (space == std::string::npos) space = text.size();
    if (space > pos) words.push_back(text.substr(pos, space - pos));
    pos = space + 1;
  }
  return words;
}

// Appends the tokens of one sampled entity and its BIO tags.
void emit_entity(const std::string& slot, Rng& rng,
                 std::vector<std::string>& tokens,
                 std::vector<BioTag>& tags) {
  std::vector<std::string> surface;
  std::string cls;
  if (slot == "{PER}") {
    cls = "PER";
    surface = {rng.pick(kPerFirst), rng.pick(kPerLast)};
  } else if (slot == "{LOC}") {
    cls = "LOC";
    if (rng.uniform() < 0.5) {
      surface = {rng.pick(kLocSingle)};
    } else {
      surface = {rng.pick(kLocPrefix), rng.pick(kLocSuffix)};
    }
  } else if (slot == "{ORG}") {
    cls = "ORG";
    surface = {rng.pick(kOrgHead), rng.pick(kOrgTail)};
  } else {
    cls = "MISC";
    surface = {rng.pick(kMisc)};
  }
  for (std::size_t i = 0; i < surface.size(); ++i) {
    tokens.push_back(surface[i]);
    tags.push_back(i == 0 ? BioTag::b(cls) : BioTag::i(cls));
  }
}

}  // namespace

corpus::AnnotatedDataset make_toy_corpus(const ToyCorpusOptions& options) {
  AnnotatedDataset dataset;
  dataset.flavor = corpus::DatasetFlavor::Gold;
  dataset.class_set = {"LOC", "MISC", "ORG", "PER"};
  Rng rng(options.seed);
  for (int s = 0; s < options.sentences; ++s) {
    const std::string& tmpl = kTemplates[rng.below(kTemplates.size())];
    Sentence sentence;
    sentence.id = s;
    LabelSequence labels;
    for (const std::string& word : split_words(tmpl)) {
      if (word.size() > 1 && word.front() == '{') {
        emit_entity(word, rng, sentence.tokens, labels.tags);
      } else {
        sentence.tokens.push_back(word);
        labels.tags.push_back(BioTag::o());
      }
    }
    dataset.sentences.push_back(std::move(sentence));
    dataset.labels.push_back(std::move(labels));
  }
  dataset.validate();
  return dataset;
}

std::vector<std::string> toy_vocabulary() {
  std::set<std::string> vocab;
  for (const auto& tmpl : kTemplates) {
    for (const auto& word : split_words(tmpl)) {
      if (word.front() != '{') vocab.insert(word);
    }
  }
  auto add_all = [&vocab](const std::vector<std::string>& words) {
    vocab.insert(words.begin(), words.end());
  };
  add_all(kPerFirst);
  add_all(kPerLast);
  add_all(kLocSingle);
  add_all(kLocPrefix);
  add_all(kLocSuffix);
  add_all(kOrgHead);
  add_all(kOrgTail);
  add_all(kMisc);
  return {vocab.begin(), vocab.end()};
}

}  // namespace nerguide::testsupport
