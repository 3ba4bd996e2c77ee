#ifndef NERGUIDE_CORPUS_IO_HPP_
#define NERGUIDE_CORPUS_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "nerguide/corpus.hpp"

namespace nerguide::corpus {

struct ParseResult {
  AnnotatedDataset dataset;
  int repaired_tags = 0;  // non-canonical I-tags promoted to B at parse time
};

// Parses a column-format corpus: one token per line, whitespace-separated
// columns, first column is the token and the last column the tag, blank
// lines separate sentences. Extra middle columns are ignored. Lines with a
// single column or with an unparseable tag raise DataError naming the line
// number. Sentences receive sequential ids starting at 0.
ParseResult parse_corpus(std::istream& in, DatasetFlavor flavor);
ParseResult parse_corpus(const std::string& text, DatasetFlavor flavor);
ParseResult parse_corpus_file(const std::filesystem::path& path,
                              DatasetFlavor flavor);

// Writes "token tag" lines with a blank line after each sentence. The output
// is byte-stable: parsing it back and rewriting reproduces the same bytes.
void write_corpus(const AnnotatedDataset& dataset, std::ostream& out);
void write_corpus_file(const AnnotatedDataset& dataset,
                       const std::filesystem::path& path);

// Class set, flavor and size counts as a JSON report.
nlohmann::json dataset_metadata(const AnnotatedDataset& dataset);

}  // namespace nerguide::corpus

#endif  // NERGUIDE_CORPUS_IO_HPP_
