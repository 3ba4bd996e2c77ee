#ifndef NERGUIDE_EVAL_HPP_
#define NERGUIDE_EVAL_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nerguide/corpus.hpp"
#include "nerguide/noise_lab.hpp"

namespace nerguide::eval {

using corpus::AnnotatedDataset;

// Entity-level counts and rates for one class or for the micro average.
// A predicted entity is a true positive only when span and class both match
// a gold entity exactly; there is no partial credit.
struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const;  // 0 when nothing was predicted
  double recall() const;     // 0 when there is nothing to find
  double f1() const;         // 0 when precision + recall == 0
};

struct EvalResult {
  Counts micro;
  std::map<std::string, Counts> per_class;
};

// Scores pred against gold. Both datasets must cover the same sentences.
EvalResult evaluate(const AnnotatedDataset& pred, const AnnotatedDataset& gold);

nlohmann::json eval_to_json(const EvalResult& result);

// "class,tp,fp,fn,precision,recall,f1" rows; per-class first, then "micro".
// Rates carry full double precision so the file re-parses to exact values.
std::string eval_to_csv(const EvalResult& result);

struct ComparisonTable {
  std::string text;  // human-readable aligned table
  std::string csv;   // machine-readable, same ordering
};

// Rows sorted by micro F1, descending; ties keep input order.
ComparisonTable compare(
    const std::vector<std::pair<std::string, EvalResult>>& runs);

struct TrendSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> stddev;  // error-bar half-heights; may be all zero
};

// Sidecar path for a plot: same location with the extension replaced by csv.
std::filesystem::path csv_sidecar_path(const std::filesystem::path& plot_path);

// Line plot with error bars, one line per series, written as SVG. The data
// is also written to the CSV sidecar (series,x,value,stddev rows).
void plot_trend(const std::vector<double>& xs,
                const std::vector<TrendSeries>& series,
                const std::filesystem::path& svg_path);

// Confusion-matrix heatmap (row-normalized coloring, raw counts printed in
// the cells), written as SVG.
void plot_heatmap(const noise::ConfusionMatrix& matrix,
                  const std::filesystem::path& svg_path);

}  // namespace nerguide::eval

#endif  // NERGUIDE_EVAL_HPP_
