#include "nerguide/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "nerguide/common.hpp"

namespace nerguide::eval {
namespace {

using corpus::Entity;

void require_aligned(const AnnotatedDataset& pred,
                     const AnnotatedDataset& gold) {
  if (pred.sentences.size() != gold.sentences.size()) {
    throw DataError("evaluate: " + std::to_string(pred.sentences.size()) +
                    " predicted vs " + std::to_string(gold.sentences.size()) +
                    " gold sentences");
  }
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    if (pred.sentences[i].tokens != gold.sentences[i].tokens) {
      throw DataError("evaluate: sentence " +
                      std::to_string(gold.sentences[i].id) +
                      " differs between prediction and gold");
    }
  }
}

// Full-precision, locale-independent double rendering for CSV artifacts.
std::string full_double(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

std::string fixed4(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << v;
  return out.str();
}

const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return colors;
}

}  // namespace

double Counts::precision() const {
  return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                     : 0.0;
}

double Counts::recall() const {
  return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                     : 0.0;
}

double Counts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

EvalResult evaluate(const AnnotatedDataset& pred,
                    const AnnotatedDataset& gold) {
  require_aligned(pred, gold);
  EvalResult result;
  for (const std::string& cls : gold.class_set) result.per_class[cls];
  for (const std::string& cls : pred.class_set) result.per_class[cls];

  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    auto pred_entities =
        corpus::extract_entities(pred.sentences[i], pred.labels[i]);
    auto gold_entities =
        corpus::extract_entities(gold.sentences[i], gold.labels[i]);
    // Exact (start, end, class) identity; spans within one canonical
    // labeling never repeat, so plain set semantics suffice.
    auto key = [](const Entity& e) {
      return std::make_tuple(e.start, e.end, e.cls);
    };
    std::set<std::tuple<int, int, std::string>> gold_keys;
    for (const auto& e : gold_entities) gold_keys.insert(key(e));

    for (const auto& e : pred_entities) {
      if (gold_keys.count(key(e))) {
        ++result.micro.tp;
        ++result.per_class[e.cls].tp;
      } else {
        ++result.micro.fp;
        ++result.per_class[e.cls].fp;
      }
    }
    std::set<std::tuple<int, int, std::string>> pred_keys;
    for (const auto& e : pred_entities) pred_keys.insert(key(e));
    for (const auto& e : gold_entities) {
      if (!pred_keys.count(key(e))) {
        ++result.micro.fn;
        ++result.per_class[e.cls].fn;
      }
    }
  }
  return result;
}

nlohmann::json eval_to_json(const EvalResult& result) {
  auto counts_json = [](const Counts& c) {
    return nlohmann::json{{"tp", c.tp},
                          {"fp", c.fp},
                          {"fn", c.fn},
                          {"precision", c.precision()},
                          {"recall", c.recall()},
                          {"f1", c.f1()}};
  };
  nlohmann::json j;
  j["micro"] = counts_json(result.micro);
  j["per_class"] = nlohmann::json::object();
  for (const auto& [cls, counts] : result.per_class) {
    j["per_class"][cls] = counts_json(counts);
  }
  return j;
}

std::string eval_to_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "class,tp,fp,fn,precision,recall,f1\n";
  auto row = [&out](const std::string& name, const Counts& c) {
    out << name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
        << full_double(c.precision()) << ',' << full_double(c.recall()) << ','
        << full_double(c.f1()) << '\n';
  };
  for (const auto& [cls, counts] : result.per_class) row(cls, counts);
  row("micro", result.micro);
  return out.str();
}

ComparisonTable compare(
    const std::vector<std::pair<std::string, EvalResult>>& runs) {
  if (runs.empty()) throw DataError("compare: no runs given");
  std::vector<std::size_t> order(runs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&runs](std::size_t a, std::size_t b) {
                     return runs[a].second.micro.f1() >
                            runs[b].second.micro.f1();
                   });

  std::size_t name_width = 4;  // "run"
  for (const auto& [name, result] : runs) {
    name_width = std::max(name_width, name.size());
  }

  ComparisonTable table;
  std::ostringstream text;
  text << std::left << std::setw(static_cast<int>(name_width)) << "run"
       << "  precision  recall     f1\n";
  std::ostringstream csv;
  csv << "run,precision,recall,f1\n";
  for (std::size_t idx : order) {
    const auto& [name, result] = runs[idx];
    text << std::left << std::setw(static_cast<int>(name_width)) << name
         << "  " << fixed4(result.micro.precision()) << "     "
         << fixed4(result.micro.recall()) << "     "
         << fixed4(result.micro.f1()) << '\n';
    csv << name << ',' << full_double(result.micro.precision()) << ','
        << full_double(result.micro.recall()) << ','
        << full_double(result.micro.f1()) << '\n';
  }
  table.text = text.str();
  table.csv = csv.str();
  return table;
}

std::filesystem::path csv_sidecar_path(const std::filesystem::path& plot_path) {
  std::filesystem::path sidecar = plot_path;
  sidecar.replace_extension(".csv");
  return sidecar;
}

void plot_trend(const std::vector<double>& xs,
                const std::vector<TrendSeries>& series,
                const std::filesystem::path& svg_path) {
  if (xs.empty()) throw DataError("plot_trend: no x values");
  if (series.empty()) throw DataError("plot_trend: no series");
  for (const TrendSeries& s : series) {
    if (s.values.size() != xs.size() ||
        (!s.stddev.empty() && s.stddev.size() != xs.size())) {
      throw DataError("plot_trend: series '" + s.name + "' has " +
                      std::to_string(s.values.size()) + " values for " +
                      std::to_string(xs.size()) + " x positions");
    }
  }

  // Data ranges, padded so flat lines and single points stay visible.
  double x_lo = *std::min_element(xs.begin(), xs.end());
  double x_hi = *std::max_element(xs.begin(), xs.end());
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -std::numeric_limits<double>::infinity();
  for (const TrendSeries& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double sd = s.stddev.empty() ? 0.0 : s.stddev[i];
      y_lo = std::min(y_lo, s.values[i] - sd);
      y_hi = std::max(y_hi, s.values[i] + sd);
    }
  }
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi - y_lo < 1e-12) {
    y_lo -= 0.05;
    y_hi += 0.05;
  }
  const double x_pad = 0.04 * (x_hi - x_lo);
  const double y_pad = 0.08 * (y_hi - y_lo);
  x_lo -= x_pad;
  x_hi += x_pad;
  y_lo -= y_pad;
  y_hi += y_pad;

  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 20, mb = 50;
  auto sx = [&](double x) {
    return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr);
  };
  auto sy = [&](double y) {
    return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };
  auto num = [](double v) {
    std::ostringstream out;
    out << std::setprecision(6) << v;
    return out.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  // Axes.
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  // Ticks: x at every data position, y at five even stops.
  for (double x : xs) {
    svg << "<line x1=\"" << num(sx(x)) << "\" y1=\"" << height - mb
        << "\" x2=\"" << num(sx(x)) << "\" y2=\"" << height - mb + 5
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(sx(x)) << "\" y=\"" << height - mb + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << num(x)
        << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = y_lo + (y_hi - y_lo) * k / 4.0;
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(sy(y)) << "\" x2=\""
        << ml << "\" y2=\"" << num(sy(y)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 10 << "\" y=\"" << num(sy(y) + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << fixed4(y)
        << "</text>\n";
  }
  // Series lines, markers, error bars, legend.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const TrendSeries& s = series[si];
    const std::string& color = palette()[si % palette().size()];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      svg << num(sx(xs[i])) << ',' << num(sy(s.values[i])) << ' ';
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double cx = sx(xs[i]);
      const double cy = sy(s.values[i]);
      if (!s.stddev.empty() && s.stddev[i] > 0.0) {
        const double top = sy(s.values[i] + s.stddev[i]);
        const double bot = sy(s.values[i] - s.stddev[i]);
        svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(top)
            << "\" x2=\"" << num(cx) << "\" y2=\"" << num(bot)
            << "\" stroke=\"" << color << "\"/>\n";
        for (double ye : {top, bot}) {
          svg << "<line x1=\"" << num(cx - 4) << "\" y1=\"" << num(ye)
              << "\" x2=\"" << num(cx + 4) << "\" y2=\"" << num(ye)
              << "\" stroke=\"" << color << "\"/>\n";
        }
      }
      svg << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = mt + 16.0 * static_cast<double>(si);
    svg << "<rect x=\"" << width - mr - 130 << "\" y=\"" << ly
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << width - mr - 112 << "\" y=\"" << ly + 10
        << "\" font-size=\"12\">" << s.name << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(svg_path);
  if (!out) throw DataError("cannot write plot " + svg_path.string());
  out << svg.str();

  std::ofstream csv(csv_sidecar_path(svg_path));
  if (!csv) {
    throw DataError("cannot write plot data " +
                    csv_sidecar_path(svg_path).string());
  }
  csv << "series,x,value,stddev\n";
  for (const TrendSeries& s : series) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      csv << s.name << ',' << full_double(xs[i]) << ','
          << full_double(s.values[i]) << ','
          << full_double(s.stddev.empty() ? 0.0 : s.stddev[i]) << '\n';
    }
  }
}

void plot_heatmap(const noise::ConfusionMatrix& matrix,
                  const std::filesystem::path& svg_path) {
  const std::size_t n = matrix.tags.size();
  if (n == 0) throw DataError("plot_heatmap: empty matrix");
  const auto freq = matrix.frequencies();
  const double cell = 46.0;
  const double ml = 90, mt = 70;
  const double width = ml + cell * static_cast<double>(n) + 20;
  const double height = mt + cell * static_cast<double>(n) + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      // White for 0 up to a saturated blue for 1, on the row-normalized
      // frequency.
      const double v = freq[r][c];
      const int red = static_cast<int>(255 - 204 * v);
      const int green = static_cast<int>(255 - 136 * v);
      const double x = ml + cell * static_cast<double>(c);
      const double y = mt + cell * static_cast<double>(r);
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << red << ',' << green
          << ",255)\" stroke=\"#cccccc\"/>\n";
      svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
          << "\" font-size=\"11\" text-anchor=\"middle\">"
          << matrix.counts[r][c] << "</text>\n";
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    svg << "<text x=\"" << ml + cell * static_cast<double>(i) + cell / 2
        << "\" y=\"" << mt - 8
        << "\" font-size=\"11\" text-anchor=\"middle\">" << matrix.tags[i]
        << "</text>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\""
        << mt + cell * static_cast<double>(i) + cell / 2 + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << matrix.tags[i]
        << "</text>\n";
  }
  svg << "<text x=\"" << ml + cell * static_cast<double>(n) / 2 << "\" y=\""
      << mt - 40
      << "\" font-size=\"13\" text-anchor=\"middle\">noisy label</text>\n";
  svg << "<text x=\"18\" y=\"" << mt + cell * static_cast<double>(n) / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << mt + cell * static_cast<double>(n) / 2
      << ")\">ground-truth label</text>\n";
  svg << "</svg>\n";

  std::ofstream out(svg_path);
  if (!out) throw DataError("cannot write plot " + svg_path.string());
  out << svg.str();
}

}  // namespace nerguide::eval
