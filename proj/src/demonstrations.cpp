#include "nerguide/demonstrations.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nerguide/common.hpp"
#include "nerguide/nn/vocab.hpp"
#include "nerguide/rng.hpp"

namespace nerguide::demos {
namespace {

constexpr char kCacheMagic[] = "ngdemocache1";

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  // Field separator so concatenated strings cannot collide by re-chunking.
  h ^= 0x1f;
  h *= 1099511628211ULL;
  return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

}  // namespace

HashedBowEmbedder::HashedBowEmbedder(int dim) : dim_(dim) {
  if (dim <= 0) throw ConfigError("embedder dimension must be positive");
  id_ = "hashed-bow-" + std::to_string(dim);
}

Eigen::VectorXd HashedBowEmbedder::embed(
    const corpus::Sentence& sentence) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (const std::string& token : sentence.tokens) {
    // Whiten the FNV hash so bucket and sign use independent bits.
    std::uint64_t state = fnv1a(kFnvOffset, token);
    const std::uint64_t w = splitmix64(state);
    const Eigen::Index bucket =
        static_cast<Eigen::Index>(w % static_cast<std::uint64_t>(dim_));
    v(bucket) += (w >> 63) ? 1.0 : -1.0;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

std::vector<std::string> Demonstration::tokens() const {
  if (clauses.empty()) return {};
  std::vector<std::string> out = {nn::Vocab::kSep};
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i > 0) out.push_back(".");
    out.insert(out.end(), clauses[i].tokens.begin(), clauses[i].tokens.end());
  }
  return out;
}

std::vector<std::string> Demonstration::tokens_limited(
    std::size_t budget) const {
  std::size_t keep = clauses.size();
  auto rendered_size = [&](std::size_t n) -> std::size_t {
    if (n == 0) return 0;
    std::size_t total = 1 + (n - 1);  // separator + clause joiners
    for (std::size_t i = 0; i < n; ++i) total += clauses[i].tokens.size();
    return total;
  };
  while (keep > 0 && rendered_size(keep) > budget) --keep;
  Demonstration prefix;
  prefix.clauses.assign(clauses.begin(),
                        clauses.begin() + static_cast<std::ptrdiff_t>(keep));
  return prefix.tokens();
}

std::string Demonstration::text() const {
  const std::vector<std::string> toks = tokens();
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) out += ' ';
    out += toks[i];
  }
  return out;
}

Demonstration format_demo(const corpus::AnnotatedDataset& guidance,
                          const std::vector<int>& indices,
                          const corpus::Verbalizer& verbalizer) {
  Demonstration demo;
  for (const int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(guidance.sentences.size())) {
      throw DataError("guidance index " + std::to_string(idx) +
                      " out of range");
    }
    const corpus::Sentence& sentence = guidance.sentences[idx];
    const auto entities =
        corpus::extract_entities(sentence, guidance.labels[idx]);
    if (entities.empty()) continue;
    demo.source_ids.push_back(sentence.id);
    for (const corpus::Entity& entity : entities) {
      DemoClause clause;
      clause.surface = entity.surface;
      clause.verbalized = verbalizer.verbalize(entity.cls);
      for (int t = entity.start; t < entity.end; ++t) {
        clause.tokens.push_back(sentence.tokens[t]);
      }
      clause.tokens.push_back("is");
      clause.tokens.push_back("a");
      const auto verbalized_tokens = verbalizer.verbalize_tokens(entity.cls);
      clause.tokens.insert(clause.tokens.end(), verbalized_tokens.begin(),
                           verbalized_tokens.end());
      demo.clauses.push_back(std::move(clause));
    }
  }
  return demo;
}

std::uint64_t dataset_content_hash(const corpus::AnnotatedDataset& dataset) {
  std::uint64_t h = fnv1a(kFnvOffset, corpus::flavor_name(dataset.flavor));
  for (const std::string& cls : dataset.class_set) h = fnv1a(h, cls);
  for (std::size_t i = 0; i < dataset.sentences.size(); ++i) {
    for (const std::string& token : dataset.sentences[i].tokens) {
      h = fnv1a(h, token);
    }
    for (const corpus::BioTag& tag : dataset.labels[i].tags) {
      h = fnv1a(h, tag.str());
    }
  }
  return h;
}

GuidanceIndex::GuidanceIndex(const corpus::AnnotatedDataset& guidance,
                             const SentenceEmbedder& embedder)
    : guidance_(guidance), embedder_(&embedder) {
  build();
}

GuidanceIndex::GuidanceIndex(const corpus::AnnotatedDataset& guidance,
                             const SentenceEmbedder& embedder,
                             const std::filesystem::path& cache_path)
    : guidance_(guidance), embedder_(&embedder) {
  const std::uint64_t hash = dataset_content_hash(guidance_);
  const Eigen::Index n = static_cast<Eigen::Index>(guidance_.sentences.size());
  const Eigen::Index d = embedder.dim();

  std::ifstream in(cache_path, std::ios::binary);
  if (in) {
    std::string line;
    nlohmann::json header;
    bool ok = static_cast<bool>(std::getline(in, line));
    if (ok) {
      header = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      ok = !header.is_discarded() && header.value("magic", "") == kCacheMagic &&
           header.value("dataset_hash", std::uint64_t{0}) == hash &&
           header.value("embedder", "") == embedder.model_id() &&
           header.value("dim", Eigen::Index{-1}) == d &&
           header.value("count", Eigen::Index{-1}) == n;
    }
    if (ok) {
      embeddings_.resize(n, d);
      in.read(reinterpret_cast<char*>(embeddings_.data()),
              static_cast<std::streamsize>(sizeof(double)) * n * d);
      if (in.gcount() ==
          static_cast<std::streamsize>(sizeof(double)) * n * d) {
        loaded_from_cache_ = true;
        return;
      }
    }
  }

  build();
  std::ofstream out(cache_path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write embedding cache " + cache_path.string());
  }
  nlohmann::json header;
  header["magic"] = kCacheMagic;
  header["dataset_hash"] = hash;
  header["embedder"] = embedder.model_id();
  header["dim"] = d;
  header["count"] = n;
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(embeddings_.data()),
            static_cast<std::streamsize>(sizeof(double)) * n * d);
}

void GuidanceIndex::build() {
  const Eigen::Index n = static_cast<Eigen::Index>(guidance_.sentences.size());
  embeddings_.resize(n, embedder_->dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e = embedder_->embed(guidance_.sentences[i]);
    const double norm = e.norm();
    if (norm > 0.0) e /= norm;
    embeddings_.row(i) = e.transpose();
  }
}

std::vector<int> GuidanceIndex::retrieve(const corpus::Sentence& query,
                                         int k) const {
  if (k < 1) throw ConfigError("retrieval k must be at least 1");
  if (guidance_.sentences.empty()) {
    throw DataError("cannot retrieve from an empty guidance set");
  }
  Eigen::VectorXd q = embedder_->embed(query);
  const double norm = q.norm();
  if (norm > 0.0) q /= norm;
  const Eigen::VectorXd scores = embeddings_ * q;

  std::vector<int> order(guidance_.sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return guidance_.sentences[a].id < guidance_.sentences[b].id;
  });
  order.resize(std::min<std::size_t>(order.size(),
                                     static_cast<std::size_t>(k)));
  return order;
}

Demonstration GuidanceIndex::demo_for(const corpus::Sentence& query, int k,
                                      const corpus::Verbalizer& verbalizer)
    const {
  return format_demo(guidance_, retrieve(query, k), verbalizer);
}

std::optional<Demonstration> DemoProvider::demo_for(
    const corpus::Sentence& sentence) const {
  if (index == nullptr) return std::nullopt;
  return index->demo_for(sentence, k, verbalizer);
}

}  // namespace nerguide::demos
