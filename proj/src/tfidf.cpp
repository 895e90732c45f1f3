#include "claimlab/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "claimlab/text.hpp"

namespace claimlab::tfidf {

std::vector<std::string> TfIdfIndex::features_of(const std::string& sentence) {
  std::vector<std::string> tokens = text::tokenize(sentence);
  for (auto& t : tokens) t = text::lowercase(t);
  std::vector<std::string> features = tokens;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    features.push_back(tokens[i] + " " + tokens[i + 1]);
  }
  return features;
}

TfIdfIndex TfIdfIndex::build(const std::vector<std::string>& documents, int min_df) {
  if (documents.empty()) throw std::invalid_argument("empty corpus");
  if (min_df < 1) throw std::invalid_argument("min_df must be >= 1");

  TfIdfIndex index;
  index.doc_texts_ = documents;

  // document frequencies; std::map keeps feature-id assignment deterministic
  std::map<std::string, int> df;
  std::vector<std::vector<std::string>> doc_features(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    doc_features[d] = features_of(documents[d]);
    std::vector<std::string> unique = doc_features[d];
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (const auto& f : unique) df[f] += 1;
  }

  const double n_docs = static_cast<double>(documents.size());
  for (const auto& [feature, count] : df) {
    if (count < min_df) continue;
    const int id = static_cast<int>(index.idf_.size());
    index.feature_ids_.emplace(feature, id);
    index.idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
  }

  index.doc_vectors_.resize(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    index.doc_vectors_[d] = index.vectorize(documents[d]);
  }
  return index;
}

TfIdfIndex::SparseVec TfIdfIndex::vectorize(const std::string& sentence) const {
  std::map<int, double> counts;
  for (const auto& feature : features_of(sentence)) {
    auto it = feature_ids_.find(feature);
    if (it != feature_ids_.end()) counts[it->second] += 1.0;
  }
  SparseVec vec;
  double norm_sq = 0.0;
  for (const auto& [id, tf] : counts) {
    const double w = tf * idf_[static_cast<std::size_t>(id)];
    vec.ids.push_back(id);
    vec.values.push_back(w);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : vec.values) v *= inv;
  }
  return vec;
}

std::vector<TfIdfIndex::Hit> TfIdfIndex::nearest(const std::string& query, int k) const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const SparseVec q = vectorize(query);
  if (q.ids.empty()) return {};

  std::vector<double> scores(doc_vectors_.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t d = 0; d < doc_vectors_.size(); ++d) {
    const SparseVec& doc = doc_vectors_[d];
    double dot = 0.0;
    std::size_t i = 0, j = 0;
    while (i < q.ids.size() && j < doc.ids.size()) {
      if (q.ids[i] == doc.ids[j]) {
        dot += q.values[i] * doc.values[j];
        ++i;
        ++j;
      } else if (q.ids[i] < doc.ids[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    scores[d] = dot;
  }

  std::vector<Hit> hits;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (scores[d] > 0.0) hits.push_back({static_cast<int>(d), scores[d]});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc < b.doc;
  });
  if (hits.size() > static_cast<std::size_t>(k)) hits.resize(static_cast<std::size_t>(k));
  return hits;
}

}  // namespace claimlab::tfidf
