#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace claimlab::tfidf {

// TF-IDF over unigrams and bigrams (lowercased, bigrams never cross sentence
// boundaries since documents are sentences). tf is the raw count,
// idf = ln((1+N)/(1+df)) + 1, vectors are L2-normalized. Immutable after
// build; concurrent queries are safe.
class TfIdfIndex {
 public:
  struct Hit {
    int doc = 0;
    double score = 0.0;
  };

  // min_df drops features seen in fewer documents. Throws
  // std::invalid_argument on an empty corpus.
  static TfIdfIndex build(const std::vector<std::string>& documents, int min_df = 1);

  // Cosine similarity against all documents, descending, ties broken by
  // ascending document id; zero-score documents are omitted.
  std::vector<Hit> nearest(const std::string& query, int k) const;

  std::size_t num_documents() const { return doc_vectors_.size(); }
  std::size_t num_features() const { return idf_.size(); }
  const std::string& document(int id) const { return doc_texts_[static_cast<std::size_t>(id)]; }

 private:
  struct SparseVec {
    std::vector<int> ids;        // sorted ascending
    std::vector<double> values;  // L2-normalized
  };

  std::unordered_map<std::string, int> feature_ids_;
  std::vector<double> idf_;
  std::vector<SparseVec> doc_vectors_;
  std::vector<std::string> doc_texts_;

  SparseVec vectorize(const std::string& text) const;
  static std::vector<std::string> features_of(const std::string& text);
};

}  // namespace claimlab::tfidf
