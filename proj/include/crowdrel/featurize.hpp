#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crowdrel {

/// Lowercase, split on runs of non-alphanumeric bytes.
std::vector<std::string> tokenize(std::string_view text);

/// TF-IDF vocabulary. idf(t) = ln((1 + n) / (1 + df(t))) + 1.
class Vocabulary {
 public:
  static Vocabulary fit(std::span<const std::string> corpus);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t n_documents() const noexcept { return n_documents_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::ptrdiff_t index_of(const std::string& token) const;
  std::size_t df(std::size_t index) const { return df_.at(index); }
  double idf(std::size_t index) const;

  /// tf * idf per token, L2-normalized when nonzero. Unknown tokens ignored.
  std::vector<double> transform(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> df_;
  std::size_t n_documents_ = 0;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Text format: one `token v1 ... vd` per line. On a duplicate token the
  /// last occurrence wins and a message is appended to `warnings`.
  static EmbeddingTable load(const std::string& path,
                             std::vector<std::string>* warnings = nullptr);

  void insert(const std::string& token, std::vector<double> vector);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  const std::vector<double>* find(const std::string& token) const;

  /// Mean of in-table token vectors; zero vector when none match.
  std::vector<double> average(std::string_view text) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

}  // namespace crowdrel
