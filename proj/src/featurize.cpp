#include "crowdrel/featurize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "crowdrel/error.hpp"

namespace crowdrel {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary Vocabulary::fit(std::span<const std::string> corpus) {
  if (corpus.empty()) throw Error(ErrorKind::argument, "cannot fit TF-IDF on an empty corpus");
  Vocabulary vocab;
  vocab.n_documents_ = corpus.size();
  for (const auto& doc : corpus) {
    std::unordered_set<std::string> seen;
    for (auto& token : tokenize(doc)) {
      if (!seen.insert(token).second) continue;
      auto [it, inserted] = vocab.index_.emplace(token, vocab.tokens_.size());
      if (inserted) {
        vocab.tokens_.push_back(token);
        vocab.df_.push_back(0);
      }
      ++vocab.df_[it->second];
    }
  }
  if (vocab.tokens_.empty())
    throw Error(ErrorKind::argument, "TF-IDF corpus contains no tokens");
  return vocab;
}

std::ptrdiff_t Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

double Vocabulary::idf(std::size_t index) const {
  return std::log((1.0 + static_cast<double>(n_documents_)) /
                  (1.0 + static_cast<double>(df_.at(index)))) +
         1.0;
}

std::vector<double> Vocabulary::transform(std::string_view text) const {
  std::vector<double> v(tokens_.size(), 0.0);
  for (const auto& token : tokenize(text)) {
    auto it = index_.find(token);
    if (it != index_.end()) v[it->second] += 1.0;
  }
  double norm2 = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] == 0.0) continue;
    v[k] *= idf(k);
    norm2 += v[k] * v[k];
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> vector) {
  if (vectors_.empty() && dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_)
    throw Error(ErrorKind::dimension, "embedding for '" + token + "' has dimension " +
                                          std::to_string(vector.size()) + ", expected " +
                                          std::to_string(dim_));
  for (double x : vector)
    if (!std::isfinite(x))
      throw Error(ErrorKind::parse, "embedding for '" + token + "' is not finite");
  vectors_[token] = std::move(vector);
}

EmbeddingTable EmbeddingTable::load(const std::string& path,
                                    std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    std::string value;
    while (fields >> value) {
      try {
        vec.push_back(std::stod(value));
      } catch (const std::exception&) {
        throw Error(ErrorKind::parse, path + ":" + std::to_string(line_no) +
                                          ": not a number: '" + value + "'");
      }
    }
    if (vec.empty())
      throw Error(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": no vector values");
    if (table.size() > 0 && vec.size() != table.dim())
      throw Error(ErrorKind::dimension,
                  path + ":" + std::to_string(line_no) + ": ragged embedding of dimension " +
                      std::to_string(vec.size()) + ", expected " + std::to_string(table.dim()));
    if (warnings && table.find(token))
      warnings->push_back(path + ":" + std::to_string(line_no) + ": duplicate token '" +
                          token + "', keeping last occurrence");
    table.insert(token, std::move(vec));
  }
  return table;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<double> EmbeddingTable::average(std::string_view text) const {
  std::vector<double> sum(dim_, 0.0);
  std::size_t hits = 0;
  for (const auto& token : tokenize(text)) {
    if (const auto* v = find(token)) {
      for (std::size_t d = 0; d < dim_; ++d) sum[d] += (*v)[d];
      ++hits;
    }
  }
  if (hits > 0)
    for (double& x : sum) x /= static_cast<double>(hits);
  return sum;
}

}  // namespace crowdrel
