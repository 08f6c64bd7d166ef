#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crowdrel/data.hpp"
#include "crowdrel/model.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("crowdrel-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Random sparse annotation set; each pair kept with probability `density`,
// but every instance keeps at least one label.
inline crowdrel::AnnotationSet random_annotations(std::mt19937_64& rng, std::size_t n,
                                                  std::size_t m, std::size_t labels,
                                                  double density = 0.7) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, labels - 1);
  std::uniform_int_distribution<std::size_t> who(0, m - 1);
  std::vector<crowdrel::Annotation> triples;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j)
      if (unit(rng) < density) {
        triples.push_back({i, j, label(rng)});
        any = true;
      }
    if (!any) triples.push_back({i, who(rng), label(rng)});
  }
  return crowdrel::AnnotationSet(n, m, std::move(triples));
}

inline crowdrel::Priors random_priors(std::mt19937_64& rng,
                                      const crowdrel::AnnotationSet& ann,
                                      std::size_t labels) {
  std::uniform_real_distribution<double> unit(0.02, 1.0);
  std::uniform_real_distribution<double> rel(0.02, 0.98);
  crowdrel::Priors p;
  p.label = crowdrel::Matrix(ann.n_instances(), labels);
  for (std::size_t i = 0; i < ann.n_instances(); ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < labels; ++t) s += p.label(i, t) = unit(rng);
    for (std::size_t t = 0; t < labels; ++t) p.label(i, t) /= s;
  }
  for (std::size_t k = 0; k < ann.size(); ++k) p.reliability.push_back(rel(rng));
  return p;
}

inline crowdrel::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                                      std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  crowdrel::Matrix m(rows, cols);
  for (double& v : m.values) v = g(rng);
  return m;
}

}  // namespace testing
