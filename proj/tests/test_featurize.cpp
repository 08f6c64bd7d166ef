#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdrel/error.hpp"
#include "crowdrel/featurize.hpp"
#include "support.hpp"

using namespace crowdrel;
using doctest::Approx;

namespace {
double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}
}  // namespace

TEST_CASE("tokenizer lowercases and splits on punctuation") {
  CHECK(tokenize("Where is the Orinoco?") ==
        std::vector<std::string>{"where", "is", "the", "orinoco"});
  CHECK(tokenize("  ,, ").empty());
}

TEST_CASE("tfidf fit") {
  std::vector<std::string> corpus = {"a b", "b c"};
  auto v = Vocabulary::fit(corpus);
  CHECK(v.size() == 3);
  REQUIRE(v.index_of("b") >= 0);
  CHECK(v.df(v.index_of("b")) == 2);
  CHECK(v.df(v.index_of("a")) == 1);
  // b appears everywhere: ln((1+2)/(1+2)) + 1
  CHECK(v.idf(v.index_of("b")) == Approx(1.0));
  CHECK(v.idf(v.index_of("a")) == Approx(std::log(3.0 / 2.0) + 1.0));
  CHECK(v.index_of("zzz") == -1);

  std::vector<std::string> one = {"x y y"};
  auto single = Vocabulary::fit(one);
  for (std::size_t k = 0; k < single.size(); ++k) CHECK(single.idf(k) == Approx(1.0));
}

TEST_CASE("tfidf transform") {
  std::vector<std::string> corpus = {"a b", "b c"};
  auto v = Vocabulary::fit(corpus);

  auto none = v.transform("q r s");
  CHECK(norm(none) == 0.0);

  auto bb = v.transform("b b");
  CHECK(norm(bb) == Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 0; k < bb.size(); ++k)
    CHECK((bb[k] != 0.0) == (k == std::size_t(v.index_of("b"))));

  // hand computation: (idf(a), idf(b), 0) normalized
  const double ia = std::log(1.5) + 1.0, ib = 1.0;
  const double n = std::sqrt(ia * ia + ib * ib);
  auto ab = v.transform("a b");
  CHECK(ab[v.index_of("a")] == Approx(ia / n).epsilon(1e-12));
  CHECK(ab[v.index_of("b")] == Approx(ib / n).epsilon(1e-12));
  CHECK(ab[v.index_of("c")] == 0.0);
}

TEST_CASE("tfidf norm is 0 or 1") {
  std::vector<std::string> corpus = {"the cat sat", "the dog ran far", "a cat and a dog"};
  auto v = Vocabulary::fit(corpus);
  for (const char* text : {"the the the", "cat dog", "nothing here", "", "A CAT, a Dog!"}) {
    const double n = norm(v.transform(text));
    CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-9));
  }
}

TEST_CASE("embeddings load") {
  testing::TempDir dir;
  auto ok = testing::write_file(dir.path() / "e.txt", "cat 1 2 3\ndog 4 5 6\n");
  auto t = EmbeddingTable::load(ok);
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);

  auto ragged = testing::write_file(dir.path() / "r.txt", "cat 1 2 3\ndog 4 5\n");
  CHECK_THROWS_AS(EmbeddingTable::load(ragged), Error);

  auto dup = testing::write_file(dir.path() / "d.txt", "cat 1 2\ncat 3 4\n");
  std::vector<std::string> warnings;
  auto d = EmbeddingTable::load(dup, &warnings);
  CHECK(d.size() == 1);
  CHECK(*d.find("cat") == std::vector<double>{3, 4});
  CHECK(warnings.size() == 1);
}

TEST_CASE("average embedding") {
  EmbeddingTable t;
  t.insert("cat", {1.0, 2.0});
  t.insert("dog", {3.0, -2.0});
  CHECK(t.average("cat") == std::vector<double>{1.0, 2.0});
  CHECK(t.average("the cat") == std::vector<double>{1.0, 2.0});
  CHECK(t.average("cat dog") == std::vector<double>{2.0, 0.0});
  CHECK(t.average("dog cat") == t.average("cat dog"));
  CHECK(t.average("bird") == std::vector<double>{0.0, 0.0});
}

TEST_CASE("average embedding ignores token order") {
  std::mt19937_64 rng(3);
  EmbeddingTable t;
  std::vector<std::string> words = {"w0", "w1", "w2", "w3", "w4", "w5"};
  std::normal_distribution<double> g;
  for (const auto& w : words) t.insert(w, {g(rng), g(rng), g(rng)});
  for (int rep = 0; rep < 20; ++rep) {
    auto a = words;
    std::shuffle(a.begin(), a.end(), rng);
    std::string s1, s2;
    for (const auto& w : words) s1 += w + " ";
    for (const auto& w : a) s2 += w + " ";
    auto v1 = t.average(s1), v2 = t.average(s2);
    for (std::size_t k = 0; k < 3; ++k) CHECK(v1[k] == Approx(v2[k]).epsilon(1e-12));
  }
}
