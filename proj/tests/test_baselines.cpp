#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdrel/baselines.hpp"
#include "crowdrel/eval.hpp"
#include "crowdrel/rng.hpp"
#include "crowdrel/simulate.hpp"
#include "support.hpp"

using namespace crowdrel;

namespace {

AnnotationSet one_instance(std::vector<std::size_t> votes) {
  std::vector<Annotation> tr;
  for (std::size_t j = 0; j < votes.size(); ++j) tr.push_back({0, j, votes[j]});
  return AnnotationSet(1, votes.size(), tr);
}

// p(t | a_i) from DS parameters by direct Bayes rule.
Matrix ds_posterior_oracle(const DsModel& m, const AnnotationSet& ann, std::size_t labels) {
  Matrix out(ann.n_instances(), labels);
  for (std::size_t i = 0; i < ann.n_instances(); ++i) {
    double z = 0.0;
    for (std::size_t t = 0; t < labels; ++t) {
      double p = m.priors[t];
      for (const auto& a : ann.of_instance(i)) p *= m.confusion[a.annotator](t, a.label);
      out(i, t) = p;
      z += p;
    }
    for (std::size_t t = 0; t < labels; ++t) out(i, t) /= z;
  }
  return out;
}

}  // namespace

TEST_CASE("majority vote examples") {
  CHECK(majority_vote(one_instance({0, 0, 1}), 2) == std::vector<std::size_t>{0});
  CHECK(majority_vote(one_instance({0, 1}), 2) == std::vector<std::size_t>{0});
  CHECK(majority_vote(one_instance({2, 1}), 3) == std::vector<std::size_t>{1});
  CHECK(majority_vote(one_instance({2, 2, 1}), 3) == std::vector<std::size_t>{2});

  std::mt19937_64 rng(3);
  std::vector<Annotation> tr;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 30; ++i) {
    truth.push_back(rng() % 4);
    for (std::size_t j = 0; j < 3; ++j) tr.push_back({i, j, truth.back()});
  }
  CHECK(majority_vote(AnnotationSet(30, 3, tr), 4) == truth);
}

TEST_CASE("majority vote ignores annotator order") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    auto ann = testing::random_annotations(rng, 25, 5, 3, 0.6);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto tr = ann.triples();
    for (auto& a : tr) a.annotator = perm[a.annotator];
    CHECK(majority_vote(AnnotationSet(25, 5, tr), 3) == majority_vote(ann, 3));
  }
}

TEST_CASE("dawid-skene on unanimous annotators") {
  std::vector<Annotation> tr;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 60; ++i) {
    truth.push_back(i % 3);
    for (std::size_t j = 0; j < 4; ++j) tr.push_back({i, j, truth.back()});
  }
  auto r = dawid_skene(AnnotationSet(60, 4, tr), 3);
  CHECK(r.hard == truth);
  for (const auto& c : r.model.confusion)
    for (std::size_t t = 0; t < 3; ++t) CHECK(c(t, t) > 0.99);
}

TEST_CASE("dawid-skene learns a flipped adversary") {
  std::vector<Annotation> tr;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 50; ++i) {
    const std::size_t t = (i * 7) % 3 == 0 ? 1 : 0;
    truth.push_back(t);
    tr.push_back({i, 0, t});
    tr.push_back({i, 1, t});
    tr.push_back({i, 2, 1 - t});
  }
  AnnotationSet ann(50, 3, tr);
  auto r = dawid_skene(ann, 2);
  CHECK(r.hard == truth);
  CHECK(r.model.confusion[2](0, 1) > 0.95);
  CHECK(r.model.confusion[2](1, 0) > 0.95);
  CHECK(r.model.confusion[0](0, 0) > 0.95);

  // the returned posterior is Bayes rule under the returned parameters,
  // one E step after them
  auto next = dawid_skene(ann, 2, {r.iterations, 0.0, 1e-2});
  auto oracle = ds_posterior_oracle(next.model, ann, 2);
  for (std::size_t k = 0; k < oracle.values.size(); ++k)
    CHECK(std::abs(oracle.values[k] - next.soft.values[k]) < 1e-12);
}

TEST_CASE("dawid-skene objective never decreases") {
  std::mt19937_64 rng(21);
  const auto panel = standard_panel(2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = gen_2d(Dataset2d::moon, 400, std::nullopt, seed);
    auto ann = simulate_annotations(g.truth, 2, panel, derive_seed(seed, 9));
    auto r = dawid_skene(ann, 2, {200, 0.0, 1e-2});
    for (std::size_t k = 1; k < r.log_posterior.size(); ++k)
      CHECK(r.log_posterior[k] >= r.log_posterior[k - 1] - 1e-9);
    for (std::size_t k = 1; k < r.log_likelihood.size(); ++k)
      CHECK(r.log_likelihood[k] >= r.log_likelihood[k - 1] - 1e-9);
  }
  for (int rep = 0; rep < 10; ++rep) {
    auto ann = testing::random_annotations(rng, 40, 6, 3, 0.5);
    auto r = dawid_skene(ann, 3, {100, 0.0, 1e-2});
    for (std::size_t k = 1; k < r.log_posterior.size(); ++k)
      CHECK(r.log_posterior[k] >= r.log_posterior[k - 1] - 1e-9);
  }
}

TEST_CASE("dawid-skene on the moon panel") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto g = gen_2d(Dataset2d::moon, 1000, std::nullopt, seed);
    auto ann = simulate_annotations(g.truth, 2, standard_panel(2), derive_seed(seed, 9));
    total += f1_score(dawid_skene(ann, 2).hard, to_gold(g.truth)).micro;
  }
  CHECK(total / 3.0 == doctest::Approx(0.978).epsilon(0.025));
}

TEST_CASE("dawid-skene annotation reliability is the confusion diagonal") {
  std::mt19937_64 rng(2);
  auto ann = testing::random_annotations(rng, 30, 4, 3, 0.8);
  auto r = dawid_skene(ann, 3);
  auto rel = ds_annotation_reliability(r.model, ann);
  REQUIRE(rel.size() == ann.size());
  for (std::size_t k = 0; k < rel.size(); ++k) {
    const auto& a = ann.triples()[k];
    CHECK(rel[k] == r.model.confusion[a.annotator](a.label, a.label));
  }
}
