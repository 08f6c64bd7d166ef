#include <doctest.h>

#include <map>

#include "crowdrel/error.hpp"
#include "crowdrel/featurize.hpp"
#include "crowdrel/simulate.hpp"
#include "support.hpp"

using namespace crowdrel;
using doctest::Approx;

namespace {

std::vector<std::size_t> counts(const std::vector<std::size_t>& truth, std::size_t labels) {
  std::vector<std::size_t> c(labels, 0);
  for (auto t : truth) ++c[t];
  return c;
}

double error_rate(const AnnotationSet& ann, const std::vector<std::size_t>& truth,
                  std::size_t annotator) {
  double wrong = 0, total = 0;
  for (const auto& a : ann.triples())
    if (a.annotator == annotator) {
      wrong += a.label != truth[a.instance];
      ++total;
    }
  return wrong / total;
}

}  // namespace

TEST_CASE("2-d generators: class balance and determinism") {
  CHECK(counts(gen_2d(Dataset2d::moon, 1000, std::nullopt, 1).truth, 2) ==
        std::vector<std::size_t>{500, 500});
  CHECK(counts(gen_2d(Dataset2d::circle, 1000, std::nullopt, 1).truth, 2) ==
        std::vector<std::size_t>{500, 500});
  CHECK(counts(gen_2d(Dataset2d::three_class, 1000, std::nullopt, 1).truth, 3) ==
        std::vector<std::size_t>{334, 333, 333});

  auto a = gen_2d(Dataset2d::moon, 200, 0.2, 9), b = gen_2d(Dataset2d::moon, 200, 0.2, 9);
  CHECK(a.truth == b.truth);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(a.instances[i].id == b.instances[i].id);
    CHECK(a.instances[i].features == b.instances[i].features);
  }
  auto c = gen_2d(Dataset2d::moon, 200, 0.2, 10);
  CHECK(c.instances[0].features != a.instances[0].features);

  CHECK(parse_dataset_2d("three-class") == Dataset2d::three_class);
  CHECK_THROWS_AS(parse_dataset_2d("spiral"), Error);
}

TEST_CASE("simulated error rates") {
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 10000; ++i) truth.push_back(i % 3);
  const std::vector<AnnotatorProfile> panel = {AnnotatorProfile::parse("broad"),
                                               AnnotatorProfile::parse("adversarial"),
                                               AnnotatorProfile::parse("random"),
                                               AnnotatorProfile::parse("narrow-1")};
  auto ann = simulate_annotations(truth, 3, panel, 77);
  CHECK(std::abs(error_rate(ann, truth, 0) - 0.05) < 0.01);
  CHECK(std::abs(error_rate(ann, truth, 1) - 0.80) < 0.01);
  CHECK(std::abs(error_rate(ann, truth, 2) - 2.0 / 3.0) < 0.02);

  double in = 0, in_ok = 0, off = 0, off_ok = 0;
  for (const auto& a : ann.triples()) {
    if (a.annotator != 3) continue;
    if (truth[a.instance] == 1) {
      ++in;
      in_ok += a.label == 1;
    } else {
      ++off;
      off_ok += a.label == truth[a.instance];
    }
  }
  CHECK(in_ok / in == 1.0);
  CHECK(std::abs(off_ok / off - kNarrowOffDomainAccuracy) < 0.02);
  CHECK(validate({}, ann, 3).size() > 0);  // no instances given: annotations dangle
  std::vector<Instance> inst(10000);
  for (std::size_t i = 0; i < inst.size(); ++i) inst[i] = {"i" + std::to_string(i), {0.0}, {}};
  CHECK(validate(inst, ann, 3).empty());
}

TEST_CASE("graded panel error rates") {
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 10000; ++i) truth.push_back(i % 2);
  const auto panel = graded_panel();
  REQUIRE(panel.size() == 5);
  auto ann = simulate_annotations(truth, 2, panel, 5);
  const double nominal[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(error_rate(ann, truth, j) - nominal[j]) < 0.01);
}

TEST_CASE("annotation simulation is seeded per annotator") {
  std::vector<std::size_t> truth(500, 0);
  auto p1 = standard_panel(2);
  auto a = simulate_annotations(truth, 2, p1, 3), b = simulate_annotations(truth, 2, p1, 3);
  CHECK(a.triples() == b.triples());
  // dropping the last annotator leaves the others' draws untouched
  auto shorter = std::vector<AnnotatorProfile>(p1.begin(), p1.end() - 1);
  auto c = simulate_annotations(truth, 2, shorter, 3);
  for (const auto& t : c.triples())
    CHECK(std::find(a.triples().begin(), a.triples().end(), t) != a.triples().end());
}

TEST_CASE("keep probability thins the panel") {
  std::vector<std::size_t> truth(1000, 1);
  auto ann = simulate_annotations(truth, 2, standard_panel(2), 8, 0.5);
  CHECK_FALSE(ann.is_complete_panel());
  CHECK(std::abs(double(ann.size()) / 5000.0 - 0.5) < 0.03);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(ann.of_instance(i).size() >= 1);
}

TEST_CASE("profile names round trip") {
  for (const char* name : {"narrow-2", "broad", "random", "adversarial", "graded-0.30"})
    CHECK(AnnotatorProfile::parse(name).name() == name);
  CHECK_THROWS_AS(AnnotatorProfile::parse("sloppy"), Error);
  CHECK(standard_panel(3).size() == 6);
  CHECK_THROWS_AS(simulate_annotations(std::vector<std::size_t>{0, 1}, 2,
                                       std::vector{AnnotatorProfile::parse("narrow-5")}, 1),
                  Error);
}

TEST_CASE("text generator") {
  auto a = gen_text(500, 3, 4), b = gen_text(500, 3, 4);
  CHECK(counts(a.truth, 3) == std::vector<std::size_t>{167, 167, 166});
  REQUIRE(a.instances.size() == 500);
  CHECK(a.instances[7].text == b.instances[7].text);
  CHECK(a.instances[0].id == "q000");
  std::vector<std::string> corpus;
  for (const auto& inst : a.instances) corpus.push_back(inst.text.at(0));
  auto vocab = Vocabulary::fit(corpus);
  CHECK(vocab.size() > 150);
  CHECK(vocab.size() <= 200 + 3 * 40);
}
