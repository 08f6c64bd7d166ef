#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdrel/baselines.hpp"
#include "crowdrel/error.hpp"
#include "crowdrel/eval.hpp"
#include "crowdrel/model.hpp"
#include "crowdrel/rng.hpp"
#include "crowdrel/simulate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace crowdrel;
using doctest::Approx;

namespace {

Priors make_priors(std::vector<std::vector<double>> label, std::vector<double> rel) {
  Priors p;
  p.label = Matrix(label.size(), label.front().size());
  for (std::size_t i = 0; i < label.size(); ++i)
    for (std::size_t t = 0; t < label[i].size(); ++t) p.label(i, t) = label[i][t];
  p.reliability = std::move(rel);
  return p;
}

struct Toy {
  Matrix x;
  AnnotationSet ann;
  std::size_t labels;
};

Toy random_toy(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t labels,
               std::size_t dim) {
  Toy t;
  t.labels = labels;
  t.ann = testing::random_annotations(rng, n, m, labels, 0.7);
  t.x = testing::random_matrix(rng, n, dim);
  return t;
}

TrainConfig small_config(TrainMode mode, EstimatorInput input, std::uint64_t seed) {
  TrainConfig c;
  c.mode = mode;
  c.estimator_input = input;
  c.classifier_hidden = 4;
  c.estimator_hidden = 3;
  c.seed = seed;
  return c;
}

// Perturb every parameter off zero so that ReLU kinks are unlikely.
void jitter(ReliabilityModel& m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.1);
  for (double& v : m.classifier.params()) v += g(rng);
  for (double& v : m.estimator.params()) v += g(rng);
}

}  // namespace

TEST_CASE("emission probabilities") {
  CHECK(emission_prob(2, 2, 1, 3) == 1.0);
  CHECK(emission_prob(0, 2, 1, 3) == 0.0);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t t = 0; t < 4; ++t) CHECK(emission_prob(a, t, 0, 4) == 0.25);
}

TEST_CASE("worked two-annotator posterior") {
  // p(t=0) = 0.6; p(r1)=0.8, p(r2)=0.5; a1 = 0, a2 = 1
  AnnotationSet ann(1, 2, {{0, 0, 0}, {0, 1, 1}});
  auto post = posterior_from_priors(make_priors({{0.6, 0.4}}, {0.8, 0.5}), ann, 2);
  CHECK(post.label(0, 0) == Approx(0.8182).epsilon(1e-3));
  CHECK(post.pi(0, 0, 1) == Approx(0.7273).epsilon(1e-3));
  CHECK(post.pi(0, 0, 0) == Approx(0.0909).epsilon(1e-3));
  CHECK(post.pi(0, 1, 1) == 0.0);
  CHECK(post.pi(0, 1, 0) == Approx(0.1818).epsilon(1e-3));
  CHECK(post.reliability[0] == Approx(0.7273).epsilon(1e-3));
  // exact fractions: 0.135 / 0.165 and 0.12 / 0.165
  CHECK(post.label(0, 0) == Approx(0.135 / 0.165).epsilon(1e-12));
  CHECK(post.pi(0, 0, 1) == Approx(0.12 / 0.165).epsilon(1e-12));
}

TEST_CASE("fully reliable single annotator pins the label") {
  AnnotationSet ann(1, 1, {{0, 0, 2}});
  auto post = posterior_from_priors(make_priors({{0.5, 0.3, 0.2}}, {1.0}), ann, 3);
  CHECK(post.label(0, 2) == Approx(1.0).epsilon(1e-9));
  CHECK(post.reliability[0] == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("an unreliable annotator leaves the label posterior alone") {
  AnnotationSet two(1, 2, {{0, 0, 1}, {0, 1, 0}});
  AnnotationSet one(1, 1, {{0, 0, 1}});
  auto with = posterior_from_priors(make_priors({{0.3, 0.7}}, {0.6, 0.0}), two, 2);
  auto without = posterior_from_priors(make_priors({{0.3, 0.7}}, {0.6}), one, 2);
  CHECK(with.reliability[1] < 1e-11);
  CHECK(with.label(0, 0) == Approx(without.label(0, 0)).epsilon(1e-10));
  CHECK(with.label(0, 1) == Approx(without.label(0, 1)).epsilon(1e-10));
}

TEST_CASE("posterior equals brute-force enumeration") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng() % 20, m = 1 + rng() % 5, labels = 2 + rng() % 3;
    auto ann = testing::random_annotations(rng, n, m, labels, 0.6);
    auto priors = testing::random_priors(rng, ann, labels);
    auto post = posterior_from_priors(priors, ann, labels);
    auto bf = oracle::enumerate(priors, ann, labels);
    for (std::size_t k = 0; k < bf.joint.size(); ++k)
      REQUIRE(std::abs(post.joint[k] - bf.joint[k]) < 1e-10);
    for (std::size_t k = 0; k < bf.label.values.size(); ++k)
      REQUIRE(std::abs(post.label.values[k] - bf.label.values[k]) < 1e-10);
    for (std::size_t k = 0; k < bf.reliability.size(); ++k)
      REQUIRE(std::abs(post.reliability[k] - bf.reliability[k]) < 1e-10);
    CHECK(marginal_log_likelihood(priors, ann, labels) ==
          Approx(bf.log_likelihood).epsilon(1e-12));
  }
}

TEST_CASE("posterior structure: j-invariance, normalization, zero rule") {
  std::mt19937_64 rng(202);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng() % 20, m = 1 + rng() % 5, labels = 2 + rng() % 3;
    auto ann = testing::random_annotations(rng, n, m, labels, 0.6);
    auto post = posterior_from_priors(testing::random_priors(rng, ann, labels), ann, labels);
    std::size_t k0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = ann.of_instance(i);
      double label_sum = 0.0;
      for (std::size_t t = 0; t < labels; ++t) label_sum += post.label(i, t);
      CHECK(label_sum == Approx(1.0).epsilon(1e-9));
      for (std::size_t a = 0; a < row.size(); ++a) {
        const std::size_t k = k0 + a;
        double table = 0.0;
        for (std::size_t t = 0; t < labels; ++t) {
          table += post.pi(k, t, 0) + post.pi(k, t, 1);
          const double marg = post.pi(k, t, 0) + post.pi(k, t, 1);
          const double first = post.pi(k0, t, 0) + post.pi(k0, t, 1);
          CHECK(std::abs(marg - first) < 1e-10);
          CHECK((post.pi(k, t, 1) == 0.0) == (row[a].label != t));
        }
        CHECK(std::abs(table - 1.0) < 1e-9);
      }
      k0 += row.size();
    }
  }
}

TEST_CASE("q objective matches the quadruple loop") {
  std::mt19937_64 rng(303);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng() % 15, m = 1 + rng() % 5, labels = 2 + rng() % 3;
    auto ann = testing::random_annotations(rng, n, m, labels, 0.6);
    auto p_old = testing::random_priors(rng, ann, labels);
    auto p_new = testing::random_priors(rng, ann, labels);
    auto post = posterior_from_priors(p_old, ann, labels);
    CHECK(q_objective(p_new, post, ann) ==
          Approx(oracle::q_naive(p_new, post, ann)).epsilon(1e-9));
  }
}

TEST_CASE("q objective: entropies when priors equal the posteriors") {
  std::mt19937_64 rng(304);
  auto ann = testing::random_annotations(rng, 8, 3, 3, 0.7);
  auto post = posterior_from_priors(testing::random_priors(rng, ann, 3), ann, 3);
  Priors same;
  same.label = post.label;
  same.reliability = post.reliability;
  double neg_entropy = 0.0;
  for (double q : post.label.values)
    if (q > 0) neg_entropy += q * std::log(q);
  for (double q : post.reliability) {
    if (q > 0) neg_entropy += q * std::log(q);
    if (q < 1) neg_entropy += (1 - q) * std::log(1 - q);
  }
  CHECK(q_objective(same, post, ann) - emission_term(post, ann) ==
        Approx(neg_entropy).epsilon(1e-10));
}

TEST_CASE("emission term vanishes for a fully reliable posterior") {
  AnnotationSet ann(2, 2, {{0, 0, 1}, {0, 1, 1}, {1, 0, 0}});
  Posterior post;
  post.n_labels = 2;
  post.joint.assign(ann.size() * 4, 0.0);
  for (std::size_t k = 0; k < ann.size(); ++k)
    post.joint[(k * 2 + ann.triples()[k].label) * 2 + 1] = 1.0;
  CHECK(emission_term(post, ann) == 0.0);
}

TEST_CASE("cross-entropy losses") {
  std::mt19937_64 rng(404);
  SUBCASE("uniform classifier over six labels") {
    auto ann = testing::random_annotations(rng, 10, 3, 6, 0.7);
    auto priors = testing::random_priors(rng, ann, 6);
    auto post = posterior_from_priors(priors, ann, 6);
    priors.label = Matrix(10, 6, 1.0 / 6.0);
    CHECK(ce_losses(priors, post, ann).classifier == Approx(std::log(6.0)));
  }
  SUBCASE("matched priors reach the mean entropy") {
    auto ann = testing::random_annotations(rng, 10, 3, 3, 0.7);
    auto post = posterior_from_priors(testing::random_priors(rng, ann, 3), ann, 3);
    Priors same{post.label, post.reliability};
    auto l = ce_losses(same, post, ann);
    double h_t = 0.0, h_r = 0.0;
    for (double q : post.label.values)
      if (q > 0) h_t -= q * std::log(q);
    for (double q : post.reliability) {
      if (q > 0) h_r -= q * std::log(q);
      if (q < 1) h_r -= (1 - q) * std::log(1 - q);
    }
    CHECK(l.classifier == Approx(h_t / 10.0).epsilon(1e-10));
    CHECK(l.estimator == Approx(h_r / double(ann.size())).epsilon(1e-10));
  }
  SUBCASE("naive sums") {
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t n = 1 + rng() % 15, m = 1 + rng() % 5, labels = 2 + rng() % 3;
      auto ann = testing::random_annotations(rng, n, m, labels, 0.6);
      auto priors = testing::random_priors(rng, ann, labels);
      auto post = posterior_from_priors(testing::random_priors(rng, ann, labels), ann, labels);
      double lt = 0.0, lr = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < labels; ++t)
          lt -= post.label(i, t) * std::log(priors.label(i, t));
      for (std::size_t k = 0; k < ann.size(); ++k)
        lr -= post.reliability[k] * std::log(priors.reliability[k]) +
              (1 - post.reliability[k]) * std::log(1 - priors.reliability[k]);
      auto l = ce_losses(priors, post, ann);
      CHECK(l.classifier == Approx(lt / double(n)).epsilon(1e-9));
      CHECK(l.estimator == Approx(lr / double(ann.size())).epsilon(1e-9));
    }
  }
}

TEST_CASE("model gradients match finite differences of Q and the CE losses") {
  std::mt19937_64 rng(505);
  const double h = 1e-6;
  int checked = 0;
  for (int rep = 0; rep < 24; ++rep) {
    const auto input = rep % 2 ? EstimatorInput::raw_feature : EstimatorInput::classifier_hidden;
    auto toy = random_toy(rng, 6, 3, 3, 2);
    auto cfg = small_config(TrainMode::em, input, rng());
    auto model = ReliabilityModel::init(2, 3, 3, cfg);
    jitter(model, rng);
    const auto post = e_step(model, toy.x, toy.ann);
    const double n = 6.0, n_obs = double(toy.ann.size());

    // objective as a function of both parameter blocks
    auto objective = [&](const ReliabilityModel& m, int which) {
      switch (which) {
        case 0: return -(q_objective(m, post, toy.x, toy.ann) - emission_term(post, toy.ann));
        case 1: return ce_losses(m, post, toy.x, toy.ann).total();
        case 2: return ce_losses(m, post, toy.x, toy.ann).estimator;
        default: return ce_losses(m, post, toy.x, toy.ann).classifier;
      }
    };
    const LossSpec specs[] = {{1.0, 1.0, true},
                              {1.0 / n, 1.0 / n_obs, true},
                              {0.0, 1.0 / n_obs, false},
                              {1.0 / n, 0.0, false}};
    for (int which = 0; which < 4; ++which) {
      auto g = loss_gradient(model, toy.x, toy.ann, post, specs[which]);
      CHECK(g.loss == Approx(objective(model, which)).epsilon(1e-10));
      auto check_block = [&](bool classifier) {
        auto grad = classifier ? g.classifier : g.estimator;
        const std::size_t size = classifier ? model.classifier.params().size()
                                            : model.estimator.params().size();
        for (std::size_t k = 0; k < size; ++k) {
          auto plus = model, minus = model;
          (classifier ? plus.classifier : plus.estimator).params()[k] += h;
          (classifier ? minus.classifier : minus.estimator).params()[k] -= h;
          const double fd = (objective(plus, which) - objective(minus, which)) / (2 * h);
          // the CE-ALT estimator phase holds the classifier fixed
          const double want = (which == 2 && classifier) ? 0.0 : fd;
          // central differences carry ~1e-9 roundoff at this h
          CHECK_MESSAGE(std::abs(grad[k] - want) <= 1e-4 * std::max(std::abs(grad[k]), std::abs(want)) + 1e-7,
                        "k=" << k << " g=" << grad[k] << " fd=" << want);
        }
      };
      check_block(true);
      check_block(false);
      ++checked;
    }
  }
  CHECK(checked == 96);
}

TEST_CASE("annotator permutation permutes reliabilities only") {
  std::mt19937_64 rng(606);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t m = 4;
    auto toy = random_toy(rng, 12, m, 3, 2);
    auto cfg = small_config(TrainMode::ce_jt, EstimatorInput::classifier_hidden, 100 + rep);
    cfg.inner_iters = 5;
    cfg.max_outer = 2;
    auto a = ReliabilityModel::init(2, 3, m, cfg);

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto tr = toy.ann.triples();
    for (auto& t : tr) t.annotator = perm[t.annotator];
    AnnotationSet permuted(toy.ann.n_instances(), m, tr);

    auto b = a;
    const std::size_t h = cfg.classifier_hidden, width = b.estimator.shape().hidden1;
    auto wa = a.estimator.weight(0);
    auto wb = b.estimator.weight(0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < width; ++c)
        wb[(h + perm[j]) * width + c] = wa[(h + j) * width + c];

    train(a, toy.x, toy.ann, cfg);
    train(b, toy.x, permuted, cfg);

    auto pa = e_step(a, toy.x, toy.ann);
    auto pb = e_step(b, toy.x, permuted);
    for (std::size_t k = 0; k < pa.label.values.size(); ++k)
      CHECK(std::abs(pa.label.values[k] - pb.label.values[k]) < 1e-9);
    for (std::size_t k = 0; k < toy.ann.size(); ++k) {
      const auto& t = toy.ann.triples()[k];
      const auto it = std::find(permuted.triples().begin(), permuted.triples().end(),
                                Annotation{t.instance, perm[t.annotator], t.label});
      REQUIRE(it != permuted.triples().end());
      CHECK(std::abs(pa.reliability[k] - pb.reliability[it - permuted.triples().begin()]) < 1e-9);
    }
  }
}

TEST_CASE("pretraining on unanimous perfect annotators fits a separable toy") {
  std::vector<Annotation> tr;
  Matrix x(40, 2);
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t t = i % 2;
    x(i, 0) = (t ? 2.0 : -2.0) + 0.05 * double(i % 7);
    x(i, 1) = 0.1 * double(i % 5);
    truth.push_back(t);
    for (std::size_t j = 0; j < 3; ++j) tr.push_back({i, j, t});
  }
  AnnotationSet ann(40, 3, tr);
  TrainConfig cfg;
  cfg.seed = 4;
  auto model = pretrain(x, ann, 2, cfg);
  auto probs = forward(model.classifier, x).probs;
  CHECK(f1_score(argmax_rows(probs), to_gold(truth)).micro == 1.0);
}

TEST_CASE("pretraining on the moon panel starts near dawid-skene") {
  auto g = gen_2d(Dataset2d::moon, 1000, std::nullopt, 0);
  auto ann = simulate_annotations(g.truth, 2, standard_panel(2), derive_seed(0, 9));
  const auto gold = to_gold(g.truth);
  TrainConfig cfg;
  auto model = pretrain(feature_matrix(g.instances), ann, 2, cfg);
  const double ds = f1_score(dawid_skene(ann, 2).hard, gold).micro;
  const double start =
      f1_score(argmax_rows(forward(model.classifier, feature_matrix(g.instances)).probs), gold)
          .micro;
  CHECK(std::abs(start - ds) <= 0.02);

  // agreement targets for the adversary track its correctness rate
  const auto ds_labels = pretrain_labels(ann, 2, PretrainSource::ds);
  double agree = 0.0, correct = 0.0, count = 0.0;
  for (const auto& a : ann.triples()) {
    if (ann.annotator_ids[a.annotator] != "adversarial") continue;
    agree += a.label == ds_labels[a.instance];
    correct += a.label == g.truth[a.instance];
    ++count;
  }
  CHECK(agree / count == Approx(correct / count).epsilon(0.02));
  CHECK(correct / count == Approx(0.2).epsilon(0.05));
}

TEST_CASE("zero outer iterations return the pretrained state") {
  std::mt19937_64 rng(707);
  auto toy = random_toy(rng, 20, 3, 2, 2);
  auto cfg = small_config(TrainMode::ce_jt, EstimatorInput::classifier_hidden, 5);
  cfg.pretrain_epochs = 5;
  cfg.max_outer = 0;
  auto model = pretrain(toy.x, toy.ann, 2, cfg);
  auto before = model;
  auto r = train(model, toy.x, toy.ann, cfg);
  CHECK(r.trace.empty());
  CHECK(std::equal(before.classifier.params().begin(), before.classifier.params().end(),
                   model.classifier.params().begin()));
  CHECK(std::equal(before.estimator.params().begin(), before.estimator.params().end(),
                   model.estimator.params().begin()));
}

TEST_CASE("outer caps by mode") {
  TrainConfig c;
  c.mode = TrainMode::em;
  CHECK(c.outer_limit() == 500);
  c.mode = TrainMode::ce_jt;
  CHECK(c.outer_limit() == 20);
  c.mode = TrainMode::ce_alt;
  CHECK(c.outer_limit() == 20);
  c.max_outer = 3;
  CHECK(c.outer_limit() == 3);
}

TEST_CASE("generalized EM: a Q gain never lowers the likelihood") {
  std::mt19937_64 rng(808);
  auto g = gen_2d(Dataset2d::moon, 300, std::nullopt, 3);
  auto ann = simulate_annotations(g.truth, 2, standard_panel(2), derive_seed(3, 9));
  TrainConfig cfg;
  cfg.mode = TrainMode::em;
  cfg.max_outer = 8;
  cfg.early_stop_tol = 1e-12;
  const Matrix x = feature_matrix(g.instances);
  auto model = pretrain(x, ann, 2, cfg);
  auto r = train(model, x, ann, cfg);
  REQUIRE(r.trace.size() >= 2);
  for (const auto& row : r.trace) {
    if (row.q_end >= row.q_start) CHECK(row.log_likelihood_end >= row.log_likelihood_start - 1e-9);
    CHECK(row.log_likelihood_start == Approx(row.objective_start * 300.0));
  }
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].log_likelihood_start == r.trace[k - 1].log_likelihood_end);
}

TEST_CASE("prediction ties go to the lowest label") {
  Matrix p(2, 2);
  p(0, 0) = 0.9, p(0, 1) = 0.1, p(1, 0) = 0.5, p(1, 1) = 0.5;
  CHECK(argmax_rows(p) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("confident agreement drives reliability to one") {
  AnnotationSet ann(1, 3, {{0, 0, 1}, {0, 1, 1}, {0, 2, 1}});
  auto post = posterior_from_priors(
      make_priors({{1e-6, 1.0 - 1e-6}}, {0.999, 0.999, 0.999}), ann, 2);
  for (double r : post.reliability) CHECK(r > 0.999);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir;
  std::mt19937_64 rng(909);
  auto toy = random_toy(rng, 15, 3, 3, 2);
  auto cfg = small_config(TrainMode::ce_jt, EstimatorInput::raw_feature, 12);
  cfg.pretrain_epochs = 3;
  cfg.max_outer = 2;
  cfg.inner_iters = 3;
  auto model = pretrain(toy.x, toy.ann, 3, cfg);
  train(model, toy.x, toy.ann, cfg);
  LabelSet labels({"x", "y", "z"});
  save_model(dir.file("m.json"), model, labels, cfg);
  auto back = load_model(dir.file("m.json"));
  CHECK(back.labels.names() == labels.names());
  CHECK(back.model.outer_iteration == model.outer_iteration);
  CHECK(back.model.input_mode == EstimatorInput::raw_feature);
  CHECK(back.config.max_outer == 2u);
  auto p1 = predict_labels(model, toy.x, toy.ann);
  auto p2 = predict_labels(back.model, toy.x, toy.ann);
  CHECK(p1.posterior.values == p2.posterior.values);

  testing::write_file(dir.path() / "bad.json", "{\"format\":\"other\"}");
  CHECK_THROWS_AS(load_model(dir.file("bad.json")), Error);
}

TEST_CASE("training inputs are checked") {
  std::mt19937_64 rng(1010);
  auto toy = random_toy(rng, 10, 3, 2, 2);
  auto cfg = small_config(TrainMode::ce_jt, EstimatorInput::classifier_hidden, 1);
  auto model = ReliabilityModel::init(2, 2, 3, cfg);
  CHECK_THROWS_AS(e_step(model, Matrix(9, 2), toy.ann), Error);
  CHECK_THROWS_AS(e_step(model, Matrix(10, 3), toy.ann), Error);
  cfg.inner_iters = 0;
  CHECK_THROWS_AS(cfg.check(), Error);
  CHECK_THROWS_AS(parse_mode("sgd"), Error);
}
