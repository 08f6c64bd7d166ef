#include "crowdrel/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "crowdrel/baselines.hpp"
#include "crowdrel/error.hpp"
#include "crowdrel/eval.hpp"
#include "crowdrel/rng.hpp"

namespace crowdrel {

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::em: return "em";
    case TrainMode::ce_alt: return "ce-alt";
    case TrainMode::ce_jt: return "ce-jt";
  }
  return "?";
}

const char* estimator_input_name(EstimatorInput input) {
  return input == EstimatorInput::raw_feature ? "raw-feature" : "classifier-hidden";
}

const char* pretrain_source_name(PretrainSource source) {
  return source == PretrainSource::mv ? "mv" : "ds";
}

TrainMode parse_mode(const std::string& text) {
  if (text == "em") return TrainMode::em;
  if (text == "ce-alt") return TrainMode::ce_alt;
  if (text == "ce-jt") return TrainMode::ce_jt;
  throw Error(ErrorKind::argument, "unknown training mode '" + text + "' (em, ce-alt, ce-jt)");
}

EstimatorInput parse_estimator_input(const std::string& text) {
  if (text == "raw-feature") return EstimatorInput::raw_feature;
  if (text == "classifier-hidden") return EstimatorInput::classifier_hidden;
  throw Error(ErrorKind::argument, "unknown estimator input '" + text +
                                       "' (raw-feature, classifier-hidden)");
}

PretrainSource parse_pretrain_source(const std::string& text) {
  if (text == "mv") return PretrainSource::mv;
  if (text == "ds") return PretrainSource::ds;
  throw Error(ErrorKind::argument, "unknown pretraining source '" + text + "' (mv, ds)");
}

std::size_t TrainConfig::outer_limit() const {
  if (max_outer) return *max_outer;
  return mode == TrainMode::em ? 500 : 20;
}

void TrainConfig::check() const {
  if (inner_iters < 1) throw Error(ErrorKind::validation, "inner iterations must be >= 1");
  if (!(early_stop_tol > 0.0))
    throw Error(ErrorKind::validation, "early-stop tolerance must be positive");
  if (classifier_hidden == 0 || estimator_hidden == 0)
    throw Error(ErrorKind::validation, "hidden widths must be positive");
  if (!(adam.alpha > 0.0)) throw Error(ErrorKind::validation, "learning rate must be positive");
}

double emission_prob(std::size_t a, std::size_t t, int r, std::size_t n_labels) {
  if (a >= n_labels || t >= n_labels)
    throw Error(ErrorKind::label, "emission_prob: label out of range");
  if (r == 0) return 1.0 / static_cast<double>(n_labels);
  return a == t ? 1.0 : 0.0;
}

ReliabilityModel ReliabilityModel::init(std::size_t feature_dim, std::size_t n_labels,
                                        std::size_t n_annotators,
                                        const TrainConfig& config) {
  if (n_labels < 2) throw Error(ErrorKind::argument, "need at least two labels");
  if (n_annotators == 0) throw Error(ErrorKind::argument, "need at least one annotator");
  ReliabilityModel m;
  m.n_labels = n_labels;
  m.n_annotators = n_annotators;
  m.input_mode = config.estimator_input;
  m.classifier = Fnn::glorot({feature_dim, config.classifier_hidden, config.classifier_hidden,
                              n_labels, Head::softmax},
                             derive_seed(config.seed, 1));
  const std::size_t repr = config.estimator_input == EstimatorInput::raw_feature
                               ? feature_dim
                               : config.classifier_hidden;
  m.estimator = Fnn::glorot({repr + n_annotators, config.estimator_hidden,
                             config.estimator_hidden, 1, Head::sigmoid},
                            derive_seed(config.seed, 2));
  return m;
}

namespace {

std::size_t count_observed(const AnnotationSet& annotations) {
  if (annotations.size() == 0)
    throw Error(ErrorKind::validation, "no annotations to train on");
  return annotations.size();
}

void check_inputs(const ReliabilityModel& model, const Matrix& features,
                  const AnnotationSet& annotations) {
  if (features.rows != annotations.n_instances())
    throw Error(ErrorKind::dimension, "feature rows (" + std::to_string(features.rows) +
                                          ") != annotated instances (" +
                                          std::to_string(annotations.n_instances()) + ")");
  if (annotations.n_annotators() > model.n_annotators)
    throw Error(ErrorKind::dimension, "model was built for " +
                                          std::to_string(model.n_annotators) +
                                          " annotators, data has " +
                                          std::to_string(annotations.n_annotators()));
  for (const auto& a : annotations.triples())
    if (a.label >= model.n_labels) throw Error(ErrorKind::label, "label index out of range");
}

struct Cell {
  std::size_t instance;
  std::size_t annotator;
};

const Matrix& instance_repr(const ReliabilityModel& model, const Matrix& features,
                            const ForwardPass& cls) {
  return model.input_mode == EstimatorInput::raw_feature ? features : cls.hidden2;
}

template <typename Cells>
Matrix estimator_input(const ReliabilityModel& model, const Matrix& repr,
                       const Cells& cells) {
  const std::size_t width = repr.cols + model.n_annotators;
  Matrix in(cells.size(), width);
  std::size_t r = 0;
  for (const auto& c : cells) {
    auto src = repr.row(c.instance);
    auto dst = in.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[repr.cols + c.annotator] = 1.0;
    ++r;
  }
  return in;
}

double floor_log(double p) { return std::log(std::max(p, kPriorFloor)); }

Matrix reliability_targets(const Posterior& posterior) {
  Matrix t(posterior.reliability.size(), 1);
  std::copy(posterior.reliability.begin(), posterior.reliability.end(), t.values.begin());
  return t;
}

Matrix one_hot(std::span<const std::size_t> labels, std::size_t n_labels) {
  Matrix m(labels.size(), n_labels);
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, labels[i]) = 1.0;
  return m;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

// Hard-target cross entropy over shuffled minibatches, one fresh Adam state.
void minibatch_fit(Fnn& net, const Matrix& input, const Matrix& targets,
                   const TrainConfig& config, std::mt19937_64& rng) {
  AdamState state(net.params().size());
  const std::size_t n = input.rows;
  const std::size_t batch =
      config.pretrain_batch == 0 ? n : std::min(config.pretrain_batch, n);
  if (batch == n) {
    for (std::size_t e = 0; e < config.pretrain_epochs; ++e) {
      auto g = soft_ce_gradient(net, input, targets, static_cast<double>(n));
      adam_step(net, g.grads.params, state, config.adam);
    }
    return;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  for (std::size_t e = 0; e < config.pretrain_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const auto rows = std::span(order).subspan(start, std::min(batch, n - start));
      const Matrix x = gather_rows(input, rows);
      const Matrix y = gather_rows(targets, rows);
      auto g = soft_ce_gradient(net, x, y, static_cast<double>(rows.size()));
      adam_step(net, g.grads.params, state, config.adam);
    }
  }
}

}  // namespace

Priors compute_priors(const ReliabilityModel& model, const Matrix& features,
                      const AnnotationSet& annotations) {
  check_inputs(model, features, annotations);
  auto cls = forward(model.classifier, features);
  auto est_in = estimator_input(model, instance_repr(model, features, cls),
                                annotations.triples());
  auto est = forward(model.estimator, est_in);
  Priors p;
  p.label = std::move(cls.probs);
  p.reliability = std::move(est.probs.values);
  return p;
}

Matrix reliability_prior_grid(const ReliabilityModel& model, const Matrix& features) {
  auto cls = forward(model.classifier, features);
  std::vector<Cell> cells;
  cells.reserve(features.rows * model.n_annotators);
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < model.n_annotators; ++j) cells.push_back({i, j});
  auto est = forward(model.estimator,
                     estimator_input(model, instance_repr(model, features, cls), cells));
  Matrix grid(features.rows, model.n_annotators);
  grid.values = std::move(est.probs.values);
  return grid;
}

Posterior posterior_from_priors(const Priors& priors, const AnnotationSet& annotations,
                                std::size_t n_labels) {
  const auto& triples = annotations.triples();
  if (priors.label.rows != annotations.n_instances() || priors.label.cols != n_labels ||
      priors.reliability.size() != triples.size())
    throw Error(ErrorKind::dimension, "priors do not match the annotation set");

  Posterior post;
  post.n_labels = n_labels;
  post.joint.assign(triples.size() * n_labels * 2, 0.0);
  post.label = Matrix(annotations.n_instances(), n_labels);
  post.reliability.assign(triples.size(), 0.0);

  const double log_uniform = -std::log(static_cast<double>(n_labels));
  std::vector<double> log_prior(n_labels), log_gamma_sum(n_labels), table(n_labels * 2);
  std::vector<double> log_gamma;

  std::size_t k0 = 0;
  for (std::size_t i = 0; i < annotations.n_instances(); ++i) {
    const auto row = annotations.of_instance(i);
    for (std::size_t t = 0; t < n_labels; ++t) log_prior[t] = floor_log(priors.label(i, t));
    if (row.empty()) {
      // No annotations: the posterior is the prior.
      double s = 0.0;
      for (std::size_t t = 0; t < n_labels; ++t) s += std::exp(log_prior[t]);
      for (std::size_t t = 0; t < n_labels; ++t) post.label(i, t) = std::exp(log_prior[t]) / s;
      continue;
    }

    log_gamma.assign(row.size() * n_labels, 0.0);
    std::fill(log_gamma_sum.begin(), log_gamma_sum.end(), 0.0);
    for (std::size_t n = 0; n < row.size(); ++n) {
      const double p1 = std::clamp(priors.reliability[k0 + n], kPriorFloor, 1.0 - kPriorFloor);
      const double unreliable = (1.0 - p1) / static_cast<double>(n_labels);
      for (std::size_t t = 0; t < n_labels; ++t) {
        const double g = std::log((row[n].label == t ? p1 : 0.0) + unreliable);
        log_gamma[n * n_labels + t] = g;
        log_gamma_sum[t] += g;
      }
    }

    for (std::size_t n = 0; n < row.size(); ++n) {
      const std::size_t k = k0 + n;
      const double p1 = std::clamp(priors.reliability[k], kPriorFloor, 1.0 - kPriorFloor);
      const double log_r1 = std::log(p1);
      const double log_r0 = std::log1p(-p1);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < n_labels; ++t) {
        const double rest = log_prior[t] + log_gamma_sum[t] - log_gamma[n * n_labels + t];
        table[t * 2 + 0] = rest + log_r0 + log_uniform;
        table[t * 2 + 1] = row[n].label == t ? rest + log_r1
                                             : -std::numeric_limits<double>::infinity();
        mx = std::max({mx, table[t * 2], table[t * 2 + 1]});
      }
      if (!std::isfinite(mx))
        throw Error(ErrorKind::numerical, "degenerate posterior table for instance " +
                                              std::to_string(i));
      double total = 0.0;
      for (double& v : table) {
        v = std::exp(v - mx);
        total += v;
      }
      double* out = post.joint.data() + k * n_labels * 2;
      double rel = 0.0;
      for (std::size_t c = 0; c < table.size(); ++c) {
        out[c] = table[c] / total;
        if (c % 2 == 1) rel += out[c];
      }
      post.reliability[k] = rel;
    }

    // Label posterior marginalised from the instance's first observed pair.
    const double* first = post.joint.data() + k0 * n_labels * 2;
    for (std::size_t t = 0; t < n_labels; ++t)
      post.label(i, t) = first[t * 2] + first[t * 2 + 1];
    k0 += row.size();
  }
  return post;
}

Posterior e_step(const ReliabilityModel& model, const Matrix& features,
                 const AnnotationSet& annotations) {
  return posterior_from_priors(compute_priors(model, features, annotations), annotations,
                               model.n_labels);
}

double marginal_log_likelihood(const Priors& priors, const AnnotationSet& annotations,
                               std::size_t n_labels) {
  const double uniform = 1.0 / static_cast<double>(n_labels);
  std::vector<double> logp(n_labels);
  double total = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < annotations.n_instances(); ++i) {
    for (std::size_t t = 0; t < n_labels; ++t) logp[t] = floor_log(priors.label(i, t));
    for (const auto& a : annotations.of_instance(i)) {
      const double p1 = std::clamp(priors.reliability[k++], kPriorFloor, 1.0 - kPriorFloor);
      for (std::size_t t = 0; t < n_labels; ++t)
        logp[t] += std::log((a.label == t ? p1 : 0.0) + (1.0 - p1) * uniform);
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double s = 0.0;
    for (double v : logp) s += std::exp(v - mx);
    total += mx + std::log(s);
  }
  return total;
}

double emission_term(const Posterior& posterior, const AnnotationSet& annotations) {
  const std::size_t n_labels = posterior.n_labels;
  const double log_uniform = -std::log(static_cast<double>(n_labels));
  double total = 0.0;
  const auto& triples = annotations.triples();
  for (std::size_t k = 0; k < triples.size(); ++k)
    for (std::size_t t = 0; t < n_labels; ++t) {
      total += posterior.pi(k, t, 0) * log_uniform;
      // r = 1 contributes log 1 where the table has mass, nothing elsewhere.
    }
  return total;
}

double q_objective(const Priors& priors, const Posterior& posterior,
                   const AnnotationSet& annotations) {
  double total = 0.0;
  for (std::size_t i = 0; i < posterior.label.rows; ++i)
    for (std::size_t t = 0; t < posterior.n_labels; ++t) {
      const double q = posterior.label(i, t);
      if (q != 0.0) total += q * floor_log(priors.label(i, t));
    }
  for (std::size_t k = 0; k < posterior.reliability.size(); ++k) {
    const double q1 = posterior.reliability[k];
    const double p1 = priors.reliability[k];
    if (q1 != 0.0) total += q1 * floor_log(p1);
    if (q1 != 1.0) total += (1.0 - q1) * floor_log(1.0 - p1);
  }
  return total + emission_term(posterior, annotations);
}

double q_objective(const ReliabilityModel& model, const Posterior& posterior,
                   const Matrix& features, const AnnotationSet& annotations) {
  return q_objective(compute_priors(model, features, annotations), posterior, annotations);
}

CeLosses ce_losses(const Priors& priors, const Posterior& posterior,
                   const AnnotationSet& annotations) {
  CeLosses out;
  const double n = static_cast<double>(posterior.label.rows);
  const double n_obs = static_cast<double>(count_observed(annotations));
  out.classifier = soft_ce_loss(priors.label, posterior.label, Head::softmax, n);
  Matrix p1(priors.reliability.size(), 1);
  std::copy(priors.reliability.begin(), priors.reliability.end(), p1.values.begin());
  out.estimator = soft_ce_loss(p1, reliability_targets(posterior), Head::sigmoid, n_obs);
  return out;
}

CeLosses ce_losses(const ReliabilityModel& model, const Posterior& posterior,
                   const Matrix& features, const AnnotationSet& annotations) {
  return ce_losses(compute_priors(model, features, annotations), posterior, annotations);
}

ModelGradient loss_gradient(const ReliabilityModel& model, const Matrix& features,
                            const AnnotationSet& annotations, const Posterior& posterior,
                            const LossSpec& spec) {
  check_inputs(model, features, annotations);
  ModelGradient out;
  const bool through = spec.through_hidden &&
                       model.input_mode == EstimatorInput::classifier_hidden &&
                       spec.reliability_scale != 0.0;

  auto cls = forward(model.classifier, features);
  Matrix d_cls(cls.probs.rows, cls.probs.cols);
  if (spec.label_scale != 0.0) {
    const double z = 1.0 / spec.label_scale;
    out.loss += soft_ce_loss(cls.probs, posterior.label, Head::softmax, z);
    d_cls = soft_ce_logit_grad(cls.probs, posterior.label, z);
  }

  Matrix hidden_grad;
  if (spec.reliability_scale != 0.0) {
    const auto& repr = instance_repr(model, features, cls);
    auto est_in = estimator_input(model, repr, annotations.triples());
    auto est = forward(model.estimator, est_in);
    const auto targets = reliability_targets(posterior);
    const double z = 1.0 / spec.reliability_scale;
    out.loss += soft_ce_loss(est.probs, targets, Head::sigmoid, z);
    auto g = backward(model.estimator, est_in, est, soft_ce_logit_grad(est.probs, targets, z),
                      through);
    out.estimator = std::move(g.params);
    if (through) {
      hidden_grad = Matrix(cls.hidden2.rows, cls.hidden2.cols);
      const auto& triples = annotations.triples();
      for (std::size_t k = 0; k < triples.size(); ++k) {
        auto src = g.input.row(k);
        auto dst = hidden_grad.row(triples[k].instance);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
    }
  } else {
    out.estimator.assign(model.estimator.params().size(), 0.0);
  }

  if (spec.label_scale != 0.0 || through) {
    out.classifier = backward(model.classifier, features, cls, d_cls, false,
                              through ? &hidden_grad : nullptr)
                         .params;
  } else {
    out.classifier.assign(model.classifier.params().size(), 0.0);
  }
  return out;
}

std::vector<std::size_t> pretrain_labels(const AnnotationSet& annotations,
                                         std::size_t n_labels, PretrainSource source) {
  if (source == PretrainSource::mv) return majority_vote(annotations, n_labels);
  return dawid_skene(annotations, n_labels).hard;
}

void pretrain_on_labels(ReliabilityModel& model, const Matrix& features,
                        const AnnotationSet& annotations,
                        std::span<const std::size_t> labels, const TrainConfig& config) {
  check_inputs(model, features, annotations);
  if (labels.size() != features.rows)
    throw Error(ErrorKind::dimension, "one pre-training label per instance required");
  if (config.pretrain_epochs == 0) return;

  const Matrix targets = one_hot(labels, model.n_labels);
  std::mt19937_64 rng(derive_seed(config.seed, 3));
  minibatch_fit(model.classifier, features, targets, config, rng);

  const auto& triples = annotations.triples();
  Matrix agree(triples.size(), 1);
  for (std::size_t k = 0; k < triples.size(); ++k)
    agree(k, 0) = triples[k].label == labels[triples[k].instance] ? 1.0 : 0.0;
  const auto cls = forward(model.classifier, features);
  const Matrix est_in =
      estimator_input(model, instance_repr(model, features, cls), triples);
  minibatch_fit(model.estimator, est_in, agree, config, rng);
}

ReliabilityModel pretrain(const Matrix& features, const AnnotationSet& annotations,
                          std::size_t n_labels, const TrainConfig& config) {
  config.check();
  auto model = ReliabilityModel::init(features.cols, n_labels, annotations.n_annotators(),
                                      config);
  const auto labels = pretrain_labels(annotations, n_labels, config.pretrain);
  pretrain_on_labels(model, features, annotations, labels, config);
  return model;
}

TrainResult train(ReliabilityModel& model, const Matrix& features,
                  const AnnotationSet& annotations, const TrainConfig& config,
                  const GoldLabels* gold) {
  config.check();
  check_inputs(model, features, annotations);
  TrainResult result;
  const std::size_t limit = config.outer_limit();
  if (limit == 0) return result;

  const double n = static_cast<double>(features.rows);
  const double n_obs = static_cast<double>(count_observed(annotations));
  AdamState cls_state(model.classifier.params().size());
  AdamState est_state(model.estimator.params().size());
  const bool em = config.mode == TrainMode::em;

  auto step = [&](const Posterior& post, const LossSpec& spec, bool cls, bool est) {
    auto g = loss_gradient(model, features, annotations, post, spec);
    std::vector<AdamTarget> targets;
    if (cls) targets.push_back({model.classifier.params(), g.classifier, &cls_state});
    if (est) targets.push_back({model.estimator.params(), g.estimator, &est_state});
    adam_step(targets, config.adam);
  };

  Priors priors = compute_priors(model, features, annotations);
  Posterior post = posterior_from_priors(priors, annotations, model.n_labels);
  std::optional<double> previous;

  for (std::size_t outer = 1; outer <= limit; ++outer) {
    TraceRow row;
    row.outer = outer;
    row.q_start = q_objective(priors, post, annotations);
    row.log_likelihood_start = marginal_log_likelihood(priors, annotations, model.n_labels);
    row.objective_start = em ? row.log_likelihood_start / n
                             : ce_losses(priors, post, annotations).total();

    switch (config.mode) {
      case TrainMode::em:
        for (std::size_t l = 0; l < config.inner_iters; ++l)
          step(post, {1.0, 1.0, true}, true, true);
        break;
      case TrainMode::ce_alt:
        for (std::size_t l = 0; l < config.inner_iters; ++l)
          step(post, {0.0, 1.0 / n_obs, false}, false, true);
        for (std::size_t l = 0; l < config.inner_iters; ++l)
          step(post, {1.0 / n, 0.0, false}, true, false);
        break;
      case TrainMode::ce_jt:
        for (std::size_t l = 0; l < config.inner_iters; ++l)
          step(post, {1.0 / n, 1.0 / n_obs, true}, true, true);
        break;
    }

    priors = compute_priors(model, features, annotations);
    row.q_end = q_objective(priors, post, annotations);
    row.log_likelihood_end = marginal_log_likelihood(priors, annotations, model.n_labels);
    row.objective_end = em ? row.log_likelihood_end / n
                           : ce_losses(priors, post, annotations).total();

    post = posterior_from_priors(priors, annotations, model.n_labels);
    if (gold && !gold->empty()) row.f1 = f1_score(argmax_rows(post.label), *gold).micro;
    ++model.outer_iteration;
    result.trace.push_back(row);

    if (previous) {
      const double improvement =
          em ? row.objective_end - *previous : *previous - row.objective_end;
      if (improvement < config.early_stop_tol) {
        result.stopped_early = true;
        break;
      }
    }
    previous = row.objective_end;
  }
  return result;
}

Prediction predict_labels(const ReliabilityModel& model, const Matrix& features,
                          const AnnotationSet& annotations) {
  auto post = e_step(model, features, annotations);
  Prediction p;
  p.labels = argmax_rows(post.label);
  p.posterior = std::move(post.label);
  return p;
}

ReliabilityScores reliability_scores(const ReliabilityModel& model, const Matrix& features,
                                     const AnnotationSet& annotations) {
  ReliabilityScores s;
  s.posterior = e_step(model, features, annotations).reliability;
  s.prior = reliability_prior_grid(model, features);
  return s;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["mode"] = mode_name(c.mode);
  j["inner_iters"] = c.inner_iters;
  j["max_outer"] = c.outer_limit();
  j["early_stop_tol"] = c.early_stop_tol;
  j["pretrain"] = pretrain_source_name(c.pretrain);
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["pretrain_batch"] = c.pretrain_batch;
  j["classifier_hidden"] = c.classifier_hidden;
  j["estimator_hidden"] = c.estimator_hidden;
  j["estimator_input"] = estimator_input_name(c.estimator_input);
  j["adam"] = {{"alpha", c.adam.alpha},       {"beta1", c.adam.beta1},
               {"beta2", c.adam.beta2},       {"eps", c.adam.eps},
               {"weight_decay", c.adam.weight_decay}, {"clip_norm", c.adam.clip_norm}};
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.inner_iters = j.at("inner_iters").get<std::size_t>();
    c.max_outer = j.at("max_outer").get<std::size_t>();
    c.early_stop_tol = j.at("early_stop_tol").get<double>();
    c.pretrain = parse_pretrain_source(j.at("pretrain").get<std::string>());
    c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
    c.pretrain_batch = j.value("pretrain_batch", std::size_t{0});
    c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
    c.estimator_hidden = j.at("estimator_hidden").get<std::size_t>();
    c.estimator_input = parse_estimator_input(j.at("estimator_input").get<std::string>());
    const auto& a = j.at("adam");
    c.adam = {a.at("alpha").get<double>(),        a.at("beta1").get<double>(),
              a.at("beta2").get<double>(),        a.at("eps").get<double>(),
              a.at("weight_decay").get<double>(), a.at("clip_norm").get<double>()};
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed training config: ") + e.what());
  }
}

void save_model(const std::string& path, const ReliabilityModel& model,
                const LabelSet& labels, const TrainConfig& config) {
  nlohmann::json j;
  j["format"] = "crowdrel-model";
  j["version"] = 1;
  j["labels"] = labels.names();
  j["n_annotators"] = model.n_annotators;
  j["estimator_input"] = estimator_input_name(model.input_mode);
  j["outer_iteration"] = model.outer_iteration;
  j["config"] = to_json(config);
  j["classifier"] = to_json(model.classifier);
  j["estimator"] = to_json(model.estimator);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format") != "crowdrel-model" || j.at("version").get<int>() != 1)
      throw Error(ErrorKind::parse, path + ": not a version-1 crowdrel model");
    LoadedModel out;
    out.labels = LabelSet(j.at("labels").get<std::vector<std::string>>());
    out.config = train_config_from_json(j.at("config"));
    out.model.n_labels = out.labels.size();
    out.model.n_annotators = j.at("n_annotators").get<std::size_t>();
    out.model.input_mode = parse_estimator_input(j.at("estimator_input").get<std::string>());
    out.model.outer_iteration = j.at("outer_iteration").get<std::size_t>();
    out.model.classifier = fnn_from_json(j.at("classifier"));
    out.model.estimator = fnn_from_json(j.at("estimator"));
    if (out.model.classifier.shape().output != out.model.n_labels)
      throw Error(ErrorKind::dimension, path + ": classifier output does not match labels");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
}

}  // namespace crowdrel
