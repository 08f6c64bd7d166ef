#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdrel/data.hpp"
#include "crowdrel/matrix.hpp"
#include "crowdrel/neural.hpp"

namespace crowdrel {

enum class TrainMode { em, ce_alt, ce_jt };
enum class EstimatorInput { raw_feature, classifier_hidden };
enum class PretrainSource { mv, ds };

const char* mode_name(TrainMode mode);
const char* estimator_input_name(EstimatorInput input);
const char* pretrain_source_name(PretrainSource source);
TrainMode parse_mode(const std::string& text);
EstimatorInput parse_estimator_input(const std::string& text);
PretrainSource parse_pretrain_source(const std::string& text);

struct TrainConfig {
  TrainMode mode = TrainMode::ce_jt;
  std::size_t inner_iters = 50;
  /// Unset: 500 for EM, 20 for the cross-entropy modes.
  std::optional<std::size_t> max_outer;
  double early_stop_tol = 0.001;
  PretrainSource pretrain = PretrainSource::ds;
  std::size_t pretrain_epochs = 200;
  /// Minibatch size for pre-training epochs; 0 means full batch.
  std::size_t pretrain_batch = 32;
  std::size_t classifier_hidden = 5;
  std::size_t estimator_hidden = 5;
  EstimatorInput estimator_input = EstimatorInput::classifier_hidden;
  AdamConfig adam;
  std::uint64_t seed = 0;

  std::size_t outer_limit() const;
  void check() const;
};

/// p(a | t, r): uniform over the labels when r = 0, a delta at t when r = 1.
double emission_prob(std::size_t a, std::size_t t, int r, std::size_t n_labels);

/// Classifier f_t (softmax over labels) and reliability estimator f_r
/// (sigmoid). The estimator sees either the raw features or the classifier's
/// last hidden layer, concatenated with a one-hot annotator code.
struct ReliabilityModel {
  Fnn classifier;
  Fnn estimator;
  EstimatorInput input_mode = EstimatorInput::classifier_hidden;
  std::size_t n_labels = 0;
  std::size_t n_annotators = 0;
  std::size_t outer_iteration = 0;

  static ReliabilityModel init(std::size_t feature_dim, std::size_t n_labels,
                               std::size_t n_annotators, const TrainConfig& config);
};

/// Prior quantities for one dataset: p(t | x_i) and p(r_k = 1 | x_i) for each
/// observed annotation k (aligned with AnnotationSet::triples()).
struct Priors {
  Matrix label;
  std::vector<double> reliability;
};

Priors compute_priors(const ReliabilityModel& model, const Matrix& features,
                      const AnnotationSet& annotations);

/// f_r output for every (instance, annotator) cell, observed or not.
Matrix reliability_prior_grid(const ReliabilityModel& model, const Matrix& features);

/// E-step result. `joint` holds one |T| x 2 table per observed annotation,
/// laid out [k][t][r].
struct Posterior {
  std::size_t n_labels = 0;
  std::vector<double> joint;
  Matrix label;                     // p(t_i | a_i, x_i)
  std::vector<double> reliability;  // p(r_k = 1 | a_i, x_i)

  double pi(std::size_t k, std::size_t t, int r) const {
    return joint[(k * n_labels + t) * 2 + static_cast<std::size_t>(r)];
  }
};

inline constexpr double kPriorFloor = 1e-12;

/// Exact posterior from given priors, computed in log space.
Posterior posterior_from_priors(const Priors& priors, const AnnotationSet& annotations,
                                std::size_t n_labels);

Posterior e_step(const ReliabilityModel& model, const Matrix& features,
                 const AnnotationSet& annotations);

/// Expected complete-data log likelihood under `posterior`, evaluated at the
/// model's current parameters.
double q_objective(const Priors& priors, const Posterior& posterior,
                   const AnnotationSet& annotations);
double q_objective(const ReliabilityModel& model, const Posterior& posterior,
                   const Matrix& features, const AnnotationSet& annotations);

/// log p(a | x) = sum_i log sum_t p(t | x_i) prod_j gamma_ij(t).
double marginal_log_likelihood(const Priors& priors, const AnnotationSet& annotations,
                               std::size_t n_labels);

/// sum_k sum_{t,r} pi_k(t,r) log p(a_k | t, r); constant in the parameters.
double emission_term(const Posterior& posterior, const AnnotationSet& annotations);

struct CeLosses {
  double classifier = 0.0;
  double estimator = 0.0;
  double total() const { return classifier + estimator; }
};

CeLosses ce_losses(const Priors& priors, const Posterior& posterior,
                   const AnnotationSet& annotations);
CeLosses ce_losses(const ReliabilityModel& model, const Posterior& posterior,
                   const Matrix& features, const AnnotationSet& annotations);

/// Loss = label_scale * CE_label_sum + reliability_scale * CE_reliability_sum,
/// where the sums run over instances and observed annotations respectively.
struct LossSpec {
  double label_scale = 1.0;
  double reliability_scale = 1.0;
  /// Let the estimator's loss reach the classifier through the shared hidden
  /// layer (classifier-hidden input mode only).
  bool through_hidden = true;
};

struct ModelGradient {
  double loss = 0.0;
  std::vector<double> classifier;
  std::vector<double> estimator;
};

ModelGradient loss_gradient(const ReliabilityModel& model, const Matrix& features,
                            const AnnotationSet& annotations, const Posterior& posterior,
                            const LossSpec& spec);

/// Hard targets for pre-training: MV or DS labels.
std::vector<std::size_t> pretrain_labels(const AnnotationSet& annotations,
                                         std::size_t n_labels, PretrainSource source);

ReliabilityModel pretrain(const Matrix& features, const AnnotationSet& annotations,
                          std::size_t n_labels, const TrainConfig& config);

/// Pre-train an existing model against the given hard labels.
void pretrain_on_labels(ReliabilityModel& model, const Matrix& features,
                        const AnnotationSet& annotations,
                        std::span<const std::size_t> labels, const TrainConfig& config);

/// One outer iteration. The monitored objective is the per-instance marginal
/// log likelihood for EM and the total cross entropy for the CE modes; Q is
/// always recorded against the iteration's own posterior.
struct TraceRow {
  std::size_t outer = 0;
  double objective_start = 0.0;
  double objective_end = 0.0;
  double q_start = 0.0;
  double q_end = 0.0;
  double log_likelihood_start = 0.0;
  double log_likelihood_end = 0.0;
  std::optional<double> f1;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  bool stopped_early = false;
};

/// Generalised EM / cross-entropy training from the given (usually
/// pre-trained) state. `gold`, when present, adds F1 to the trace.
TrainResult train(ReliabilityModel& model, const Matrix& features,
                  const AnnotationSet& annotations, const TrainConfig& config,
                  const GoldLabels* gold = nullptr);

struct Prediction {
  std::vector<std::size_t> labels;
  Matrix posterior;
};

Prediction predict_labels(const ReliabilityModel& model, const Matrix& features,
                          const AnnotationSet& annotations);

struct ReliabilityScores {
  std::vector<double> posterior;  // per observed annotation, p(r = 1 | a, x)
  Matrix prior;                   // f_r for every (instance, annotator)
};

ReliabilityScores reliability_scores(const ReliabilityModel& model, const Matrix& features,
                                     const AnnotationSet& annotations);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const ReliabilityModel& model,
                const LabelSet& labels, const TrainConfig& config);

struct LoadedModel {
  ReliabilityModel model;
  LabelSet labels;
  TrainConfig config;
};

LoadedModel load_model(const std::string& path);

}  // namespace crowdrel
