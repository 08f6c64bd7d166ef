#pragma once

#include <cstddef>
#include <vector>

#include "crowdrel/data.hpp"
#include "crowdrel/matrix.hpp"

namespace crowdrel {

/// Row-wise argmax; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Matrix& m);

/// Plurality label per instance, ties broken by lowest label index.
/// Throws if an instance has no annotations.
std::vector<std::size_t> majority_vote(const AnnotationSet& annotations,
                                       std::size_t n_labels);

/// Per-instance vote proportions (rows sum to 1).
Matrix vote_proportions(const AnnotationSet& annotations, std::size_t n_labels);

struct DsModel {
  std::vector<double> priors;     // p(t)
  std::vector<Matrix> confusion;  // confusion[j](true, observed)
};

struct DsOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
  double smoothing = 1e-2;
};

struct DsResult {
  DsModel model;
  Matrix soft;  // N x |T| posterior over the true label
  std::vector<std::size_t> hard;
  std::size_t iterations = 0;
  /// Marginal log likelihood of each M-step estimate, in order.
  std::vector<double> log_likelihood;
  /// The same plus the log of the Dirichlet prior implied by the smoothing;
  /// this is the quantity EM provably never decreases.
  std::vector<double> log_posterior;
};

DsResult dawid_skene(const AnnotationSet& annotations, std::size_t n_labels,
                     const DsOptions& options = {});

/// sum_i log sum_t p(t) prod_j confusion_j(t, a_ij)
double ds_log_likelihood(const DsModel& model, const AnnotationSet& annotations);

/// Score of each observed annotation under DS: the annotator's probability of
/// reporting that label when it is the truth. Ordered like annotations.triples().
std::vector<double> ds_annotation_reliability(const DsModel& model,
                                              const AnnotationSet& annotations);

}  // namespace crowdrel
