#include "crowdrel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdrel/error.hpp"

namespace crowdrel {

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < m.cols; ++k)
      if (m(r, k) > m(r, best)) best = k;
    out[r] = best;
  }
  return out;
}

namespace {

void require_coverage(const AnnotationSet& annotations) {
  for (std::size_t i = 0; i < annotations.n_instances(); ++i)
    if (annotations.of_instance(i).empty())
      throw Error(ErrorKind::validation,
                  "instance " + std::to_string(i) + " has no annotations");
}

}  // namespace

Matrix vote_proportions(const AnnotationSet& annotations, std::size_t n_labels) {
  require_coverage(annotations);
  Matrix counts(annotations.n_instances(), n_labels);
  for (const auto& a : annotations.triples()) {
    if (a.label >= n_labels) throw Error(ErrorKind::label, "label index out of range");
    counts(a.instance, a.label) += 1.0;
  }
  for (std::size_t i = 0; i < counts.rows; ++i) {
    const double n = static_cast<double>(annotations.of_instance(i).size());
    for (double& v : counts.row(i)) v /= n;
  }
  return counts;
}

std::vector<std::size_t> majority_vote(const AnnotationSet& annotations,
                                       std::size_t n_labels) {
  return argmax_rows(vote_proportions(annotations, n_labels));
}

double ds_log_likelihood(const DsModel& model, const AnnotationSet& annotations) {
  const std::size_t n_labels = model.priors.size();
  std::vector<double> logp(n_labels);
  double total = 0.0;
  for (std::size_t i = 0; i < annotations.n_instances(); ++i) {
    for (std::size_t t = 0; t < n_labels; ++t) {
      logp[t] = std::log(model.priors[t]);
      for (const auto& a : annotations.of_instance(i))
        logp[t] += std::log(model.confusion[a.annotator](t, a.label));
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double s = 0.0;
    for (double v : logp) s += std::exp(v - mx);
    total += mx + std::log(s);
  }
  return total;
}

namespace {

DsModel m_step(const AnnotationSet& annotations, const Matrix& soft, std::size_t n_labels,
               double smoothing) {
  DsModel model;
  model.priors.assign(n_labels, smoothing);
  for (std::size_t i = 0; i < soft.rows; ++i)
    for (std::size_t t = 0; t < n_labels; ++t) model.priors[t] += soft(i, t);
  const double prior_total = static_cast<double>(soft.rows) + smoothing * n_labels;
  for (double& p : model.priors) p /= prior_total;

  model.confusion.assign(annotations.n_annotators(), Matrix(n_labels, n_labels, smoothing));
  for (const auto& a : annotations.triples())
    for (std::size_t t = 0; t < n_labels; ++t)
      model.confusion[a.annotator](t, a.label) += soft(a.instance, t);
  for (auto& c : model.confusion) {
    for (std::size_t t = 0; t < n_labels; ++t) {
      auto row = c.row(t);
      double s = 0.0;
      for (double v : row) s += v;
      for (double& v : row) v /= s;
    }
  }
  return model;
}

Matrix e_step(const DsModel& model, const AnnotationSet& annotations, std::size_t n_labels) {
  Matrix soft(annotations.n_instances(), n_labels);
  for (std::size_t i = 0; i < soft.rows; ++i) {
    auto row = soft.row(i);
    for (std::size_t t = 0; t < n_labels; ++t) {
      double lp = std::log(model.priors[t]);
      for (const auto& a : annotations.of_instance(i))
        lp += std::log(model.confusion[a.annotator](t, a.label));
      row[t] = lp;
    }
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return soft;
}

double log_dirichlet_prior(const DsModel& model, double smoothing) {
  double s = 0.0;
  for (double p : model.priors) s += smoothing * std::log(p);
  for (const auto& c : model.confusion)
    for (double v : c.values) s += smoothing * std::log(v);
  return s;
}

}  // namespace

DsResult dawid_skene(const AnnotationSet& annotations, std::size_t n_labels,
                     const DsOptions& options) {
  if (options.smoothing <= 0.0)
    throw Error(ErrorKind::argument, "Dawid-Skene smoothing must be positive");
  DsResult result;
  result.soft = vote_proportions(annotations, n_labels);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iters, 1); ++iter) {
    result.model = m_step(annotations, result.soft, n_labels, options.smoothing);
    const double ll = ds_log_likelihood(result.model, annotations);
    result.log_likelihood.push_back(ll);
    result.log_posterior.push_back(ll + log_dirichlet_prior(result.model, options.smoothing));
    Matrix next = e_step(result.model, annotations, n_labels);
    double change = 0.0;
    for (std::size_t k = 0; k < next.values.size(); ++k)
      change = std::max(change, std::abs(next.values[k] - result.soft.values[k]));
    result.soft = std::move(next);
    result.iterations = iter + 1;
    if (change < options.tol) break;
  }
  result.hard = argmax_rows(result.soft);
  return result;
}

std::vector<double> ds_annotation_reliability(const DsModel& model,
                                              const AnnotationSet& annotations) {
  std::vector<double> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations.triples())
    out.push_back(model.confusion[a.annotator](a.label, a.label));
  return out;
}

}  // namespace crowdrel
