#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowdrel/data.hpp"

namespace crowdrel {

struct F1Scores {
  double micro = 0.0;  // equals accuracy for one prediction per instance
  double macro = 0.0;
  std::size_t evaluated = 0;
};

/// Scores predictions on the instances that have gold labels.
F1Scores f1_score(std::span<const std::size_t> predicted, const GoldLabels& gold);

/// Requires every instance to carry the same number (>= 2) of annotations.
double fleiss_kappa(const AnnotationSet& annotations, std::size_t n_labels);

/// Nominal alpha from the coincidence matrix; handles missing annotations.
double krippendorff_alpha(const AnnotationSet& annotations, std::size_t n_labels);

struct ClassBreakdown {
  std::size_t count = 0;
  std::size_t correct = 0;
  double mean_reliability = 0.0;
};

struct RankedSlice {
  std::vector<std::size_t> instances;
  std::size_t correct = 0;
  double mean_reliability = 0.0;
  std::vector<ClassBreakdown> by_class;  // indexed by gold label
};

struct AnnotatorReport {
  std::size_t annotator = 0;
  std::size_t n_annotations = 0;
  bool truncated = false;  // fewer than k annotations
  RankedSlice top;
  RankedSlice bottom;
  /// Over all of the annotator's instances, grouped by gold label.
  std::vector<ClassBreakdown> all_by_class;
  double mean_reliability = 0.0;
};

struct ReliabilityReport {
  std::size_t k = 0;
  std::size_t n_labels = 0;
  std::vector<AnnotatorReport> annotators;
};

/// `scores` holds one reliability per observed annotation, aligned with
/// annotations.triples(). Rankings break ties by instance index.
ReliabilityReport reliability_report(std::span<const double> scores,
                                     const AnnotationSet& annotations,
                                     const GoldLabels& gold, std::size_t n_labels,
                                     std::size_t k);

void write_report_text(std::ostream& out, const ReliabilityReport& report,
                       const AnnotationSet& annotations, const LabelSet& labels);
void write_report_csv(std::ostream& out, const ReliabilityReport& report,
                      const AnnotationSet& annotations, const LabelSet& labels);

using Aggregator = std::function<std::vector<std::size_t>(const AnnotationSet&)>;

struct DenoiseResult {
  double f1_before = 0.0;
  double f1_after = 0.0;
  double delta = 0.0;
  std::size_t removed = 0;
  std::size_t skipped = 0;  // instances with a single annotation
  AnnotationSet denoised;
};

/// Removes each instance's least reliable annotation (ties: lowest annotator
/// index), re-aggregates, and compares micro-F1 against gold.
DenoiseResult denoise_experiment(const AnnotationSet& annotations,
                                 std::span<const double> scores,
                                 const Aggregator& aggregator, const GoldLabels& gold);

}  // namespace crowdrel
