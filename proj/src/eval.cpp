#include "crowdrel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "crowdrel/error.hpp"

namespace crowdrel {

F1Scores f1_score(std::span<const std::size_t> predicted, const GoldLabels& gold) {
  if (gold.empty()) throw Error(ErrorKind::argument, "f1: no gold labels");
  std::size_t n_labels = 0;
  for (const auto& [i, label] : gold) {
    if (i >= predicted.size())
      throw Error(ErrorKind::dimension, "f1: gold instance " + std::to_string(i) +
                                            " has no prediction");
    n_labels = std::max({n_labels, label + 1, predicted[i] + 1});
  }
  std::vector<std::size_t> tp(n_labels, 0), fp(n_labels, 0), fn(n_labels, 0);
  std::size_t correct = 0;
  for (const auto& [i, label] : gold) {
    const auto p = predicted[i];
    if (p == label) {
      ++correct;
      ++tp[label];
    } else {
      ++fp[p];
      ++fn[label];
    }
  }
  F1Scores s;
  s.evaluated = gold.size();
  s.micro = static_cast<double>(correct) / static_cast<double>(gold.size());
  double macro = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < n_labels; ++c) {
    const auto denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    macro += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    ++classes;
  }
  s.macro = classes ? macro / static_cast<double>(classes) : 0.0;
  return s;
}

double fleiss_kappa(const AnnotationSet& annotations, std::size_t n_labels) {
  if (!annotations.is_complete_panel())
    throw Error(ErrorKind::validation,
                "Fleiss' kappa needs the same number of annotations on every instance; "
                "use Krippendorff's alpha for incomplete data");
  const std::size_t n_items = annotations.n_instances();
  const double raters = static_cast<double>(annotations.of_instance(0).size());
  if (raters < 2) throw Error(ErrorKind::validation, "Fleiss' kappa needs >= 2 raters per item");

  std::vector<double> totals(n_labels, 0.0);
  std::vector<double> counts(n_labels);
  double mean_agreement = 0.0;
  for (std::size_t i = 0; i < n_items; ++i) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (const auto& a : annotations.of_instance(i)) {
      if (a.label >= n_labels) throw Error(ErrorKind::label, "label index out of range");
      counts[a.label] += 1.0;
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < n_labels; ++c) {
      sq += counts[c] * counts[c];
      totals[c] += counts[c];
    }
    mean_agreement += (sq - raters) / (raters * (raters - 1.0));
  }
  mean_agreement /= static_cast<double>(n_items);
  double chance = 0.0;
  for (double t : totals) {
    const double p = t / (static_cast<double>(n_items) * raters);
    chance += p * p;
  }
  if (chance >= 1.0) return 1.0;  // a single category used throughout
  return (mean_agreement - chance) / (1.0 - chance);
}

double krippendorff_alpha(const AnnotationSet& annotations, std::size_t n_labels) {
  std::vector<double> coincidence(n_labels * n_labels, 0.0);
  std::vector<double> counts(n_labels);
  bool pairable = false;
  for (std::size_t i = 0; i < annotations.n_instances(); ++i) {
    const auto row = annotations.of_instance(i);
    if (row.size() < 2) continue;
    pairable = true;
    std::fill(counts.begin(), counts.end(), 0.0);
    for (const auto& a : row) {
      if (a.label >= n_labels) throw Error(ErrorKind::label, "label index out of range");
      counts[a.label] += 1.0;
    }
    const double m = static_cast<double>(row.size());
    for (std::size_t c = 0; c < n_labels; ++c)
      for (std::size_t k = 0; k < n_labels; ++k) {
        const double pairs = c == k ? counts[c] * (counts[c] - 1.0) : counts[c] * counts[k];
        coincidence[c * n_labels + k] += pairs / (m - 1.0);
      }
  }
  if (!pairable)
    throw Error(ErrorKind::validation, "Krippendorff's alpha needs an instance with >= 2 annotations");

  std::vector<double> marginal(n_labels, 0.0);
  double n = 0.0;
  double observed = 0.0;
  for (std::size_t c = 0; c < n_labels; ++c)
    for (std::size_t k = 0; k < n_labels; ++k) {
      const double o = coincidence[c * n_labels + k];
      marginal[c] += o;
      n += o;
      if (c != k) observed += o;
    }
  double expected = 0.0;
  for (std::size_t c = 0; c < n_labels; ++c)
    for (std::size_t k = 0; k < n_labels; ++k)
      if (c != k) expected += marginal[c] * marginal[k];
  if (expected == 0.0) return 1.0;  // a single category used throughout
  return 1.0 - (n - 1.0) * observed / expected;
}

namespace {

RankedSlice make_slice(std::span<const std::size_t> order, std::span<const double> scores,
                       const std::vector<const Annotation*>& rows,
                       const std::vector<std::size_t>& triple_index, const GoldLabels& gold,
                       std::size_t n_labels) {
  RankedSlice s;
  s.by_class.assign(n_labels, {});
  double sum = 0.0;
  for (auto pos : order) {
    const auto& a = *rows[pos];
    const double r = scores[triple_index[pos]];
    s.instances.push_back(a.instance);
    sum += r;
    auto g = gold.find(a.instance);
    if (g == gold.end()) continue;
    const bool ok = g->second == a.label;
    if (ok) ++s.correct;
    auto& cls = s.by_class[g->second];
    ++cls.count;
    if (ok) ++cls.correct;
    cls.mean_reliability += r;
  }
  for (auto& cls : s.by_class)
    if (cls.count) cls.mean_reliability /= static_cast<double>(cls.count);
  s.mean_reliability = order.empty() ? 0.0 : sum / static_cast<double>(order.size());
  return s;
}

}  // namespace

ReliabilityReport reliability_report(std::span<const double> scores,
                                     const AnnotationSet& annotations,
                                     const GoldLabels& gold, std::size_t n_labels,
                                     std::size_t k) {
  if (scores.size() != annotations.size())
    throw Error(ErrorKind::dimension, "one reliability score per annotation required");
  ReliabilityReport report;
  report.k = k;
  report.n_labels = n_labels;

  std::vector<std::vector<const Annotation*>> rows(annotations.n_annotators());
  std::vector<std::vector<std::size_t>> index(annotations.n_annotators());
  const auto& triples = annotations.triples();
  for (std::size_t t = 0; t < triples.size(); ++t) {
    rows[triples[t].annotator].push_back(&triples[t]);
    index[triples[t].annotator].push_back(t);
  }

  for (std::size_t j = 0; j < annotations.n_annotators(); ++j) {
    AnnotatorReport ar;
    ar.annotator = j;
    ar.n_annotations = rows[j].size();
    ar.truncated = ar.n_annotations < k;
    const std::size_t take = std::min(k, ar.n_annotations);

    std::vector<std::size_t> desc(ar.n_annotations);
    for (std::size_t p = 0; p < desc.size(); ++p) desc[p] = p;
    auto asc = desc;
    std::stable_sort(desc.begin(), desc.end(), [&](std::size_t a, std::size_t b) {
      return scores[index[j][a]] > scores[index[j][b]];
    });
    std::stable_sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) {
      return scores[index[j][a]] < scores[index[j][b]];
    });
    ar.top = make_slice(std::span(desc).first(take), scores, rows[j], index[j], gold, n_labels);
    ar.bottom = make_slice(std::span(asc).first(take), scores, rows[j], index[j], gold, n_labels);
    auto all = make_slice(desc, scores, rows[j], index[j], gold, n_labels);
    ar.all_by_class = std::move(all.by_class);
    ar.mean_reliability = all.mean_reliability;
    report.annotators.push_back(std::move(ar));
  }
  return report;
}

namespace {

std::string annotator_name(const AnnotationSet& annotations, std::size_t j) {
  return j < annotations.annotator_ids.size() ? annotations.annotator_ids[j]
                                              : std::to_string(j);
}

}  // namespace

void write_report_text(std::ostream& out, const ReliabilityReport& report,
                       const AnnotationSet& annotations, const LabelSet& labels) {
  const auto flags = out.flags();
  auto slice_table = [&](const char* title, auto member) {
    out << title << " " << report.k << " instances per annotator\n";
    out << std::left << std::setw(16) << "annotator";
    for (std::size_t c = 0; c < report.n_labels; ++c)
      out << std::right << std::setw(14) << labels.name(c);
    out << std::setw(10) << "correct" << std::setw(10) << "acc%" << std::setw(12) << "mean rel%"
        << "\n";
    for (const auto& ar : report.annotators) {
      const RankedSlice& s = ar.*member;
      out << std::left << std::setw(16) << annotator_name(annotations, ar.annotator);
      for (const auto& cls : s.by_class) {
        std::string cell = std::to_string(cls.correct) + "/" + std::to_string(cls.count) + " ";
        std::ostringstream rel;
        rel << std::fixed << std::setprecision(1) << 100.0 * cls.mean_reliability;
        out << std::right << std::setw(14) << (cell + rel.str());
      }
      const double acc = s.instances.empty()
                             ? 0.0
                             : 100.0 * static_cast<double>(s.correct) /
                                   static_cast<double>(s.instances.size());
      out << std::setw(10) << s.correct << std::setw(10) << std::fixed << std::setprecision(1)
          << acc << std::setw(12) << 100.0 * s.mean_reliability;
      if (ar.truncated) out << "  (only " << ar.n_annotations << ")";
      out << "\n";
    }
    out << "\n";
  };
  slice_table("Top", &AnnotatorReport::top);
  slice_table("Bottom", &AnnotatorReport::bottom);

  out << "Mean reliability by gold class (all annotated instances)\n";
  out << std::left << std::setw(16) << "annotator";
  for (std::size_t c = 0; c < report.n_labels; ++c)
    out << std::right << std::setw(10) << labels.name(c);
  out << std::setw(10) << "overall" << "\n";
  for (const auto& ar : report.annotators) {
    out << std::left << std::setw(16) << annotator_name(annotations, ar.annotator);
    for (const auto& cls : ar.all_by_class)
      out << std::right << std::setw(10) << std::fixed << std::setprecision(1)
          << 100.0 * cls.mean_reliability;
    out << std::setw(10) << 100.0 * ar.mean_reliability << "\n";
  }
  out.flags(flags);
}

void write_report_csv(std::ostream& out, const ReliabilityReport& report,
                      const AnnotationSet& annotations, const LabelSet& labels) {
  out << "annotator,slice,class,count,correct,mean_reliability\n";
  auto emit = [&](const std::string& who, const char* slice, const std::string& cls,
                  std::size_t count, std::size_t correct, double rel) {
    out << who << ',' << slice << ',' << cls << ',' << count << ',' << correct << ','
        << std::setprecision(10) << rel << '\n';
  };
  for (const auto& ar : report.annotators) {
    const auto who = annotator_name(annotations, ar.annotator);
    for (auto [name, s] : {std::pair{"top", &ar.top}, std::pair{"bottom", &ar.bottom}}) {
      emit(who, name, "*", s->instances.size(), s->correct, s->mean_reliability);
      for (std::size_t c = 0; c < s->by_class.size(); ++c)
        emit(who, name, labels.name(c), s->by_class[c].count, s->by_class[c].correct,
             s->by_class[c].mean_reliability);
    }
    std::size_t total_correct = 0;
    for (std::size_t c = 0; c < ar.all_by_class.size(); ++c) {
      total_correct += ar.all_by_class[c].correct;
      emit(who, "all", labels.name(c), ar.all_by_class[c].count, ar.all_by_class[c].correct,
           ar.all_by_class[c].mean_reliability);
    }
    emit(who, "all", "*", ar.n_annotations, total_correct, ar.mean_reliability);
  }
}

DenoiseResult denoise_experiment(const AnnotationSet& annotations,
                                 std::span<const double> scores,
                                 const Aggregator& aggregator, const GoldLabels& gold) {
  if (scores.size() != annotations.size())
    throw Error(ErrorKind::dimension, "one reliability score per annotation required");
  DenoiseResult result;
  std::vector<Annotation> kept;
  kept.reserve(annotations.size());
  std::size_t base = 0;
  for (std::size_t i = 0; i < annotations.n_instances(); ++i) {
    const auto row = annotations.of_instance(i);
    if (row.size() < 2) {
      if (!row.empty()) ++result.skipped;
      kept.insert(kept.end(), row.begin(), row.end());
      base += row.size();
      continue;
    }
    // Rows are sorted by annotator, so the first minimum has the lowest index.
    std::size_t drop = 0;
    for (std::size_t n = 1; n < row.size(); ++n)
      if (scores[base + n] < scores[base + drop]) drop = n;
    for (std::size_t n = 0; n < row.size(); ++n)
      if (n != drop) kept.push_back(row[n]);
    ++result.removed;
    base += row.size();
  }
  result.denoised = AnnotationSet(annotations.n_instances(), annotations.n_annotators(), kept);
  result.denoised.instance_ids = annotations.instance_ids;
  result.denoised.annotator_ids = annotations.annotator_ids;

  result.f1_before = f1_score(aggregator(annotations), gold).micro;
  result.f1_after = f1_score(aggregator(result.denoised), gold).micro;
  result.delta = result.f1_after - result.f1_before;
  return result;
}

}  // namespace crowdrel
