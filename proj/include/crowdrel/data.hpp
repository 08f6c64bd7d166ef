#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crowdrel/matrix.hpp"

namespace crowdrel {

/// Ordered set of category names. The position of a label is its index.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& name(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& names() const noexcept { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class InstanceFormat { dense_csv, text_jsonl };

/// One training instance. Dense instances carry `features`; text instances
/// carry one or more text fields (two for sentence pairs).
struct Instance {
  std::string id;
  std::vector<double> features;
  std::vector<std::string> text;
};

/// Stacks dense instance features into an N x D matrix.
Matrix feature_matrix(std::span<const Instance> instances);

struct Annotation {
  std::size_t instance = 0;
  std::size_t annotator = 0;
  std::size_t label = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Sparse (instance, annotator, label) triples. Triples are kept sorted by
/// instance then annotator; at most one triple per pair.
class AnnotationSet {
 public:
  AnnotationSet() = default;
  AnnotationSet(std::size_t n_instances, std::size_t n_annotators,
                std::vector<Annotation> triples);

  std::size_t n_instances() const noexcept { return n_instances_; }
  std::size_t n_annotators() const noexcept { return n_annotators_; }
  std::size_t size() const noexcept { return triples_.size(); }
  const std::vector<Annotation>& triples() const noexcept { return triples_; }

  /// Annotations of instance i, ordered by annotator index.
  std::span<const Annotation> of_instance(std::size_t i) const;

  /// Every instance has the same number of annotations (and at least one).
  bool is_complete_panel() const;

  std::vector<std::string> instance_ids;
  std::vector<std::string> annotator_ids;

 private:
  std::size_t n_instances_ = 0;
  std::size_t n_annotators_ = 0;
  std::vector<Annotation> triples_;
  std::vector<std::size_t> offsets_;
};

/// Instance index -> label index; partial coverage allowed.
using GoldLabels = std::map<std::size_t, std::size_t>;

/// External string ids -> dense indices, assigned in first-occurrence order.
class IdIndex {
 public:
  IdIndex() = default;
  explicit IdIndex(std::vector<std::string> ids);

  std::size_t intern(const std::string& id);
  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<Instance> load_instances(const std::string& path,
                                     InstanceFormat format);

/// `instances` seeds the instance index (typically from the instance file);
/// `annotators` may seed annotator order. Unseen ids are appended.
AnnotationSet load_annotations(const std::string& path, const LabelSet& labels,
                               IdIndex instances = {}, IdIndex annotators = {});

GoldLabels load_gold(const std::string& path, const LabelSet& labels,
                     IdIndex& instances);

void write_instances_csv(const std::string& path,
                         std::span<const Instance> instances);
void write_instances_jsonl(const std::string& path,
                           std::span<const Instance> instances);
void write_annotations_csv(const std::string& path,
                           const AnnotationSet& annotations,
                           const LabelSet& labels);
void write_gold_csv(const std::string& path, const GoldLabels& gold,
                    const std::vector<std::string>& instance_ids,
                    const LabelSet& labels);

/// Lists every consistency violation; empty means valid.
std::vector<std::string> validate(std::span<const Instance> instances,
                                  const AnnotationSet& annotations,
                                  std::size_t n_labels,
                                  const GoldLabels* gold = nullptr);

/// Split one CSV record. Double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace crowdrel
