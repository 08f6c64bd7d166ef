#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdrel/data.hpp"

namespace crowdrel {

enum class Dataset2d { moon, circle, three_class };

Dataset2d parse_dataset_2d(const std::string& name);
const char* dataset_2d_name(Dataset2d kind);
std::size_t dataset_2d_labels(Dataset2d kind);
/// Default Gaussian noise: 0.1 moon, 0.08 circle, 0.5 blob spread.
double default_noise(Dataset2d kind);

struct Generated {
  std::vector<Instance> instances;
  std::vector<std::size_t> truth;  // one label per instance
};

/// Seeded 2-D benchmark sets. Class sizes differ by at most one, with the
/// remainder going to the lowest class indices.
Generated gen_2d(Dataset2d kind, std::size_t n, std::optional<double> noise,
                 std::uint64_t seed);

/// Synthetic short documents: each token comes from the true class's own
/// vocabulary with probability `topical`, else from a shared vocabulary.
Generated gen_text(std::size_t n, std::size_t n_labels, std::uint64_t seed,
                   double topical = 0.35);

GoldLabels to_gold(std::span<const std::size_t> truth);

enum class ProfileKind { narrow, broad, random, adversarial, graded };

struct AnnotatorProfile {
  ProfileKind kind = ProfileKind::broad;
  std::size_t domain = 0;    // narrow experts only
  double error_prob = 0.0;   // graded only

  std::string name() const;
  static AnnotatorProfile parse(const std::string& text);
};

/// One narrow expert per class, one broad expert, one random and one
/// adversarial annotator.
std::vector<AnnotatorProfile> standard_panel(std::size_t n_labels);
/// Five annotators erring with probability 0.1, 0.3, 0.5, 0.7 and 0.9.
std::vector<AnnotatorProfile> graded_panel();

inline constexpr double kNarrowOffDomainAccuracy = 0.65;
inline constexpr double kBroadErrorRate = 0.05;
inline constexpr double kAdversarialErrorRate = 0.8;

/// Labels every (instance, annotator) pair; with keep_prob < 1 each pair is
/// kept independently, but every instance retains at least one annotation.
/// Each annotator draws from its own seed stream.
AnnotationSet simulate_annotations(std::span<const std::size_t> truth, std::size_t n_labels,
                                   std::span<const AnnotatorProfile> profiles,
                                   std::uint64_t seed, double keep_prob = 1.0);

}  // namespace crowdrel
