#include "crowdrel/simulate.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iterator>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "crowdrel/error.hpp"
#include "crowdrel/rng.hpp"

namespace crowdrel {

Dataset2d parse_dataset_2d(const std::string& name) {
  if (name == "moon") return Dataset2d::moon;
  if (name == "circle") return Dataset2d::circle;
  if (name == "three-class" || name == "3-class") return Dataset2d::three_class;
  throw Error(ErrorKind::argument, "unknown dataset '" + name + "' (moon, circle, three-class)");
}

const char* dataset_2d_name(Dataset2d kind) {
  switch (kind) {
    case Dataset2d::moon: return "moon";
    case Dataset2d::circle: return "circle";
    case Dataset2d::three_class: return "three-class";
  }
  return "?";
}

std::size_t dataset_2d_labels(Dataset2d kind) {
  return kind == Dataset2d::three_class ? 3 : 2;
}

double default_noise(Dataset2d kind) {
  switch (kind) {
    case Dataset2d::moon: return 0.1;
    case Dataset2d::circle: return 0.08;
    case Dataset2d::three_class: return 0.5;
  }
  return 0.0;
}

Generated gen_2d(Dataset2d kind, std::size_t n, std::optional<double> noise,
                 std::uint64_t seed) {
  const std::size_t n_labels = dataset_2d_labels(kind);
  if (n < n_labels)
    throw Error(ErrorKind::argument, "need at least one point per class");
  const double sigma = noise.value_or(default_noise(kind));
  if (!(sigma >= 0.0)) throw Error(ErrorKind::argument, "noise must be non-negative");

  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double pi = std::numbers::pi;

  std::vector<std::array<double, 2>> points;
  std::vector<std::size_t> labels;
  points.reserve(n);
  for (std::size_t c = 0; c < n_labels; ++c) {
    const std::size_t count = n / n_labels + (c < n % n_labels ? 1 : 0);
    for (std::size_t k = 0; k < count; ++k) {
      double x = 0.0, y = 0.0;
      switch (kind) {
        case Dataset2d::moon: {
          const double theta = count > 1 ? pi * static_cast<double>(k) / (count - 1) : 0.0;
          if (c == 0) {
            x = std::cos(theta);
            y = std::sin(theta);
          } else {
            x = 1.0 - std::cos(theta);
            y = 0.5 - std::sin(theta);
          }
          x += sigma * gauss(rng);
          y += sigma * gauss(rng);
          break;
        }
        case Dataset2d::circle: {
          const double theta = 2.0 * pi * static_cast<double>(k) / count;
          const double radius = c == 0 ? 1.0 : 0.5;
          x = radius * std::cos(theta) + sigma * gauss(rng);
          y = radius * std::sin(theta) + sigma * gauss(rng);
          break;
        }
        case Dataset2d::three_class: {
          const double angle = pi / 2.0 + 2.0 * pi * static_cast<double>(c) / 3.0;
          x = 2.0 * std::cos(angle) + sigma * gauss(rng);
          y = 2.0 * std::sin(angle) + sigma * gauss(rng);
          break;
        }
      }
      points.push_back({x, y});
      labels.push_back(c);
    }
  }

  std::vector<std::size_t> order(points.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), rng);

  Generated g;
  g.instances.reserve(n);
  g.truth.reserve(n);
  const int width = static_cast<int>(std::to_string(n - 1).size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "i%0*zu", width, k);
    const auto& p = points[order[k]];
    g.instances.push_back({id, {p[0], p[1]}, {}});
    g.truth.push_back(labels[order[k]]);
  }
  return g;
}

Generated gen_text(std::size_t n, std::size_t n_labels, std::uint64_t seed,
                   double topical) {
  if (n_labels < 2) throw Error(ErrorKind::argument, "need at least two labels");
  if (n < n_labels) throw Error(ErrorKind::argument, "need at least one document per class");
  constexpr std::size_t kTopicWords = 40;
  constexpr std::size_t kSharedWords = 200;
  static constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ren", "su", "ta", "vo",
                                               "ne", "pi", "dra", "ul", "es", "or", "ba"};
  constexpr std::size_t kSyl = std::size(kSyllables);
  auto word = [&](std::size_t code) {
    std::string w;
    do {
      w += kSyllables[code % kSyl];
      code /= kSyl;
    } while (code > 0);
    return w;
  };

  std::mt19937_64 rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length(6, 14);
  std::uniform_int_distribution<std::size_t> topic_pick(0, kTopicWords - 1);
  std::uniform_int_distribution<std::size_t> shared_pick(0, kSharedWords - 1);

  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < n_labels; ++c) {
    const std::size_t count = n / n_labels + (c < n % n_labels ? 1 : 0);
    labels.insert(labels.end(), count, c);
  }
  std::shuffle(labels.begin(), labels.end(), rng);

  Generated g;
  const int width = static_cast<int>(std::to_string(n - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = labels[i];
    std::string text;
    const std::size_t len = length(rng);
    for (std::size_t w = 0; w < len; ++w) {
      const std::size_t code = unit(rng) < topical
                                   ? kSharedWords + c * kTopicWords + topic_pick(rng)
                                   : shared_pick(rng);
      if (!text.empty()) text += ' ';
      text += word(code);
    }
    text += '?';
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    char id[32];
    std::snprintf(id, sizeof id, "q%0*zu", width, i);
    g.instances.push_back({id, {}, {text}});
    g.truth.push_back(c);
  }
  return g;
}

GoldLabels to_gold(std::span<const std::size_t> truth) {
  GoldLabels gold;
  for (std::size_t i = 0; i < truth.size(); ++i) gold.emplace(i, truth[i]);
  return gold;
}

std::string AnnotatorProfile::name() const {
  switch (kind) {
    case ProfileKind::narrow: return "narrow-" + std::to_string(domain);
    case ProfileKind::broad: return "broad";
    case ProfileKind::random: return "random";
    case ProfileKind::adversarial: return "adversarial";
    case ProfileKind::graded: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "graded-%.2f", error_prob);
      return buf;
    }
  }
  return "?";
}

AnnotatorProfile AnnotatorProfile::parse(const std::string& text) {
  AnnotatorProfile p;
  auto suffix = [&](const std::string& prefix) { return text.substr(prefix.size()); };
  try {
    if (text.rfind("narrow-", 0) == 0) {
      p.kind = ProfileKind::narrow;
      p.domain = std::stoul(suffix("narrow-"));
    } else if (text == "broad") {
      p.kind = ProfileKind::broad;
    } else if (text == "random") {
      p.kind = ProfileKind::random;
    } else if (text == "adversarial") {
      p.kind = ProfileKind::adversarial;
    } else if (text.rfind("graded-", 0) == 0) {
      p.kind = ProfileKind::graded;
      p.error_prob = std::stod(suffix("graded-"));
      if (!(p.error_prob >= 0.0 && p.error_prob <= 1.0))
        throw Error(ErrorKind::argument, "graded error probability must be in [0,1]");
    } else {
      throw Error(ErrorKind::argument, "unknown annotator profile '" + text + "'");
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::argument, "malformed annotator profile '" + text + "'");
  }
  return p;
}

std::vector<AnnotatorProfile> standard_panel(std::size_t n_labels) {
  std::vector<AnnotatorProfile> panel;
  for (std::size_t c = 0; c < n_labels; ++c) panel.push_back({ProfileKind::narrow, c, 0.0});
  panel.push_back({ProfileKind::broad, 0, 0.0});
  panel.push_back({ProfileKind::random, 0, 0.0});
  panel.push_back({ProfileKind::adversarial, 0, 0.0});
  return panel;
}

std::vector<AnnotatorProfile> graded_panel() {
  std::vector<AnnotatorProfile> panel;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) panel.push_back({ProfileKind::graded, 0, p});
  return panel;
}

namespace {

std::size_t wrong_label(std::size_t truth, std::size_t n_labels, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n_labels - 2);
  const std::size_t k = pick(rng);
  return k >= truth ? k + 1 : k;
}

std::size_t draw_label(const AnnotatorProfile& p, std::size_t truth, std::size_t n_labels,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (p.kind) {
    case ProfileKind::narrow:
      if (truth == p.domain || unit(rng) < kNarrowOffDomainAccuracy) return truth;
      return wrong_label(truth, n_labels, rng);
    case ProfileKind::broad:
      return unit(rng) < kBroadErrorRate ? wrong_label(truth, n_labels, rng) : truth;
    case ProfileKind::random:
      return std::uniform_int_distribution<std::size_t>(0, n_labels - 1)(rng);
    case ProfileKind::adversarial:
      return unit(rng) < kAdversarialErrorRate ? wrong_label(truth, n_labels, rng) : truth;
    case ProfileKind::graded:
      return unit(rng) < p.error_prob ? wrong_label(truth, n_labels, rng) : truth;
  }
  return truth;
}

}  // namespace

AnnotationSet simulate_annotations(std::span<const std::size_t> truth, std::size_t n_labels,
                                   std::span<const AnnotatorProfile> profiles,
                                   std::uint64_t seed, double keep_prob) {
  if (profiles.empty()) throw Error(ErrorKind::validation, "annotator panel is empty");
  if (n_labels < 2) throw Error(ErrorKind::argument, "need at least two labels");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw Error(ErrorKind::argument, "keep probability must be in (0, 1]");
  for (const auto& p : profiles)
    if (p.kind == ProfileKind::narrow && p.domain >= n_labels)
      throw Error(ErrorKind::argument, "narrow expert domain out of range");
  for (auto t : truth)
    if (t >= n_labels) throw Error(ErrorKind::label, "true label out of range");

  const std::size_t n = truth.size();
  const std::size_t m = profiles.size();
  std::vector<Annotation> triples;
  triples.reserve(n * m);
  std::vector<std::vector<bool>> kept(n, std::vector<bool>(m, true));
  if (keep_prob < 1.0) {
    std::mt19937_64 mask_rng(derive_seed(seed, m + 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any(0, m - 1);
    for (std::size_t i = 0; i < n; ++i) {
      bool some = false;
      for (std::size_t j = 0; j < m; ++j) some |= (kept[i][j] = unit(mask_rng) < keep_prob);
      if (!some) kept[i][any(mask_rng)] = true;
    }
  }

  for (std::size_t j = 0; j < m; ++j) {
    std::mt19937_64 rng(derive_seed(seed, j + 1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = draw_label(profiles[j], truth[i], n_labels, rng);
      if (kept[i][j]) triples.push_back({i, j, label});
    }
  }

  AnnotationSet set(n, m, std::move(triples));
  std::vector<std::string> names;
  std::multiset<std::string> seen;
  for (const auto& p : profiles) seen.insert(p.name());
  for (std::size_t j = 0; j < m; ++j) {
    auto name = profiles[j].name();
    names.push_back(seen.count(name) > 1 ? name + "#" + std::to_string(j) : name);
  }
  set.annotator_ids = std::move(names);
  return set;
}

}  // namespace crowdrel
