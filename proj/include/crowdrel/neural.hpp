#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdrel/matrix.hpp"

namespace crowdrel {

enum class Head { softmax, sigmoid };

/// input -> hidden1 (ReLU) -> hidden2 (ReLU) -> output.
/// A sigmoid head has a single output unit.
struct FnnShape {
  std::size_t input = 0;
  std::size_t hidden1 = 0;
  std::size_t hidden2 = 0;
  std::size_t output = 0;
  Head head = Head::softmax;

  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  std::size_t param_count() const;

  friend bool operator==(const FnnShape&, const FnnShape&) = default;
};

/// Feed-forward network with all parameters in one flat buffer. Layer l's
/// weight block is stored in-major (in x out) followed by its bias.
class Fnn {
 public:
  static constexpr std::size_t kLayers = 3;

  Fnn() = default;
  explicit Fnn(FnnShape shape);

  /// Glorot-uniform weights, zero biases.
  static Fnn glorot(FnnShape shape, std::uint64_t seed);

  const FnnShape& shape() const noexcept { return shape_; }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

 private:
  FnnShape shape_;
  std::vector<double> params_;
};

struct ForwardPass {
  Matrix hidden1;  // post-ReLU
  Matrix hidden2;  // post-ReLU
  Matrix logits;
  Matrix probs;    // softmax rows, or sigmoid column
};

ForwardPass forward(const Fnn& net, const Matrix& input);

struct Gradients {
  std::vector<double> params;  // same layout as Fnn::params()
  Matrix input;                // dLoss/dinput, filled only when requested
};

/// Backpropagates dLoss/dlogits through the network. `hidden2_grad`, when
/// given, is extra dLoss/dhidden2 from consumers of the hidden activations.
Gradients backward(const Fnn& net, const Matrix& input, const ForwardPass& pass,
                   const Matrix& dlogits, bool want_input_grad = false,
                   const Matrix* hidden2_grad = nullptr);

inline constexpr double kProbFloor = 1e-12;

/// -(1/normalizer) * sum_rows weight * sum_k target * log(prob).
/// For a sigmoid head, targets hold the Bernoulli probability of 1 and both
/// outcomes are counted. Probabilities are floored at kProbFloor.
double soft_ce_loss(const Matrix& probs, const Matrix& targets, Head head,
                    double normalizer, std::span<const double> row_weights = {});

/// dLoss/dlogits of soft_ce_loss: weight * (prob - target) / normalizer.
Matrix soft_ce_logit_grad(const Matrix& probs, const Matrix& targets,
                          double normalizer,
                          std::span<const double> row_weights = {});

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Forward + soft cross entropy + backward in one call.
LossAndGrad soft_ce_gradient(const Fnn& net, const Matrix& input,
                             const Matrix& targets, double normalizer,
                             std::span<const double> row_weights = {});

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.001;
  double clip_norm = 5.0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamTarget {
  std::span<double> params;
  std::span<const double> grads;
  AdamState* state;
};

/// One descent step over several parameter blocks: coupled L2 decay is added
/// to each gradient, the decayed gradients are clipped by their joint L2 norm,
/// then each block takes a bias-corrected Adam step.
void adam_step(std::span<AdamTarget> targets, const AdamConfig& config);
void adam_step(Fnn& net, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

nlohmann::json to_json(const Fnn& net);
Fnn fnn_from_json(const nlohmann::json& j);

const char* head_name(Head head);

}  // namespace crowdrel
