#include "crowdrel/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crowdrel/error.hpp"

namespace crowdrel {

std::size_t FnnShape::layer_in(std::size_t layer) const {
  switch (layer) {
    case 0: return input;
    case 1: return hidden1;
    case 2: return hidden2;
  }
  throw Error(ErrorKind::argument, "layer index out of range");
}

std::size_t FnnShape::layer_out(std::size_t layer) const {
  switch (layer) {
    case 0: return hidden1;
    case 1: return hidden2;
    case 2: return output;
  }
  throw Error(ErrorKind::argument, "layer index out of range");
}

std::size_t FnnShape::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < Fnn::kLayers; ++l)
    n += layer_in(l) * layer_out(l) + layer_out(l);
  return n;
}

const char* head_name(Head head) {
  return head == Head::softmax ? "softmax" : "sigmoid";
}

Fnn::Fnn(FnnShape shape) : shape_(shape) {
  if (shape.input == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 || shape.output == 0)
    throw Error(ErrorKind::argument, "network layer widths must be positive");
  if (shape.head == Head::sigmoid && shape.output != 1)
    throw Error(ErrorKind::argument, "a sigmoid head has exactly one output");
  params_.assign(shape.param_count(), 0.0);
}

Fnn Fnn::glorot(FnnShape shape, std::uint64_t seed) {
  Fnn net(shape);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < kLayers; ++l) {
    const double fan = static_cast<double>(shape.layer_in(l) + shape.layer_out(l));
    const double limit = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weight(l)) w = dist(rng);
  }
  return net;
}

std::size_t Fnn::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += shape_.layer_in(l) * shape_.layer_out(l) + shape_.layer_out(l);
  return off;
}

std::size_t Fnn::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + shape_.layer_in(layer) * shape_.layer_out(layer);
}

std::span<double> Fnn::weight(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer),
                                            shape_.layer_in(layer) * shape_.layer_out(layer));
}
std::span<const double> Fnn::weight(std::size_t layer) const {
  return std::span<const double>(params_).subspan(
      weight_offset(layer), shape_.layer_in(layer) * shape_.layer_out(layer));
}
std::span<double> Fnn::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), shape_.layer_out(layer));
}
std::span<const double> Fnn::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer),
                                                  shape_.layer_out(layer));
}

namespace {

// out = in * W + b, W stored in x out.
void affine(const Matrix& in, std::span<const double> w, std::span<const double> b,
            Matrix& out) {
  const std::size_t n_out = b.size();
  out = Matrix(in.rows, n_out);
  for (std::size_t r = 0; r < in.rows; ++r) {
    double* o = out.values.data() + r * n_out;
    std::copy(b.begin(), b.end(), o);
    const double* x = in.values.data() + r * in.cols;
    for (std::size_t k = 0; k < in.cols; ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      const double* wk = w.data() + k * n_out;
      for (std::size_t j = 0; j < n_out; ++j) o[j] += xk * wk[j];
    }
  }
}

void relu(Matrix& m) {
  for (double& v : m.values) v = v > 0.0 ? v : 0.0;
}

// dW += in^T * delta; db += column sums of delta.
void accumulate_layer_grad(const Matrix& in, const Matrix& delta, double* dw, double* db) {
  const std::size_t n_out = delta.cols;
  for (std::size_t r = 0; r < in.rows; ++r) {
    const double* d = delta.values.data() + r * n_out;
    for (std::size_t j = 0; j < n_out; ++j) db[j] += d[j];
    const double* x = in.values.data() + r * in.cols;
    for (std::size_t k = 0; k < in.cols; ++k) {
      const double xk = x[k];
      if (xk == 0.0) continue;
      double* g = dw + k * n_out;
      for (std::size_t j = 0; j < n_out; ++j) g[j] += xk * d[j];
    }
  }
}

// delta_in = delta * W^T, masked by (activation > 0) when given.
Matrix propagate(const Matrix& delta, std::span<const double> w, std::size_t n_in,
                 const Matrix* activation) {
  const std::size_t n_out = delta.cols;
  Matrix out(delta.rows, n_in);
  for (std::size_t r = 0; r < delta.rows; ++r) {
    const double* d = delta.values.data() + r * n_out;
    double* o = out.values.data() + r * n_in;
    for (std::size_t k = 0; k < n_in; ++k) {
      if (activation && (*activation)(r, k) <= 0.0) continue;
      const double* wk = w.data() + k * n_out;
      double s = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) s += wk[j] * d[j];
      o[k] = s;
    }
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ForwardPass forward(const Fnn& net, const Matrix& input) {
  const auto& shape = net.shape();
  if (input.cols != shape.input)
    throw Error(ErrorKind::dimension, "network expects input width " +
                                          std::to_string(shape.input) + ", got " +
                                          std::to_string(input.cols));
  ForwardPass pass;
  affine(input, net.weight(0), net.bias(0), pass.hidden1);
  relu(pass.hidden1);
  affine(pass.hidden1, net.weight(1), net.bias(1), pass.hidden2);
  relu(pass.hidden2);
  affine(pass.hidden2, net.weight(2), net.bias(2), pass.logits);

  pass.probs = pass.logits;
  if (shape.head == Head::sigmoid) {
    for (double& v : pass.probs.values) v = sigmoid(v);
  } else {
    for (std::size_t r = 0; r < pass.probs.rows; ++r) {
      auto row = pass.probs.row(r);
      const double mx = *std::max_element(row.begin(), row.end());
      double total = 0.0;
      for (double& v : row) {
        v = std::exp(v - mx);
        total += v;
      }
      for (double& v : row) v /= total;
    }
  }
  return pass;
}

Gradients backward(const Fnn& net, const Matrix& input, const ForwardPass& pass,
                   const Matrix& dlogits, bool want_input_grad,
                   const Matrix* hidden2_grad) {
  const auto& shape = net.shape();
  if (input.cols != shape.input || dlogits.cols != shape.output ||
      dlogits.rows != input.rows)
    throw Error(ErrorKind::dimension, "backward: shape mismatch");
  Gradients g;
  g.params.assign(shape.param_count(), 0.0);
  double* p = g.params.data();

  accumulate_layer_grad(pass.hidden2, dlogits, p + net.weight_offset(2), p + net.bias_offset(2));
  Matrix d2 = propagate(dlogits, net.weight(2), shape.hidden2, &pass.hidden2);
  if (hidden2_grad) {
    if (hidden2_grad->rows != d2.rows || hidden2_grad->cols != d2.cols)
      throw Error(ErrorKind::dimension, "backward: hidden gradient shape mismatch");
    for (std::size_t k = 0; k < d2.values.size(); ++k)
      if (pass.hidden2.values[k] > 0.0) d2.values[k] += hidden2_grad->values[k];
  }
  accumulate_layer_grad(pass.hidden1, d2, p + net.weight_offset(1), p + net.bias_offset(1));
  Matrix d1 = propagate(d2, net.weight(1), shape.hidden1, &pass.hidden1);
  accumulate_layer_grad(input, d1, p + net.weight_offset(0), p + net.bias_offset(0));
  if (want_input_grad) g.input = propagate(d1, net.weight(0), shape.input, nullptr);
  return g;
}

double soft_ce_loss(const Matrix& probs, const Matrix& targets, Head head,
                    double normalizer, std::span<const double> row_weights) {
  if (probs.rows != targets.rows || probs.cols != targets.cols)
    throw Error(ErrorKind::dimension, "soft_ce_loss: shape mismatch");
  if (!row_weights.empty() && row_weights.size() != probs.rows)
    throw Error(ErrorKind::dimension, "soft_ce_loss: weight count mismatch");
  auto log_floor = [](double p) { return std::log(std::max(p, kProbFloor)); };
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows; ++r) {
    double row = 0.0;
    for (std::size_t k = 0; k < probs.cols; ++k) {
      const double q = targets(r, k);
      const double p = probs(r, k);
      if (q != 0.0) row += q * log_floor(p);
      if (head == Head::sigmoid && q != 1.0) row += (1.0 - q) * log_floor(1.0 - p);
    }
    total += row_weights.empty() ? row : row_weights[r] * row;
  }
  return -total / normalizer;
}

Matrix soft_ce_logit_grad(const Matrix& probs, const Matrix& targets, double normalizer,
                          std::span<const double> row_weights) {
  if (probs.rows != targets.rows || probs.cols != targets.cols)
    throw Error(ErrorKind::dimension, "soft_ce_logit_grad: shape mismatch");
  Matrix g(probs.rows, probs.cols);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    const double w = (row_weights.empty() ? 1.0 : row_weights[r]) / normalizer;
    if (probs.cols == 1) {
      g(r, 0) = w * (probs(r, 0) - targets(r, 0));
      continue;
    }
    double mass = 0.0;
    for (std::size_t k = 0; k < probs.cols; ++k) mass += targets(r, k);
    for (std::size_t k = 0; k < probs.cols; ++k)
      g(r, k) = w * (probs(r, k) * mass - targets(r, k));
  }
  return g;
}

LossAndGrad soft_ce_gradient(const Fnn& net, const Matrix& input, const Matrix& targets,
                             double normalizer, std::span<const double> row_weights) {
  auto pass = forward(net, input);
  LossAndGrad out;
  out.loss = soft_ce_loss(pass.probs, targets, net.shape().head, normalizer, row_weights);
  out.grads = backward(net, input, pass,
                       soft_ce_logit_grad(pass.probs, targets, normalizer, row_weights));
  return out;
}

void adam_step(std::span<AdamTarget> targets, const AdamConfig& config) {
  std::vector<std::vector<double>> decayed(targets.size());
  double norm2 = 0.0;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    const auto& t = targets[b];
    if (t.params.size() != t.grads.size() || t.state == nullptr ||
        t.state->m.size() != t.params.size() || t.state->v.size() != t.params.size())
      throw Error(ErrorKind::dimension, "adam_step: parameter/gradient/state size mismatch");
    auto& g = decayed[b];
    g.resize(t.grads.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(t.grads[k]))
        throw Error(ErrorKind::numerical, "adam_step: non-finite gradient");
      g[k] = t.grads[k] + config.weight_decay * t.params[k];
      norm2 += g[k] * g[k];
    }
  }
  const double norm = std::sqrt(norm2);
  const double scale = (config.clip_norm > 0.0 && norm > config.clip_norm)
                           ? config.clip_norm / norm
                           : 1.0;

  for (std::size_t b = 0; b < targets.size(); ++b) {
    auto& t = targets[b];
    auto& st = *t.state;
    ++st.step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(st.step));
    const double lr = config.alpha * std::sqrt(c2) / c1;
    const auto& g = decayed[b];
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double gk = g[k] * scale;
      st.m[k] = config.beta1 * st.m[k] + (1.0 - config.beta1) * gk;
      st.v[k] = config.beta2 * st.v[k] + (1.0 - config.beta2) * gk * gk;
      t.params[k] -= lr * st.m[k] / (std::sqrt(st.v[k]) + config.eps);
    }
  }
}

void adam_step(Fnn& net, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  AdamTarget target{net.params(), grads, &state};
  adam_step(std::span<AdamTarget>(&target, 1), config);
}

nlohmann::json to_json(const Fnn& net) {
  const auto& s = net.shape();
  nlohmann::json j;
  j["format"] = "crowdrel-fnn";
  j["version"] = 1;
  j["shape"] = {{"input", s.input},
                {"hidden1", s.hidden1},
                {"hidden2", s.hidden2},
                {"output", s.output},
                {"head", head_name(s.head)}};
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < Fnn::kLayers; ++l) {
    auto w = net.weight(l);
    auto b = net.bias(l);
    layers.push_back({{"rows", s.layer_in(l)},
                      {"cols", s.layer_out(l)},
                      {"weight", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  j["layers"] = std::move(layers);
  return j;
}

Fnn fnn_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "crowdrel-fnn")
      throw Error(ErrorKind::parse, "not a crowdrel-fnn checkpoint");
    if (j.at("version").get<int>() != 1)
      throw Error(ErrorKind::parse, "unsupported crowdrel-fnn version");
    const auto& s = j.at("shape");
    FnnShape shape;
    shape.input = s.at("input").get<std::size_t>();
    shape.hidden1 = s.at("hidden1").get<std::size_t>();
    shape.hidden2 = s.at("hidden2").get<std::size_t>();
    shape.output = s.at("output").get<std::size_t>();
    const auto head = s.at("head").get<std::string>();
    if (head != "softmax" && head != "sigmoid")
      throw Error(ErrorKind::parse, "unknown head '" + head + "'");
    shape.head = head == "softmax" ? Head::softmax : Head::sigmoid;
    Fnn net(shape);
    const auto& layers = j.at("layers");
    if (layers.size() != Fnn::kLayers) throw Error(ErrorKind::parse, "expected 3 layers");
    for (std::size_t l = 0; l < Fnn::kLayers; ++l) {
      auto w = layers[l].at("weight").get<std::vector<double>>();
      auto b = layers[l].at("bias").get<std::vector<double>>();
      auto dw = net.weight(l);
      auto db = net.bias(l);
      if (w.size() != dw.size() || b.size() != db.size())
        throw Error(ErrorKind::dimension, "checkpoint layer " + std::to_string(l) +
                                              " does not match its shape");
      std::copy(w.begin(), w.end(), dw.begin());
      std::copy(b.begin(), b.end(), db.begin());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed network checkpoint: ") + e.what());
  }
}

}  // namespace crowdrel
