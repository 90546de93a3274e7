#include "rcml/nn.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "rcml/rng.hpp"

namespace rcml {

void MlpConfig::validate() const {
  if (layer_widths.size() < 3) {
    throw std::invalid_argument("need at least one hidden layer (input, hidden, output)");
  }
  for (Index w : layer_widths) {
    if (w < 1) throw std::invalid_argument("layer widths must be positive");
  }
  if (tap_layer < 1 || tap_layer >= static_cast<Index>(layer_widths.size()) - 1) {
    throw std::invalid_argument("tap_layer must name a hidden activation");
  }
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
    throw std::invalid_argument("init_scale must be finite and nonnegative");
  }
}

MlpConfig MlpConfig::with_hidden(Index input_dim, std::vector<Index> hidden, Index output_dim,
                                 Index tap_layer, double init_scale) {
  MlpConfig cfg;
  cfg.layer_widths.push_back(input_dim);
  cfg.layer_widths.insert(cfg.layer_widths.end(), hidden.begin(), hidden.end());
  cfg.layer_widths.push_back(output_dim);
  cfg.tap_layer = tap_layer;
  cfg.init_scale = init_scale;
  cfg.validate();
  return cfg;
}

void SgdConfig::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("initial_lr must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must be in (0, 1]");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
}

Network init_network(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  Network net;
  net.config = config;
  net.init_seed = seed;
  Rng rng(seed);
  const std::size_t layers = config.layer_widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index fan_in = config.layer_widths[l];
    const Index fan_out = config.layer_widths[l + 1];
    const double bound = config.init_scale / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Index r = 0; r < fan_in; ++r) {
      for (Index c = 0; c < fan_out; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  return net;
}

NetworkPair init_pair(const MlpConfig& config, std::uint64_t seed_f, std::uint64_t seed_g) {
  if (seed_f == seed_g) throw std::invalid_argument("the two networks need distinct init seeds");
  return {init_network(config, seed_f), init_network(config, seed_g)};
}

namespace {

void check_input(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.config.layer_widths.front()) {
    throw std::invalid_argument("input dimension mismatch: got " + std::to_string(inputs.cols()) +
                                ", network expects " + std::to_string(net.config.layer_widths.front()));
  }
}

}  // namespace

ForwardTrace forward_trace(const Network& net, const Matrix& inputs) {
  check_input(net, inputs);
  ForwardTrace trace;
  trace.activations.push_back(inputs);
  const std::size_t layers = net.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = trace.activations.back() * net.weights[l];
    z.rowwise() += net.biases[l].transpose();
    trace.preacts.push_back(z);
    if (l + 1 < layers) {
      trace.activations.push_back(z.cwiseMax(0.0));
    } else {
      trace.activations.push_back(std::move(z));  // final layer stays linear
    }
  }
  return trace;
}

ForwardResult forward(const Network& net, const Matrix& inputs) {
  ForwardTrace trace = forward_trace(net, inputs);
  return {trace.activations[static_cast<std::size_t>(net.config.tap_layer)],
          trace.activations.back()};
}

Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

BceResult bce_loss(const Matrix& logits, const Matrix& targets, const std::vector<std::size_t>& selected) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw std::invalid_argument("bce_loss: logits/targets shape mismatch");
  }
  if (selected.empty()) throw std::invalid_argument("bce_loss: empty selection");
  constexpr double kEps = 1e-7;
  const Index v = logits.cols();
  const double denom = static_cast<double>(selected.size()) * static_cast<double>(v);

  BceResult out;
  out.grad_logits = Matrix::Zero(logits.rows(), v);
  for (std::size_t r : selected) {
    const Index i = static_cast<Index>(r);
    if (i < 0 || i >= logits.rows()) throw std::invalid_argument("bce_loss: selection out of range");
    for (Index c = 0; c < v; ++c) {
      const double z = logits(i, c);
      const double s = 1.0 / (1.0 + std::exp(-z));
      const double p = std::min(1.0 - kEps, std::max(kEps, s));
      const double y = targets(i, c);
      out.loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      // d/dz of the clamped loss: zero where the clamp is active.
      const bool clamped = s < kEps || s > 1.0 - kEps;
      const double dl_dp = -y / p + (1.0 - y) / (1.0 - p);
      out.grad_logits(i, c) = clamped ? 0.0 : dl_dp * s * (1.0 - s) / denom;
    }
  }
  out.loss /= denom;
  return out;
}

ParamGrads zero_grads_like(const Network& net) {
  ParamGrads g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.dW.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.db.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

ParamGrads& accumulate(ParamGrads& into, const ParamGrads& other, double scale) {
  for (std::size_t l = 0; l < into.dW.size(); ++l) {
    into.dW[l] += scale * other.dW[l];
    into.db[l] += scale * other.db[l];
  }
  return into;
}

ParamGrads backprop(const Network& net, const ForwardTrace& trace, const Matrix& grad_logits,
                    const Matrix* grad_tap) {
  const std::size_t layers = net.weights.size();
  ParamGrads grads = zero_grads_like(net);
  Matrix grad_act = grad_logits;  // gradient w.r.t. activations[l+1]
  for (std::size_t l = layers; l-- > 0;) {
    Matrix grad_z;
    if (l + 1 == layers) {
      grad_z = std::move(grad_act);  // output layer is linear
    } else {
      grad_z = grad_act.cwiseProduct(
          trace.preacts[l].unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
    }
    grads.dW[l] = trace.activations[l].transpose() * grad_z;
    grads.db[l] = grad_z.colwise().sum().transpose();
    if (l > 0) {
      grad_act = grad_z * net.weights[l].transpose();
      if (grad_tap && static_cast<Index>(l) == net.config.tap_layer) grad_act += *grad_tap;
    }
  }
  return grads;
}

Network sgd_step(const Network& net, const ParamGrads& grads, std::size_t epoch, const SgdConfig& cfg) {
  cfg.validate();
  if (grads.dW.size() != net.weights.size() || grads.db.size() != net.biases.size()) {
    throw std::invalid_argument("sgd_step: gradient layer count mismatch");
  }
  const double lr = cfg.initial_lr * std::pow(cfg.decay, static_cast<double>(epoch));
  Network out = net;
  for (std::size_t l = 0; l < out.weights.size(); ++l) {
    if (grads.dW[l].rows() != out.weights[l].rows() || grads.dW[l].cols() != out.weights[l].cols() ||
        grads.db[l].size() != out.biases[l].size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!grads.dW[l].allFinite() || !grads.db[l].allFinite()) {
      throw std::invalid_argument("sgd_step: non-finite gradient at layer " + std::to_string(l));
    }
    out.weights[l] -= lr * grads.dW[l];
    out.biases[l] -= lr * grads.db[l];
  }
  return out;
}

std::string checkpoint_to_json(const Network& net) {
  nlohmann::json doc;
  doc["config"] = {{"layer_widths", net.config.layer_widths},
                   {"tap_layer", net.config.tap_layer},
                   {"init_scale", net.config.init_scale},
                   {"seed", net.config.seed}};
  doc["init_seed"] = net.init_seed;
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    std::vector<double> w(net.weights[l].data(), net.weights[l].data() + net.weights[l].size());
    std::vector<double> b(net.biases[l].data(), net.biases[l].data() + net.biases[l].size());
    layers.push_back({{"weights", w}, {"biases", b}});
  }
  return doc.dump(2) + "\n";
}

Network checkpoint_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint parse failure: ") + e.what());
  }
  try {
    Network net;
    const auto& cfg = doc.at("config");
    net.config.layer_widths = cfg.at("layer_widths").get<std::vector<Index>>();
    net.config.tap_layer = cfg.at("tap_layer").get<Index>();
    net.config.init_scale = cfg.at("init_scale").get<double>();
    net.config.seed = cfg.at("seed").get<std::uint64_t>();
    net.config.validate();
    net.init_seed = doc.at("init_seed").get<std::uint64_t>();
    const auto& layers = doc.at("layers");
    if (layers.size() != net.config.layer_widths.size() - 1) {
      throw CheckpointError("checkpoint layer count disagrees with config");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Index rows = net.config.layer_widths[l];
      const Index cols = net.config.layer_widths[l + 1];
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("biases").get<std::vector<double>>();
      if (static_cast<Index>(w.size()) != rows * cols || static_cast<Index>(b.size()) != cols) {
        throw CheckpointError("checkpoint parameter count mismatch at layer " + std::to_string(l));
      }
      net.weights.push_back(Eigen::Map<const Matrix>(w.data(), rows, cols));
      net.biases.push_back(Eigen::Map<const Vector>(b.data(), cols));
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace rcml
