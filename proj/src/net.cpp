#include "oppo/net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace oppo {

FeedForwardNet make_net(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("make_net: need at least input and output sizes");
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("make_net: layer sizes must be positive");
  }
  FeedForwardNet net;
  net.sizes = sizes;
  for (std::size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
    const int fan_in = sizes[layer];
    const int fan_out = sizes[layer + 1];
    std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w) v = rng.normal() * scale;
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

std::vector<double> forward(const FeedForwardNet& net, std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(net.input_size())) {
    throw std::invalid_argument("forward: input size mismatch");
  }
  std::vector<double> current(input.begin(), input.end());
  for (int layer = 0; layer < net.num_layers(); ++layer) {
    const int in = net.sizes[layer];
    const int out = net.sizes[layer + 1];
    std::vector<double> next(out);
    const auto& w = net.weights[layer];
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[layer][i];
      const double* wrow = w.data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += wrow[j] * current[j];
      next[i] = (layer + 1 < net.num_layers() && acc < 0.0) ? 0.0 : acc;
    }
    current = std::move(next);
  }
  return current;
}

std::vector<double> forward_one_hot(const FeedForwardNet& net, int index) {
  if (index < 0 || index >= net.input_size()) throw std::invalid_argument("forward_one_hot: index out of range");
  const int out0 = net.sizes[1];
  std::vector<double> current(out0);
  for (int i = 0; i < out0; ++i) {
    const double acc = net.biases[0][i] + net.weights[0][static_cast<std::size_t>(i) * net.sizes[0] + index];
    current[i] = (net.num_layers() > 1 && acc < 0.0) ? 0.0 : acc;
  }
  for (int layer = 1; layer < net.num_layers(); ++layer) {
    const int in = net.sizes[layer];
    const int out = net.sizes[layer + 1];
    std::vector<double> next(out);
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[layer][i];
      const double* wrow = net.weights[layer].data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += wrow[j] * current[j];
      next[i] = (layer + 1 < net.num_layers() && acc < 0.0) ? 0.0 : acc;
    }
    current = std::move(next);
  }
  return current;
}

ForwardTrace forward_trace(const FeedForwardNet& net, std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(net.input_size())) {
    throw std::invalid_argument("forward_trace: input size mismatch");
  }
  ForwardTrace trace;
  trace.pre.resize(net.num_layers());
  trace.post.resize(net.num_layers() + 1);
  trace.post[0].assign(input.begin(), input.end());
  for (int layer = 0; layer < net.num_layers(); ++layer) {
    const int in = net.sizes[layer];
    const int out = net.sizes[layer + 1];
    trace.pre[layer].resize(out);
    trace.post[layer + 1].resize(out);
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[layer][i];
      const double* wrow = net.weights[layer].data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += wrow[j] * trace.post[layer][j];
      trace.pre[layer][i] = acc;
      trace.post[layer + 1][i] = (layer + 1 < net.num_layers() && acc < 0.0) ? 0.0 : acc;
    }
  }
  return trace;
}

NetGradients zero_gradients(const FeedForwardNet& net) {
  NetGradients grads;
  for (const auto& w : net.weights) grads.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : net.biases) grads.biases.emplace_back(b.size(), 0.0);
  return grads;
}

void backward(const FeedForwardNet& net, const ForwardTrace& trace, std::span<const double> output_grad,
              NetGradients& grads, double scale) {
  if (output_grad.size() != static_cast<std::size_t>(net.output_size())) {
    throw std::invalid_argument("backward: output gradient size mismatch");
  }
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (int layer = net.num_layers() - 1; layer >= 0; --layer) {
    const int in = net.sizes[layer];
    const int out = net.sizes[layer + 1];
    if (layer + 1 < net.num_layers()) {
      for (int i = 0; i < out; ++i) {
        if (trace.pre[layer][i] < 0.0) delta[i] = 0.0;
      }
    }
    auto& gw = grads.weights[layer];
    auto& gb = grads.biases[layer];
    const auto& post_in = trace.post[layer];
    for (int i = 0; i < out; ++i) {
      const double d = delta[i] * scale;
      if (d == 0.0) continue;
      double* grow = gw.data() + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) grow[j] += d * post_in[j];
      gb[i] += d;
    }
    if (layer > 0) {
      std::vector<double> prev(in, 0.0);
      const auto& w = net.weights[layer];
      for (int i = 0; i < out; ++i) {
        if (delta[i] == 0.0) continue;
        const double* wrow = w.data() + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) prev[j] += wrow[j] * delta[i];
      }
      delta = std::move(prev);
    }
  }
}

AdamState make_adam(const FeedForwardNet& net, double lr) {
  AdamState state;
  state.lr = lr;
  for (const auto& w : net.weights) {
    state.m_weights.emplace_back(w.size(), 0.0);
    state.v_weights.emplace_back(w.size(), 0.0);
  }
  for (const auto& b : net.biases) {
    state.m_biases.emplace_back(b.size(), 0.0);
    state.v_biases.emplace_back(b.size(), 0.0);
  }
  return state;
}

namespace {

void adam_apply(std::vector<double>& params, std::vector<double>& m, std::vector<double>& v,
                const std::vector<double>& grad, const AdamState& state, double bc1, double bc2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace

void adam_update(FeedForwardNet& net, AdamState& state, const NetGradients& grads) {
  if (grads.weights.size() != net.weights.size()) throw std::invalid_argument("adam_update: gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t layer = 0; layer < net.weights.size(); ++layer) {
    adam_apply(net.weights[layer], state.m_weights[layer], state.v_weights[layer], grads.weights[layer], state, bc1,
               bc2);
    adam_apply(net.biases[layer], state.m_biases[layer], state.v_biases[layer], grads.biases[layer], state, bc1, bc2);
  }
}

std::vector<double> one_hot(int index, int size) {
  if (index < 0 || index >= size) throw std::invalid_argument("one_hot: index out of range");
  std::vector<double> v(size, 0.0);
  v[index] = 1.0;
  return v;
}

std::uint64_t parameter_hash(const FeedForwardNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::vector<double>& values) {
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      for (int byte = 0; byte < 8; ++byte) {
        h ^= (bits >> (8 * byte)) & 0xffULL;
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& w : net.weights) mix(w);
  for (const auto& b : net.biases) mix(b);
  return h;
}

}  // namespace oppo
