#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oppo/rng.hpp"

namespace oppo {

/// Fully connected network with rectified-linear hidden layers and an
/// identity output layer. Weights are row-major [out x in].
struct FeedForwardNet {
  std::vector<int> sizes;
  std::vector<std::vector<double>> weights;  // per layer
  std::vector<std::vector<double>> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
};

/// Zero biases, weights drawn zero-mean with scale 1/sqrt(fan_in).
FeedForwardNet make_net(const std::vector<int>& sizes, Rng& rng);

std::vector<double> forward(const FeedForwardNet& net, std::span<const double> input);

/// Forward pass for a one-hot input, identical arithmetic to forward() on
/// the expanded basis vector.
std::vector<double> forward_one_hot(const FeedForwardNet& net, int index);

/// Activations recorded during a forward pass; post[0] is the input.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // per layer, before relu
  std::vector<std::vector<double>> post;  // post[0] = input, then after relu
};

ForwardTrace forward_trace(const FeedForwardNet& net, std::span<const double> input);

struct NetGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

NetGradients zero_gradients(const FeedForwardNet& net);

/// Reverse accumulation of d(output . output_grad)/d(parameters), added
/// into grads scaled by `scale`.
void backward(const FeedForwardNet& net, const ForwardTrace& trace, std::span<const double> output_grad,
              NetGradients& grads, double scale = 1.0);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
};

AdamState make_adam(const FeedForwardNet& net, double lr);

/// One adaptive-moment descent step on the given gradients.
void adam_update(FeedForwardNet& net, AdamState& state, const NetGradients& grads);

std::vector<double> one_hot(int index, int size);

/// FNV-1a over the raw parameter bytes; used to assert frozen networks.
std::uint64_t parameter_hash(const FeedForwardNet& net);

}  // namespace oppo
