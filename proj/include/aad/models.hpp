#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aad/optim.hpp"
#include "aad/tensor.hpp"

namespace aad {

struct ModelConfig {
  std::size_t vocab_size = 2000;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t num_classes = 2;
  std::size_t max_seq_len = 128;
};

struct Affine {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

// Embedding bag + two affine layers with relu between; mean pooling.
struct EncoderParams {
  Tensor embedding;  // [V, e]
  Affine l1;         // e -> h
  Affine l2;         // h -> h
  std::size_t max_seq_len = 128;
};

struct ClassifierParams {
  Affine out;  // h -> K
};

// h -> 4h -> 4h -> 1 with leaky-relu(0.01) and a final sigmoid.
struct DiscriminatorParams {
  Affine l1, l2, l3;
  static constexpr double kLeakAlpha = 0.01;
};

struct ModelBundle {
  EncoderParams source_encoder;
  EncoderParams target_encoder;
  ClassifierParams classifier;
  DiscriminatorParams discriminator;
  bool source_encoder_frozen = false;
  bool classifier_frozen = false;
};

// Xavier-uniform weights, zero biases, deterministic per seed.
ModelBundle init_params(const ModelConfig& cfg, std::uint64_t seed);

EncoderParams copy_params(const EncoderParams& src);

// Mean-pooled two-layer representation for a batch of token sequences -> [B,h].
Tensor encode(const EncoderParams& enc,
              std::span<const std::vector<int>> batch);

Tensor classify_logits(const ClassifierParams& cls, const Tensor& rep);

// Probabilities in (0,1), shape [B,1].
Tensor discriminate(const DiscriminatorParams& dis, const Tensor& rep);

ParamList encoder_params(EncoderParams& enc, const std::string& prefix);
ParamList classifier_params(ClassifierParams& cls);
ParamList discriminator_params(DiscriminatorParams& dis);
ParamList bundle_params(ModelBundle& b);  // all four components

void set_requires_grad(ParamList params, bool value);

// Flat (name, shape, values) checkpoint; round-trips bit-exact.
void save_checkpoint(const ModelBundle& b, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace aad
