#include "aad/models.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace aad {

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(w), /*requires_grad=*/true);
}

Affine make_affine(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return Affine{xavier_uniform(in, out, rng),
                Tensor::zeros({out}, /*requires_grad=*/true)};
}

Tensor affine(const Affine& a, const Tensor& x) {
  return add(matmul(x, a.weight), a.bias);
}

Tensor as_matrix(const Tensor& rep) {
  if (rep.shape().size() == 2) return rep;
  if (rep.shape().size() == 1) return concat_rows({rep});
  throw std::invalid_argument("representation must be 1-D or 2-D, got " +
                              shape_str(rep.shape()));
}

void check_rep_dim(const char* op, const Tensor& rep, std::size_t h) {
  const Shape& s = rep.shape();
  std::size_t d = s.size() == 2 ? s[1] : (s.size() == 1 ? s[0] : 0);
  if (d != h)
    throw std::invalid_argument(std::string(op) + ": representation dim " +
                                std::to_string(d) + " != expected " +
                                std::to_string(h));
}

}  // namespace

ModelBundle init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.vocab_size < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1 ||
      cfg.num_classes < 1)
    throw std::invalid_argument("init_params: all dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  ModelBundle b;
  auto make_encoder = [&] {
    EncoderParams e;
    e.embedding = xavier_uniform(cfg.vocab_size, cfg.embed_dim, rng);
    e.l1 = make_affine(cfg.embed_dim, cfg.hidden_dim, rng);
    e.l2 = make_affine(cfg.hidden_dim, cfg.hidden_dim, rng);
    e.max_seq_len = cfg.max_seq_len;
    return e;
  };
  b.source_encoder = make_encoder();
  b.target_encoder = make_encoder();
  b.classifier.out = make_affine(cfg.hidden_dim, cfg.num_classes, rng);
  std::size_t h = cfg.hidden_dim;
  b.discriminator.l1 = make_affine(h, 4 * h, rng);
  b.discriminator.l2 = make_affine(4 * h, 4 * h, rng);
  b.discriminator.l3 = make_affine(4 * h, 1, rng);
  return b;
}

EncoderParams copy_params(const EncoderParams& src) {
  EncoderParams out;
  out.embedding = src.embedding.clone_detached(src.embedding.requires_grad());
  out.l1.weight = src.l1.weight.clone_detached(src.l1.weight.requires_grad());
  out.l1.bias = src.l1.bias.clone_detached(src.l1.bias.requires_grad());
  out.l2.weight = src.l2.weight.clone_detached(src.l2.weight.requires_grad());
  out.l2.bias = src.l2.bias.clone_detached(src.l2.bias.requires_grad());
  out.max_seq_len = src.max_seq_len;
  return out;
}

Tensor encode(const EncoderParams& enc,
              std::span<const std::vector<int>> batch) {
  if (batch.empty()) throw std::invalid_argument("encode: empty batch");
  std::size_t V = enc.embedding.shape()[0];
  std::vector<Tensor> pooled;
  pooled.reserve(batch.size());
  for (const std::vector<int>& tokens : batch) {
    if (tokens.empty())
      throw std::invalid_argument("encode: empty token sequence");
    if (tokens.size() > enc.max_seq_len)
      throw std::invalid_argument("encode: sequence length " +
                                  std::to_string(tokens.size()) +
                                  " exceeds cap " +
                                  std::to_string(enc.max_seq_len));
    for (int id : tokens)
      if (id < 0 || static_cast<std::size_t>(id) >= V)
        throw std::invalid_argument("encode: token id " + std::to_string(id) +
                                    " out of vocabulary " + std::to_string(V));
    pooled.push_back(mean_pool_rows(embedding_gather(enc.embedding, tokens)));
  }
  Tensor x = concat_rows(pooled);  // [B, e]
  Tensor h1 = relu(add(matmul(x, enc.l1.weight), enc.l1.bias));
  return add(matmul(h1, enc.l2.weight), enc.l2.bias);  // [B, h]
}

Tensor classify_logits(const ClassifierParams& cls, const Tensor& rep) {
  check_rep_dim("classify_logits", rep, cls.out.weight.shape()[0]);
  return affine(cls.out, as_matrix(rep));
}

Tensor discriminate(const DiscriminatorParams& dis, const Tensor& rep) {
  check_rep_dim("discriminate", rep, dis.l1.weight.shape()[0]);
  Tensor x = as_matrix(rep);
  Tensor h1 = leaky_relu(affine(dis.l1, x), DiscriminatorParams::kLeakAlpha);
  Tensor h2 = leaky_relu(affine(dis.l2, h1), DiscriminatorParams::kLeakAlpha);
  return sigmoid(affine(dis.l3, h2));  // [B, 1]
}

ParamList encoder_params(EncoderParams& enc, const std::string& prefix) {
  return {{prefix + ".embedding", enc.embedding},
          {prefix + ".l1.weight", enc.l1.weight},
          {prefix + ".l1.bias", enc.l1.bias},
          {prefix + ".l2.weight", enc.l2.weight},
          {prefix + ".l2.bias", enc.l2.bias}};
}

ParamList classifier_params(ClassifierParams& cls) {
  return {{"classifier.weight", cls.out.weight},
          {"classifier.bias", cls.out.bias}};
}

ParamList discriminator_params(DiscriminatorParams& dis) {
  return {{"discriminator.l1.weight", dis.l1.weight},
          {"discriminator.l1.bias", dis.l1.bias},
          {"discriminator.l2.weight", dis.l2.weight},
          {"discriminator.l2.bias", dis.l2.bias},
          {"discriminator.l3.weight", dis.l3.weight},
          {"discriminator.l3.bias", dis.l3.bias}};
}

ParamList bundle_params(ModelBundle& b) {
  ParamList all = encoder_params(b.source_encoder, "source_encoder");
  for (Param& p : encoder_params(b.target_encoder, "target_encoder"))
    all.push_back(p);
  for (Param& p : classifier_params(b.classifier)) all.push_back(p);
  for (Param& p : discriminator_params(b.discriminator)) all.push_back(p);
  return all;
}

void set_requires_grad(ParamList params, bool value) {
  for (Param& p : params) {
    p.tensor.node()->requires_grad = value;
    p.tensor.node()->needs_grad = value;
  }
}

void save_checkpoint(const ModelBundle& b, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  ModelBundle& mb = const_cast<ModelBundle&>(b);
  for (const Param& p : bundle_params(mb)) {
    nlohmann::json entry;
    entry["name"] = p.name;
    entry["shape"] = p.tensor.shape();
    entry["values"] = p.tensor.values();
    j.push_back(entry);
  }
  nlohmann::json root;
  root["max_seq_len"] = b.source_encoder.max_seq_len;
  root["tensors"] = std::move(j);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out << root.dump();
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
  nlohmann::json root = nlohmann::json::parse(in);
  std::unordered_map<std::string, Tensor> by_name;
  for (const auto& entry : root.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> vals = entry.at("values").get<std::vector<double>>();
    by_name[entry.at("name").get<std::string>()] =
        Tensor::from(std::move(shape), std::move(vals), /*requires_grad=*/true);
  }
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("load_checkpoint: missing tensor '" + name +
                               "' in " + path);
    return it->second;
  };
  ModelBundle b;
  auto load_encoder = [&](EncoderParams& e, const std::string& prefix) {
    e.embedding = take(prefix + ".embedding");
    e.l1 = {take(prefix + ".l1.weight"), take(prefix + ".l1.bias")};
    e.l2 = {take(prefix + ".l2.weight"), take(prefix + ".l2.bias")};
    e.max_seq_len = root.at("max_seq_len").get<std::size_t>();
  };
  load_encoder(b.source_encoder, "source_encoder");
  load_encoder(b.target_encoder, "target_encoder");
  b.classifier.out = {take("classifier.weight"), take("classifier.bias")};
  b.discriminator.l1 = {take("discriminator.l1.weight"),
                        take("discriminator.l1.bias")};
  b.discriminator.l2 = {take("discriminator.l2.weight"),
                        take("discriminator.l2.bias")};
  b.discriminator.l3 = {take("discriminator.l3.weight"),
                        take("discriminator.l3.bias")};
  return b;
}

}  // namespace aad
