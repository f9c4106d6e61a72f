#include "aad/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace aad {

namespace fs = std::filesystem;

int hash_token(const std::string& word, std::size_t vocab_size) {
  // FNV-1a 64-bit
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : word) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<int>(h % vocab_size);
}

namespace {

struct Vocab {
  // Per class: shared pivots plus one pool per domain.
  std::vector<std::vector<int>> pivots;                   // [class]
  std::vector<std::array<std::vector<int>, 2>> specific;  // [class][domain]
  std::vector<int> noise;

  const std::vector<int>& pivot_pool(std::size_t cls) const {
    return pivots[cls];
  }
  std::vector<int> class_pool(std::size_t cls, Domain d) const {
    std::vector<int> pool = pivots[cls];
    const auto& spec = specific[cls][d == Domain::kSource ? 0 : 1];
    pool.insert(pool.end(), spec.begin(), spec.end());
    return pool;
  }
};

Vocab partition_vocab(const GeneratorConfig& cfg) {
  std::size_t C = cfg.class_tokens_per_class;
  std::size_t n_pivot = static_cast<std::size_t>(
      std::llround(cfg.pivot_fraction * static_cast<double>(C)));
  if (n_pivot > C) n_pivot = C;
  std::size_t n_spec = C - n_pivot;
  std::size_t total = cfg.num_classes * (n_pivot + 2 * n_spec);
  if (total + 1 > cfg.vocab_size)
    throw std::invalid_argument(
        "generate_domain_pair: vocabulary of " +
        std::to_string(cfg.vocab_size) + " cannot host " +
        std::to_string(total) + " class tokens plus noise tokens");
  Vocab v;
  int next = 0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    std::vector<int> piv(n_pivot);
    for (int& id : piv) id = next++;
    std::vector<int> src(n_spec), tgt(n_spec);
    for (int& id : src) id = next++;
    for (int& id : tgt) id = next++;
    v.pivots.push_back(std::move(piv));
    v.specific.push_back({std::move(src), std::move(tgt)});
  }
  for (std::size_t id = static_cast<std::size_t>(next); id < cfg.vocab_size;
       ++id)
    v.noise.push_back(static_cast<int>(id));
  return v;
}

Example make_document(const GeneratorConfig& cfg, const Vocab& vocab,
                      std::size_t cls, Domain domain, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_len,
                                                      cfg.max_len);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> pool = vocab.class_pool(cls, domain);
  std::uniform_int_distribution<std::size_t> pool_dist(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> noise_dist(0,
                                                        vocab.noise.size() - 1);
  std::size_t len = len_dist(rng);
  Example ex;
  ex.tokens.reserve(len);
  ex.domain = domain;
  ex.label = static_cast<int>(cls);
  for (std::size_t i = 0; i < len; ++i) {
    if (unit(rng) < cfg.class_token_rate && !pool.empty())
      ex.tokens.push_back(pool[pool_dist(rng)]);
    else
      ex.tokens.push_back(vocab.noise[noise_dist(rng)]);
  }
  return ex;
}

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

DomainPairDataset generate_domain_pair(const GeneratorConfig& cfg) {
  if (cfg.min_len < 1 || cfg.max_len < cfg.min_len)
    throw std::invalid_argument("generate_domain_pair: bad length range");
  Vocab vocab = partition_vocab(cfg);
  std::mt19937_64 rng = keyed_rng(cfg.seed, 0xda7a);

  DomainPairDataset ds;
  ds.vocab_size = cfg.vocab_size;
  std::size_t n = cfg.examples_per_class;
  std::size_t n_train = (n * 4) / 5;  // 80/20 source split
  for (std::size_t c = 0; c < cfg.num_classes; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      Example ex = make_document(cfg, vocab, c, Domain::kSource, rng);
      (i < n_train ? ds.source_train : ds.source_dev).push_back(std::move(ex));
    }
  for (std::size_t c = 0; c < cfg.num_classes; ++c)
    for (std::size_t i = 0; i < n_train; ++i) {
      Example ex = make_document(cfg, vocab, c, Domain::kTarget, rng);
      ex.label.reset();  // unlabeled by construction
      ds.target_train.push_back(std::move(ex));
    }
  for (std::size_t c = 0; c < cfg.num_classes; ++c)
    for (std::size_t i = 0; i < n; ++i)
      ds.target_eval.push_back(make_document(cfg, vocab, c, Domain::kTarget, rng));
  return ds;
}

namespace {

Example parse_record(const nlohmann::json& j, std::size_t vocab_size,
                     std::size_t max_len, std::size_t line_no) {
  Example ex;
  if (j.contains("tokens")) {
    for (const auto& t : j.at("tokens")) {
      if (!t.is_number_integer())
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": tokens must be integers");
      int id = t.get<int>();
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": token id " + std::to_string(id) +
                                 " out of [0," + std::to_string(vocab_size) +
                                 ")");
      ex.tokens.push_back(id);
    }
  } else if (j.contains("text")) {
    std::istringstream words(j.at("text").get<std::string>());
    std::string w;
    while (words >> w) ex.tokens.push_back(hash_token(w, vocab_size));
  } else {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": record needs 'text' or 'tokens'");
  }
  if (ex.tokens.size() > max_len) ex.tokens.resize(max_len);
  if (j.contains("label") && !j.at("label").is_null())
    ex.label = j.at("label").get<int>();
  if (j.contains("domain")) {
    std::string d = j.at("domain").get<std::string>();
    if (d == "source") ex.domain = Domain::kSource;
    else if (d == "target") ex.domain = Domain::kTarget;
    else
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": unknown domain '" + d + "'");
  }
  return ex;
}

}  // namespace

std::vector<Example> load_jsonl(const std::string& path,
                                std::size_t vocab_size, std::size_t max_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    out.push_back(parse_record(j, vocab_size, max_len, line_no));
  }
  return out;
}

DomainPairDataset split_protocol(std::vector<Example> labeled_source,
                                 std::vector<Example> unlabeled_target,
                                 std::vector<Example> labeled_target,
                                 std::uint64_t seed, std::size_t vocab_size) {
  if (labeled_source.size() < 10)
    throw std::invalid_argument("split_protocol: need >= 10 source examples");
  std::vector<std::vector<Example>> by_class;
  for (Example& ex : labeled_source) {
    if (!ex.label)
      throw std::invalid_argument("split_protocol: unlabeled source example");
    std::size_t c = static_cast<std::size_t>(*ex.label);
    if (by_class.size() <= c) by_class.resize(c + 1);
    ex.domain = Domain::kSource;
    by_class[c].push_back(std::move(ex));
  }
  std::size_t mn = SIZE_MAX, mx = 0;
  for (const auto& v : by_class) {
    mn = std::min(mn, v.size());
    mx = std::max(mx, v.size());
  }
  if (mx > mn + 1)
    throw std::invalid_argument(
        "split_protocol: source class imbalance beyond 1 example (" +
        std::to_string(mn) + " vs " + std::to_string(mx) + ")");

  DomainPairDataset ds;
  ds.vocab_size = vocab_size;
  std::mt19937_64 rng = keyed_rng(seed, 0x5117);
  for (auto& cls : by_class) {
    std::shuffle(cls.begin(), cls.end(), rng);
    std::size_t n_train = (cls.size() * 4) / 5;  // stratified 80/20
    for (std::size_t i = 0; i < cls.size(); ++i)
      (i < n_train ? ds.source_train : ds.source_dev)
          .push_back(std::move(cls[i]));
  }
  for (Example& ex : unlabeled_target) {
    ex.label.reset();  // structurally unlabeled
    ex.domain = Domain::kTarget;
    ds.target_train.push_back(std::move(ex));
  }
  for (Example& ex : labeled_target) {
    if (!ex.label)
      throw std::invalid_argument("split_protocol: target eval example "
                                  "missing label");
    ex.domain = Domain::kTarget;
    ds.target_eval.push_back(std::move(ex));
  }
  return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::size_t epoch) {
  if (batch_size < 1)
    throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  std::mt19937_64 rng = keyed_rng(seed, 0xba7c4 + epoch);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < count; i += batch_size) {
    std::size_t end = std::min(count, i + batch_size);
    batches.emplace_back(idx.begin() + static_cast<long>(i),
                         idx.begin() + static_cast<long>(end));
  }
  return batches;
}

namespace {

void write_jsonl(const std::vector<Example>& xs, const fs::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_dataset: cannot write " + path.string());
  for (const Example& ex : xs) {
    nlohmann::json j;
    j["tokens"] = ex.tokens;
    if (ex.label) j["label"] = *ex.label;
    j["domain"] = ex.domain == Domain::kSource ? "source" : "target";
    out << j.dump() << '\n';
  }
}

}  // namespace

void save_dataset(const DomainPairDataset& ds, const std::string& dir,
                  const std::string& manifest_name) {
  fs::create_directories(dir);
  fs::path root(dir);
  write_jsonl(ds.source_train, root / "source_train.jsonl");
  write_jsonl(ds.source_dev, root / "source_dev.jsonl");
  write_jsonl(ds.target_train, root / "target_train.jsonl");
  write_jsonl(ds.target_eval, root / "target_eval.jsonl");
  nlohmann::json m;
  m["vocab_size"] = ds.vocab_size;
  m["files"] = {{"source_train", "source_train.jsonl"},
                {"source_dev", "source_dev.jsonl"},
                {"target_train", "target_train.jsonl"},
                {"target_eval", "target_eval.jsonl"}};
  std::ofstream out(root / manifest_name);
  if (!out)
    throw std::runtime_error("save_dataset: cannot write manifest in " + dir);
  out << m.dump(2) << '\n';
}

DomainPairDataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("load_dataset: cannot open " + manifest_path);
  nlohmann::json m = nlohmann::json::parse(in);
  fs::path root = fs::path(manifest_path).parent_path();
  std::size_t V = m.at("vocab_size").get<std::size_t>();
  auto file = [&](const char* key) {
    return (root / m.at("files").at(key).get<std::string>()).string();
  };
  DomainPairDataset ds;
  ds.vocab_size = V;
  ds.source_train = load_jsonl(file("source_train"), V);
  ds.source_dev = load_jsonl(file("source_dev"), V);
  ds.target_train = load_jsonl(file("target_train"), V);
  ds.target_eval = load_jsonl(file("target_eval"), V);
  for (Example& ex : ds.target_train) ex.label.reset();
  return ds;
}

}  // namespace aad
