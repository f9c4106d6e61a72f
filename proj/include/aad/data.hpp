#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aad {

enum class Domain { kSource, kTarget };

struct Example {
  std::vector<int> tokens;
  std::optional<int> label;  // absent on unlabeled target training examples
  Domain domain = Domain::kSource;
};

struct GeneratorConfig {
  std::size_t vocab_size = 2000;
  double pivot_fraction = 0.3;  // rho: class tokens shared across domains
  std::size_t examples_per_class = 1000;  // source, per class
  std::size_t min_len = 20;
  std::size_t max_len = 128;
  double class_token_rate = 0.25;  // remainder is noise tokens
  std::size_t class_tokens_per_class = 50;  // pool size per (domain, class)
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;
};

struct DomainPairDataset {
  std::vector<Example> source_train;   // labeled
  std::vector<Example> source_dev;     // labeled
  std::vector<Example> target_train;   // unlabeled
  std::vector<Example> target_eval;    // labeled
  std::size_t vocab_size = 0;
};

// Deterministic synthetic domain pair. Class-indicative tokens are split
// into shared pivots (fraction rho) and domain-specific pools; documents mix
// class tokens with shared noise tokens. Labels exist only where the split
// protocol allows them.
DomainPairDataset generate_domain_pair(const GeneratorConfig& cfg);

// JSONL corpus: objects with "text" (string) or "tokens" (int list), plus
// optional "label" (int) and "domain" ("source"|"target"). Raw text is
// whitespace-tokenized and FNV-hashed into [0, vocab_size); sequences are
// truncated to max_len.
std::vector<Example> load_jsonl(const std::string& path,
                                std::size_t vocab_size,
                                std::size_t max_len = 128);

// 80/20 stratified source train/dev split plus label stripping on target
// training examples; deterministic per seed.
DomainPairDataset split_protocol(std::vector<Example> labeled_source,
                                 std::vector<Example> unlabeled_target,
                                 std::vector<Example> labeled_target,
                                 std::uint64_t seed,
                                 std::size_t vocab_size);

// Reshuffled index batches keyed by (seed, epoch); final short batch kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::size_t epoch);

// Manifest naming the four split files; all paths relative to the manifest.
void save_dataset(const DomainPairDataset& ds, const std::string& dir,
                  const std::string& manifest_name = "manifest.json");
DomainPairDataset load_dataset(const std::string& manifest_path);

int hash_token(const std::string& word, std::size_t vocab_size);

}  // namespace aad
