#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace vocabforge {

inline constexpr int32_t kLabelSentinel = -100;
inline constexpr size_t kMaxSeqLen = 256;

struct MaskedBatch {
  std::vector<int32_t> input_ids;
  std::vector<int32_t> labels;  // original id where masked, sentinel elsewhere
  std::vector<uint8_t> mask;    // 1 at selected positions
};

// Standard MLM corruption: each non-special position is selected with
// probability p; selected positions become the mask token 80% of the
// time, a random token 10%, and stay unchanged 10%.
MaskedBatch mask_tokens(const std::vector<int32_t>& ids, double p, uint64_t rng_seed,
                        const std::set<int32_t>& special_ids, int32_t mask_id,
                        int32_t vocab_size);

struct BenchConfig {
  uint64_t V = 0;
  uint64_t D = 0;
  uint64_t layers = 0;
  uint64_t seq_len = 0;
  uint64_t batch = 0;
  uint64_t repeats = 0;
  uint64_t rng_seed = 0;

  void validate() const;
};

// Minimal transformer-shaped compute: embedding lookup, `layers` dense
// relu blocks, then a tied projection to V with log-softmax. The output
// projection is the only V-dependent term, which is what the pruning
// speedup acts on.
struct ToyModel {
  uint64_t V = 0, D = 0, layers = 0;
  std::vector<float> embeddings;              // V x D, tied with the projection
  std::vector<std::vector<float>> body_w;     // per layer, D x D
  std::vector<std::vector<float>> body_b;     // per layer, D
  std::vector<float> out_bias;                // V

  static ToyModel random(uint64_t V, uint64_t D, uint64_t layers, uint64_t seed);
};

struct ForwardTimes {
  double embedding = 0.0;
  double body = 0.0;
  double projection = 0.0;  // projection + log-softmax
  double total() const { return embedding + body + projection; }
};

struct ForwardResult {
  std::vector<float> log_probs;  // rows x V when kept, empty otherwise
  uint64_t rows = 0;
  ForwardTimes times;
  double checksum = 0.0;
};

ForwardResult toy_forward(const ToyModel& model, const std::vector<int32_t>& ids,
                          bool keep_output = true);

ForwardResult toy_forward(const BenchConfig& config, const MaskedBatch& batch);

struct BenchStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  ForwardTimes component_means;
};

struct BenchReport {
  BenchStats large;
  BenchStats small;
  double reduction = 0.0;  // 1 - t_small / t_large, on medians
  double projection_delta_share = 0.0;  // fraction of the delta from projection

  std::string to_json() const;
};

BenchReport run_bench(const BenchConfig& large, const BenchConfig& small);

}  // namespace vocabforge
