#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vocabforge/vocab.hpp"

namespace vocabforge {

// V x D dense matrix keyed to a Vocabulary via vocab_hash. Serialized
// bit-exactly as little-endian f32 row-major (EMB1 format).
struct EmbeddingMatrix {
  uint64_t V = 0;
  uint64_t D = 0;
  VocabHash vocab_hash{};
  std::vector<float> data;  // row-major, V * D

  float* row(uint64_t i) { return data.data() + i * D; }
  const float* row(uint64_t i) const { return data.data() + i * D; }

  void save(const std::string& path) const;
  static EmbeddingMatrix load(const std::string& path);
};

enum class InitInterp {
  Variance,  // "variance 0.02" read literally: stddev = sqrt(0.02)
  Stddev,    // the common initializer convention: stddev = 0.02
};

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, uint64_t dim,
                                  uint64_t rng_seed,
                                  InitInterp interp = InitInterp::Variance);

// Appends freshly sampled Gaussian rows for the extension entries of
// new_vocab; base rows are copied bit-exactly.
EmbeddingMatrix extend_embeddings(const EmbeddingMatrix& matrix,
                                  const Vocabulary& new_vocab, uint64_t rng_seed,
                                  InitInterp interp = InitInterp::Variance);

struct PruneResult {
  Vocabulary vocab;
  EmbeddingMatrix matrix;
  std::vector<int64_t> remap;  // old id -> new id, -1 when removed
  size_t n_removed = 0;
};

// Drops every token with usage count 0; the first `protected_prefix`
// ids (the specials) survive regardless. Surviving rows are bit-exact
// copies in the original relative order.
PruneResult prune(const Vocabulary& vocab, const EmbeddingMatrix& matrix,
                  const UsageCounts& usage, size_t protected_prefix);

// Transformer parameter-count estimate (embeddings + encoder + MLM head),
// in bytes. Position/type embedding row counts follow the XLM-R layout.
uint64_t estimate_model_size(uint64_t vocab_size, uint64_t hidden_size,
                             uint64_t layers, uint64_t heads, double ff_multiplier,
                             uint64_t bytes_per_param);

}  // namespace vocabforge
