#include "vocabforge/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "vocabforge/error.hpp"

namespace vocabforge {

namespace {

void write_u64_le(std::ofstream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64_le(std::ifstream& in, const std::string& path) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw parse_error(path + ": truncated EMB1 header");
  }
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

static_assert(sizeof(float) == 4);

}  // namespace

void EmbeddingMatrix::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open embedding file for writing: " + path);
  out.write("EMB1", 4);
  write_u64_le(out, V);
  write_u64_le(out, D);
  out.write(reinterpret_cast<const char*>(vocab_hash.data()), 32);
  // x86 floats are already little-endian; written verbatim
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * 4));
  if (!out) throw io_error("failed writing embedding file: " + path);
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open embedding file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "EMB1", 4) != 0) {
    throw parse_error(path + ": bad EMB1 magic");
  }
  EmbeddingMatrix m;
  m.V = read_u64_le(in, path);
  m.D = read_u64_le(in, path);
  if (!in.read(reinterpret_cast<char*>(m.vocab_hash.data()), 32)) {
    throw parse_error(path + ": truncated EMB1 header");
  }
  m.data.resize(m.V * m.D);
  if (!in.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * 4))) {
    throw parse_error(path + ": truncated EMB1 payload");
  }
  return m;
}

namespace {

float init_stddev(InitInterp interp) {
  return interp == InitInterp::Variance ? std::sqrt(0.02f) : 0.02f;
}

void fill_gaussian(float* dst, size_t n, uint64_t seed, InitInterp interp) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, init_stddev(interp));
  for (size_t i = 0; i < n; ++i) dst[i] = dist(rng);
}

}  // namespace

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, uint64_t dim,
                                  uint64_t rng_seed, InitInterp interp) {
  EmbeddingMatrix m;
  m.V = vocab.size();
  m.D = dim;
  m.vocab_hash = vocab.hash();
  m.data.resize(m.V * m.D);
  fill_gaussian(m.data.data(), m.data.size(), rng_seed, interp);
  return m;
}

EmbeddingMatrix extend_embeddings(const EmbeddingMatrix& matrix,
                                  const Vocabulary& new_vocab, uint64_t rng_seed,
                                  InitInterp interp) {
  if (new_vocab.size() < matrix.V) {
    throw binding_error("new vocabulary is smaller than the embedding matrix");
  }
  if (new_vocab.prefix_hash(matrix.V) != matrix.vocab_hash) {
    throw binding_error(
        "embedding matrix is not bound to the base prefix of the new vocabulary");
  }
  EmbeddingMatrix out;
  out.V = new_vocab.size();
  out.D = matrix.D;
  out.vocab_hash = new_vocab.hash();
  out.data.resize(out.V * out.D);
  std::memcpy(out.data.data(), matrix.data.data(), matrix.data.size() * 4);
  size_t n_new = (out.V - matrix.V) * out.D;
  fill_gaussian(out.data.data() + matrix.data.size(), n_new, rng_seed, interp);
  return out;
}

PruneResult prune(const Vocabulary& vocab, const EmbeddingMatrix& matrix,
                  const UsageCounts& usage, size_t protected_prefix) {
  if (usage.vocab_hash != vocab.hash()) {
    throw binding_error("usage counts are not bound to this vocabulary");
  }
  if (matrix.vocab_hash != vocab.hash() || matrix.V != vocab.size()) {
    throw binding_error("embedding matrix is not bound to this vocabulary");
  }
  if (usage.counts.size() != vocab.size()) {
    throw binding_error("usage count table size mismatch");
  }

  PruneResult result;
  result.remap.assign(vocab.size(), -1);
  std::vector<std::string> kept;
  std::vector<uint32_t> kept_old_ids;
  size_t kept_base = 0;
  for (size_t i = 0; i < vocab.size(); ++i) {
    if (i < protected_prefix || usage.counts[i] > 0) {
      result.remap[i] = static_cast<int64_t>(kept.size());
      kept.push_back(vocab.surface(static_cast<uint32_t>(i)));
      kept_old_ids.push_back(static_cast<uint32_t>(i));
      if (vocab.is_base(static_cast<uint32_t>(i))) ++kept_base;
    }
  }
  result.n_removed = vocab.size() - kept.size();
  result.vocab = Vocabulary(std::move(kept), kept_base);
  result.matrix.V = kept_old_ids.size();
  result.matrix.D = matrix.D;
  result.matrix.vocab_hash = result.vocab.hash();
  result.matrix.data.resize(result.matrix.V * result.matrix.D);
  for (size_t i = 0; i < kept_old_ids.size(); ++i) {
    std::memcpy(result.matrix.row(i), matrix.row(kept_old_ids[i]), matrix.D * 4);
  }
  return result;
}

uint64_t estimate_model_size(uint64_t vocab_size, uint64_t hidden_size,
                             uint64_t layers, uint64_t heads, double ff_multiplier,
                             uint64_t bytes_per_param) {
  if (vocab_size == 0 || hidden_size == 0 || layers == 0 || heads == 0 ||
      ff_multiplier <= 0.0 || bytes_per_param == 0) {
    throw input_error("estimate_model_size: all shape parameters must be positive");
  }
  const uint64_t V = vocab_size;
  const uint64_t D = hidden_size;
  const uint64_t P = 514;  // position rows (XLM-R layout)
  const uint64_t ff = static_cast<uint64_t>(ff_multiplier * static_cast<double>(D));

  uint64_t params = 0;
  params += V * D;      // token embeddings (tied with the output decoder)
  params += P * D;      // position embeddings
  params += D;          // token-type embeddings (single type)
  params += 2 * D;      // embedding layer norm
  // encoder layers: q/k/v/o projections, feed-forward, two layer norms
  uint64_t per_layer = 4 * (D * D + D) + (D * ff + ff) + (ff * D + D) + 2 * (2 * D);
  params += layers * per_layer;
  // MLM head: dense + layer norm + decoder bias; decoder weight is tied
  params += D * D + D + 2 * D + V;
  return params * bytes_per_param;
}

}  // namespace vocabforge
