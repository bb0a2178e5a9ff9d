#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vocabforge {

struct Piece {
  std::string surface;
  double log_prob = 0.0;
};

// Default reserved tokens: unknown, padding, begin, end, mask.
// The unknown token is always the first special.
std::vector<std::string> default_specials();

struct Segmentation {
  std::vector<int32_t> token_ids;
  // Surfaces as matched in the normalized input; concatenating them
  // reproduces the normalized text even when ids map to <unk>.
  std::vector<std::string> surfaces;
};

class TokenizerModel {
 public:
  TokenizerModel() = default;
  TokenizerModel(std::vector<std::string> specials, std::vector<Piece> pieces,
                 std::string normalization_rule = "nfkc_ws");

  size_t size() const { return entries_.size(); }
  size_t n_specials() const { return n_specials_; }
  int32_t unk_id() const { return 0; }
  const std::vector<Piece>& entries() const { return entries_; }
  const Piece& entry(int32_t id) const { return entries_.at(static_cast<size_t>(id)); }
  const std::string& normalization_rule() const { return normalization_; }
  size_t max_piece_codepoints() const { return max_piece_cp_; }

  bool is_special(int32_t id) const {
    return id >= 0 && static_cast<size_t>(id) < n_specials_;
  }
  std::optional<int32_t> id_of(const std::string& surface) const;
  bool has_byte_fallback() const { return byte_fallback_; }
  std::optional<int32_t> byte_piece_id(uint8_t byte) const;

  void validate() const;

  void save(const std::string& path) const;
  static TokenizerModel load(const std::string& path);

 private:
  std::vector<Piece> entries_;
  size_t n_specials_ = 0;
  std::string normalization_ = "nfkc_ws";
  std::unordered_map<std::string, int32_t> index_;
  size_t max_piece_cp_ = 0;
  bool byte_fallback_ = false;
  std::vector<int32_t> byte_ids_;
};

struct TrainOptions {
  int em_iterations_per_round = 2;
  double prune_fraction = 0.2;
  size_t max_candidate_codepoints = 8;
  bool byte_fallback = false;
  uint64_t rng_seed = 0;
};

TokenizerModel train_unigram(const std::vector<std::string>& corpus,
                             size_t target_vocab_size, double seed_multiplier,
                             const std::vector<std::string>& specials = default_specials(),
                             const TrainOptions& options = {});

// Maximum-log-prob segmentation of the normalized text (Viterbi over the
// piece lattice). Characters not covered by any piece fall back to byte
// pieces when the model has them, otherwise to the unknown token.
Segmentation encode(const TokenizerModel& model, const std::string& text);

std::string decode(const TokenizerModel& model, const std::vector<int32_t>& token_ids);

}  // namespace vocabforge
