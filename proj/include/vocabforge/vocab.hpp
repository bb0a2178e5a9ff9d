#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vocabforge/tokenizer.hpp"

namespace vocabforge {

using VocabHash = std::array<uint8_t, 32>;

std::string hash_hex(const VocabHash& h);

// Ordered token -> id table. Entries [0, n_base) carry the base mark,
// the rest are extensions; merge never reorders the base prefix.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> entries, size_t n_base = SIZE_MAX);

  size_t size() const { return entries_.size(); }
  size_t n_base() const { return n_base_; }
  const std::vector<std::string>& entries() const { return entries_; }
  const std::string& surface(uint32_t id) const { return entries_.at(id); }
  std::optional<uint32_t> id_of(const std::string& surface) const;
  bool is_base(uint32_t id) const { return id < n_base_; }

  // SHA-256 over the entry list; binds embedding matrices to this table.
  VocabHash hash() const;
  // Hash of the first `prefix` entries only.
  VocabHash prefix_hash(size_t prefix) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  static Vocabulary from_model(const TokenizerModel& model);

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, uint32_t> index_;
  size_t n_base_ = 0;
};

// Base surfaces keep their ids; new surfaces from each addition are
// appended in addition order, lexicographic within each addition, once.
Vocabulary merge_vocabularies(const Vocabulary& base,
                              const std::vector<Vocabulary>& additions);

// Companion merge at the model level: base pieces keep their scores, new
// pieces take theirs from the first addition that introduces them. Piece
// order matches merge_vocabularies on the corresponding vocabularies.
TokenizerModel merge_models(const TokenizerModel& base,
                            const std::vector<TokenizerModel>& additions);

struct UsageCounts {
  std::vector<uint64_t> counts;  // indexed by token id
  std::string corpus_id;
  VocabHash vocab_hash{};

  void save(const std::string& path) const;
  static UsageCounts load(const std::string& path);
};

// Occurrence count of every token over the segmented corpus. Specials
// are marked used unconditionally so pruning can never remove them.
UsageCounts count_usage(const TokenizerModel& model,
                        const std::vector<std::string>& corpus,
                        const std::string& corpus_id = "");

}  // namespace vocabforge
