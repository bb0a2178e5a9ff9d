#include "vocabforge/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "vocabforge/error.hpp"
#include "vocabforge/text.hpp"

namespace vocabforge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

bool is_byte_piece(const std::string& s, uint8_t* out) {
  // <0xHH>
  if (s.size() != 6 || s.rfind("<0x", 0) != 0 || s.back() != '>') return false;
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  int hi = hex(s[3]), lo = hex(s[4]);
  if (hi < 0 || lo < 0) return false;
  if (out) *out = static_cast<uint8_t>(hi * 16 + lo);
  return true;
}

std::string byte_piece_surface(uint8_t b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "<0x%02X>", b);
  return buf;
}

}  // namespace

std::vector<std::string> default_specials() {
  return {"<unk>", "<pad>", "<s>", "</s>", "<mask>"};
}

TokenizerModel::TokenizerModel(std::vector<std::string> specials,
                               std::vector<Piece> pieces,
                               std::string normalization_rule)
    : normalization_(std::move(normalization_rule)) {
  n_specials_ = specials.size();
  entries_.reserve(specials.size() + pieces.size());
  for (auto& s : specials) entries_.push_back(Piece{std::move(s), 0.0});
  for (auto& p : pieces) entries_.push_back(std::move(p));

  byte_ids_.assign(256, -1);
  size_t n_byte_pieces = 0;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& surface = entries_[i].surface;
    auto [it, inserted] = index_.emplace(surface, static_cast<int32_t>(i));
    if (!inserted) {
      throw validation_error("duplicate piece surface: " + surface);
    }
    if (i >= n_specials_) {
      uint8_t b;
      if (is_byte_piece(surface, &b)) {
        byte_ids_[b] = static_cast<int32_t>(i);
        ++n_byte_pieces;
      } else {
        max_piece_cp_ = std::max(max_piece_cp_, count_codepoints(surface));
      }
    }
  }
  byte_fallback_ = (n_byte_pieces == 256);
}

std::optional<int32_t> TokenizerModel::id_of(const std::string& surface) const {
  auto it = index_.find(surface);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int32_t> TokenizerModel::byte_piece_id(uint8_t byte) const {
  if (byte_ids_.empty() || byte_ids_[byte] < 0) return std::nullopt;
  return byte_ids_[byte];
}

void TokenizerModel::validate() const {
  if (n_specials_ == 0) throw validation_error("model has no special tokens");
  for (size_t i = n_specials_; i < entries_.size(); ++i) {
    double lp = entries_[i].log_prob;
    if (!std::isfinite(lp) || lp > 0.0) {
      throw validation_error("non-finite or positive log_prob for piece: " +
                             entries_[i].surface);
    }
  }
}

void TokenizerModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open model file for writing: " + path);
  out << "UNIGRAM v1 " << normalization_ << " " << entries_.size() << "\n";
  out.precision(17);
  for (const auto& e : entries_) {
    out << e.surface << "\t" << e.log_prob << "\n";
  }
  if (!out) throw io_error("failed writing model file: " + path);
}

TokenizerModel TokenizerModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open model file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty model file");
  std::istringstream header(line);
  std::string magic, version, rule;
  size_t count = 0;
  header >> magic >> version >> rule >> count;
  if (magic != "UNIGRAM" || version != "v1" || header.fail()) {
    throw parse_error(path + ": bad model header");
  }
  // Specials are the leading run of entries with log_prob exactly 0;
  // learned pieces are written with strictly negative log_prob.
  std::vector<std::string> specials;
  std::vector<Piece> pieces;
  bool in_specials = true;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw parse_error(path + ": truncated model, expected " + std::to_string(count) +
                        " entries");
    }
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw parse_error(path + ": line " + std::to_string(i + 2) + ": missing tab");
    }
    std::string surface = line.substr(0, tab);
    double lp = 0.0;
    try {
      lp = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw parse_error(path + ": line " + std::to_string(i + 2) + ": bad log_prob");
    }
    if (in_specials && lp == 0.0) {
      specials.push_back(std::move(surface));
    } else {
      in_specials = false;
      pieces.push_back(Piece{std::move(surface), lp});
    }
  }
  TokenizerModel model(std::move(specials), std::move(pieces), rule);
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

struct LatticeStep {
  int prev = -1;
  std::vector<int32_t> ids;
  std::string surface;
};

}  // namespace

Segmentation encode(const TokenizerModel& model, const std::string& text) {
  std::string normalized = normalize(text);
  Segmentation seg;
  if (normalized.empty()) return seg;

  std::vector<std::string> chars = split_codepoints(normalized);
  size_t n = chars.size();
  size_t max_len = std::max<size_t>(1, model.max_piece_codepoints());

  double min_lp = 0.0;
  for (size_t i = model.n_specials(); i < model.size(); ++i) {
    min_lp = std::min(min_lp, model.entry(static_cast<int32_t>(i)).log_prob);
  }
  const double unk_score = min_lp - 10.0;

  std::vector<double> best(n + 1, kNegInf);
  std::vector<LatticeStep> back(n + 1);
  best[0] = 0.0;

  std::string window;
  for (size_t i = 0; i < n; ++i) {
    if (best[i] == kNegInf) continue;
    window.clear();
    bool matched_single = false;
    for (size_t len = 1; len <= max_len && i + len <= n; ++len) {
      window += chars[i + len - 1];
      auto id = model.id_of(window);
      if (!id) continue;
      if (len == 1) matched_single = true;
      double score = best[i] + model.entry(*id).log_prob;
      if (score > best[i + len]) {
        best[i + len] = score;
        back[i + len] = LatticeStep{static_cast<int>(i), {*id}, window};
      }
    }
    if (!matched_single) {
      // fallback for a character no piece covers
      const std::string& c = chars[i];
      double score;
      std::vector<int32_t> ids;
      if (model.has_byte_fallback()) {
        score = best[i];
        for (unsigned char b : c) {
          auto bid = model.byte_piece_id(b);
          ids.push_back(*bid);
          score += model.entry(*bid).log_prob;
        }
      } else {
        score = best[i] + unk_score;
        ids.push_back(model.unk_id());
      }
      if (score > best[i + 1]) {
        best[i + 1] = score;
        back[i + 1] = LatticeStep{static_cast<int>(i), std::move(ids), c};
      }
    }
  }

  std::vector<const LatticeStep*> steps;
  for (int pos = static_cast<int>(n); pos > 0; pos = back[pos].prev) {
    steps.push_back(&back[pos]);
  }
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const LatticeStep& s = **it;
    for (int32_t id : s.ids) seg.token_ids.push_back(id);
    if (s.ids.size() > 1) {
      // byte fallback: attribute the surface to the first byte piece
      seg.surfaces.push_back(s.surface);
      for (size_t k = 1; k < s.ids.size(); ++k) seg.surfaces.emplace_back();
    } else {
      seg.surfaces.push_back(s.surface);
    }
  }
  return seg;
}

std::string decode(const TokenizerModel& model, const std::vector<int32_t>& token_ids) {
  std::string out;
  std::string byte_buf;
  for (int32_t id : token_ids) {
    if (id < 0 || static_cast<size_t>(id) >= model.size()) {
      throw input_error("token id out of range: " + std::to_string(id));
    }
    const auto& surface = model.entry(id).surface;
    uint8_t b;
    if (!model.is_special(id) && is_byte_piece(surface, &b)) {
      byte_buf.push_back(static_cast<char>(b));
      continue;
    }
    out += byte_buf;
    byte_buf.clear();
    out += surface;
  }
  out += byte_buf;
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Sentence {
  std::vector<std::string> chars;
  uint64_t freq = 0;
};

struct Candidate {
  std::string surface;
  double log_prob = 0.0;
  bool is_char = false;
  double expected_count = 0.0;
};

// Matches pieces at every position of a sentence against the current
// candidate table. match[i] holds (length, candidate index) pairs.
using MatchTable = std::vector<std::vector<std::pair<size_t, size_t>>>;

MatchTable build_matches(const Sentence& s,
                         const std::unordered_map<std::string, size_t>& table,
                         size_t max_len) {
  size_t n = s.chars.size();
  MatchTable matches(n);
  std::string window;
  for (size_t i = 0; i < n; ++i) {
    window.clear();
    for (size_t len = 1; len <= max_len && i + len <= n; ++len) {
      window += s.chars[i + len - 1];
      auto it = table.find(window);
      if (it != table.end()) matches[i].emplace_back(len, it->second);
    }
  }
  return matches;
}

// One E-step over all sentences: accumulates expected piece counts via
// forward-backward on the segmentation lattice. Returns total corpus
// log-likelihood.
double e_step(const std::vector<Sentence>& sentences,
              std::vector<Candidate>& cands,
              const std::unordered_map<std::string, size_t>& table,
              size_t max_len) {
  for (auto& c : cands) c.expected_count = 0.0;
  double total_ll = 0.0;
  for (const auto& s : sentences) {
    size_t n = s.chars.size();
    MatchTable matches = build_matches(s, table, max_len);
    std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (alpha[i] == kNegInf) continue;
      for (auto [len, ci] : matches[i]) {
        alpha[i + len] = log_add(alpha[i + len], alpha[i] + cands[ci].log_prob);
      }
    }
    beta[n] = 0.0;
    for (size_t i = n; i-- > 0;) {
      for (auto [len, ci] : matches[i]) {
        if (beta[i + len] == kNegInf) continue;
        beta[i] = log_add(beta[i], cands[ci].log_prob + beta[i + len]);
      }
    }
    double z = alpha[n];
    if (z == kNegInf) {
      throw validation_error("sentence not coverable by candidate set");
    }
    total_ll += z * static_cast<double>(s.freq);
    for (size_t i = 0; i < n; ++i) {
      if (alpha[i] == kNegInf) continue;
      for (auto [len, ci] : matches[i]) {
        if (beta[i + len] == kNegInf) continue;
        double post = std::exp(alpha[i] + cands[ci].log_prob + beta[i + len] - z);
        cands[ci].expected_count += post * static_cast<double>(s.freq);
      }
    }
  }
  return total_ll;
}

void m_step(std::vector<Candidate>& cands) {
  double total = 0.0;
  for (const auto& c : cands) total += std::max(c.expected_count, 1e-12);
  for (auto& c : cands) {
    c.log_prob = std::log(std::max(c.expected_count, 1e-12)) - std::log(total);
  }
}

// Cost of the best segmentation of `surface` over the current candidates
// with candidate `self` excluded. Single characters guarantee coverage.
double alternative_cost(const std::vector<std::string>& chars, size_t self,
                        const std::vector<Candidate>& cands,
                        const std::unordered_map<std::string, size_t>& table,
                        size_t max_len) {
  size_t n = chars.size();
  std::vector<double> best(n + 1, kNegInf);
  best[0] = 0.0;
  std::string window;
  for (size_t i = 0; i < n; ++i) {
    if (best[i] == kNegInf) continue;
    window.clear();
    for (size_t len = 1; len <= max_len && i + len <= n; ++len) {
      window += chars[i + len - 1];
      auto it = table.find(window);
      if (it == table.end() || it->second == self) continue;
      best[i + len] = std::max(best[i + len], best[i] + cands[it->second].log_prob);
    }
  }
  return best[n];
}

}  // namespace

TokenizerModel train_unigram(const std::vector<std::string>& corpus,
                             size_t target_vocab_size, double seed_multiplier,
                             const std::vector<std::string>& specials,
                             const TrainOptions& options) {
  if (seed_multiplier <= 1.0) {
    throw config_error("seed_multiplier must be > 1");
  }

  // Normalize and deduplicate sentences; sorted for deterministic EM order.
  std::map<std::string, uint64_t> sentence_freq;
  for (const auto& line : corpus) {
    std::string norm = normalize(line);
    if (!norm.empty()) ++sentence_freq[norm];
  }
  if (sentence_freq.empty()) {
    throw input_error("training corpus is empty");
  }
  std::vector<Sentence> sentences;
  sentences.reserve(sentence_freq.size());
  for (const auto& [text, freq] : sentence_freq) {
    sentences.push_back(Sentence{split_codepoints(text), freq});
  }

  // Character inventory and substring candidates.
  std::map<std::string, uint64_t> char_freq;
  std::map<std::string, uint64_t> substr_freq;
  const size_t max_len = std::max<size_t>(2, options.max_candidate_codepoints);
  for (const auto& s : sentences) {
    size_t n = s.chars.size();
    for (size_t i = 0; i < n; ++i) {
      char_freq[s.chars[i]] += s.freq;
      if (s.chars[i] == " ") continue;
      std::string window = s.chars[i];
      for (size_t len = 2; len <= max_len && i + len <= n; ++len) {
        if (s.chars[i + len - 1] == " ") break;
        window += s.chars[i + len - 1];
        substr_freq[window] += s.freq;
      }
    }
  }

  const size_t n_reserved = specials.size() + (options.byte_fallback ? 256 : 0);
  const size_t char_floor = n_reserved + char_freq.size();
  if (target_vocab_size < char_floor) {
    throw config_error("target_vocab_size " + std::to_string(target_vocab_size) +
                       " below character floor " + std::to_string(char_floor));
  }
  const size_t n_learned_target = target_vocab_size - n_reserved;
  const size_t n_multi_target = n_learned_target - char_freq.size();
  if (substr_freq.size() < n_multi_target) {
    throw config_error("target size unreachable: only " +
                       std::to_string(char_freq.size() + substr_freq.size()) +
                       " distinct candidate pieces available");
  }

  // Seed: all characters plus the top multi-char substrings by
  // frequency * length.
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(substr_freq.size());
  for (const auto& [sub, freq] : substr_freq) {
    ranked.emplace_back(static_cast<double>(freq) * count_codepoints(sub), sub);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  size_t seed_budget = static_cast<size_t>(seed_multiplier * target_vocab_size);
  size_t n_seed_multi = std::min(ranked.size(),
                                 std::max(n_multi_target,
                                          seed_budget > char_floor ? seed_budget - char_floor : 0));

  std::vector<Candidate> cands;
  double total_score = 0.0;
  for (const auto& [ch, freq] : char_freq) {
    cands.push_back(Candidate{ch, 0.0, true, 0.0});
    total_score += static_cast<double>(freq);
  }
  for (size_t i = 0; i < n_seed_multi; ++i) {
    cands.push_back(Candidate{ranked[i].second, 0.0, false, 0.0});
    total_score += ranked[i].first;
  }
  {
    size_t ci = 0;
    for (const auto& [ch, freq] : char_freq) {
      cands[ci++].log_prob = std::log(freq / total_score);
    }
    for (size_t i = 0; i < n_seed_multi; ++i) {
      cands[ci++].log_prob = std::log(ranked[i].first / total_score);
    }
  }

  auto rebuild_table = [&cands]() {
    std::unordered_map<std::string, size_t> table;
    table.reserve(cands.size() * 2);
    for (size_t i = 0; i < cands.size(); ++i) table.emplace(cands[i].surface, i);
    return table;
  };

  size_t cand_max_len = 1;
  for (const auto& c : cands) {
    cand_max_len = std::max(cand_max_len, count_codepoints(c.surface));
  }

  while (true) {
    auto table = rebuild_table();
    for (int it = 0; it < options.em_iterations_per_round; ++it) {
      e_step(sentences, cands, table, cand_max_len);
      m_step(cands);
    }
    if (cands.size() <= n_learned_target) break;

    // Prune the pieces whose removal increases corpus loss the least.
    std::vector<std::pair<double, size_t>> losses;
    size_t n_prunable = 0;
    for (size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].is_char) continue;
      ++n_prunable;
      double loss = 0.0;
      if (cands[i].expected_count > 1e-12) {
        double alt = alternative_cost(split_codepoints(cands[i].surface), i, cands,
                                      table, cand_max_len);
        loss = cands[i].expected_count * (cands[i].log_prob - alt);
      }
      losses.emplace_back(loss, i);
    }
    size_t excess = cands.size() - n_learned_target;
    size_t n_prune = std::min(excess, std::max<size_t>(1, static_cast<size_t>(
                                          options.prune_fraction * n_prunable)));
    std::sort(losses.begin(), losses.end(), [&cands](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return cands[a.second].surface > cands[b.second].surface;
    });
    std::vector<bool> drop(cands.size(), false);
    for (size_t k = 0; k < n_prune; ++k) drop[losses[k].second] = true;
    std::vector<Candidate> kept;
    kept.reserve(cands.size() - n_prune);
    for (size_t i = 0; i < cands.size(); ++i) {
      if (!drop[i]) kept.push_back(std::move(cands[i]));
    }
    cands = std::move(kept);
  }

  // Final piece order: by descending probability, lexicographic tie-break.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.surface < b.surface;
  });

  double min_lp = 0.0;
  for (const auto& c : cands) min_lp = std::min(min_lp, c.log_prob);

  std::vector<Piece> pieces;
  pieces.reserve(n_learned_target + (options.byte_fallback ? 256 : 0));
  if (options.byte_fallback) {
    for (int b = 0; b < 256; ++b) {
      pieces.push_back(Piece{byte_piece_surface(static_cast<uint8_t>(b)), min_lp - 10.0});
    }
  }
  for (auto& c : cands) {
    // strictly negative so specials (log_prob 0) stay distinguishable
    pieces.push_back(Piece{std::move(c.surface), std::min(c.log_prob, -1e-9)});
  }

  TokenizerModel model(specials, std::move(pieces));
  model.validate();
  if (model.size() != target_vocab_size) {
    throw validation_error("trained model size " + std::to_string(model.size()) +
                           " != target " + std::to_string(target_vocab_size));
  }
  return model;
}

}  // namespace vocabforge
