#include "vocabforge/vocab.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vocabforge/error.hpp"

namespace vocabforge {

std::string hash_hex(const VocabHash& h) {
  std::string out;
  out.reserve(64);
  char buf[3];
  for (uint8_t b : h) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> entries, size_t n_base)
    : entries_(std::move(entries)) {
  n_base_ = std::min(n_base, entries_.size());
  index_.reserve(entries_.size() * 2);
  for (size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] = index_.emplace(entries_[i], static_cast<uint32_t>(i));
    if (!inserted) {
      throw validation_error("duplicate vocabulary surface: " + entries_[i]);
    }
  }
}

std::optional<uint32_t> Vocabulary::id_of(const std::string& surface) const {
  auto it = index_.find(surface);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

VocabHash Vocabulary::prefix_hash(size_t prefix) const {
  prefix = std::min(prefix, entries_.size());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (size_t i = 0; i < prefix; ++i) {
    EVP_DigestUpdate(ctx, entries_[i].data(), entries_[i].size());
    EVP_DigestUpdate(ctx, "\n", 1);
  }
  VocabHash out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, out.data(), &len);
  EVP_MD_CTX_free(ctx);
  return out;
}

VocabHash Vocabulary::hash() const { return prefix_hash(entries_.size()); }

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open vocabulary file for writing: " + path);
  out << "VOCAB v1 " << entries_.size() << "\n";
  for (size_t i = 0; i < entries_.size(); ++i) {
    out << entries_[i] << "\t" << (i < n_base_ ? "base" : "ext") << "\n";
  }
  if (!out) throw io_error("failed writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open vocabulary file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty vocabulary file");
  std::istringstream header(line);
  std::string magic, version;
  size_t count = 0;
  header >> magic >> version >> count;
  if (magic != "VOCAB" || version != "v1" || header.fail()) {
    throw parse_error(path + ": bad vocabulary header");
  }
  std::vector<std::string> entries;
  entries.reserve(count);
  size_t n_base = 0;
  bool in_base = true;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw parse_error(path + ": truncated vocabulary, expected " +
                        std::to_string(count) + " entries");
    }
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw parse_error(path + ": line " + std::to_string(i + 2) + ": missing tab");
    }
    std::string mark = line.substr(tab + 1);
    if (mark != "base" && mark != "ext") {
      throw parse_error(path + ": line " + std::to_string(i + 2) +
                        ": unknown origin mark '" + mark + "'");
    }
    if (mark == "base") {
      if (!in_base) {
        throw parse_error(path + ": line " + std::to_string(i + 2) +
                          ": base entry after extension entries");
      }
      ++n_base;
    } else {
      in_base = false;
    }
    entries.push_back(line.substr(0, tab));
  }
  return Vocabulary(std::move(entries), n_base);
}

Vocabulary Vocabulary::from_model(const TokenizerModel& model) {
  std::vector<std::string> entries;
  entries.reserve(model.size());
  for (const auto& e : model.entries()) entries.push_back(e.surface);
  return Vocabulary(std::move(entries));
}

Vocabulary merge_vocabularies(const Vocabulary& base,
                              const std::vector<Vocabulary>& additions) {
  std::vector<std::string> entries = base.entries();
  std::unordered_map<std::string, bool> seen;
  seen.reserve(entries.size() * 2);
  for (const auto& s : entries) seen.emplace(s, true);
  for (const auto& add : additions) {
    std::vector<std::string> fresh;
    for (const auto& s : add.entries()) {
      if (!seen.count(s)) {
        seen.emplace(s, true);
        fresh.push_back(s);
      }
    }
    std::sort(fresh.begin(), fresh.end());
    for (auto& s : fresh) entries.push_back(std::move(s));
  }
  return Vocabulary(std::move(entries), base.size());
}

TokenizerModel merge_models(const TokenizerModel& base,
                            const std::vector<TokenizerModel>& additions) {
  std::vector<std::string> specials;
  std::vector<Piece> pieces;
  for (size_t i = 0; i < base.size(); ++i) {
    const auto& e = base.entry(static_cast<int32_t>(i));
    if (i < base.n_specials()) {
      specials.push_back(e.surface);
    } else {
      pieces.push_back(e);
    }
  }
  std::unordered_map<std::string, bool> seen;
  for (const auto& e : base.entries()) seen.emplace(e.surface, true);
  for (const auto& add : additions) {
    std::vector<Piece> fresh;
    for (size_t i = add.n_specials(); i < add.size(); ++i) {
      const auto& e = add.entry(static_cast<int32_t>(i));
      if (!seen.count(e.surface)) {
        seen.emplace(e.surface, true);
        fresh.push_back(e);
      }
    }
    std::sort(fresh.begin(), fresh.end(),
              [](const Piece& a, const Piece& b) { return a.surface < b.surface; });
    for (auto& p : fresh) pieces.push_back(std::move(p));
  }
  return TokenizerModel(std::move(specials), std::move(pieces),
                        base.normalization_rule());
}

void UsageCounts::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open usage file for writing: " + path);
  out << "USAGE v1 " << counts.size() << " " << hash_hex(vocab_hash) << " "
      << (corpus_id.empty() ? "-" : corpus_id) << "\n";
  for (uint64_t c : counts) out << c << "\n";
  if (!out) throw io_error("failed writing usage file: " + path);
}

UsageCounts UsageCounts::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open usage file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty usage file");
  std::istringstream header(line);
  std::string magic, version, hex, corpus_id;
  size_t count = 0;
  header >> magic >> version >> count >> hex >> corpus_id;
  if (magic != "USAGE" || version != "v1" || header.fail() || hex.size() != 64) {
    throw parse_error(path + ": bad usage header");
  }
  UsageCounts usage;
  usage.corpus_id = (corpus_id == "-") ? "" : corpus_id;
  for (size_t i = 0; i < 32; ++i) {
    usage.vocab_hash[i] =
        static_cast<uint8_t>(std::stoul(hex.substr(i * 2, 2), nullptr, 16));
  }
  usage.counts.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw parse_error(path + ": truncated usage file");
    usage.counts.push_back(std::stoull(line));
  }
  return usage;
}

UsageCounts count_usage(const TokenizerModel& model,
                        const std::vector<std::string>& corpus,
                        const std::string& corpus_id) {
  UsageCounts usage;
  usage.corpus_id = corpus_id;
  usage.vocab_hash = Vocabulary::from_model(model).hash();
  usage.counts.assign(model.size(), 0);
  for (const auto& line : corpus) {
    Segmentation seg = encode(model, line);
    for (int32_t id : seg.token_ids) {
      ++usage.counts[static_cast<size_t>(id)];
    }
  }
  for (size_t i = 0; i < model.n_specials(); ++i) {
    usage.counts[i] = std::max<uint64_t>(usage.counts[i], 1);
  }
  return usage;
}

}  // namespace vocabforge
