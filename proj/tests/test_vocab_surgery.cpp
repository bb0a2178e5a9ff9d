#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <functional>

#include "vocabforge/embedding.hpp"
#include "vocabforge/error.hpp"
#include "vocabforge/pipeline.hpp"
#include "vocabforge/vocab.hpp"

using namespace vocabforge;

namespace {

const std::vector<std::string> kFourSpecials = {"<unk>", "<pad>", "<s>", "</s>"};

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

Vocabulary make_vocab(std::vector<std::string> entries) {
  return Vocabulary(std::move(entries));
}

}  // namespace

TEST_CASE("merge: base ids preserved, overlap absorbed, additions sorted") {
  Vocabulary base = make_vocab({"a", "b"});
  Vocabulary merged = merge_vocabularies(base, {make_vocab({"b", "c"})});
  REQUIRE(merged.size() == 3);
  CHECK(*merged.id_of("a") == 0);
  CHECK(*merged.id_of("b") == 1);
  CHECK(*merged.id_of("c") == 2);
  CHECK(merged.is_base(1));
  CHECK_FALSE(merged.is_base(2));

  // lexicographic within each addition, addition order across additions
  Vocabulary two = merge_vocabularies(base, {make_vocab({"z", "m"}), make_vocab({"k"})});
  CHECK(two.entries() == std::vector<std::string>{"a", "b", "m", "z", "k"});
}

TEST_CASE("merge: idempotence and size arithmetic") {
  Vocabulary v = make_vocab({"x", "y", "z"});
  Vocabulary same = merge_vocabularies(v, {v});
  CHECK(same.entries() == v.entries());
  for (const auto& s : v.entries()) {
    CHECK(*same.id_of(s) == *v.id_of(s));
  }

  // |result| = |base| + |union of new surfaces|; the reported instance
  // (250,002 + 32,000 - 7,301 = 274,701) follows this same identity
  Vocabulary base = make_vocab({"a", "b", "c", "d"});
  Vocabulary merged =
      merge_vocabularies(base, {make_vocab({"c", "e"}), make_vocab({"e", "f"})});
  size_t overlap = 2;  // "c" and the duplicate "e"
  CHECK(merged.size() == base.size() + 4 - overlap);
  CHECK(250002 + 2 * 16000 - 7301 == 274701);
}

TEST_CASE("extend: base rows bit-identical, new rows freshly sampled") {
  Vocabulary base = make_vocab({"a", "b"});
  EmbeddingMatrix m = random_embeddings(base, 4, 123);
  Vocabulary extended_vocab = merge_vocabularies(base, {make_vocab({"c"})});
  EmbeddingMatrix out = extend_embeddings(m, extended_vocab, 9);
  REQUIRE(out.V == 3);
  REQUIRE(out.D == 4);
  CHECK(std::memcmp(out.row(0), m.row(0), 2 * 4 * sizeof(float)) == 0);
  bool any_nonzero = false;
  for (uint64_t j = 0; j < out.D; ++j) any_nonzero |= out.row(2)[j] != 0.0f;
  CHECK(any_nonzero);
}

TEST_CASE("extend: no new tokens is the identity") {
  Vocabulary base = make_vocab({"a", "b"});
  EmbeddingMatrix m = random_embeddings(base, 4, 123);
  EmbeddingMatrix out = extend_embeddings(m, base, 77);
  CHECK(out.data == m.data);
  CHECK(out.vocab_hash == m.vocab_hash);
}

TEST_CASE("extend: appended rows match the literal-variance Gaussian") {
  Vocabulary base = make_vocab({"a"});
  EmbeddingMatrix m = random_embeddings(base, 16, 1);
  std::vector<std::string> entries = {"a"};
  for (int i = 0; i < 10000; ++i) entries.push_back("tok" + std::to_string(i));
  EmbeddingMatrix out = extend_embeddings(m, make_vocab(std::move(entries)), 42);
  double sum = 0.0, sq = 0.0;
  size_t n = 10000 * 16;
  const float* fresh = out.data.data() + 16;
  for (size_t i = 0; i < n; ++i) {
    sum += fresh[i];
    sq += double(fresh[i]) * fresh[i];
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var > 0.018);
  CHECK(var < 0.022);
}

TEST_CASE("extend: stddev interpretation is exposed as an option") {
  Vocabulary base = make_vocab({"a"});
  EmbeddingMatrix m = random_embeddings(base, 16, 1, InitInterp::Stddev);
  std::vector<std::string> entries = {"a"};
  for (int i = 0; i < 2000; ++i) entries.push_back("tok" + std::to_string(i));
  EmbeddingMatrix out =
      extend_embeddings(m, make_vocab(std::move(entries)), 42, InitInterp::Stddev);
  double sq = 0.0;
  size_t n = 2000 * 16;
  for (size_t i = 0; i < n; ++i) {
    double v = out.data[16 + i];
    sq += v * v;
  }
  // stddev 0.02 -> variance 4e-4, far from the literal reading's 0.02
  CHECK(sq / n < 0.001);
}

TEST_CASE("extend: seeded determinism and binding error") {
  Vocabulary base = make_vocab({"a", "b"});
  EmbeddingMatrix m = random_embeddings(base, 8, 5);
  Vocabulary bigger = merge_vocabularies(base, {make_vocab({"c", "d"})});
  EmbeddingMatrix o1 = extend_embeddings(m, bigger, 31);
  EmbeddingMatrix o2 = extend_embeddings(m, bigger, 31);
  CHECK(o1.data == o2.data);

  Vocabulary unrelated = make_vocab({"x", "y", "z"});
  CHECK(kind_of([&] { extend_embeddings(m, unrelated, 31); }) == ErrorKind::Binding);
}

TEST_CASE("count_usage: aba over {a,b,c} plus specials") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}, {"b", -1.1}, {"c", -1.2}});
  UsageCounts usage = count_usage(model, {"aba"});
  CHECK(usage.counts[*model.id_of("a")] == 2);
  CHECK(usage.counts[*model.id_of("b")] == 1);
  CHECK(usage.counts[*model.id_of("c")] == 0);
  for (size_t i = 0; i < model.n_specials(); ++i) {
    CHECK(usage.counts[i] >= 1);
  }
}

TEST_CASE("count_usage: empty corpus marks only specials used") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}, {"b", -1.1}});
  UsageCounts usage = count_usage(model, {});
  for (size_t i = 0; i < model.n_specials(); ++i) CHECK(usage.counts[i] == 1);
  CHECK(usage.counts[*model.id_of("a")] == 0);
  CHECK(usage.counts[*model.id_of("b")] == 0);
}

TEST_CASE("count_usage: exhaustive corpus touches every piece") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}, {"b", -1.1}, {"c", -1.2}});
  UsageCounts usage = count_usage(model, {"abc", "cab"});
  for (uint64_t c : usage.counts) CHECK(c >= 1);
}

TEST_CASE("prune: drops zero-count tokens, keeps order and rows bit-exactly") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}, {"b", -1.1}, {"c", -1.2}});
  Vocabulary vocab = Vocabulary::from_model(model);
  EmbeddingMatrix m = random_embeddings(vocab, 4, 3);
  UsageCounts usage = count_usage(model, {"aba"});

  PruneResult result = prune(vocab, m, usage, model.n_specials());
  CHECK(result.n_removed == 1);
  CHECK(result.vocab.size() + result.n_removed == vocab.size());
  CHECK(result.vocab.id_of("a").has_value());
  CHECK(result.vocab.id_of("b").has_value());
  CHECK_FALSE(result.vocab.id_of("c").has_value());
  CHECK(*result.vocab.id_of("a") < *result.vocab.id_of("b"));
  // surviving rows are bit-identical copies
  for (size_t old_id = 0; old_id < vocab.size(); ++old_id) {
    int64_t new_id = result.remap[old_id];
    if (new_id < 0) continue;
    CHECK(std::memcmp(result.matrix.row(static_cast<uint64_t>(new_id)), m.row(old_id),
                      m.D * sizeof(float)) == 0);
  }
  CHECK(result.remap[*vocab.id_of("c")] == -1);
}

TEST_CASE("prune: all-positive usage is the identity") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}, {"b", -1.1}});
  Vocabulary vocab = Vocabulary::from_model(model);
  EmbeddingMatrix m = random_embeddings(vocab, 4, 3);
  UsageCounts usage = count_usage(model, {"ab", "ba"});
  PruneResult result = prune(vocab, m, usage, model.n_specials());
  CHECK(result.n_removed == 0);
  CHECK(result.vocab.entries() == vocab.entries());
  CHECK(result.matrix.data == m.data);
}

TEST_CASE("prune: binding mismatch raises") {
  TokenizerModel model(kFourSpecials, {{"a", -1.0}});
  Vocabulary vocab = Vocabulary::from_model(model);
  EmbeddingMatrix m = random_embeddings(vocab, 4, 3);
  UsageCounts usage = count_usage(model, {"a"});
  usage.vocab_hash[0] ^= 0xFF;
  CHECK(kind_of([&] { prune(vocab, m, usage, 4); }) == ErrorKind::Binding);
}

TEST_CASE("prune soundness: segmentation unchanged after dropping unused pieces") {
  std::vector<std::string> corpus = {"abcab", "cababc", "abcabc", "bcbcbc"};
  auto model = train_unigram(corpus, 16, 5.0, kFourSpecials);
  Vocabulary vocab = Vocabulary::from_model(model);
  EmbeddingMatrix m = random_embeddings(vocab, 4, 3);
  UsageCounts usage = count_usage(model, corpus);
  PruneResult result = prune(vocab, m, usage, model.n_specials());
  TokenizerModel pruned = prune_model(model, result.remap);
  for (const auto& line : corpus) {
    auto before = encode(model, line);
    auto after = encode(pruned, line);
    CHECK(before.surfaces == after.surfaces);
  }
}

TEST_CASE("estimate_model_size: the reported base-model instance") {
  uint64_t bytes = estimate_model_size(135359, 768, 12, 12, 4.0, 4);
  double mib = double(bytes) / (1024.0 * 1024.0);
  CHECK(mib > 728.0 * 0.9);
  CHECK(mib < 728.0 * 1.1);

  uint64_t baseline = estimate_model_size(250002, 768, 12, 12, 4.0, 4);
  double ratio = 100.0 * double(bytes) / double(baseline);
  CHECK(ratio > 63.0);
  CHECK(ratio < 73.0);
}

TEST_CASE("estimate_model_size: rejects non-positive shapes") {
  CHECK(kind_of([] { estimate_model_size(0, 768, 0, 12, 4.0, 4); }) == ErrorKind::Input);
}

TEST_CASE("embedding and vocabulary files round trip bit-exactly") {
  Vocabulary vocab = make_vocab({"alpha", "beta", "gamma"});
  EmbeddingMatrix m = random_embeddings(vocab, 6, 99);
  auto dir = std::filesystem::temp_directory_path();
  auto emb_path = (dir / "vf_surgery.emb").string();
  auto vocab_path = (dir / "vf_surgery.vocab").string();
  m.save(emb_path);
  vocab.save(vocab_path);
  EmbeddingMatrix m2 = EmbeddingMatrix::load(emb_path);
  CHECK(m2.V == m.V);
  CHECK(m2.D == m.D);
  CHECK(m2.vocab_hash == m.vocab_hash);
  CHECK(m2.data == m.data);
  Vocabulary v2 = Vocabulary::load(vocab_path);
  CHECK(v2.entries() == vocab.entries());
  CHECK(v2.n_base() == vocab.n_base());
  CHECK(v2.hash() == vocab.hash());
}
