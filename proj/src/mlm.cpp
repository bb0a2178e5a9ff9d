#include "vocabforge/mlm.hpp"

#include <cblas.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>

#include <nlohmann/json.hpp>

#include "vocabforge/error.hpp"

namespace vocabforge {

MaskedBatch mask_tokens(const std::vector<int32_t>& ids, double p, uint64_t rng_seed,
                        const std::set<int32_t>& special_ids, int32_t mask_id,
                        int32_t vocab_size) {
  if (p < 0.0 || p > 1.0) {
    throw input_error("masking probability must be in [0, 1]");
  }
  if (ids.size() > kMaxSeqLen) {
    throw input_error("sequence longer than " + std::to_string(kMaxSeqLen));
  }
  MaskedBatch batch;
  batch.input_ids = ids;
  batch.labels.assign(ids.size(), kLabelSentinel);
  batch.mask.assign(ids.size(), 0);

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int32_t> random_token(0, vocab_size - 1);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (special_ids.count(ids[i])) continue;
    if (uniform(rng) >= p) continue;
    batch.mask[i] = 1;
    batch.labels[i] = ids[i];
    double r = uniform(rng);
    if (r < 0.8) {
      batch.input_ids[i] = mask_id;
    } else if (r < 0.9) {
      batch.input_ids[i] = random_token(rng);
    }
    // else: keep the original token
  }
  return batch;
}

void BenchConfig::validate() const {
  if (V == 0 || D == 0 || layers == 0 || seq_len == 0 || batch == 0 || repeats == 0) {
    throw config_error("all bench shape parameters must be positive");
  }
  if (seq_len > kMaxSeqLen) {
    throw config_error("seq_len exceeds " + std::to_string(kMaxSeqLen));
  }
}

ToyModel ToyModel::random(uint64_t V, uint64_t D, uint64_t layers, uint64_t seed) {
  ToyModel m;
  m.V = V;
  m.D = D;
  m.layers = layers;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> emb_init(0.0f, std::sqrt(0.02f));
  std::normal_distribution<float> w_init(0.0f, 1.0f / std::sqrt(static_cast<float>(D)));
  m.embeddings.resize(V * D);
  for (auto& x : m.embeddings) x = emb_init(rng);
  m.body_w.resize(layers);
  m.body_b.resize(layers);
  for (uint64_t l = 0; l < layers; ++l) {
    m.body_w[l].resize(D * D);
    for (auto& x : m.body_w[l]) x = w_init(rng);
    m.body_b[l].assign(D, 0.01f);
  }
  m.out_bias.assign(V, 0.0f);
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

ForwardResult toy_forward(const ToyModel& model, const std::vector<int32_t>& ids,
                          bool keep_output) {
  const uint64_t M = ids.size();
  const uint64_t D = model.D;
  const uint64_t V = model.V;
  for (int32_t id : ids) {
    if (id < 0 || static_cast<uint64_t>(id) >= V) {
      throw input_error("token id out of range for toy forward: " + std::to_string(id));
    }
  }
  ForwardResult result;
  result.rows = M;
  if (M == 0) return result;

  auto t0 = Clock::now();
  std::vector<float> hidden(M * D);
  for (uint64_t i = 0; i < M; ++i) {
    std::memcpy(hidden.data() + i * D,
                model.embeddings.data() + static_cast<uint64_t>(ids[i]) * D, D * 4);
  }
  result.times.embedding = seconds_since(t0);

  t0 = Clock::now();
  std::vector<float> next(M * D);
  for (uint64_t l = 0; l < model.layers; ++l) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(M),
                static_cast<int>(D), static_cast<int>(D), 1.0f, hidden.data(),
                static_cast<int>(D), model.body_w[l].data(), static_cast<int>(D), 0.0f,
                next.data(), static_cast<int>(D));
    for (uint64_t i = 0; i < M; ++i) {
      float* row = next.data() + i * D;
      for (uint64_t j = 0; j < D; ++j) {
        row[j] = std::max(row[j] + model.body_b[l][j], 0.0f);
      }
    }
    std::swap(hidden, next);
  }
  result.times.body = seconds_since(t0);

  t0 = Clock::now();
  if (keep_output) result.log_probs.resize(M * V);
  // cap the scratch logits buffer at ~128 MB
  const uint64_t chunk_rows =
      std::clamp<uint64_t>((32ull << 20) / V, 1, M);
  std::vector<float> logits(chunk_rows * V);
  double checksum = 0.0;
  for (uint64_t r0 = 0; r0 < M; r0 += chunk_rows) {
    uint64_t rows = std::min<uint64_t>(chunk_rows, M - r0);
    // logits = H_chunk x E^T + bias  (projection tied to the embedding table)
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(rows),
                static_cast<int>(V), static_cast<int>(D), 1.0f,
                hidden.data() + r0 * D, static_cast<int>(D), model.embeddings.data(),
                static_cast<int>(D), 0.0f, logits.data(), static_cast<int>(V));
    for (uint64_t i = 0; i < rows; ++i) {
      float* row = logits.data() + i * V;
      float max_logit = row[0] + model.out_bias[0];
      for (uint64_t v = 0; v < V; ++v) {
        row[v] += model.out_bias[v];
        max_logit = std::max(max_logit, row[v]);
      }
      double sum = 0.0;
      for (uint64_t v = 0; v < V; ++v) sum += std::exp(static_cast<double>(row[v] - max_logit));
      float log_z = max_logit + static_cast<float>(std::log(sum));
      for (uint64_t v = 0; v < V; ++v) row[v] -= log_z;
      checksum += row[0];
      if (keep_output) {
        std::memcpy(result.log_probs.data() + (r0 + i) * V, row, V * 4);
      }
    }
  }
  result.times.projection = seconds_since(t0);
  result.checksum = checksum;
  return result;
}

ForwardResult toy_forward(const BenchConfig& config, const MaskedBatch& batch) {
  config.validate();
  ToyModel model = ToyModel::random(config.V, config.D, config.layers, config.rng_seed);
  return toy_forward(model, batch.input_ids);
}

namespace {

BenchStats bench_one(const BenchConfig& config) {
  ToyModel model = ToyModel::random(config.V, config.D, config.layers, config.rng_seed);
  std::mt19937_64 rng(config.rng_seed + 1);
  std::uniform_int_distribution<int32_t> pick(0, static_cast<int32_t>(config.V) - 1);
  std::vector<int32_t> ids(config.batch * config.seq_len);
  for (auto& id : ids) id = pick(rng);

  for (int w = 0; w < 2; ++w) {
    toy_forward(model, ids, /*keep_output=*/false);
  }
  std::vector<double> totals;
  ForwardTimes sums;
  for (uint64_t r = 0; r < config.repeats; ++r) {
    ForwardResult res = toy_forward(model, ids, /*keep_output=*/false);
    totals.push_back(res.times.total());
    sums.embedding += res.times.embedding;
    sums.body += res.times.body;
    sums.projection += res.times.projection;
  }
  BenchStats stats;
  double n = static_cast<double>(totals.size());
  for (double t : totals) stats.mean += t;
  stats.mean /= n;
  for (double t : totals) stats.stddev += (t - stats.mean) * (t - stats.mean);
  stats.stddev = totals.size() > 1 ? std::sqrt(stats.stddev / (n - 1)) : 0.0;
  std::sort(totals.begin(), totals.end());
  stats.median = totals.size() % 2 ? totals[totals.size() / 2]
                                   : 0.5 * (totals[totals.size() / 2 - 1] +
                                            totals[totals.size() / 2]);
  stats.component_means.embedding = sums.embedding / n;
  stats.component_means.body = sums.body / n;
  stats.component_means.projection = sums.projection / n;
  return stats;
}

}  // namespace

BenchReport run_bench(const BenchConfig& large, const BenchConfig& small) {
  large.validate();
  small.validate();
  if (large.repeats < 5 || small.repeats < 5) {
    throw config_error("bench needs at least 5 repeats");
  }
  if (large.D != small.D || large.layers != small.layers ||
      large.seq_len != small.seq_len || large.batch != small.batch) {
    throw config_error("bench configs must be identical except for V");
  }
  BenchReport report;
  report.large = bench_one(large);
  report.small = bench_one(small);
  report.reduction = 1.0 - report.small.median / report.large.median;
  double delta = report.large.component_means.embedding + report.large.component_means.body +
                 report.large.component_means.projection -
                 (report.small.component_means.embedding + report.small.component_means.body +
                  report.small.component_means.projection);
  double proj_delta =
      report.large.component_means.projection - report.small.component_means.projection;
  report.projection_delta_share = delta != 0.0 ? proj_delta / delta : 0.0;
  return report;
}

std::string BenchReport::to_json() const {
  auto stats_json = [](const BenchStats& s) {
    return nlohmann::ordered_json{
        {"mean_s", s.mean},
        {"stddev_s", s.stddev},
        {"median_s", s.median},
        {"components_s",
         {{"embedding", s.component_means.embedding},
          {"body", s.component_means.body},
          {"projection_logsoftmax", s.component_means.projection}}}};
  };
  nlohmann::ordered_json j;
  j["large"] = stats_json(large);
  j["small"] = stats_json(small);
  j["reduction"] = reduction;
  j["projection_delta_share"] = projection_delta_share;
  return j.dump(2);
}

}  // namespace vocabforge
