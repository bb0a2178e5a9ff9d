#pragma once

#include <string>

#include "vocabforge/config.hpp"
#include "vocabforge/tokenizer.hpp"
#include "vocabforge/vocab.hpp"

namespace vocabforge {

// Drops every model entry whose remap slot is -1, keeping surviving
// piece scores; companion to prune() so the pruned vocabulary stays
// segmentable.
TokenizerModel prune_model(const TokenizerModel& model,
                           const std::vector<int64_t>& remap);

std::vector<std::string> read_lines(const std::string& path);

// Executes the configured stages in order: train tokenizers, merge,
// extend embeddings, count usage, prune, build dataset, then evaluate
// and bench when configured. Artifacts land under pipeline.out_dir and
// a machine-readable run report records every stage's conservation
// counters. Returns the report JSON.
std::string run_pipeline(const Config& config);

}  // namespace vocabforge
