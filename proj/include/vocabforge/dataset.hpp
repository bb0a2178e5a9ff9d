#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vocabforge/tokenizer.hpp"

namespace vocabforge {

inline std::vector<std::string> target_categories() {
  return {"Art",       "Geography", "History",   "Nature",  "Science",
          "Personage", "Technology", "Education", "Economy", "Health"};
}

struct EdgeEdit {
  enum class Kind { Add, Remove };
  Kind kind;
  std::string child;
  std::string parent;
};

struct CategoryGraph {
  std::set<std::string> nodes;
  std::unordered_map<std::string, std::set<std::string>> parent_edges;  // child -> parents
  std::vector<std::string> targets;
  std::vector<EdgeEdit> overrides;

  bool is_target(const std::string& node) const;
};

struct GraphBuildResult {
  CategoryGraph graph;
  std::vector<std::string> violations;
};

// Parses `child<TAB>parent` edge lines, applies overrides (removals
// before additions) and validates that no target is a descendant of
// another target. Violations are returned; strict callers throw.
GraphBuildResult build_graph(const std::vector<std::string>& edge_lines,
                             const std::vector<std::string>& targets,
                             const std::vector<EdgeEdit>& overrides);

GraphBuildResult build_graph_from_file(const std::string& path,
                                       const std::vector<std::string>& targets,
                                       const std::vector<EdgeEdit>& overrides);

std::vector<EdgeEdit> load_overrides(const std::string& path);

struct RawPage {
  std::string page_id;
  std::string title;
  std::string text;
  std::vector<std::string> categories;
  std::string language;
};

// Simplified page dump: page_id<TAB>title<TAB>cat1;cat2<TAB>text with
// literal tabs/newlines escaped as \t and \n.
std::vector<RawPage> load_pages(const std::string& path, const std::string& language);

inline constexpr size_t kLabelDepthCap = 8;

// Upward BFS from the page's categories; minimal depth wins, ties break
// by target order. nullopt when no target is reachable within the cap.
std::optional<std::string> label_page(const RawPage& page, const CategoryGraph& graph,
                                      size_t depth_cap = kLabelDepthCap);

struct CleanResult {
  bool rejected = false;
  std::string text;
};

// Strips URL and path-like tokens; rejects documents whose URL/path
// mass exceeds 50% of the non-whitespace characters.
CleanResult clean_text(const std::string& text);

inline constexpr size_t kMinTokens = 20;
inline constexpr size_t kMaxTokens = 1024;

struct LengthDecision {
  bool keep = false;
  size_t token_length = 0;
};

LengthDecision length_filter(const std::string& text, const TokenizerModel& tokenizer);

struct LabeledDocument {
  std::string text;
  std::string label;
  std::string language;
  size_t token_length = 0;
};

// (language, label) -> max kept count; missing cells mean no cap.
using CellCaps = std::map<std::pair<std::string, std::string>, size_t>;

std::vector<LabeledDocument> downsample(const std::vector<LabeledDocument>& docs,
                                        const CellCaps& caps, uint64_t rng_seed);

struct SplitRatios {
  double train = 8, dev = 1, test = 1;
};

struct SplitResult {
  std::vector<LabeledDocument> train, dev, test;
};

SplitResult split(const std::vector<LabeledDocument>& docs, const SplitRatios& ratios,
                  uint64_t rng_seed);

struct DatasetManifest {
  std::map<std::pair<std::string, std::string>, uint64_t> counts;  // (lang, label)
  std::map<std::string, std::map<std::string, uint64_t>> splits;   // lang -> split -> n

  uint64_t total() const;
  std::string to_json() const;
};

// Writes one JSON-lines file per (language, split) under out_dir and
// the manifest alongside. Languages not in split_languages emit a
// single "test" file.
DatasetManifest emit_dataset(const std::vector<LabeledDocument>& docs,
                             const std::set<std::string>& split_languages,
                             const SplitRatios& ratios, uint64_t rng_seed,
                             const std::string& out_dir);

// Conservation counters for one dataset-builder run.
struct BuildReport {
  uint64_t input_pages = 0;
  uint64_t unlabelable = 0;
  uint64_t rejected_cleaning = 0;
  uint64_t rejected_length = 0;
  uint64_t removed_downsampling = 0;
  uint64_t emitted = 0;

  bool conserved() const {
    return input_pages == unlabelable + rejected_cleaning + rejected_length +
                              removed_downsampling + emitted;
  }
  std::string to_text() const;
};

struct BuildOutput {
  std::vector<LabeledDocument> docs;
  BuildReport report;
};

// Full per-language build: label, clean, length-filter, then a shared
// downsample across all languages.
BuildOutput build_documents(const std::vector<RawPage>& pages,
                            const CategoryGraph& graph,
                            const TokenizerModel& tokenizer, const CellCaps& caps,
                            uint64_t rng_seed);

}  // namespace vocabforge
