#include "vocabforge/dataset.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vocabforge/error.hpp"
#include "vocabforge/text.hpp"

namespace fs = std::filesystem;

namespace vocabforge {

bool CategoryGraph::is_target(const std::string& node) const {
  return std::find(targets.begin(), targets.end(), node) != targets.end();
}

GraphBuildResult build_graph(const std::vector<std::string>& edge_lines,
                             const std::vector<std::string>& targets,
                             const std::vector<EdgeEdit>& overrides) {
  if (targets.size() != 10) {
    throw validation_error("expected exactly 10 target categories, got " +
                           std::to_string(targets.size()));
  }
  {
    std::set<std::string> distinct(targets.begin(), targets.end());
    if (distinct.size() != targets.size()) {
      throw validation_error("target categories must be distinct");
    }
  }

  GraphBuildResult result;
  CategoryGraph& g = result.graph;
  g.targets = targets;
  g.overrides = overrides;
  for (const auto& t : targets) g.nodes.insert(t);

  size_t line_no = 0;
  for (const auto& line : edge_lines) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw parse_error("category dump line " + std::to_string(line_no) +
                        ": expected child<TAB>parent");
    }
    std::string child = line.substr(0, tab);
    std::string parent = line.substr(tab + 1);
    if (child == parent) {
      result.violations.push_back("self-loop edge dropped at line " +
                                  std::to_string(line_no) + ": " + child);
      continue;
    }
    g.nodes.insert(child);
    g.nodes.insert(parent);
    g.parent_edges[child].insert(parent);
  }

  // removals before additions
  for (const auto& e : overrides) {
    if (e.kind != EdgeEdit::Kind::Remove) continue;
    auto it = g.parent_edges.find(e.child);
    if (it != g.parent_edges.end()) it->second.erase(e.parent);
  }
  for (const auto& e : overrides) {
    if (e.kind != EdgeEdit::Kind::Add) continue;
    if (e.child == e.parent) {
      result.violations.push_back("override self-loop ignored: " + e.child);
      continue;
    }
    g.nodes.insert(e.child);
    g.nodes.insert(e.parent);
    g.parent_edges[e.child].insert(e.parent);
  }

  // no target may be a descendant of another target
  for (const auto& t : targets) {
    std::map<std::string, std::string> came_from;
    std::deque<std::string> queue{t};
    std::set<std::string> visited{t};
    while (!queue.empty()) {
      std::string node = queue.front();
      queue.pop_front();
      auto it = g.parent_edges.find(node);
      if (it == g.parent_edges.end()) continue;
      for (const auto& parent : it->second) {
        if (visited.count(parent)) continue;
        visited.insert(parent);
        came_from[parent] = node;
        if (g.is_target(parent)) {
          std::string path = parent;
          for (std::string cur = node; ; cur = came_from[cur]) {
            path = cur + " -> " + path;
            if (cur == t) break;
          }
          result.violations.push_back("target '" + t + "' is a descendant of target '" +
                                      parent + "' via " + path);
          continue;
        }
        queue.push_back(parent);
      }
    }
  }
  return result;
}

GraphBuildResult build_graph_from_file(const std::string& path,
                                       const std::vector<std::string>& targets,
                                       const std::vector<EdgeEdit>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open category dump: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  try {
    return build_graph(lines, targets, overrides);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::vector<EdgeEdit> load_overrides(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open overrides file: " + path);
  std::vector<EdgeEdit> edits;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string kind, child, parent;
    if (!std::getline(row, kind, '\t') || !std::getline(row, child, '\t') ||
        !std::getline(row, parent, '\t') || (kind != "add" && kind != "remove")) {
      throw parse_error(path + ": line " + std::to_string(line_no) +
                        ": expected add|remove<TAB>child<TAB>parent");
    }
    edits.push_back(EdgeEdit{
        kind == "add" ? EdgeEdit::Kind::Add : EdgeEdit::Kind::Remove, child, parent});
  }
  return edits;
}

namespace {

std::string unescape_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[i + 1];
      if (n == 't') { out.push_back('\t'); ++i; continue; }
      if (n == 'n') { out.push_back('\n'); ++i; continue; }
      if (n == '\\') { out.push_back('\\'); ++i; continue; }
    }
    out.push_back(s[i]);
  }
  return out;
}

}  // namespace

std::vector<RawPage> load_pages(const std::string& path, const std::string& language) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open page dump: " + path);
  std::vector<RawPage> pages;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        throw parse_error(path + ": line " + std::to_string(line_no) +
                          ": expected 4 tab-separated fields");
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    RawPage page;
    page.page_id = fields[0];
    page.title = fields[1];
    page.language = language;
    page.text = unescape_text(line.substr(start));
    std::istringstream cats(fields[2]);
    std::string cat;
    while (std::getline(cats, cat, ';')) {
      if (!cat.empty()) page.categories.push_back(cat);
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

std::optional<std::string> label_page(const RawPage& page, const CategoryGraph& graph,
                                      size_t depth_cap) {
  // sorted frontier keeps the result independent of category order
  std::set<std::string> frontier(page.categories.begin(), page.categories.end());
  std::set<std::string> visited = frontier;
  for (size_t depth = 0; depth <= depth_cap; ++depth) {
    if (frontier.empty()) break;
    for (const auto& target : graph.targets) {
      if (frontier.count(target)) return target;
    }
    std::set<std::string> next;
    for (const auto& node : frontier) {
      auto it = graph.parent_edges.find(node);
      if (it == graph.parent_edges.end()) continue;
      for (const auto& parent : it->second) {
        if (!visited.count(parent)) {
          visited.insert(parent);
          next.insert(parent);
        }
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

CleanResult clean_text(const std::string& text) {
  static const std::regex url_re(R"(^([A-Za-z][A-Za-z0-9+.-]*://\S*|www\.\S+)$)");
  static const std::regex path_re(R"(^/?([^/\s]+/)+[^/\s]+\.[A-Za-z0-9]{1,6}$)");

  std::istringstream in(text);
  std::string token;
  std::string kept;
  size_t dirty_chars = 0, total_chars = 0;
  while (in >> token) {
    total_chars += token.size();
    if (std::regex_match(token, url_re) || std::regex_match(token, path_re)) {
      dirty_chars += token.size();
      continue;
    }
    if (!kept.empty()) kept.push_back(' ');
    kept += token;
  }
  CleanResult result;
  if (total_chars > 0 && 2 * dirty_chars > total_chars) {
    result.rejected = true;
    return result;
  }
  result.text = std::move(kept);
  return result;
}

LengthDecision length_filter(const std::string& text, const TokenizerModel& tokenizer) {
  LengthDecision d;
  d.token_length = encode(tokenizer, text).token_ids.size();
  d.keep = d.token_length >= kMinTokens && d.token_length <= kMaxTokens;
  return d;
}

namespace {

uint64_t fnv1a(const std::string& s, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<LabeledDocument> downsample(const std::vector<LabeledDocument>& docs,
                                        const CellCaps& caps, uint64_t rng_seed) {
  std::map<std::pair<std::string, std::string>, std::vector<size_t>> cells;
  for (size_t i = 0; i < docs.size(); ++i) {
    cells[{docs[i].language, docs[i].label}].push_back(i);
  }
  std::vector<bool> keep(docs.size(), true);
  for (auto& [cell, indices] : cells) {
    auto it = caps.find(cell);
    if (it == caps.end() || indices.size() <= it->second) continue;
    // per-cell seed so survivors don't depend on other cells
    std::mt19937_64 rng(rng_seed ^ fnv1a(cell.first + "\x1f" + cell.second, 0x9E3779B9ull));
    std::vector<size_t> order(indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t k = it->second; k < order.size(); ++k) {
      keep[indices[order[k]]] = false;
    }
  }
  std::vector<LabeledDocument> out;
  out.reserve(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    if (keep[i]) out.push_back(docs[i]);
  }
  return out;
}

SplitResult split(const std::vector<LabeledDocument>& docs, const SplitRatios& ratios,
                  uint64_t rng_seed) {
  if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0) {
    throw validation_error("split ratios must be positive");
  }
  if (docs.size() < 3) {
    throw validation_error("cannot split fewer than 3 documents");
  }
  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  double sum = ratios.train + ratios.dev + ratios.test;
  size_t n = docs.size();
  size_t n_dev = static_cast<size_t>(n * ratios.dev / sum);
  size_t n_test = static_cast<size_t>(n * ratios.test / sum);
  size_t n_train = n - n_dev - n_test;  // remainder goes to train

  SplitResult result;
  for (size_t i = 0; i < n; ++i) {
    const LabeledDocument& d = docs[order[i]];
    if (i < n_train) result.train.push_back(d);
    else if (i < n_train + n_dev) result.dev.push_back(d);
    else result.test.push_back(d);
  }
  return result;
}

uint64_t DatasetManifest::total() const {
  uint64_t t = 0;
  for (const auto& [cell, n] : counts) t += n;
  return t;
}

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total();
  for (const auto& [cell, n] : counts) {
    j["counts"][cell.first][cell.second] = n;
  }
  for (const auto& [lang, by_split] : splits) {
    for (const auto& [name, n] : by_split) {
      j["splits"][lang][name] = n;
    }
  }
  return j.dump(2);
}

namespace {

void write_jsonl(const std::string& path, const std::vector<LabeledDocument>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open output file for writing: " + path);
  for (const auto& d : docs) {
    nlohmann::ordered_json j{{"text", d.text}, {"label", d.label}, {"lang", d.language}};
    out << j.dump() << "\n";
  }
  if (!out) throw io_error("failed writing output file: " + path);
}

}  // namespace

DatasetManifest emit_dataset(const std::vector<LabeledDocument>& docs,
                             const std::set<std::string>& split_languages,
                             const SplitRatios& ratios, uint64_t rng_seed,
                             const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());

  DatasetManifest manifest;
  std::map<std::string, std::vector<LabeledDocument>> by_lang;
  for (const auto& d : docs) {
    by_lang[d.language].push_back(d);
    ++manifest.counts[{d.language, d.label}];
  }
  for (const auto& [lang, lang_docs] : by_lang) {
    std::string base = (fs::path(out_dir) / lang).string();
    if (split_languages.count(lang)) {
      SplitResult s = split(lang_docs, ratios, rng_seed);
      write_jsonl(base + "_train.jsonl", s.train);
      write_jsonl(base + "_dev.jsonl", s.dev);
      write_jsonl(base + "_test.jsonl", s.test);
      manifest.splits[lang] = {{"train", s.train.size()},
                               {"dev", s.dev.size()},
                               {"test", s.test.size()}};
    } else {
      write_jsonl(base + "_test.jsonl", lang_docs);
      manifest.splits[lang] = {{"test", lang_docs.size()}};
    }
  }
  std::ofstream mout(fs::path(out_dir) / "manifest.json", std::ios::binary);
  if (!mout) throw io_error("cannot write manifest in " + out_dir);
  mout << manifest.to_json() << "\n";
  return manifest;
}

std::string BuildReport::to_text() const {
  std::ostringstream out;
  out << "input_pages            " << input_pages << "\n"
      << "unlabelable            " << unlabelable << "\n"
      << "rejected_cleaning      " << rejected_cleaning << "\n"
      << "rejected_length        " << rejected_length << "\n"
      << "removed_downsampling   " << removed_downsampling << "\n"
      << "emitted                " << emitted << "\n"
      << "conserved              " << (conserved() ? "yes" : "NO") << "\n";
  return out.str();
}

BuildOutput build_documents(const std::vector<RawPage>& pages,
                            const CategoryGraph& graph,
                            const TokenizerModel& tokenizer, const CellCaps& caps,
                            uint64_t rng_seed) {
  BuildOutput out;
  out.report.input_pages = pages.size();
  std::vector<LabeledDocument> labeled;
  for (const auto& page : pages) {
    auto label = label_page(page, graph);
    if (!label) {
      ++out.report.unlabelable;
      continue;
    }
    CleanResult cleaned = clean_text(page.text);
    if (cleaned.rejected) {
      ++out.report.rejected_cleaning;
      continue;
    }
    LengthDecision len = length_filter(cleaned.text, tokenizer);
    if (!len.keep) {
      ++out.report.rejected_length;
      continue;
    }
    labeled.push_back(LabeledDocument{normalize(cleaned.text), *label, page.language,
                                      len.token_length});
  }
  out.docs = downsample(labeled, caps, rng_seed);
  out.report.removed_downsampling = labeled.size() - out.docs.size();
  out.report.emitted = out.docs.size();
  return out;
}

}  // namespace vocabforge
