#include "vocabforge/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vocabforge/dataset.hpp"
#include "vocabforge/embedding.hpp"
#include "vocabforge/error.hpp"
#include "vocabforge/metrics.hpp"
#include "vocabforge/mlm.hpp"

namespace fs = std::filesystem;

namespace vocabforge {

TokenizerModel prune_model(const TokenizerModel& model,
                           const std::vector<int64_t>& remap) {
  if (remap.size() != model.size()) {
    throw binding_error("remap size does not match model size");
  }
  std::vector<std::string> specials;
  std::vector<Piece> pieces;
  for (size_t i = 0; i < model.size(); ++i) {
    if (remap[i] < 0) continue;
    if (i < model.n_specials()) {
      specials.push_back(model.entry(static_cast<int32_t>(i)).surface);
    } else {
      pieces.push_back(model.entry(static_cast<int32_t>(i)));
    }
  }
  return TokenizerModel(std::move(specials), std::move(pieces),
                        model.normalization_rule());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

namespace {

InitInterp interp_from(const Config& cfg, const std::string& key) {
  std::string v = cfg.get_string(key, "variance");
  if (v == "variance") return InitInterp::Variance;
  if (v == "stddev") return InitInterp::Stddev;
  throw config_error(key + " must be 'variance' or 'stddev', got '" + v + "'");
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw validation_error(what + " does not exist: " + path);
  }
}

CellCaps parse_caps(const Config& cfg) {
  // dataset.caps = lang/label=cap, comma separated
  CellCaps caps;
  for (const auto& item : cfg.get_list("dataset.caps")) {
    size_t slash = item.find('/');
    size_t eq = item.find('=', slash == std::string::npos ? 0 : slash);
    if (slash == std::string::npos || eq == std::string::npos || eq < slash) {
      throw config_error("dataset.caps entry must be lang/label=cap: " + item);
    }
    caps[{item.substr(0, slash), item.substr(slash + 1, eq - slash - 1)}] =
        static_cast<size_t>(std::stoull(item.substr(eq + 1)));
  }
  return caps;
}

// Upfront validation so a bad config fails before any stage runs.
void validate_config(const Config& cfg) {
  if (cfg.has("base.model")) {
    require_file(cfg.get_string("base.model"), "base.model");
  } else {
    require_file(cfg.get_string("base.corpus"), "base.corpus");
    cfg.get_int("base.vocab_size");
    cfg.get_seed("base.tokenizer_seed");
  }
  if (cfg.has("base.embedding")) {
    require_file(cfg.get_string("base.embedding"), "base.embedding");
  } else {
    cfg.get_int("base.embedding_dim");
    cfg.get_seed("base.embedding_seed");
  }
  for (const auto& lang : cfg.get_list("extensions.languages")) {
    require_file(cfg.get_string("extension." + lang + ".corpus"),
                 "extension." + lang + ".corpus");
    cfg.get_int("extension." + lang + ".vocab_size");
    cfg.get_seed("extension." + lang + ".seed");
  }
  cfg.get_seed("surgery.extend_seed");
  require_file(cfg.get_string("surgery.usage_corpus"), "surgery.usage_corpus");
  if (cfg.get_bool("dataset.enabled", false)) {
    cfg.get_seed("dataset.seed");
    std::string pages_dir = cfg.get_string("dataset.pages_dir");
    std::string cats_dir = cfg.get_string("dataset.categories_dir");
    for (const auto& lang : cfg.get_list("dataset.languages")) {
      require_file((fs::path(pages_dir) / (lang + ".tsv")).string(),
                   "page dump for " + lang);
      require_file((fs::path(cats_dir) / (lang + ".tsv")).string(),
                   "category dump for " + lang);
    }
    if (cfg.has("dataset.overrides")) {
      require_file(cfg.get_string("dataset.overrides"), "dataset.overrides");
    }
  }
  if (cfg.has("evaluate.pred_dir")) {
    require_file(cfg.get_string("evaluate.pred_dir"), "evaluate.pred_dir");
  }
  if (cfg.get_bool("bench.enabled", false)) {
    cfg.get_seed("bench.seed");
  }
  cfg.get_string("pipeline.out_dir");
}

}  // namespace

std::string run_pipeline(const Config& cfg) {
  validate_config(cfg);
  const fs::path out_dir = cfg.get_string("pipeline.out_dir");
  fs::create_directories(out_dir);

  nlohmann::ordered_json report;
  report["status"] = "incomplete";
  std::string current_stage = "setup";
  auto flush_report = [&]() {
    std::ofstream out(out_dir / "run_report.json", std::ios::binary);
    out << report.dump(2) << "\n";
  };

  try {
    // --- tokenizers ---------------------------------------------------
    current_stage = "train-tokenizers";
    TokenizerModel base_model = [&]() {
      if (cfg.has("base.model")) {
        return TokenizerModel::load(cfg.get_string("base.model"));
      }
      TrainOptions opts;
      opts.rng_seed = cfg.get_seed("base.tokenizer_seed");
      auto model = train_unigram(read_lines(cfg.get_string("base.corpus")),
                                 static_cast<size_t>(cfg.get_int("base.vocab_size")),
                                 cfg.get_real("base.seed_multiplier", 10.0),
                                 default_specials(), opts);
      model.save((out_dir / "tok_base.model").string());
      return model;
    }();
    std::vector<TokenizerModel> additions;
    for (const auto& lang : cfg.get_list("extensions.languages")) {
      TrainOptions opts;
      opts.rng_seed = cfg.get_seed("extension." + lang + ".seed");
      auto model = train_unigram(
          read_lines(cfg.get_string("extension." + lang + ".corpus")),
          static_cast<size_t>(cfg.get_int("extension." + lang + ".vocab_size")),
          cfg.get_real("extension." + lang + ".seed_multiplier", 10.0),
          default_specials(), opts);
      model.save((out_dir / ("tok_" + lang + ".model")).string());
      additions.push_back(std::move(model));
      report["stages"]["train-tokenizers"]["vocab_sizes"][lang] = additions.back().size();
    }
    report["stages"]["train-tokenizers"]["base_size"] = base_model.size();

    // --- merge --------------------------------------------------------
    current_stage = "merge";
    TokenizerModel merged_model = merge_models(base_model, additions);
    merged_model.save((out_dir / "tok_merged.model").string());
    Vocabulary base_vocab = Vocabulary::from_model(base_model);
    std::vector<Vocabulary> addition_vocabs;
    for (const auto& m : additions) addition_vocabs.push_back(Vocabulary::from_model(m));
    Vocabulary merged_vocab = merge_vocabularies(base_vocab, addition_vocabs);
    merged_vocab.save((out_dir / "vocab_merged.vocab").string());
    {
      size_t addition_total = 0;
      for (const auto& v : addition_vocabs) addition_total += v.size();
      size_t overlap = base_vocab.size() + addition_total - merged_vocab.size();
      auto& s = report["stages"]["merge"];
      s["base"] = base_vocab.size();
      s["additions_total"] = addition_total;
      s["overlap_absorbed"] = overlap;
      s["merged"] = merged_vocab.size();
    }

    // --- extend embeddings -------------------------------------------
    current_stage = "extend-embeddings";
    InitInterp interp = interp_from(cfg, "surgery.init_interp");
    EmbeddingMatrix base_emb = [&]() {
      if (cfg.has("base.embedding")) {
        return EmbeddingMatrix::load(cfg.get_string("base.embedding"));
      }
      return random_embeddings(base_vocab,
                               static_cast<uint64_t>(cfg.get_int("base.embedding_dim")),
                               cfg.get_seed("base.embedding_seed"), interp);
    }();
    EmbeddingMatrix extended =
        extend_embeddings(base_emb, merged_vocab, cfg.get_seed("surgery.extend_seed"), interp);
    extended.save((out_dir / "emb_extended.emb").string());
    report["stages"]["extend-embeddings"]["rows"] = extended.V;
    report["stages"]["extend-embeddings"]["dim"] = extended.D;

    // --- count usage --------------------------------------------------
    current_stage = "count-usage";
    const std::string usage_corpus_path = cfg.get_string("surgery.usage_corpus");
    UsageCounts usage =
        count_usage(merged_model, read_lines(usage_corpus_path), usage_corpus_path);
    usage.save((out_dir / "usage.txt").string());
    {
      uint64_t used = 0;
      for (uint64_t c : usage.counts) used += c > 0 ? 1 : 0;
      report["stages"]["count-usage"]["tokens_used"] = used;
      report["stages"]["count-usage"]["tokens_unused"] = usage.counts.size() - used;
    }

    // --- prune --------------------------------------------------------
    current_stage = "prune";
    PruneResult pruned = prune(merged_vocab, extended, usage, merged_model.n_specials());
    pruned.vocab.save((out_dir / "vocab_pruned.vocab").string());
    pruned.matrix.save((out_dir / "emb_pruned.emb").string());
    {
      std::ofstream remap_out(out_dir / "remap.tsv", std::ios::binary);
      for (size_t i = 0; i < pruned.remap.size(); ++i) {
        remap_out << i << "\t" << pruned.remap[i] << "\n";
      }
    }
    TokenizerModel pruned_model = prune_model(merged_model, pruned.remap);
    pruned_model.save((out_dir / "tok_pruned.model").string());
    {
      auto& s = report["stages"]["prune"];
      s["merged"] = merged_vocab.size();
      s["discarded"] = pruned.n_removed;
      s["pruned"] = pruned.vocab.size();
      s["conserved"] = pruned.vocab.size() + pruned.n_removed == merged_vocab.size();
    }

    // --- dataset ------------------------------------------------------
    if (cfg.get_bool("dataset.enabled", false)) {
      current_stage = "build-dataset";
      std::vector<EdgeEdit> overrides;
      if (cfg.has("dataset.overrides")) {
        overrides = load_overrides(cfg.get_string("dataset.overrides"));
      }
      std::vector<std::string> targets = target_categories();
      const fs::path pages_dir = cfg.get_string("dataset.pages_dir");
      const fs::path cats_dir = cfg.get_string("dataset.categories_dir");
      BuildReport total_report;
      std::vector<LabeledDocument> labeled_all;
      CellCaps caps = parse_caps(cfg);
      for (const auto& lang : cfg.get_list("dataset.languages")) {
        GraphBuildResult gb = build_graph_from_file(
            (cats_dir / (lang + ".tsv")).string(), targets, overrides);
        if (!gb.violations.empty()) {
          std::string msg = "category graph for " + lang + " invalid:";
          for (const auto& v : gb.violations) msg += "\n  " + v;
          throw validation_error(msg);
        }
        report["stages"]["build-dataset"]["graphs"][lang] = gb.graph.nodes.size();
        auto lang_pages = load_pages((pages_dir / (lang + ".tsv")).string(), lang);
        // label/clean/filter per language; downsample globally below
        BuildOutput out =
            build_documents(lang_pages, gb.graph, pruned_model, {}, 0);
        total_report.input_pages += out.report.input_pages;
        total_report.unlabelable += out.report.unlabelable;
        total_report.rejected_cleaning += out.report.rejected_cleaning;
        total_report.rejected_length += out.report.rejected_length;
        for (auto& d : out.docs) labeled_all.push_back(std::move(d));
      }
      std::vector<LabeledDocument> sampled =
          downsample(labeled_all, caps, cfg.get_seed("dataset.seed"));
      total_report.removed_downsampling = labeled_all.size() - sampled.size();
      total_report.emitted = sampled.size();

      std::set<std::string> split_langs;
      for (const auto& l : cfg.get_list("dataset.split_languages")) split_langs.insert(l);
      SplitRatios ratios;
      ratios.train = cfg.get_real("dataset.ratio_train", 8);
      ratios.dev = cfg.get_real("dataset.ratio_dev", 1);
      ratios.test = cfg.get_real("dataset.ratio_test", 1);
      DatasetManifest manifest =
          emit_dataset(sampled, split_langs, ratios, cfg.get_seed("dataset.seed"),
                       (out_dir / "dataset").string());
      {
        std::ofstream rpt(out_dir / "dataset" / "build_report.txt", std::ios::binary);
        rpt << total_report.to_text();
      }
      auto& s = report["stages"]["build-dataset"];
      s["input_pages"] = total_report.input_pages;
      s["unlabelable"] = total_report.unlabelable;
      s["rejected_cleaning"] = total_report.rejected_cleaning;
      s["rejected_length"] = total_report.rejected_length;
      s["removed_downsampling"] = total_report.removed_downsampling;
      s["emitted"] = total_report.emitted;
      s["conserved"] = total_report.conserved();
      s["manifest_total"] = manifest.total();
    }

    // --- evaluate -----------------------------------------------------
    if (cfg.has("evaluate.pred_dir")) {
      current_stage = "evaluate";
      std::map<std::string, std::string> files;
      for (const auto& entry : fs::directory_iterator(cfg.get_string("evaluate.pred_dir"))) {
        if (entry.path().extension() == ".tsv") {
          files[entry.path().stem().string()] = entry.path().string();
        }
      }
      EvalReport eval = evaluate_run(files);
      std::ofstream out(out_dir / "eval_report.json", std::ios::binary);
      out << eval.to_json() << "\n";
      report["stages"]["evaluate"]["languages"] = eval.per_language.size();
      report["stages"]["evaluate"]["average"] = eval.average;
    }

    // --- bench --------------------------------------------------------
    if (cfg.get_bool("bench.enabled", false)) {
      current_stage = "bench";
      BenchConfig large, small;
      large.V = static_cast<uint64_t>(cfg.get_int("bench.v_large", 270000));
      small.V = static_cast<uint64_t>(cfg.get_int("bench.v_small", 135000));
      large.D = small.D = static_cast<uint64_t>(cfg.get_int("bench.d", 256));
      large.layers = small.layers = static_cast<uint64_t>(cfg.get_int("bench.layers", 4));
      large.seq_len = small.seq_len = static_cast<uint64_t>(cfg.get_int("bench.seq", 128));
      large.batch = small.batch = static_cast<uint64_t>(cfg.get_int("bench.batch", 8));
      large.repeats = small.repeats = static_cast<uint64_t>(cfg.get_int("bench.repeats", 9));
      large.rng_seed = small.rng_seed = cfg.get_seed("bench.seed");
      BenchReport bench = run_bench(large, small);
      std::ofstream out(out_dir / "bench.json", std::ios::binary);
      out << bench.to_json() << "\n";
      report["stages"]["bench"]["reduction"] = bench.reduction;
    }

    report["status"] = "complete";
    flush_report();
  } catch (const Error& e) {
    report["status"] = "failed";
    report["failed_stage"] = current_stage;
    report["error"] = e.what();
    flush_report();
    throw Error(e.kind(), "stage " + current_stage + ": " + e.what());
  }
  return report.dump(2);
}

}  // namespace vocabforge
