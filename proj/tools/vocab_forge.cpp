// vocab-forge: vocabulary adaptation and dataset construction toolkit.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "vocabforge/config.hpp"
#include "vocabforge/dataset.hpp"
#include "vocabforge/embedding.hpp"
#include "vocabforge/error.hpp"
#include "vocabforge/metrics.hpp"
#include "vocabforge/mlm.hpp"
#include "vocabforge/pipeline.hpp"
#include "vocabforge/tokenizer.hpp"
#include "vocabforge/vocab.hpp"

namespace fs = std::filesystem;
using namespace vocabforge;

namespace {

constexpr const char* kVersion = "vocab-forge 0.1.0";

int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::Io ? 2 : 1;
}

void cmd_train_tokenizer(CLI::App* app) {
  struct Opts {
    std::string corpus, out;
    size_t vocab_size = 0;
    uint64_t seed = 0;
    double seed_multiplier = 10.0;
    bool byte_fallback = false;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--corpus", opt->corpus, "training corpus, one line per sentence")
      ->required();
  app->add_option("--vocab-size", opt->vocab_size, "total entries, specials included")
      ->required();
  app->add_option("--seed", opt->seed, "RNG seed")->required();
  app->add_option("--out", opt->out, "model file to write")->required();
  app->add_option("--seed-multiplier", opt->seed_multiplier,
                  "candidate pool size as a multiple of the target");
  app->add_flag("--byte-fallback", opt->byte_fallback,
                "add byte pieces so unknown characters stay reversible");
  app->callback([opt]() {
    TrainOptions train_opts;
    train_opts.rng_seed = opt->seed;
    train_opts.byte_fallback = opt->byte_fallback;
    TokenizerModel model =
        train_unigram(read_lines(opt->corpus), opt->vocab_size, opt->seed_multiplier,
                      default_specials(), train_opts);
    model.save(opt->out);
    std::cout << "wrote " << opt->out << " (" << model.size() << " entries)\n";
  });
}

void cmd_merge_vocab(CLI::App* app) {
  struct Opts {
    std::string base, out_model, out_vocab;
    std::vector<std::string> additions;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--in", opt->base, "base tokenizer model")->required();
  app->add_option("--add", opt->additions, "tokenizer models to merge in")->required();
  app->add_option("--out", opt->out_model, "merged tokenizer model")->required();
  app->add_option("--out-vocab", opt->out_vocab, "merged vocabulary file");
  app->callback([opt]() {
    TokenizerModel base = TokenizerModel::load(opt->base);
    std::vector<TokenizerModel> additions;
    for (const auto& p : opt->additions) additions.push_back(TokenizerModel::load(p));
    TokenizerModel merged = merge_models(base, additions);
    merged.save(opt->out_model);
    Vocabulary base_vocab = Vocabulary::from_model(base);
    std::vector<Vocabulary> add_vocabs;
    for (const auto& m : additions) add_vocabs.push_back(Vocabulary::from_model(m));
    Vocabulary merged_vocab = merge_vocabularies(base_vocab, add_vocabs);
    if (!opt->out_vocab.empty()) merged_vocab.save(opt->out_vocab);
    std::cout << "merged " << base_vocab.size() << " + additions -> "
              << merged_vocab.size() << " entries\n";
  });
}

void cmd_extend_emb(CLI::App* app) {
  struct Opts {
    std::string emb, vocab, out, interp = "variance";
    uint64_t seed = 0;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--in", opt->emb, "embedding matrix bound to the base vocabulary")
      ->required();
  app->add_option("--vocab", opt->vocab, "extended vocabulary file")->required();
  app->add_option("--seed", opt->seed, "RNG seed for the new rows")->required();
  app->add_option("--out", opt->out, "extended embedding file")->required();
  app->add_option("--init-interp", opt->interp,
                  "read 'variance 0.02' literally or as stddev")
      ->check(CLI::IsMember({"variance", "stddev"}));
  app->callback([opt]() {
    EmbeddingMatrix emb = EmbeddingMatrix::load(opt->emb);
    Vocabulary vocab = Vocabulary::load(opt->vocab);
    InitInterp interp =
        opt->interp == "variance" ? InitInterp::Variance : InitInterp::Stddev;
    EmbeddingMatrix out = extend_embeddings(emb, vocab, opt->seed, interp);
    out.save(opt->out);
    std::cout << "extended " << emb.V << " -> " << out.V << " rows\n";
  });
}

void cmd_count_usage(CLI::App* app) {
  struct Opts {
    std::string model, corpus, out;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--in", opt->model, "tokenizer model")->required();
  app->add_option("--corpus", opt->corpus, "corpus to segment")->required();
  app->add_option("--out", opt->out, "usage count file")->required();
  app->callback([opt]() {
    TokenizerModel model = TokenizerModel::load(opt->model);
    UsageCounts usage = count_usage(model, read_lines(opt->corpus), opt->corpus);
    usage.save(opt->out);
    uint64_t used = 0;
    for (uint64_t c : usage.counts) used += c > 0 ? 1 : 0;
    std::cout << used << " of " << usage.counts.size() << " tokens used\n";
  });
}

void cmd_prune(CLI::App* app) {
  struct Opts {
    std::string vocab, emb, usage, model, out_vocab, out_emb, out_remap, out_model;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--vocab", opt->vocab, "vocabulary file")->required();
  app->add_option("--in", opt->emb, "embedding matrix")->required();
  app->add_option("--usage", opt->usage, "usage count file")->required();
  app->add_option("--model", opt->model, "tokenizer model to prune alongside");
  app->add_option("--out-vocab", opt->out_vocab)->required();
  app->add_option("--out", opt->out_emb, "pruned embedding file")->required();
  app->add_option("--out-remap", opt->out_remap, "old-id to new-id table");
  app->add_option("--out-model", opt->out_model, "pruned tokenizer model");
  app->callback([opt]() {
    Vocabulary vocab = Vocabulary::load(opt->vocab);
    EmbeddingMatrix emb = EmbeddingMatrix::load(opt->emb);
    UsageCounts usage = UsageCounts::load(opt->usage);
    size_t protected_prefix = 0;
    TokenizerModel model;
    if (!opt->model.empty()) {
      model = TokenizerModel::load(opt->model);
      protected_prefix = model.n_specials();
    }
    PruneResult result = prune(vocab, emb, usage, protected_prefix);
    result.vocab.save(opt->out_vocab);
    result.matrix.save(opt->out_emb);
    if (!opt->out_remap.empty()) {
      std::ofstream out(opt->out_remap, std::ios::binary);
      if (!out) throw io_error("cannot write remap file: " + opt->out_remap);
      for (size_t i = 0; i < result.remap.size(); ++i) {
        out << i << "\t" << result.remap[i] << "\n";
      }
    }
    if (!opt->model.empty() && !opt->out_model.empty()) {
      prune_model(model, result.remap).save(opt->out_model);
    }
    std::cout << vocab.size() << " entries, discarded " << result.n_removed << ", kept "
              << result.vocab.size() << "\n";
  });
}

void cmd_estimate_size(CLI::App* app) {
  struct Opts {
    uint64_t vocab_size = 0, dim = 768, layers = 12, heads = 12, bytes = 4;
    uint64_t baseline_vocab = 0;
    double ff_mult = 4.0;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--vocab-size", opt->vocab_size)->required();
  app->add_option("--dim", opt->dim, "hidden size");
  app->add_option("--layers", opt->layers);
  app->add_option("--heads", opt->heads);
  app->add_option("--ff-mult", opt->ff_mult, "feed-forward width multiplier");
  app->add_option("--bytes", opt->bytes, "bytes per parameter");
  app->add_option("--baseline-vocab-size", opt->baseline_vocab,
                  "also print the size ratio against this vocabulary size");
  app->callback([opt]() {
    uint64_t bytes = estimate_model_size(opt->vocab_size, opt->dim, opt->layers,
                                         opt->heads, opt->ff_mult, opt->bytes);
    std::cout << bytes << " bytes (" << bytes / (1024.0 * 1024.0) << " MiB)\n";
    if (opt->baseline_vocab > 0) {
      uint64_t base = estimate_model_size(opt->baseline_vocab, opt->dim, opt->layers,
                                          opt->heads, opt->ff_mult, opt->bytes);
      std::cout << "ratio vs V=" << opt->baseline_vocab << ": "
                << 100.0 * static_cast<double>(bytes) / static_cast<double>(base)
                << "%\n";
    }
  });
}

void cmd_build_dataset(CLI::App* app) {
  struct Opts {
    std::string pages, categories, config, out;
    uint64_t seed = 0;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--pages", opt->pages, "directory of <lang>.tsv page dumps")
      ->required();
  app->add_option("--categories", opt->categories,
                  "directory of <lang>.tsv category edge dumps")
      ->required();
  app->add_option("--config", opt->config, "dataset configuration file")->required();
  app->add_option("--seed", opt->seed, "RNG seed")->required();
  app->add_option("--out", opt->out, "output directory")->required();
  app->callback([opt]() {
    Config cfg = Config::load(opt->config);
    cfg.set("dataset.enabled", "true");
    cfg.set("dataset.pages_dir", opt->pages);
    cfg.set("dataset.categories_dir", opt->categories);
    cfg.set("dataset.seed", std::to_string(opt->seed));

    TokenizerModel tokenizer = TokenizerModel::load(cfg.get_string("dataset.tokenizer"));
    std::vector<EdgeEdit> overrides;
    if (cfg.has("dataset.overrides")) {
      overrides = load_overrides(cfg.get_string("dataset.overrides"));
    }
    std::vector<std::string> targets = target_categories();

    CellCaps caps;
    for (const auto& item : cfg.get_list("dataset.caps")) {
      size_t slash = item.find('/');
      size_t eq = item.find('=');
      if (slash == std::string::npos || eq == std::string::npos || eq < slash) {
        throw config_error("dataset.caps entry must be lang/label=cap: " + item);
      }
      caps[{item.substr(0, slash), item.substr(slash + 1, eq - slash - 1)}] =
          std::stoull(item.substr(eq + 1));
    }

    BuildReport total;
    std::vector<LabeledDocument> labeled;
    for (const auto& lang : cfg.get_list("dataset.languages")) {
      GraphBuildResult gb = build_graph_from_file(
          (fs::path(opt->categories) / (lang + ".tsv")).string(), targets, overrides);
      if (!gb.violations.empty()) {
        std::string msg = "category graph for " + lang + " invalid:";
        for (const auto& v : gb.violations) msg += "\n  " + v;
        throw validation_error(msg);
      }
      auto pages = load_pages((fs::path(opt->pages) / (lang + ".tsv")).string(), lang);
      BuildOutput out = build_documents(pages, gb.graph, tokenizer, {}, 0);
      total.input_pages += out.report.input_pages;
      total.unlabelable += out.report.unlabelable;
      total.rejected_cleaning += out.report.rejected_cleaning;
      total.rejected_length += out.report.rejected_length;
      for (auto& d : out.docs) labeled.push_back(std::move(d));
    }
    std::vector<LabeledDocument> sampled = downsample(labeled, caps, opt->seed);
    total.removed_downsampling = labeled.size() - sampled.size();
    total.emitted = sampled.size();

    std::set<std::string> split_langs;
    for (const auto& l : cfg.get_list("dataset.split_languages")) split_langs.insert(l);
    SplitRatios ratios;
    ratios.train = cfg.get_real("dataset.ratio_train", 8);
    ratios.dev = cfg.get_real("dataset.ratio_dev", 1);
    ratios.test = cfg.get_real("dataset.ratio_test", 1);
    emit_dataset(sampled, split_langs, ratios, opt->seed, opt->out);
    std::ofstream rpt(fs::path(opt->out) / "build_report.txt", std::ios::binary);
    rpt << total.to_text();
    std::cout << total.to_text();
    if (!total.conserved()) throw validation_error("conservation counters do not balance");
  });
}

void cmd_evaluate(CLI::App* app) {
  struct Opts {
    std::string pred_dir, out, metric = "weighted";
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--pred-dir", opt->pred_dir, "directory of <lang>.tsv prediction files")
      ->required();
  app->add_option("--metric", opt->metric)->check(CLI::IsMember({"weighted", "macro"}));
  app->add_option("--out", opt->out, "report JSON path")->required();
  app->callback([opt]() {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(opt->pred_dir)) {
      if (entry.path().extension() == ".tsv") {
        files[entry.path().stem().string()] = entry.path().string();
      }
    }
    EvalReport report = evaluate_run(
        files, opt->metric == "weighted" ? MetricKind::Weighted : MetricKind::Macro);
    std::ofstream out(opt->out, std::ios::binary);
    if (!out) throw io_error("cannot write report: " + opt->out);
    out << report.to_json() << "\n";
    std::cout << "average " << opt->metric << "-F1: " << report.average << "\n";
  });
}

void cmd_bench(CLI::App* app) {
  struct Opts {
    uint64_t v_large = 270000, v_small = 135000, d = 256, layers = 4, seq = 128,
             batch = 8, repeats = 9, seed = 0;
    std::string out;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--v-large", opt->v_large);
  app->add_option("--v-small", opt->v_small);
  app->add_option("--d", opt->d, "hidden size");
  app->add_option("--layers", opt->layers);
  app->add_option("--seq", opt->seq, "sequence length");
  app->add_option("--batch", opt->batch);
  app->add_option("--repeats", opt->repeats);
  app->add_option("--seed", opt->seed);
  app->add_option("--out", opt->out, "report JSON path")->required();
  app->callback([opt]() {
    BenchConfig large{opt->v_large, opt->d, opt->layers, opt->seq, opt->batch,
                      opt->repeats, opt->seed};
    BenchConfig small = large;
    small.V = opt->v_small;
    BenchReport report = run_bench(large, small);
    std::ofstream out(opt->out, std::ios::binary);
    if (!out) throw io_error("cannot write report: " + opt->out);
    out << report.to_json() << "\n";
    std::cout << "forward time reduction: " << 100.0 * report.reduction << "%\n";
  });
}

void cmd_pipeline(CLI::App* app) {
  struct Opts {
    std::string config, out_dir;
    std::vector<std::string> sets;
  };
  auto opt = std::make_shared<Opts>();
  app->add_option("--config", opt->config, "pipeline configuration file")->required();
  app->add_option("--out-dir", opt->out_dir, "override pipeline.out_dir");
  app->add_option("--set", opt->sets, "override a config key (section.key=value)");
  app->callback([opt]() {
    Config cfg = Config::load(opt->config);
    if (!opt->out_dir.empty()) cfg.set("pipeline.out_dir", opt->out_dir);
    for (const auto& kv : opt->sets) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw config_error("--set expects section.key=value, got: " + kv);
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    std::cout << run_pipeline(cfg) << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vocabulary adaptation and dataset construction toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  cmd_train_tokenizer(app.add_subcommand("train-tokenizer", "train a unigram tokenizer"));
  cmd_merge_vocab(app.add_subcommand("merge-vocab", "merge tokenizer vocabularies"));
  cmd_extend_emb(app.add_subcommand("extend-emb", "append Gaussian rows for new tokens"));
  cmd_count_usage(app.add_subcommand("count-usage", "count token occurrences over a corpus"));
  cmd_prune(app.add_subcommand("prune", "drop unused tokens and their rows"));
  cmd_estimate_size(app.add_subcommand("estimate-size", "transformer size estimate"));
  cmd_build_dataset(app.add_subcommand("build-dataset", "build a labeled dataset from dumps"));
  cmd_evaluate(app.add_subcommand("evaluate", "score prediction files"));
  cmd_bench(app.add_subcommand("bench", "forward-pass timing, large vs small vocabulary"));
  cmd_pipeline(app.add_subcommand("pipeline", "run the full pipeline from a config"));
  for (auto* sub : app.get_subcommands({})) {
    sub->set_version_flag("--version", kVersion);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help/--version exit 0; any flag misuse is a validation failure
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
