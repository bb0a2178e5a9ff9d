#pragma once

#include <map>
#include <string>
#include <vector>

namespace vocabforge {

struct LabelSets {
  std::vector<std::string> y_true;
  std::vector<std::string> y_pred;
  std::vector<std::string> label_universe;  // ordered; inferred when empty
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  uint64_t support = 0;  // true-label instance count
};

std::map<std::string, ClassScore> per_class_scores(const LabelSets& sets);

// Per-class F1 averaged with true-label support weights. Zero-support
// classes contribute zero weight; zero-division resolves to 0.
double weighted_f1(const LabelSets& sets);

// Unweighted mean of per-class F1 over the label universe.
double macro_f1(const LabelSets& sets);

struct EvalReport {
  std::map<std::string, double> per_language;
  double average = 0.0;
  std::map<std::string, std::map<std::string, ClassScore>> per_class;

  std::string to_json() const;
};

enum class MetricKind { Weighted, Macro };

// Reads one TSV prediction file (true<TAB>pred per line) per language
// and aggregates the per-language metric plus the cross-language mean.
EvalReport evaluate_run(const std::map<std::string, std::string>& prediction_files,
                        MetricKind metric = MetricKind::Weighted);

}  // namespace vocabforge
