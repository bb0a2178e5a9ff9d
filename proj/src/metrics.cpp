#include "vocabforge/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vocabforge/error.hpp"

namespace vocabforge {

namespace {

std::vector<std::string> universe_of(const LabelSets& sets) {
  if (!sets.label_universe.empty()) return sets.label_universe;
  std::set<std::string> labels;
  labels.insert(sets.y_true.begin(), sets.y_true.end());
  labels.insert(sets.y_pred.begin(), sets.y_pred.end());
  return {labels.begin(), labels.end()};
}

void check_sets(const LabelSets& sets) {
  if (sets.y_true.empty()) {
    throw validation_error("empty label sets");
  }
  if (sets.y_true.size() != sets.y_pred.size()) {
    throw validation_error("y_true and y_pred length mismatch: " +
                           std::to_string(sets.y_true.size()) + " vs " +
                           std::to_string(sets.y_pred.size()));
  }
  if (!sets.label_universe.empty()) {
    std::set<std::string> universe(sets.label_universe.begin(),
                                   sets.label_universe.end());
    for (const auto& l : sets.y_true) {
      if (!universe.count(l)) throw validation_error("true label outside universe: " + l);
    }
    for (const auto& l : sets.y_pred) {
      if (!universe.count(l)) throw validation_error("predicted label outside universe: " + l);
    }
  }
}

}  // namespace

std::map<std::string, ClassScore> per_class_scores(const LabelSets& sets) {
  check_sets(sets);
  std::map<std::string, ClassScore> scores;
  std::map<std::string, uint64_t> tp, fp, fn;
  for (const auto& l : universe_of(sets)) scores[l] = ClassScore{};
  for (size_t i = 0; i < sets.y_true.size(); ++i) {
    const auto& t = sets.y_true[i];
    const auto& p = sets.y_pred[i];
    if (t == p) {
      ++tp[t];
    } else {
      ++fn[t];
      ++fp[p];
    }
  }
  for (auto& [label, s] : scores) {
    uint64_t tpc = tp[label], fpc = fp[label], fnc = fn[label];
    s.support = tpc + fnc;
    s.precision = (tpc + fpc) ? static_cast<double>(tpc) / (tpc + fpc) : 0.0;
    s.recall = (tpc + fnc) ? static_cast<double>(tpc) / (tpc + fnc) : 0.0;
    s.f1 = (s.precision + s.recall > 0.0)
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
  }
  return scores;
}

double weighted_f1(const LabelSets& sets) {
  auto scores = per_class_scores(sets);
  double total = 0.0, acc = 0.0;
  for (const auto& [label, s] : scores) {
    total += static_cast<double>(s.support);
    acc += static_cast<double>(s.support) * s.f1;
  }
  return total > 0.0 ? acc / total : 0.0;
}

double macro_f1(const LabelSets& sets) {
  auto scores = per_class_scores(sets);
  double acc = 0.0;
  for (const auto& [label, s] : scores) acc += s.f1;
  return scores.empty() ? 0.0 : acc / static_cast<double>(scores.size());
}

EvalReport evaluate_run(const std::map<std::string, std::string>& prediction_files,
                        MetricKind metric) {
  EvalReport report;
  if (prediction_files.empty()) {
    throw validation_error("no prediction files given");
  }
  for (const auto& [lang, path] : prediction_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open prediction file: " + path);
    LabelSets sets;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw validation_error(path + ": line " + std::to_string(line_no) +
                               ": expected true<TAB>pred");
      }
      sets.y_true.push_back(line.substr(0, tab));
      sets.y_pred.push_back(line.substr(tab + 1));
    }
    if (sets.y_true.empty()) {
      throw validation_error(path + ": no examples");
    }
    report.per_language[lang] =
        metric == MetricKind::Weighted ? weighted_f1(sets) : macro_f1(sets);
    report.per_class[lang] = per_class_scores(sets);
  }
  double sum = 0.0;
  for (const auto& [lang, score] : report.per_language) sum += score;
  report.average = sum / static_cast<double>(report.per_language.size());
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["average"] = average;
  for (const auto& [lang, score] : per_language) {
    j["per_language"][lang] = score;
  }
  for (const auto& [lang, classes] : per_class) {
    for (const auto& [label, s] : classes) {
      j["per_class"][lang][label] = {{"precision", s.precision},
                                     {"recall", s.recall},
                                     {"f1", s.f1},
                                     {"support", s.support}};
    }
  }
  return j.dump(2);
}

}  // namespace vocabforge
