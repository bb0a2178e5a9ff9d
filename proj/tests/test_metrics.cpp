#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "vocabforge/error.hpp"
#include "vocabforge/metrics.hpp"

using namespace vocabforge;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

LabelSets make_sets(std::vector<std::string> t, std::vector<std::string> p) {
  LabelSets s;
  s.y_true = std::move(t);
  s.y_pred = std::move(p);
  return s;
}

}  // namespace

TEST_CASE("weighted F1 hand example: [A,A,B] vs [A,B,B] is exactly 2/3") {
  LabelSets s = make_sets({"A", "A", "B"}, {"A", "B", "B"});
  // A: P=1, R=1/2, F1=2/3, support 2; B: P=1/2, R=1, F1=2/3, support 1
  CHECK(weighted_f1(s) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  auto per = per_class_scores(s);
  CHECK(per.at("A").precision == doctest::Approx(1.0));
  CHECK(per.at("A").recall == doctest::Approx(0.5));
  CHECK(per.at("A").support == 2);
  CHECK(per.at("B").precision == doctest::Approx(0.5));
  CHECK(per.at("B").recall == doctest::Approx(1.0));
  CHECK(per.at("B").support == 1);
}

TEST_CASE("macro F1 averages over the universe including absent classes") {
  LabelSets s = make_sets({"A", "A", "A"}, {"A", "A", "A"});
  s.label_universe = {"A", "B", "C"};
  // A contributes F1=1, B and C contribute 0 -> 1/3
  CHECK(macro_f1(s) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // weighted is unaffected: zero-support classes get zero weight
  CHECK(weighted_f1(s) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("perfect and disjoint predictions hit the boundary values") {
  LabelSets perfect = make_sets({"x", "y", "z"}, {"x", "y", "z"});
  CHECK(weighted_f1(perfect) == doctest::Approx(1.0));
  CHECK(macro_f1(perfect) == doctest::Approx(1.0));
  LabelSets disjoint = make_sets({"x", "x"}, {"y", "y"});
  CHECK(weighted_f1(disjoint) == doctest::Approx(0.0));
  CHECK(macro_f1(disjoint) == doctest::Approx(0.0));
}

TEST_CASE("zero-division convention: empty precision or recall scores 0") {
  // class q is predicted but never true: precision defined, recall 0/0 -> 0
  LabelSets s = make_sets({"a", "a"}, {"q", "a"});
  auto per = per_class_scores(s);
  CHECK(per.at("q").f1 == 0.0);
  CHECK(per.at("q").support == 0);
}

TEST_CASE("random instances agree with the brute-force oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_pick(1, 40), k_pick(1, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = n_pick(rng), k = k_pick(rng);
    std::uniform_int_distribution<int> label_pick(0, k - 1);
    std::vector<std::string> yt, yp;
    for (int i = 0; i < n; ++i) {
      yt.push_back(std::string(1, static_cast<char>('a' + label_pick(rng))));
      yp.push_back(std::string(1, static_cast<char>('a' + label_pick(rng))));
    }
    auto oracle = oracles::brute_force_f1(yt, yp);
    LabelSets s = make_sets(yt, yp);
    double w = weighted_f1(s);
    double m = macro_f1(s);
    CHECK(std::abs(w - oracle.weighted) <= 1e-12);
    CHECK(std::abs(m - oracle.macro) <= 1e-12);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("scores are invariant under instance permutation") {
  std::vector<std::string> yt = {"a", "b", "a", "c", "b", "b", "a"};
  std::vector<std::string> yp = {"a", "a", "b", "c", "b", "c", "a"};
  double w0 = weighted_f1(make_sets(yt, yp));
  double m0 = macro_f1(make_sets(yt, yp));
  std::vector<size_t> order = {6, 2, 4, 0, 5, 1, 3};
  std::vector<std::string> pt, pp;
  for (size_t i : order) {
    pt.push_back(yt[i]);
    pp.push_back(yp[i]);
  }
  CHECK(weighted_f1(make_sets(pt, pp)) == doctest::Approx(w0).epsilon(1e-15));
  CHECK(macro_f1(make_sets(pt, pp)) == doctest::Approx(m0).epsilon(1e-15));
}

TEST_CASE("single-class data: both metrics collapse to that class F1") {
  LabelSets s = make_sets({"a", "a", "a"}, {"a", "a", "a"});
  CHECK(weighted_f1(s) == macro_f1(s));
}

TEST_CASE("validation errors: length mismatch, empty input, bad universe") {
  CHECK(kind_of([] { weighted_f1(make_sets({"a"}, {"a", "b"})); }) ==
        ErrorKind::Validation);
  CHECK(kind_of([] { weighted_f1(make_sets({}, {})); }) == ErrorKind::Validation);
  LabelSets s = make_sets({"a", "b"}, {"a", "b"});
  s.label_universe = {"a"};  // misses observed label b
  CHECK(kind_of([&] { macro_f1(s); }) == ErrorKind::Validation);
}

TEST_CASE("evaluate_run aggregates per-language files and averages") {
  auto dir = std::filesystem::temp_directory_path() / "vf_metrics_run";
  std::filesystem::create_directories(dir);
  {
    std::ofstream a(dir / "bo.tsv");
    a << "A\tA\nA\tB\nB\tB\n";
    std::ofstream b(dir / "ug.tsv");
    b << "x\tx\ny\ty\n";
  }
  EvalReport report = evaluate_run(
      {{"bo", (dir / "bo.tsv").string()}, {"ug", (dir / "ug.tsv").string()}});
  CHECK(report.per_language.at("bo") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(report.per_language.at("ug") == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(report.average == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-15));
  CHECK(report.per_class.at("bo").at("A").support == 2);
  CHECK(report.to_json().find("\"average\"") != std::string::npos);
}

TEST_CASE("evaluate_run error reporting names the file and line") {
  auto dir = std::filesystem::temp_directory_path() / "vf_metrics_bad";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "xx.tsv");
    f << "A\tA\nno-tab-here\n";
  }
  std::string path = (dir / "xx.tsv").string();
  try {
    evaluate_run({{"xx", path}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("xx.tsv") != std::string::npos);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK(kind_of([&] {
    evaluate_run({{"zz", (dir / "missing.tsv").string()}});
  }) == ErrorKind::Io);
}
