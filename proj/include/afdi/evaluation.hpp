#pragma once

// Contingency-table bookkeeping and the four scoring measures used to judge
// diagnosis runs.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "afdi/nbc.hpp"

namespace afdi {

class ConfusionMatrix {
 public:
  /// Binary counters only (no class table).
  static ConfusionMatrix from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn);

  /// `classes` x `classes` table; positive = any class other than
  /// `negative_class` unless an explicit positive set is given.
  explicit ConfusionMatrix(std::size_t classes, std::size_t negative_class = 0);
  ConfusionMatrix(std::size_t classes, std::set<std::size_t> positive_classes);

  void record(std::size_t predicted, std::size_t actual);
  /// Cellwise sum; both sides must share the class layout and positive set.
  void merge(const ConfusionMatrix& other);

  std::uint64_t tp() const { return tp_; }
  std::uint64_t fp() const { return fp_; }
  std::uint64_t fn() const { return fn_; }
  std::uint64_t tn() const { return tn_; }
  std::uint64_t total() const { return tp_ + fp_ + fn_ + tn_; }
  std::size_t class_count() const { return classes_; }
  /// table()[predicted * class_count() + actual]
  const std::vector<std::uint64_t>& table() const { return table_; }
  std::uint64_t cell(std::size_t predicted, std::size_t actual) const { return table_[predicted * classes_ + actual]; }
  bool is_positive(std::size_t cls) const { return positive_.contains(cls); }

 private:
  ConfusionMatrix() = default;

  std::size_t classes_ = 0;
  std::set<std::size_t> positive_;
  std::vector<std::uint64_t> table_;
  std::uint64_t tp_ = 0, fp_ = 0, fn_ = 0, tn_ = 0;
};

// Each throws kUndefinedMetric naming the metric and counts when its
// denominator is zero.
double recall(const ConfusionMatrix& m);     // TP / (TP + FN)
double precision(const ConfusionMatrix& m);  // TP / (TP + FP)
double accuracy(const ConfusionMatrix& m);   // (TP + TN) / total
/// Share of raised alarms that were false: 1 - precision. This is not the
/// conventional false positive rate FP / (FP + TN).
double false_alarm_rate(const ConfusionMatrix& m);
/// Diagonal share of the class table.
double multiclass_accuracy(const ConfusionMatrix& m);

/// Deterministic Fisher-Yates shuffle (mt19937_64, fixed seed) followed by a
/// split into the first `train_count` and the rest.
struct HoldoutSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};
HoldoutSplit holdout_split(std::span<const LabeledExample> examples, std::size_t train_count, std::uint64_t seed);

/// Classifies every example and tallies predictions against labels.
ConfusionMatrix score(const NbcModel& model, std::span<const LabeledExample> examples);

/// JSON report with the four measures (null when undefined), raw counts,
/// class table, dataset size and model hash.
std::string evaluation_report_json(const ConfusionMatrix& m, const AttributeSchema& schema,
                                   const std::string& model_sha256);

}  // namespace afdi
