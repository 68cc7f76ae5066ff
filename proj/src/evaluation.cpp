#include "afdi/evaluation.hpp"

#include <json.hpp>
#include <random>

namespace afdi {

ConfusionMatrix ConfusionMatrix::from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  ConfusionMatrix m;
  m.tp_ = tp;
  m.fp_ = fp;
  m.fn_ = fn;
  m.tn_ = tn;
  return m;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::size_t negative_class)
    : classes_(classes), table_(classes * classes, 0) {
  if (classes < 2) fail(ErrorCode::kInvalidArgument, "confusion matrix needs at least two classes");
  if (negative_class >= classes) fail(ErrorCode::kInvalidArgument, "negative class out of range");
  for (std::size_t c = 0; c < classes; ++c) {
    if (c != negative_class) positive_.insert(c);
  }
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::set<std::size_t> positive_classes)
    : classes_(classes), positive_(std::move(positive_classes)), table_(classes * classes, 0) {
  if (classes < 2) fail(ErrorCode::kInvalidArgument, "confusion matrix needs at least two classes");
  for (auto c : positive_) {
    if (c >= classes) fail(ErrorCode::kInvalidArgument, "positive class out of range");
  }
}

void ConfusionMatrix::record(std::size_t predicted, std::size_t actual) {
  if (predicted >= classes_ || actual >= classes_) fail(ErrorCode::kInvalidArgument, "class index out of range");
  ++table_[predicted * classes_ + actual];
  const bool p = is_positive(predicted);
  const bool a = is_positive(actual);
  if (p && a) ++tp_;
  else if (p) ++fp_;
  else if (a) ++fn_;
  else ++tn_;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_ || other.positive_ != positive_) {
    fail(ErrorCode::kInvalidArgument, "cannot merge confusion matrices with different layouts");
  }
  for (std::size_t i = 0; i < table_.size(); ++i) table_[i] += other.table_[i];
  tp_ += other.tp_;
  fp_ += other.fp_;
  fn_ += other.fn_;
  tn_ += other.tn_;
}

namespace {

[[noreturn]] void undefined(const char* metric, const ConfusionMatrix& m) {
  fail(ErrorCode::kUndefinedMetric, std::string(metric) + " is undefined for TP=" + std::to_string(m.tp()) +
                                        " FP=" + std::to_string(m.fp()) + " FN=" + std::to_string(m.fn()) +
                                        " TN=" + std::to_string(m.tn()));
}

}  // namespace

double recall(const ConfusionMatrix& m) {
  if (m.tp() + m.fn() == 0) undefined("recall", m);
  return static_cast<double>(m.tp()) / static_cast<double>(m.tp() + m.fn());
}

double precision(const ConfusionMatrix& m) {
  if (m.tp() + m.fp() == 0) undefined("precision", m);
  return static_cast<double>(m.tp()) / static_cast<double>(m.tp() + m.fp());
}

double accuracy(const ConfusionMatrix& m) {
  if (m.total() == 0) undefined("accuracy", m);
  return static_cast<double>(m.tp() + m.tn()) / static_cast<double>(m.total());
}

double false_alarm_rate(const ConfusionMatrix& m) {
  if (m.tp() + m.fp() == 0) undefined("false_alarm_rate", m);
  // Same quantity as 1 - precision, but FP/(TP+FP) rounds once.
  return static_cast<double>(m.fp()) / static_cast<double>(m.tp() + m.fp());
}

double multiclass_accuracy(const ConfusionMatrix& m) {
  std::uint64_t total = 0;
  std::uint64_t diagonal = 0;
  for (std::size_t p = 0; p < m.class_count(); ++p) {
    for (std::size_t a = 0; a < m.class_count(); ++a) {
      total += m.cell(p, a);
      if (p == a) diagonal += m.cell(p, a);
    }
  }
  if (total == 0) undefined("multiclass_accuracy", m);
  return static_cast<double>(diagonal) / static_cast<double>(total);
}

HoldoutSplit holdout_split(std::span<const LabeledExample> examples, std::size_t train_count, std::uint64_t seed) {
  if (train_count > examples.size()) fail(ErrorCode::kInvalidArgument, "train split larger than the dataset");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // std::shuffle's draw sequence is implementation-defined; this one is not.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  HoldoutSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < train_count ? split.train : split.test).push_back(examples[order[i]]);
  }
  return split;
}

ConfusionMatrix score(const NbcModel& model, std::span<const LabeledExample> examples) {
  ConfusionMatrix m(model.schema().class_count());
  for (const auto& ex : examples) m.record(model.classify(ex.features), ex.label);
  return m;
}

std::string evaluation_report_json(const ConfusionMatrix& m, const AttributeSchema& schema,
                                   const std::string& model_sha256) {
  using ojson = nlohmann::ordered_json;
  auto metric = [&](double (*fn)(const ConfusionMatrix&)) -> ojson {
    try {
      return fn(m);
    } catch (const Error&) {
      return nullptr;
    }
  };
  ojson j;
  j["accuracy"] = metric(accuracy);
  j["recall"] = metric(recall);
  j["precision"] = metric(precision);
  j["false_alarm_rate"] = metric(false_alarm_rate);
  j["multiclass_accuracy"] = metric(multiclass_accuracy);
  j["counts"] = {{"tp", m.tp()}, {"fp", m.fp()}, {"fn", m.fn()}, {"tn", m.tn()}};
  j["dataset_size"] = m.total();
  j["classes"] = schema.classes();
  ojson table = ojson::array();
  for (std::size_t p = 0; p < m.class_count(); ++p) {
    ojson row = ojson::array();
    for (std::size_t a = 0; a < m.class_count(); ++a) row.push_back(m.cell(p, a));
    table.push_back(std::move(row));
  }
  j["table_predicted_by_actual"] = std::move(table);
  j["model_sha256"] = model_sha256;
  return j.dump(2) + "\n";
}

}  // namespace afdi
