#include "afdi/nbc.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <set>

#include "afdi/io.hpp"

namespace afdi {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kSumTolerance = 1e-12;

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes, std::vector<std::string> classes)
    : attributes_(std::move(attributes)), classes_(std::move(classes)) {
  std::set<std::string> seen;
  for (const auto& a : attributes_) {
    if (a.name.empty()) fail(ErrorCode::kInvalidModel, "attribute with empty name");
    if (a.cardinality < 2) fail(ErrorCode::kInvalidModel, "attribute '" + a.name + "' has cardinality < 2");
    if (!seen.insert(a.name).second) fail(ErrorCode::kInvalidModel, "duplicate attribute '" + a.name + "'");
  }
  if (classes_.size() < 2) fail(ErrorCode::kInvalidModel, "schema needs at least two classes");
  std::set<std::string> labels(classes_.begin(), classes_.end());
  if (labels.size() != classes_.size()) fail(ErrorCode::kInvalidModel, "duplicate class label");
}

AttributeSchema AttributeSchema::from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    std::vector<Attribute> attributes;
    for (const auto& a : j.at("attributes")) {
      attributes.push_back({a.at("name").get<std::string>(), a.at("cardinality").get<unsigned>()});
    }
    return AttributeSchema(std::move(attributes), j.at("classes").get<std::vector<std::string>>());
  } catch (const ojson::exception& e) {
    fail(ErrorCode::kInput, std::string("malformed attribute schema: ") + e.what());
  }
}

AttributeSchema AttributeSchema::load(const std::string& path) {
  try {
    return from_json(io::read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::string AttributeSchema::to_json() const {
  ojson j;
  j["attributes"] = ojson::array();
  for (const auto& a : attributes_) j["attributes"].push_back({{"name", a.name}, {"cardinality", a.cardinality}});
  j["classes"] = classes_;
  return j.dump();
}

std::string AttributeSchema::content_hash() const { return io::sha256_hex(to_json()); }

std::size_t AttributeSchema::class_index(std::string_view label) const {
  const auto it = std::find(classes_.begin(), classes_.end(), label);
  if (it == classes_.end()) fail(ErrorCode::kLookup, "unknown class label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - classes_.begin());
}

void check_features(const AttributeSchema& schema, std::span<const std::optional<unsigned>> features) {
  if (features.size() != schema.attribute_count()) {
    fail(ErrorCode::kInput, "expected " + std::to_string(schema.attribute_count()) + " features, got " +
                                std::to_string(features.size()));
  }
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j] && *features[j] >= schema.attributes()[j].cardinality) {
      fail(ErrorCode::kInput, "value " + std::to_string(*features[j]) + " out of range for attribute '" +
                                  schema.attributes()[j].name + "'");
    }
  }
}

NbcModel NbcModel::train(std::span<const LabeledExample> dataset, AttributeSchema schema, double alpha) {
  if (dataset.empty()) fail(ErrorCode::kTraining, "training set is empty");
  if (!std::isfinite(alpha) || alpha < 0.0) fail(ErrorCode::kTraining, "alpha must be finite and >= 0");

  const std::size_t classes = schema.class_count();
  const auto& attrs = schema.attributes();
  std::vector<double> class_counts(classes, 0.0);
  // counts[j][c][v]
  std::vector<std::vector<std::vector<double>>> counts(attrs.size());
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    counts[j].assign(classes, std::vector<double>(attrs[j].cardinality, 0.0));
  }
  for (const auto& ex : dataset) {
    check_features(schema, ex.features);
    if (ex.label >= classes) fail(ErrorCode::kTraining, "label index " + std::to_string(ex.label) + " out of range");
    class_counts[ex.label] += 1.0;
    for (std::size_t j = 0; j < attrs.size(); ++j) {
      if (ex.features[j]) counts[j][ex.label][*ex.features[j]] += 1.0;
    }
  }

  NbcModel model;
  model.alpha_ = alpha;
  const double n = static_cast<double>(dataset.size());
  model.priors_.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    model.priors_[c] = (class_counts[c] + alpha) / (n + alpha * static_cast<double>(classes));
  }
  model.cond_ = std::move(counts);
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    const double card = attrs[j].cardinality;
    for (auto& row : model.cond_[j]) {
      const double observed = sum_of(row);
      const double denom = observed + alpha * card;
      // A class that never observed attribute j carries no information about it.
      if (denom == 0.0) {
        std::fill(row.begin(), row.end(), 1.0 / card);
        continue;
      }
      for (auto& v : row) v = (v + alpha) / denom;
    }
  }
  model.schema_ = std::move(schema);
  model.check_invariants();
  return model;
}

NbcModel NbcModel::from_tables(AttributeSchema schema, double alpha, std::vector<double> priors,
                               std::vector<std::vector<std::vector<double>>> cond) {
  NbcModel model;
  model.schema_ = std::move(schema);
  model.alpha_ = alpha;
  model.priors_ = std::move(priors);
  model.cond_ = std::move(cond);
  model.check_invariants();
  return model;
}

void NbcModel::check_invariants() const {
  const auto classes = schema_.class_count();
  if (priors_.size() != classes) fail(ErrorCode::kInvalidModel, "prior table has the wrong number of classes");
  auto check_row = [&](const std::vector<double>& row, const std::string& what) {
    for (double p : row) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) fail(ErrorCode::kInvalidModel, what + " has an entry outside [0, 1]");
      if (alpha_ > 0.0 && p == 0.0) fail(ErrorCode::kInvalidModel, what + " has a zero entry despite alpha > 0");
    }
    if (std::abs(sum_of(row) - 1.0) > kSumTolerance) fail(ErrorCode::kInvalidModel, what + " does not sum to 1");
  };
  check_row(priors_, "prior table");
  const auto& attrs = schema_.attributes();
  if (cond_.size() != attrs.size()) fail(ErrorCode::kInvalidModel, "conditional tables do not match the attributes");
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    if (cond_[j].size() != classes) fail(ErrorCode::kInvalidModel, "table of '" + attrs[j].name + "' has the wrong class count");
    for (std::size_t c = 0; c < classes; ++c) {
      if (cond_[j][c].size() != attrs[j].cardinality) {
        fail(ErrorCode::kInvalidModel, "table of '" + attrs[j].name + "' has the wrong cardinality");
      }
      check_row(cond_[j][c], "P(" + attrs[j].name + " | " + schema_.classes()[c] + ")");
    }
  }
}

std::vector<double> NbcModel::posterior(std::span<const std::optional<unsigned>> features) const {
  check_features(schema_, features);
  const auto classes = schema_.class_count();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> score(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double s = priors_[c] > 0.0 ? std::log(priors_[c]) : kNegInf;
    for (std::size_t j = 0; j < features.size() && s != kNegInf; ++j) {
      if (!features[j]) continue;
      const double p = cond_[j][c][*features[j]];
      s = p > 0.0 ? s + std::log(p) : kNegInf;
    }
    score[c] = s;
  }
  const double top = *std::max_element(score.begin(), score.end());
  if (top == kNegInf) fail(ErrorCode::kZeroLikelihood, "every class has zero likelihood for these features");
  double total = 0.0;
  for (auto& s : score) {
    s = s == kNegInf ? 0.0 : std::exp(s - top);
    total += s;
  }
  for (auto& s : score) s /= total;
  return score;
}

std::size_t NbcModel::classify(std::span<const std::optional<unsigned>> features) const {
  const auto post = posterior(features);
  // max_element keeps the first maximum, i.e. the lowest class index.
  return static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin());
}

std::size_t NbcModel::zero_entry_count() const {
  std::size_t zeros = 0;
  for (const auto& attr : cond_) {
    for (const auto& row : attr) zeros += static_cast<std::size_t>(std::count(row.begin(), row.end(), 0.0));
  }
  return zeros;
}

std::string NbcModel::to_json() const {
  ojson j;
  j["format"] = "afdi-nbc/1";
  j["schema"] = ojson::parse(schema_.to_json());
  j["schema_sha256"] = schema_.content_hash();
  j["alpha"] = alpha_;
  j["priors"] = priors_;
  j["cond"] = ojson::object();
  for (std::size_t a = 0; a < cond_.size(); ++a) j["cond"][schema_.attributes()[a].name] = cond_[a];
  return j.dump(2) + "\n";
}

NbcModel NbcModel::from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    auto schema = AttributeSchema::from_json(j.at("schema").dump());
    if (j.at("schema_sha256").get<std::string>() != schema.content_hash()) {
      fail(ErrorCode::kLoad, "schema hash mismatch: model file was altered or corrupted");
    }
    std::vector<std::vector<std::vector<double>>> cond;
    for (const auto& a : schema.attributes()) {
      cond.push_back(j.at("cond").at(a.name).get<std::vector<std::vector<double>>>());
    }
    return from_tables(std::move(schema), j.at("alpha").get<double>(), j.at("priors").get<std::vector<double>>(),
                       std::move(cond));
  } catch (const ojson::exception& e) {
    fail(ErrorCode::kLoad, std::string("malformed model document: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kLoad) throw;
    fail(ErrorCode::kLoad, e.what());
  }
}

NbcModel NbcModel::load(const std::string& path) {
  try {
    return from_json(io::read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

void NbcModel::save(const std::string& path) const { io::write_file(path, to_json()); }

std::vector<LabeledExample> parse_training_csv(std::string_view text, const AttributeSchema& schema) {
  auto rows = io::parse_csv(text);
  if (!rows.empty() && !rows.front().empty() && rows.front().back() == "label") rows.erase(rows.begin());
  const std::size_t width = schema.attribute_count() + 1;
  std::vector<LabeledExample> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "data row " + std::to_string(r + 1);
    if (row.size() != width) {
      fail(ErrorCode::kInput, where + " has " + std::to_string(row.size()) + " cells, expected " + std::to_string(width));
    }
    LabeledExample ex;
    ex.features.resize(schema.attribute_count());
    for (std::size_t j = 0; j < schema.attribute_count(); ++j) {
      if (row[j].empty()) continue;
      try {
        std::size_t used = 0;
        const long v = std::stol(row[j], &used);
        if (used != row[j].size() || v < 0) throw std::invalid_argument(row[j]);
        ex.features[j] = static_cast<unsigned>(v);
      } catch (const std::exception&) {
        fail(ErrorCode::kInput, where + ": '" + row[j] + "' is not a value index");
      }
    }
    const auto& label = row.back();
    const bool numeric = !label.empty() && std::all_of(label.begin(), label.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
    ex.label = numeric ? static_cast<std::size_t>(std::stoul(label)) : schema.class_index(label);
    if (ex.label >= schema.class_count()) fail(ErrorCode::kInput, where + ": label index out of range");
    check_features(schema, ex.features);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> load_training_csv(const std::string& path, const AttributeSchema& schema) {
  try {
    return parse_training_csv(io::read_file(path), schema);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::string to_training_csv(std::span<const LabeledExample> examples, const AttributeSchema& schema) {
  std::string out;
  for (const auto& a : schema.attributes()) out += a.name + ",";
  out += "label\n";
  for (const auto& ex : examples) {
    for (const auto& f : ex.features) {
      if (f) out += std::to_string(*f);
      out += ",";
    }
    out += schema.classes()[ex.label] + "\n";
  }
  return out;
}

}  // namespace afdi
