#pragma once

// Naive Bayes classifier over discretized attributes.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afdi/error.hpp"

namespace afdi {

struct Attribute {
  std::string name;
  unsigned cardinality = 2;

  bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;
  /// Throws kInvalidModel on cardinality < 2 or repeated names.
  AttributeSchema(std::vector<Attribute> attributes, std::vector<std::string> classes);

  static AttributeSchema from_json(std::string_view text);
  static AttributeSchema load(const std::string& path);
  std::string to_json() const;
  /// SHA-256 of the canonical JSON rendering.
  std::string content_hash() const;

  const std::vector<Attribute>& attributes() const { return attributes_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t class_count() const { return classes_.size(); }
  std::size_t attribute_count() const { return attributes_.size(); }
  /// Throws kLookup for unknown labels.
  std::size_t class_index(std::string_view label) const;

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
  std::vector<std::string> classes_;
};

/// Per-attribute value index; nullopt marks a missing reading.
using FeatureVector = std::vector<std::optional<unsigned>>;

struct LabeledExample {
  FeatureVector features;
  std::size_t label = 0;

  bool operator==(const LabeledExample&) const = default;
};

/// Throws kInput if the features do not conform to the schema.
void check_features(const AttributeSchema& schema, std::span<const std::optional<unsigned>> features);

class NbcModel {
 public:
  static constexpr double kDefaultAlpha = 1.0;

  /// Laplace/Lidstone estimates with pseudo-count alpha. Missing features are
  /// excluded from counts. Throws kTraining on an empty dataset.
  static NbcModel train(std::span<const LabeledExample> dataset, AttributeSchema schema,
                        double alpha = kDefaultAlpha);

  /// Builds a model from explicit tables; throws kInvalidModel when a table
  /// is mis-shaped or does not sum to 1 within 1e-12.
  static NbcModel from_tables(AttributeSchema schema, double alpha, std::vector<double> priors,
                              std::vector<std::vector<std::vector<double>>> cond);

  /// Normalized P(class | features) computed in log space with a max shift.
  /// A class with a zero factor gets exactly 0; if every class does,
  /// throws kZeroLikelihood.
  std::vector<double> posterior(std::span<const std::optional<unsigned>> features) const;

  /// Maximum a posteriori class, lowest index on ties.
  std::size_t classify(std::span<const std::optional<unsigned>> features) const;

  const AttributeSchema& schema() const { return schema_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& priors() const { return priors_; }
  /// cond()[attribute][class][value]
  const std::vector<std::vector<std::vector<double>>>& cond() const { return cond_; }

  /// (attribute, class, value) triples whose estimate is exactly zero.
  std::size_t zero_entry_count() const;

  std::string to_json() const;
  /// Verifies the stored schema hash and every table invariant.
  static NbcModel from_json(std::string_view text);
  static NbcModel load(const std::string& path);
  void save(const std::string& path) const;

 private:
  void check_invariants() const;

  AttributeSchema schema_;
  double alpha_ = kDefaultAlpha;
  std::vector<double> priors_;
  std::vector<std::vector<std::vector<double>>> cond_;
};

/// Training CSV: one integer column per attribute (empty = missing) and a
/// final label column holding a class name or index. A header row whose
/// last cell is "label" is skipped.
std::vector<LabeledExample> parse_training_csv(std::string_view text, const AttributeSchema& schema);
std::vector<LabeledExample> load_training_csv(const std::string& path, const AttributeSchema& schema);
std::string to_training_csv(std::span<const LabeledExample> examples, const AttributeSchema& schema);

}  // namespace afdi
