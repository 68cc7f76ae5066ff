#pragma once

// Exact inference on small discrete Bayesian networks by bucket elimination.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afdi/mdd.hpp"

namespace afdi {

struct BnNode {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::size_t> parents;  // indices into the network's node list
};

/// Emitted when a CPT row was renormalized on load.
struct LoadWarning {
  std::string node;
  std::size_t row = 0;
  double stated_sum = 0.0;
  std::string message;
};

/// Observed node states keyed by node index.
using Evidence = std::map<std::size_t, std::size_t>;

/// Dense table over the product of the scope's states; the last scope
/// variable varies fastest.
class Factor {
 public:
  Factor() = default;
  Factor(std::vector<std::size_t> scope, std::vector<std::size_t> cards, std::vector<double> values);
  /// Constant factor with empty scope.
  static Factor scalar(double value);

  const std::vector<std::size_t>& scope() const { return scope_; }
  const std::vector<std::size_t>& cards() const { return cards_; }
  const std::vector<double>& values() const { return values_; }
  bool mentions(std::size_t var) const;

  Factor multiply(const Factor& other) const;
  Factor sum_out(std::size_t var) const;
  /// Fixes `var` to `state` and drops it from the scope.
  Factor reduce(std::size_t var, std::size_t state) const;

 private:
  std::vector<std::size_t> scope_;
  std::vector<std::size_t> cards_;
  std::vector<double> values_;
};

class DiscreteBayesNet {
 public:
  /// Column sums may deviate from 1 by at most this much before load fails.
  static constexpr double kMaxRowDeviation = 0.02;
  /// Deviations at or below this are treated as rounding and left alone.
  static constexpr double kSilentDeviation = 1e-9;

  /// cpts[i] holds one row per parent assignment (first parent slowest),
  /// each row a distribution over node i's states. Rows are checked and
  /// renormalized as in load().
  static DiscreteBayesNet create(std::vector<BnNode> nodes, std::vector<std::vector<std::vector<double>>> cpts);

  /// JSON document: {"nodes":[{"name","states","parents"}], "cpts":{name: [[...], ...]}}.
  static DiscreteBayesNet from_json(std::string_view text);
  static DiscreteBayesNet load(const std::string& path);

  const std::vector<BnNode>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Throws kLookup for unknown names.
  std::size_t index_of(std::string_view name) const;
  std::size_t state_index(std::size_t node, std::string_view state) const;
  const std::vector<std::vector<double>>& cpt(std::size_t node) const { return cpts_[node]; }
  const std::vector<LoadWarning>& warnings() const { return warnings_; }
  /// Parents before children.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  /// Product of CPT entries along a full assignment.
  double joint_probability(std::span<const std::size_t> assignment) const;

  /// P(query) by bucket elimination. `elimination_order`, if given, must
  /// cover every non-query node; the default is reverse topological order.
  StateDistribution marginal(std::size_t query,
                             std::optional<std::vector<std::size_t>> elimination_order = std::nullopt) const;
  StateDistribution marginal(std::string_view query) const;

  /// P(query | evidence). Throws kImpossibleEvidence if P(evidence) = 0.
  StateDistribution posterior_given_evidence(
      std::size_t query, const Evidence& evidence,
      std::optional<std::vector<std::size_t>> elimination_order = std::nullopt) const;

  /// Parses "NODE=STATE" strings (state by name or index).
  Evidence parse_evidence(std::span<const std::string> items) const;

 private:
  std::vector<BnNode> nodes_;
  std::vector<std::vector<std::vector<double>>> cpts_;
  std::vector<LoadWarning> warnings_;
  std::vector<std::size_t> topo_;
};

}  // namespace afdi
