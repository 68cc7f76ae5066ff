#pragma once

// Reduced ordered multi-valued decision diagrams mapping component state
// vectors to system severity levels.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "afdi/state_model.hpp"

namespace afdi {

/// Per-state probabilities of one component. Sums to 1 within 1e-12.
class StateDistribution {
 public:
  static constexpr double kTolerance = 1e-12;

  StateDistribution() = default;
  /// Throws kInput on negative entries or a sum off by more than kTolerance.
  explicit StateDistribution(std::vector<double> probs);

  static StateDistribution uniform(std::size_t states);
  static StateDistribution one_hot(std::size_t states, std::size_t hot);

  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

struct MddComponent {
  std::string name;
  unsigned arity = 3;  // number of states, M_i + 1

  bool operator==(const MddComponent&) const = default;
};

class Mdd {
 public:
  static constexpr std::uint64_t kDefaultProductLimit = 531441;  // 3^12
  static constexpr std::uint32_t kSink = UINT32_MAX;

  struct NodeRef {
    std::uint32_t index = 0;
    bool operator==(const NodeRef&) const = default;
  };

  /// Internal node when component != kSink, otherwise a sink carrying level.
  struct Node {
    std::uint32_t component = kSink;
    std::vector<NodeRef> children;
    StateLevel level;

    bool is_sink() const { return component == kSink; }
    bool operator==(const Node&) const = default;
  };

  using StructureFunction = std::function<StateLevel(std::span<const StateLevel>)>;

  /// Shannon expansion over the declared component order with a unique-node
  /// table. Throws kCapacity when the product space exceeds `limit`.
  static Mdd build(std::vector<MddComponent> components, const StructureFunction& f,
                   std::uint64_t limit = kDefaultProductLimit);

  /// System severity = worst component severity, three states per component.
  static Mdd build_max_severity(std::span<const std::string> components);

  /// Explicit truth table: header row of component names plus a final
  /// system-level column, one row per state vector. Arities are inferred
  /// from the largest state seen per column; every vector must appear once.
  static Mdd from_table_csv(std::string_view csv_text);
  static Mdd from_table_file(const std::string& path);

  StateLevel evaluate(std::span<const StateLevel> states) const;
  StateLevel evaluate(const StateVector& states) const;

  /// P(system = m) under independent components, via one memoized pass.
  std::vector<double> level_probabilities(std::span<const StateDistribution> dists) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t internal_node_count() const;
  /// Highest sink level + 1.
  unsigned level_count() const;
  std::string to_dot() const;

  const std::vector<MddComponent>& components() const { return components_; }
  std::vector<std::string> component_names() const;
  const std::vector<Node>& nodes() const { return nodes_; }
  NodeRef root() const { return root_; }

  bool operator==(const Mdd&) const = default;

 private:
  std::vector<MddComponent> components_;
  std::vector<Node> nodes_;
  NodeRef root_;
};

}  // namespace afdi
