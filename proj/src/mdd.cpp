#include "afdi/mdd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "afdi/io.hpp"

namespace afdi {

StateDistribution::StateDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) fail(ErrorCode::kInput, "empty state distribution");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      fail(ErrorCode::kInput, "state probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "state distribution sums to " << sum << ", not 1";
    fail(ErrorCode::kInput, msg.str());
  }
}

StateDistribution StateDistribution::uniform(std::size_t states) {
  return StateDistribution(std::vector<double>(states, 1.0 / static_cast<double>(states)));
}

StateDistribution StateDistribution::one_hot(std::size_t states, std::size_t hot) {
  std::vector<double> p(states, 0.0);
  p.at(hot) = 1.0;
  return StateDistribution(std::move(p));
}

namespace {

struct NodeKey {
  std::uint32_t component;
  std::vector<std::uint32_t> children;

  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& key) const noexcept {
    std::size_t seed = std::hash<std::uint32_t>{}(key.component);
    for (auto c : key.children) seed ^= std::hash<std::uint32_t>{}(c) + 0x9e3779b9 + (seed << 6) + (seed >> 2);
    return seed;
  }
};

class Builder {
 public:
  Builder(const std::vector<MddComponent>& components, const Mdd::StructureFunction& f)
      : components_(components), f_(f), states_(components.size()) {}

  std::uint32_t expand(std::size_t depth) {
    if (depth == components_.size()) return sink(f_(states_));
    std::vector<std::uint32_t> children(components_[depth].arity);
    for (unsigned s = 0; s < components_[depth].arity; ++s) {
      states_[depth] = StateLevel{s};
      children[s] = expand(depth + 1);
    }
    return unique(static_cast<std::uint32_t>(depth), std::move(children));
  }

  std::vector<Mdd::Node> take_nodes() { return std::move(nodes_); }

 private:
  std::uint32_t sink(StateLevel level) {
    auto [it, inserted] = sinks_.try_emplace(level.value, 0);
    if (inserted) {
      it->second = static_cast<std::uint32_t>(nodes_.size());
      nodes_.push_back(Mdd::Node{Mdd::kSink, {}, level});
    }
    return it->second;
  }

  std::uint32_t unique(std::uint32_t component, std::vector<std::uint32_t> children) {
    if (std::all_of(children.begin(), children.end(), [&](auto c) { return c == children.front(); })) {
      return children.front();
    }
    NodeKey key{component, std::move(children)};
    if (auto it = table_.find(key); it != table_.end()) return it->second;
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    Mdd::Node node{component, {}, StateLevel{}};
    node.children.reserve(key.children.size());
    for (auto c : key.children) node.children.push_back(Mdd::NodeRef{c});
    nodes_.push_back(std::move(node));
    table_.emplace(std::move(key), index);
    return index;
  }

  const std::vector<MddComponent>& components_;
  const Mdd::StructureFunction& f_;
  std::vector<StateLevel> states_;
  std::vector<Mdd::Node> nodes_;
  std::map<unsigned, std::uint32_t> sinks_;
  std::unordered_map<NodeKey, std::uint32_t, NodeKeyHash> table_;
};

}  // namespace

Mdd Mdd::build(std::vector<MddComponent> components, const StructureFunction& f, std::uint64_t limit) {
  std::uint64_t product = 1;
  for (const auto& c : components) {
    if (c.name.empty()) fail(ErrorCode::kInvalidModel, "component with empty name");
    if (c.arity == 0) fail(ErrorCode::kInvalidModel, "component '" + c.name + "' has no states");
    if (std::count_if(components.begin(), components.end(), [&](const auto& o) { return o.name == c.name; }) > 1) {
      fail(ErrorCode::kInvalidModel, "duplicate component '" + c.name + "'");
    }
    product *= c.arity;
    if (product > limit) {
      fail(ErrorCode::kCapacity, "product space exceeds the limit of " + std::to_string(limit) + " state vectors");
    }
  }
  Builder builder(components, f);
  const auto root = builder.expand(0);
  Mdd mdd;
  mdd.components_ = std::move(components);
  mdd.nodes_ = builder.take_nodes();
  mdd.root_ = NodeRef{root};
  return mdd;
}

Mdd Mdd::build_max_severity(std::span<const std::string> components) {
  if (components.empty()) fail(ErrorCode::kInvalidModel, "severity model needs at least one component");
  std::vector<MddComponent> comps;
  for (const auto& name : components) comps.push_back({name, 3});
  return build(std::move(comps), [](std::span<const StateLevel> states) {
    return *std::max_element(states.begin(), states.end());
  });
}

Mdd Mdd::from_table_csv(std::string_view csv_text) {
  const auto rows = io::parse_csv(csv_text);
  if (rows.size() < 2) fail(ErrorCode::kInput, "structure table needs a header and at least one row");
  const auto& header = rows.front();
  if (header.size() < 2) fail(ErrorCode::kInput, "structure table needs component columns and a level column");
  const std::size_t n = header.size() - 1;

  std::map<std::vector<unsigned>, unsigned> table;
  std::vector<unsigned> arity(n, 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      fail(ErrorCode::kInput, "structure table row " + std::to_string(r + 1) + " has " +
                                  std::to_string(rows[r].size()) + " cells, expected " +
                                  std::to_string(header.size()));
    }
    std::vector<unsigned> values;
    for (const auto& cell : rows[r]) {
      try {
        std::size_t used = 0;
        const long v = std::stol(cell, &used);
        if (used != cell.size() || v < 0) throw std::invalid_argument(cell);
        values.push_back(static_cast<unsigned>(v));
      } catch (const std::exception&) {
        fail(ErrorCode::kInput, "structure table row " + std::to_string(r + 1) + ": '" + cell +
                                    "' is not a non-negative integer");
      }
    }
    const unsigned level = values.back();
    values.pop_back();
    for (std::size_t i = 0; i < n; ++i) arity[i] = std::max(arity[i], values[i] + 1);
    if (!table.emplace(std::move(values), level).second) {
      fail(ErrorCode::kInput, "structure table row " + std::to_string(r + 1) + " repeats a state vector");
    }
  }

  std::vector<MddComponent> comps;
  std::uint64_t product = 1;
  for (std::size_t i = 0; i < n; ++i) {
    comps.push_back({header[i], arity[i]});
    product *= arity[i];
    if (product > kDefaultProductLimit) fail(ErrorCode::kCapacity, "structure table product space too large");
  }
  if (product != table.size()) {
    fail(ErrorCode::kInput, "structure table covers " + std::to_string(table.size()) + " of " +
                                std::to_string(product) + " state vectors");
  }
  std::vector<unsigned> key(n);
  return build(std::move(comps), [&](std::span<const StateLevel> states) {
    for (std::size_t i = 0; i < n; ++i) key[i] = states[i].value;
    return StateLevel{table.at(key)};
  });
}

Mdd Mdd::from_table_file(const std::string& path) { return from_table_csv(io::read_file(path)); }

StateLevel Mdd::evaluate(std::span<const StateLevel> states) const {
  if (states.size() != components_.size()) {
    fail(ErrorCode::kInput, "expected " + std::to_string(components_.size()) + " component states, got " +
                                std::to_string(states.size()));
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].value >= components_[i].arity) {
      fail(ErrorCode::kInput, "state " + std::to_string(states[i].value) + " out of arity for '" +
                                  components_[i].name + "'");
    }
  }
  const Node* node = &nodes_[root_.index];
  while (!node->is_sink()) node = &nodes_[node->children[states[node->component].value].index];
  return node->level;
}

StateLevel Mdd::evaluate(const StateVector& states) const {
  const auto names = component_names();
  return evaluate(states.levels_for(names));
}

std::vector<double> Mdd::level_probabilities(std::span<const StateDistribution> dists) const {
  if (dists.size() != components_.size()) {
    fail(ErrorCode::kInput, "expected " + std::to_string(components_.size()) + " distributions, got " +
                                std::to_string(dists.size()));
  }
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (dists[i].size() != components_[i].arity) {
      fail(ErrorCode::kInput, "distribution for '" + components_[i].name + "' has " +
                                  std::to_string(dists[i].size()) + " states, expected " +
                                  std::to_string(components_[i].arity));
    }
  }
  const unsigned levels = level_count();
  // Children always precede their parents in the node store, so one forward
  // sweep fills every node's level distribution.
  std::vector<std::vector<double>> memo(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    auto& out = memo[i];
    out.assign(levels, 0.0);
    if (node.is_sink()) {
      out[node.level.value] = 1.0;
      continue;
    }
    const auto& dist = dists[node.component];
    for (std::size_t s = 0; s < node.children.size(); ++s) {
      const double p = dist[s];
      if (p == 0.0) continue;
      const auto& child = memo[node.children[s].index];
      for (unsigned m = 0; m < levels; ++m) out[m] += p * child[m];
    }
  }
  return memo[root_.index];
}

std::size_t Mdd::internal_node_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return !n.is_sink(); }));
}

unsigned Mdd::level_count() const {
  unsigned top = 0;
  for (const auto& n : nodes_) {
    if (n.is_sink()) top = std::max(top, n.level.value);
  }
  return top + 1;
}

std::string Mdd::to_dot() const {
  std::ostringstream out;
  out << "digraph mdd {\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_sink()) {
      out << "  n" << i << " [shape=box, label=\"" << n.level.value << "\"];\n";
    } else {
      out << "  n" << i << " [shape=ellipse, label=\"" << components_[n.component].name << "\"];\n";
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    // Parallel edges to the same child are merged into one labelled edge.
    std::map<std::uint32_t, std::string> edges;
    for (std::size_t s = 0; s < n.children.size(); ++s) {
      auto& label = edges[n.children[s].index];
      if (!label.empty()) label += ",";
      label += std::to_string(s);
    }
    for (const auto& [child, label] : edges) {
      out << "  n" << i << " -> n" << child << " [label=\"" << label << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::vector<std::string> Mdd::component_names() const {
  std::vector<std::string> names;
  names.reserve(components_.size());
  for (const auto& c : components_) names.push_back(c.name);
  return names;
}

}  // namespace afdi
