#include "afdi/bayesnet.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "afdi/io.hpp"

namespace afdi {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Factor

Factor::Factor(std::vector<std::size_t> scope, std::vector<std::size_t> cards, std::vector<double> values)
    : scope_(std::move(scope)), cards_(std::move(cards)), values_(std::move(values)) {
  std::size_t size = 1;
  for (auto c : cards_) size *= c;
  if (scope_.size() != cards_.size() || values_.size() != size) {
    fail(ErrorCode::kInvalidArgument, "factor dimensions do not match its scope");
  }
}

Factor Factor::scalar(double value) { return Factor({}, {}, {value}); }

bool Factor::mentions(std::size_t var) const {
  return std::find(scope_.begin(), scope_.end(), var) != scope_.end();
}

namespace {

// Row-major strides of `scope` (last fastest), projected onto `target`:
// stride of target[k] inside a table over `scope`, or 0 if absent.
std::vector<std::size_t> projected_strides(const std::vector<std::size_t>& scope,
                                           const std::vector<std::size_t>& cards,
                                           const std::vector<std::size_t>& target) {
  std::vector<std::size_t> own(scope.size());
  std::size_t stride = 1;
  for (std::size_t k = scope.size(); k-- > 0;) {
    own[k] = stride;
    stride *= cards[k];
  }
  std::vector<std::size_t> out(target.size(), 0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto it = std::find(scope.begin(), scope.end(), target[k]);
    if (it != scope.end()) out[k] = own[static_cast<std::size_t>(it - scope.begin())];
  }
  return out;
}

}  // namespace

Factor Factor::multiply(const Factor& other) const {
  std::vector<std::size_t> scope = scope_;
  std::vector<std::size_t> cards = cards_;
  for (std::size_t k = 0; k < other.scope_.size(); ++k) {
    if (!mentions(other.scope_[k])) {
      scope.push_back(other.scope_[k]);
      cards.push_back(other.cards_[k]);
    }
  }
  const auto lhs = projected_strides(scope_, cards_, scope);
  const auto rhs = projected_strides(other.scope_, other.cards_, scope);
  std::size_t size = 1;
  for (auto c : cards) size *= c;

  std::vector<double> values(size);
  std::vector<std::size_t> counter(scope.size(), 0);
  std::size_t li = 0;
  std::size_t ri = 0;
  for (std::size_t i = 0; i < size; ++i) {
    values[i] = values_[li] * other.values_[ri];
    // Odometer increment, last variable fastest.
    for (std::size_t k = scope.size(); k-- > 0;) {
      if (++counter[k] < cards[k]) {
        li += lhs[k];
        ri += rhs[k];
        break;
      }
      li -= lhs[k] * (cards[k] - 1);
      ri -= rhs[k] * (cards[k] - 1);
      counter[k] = 0;
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

Factor Factor::sum_out(std::size_t var) const {
  const auto pos = static_cast<std::size_t>(std::find(scope_.begin(), scope_.end(), var) - scope_.begin());
  if (pos == scope_.size()) return *this;
  std::vector<std::size_t> scope = scope_;
  std::vector<std::size_t> cards = cards_;
  scope.erase(scope.begin() + static_cast<std::ptrdiff_t>(pos));
  cards.erase(cards.begin() + static_cast<std::ptrdiff_t>(pos));

  std::size_t inner = 1;
  for (std::size_t k = pos + 1; k < cards_.size(); ++k) inner *= cards_[k];
  const std::size_t card = cards_[pos];
  const std::size_t outer = values_.size() / (inner * card);
  std::vector<double> values(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < card; ++s) {
      for (std::size_t in = 0; in < inner; ++in) values[o * inner + in] += values_[(o * card + s) * inner + in];
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

Factor Factor::reduce(std::size_t var, std::size_t state) const {
  const auto pos = static_cast<std::size_t>(std::find(scope_.begin(), scope_.end(), var) - scope_.begin());
  if (pos == scope_.size()) return *this;
  std::vector<std::size_t> scope = scope_;
  std::vector<std::size_t> cards = cards_;
  scope.erase(scope.begin() + static_cast<std::ptrdiff_t>(pos));
  cards.erase(cards.begin() + static_cast<std::ptrdiff_t>(pos));

  std::size_t inner = 1;
  for (std::size_t k = pos + 1; k < cards_.size(); ++k) inner *= cards_[k];
  const std::size_t card = cards_[pos];
  const std::size_t outer = values_.size() / (inner * card);
  std::vector<double> values(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) values[o * inner + in] = values_[(o * card + state) * inner + in];
  }
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

// ---------------------------------------------------------------------------
// DiscreteBayesNet

DiscreteBayesNet DiscreteBayesNet::create(std::vector<BnNode> nodes,
                                          std::vector<std::vector<std::vector<double>>> cpts) {
  DiscreteBayesNet net;
  if (nodes.empty()) fail(ErrorCode::kLoad, "network has no nodes");
  if (cpts.size() != nodes.size()) fail(ErrorCode::kLoad, "network needs one CPT per node");
  std::set<std::string> names;
  for (const auto& n : nodes) {
    if (n.name.empty()) fail(ErrorCode::kLoad, "node with empty name");
    if (!names.insert(n.name).second) fail(ErrorCode::kLoad, "duplicate node '" + n.name + "'");
    if (n.states.empty()) fail(ErrorCode::kLoad, "node '" + n.name + "' has no states");
    for (auto p : n.parents) {
      if (p >= nodes.size()) fail(ErrorCode::kLoad, "node '" + n.name + "' has an unknown parent");
    }
  }

  // Kahn's algorithm, smallest index first for a deterministic order.
  std::vector<std::size_t> pending(nodes.size());
  std::vector<std::vector<std::size_t>> children(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    pending[i] = nodes[i].parents.size();
    for (auto p : nodes[i].parents) children[p].push_back(i);
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (pending[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const auto i = *ready.begin();
    ready.erase(ready.begin());
    net.topo_.push_back(i);
    for (auto c : children[i]) {
      if (--pending[c] == 0) ready.insert(c);
    }
  }
  if (net.topo_.size() != nodes.size()) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (pending[i] != 0) fail(ErrorCode::kLoad, "cycle through node '" + nodes[i].name + "'");
    }
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    std::size_t rows = 1;
    for (auto p : n.parents) rows *= nodes[p].states.size();
    auto& table = cpts[i];
    if (table.size() != rows) {
      fail(ErrorCode::kLoad, "CPT of '" + n.name + "' has " + std::to_string(table.size()) + " rows, expected " +
                                 std::to_string(rows));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      auto& row = table[r];
      const auto where = "CPT of '" + n.name + "' row " + std::to_string(r);
      if (row.size() != n.states.size()) {
        fail(ErrorCode::kLoad, where + " has " + std::to_string(row.size()) + " entries, expected " +
                                   std::to_string(n.states.size()));
      }
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) fail(ErrorCode::kLoad, where + " has a negative or non-finite entry");
        sum += p;
      }
      const double deviation = std::abs(sum - 1.0);
      if (deviation > kMaxRowDeviation) {
        std::ostringstream msg;
        msg << where << " sums to " << sum << ", more than " << kMaxRowDeviation << " from 1";
        fail(ErrorCode::kLoad, msg.str());
      }
      if (deviation > kSilentDeviation) {
        for (auto& p : row) p /= sum;
        std::ostringstream msg;
        msg.precision(17);
        msg << where << " summed to " << sum << "; renormalized";
        net.warnings_.push_back({n.name, r, sum, msg.str()});
      }
    }
  }
  net.nodes_ = std::move(nodes);
  net.cpts_ = std::move(cpts);
  return net;
}

DiscreteBayesNet DiscreteBayesNet::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    const auto& jnodes = j.at("nodes");
    std::vector<BnNode> nodes;
    std::map<std::string, std::size_t> index;
    for (const auto& jn : jnodes) {
      BnNode n;
      n.name = jn.at("name").get<std::string>();
      n.states = jn.at("states").get<std::vector<std::string>>();
      index[n.name] = nodes.size();
      nodes.push_back(std::move(n));
    }
    std::vector<std::vector<std::vector<double>>> cpts(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& jn = jnodes[i];
      if (jn.contains("parents")) {
        for (const auto& p : jn.at("parents")) {
          const auto name = p.get<std::string>();
          const auto it = index.find(name);
          if (it == index.end()) fail(ErrorCode::kLoad, "node '" + nodes[i].name + "' names unknown parent '" + name + "'");
          nodes[i].parents.push_back(it->second);
        }
      }
      const auto& jcpts = j.at("cpts");
      if (!jcpts.contains(nodes[i].name)) fail(ErrorCode::kLoad, "no CPT for node '" + nodes[i].name + "'");
      cpts[i] = jcpts.at(nodes[i].name).get<std::vector<std::vector<double>>>();
    }
    return create(std::move(nodes), std::move(cpts));
  } catch (const json::exception& e) {
    fail(ErrorCode::kLoad, std::string("malformed network document: ") + e.what());
  }
}

DiscreteBayesNet DiscreteBayesNet::load(const std::string& path) {
  try {
    return from_json(io::read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::size_t DiscreteBayesNet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  fail(ErrorCode::kLookup, "unknown node '" + std::string(name) + "'");
}

std::size_t DiscreteBayesNet::state_index(std::size_t node, std::string_view state) const {
  const auto& states = nodes_.at(node).states;
  for (std::size_t s = 0; s < states.size(); ++s) {
    if (states[s] == state) return s;
  }
  if (!state.empty() && std::all_of(state.begin(), state.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto s = static_cast<std::size_t>(std::stoul(std::string(state)));
    if (s < states.size()) return s;
  }
  fail(ErrorCode::kLookup, "node '" + nodes_[node].name + "' has no state '" + std::string(state) + "'");
}

double DiscreteBayesNet::joint_probability(std::span<const std::size_t> assignment) const {
  if (assignment.size() != nodes_.size()) {
    fail(ErrorCode::kInput, "joint probability needs all " + std::to_string(nodes_.size()) + " nodes assigned");
  }
  double p = 1.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (assignment[i] >= nodes_[i].states.size()) fail(ErrorCode::kInput, "state out of range for '" + nodes_[i].name + "'");
    std::size_t row = 0;
    for (auto parent : nodes_[i].parents) row = row * nodes_[parent].states.size() + assignment[parent];
    p *= cpts_[i][row][assignment[i]];
  }
  return p;
}

StateDistribution DiscreteBayesNet::marginal(std::size_t query,
                                             std::optional<std::vector<std::size_t>> elimination_order) const {
  return posterior_given_evidence(query, {}, std::move(elimination_order));
}

StateDistribution DiscreteBayesNet::marginal(std::string_view query) const { return marginal(index_of(query)); }

StateDistribution DiscreteBayesNet::posterior_given_evidence(
    std::size_t query, const Evidence& evidence, std::optional<std::vector<std::size_t>> elimination_order) const {
  if (query >= nodes_.size()) fail(ErrorCode::kLookup, "query node index out of range");
  for (const auto& [node, state] : evidence) {
    if (node >= nodes_.size()) fail(ErrorCode::kLookup, "evidence node index out of range");
    if (node == query) fail(ErrorCode::kInput, "evidence must not include the query node '" + nodes_[query].name + "'");
    if (state >= nodes_[node].states.size()) fail(ErrorCode::kInput, "evidence state out of range for '" + nodes_[node].name + "'");
  }

  std::vector<std::size_t> order;
  if (elimination_order) {
    order = std::move(*elimination_order);
    std::vector<bool> seen(nodes_.size(), false);
    for (auto v : order) {
      if (v >= nodes_.size() || v == query || seen[v]) {
        fail(ErrorCode::kInput, "elimination order must list each non-query node exactly once");
      }
      seen[v] = true;
    }
    if (order.size() != nodes_.size() - 1) fail(ErrorCode::kInput, "elimination order does not cover every non-query node");
  } else {
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      if (*it != query) order.push_back(*it);
    }
  }

  std::vector<Factor> factors;
  factors.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::vector<std::size_t> scope = nodes_[i].parents;
    scope.push_back(i);
    std::vector<std::size_t> cards;
    for (auto v : scope) cards.push_back(nodes_[v].states.size());
    std::vector<double> values;
    for (const auto& row : cpts_[i]) values.insert(values.end(), row.begin(), row.end());
    Factor f(std::move(scope), std::move(cards), std::move(values));
    for (const auto& [node, state] : evidence) f = f.reduce(node, state);
    factors.push_back(std::move(f));
  }

  for (auto var : order) {
    if (evidence.contains(var)) continue;
    Factor bucket = Factor::scalar(1.0);
    std::vector<Factor> rest;
    bool any = false;
    for (auto& f : factors) {
      if (f.mentions(var)) {
        bucket = bucket.multiply(f);
        any = true;
      } else {
        rest.push_back(std::move(f));
      }
    }
    factors = std::move(rest);
    if (any) factors.push_back(bucket.sum_out(var));
  }

  Factor result = Factor::scalar(1.0);
  for (const auto& f : factors) result = result.multiply(f);
  // Only the query can remain in scope.
  const auto card = nodes_[query].states.size();
  std::vector<double> probs(card, result.values().front());
  if (!result.scope().empty()) probs = result.values();

  const double z = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!(z > 0.0)) {
    fail(ErrorCode::kImpossibleEvidence, "evidence has zero probability; posterior of '" + nodes_[query].name + "' is undefined");
  }
  for (auto& p : probs) p /= z;
  return StateDistribution(std::move(probs));
}

Evidence DiscreteBayesNet::parse_evidence(std::span<const std::string> items) const {
  Evidence evidence;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kInput, "evidence '" + item + "' is not NODE=STATE");
    const auto node = index_of(io::trim(std::string_view(item).substr(0, eq)));
    const auto state = state_index(node, io::trim(std::string_view(item).substr(eq + 1)));
    if (!evidence.emplace(node, state).second) fail(ErrorCode::kInput, "node '" + nodes_[node].name + "' observed twice");
  }
  return evidence;
}

}  // namespace afdi
