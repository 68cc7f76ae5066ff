#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "afdi/bayesnet.hpp"
#include "afdi/nbc.hpp"

namespace oracle {

inline std::string fixture(const std::string& name) { return std::string(AFDI_FIXTURE_DIR) + "/" + name; }

// Calls fn for every vector in the product of `arities`, last position fastest.
inline void for_each_vector(const std::vector<unsigned>& arities, const std::function<void(const std::vector<unsigned>&)>& fn) {
  std::vector<unsigned> v(arities.size(), 0);
  while (true) {
    fn(v);
    std::size_t i = v.size();
    while (i > 0) {
      --i;
      if (++v[i] < arities[i]) break;
      v[i] = 0;
      if (i == 0) return;
    }
    if (v.empty()) return;
  }
}

// Node count of the reduced ordered diagram of f, derived from truth tables:
// one node per distinct reachable subfunction that depends on its top
// variable, plus one sink per distinct output value.
inline std::size_t reduced_node_count(const std::vector<unsigned>& arities,
                                      const std::function<unsigned(const std::vector<unsigned>&)>& f) {
  const std::size_t n = arities.size();
  std::set<unsigned> outputs;
  std::size_t count = 0;
  for (std::size_t level = 0; level < n; ++level) {
    std::vector<unsigned> prefix_ar(arities.begin(), arities.begin() + static_cast<std::ptrdiff_t>(level));
    std::vector<unsigned> suffix_ar(arities.begin() + static_cast<std::ptrdiff_t>(level), arities.end());
    std::vector<unsigned> rest_ar(arities.begin() + static_cast<std::ptrdiff_t>(level) + 1, arities.end());
    std::set<std::vector<unsigned>> tables;
    for_each_vector(prefix_ar, [&](const std::vector<unsigned>& prefix) {
      std::vector<unsigned> table;
      for_each_vector(suffix_ar, [&](const std::vector<unsigned>& suffix) {
        auto full = prefix;
        full.insert(full.end(), suffix.begin(), suffix.end());
        const auto out = f(full);
        table.push_back(out);
        outputs.insert(out);
      });
      std::size_t block = table.size() / arities[level];
      bool depends = false;
      for (unsigned s = 1; s < arities[level] && !depends; ++s) {
        depends = !std::equal(table.begin(), table.begin() + static_cast<std::ptrdiff_t>(block),
                              table.begin() + static_cast<std::ptrdiff_t>(s * block));
      }
      if (depends) tables.insert(table);
    });
    count += tables.size();
  }
  if (n == 0) outputs.insert(f({}));
  return count + outputs.size();
}

// Weighted enumeration of P(system = m) with independent components.
inline std::vector<double> level_probabilities(const std::vector<std::vector<double>>& dists,
                                               const std::function<unsigned(const std::vector<unsigned>&)>& f,
                                               unsigned levels) {
  std::vector<unsigned> arities;
  for (const auto& d : dists) arities.push_back(static_cast<unsigned>(d.size()));
  std::vector<double> out(levels, 0.0);
  for_each_vector(arities, [&](const std::vector<unsigned>& v) {
    double w = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) w *= dists[i][v[i]];
    out[f(v)] += w;
  });
  return out;
}

// Bayesian network description independent of the library types.
struct Net {
  std::vector<std::size_t> cards;
  std::vector<std::vector<std::size_t>> parents;
  std::vector<std::vector<std::vector<double>>> cpts;  // [node][parent row][state]
};

inline double joint(const Net& net, const std::vector<unsigned>& a) {
  double p = 1.0;
  for (std::size_t i = 0; i < net.cards.size(); ++i) {
    std::size_t row = 0;
    for (auto par : net.parents[i]) row = row * net.cards[par] + a[par];
    p *= net.cpts[i][row][a[i]];
  }
  return p;
}

// P(query | evidence) by summing the full joint.
inline std::vector<double> enumerate_posterior(const Net& net, std::size_t query,
                                               const std::map<std::size_t, std::size_t>& evidence) {
  std::vector<unsigned> ar(net.cards.begin(), net.cards.end());
  std::vector<double> out(net.cards[query], 0.0);
  for_each_vector(ar, [&](const std::vector<unsigned>& a) {
    for (const auto& [n, s] : evidence) {
      if (a[n] != s) return;
    }
    out[a[query]] += joint(net, a);
  });
  double z = 0.0;
  for (double v : out) z += v;
  for (double& v : out) v /= z;
  return out;
}

inline std::vector<double> random_row(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row(n);
  double sum = 0.0;
  for (auto& v : row) sum += (v = u(rng));
  for (auto& v : row) v /= sum;
  return row;
}

// Random DAG over up to `max_nodes` nodes listed in shuffled order so that
// index order is not a topological order.
inline Net random_net(std::mt19937_64& rng, std::size_t max_nodes = 8, std::size_t max_states = 3) {
  std::uniform_int_distribution<std::size_t> nodes_d(2, max_nodes);
  std::uniform_int_distribution<std::size_t> states_d(2, max_states);
  const std::size_t n = nodes_d(rng);
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[i] = i;
  std::shuffle(rank.begin(), rank.end(), rng);  // rank[i] = topological position of node i
  Net net;
  net.cards.resize(n);
  net.parents.resize(n);
  net.cpts.resize(n);
  for (auto& c : net.cards) c = states_d(rng);
  std::bernoulli_distribution edge(0.4);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (rank[j] < rank[i] && net.parents[i].size() < 3 && edge(rng)) net.parents[i].push_back(j);
    }
    std::size_t rows = 1;
    for (auto p : net.parents[i]) rows *= net.cards[p];
    for (std::size_t r = 0; r < rows; ++r) net.cpts[i].push_back(random_row(rng, net.cards[i]));
  }
  return net;
}

inline afdi::DiscreteBayesNet to_library(const Net& net) {
  std::vector<afdi::BnNode> nodes;
  for (std::size_t i = 0; i < net.cards.size(); ++i) {
    afdi::BnNode node;
    node.name = "n" + std::to_string(i);
    for (std::size_t s = 0; s < net.cards[i]; ++s) node.states.push_back("s" + std::to_string(s));
    node.parents = net.parents[i];
    nodes.push_back(std::move(node));
  }
  return afdi::DiscreteBayesNet::create(std::move(nodes), net.cpts);
}

// Unnormalized prior x likelihood products in linear space, then normalized.
inline std::vector<double> linear_posterior(const afdi::NbcModel& model, const afdi::FeatureVector& x) {
  const auto& priors = model.priors();
  std::vector<double> w(priors.size());
  double z = 0.0;
  for (std::size_t c = 0; c < priors.size(); ++c) {
    w[c] = priors[c];
    for (std::size_t a = 0; a < x.size(); ++a) {
      if (x[a]) w[c] *= model.cond()[a][c][*x[a]];
    }
    z += w[c];
  }
  for (auto& v : w) v /= z;
  return w;
}

}  // namespace oracle
