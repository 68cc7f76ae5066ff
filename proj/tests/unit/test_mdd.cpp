#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "afdi/io.hpp"
#include "afdi/mdd.hpp"
#include "oracles.hpp"

using namespace afdi;

namespace {

std::vector<MddComponent> three_state(std::size_t n) {
  std::vector<MddComponent> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({"c" + std::to_string(i), 3});
  return c;
}

std::vector<unsigned> arities_of(const std::vector<MddComponent>& c) {
  std::vector<unsigned> a;
  for (const auto& x : c) a.push_back(x.arity);
  return a;
}

std::vector<StateLevel> to_levels(const std::vector<unsigned>& v) {
  std::vector<StateLevel> out;
  for (auto x : v) out.emplace_back(x);
  return out;
}

unsigned max_of(const std::vector<unsigned>& v) { return v.empty() ? 0 : *std::max_element(v.begin(), v.end()); }

// Structural checks that hold for every reduced ordered diagram.
void check_canonical(const Mdd& mdd) {
  std::set<std::pair<std::uint32_t, std::vector<std::uint32_t>>> seen;
  std::set<unsigned> sink_levels;
  for (const auto& node : mdd.nodes()) {
    if (node.is_sink()) {
      CHECK(sink_levels.insert(node.level.value).second);
      continue;
    }
    CHECK(node.children.size() == mdd.components()[node.component].arity);
    std::vector<std::uint32_t> kids;
    for (auto c : node.children) kids.push_back(c.index);
    CHECK(std::adjacent_find(kids.begin(), kids.end(), std::not_equal_to<>()) != kids.end());
    CHECK(seen.insert({node.component, kids}).second);
    for (auto c : node.children) {
      const auto& child = mdd.nodes()[c.index];
      if (!child.is_sink()) CHECK(child.component > node.component);
    }
  }
}

}  // namespace

TEST_CASE("constant function reduces to one sink") {
  const auto mdd = Mdd::build(three_state(4), [](std::span<const StateLevel>) { return StateLevel{0}; });
  CHECK(mdd.node_count() == 1);
  CHECK(mdd.nodes()[mdd.root().index].is_sink());
  CHECK(mdd.evaluate(to_levels({2, 1, 0, 2})) == StateLevel{0});
}

TEST_CASE("identity on one component") {
  const auto mdd = Mdd::build({{"x", 3}}, [](std::span<const StateLevel> v) { return v[0]; });
  CHECK(mdd.node_count() == 4);
  CHECK(mdd.internal_node_count() == 1);
  for (unsigned s = 0; s < 3; ++s) CHECK(mdd.evaluate(to_levels({s})) == StateLevel{s});
}

TEST_CASE("max severity worked values") {
  const std::vector<std::string> names{"cpu", "memory", "network", "storage_io"};
  const auto mdd = Mdd::build_max_severity(names);
  CHECK(mdd.evaluate(to_levels({0, 0, 0, 0})) == StateLevel{0});
  CHECK(mdd.evaluate(to_levels({2, 0, 0, 0})) == StateLevel{2});
  CHECK(mdd.evaluate(to_levels({1, 0, 1, 0})) == StateLevel{1});
  CHECK(mdd.evaluate(to_levels({2, 2, 2, 2})) == StateLevel{2});
  const auto sv = StateVector::from_levels(names, to_levels({0, 1, 0, 0}));
  CHECK(mdd.evaluate(sv) == StateLevel{1});
}

TEST_CASE("max severity node count equals the reduce-after-enumeration oracle") {
  const auto comps = three_state(4);
  std::vector<std::string> names;
  for (const auto& c : comps) names.push_back(c.name);
  const auto mdd = Mdd::build_max_severity(names);
  CHECK(mdd.node_count() == oracle::reduced_node_count(arities_of(comps), max_of));
  check_canonical(mdd);
}

TEST_CASE("random structure functions: exhaustive agreement, canonical form, node count") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<std::size_t> nd(1, 6);
    std::uniform_int_distribution<unsigned> ad(2, 3);
    std::vector<MddComponent> comps;
    const auto n = nd(rng);
    for (std::size_t i = 0; i < n; ++i) comps.push_back({"v" + std::to_string(i), ad(rng)});
    const auto arities = arities_of(comps);

    // Random table with few distinct outputs so that reduction has work to do.
    std::map<std::vector<unsigned>, unsigned> table;
    std::uniform_int_distribution<unsigned> out(0, 2);
    const int mode = trial % 3;
    oracle::for_each_vector(arities, [&](const std::vector<unsigned>& v) {
      unsigned r = out(rng);
      if (mode == 1) r = v[0] >= 1 ? 2 : r % 2;
      if (mode == 2) r = (v.size() > 1 ? v[1] : 0) == 0 ? 0 : r;
      table[v] = r;
    });
    auto f_raw = [&](const std::vector<unsigned>& v) { return table.at(v); };
    auto f = [&](std::span<const StateLevel> s) {
      std::vector<unsigned> v;
      for (auto l : s) v.push_back(l.value);
      return StateLevel{table.at(v)};
    };

    const auto mdd = Mdd::build(comps, f);
    oracle::for_each_vector(arities, [&](const std::vector<unsigned>& v) {
      CHECK(mdd.evaluate(to_levels(v)).value == table.at(v));
    });
    CHECK(mdd.node_count() == oracle::reduced_node_count(arities, f_raw));
    check_canonical(mdd);
    CHECK(Mdd::build(comps, f) == mdd);
  }
}

TEST_CASE("six components exhaustively") {
  const auto comps = three_state(6);
  const auto f = [](std::span<const StateLevel> v) {
    unsigned s = 0;
    for (auto l : v) s += l.value;
    return StateLevel{s >= 8 ? 2u : (s >= 4 ? 1u : 0u)};
  };
  const auto mdd = Mdd::build(comps, f);
  std::size_t checked = 0;
  oracle::for_each_vector(arities_of(comps), [&](const std::vector<unsigned>& v) {
    const auto levels = to_levels(v);
    CHECK(mdd.evaluate(levels) == f(levels));
    ++checked;
  });
  CHECK(checked == 729);
  check_canonical(mdd);
}

TEST_CASE("max severity is monotone in every component") {
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto mdd = Mdd::build_max_severity(names);
  oracle::for_each_vector({3, 3, 3, 3}, [&](const std::vector<unsigned>& v) {
    const auto base = mdd.evaluate(to_levels(v));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 2) continue;
      auto up = v;
      ++up[i];
      CHECK(mdd.evaluate(to_levels(up)) >= base);
    }
  });
}

TEST_CASE("level probabilities") {
  const std::vector<std::string> names{"cpu", "memory", "network", "storage_io"};
  const auto mdd = Mdd::build_max_severity(names);
  const std::vector<StateDistribution> uniform(4, StateDistribution::uniform(3));
  const auto p = mdd.level_probabilities(uniform);
  REQUIRE(p.size() == 3);
  CHECK(std::abs(p[0] - 1.0 / 81.0) <= 1e-12);
  CHECK(std::abs(p[2] - 65.0 / 81.0) <= 1e-12);
  CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-12);

  SUBCASE("one-hot inputs give a one-hot output at evaluate") {
    oracle::for_each_vector({3, 3, 3, 3}, [&](const std::vector<unsigned>& v) {
      std::vector<StateDistribution> d;
      for (auto s : v) d.push_back(StateDistribution::one_hot(3, s));
      const auto q = mdd.level_probabilities(d);
      const auto level = mdd.evaluate(to_levels(v)).value;
      for (unsigned m = 0; m < q.size(); ++m) CHECK(q[m] == (m == level ? 1.0 : 0.0));
    });
  }

  SUBCASE("random distributions agree with weighted enumeration") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::vector<double>> raw;
      std::vector<StateDistribution> d;
      for (int i = 0; i < 4; ++i) {
        raw.push_back(oracle::random_row(rng, 3));
        d.emplace_back(raw.back());
      }
      const auto q = mdd.level_probabilities(d);
      const auto ref = oracle::level_probabilities(raw, max_of, 3);
      double sum = 0.0;
      for (unsigned m = 0; m < 3; ++m) {
        CHECK(std::abs(q[m] - ref[m]) <= 1e-12);
        sum += q[m];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(StateDistribution({0.5, 0.6}), Error);
  CHECK_THROWS_AS(StateDistribution({-0.1, 1.1}), Error);
  const std::vector<std::string> names{"a", "b"};
  const auto mdd = Mdd::build_max_severity(names);
  const std::vector<StateDistribution> one(1, StateDistribution::uniform(3));
  CHECK_THROWS_AS(mdd.level_probabilities(one), Error);
  const std::vector<StateDistribution> wrong(2, StateDistribution::uniform(2));
  CHECK_THROWS_AS(mdd.level_probabilities(wrong), Error);
}

TEST_CASE("evaluate input errors") {
  const std::vector<std::string> names{"a", "b"};
  const auto mdd = Mdd::build_max_severity(names);
  CHECK_THROWS_AS(mdd.evaluate(to_levels({0})), Error);
  CHECK_THROWS_AS(mdd.evaluate(to_levels({0, 3})), Error);
}

TEST_CASE("build errors") {
  CHECK_THROWS_AS(Mdd::build({{"a", 3}, {"a", 3}}, [](std::span<const StateLevel>) { return StateLevel{0}; }), Error);
  try {
    Mdd::build(three_state(13), [](std::span<const StateLevel>) { return StateLevel{0}; });
    FAIL("expected capacity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCapacity);
  }
  const std::vector<std::string> none;
  CHECK_THROWS_AS(Mdd::build_max_severity(none), Error);
}

TEST_CASE("truth table file") {
  const auto mdd = Mdd::from_table_file(oracle::fixture("max_severity_table.csv"));
  const std::vector<std::string> names{"cpu", "memory", "network", "storage_io"};
  CHECK(mdd.component_names() == names);
  CHECK(mdd == Mdd::build_max_severity(names));

  CHECK_THROWS_AS(Mdd::from_table_csv("a,b,system\n0,0,0\n0,1,1\n1,0,1\n"), Error);          // incomplete
  CHECK_THROWS_AS(Mdd::from_table_csv("a,system\n0,0\n1,1\n1,0\n"), Error);           // duplicate row
  CHECK_THROWS_AS(Mdd::from_table_csv("a,system\n0,0\nx,1\n"), Error);                // not a number
}

TEST_CASE("dot output") {
  const auto mdd = Mdd::build({{"x", 3}}, [](std::span<const StateLevel> v) {
    return StateLevel{v[0].value == 2 ? 1u : 0u};
  });
  const auto dot = mdd.to_dot();
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("0,1") != std::string::npos);
}
