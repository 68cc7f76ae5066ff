// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "afdi/bayesnet.hpp"
#include "afdi/engine.hpp"
#include "afdi/evaluation.hpp"
#include "afdi/mdd.hpp"
#include "afdi/nbc.hpp"
#include "afdi/simulator.hpp"

using namespace afdi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

const std::vector<std::string> kComponents{"cpu", "memory", "network", "storage_io"};

unsigned max_of(const std::vector<unsigned>& v) { return v.empty() ? 0 : *std::max_element(v.begin(), v.end()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome mdd_exhaustive() {
  const auto t0 = Clock::now();
  const auto mdd = Mdd::from_table_file(oracle::fixture("max_severity_table.csv"));
  std::size_t checked = 0, wrong = 0;
  oracle::for_each_vector({3, 3, 3, 3}, [&](const std::vector<unsigned>& v) {
    std::vector<StateLevel> s;
    for (auto x : v) s.emplace_back(x);
    ++checked;
    if (mdd.evaluate(s).value != max_of(v)) ++wrong;
  });
  const double dt = seconds_since(t0);
  return {checked == 81 && wrong == 0 && dt < 1.0,
          std::to_string(checked) + " vectors, " + std::to_string(wrong) + " mismatches, " + std::to_string(dt) + " s"};
}

Outcome mdd_uniform() {
  const auto mdd = Mdd::build_max_severity(kComponents);
  const std::vector<StateDistribution> dists(4, StateDistribution::uniform(3));
  const auto p = mdd.level_probabilities(dists);
  const double err = std::abs(p.at(2) - 65.0 / 81.0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "P(serious) = %.17g, |error| = %.3g", p.at(2), err);
  return {err <= 1e-12, buf};
}

Outcome bn_onehot_and_random() {
  const auto t0 = Clock::now();
  const auto net = DiscreteBayesNet::load(oracle::fixture("host_subsystem_onehot.json"));
  const double fixed_err = max_abs_diff(net.marginal("S").probs(), {0.899, 0.0685, 0.0325});
  std::mt19937_64 rng(20240917);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto ref = oracle::random_net(rng);
    const auto lib = oracle::to_library(ref);
    std::uniform_int_distribution<std::size_t> pick(0, ref.cards.size() - 1);
    const std::size_t q = pick(rng);
    std::map<std::size_t, std::size_t> ev;
    const std::size_t e = pick(rng);
    if (e != q) ev[e] = std::uniform_int_distribution<std::size_t>(0, ref.cards[e] - 1)(rng);
    worst = std::max(worst, max_abs_diff(lib.marginal(q).probs(), oracle::enumerate_posterior(ref, q, {})));
    worst = std::max(worst, max_abs_diff(lib.posterior_given_evidence(q, ev).probs(), oracle::enumerate_posterior(ref, q, ev)));
  }
  const double dt = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "one-hot error %.3g, random nets worst %.3g, %.3f s", fixed_err, worst, dt);
  return {fixed_err <= 1e-12 && worst <= 1e-9 && dt < 10.0, buf};
}

Outcome bn_case_study() {
  const auto net = DiscreteBayesNet::load(oracle::fixture("host_subsystem_case_study.json"));
  const bool warned = net.warnings().size() == 1 && net.warnings()[0].node == "cpu";
  oracle::Net ref;
  for (const auto& n : net.nodes()) {
    ref.cards.push_back(n.states.size());
    ref.parents.push_back(n.parents);
  }
  // Oracle takes the stated cpu prior and renormalizes it itself.
  for (std::size_t i = 0; i < net.node_count(); ++i) ref.cpts.push_back(net.cpt(i));
  const auto cpu = net.index_of("cpu");
  ref.cpts[cpu] = {{0.001 / 0.999, 0.425 / 0.999, 0.573 / 0.999}};
  const auto s = net.index_of("S");
  double worst = max_abs_diff(net.marginal(s).probs(), oracle::enumerate_posterior(ref, s, {}));
  for (std::size_t state = 0; state < 3; ++state) {
    for (std::size_t q = 0; q < net.node_count(); ++q) {
      if (q == s) continue;
      worst = std::max(worst, max_abs_diff(net.posterior_given_evidence(q, {{s, state}}).probs(),
                                           oracle::enumerate_posterior(ref, q, {{s, state}})));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "renormalization warning %s, worst error %.3g", warned ? "raised" : "missing", worst);
  return {warned && worst <= 1e-9, buf};
}

Outcome metric_values() {
  const auto m = ConfusionMatrix::from_counts(38, 2, 2, 58);
  const bool ok = recall(m) == 0.95 && precision(m) == 0.95 && accuracy(m) == 0.96 && false_alarm_rate(m) == 0.05;
  char buf[128];
  std::snprintf(buf, sizeof buf, "recall %.17g precision %.17g accuracy %.17g far %.17g", recall(m), precision(m),
                accuracy(m), false_alarm_rate(m));
  return {ok, buf};
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const auto scenario = Scenario::load(oracle::fixture("scenario_800.json"));
  const auto sim = generate(scenario);
  const auto schema = standard_schema();
  const auto data = to_training_set(sim.samples, sim.labels, standard_discretization(), schema, scenario.window_ms);
  const auto split = holdout_split(data, 600, 42);
  const auto model = NbcModel::train(split.train, schema, 1.0);
  const auto m = score(model, split.test);
  const double dt = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu train / %zu test, accuracy %.4f, false alarm rate %.4f, %.2f s",
                split.train.size(), split.test.size(), accuracy(m), false_alarm_rate(m), dt);
  return {split.test.size() > 0 && accuracy(m) >= 0.85 && false_alarm_rate(m) <= 0.30 && dt < 30.0, buf};
}

Outcome engine_behaviour() {
  const auto config = EngineConfig::load(oracle::fixture("engine_config.json"));

  const auto crash = generate(Scenario::load(oracle::fixture("scenario_serious_crash.json")));
  DiagnosisEngine crash_engine(config);
  const auto crash_alarms = crash_engine.run(crash.samples);
  const bool gated = !crash_alarms.empty() && crash_engine.nbc_invocations() == 0 &&
                     std::all_of(crash_alarms.begin(), crash_alarms.end(), [](const Alarm& a) {
                       return a.trigger == AlarmTrigger::kSeverityGate && a.severity == kSeriousFault && !a.diagnosis;
                     });

  const auto loop = generate(Scenario::load(oracle::fixture("scenario_endless_loop.json")));
  DiagnosisEngine loop_engine(config), again(config);
  const auto loop_alarms = loop_engine.run(loop.samples);
  again.run(loop.samples);
  const bool identical = loop_engine.log_jsonl() == again.log_jsonl();

  std::map<std::int64_t, WindowStates> states;
  for (const auto& w : loop_engine.assemble_windows(preprocess(loop.samples, config.preprocess))) {
    states[w.index] = loop_engine.discretize_window(w);
  }
  std::vector<std::int64_t> span;
  bool conditions = true;
  for (const auto& a : loop_alarms) {
    if (a.top_cause != config.endless_loop.cause) continue;
    const auto idx = a.timestamp / config.window_ms;
    span.push_back(idx);
    const auto& b = states.at(idx).buckets;
    conditions = conditions && b.at(config.endless_loop.vm_cpu) >= config.endless_loop.cpu_bucket &&
                 b.at(config.endless_loop.host_cpu) >= config.endless_loop.cpu_bucket &&
                 b.at(config.endless_loop.throughput) <= config.endless_loop.throughput_bucket;
  }
  const bool one_span = !span.empty() && span.back() - span.front() + 1 == static_cast<std::int64_t>(span.size());

  std::string detail = "crash: " + std::to_string(crash_alarms.size()) + " gate alarms, " +
                       std::to_string(crash_engine.nbc_invocations()) + " nbc calls; endless loop: " +
                       std::to_string(span.size()) + " windows";
  if (one_span) detail += " [" + std::to_string(span.front()) + ", " + std::to_string(span.back()) + "]";
  detail += conditions ? ", cpu/throughput conditions hold" : ", conditions violated";
  detail += identical ? ", logs identical" : ", logs differ";
  return {gated && one_span && conditions && identical, detail};
}

Outcome properties() {
  std::mt19937_64 rng(8);
  std::vector<std::string> failed;

  // Posteriors sum to one; argmax survives positive rescaling of priors.
  const auto model = NbcModel::load(oracle::fixture("model_800.json"));
  bool normalized = true, invariant = true;
  for (int t = 0; t < 500; ++t) {
    FeatureVector x;
    for (const auto& a : model.schema().attributes()) {
      x.push_back(std::uniform_int_distribution<unsigned>(0, a.cardinality - 1)(rng));
    }
    const auto p = model.posterior(x);
    normalized = normalized && std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12;
    auto priors = model.priors();
    for (auto& v : priors) v *= 7.0;
    const double z = std::accumulate(priors.begin(), priors.end(), 0.0);
    for (auto& v : priors) v /= z;
    const auto scaled = NbcModel::from_tables(model.schema(), model.alpha(), priors, model.cond());
    invariant = invariant && scaled.classify(x) == model.classify(x);
  }
  if (!normalized) failed.push_back("normalization");
  if (!invariant) failed.push_back("argmax invariance");

  // Reduced diagram size matches the truth-table count.
  bool canonical = true;
  for (int t = 0; t < 40; ++t) {
    std::vector<unsigned> table(81);
    for (auto& v : table) v = std::uniform_int_distribution<unsigned>(0, 2)(rng);
    const auto f = [&](const std::vector<unsigned>& v) { return table[((v[0] * 3 + v[1]) * 3 + v[2]) * 3 + v[3]]; };
    std::vector<MddComponent> comps;
    for (const auto& c : kComponents) comps.push_back({c, 3});
    const auto mdd = Mdd::build(comps, [&](std::span<const StateLevel> s) {
      std::vector<unsigned> v;
      for (auto x : s) v.push_back(x.value);
      return StateLevel{f(v)};
    });
    canonical = canonical && mdd.node_count() == oracle::reduced_node_count({3, 3, 3, 3}, f);
  }
  if (!canonical) failed.push_back("canonical reduction");

  // Preprocessing is idempotent.
  bool idempotent = true;
  for (int t = 0; t < 50; ++t) {
    std::vector<MetricSample> s;
    std::normal_distribution<double> noise(50.0, 10.0);
    for (int i = 0; i < 60; ++i) {
      double v = noise(rng);
      if (i % 13 == 5) v += 200.0;
      s.push_back({i * 1000, "h0", std::string("h0-vm0"), {"cpu", Scope::kVm}, v});
    }
    const auto once = preprocess(s);
    idempotent = idempotent && preprocess(once) == once;
  }
  if (!idempotent) failed.push_back("preprocess idempotence");

  // Any elimination order yields the same posterior.
  bool order_free = true;
  for (int t = 0; t < 30; ++t) {
    const auto ref = oracle::random_net(rng, 6);
    const auto lib = oracle::to_library(ref);
    const std::size_t q = std::uniform_int_distribution<std::size_t>(0, ref.cards.size() - 1)(rng);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < ref.cards.size(); ++i) {
      if (i != q) order.push_back(i);
    }
    const auto base = lib.marginal(q).probs();
    for (int k = 0; k < 5; ++k) {
      std::shuffle(order.begin(), order.end(), rng);
      order_free = order_free && max_abs_diff(lib.marginal(q, order).probs(), base) <= 1e-12;
    }
  }
  if (!order_free) failed.push_back("elimination order");

  std::string detail = "normalization, argmax invariance, canonical reduction, preprocess idempotence, elimination order";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{mdd_exhaustive, mdd_uniform,    bn_onehot_and_random, bn_case_study,
                                                       metric_values,  end_to_end,     engine_behaviour,     properties};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
