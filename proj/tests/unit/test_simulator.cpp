#include <doctest.h>

#include <map>
#include <set>

#include "afdi/io.hpp"
#include "afdi/simulator.hpp"
#include "oracles.hpp"

using namespace afdi;

namespace {

// Bucket of every (window, metric key) for the single VM scope h0-vm0.
std::map<std::int64_t, std::map<std::string, unsigned>> buckets_by_window(const SimulationOutput& sim) {
  const auto specs = standard_discretization();
  std::map<std::int64_t, std::map<std::string, unsigned>> out;
  for (const auto& s : sim.samples) {
    if (s.host_id != "h0" || (s.vm_id && *s.vm_id != "h0-vm0")) continue;
    const auto key = metric_key(s.metric);
    out[s.timestamp / 1000][key] = discretize(s.value, specs.at(key)).value;
  }
  return out;
}

std::string render(const SimulationOutput& sim) {
  std::string out;
  for (const auto& s : sim.samples) out += to_json_line(s) + "\n";
  return out;
}

}  // namespace

TEST_CASE("null injection stays within baseline jitter") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_healthy.json"));
  const auto sim = generate(scenario);
  CHECK(sim.samples.size() == 60 * (2 + 2 * 4));
  CHECK(sim.labels.size() == 120);
  for (const auto& l : sim.labels) CHECK(l.label == "normal");
  for (const auto& s : sim.samples) {
    const auto& b = scenario.baseline.at(metric_key(s.metric));
    CHECK(s.value >= b.mean - b.jitter);
    CHECK(s.value <= b.mean + b.jitter);
  }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  auto scenario = Scenario::load(oracle::fixture("scenario_800.json"));
  const auto a = render(generate(scenario));
  CHECK(a == render(generate(scenario)));
  scenario.seed += 1;
  CHECK(io::sha256_hex(a) != io::sha256_hex(render(generate(scenario))));
}

TEST_CASE("endless loop span: CPU bucket 3 at both levels, throughput bucket 0") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_endless_loop.json"));
  const auto sim = generate(scenario);
  const auto b = buckets_by_window(sim);
  for (std::int64_t w = 20; w < 40; ++w) {
    CHECK(b.at(w).at("vm.cpu") == 3);
    CHECK(b.at(w).at("host.cpu") == 3);
    CHECK(b.at(w).at("vm.throughput") == 0);
    CHECK(sim.labels[static_cast<std::size_t>(w)].label == "endless-loop");
  }
  for (const auto& s : sim.samples) {
    const auto w = s.timestamp / 1000;
    if (w >= 20 && w < 40 && s.metric.name == "cpu") CHECK(s.value >= 80.0);
  }
}

TEST_CASE("label soundness and separability on the 800-window scenario") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_800.json"));
  const auto sim = generate(scenario);
  const auto b = buckets_by_window(sim);
  REQUIRE(sim.labels.size() == 800);

  std::map<std::string, std::pair<int, int>> hits;  // label -> (target met, windows)
  std::map<std::string, std::set<std::string>> signature_labels;
  int memory_prev = 0;
  for (const auto& l : sim.labels) {
    const auto& wb = b.at(l.window);
    bool met = false;
    if (l.label == "high-cpu-usage") met = wb.at("vm.cpu") == 3;
    else if (l.label == "network-overhead") met = wb.at("vm.network") == 3;
    else if (l.label == "endless-loop") met = wb.at("vm.cpu") == 3 && wb.at("host.cpu") == 3 && wb.at("vm.throughput") == 0;
    else if (l.label == "serious-crash") met = wb.at("host.storage_io") == 3;
    else if (l.label == "memory-shortage") {
      met = static_cast<int>(wb.at("vm.memory")) >= memory_prev && wb.at("vm.memory") >= 1;
      memory_prev = static_cast<int>(wb.at("vm.memory"));
    } else {
      met = true;
      for (const auto& [k, v] : wb) CHECK_MESSAGE(v < 3, k << " in the fault bucket outside any span");
    }
    ++hits[l.label].second;
    hits[l.label].first += met ? 1 : 0;

    // Early leak windows that have not left the baseline bucket are not
    // distinguishable from normal by construction; leave them out.
    if (l.label == "memory-shortage" && wb.at("vm.memory") <= 1) continue;
    std::string sig;
    for (const auto& [k, v] : wb) sig += std::to_string(v);
    signature_labels[sig].insert(l.label);
  }
  for (const auto& [label, h] : hits) {
    CAPTURE(label);
    CHECK(h.first >= 0.95 * h.second);
  }
  for (const auto& [sig, labels] : signature_labels) {
    CAPTURE(sig);
    CHECK(labels.size() == 1);
  }
  CHECK(b.at(299).at("vm.memory") == 3);
}

TEST_CASE("training set from the 800-window scenario") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_800.json"));
  const auto sim = generate(scenario);
  const auto schema = standard_schema();
  const auto data = to_training_set(sim.samples, sim.labels, standard_discretization(), schema);
  CHECK(data.size() == 800);
  CHECK(schema == AttributeSchema::load(oracle::fixture("nbc_schema.json")));
  CHECK(to_training_csv(data, schema) == io::read_file(oracle::fixture("training_800.csv")));

  const std::vector<MetricSample> none;
  const std::vector<WindowLabel> no_labels;
  CHECK(to_training_set(none, no_labels, standard_discretization(), schema).empty());
}

TEST_CASE("CPU at 90 percent becomes attribute value 3") {
  const auto schema = standard_schema();
  std::vector<MetricSample> samples;
  for (const auto& m : standard_metrics()) {
    samples.push_back({0, "h0", m.level == Scope::kVm ? std::optional<std::string>("h0-vm0") : std::nullopt, m,
                       m.name == "cpu" && m.level == Scope::kVm ? 90.0 : 10.0});
  }
  const std::vector<WindowLabel> labels{{0, "h0", "h0-vm0", "high-cpu-usage"}};
  const auto data = to_training_set(samples, labels, standard_discretization(), schema);
  REQUIRE(data.size() == 1);
  CHECK(data[0].features[2] == 3u);
  CHECK(data[0].features[0] == 0u);
}

TEST_CASE("misaligned inputs") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_healthy.json"));
  const auto sim = generate(scenario);
  const auto schema = standard_schema();
  auto extra = sim.labels;
  extra.push_back({999, "h0", "h0-vm0", "normal"});
  try {
    to_training_set(sim.samples, extra, standard_discretization(), schema);
    FAIL("expected alignment error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlignment);
  }
  auto missing = sim.labels;
  missing.pop_back();
  CHECK_THROWS_AS(to_training_set(sim.samples, missing, standard_discretization(), schema), Error);
  auto twice = sim.labels;
  twice.push_back(twice.front());
  CHECK_THROWS_AS(to_training_set(sim.samples, twice, standard_discretization(), schema), Error);
}

TEST_CASE("scenario validation") {
  auto expect_scenario_error = [](const std::string& text) {
    try {
      Scenario::from_json(text);
      FAIL("expected scenario error for " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kScenario);
    }
  };
  expect_scenario_error(R"({"seed":1,"duration":0})");
  expect_scenario_error(R"({"seed":1,"duration":10,"baseline":{"vm.cpu":{"mean":30,"jitter":-1}}})");
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"cpu_hog","host":"h0","vm":"h0-vm0","start":5,"end":11}]})");
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"cpu_hog","host":"h0","vm":"h0-vm0","start":5,"end":5}]})");
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"cpu_hog","host":"h9","vm":"h9-vm0","start":1,"end":5}]})");
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"warp","host":"h0","vm":"h0-vm0","start":1,"end":5}]})");
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"cpu_hog","host":"h0","vm":"h0-vm0","start":1,"end":5,"intensity":1.5}]})");
  // same series, overlapping windows
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[
    {"kind":"cpu_hog","host":"h0","vm":"h0-vm0","start":1,"end":5},
    {"kind":"endless_loop","host":"h0","vm":"h0-vm0","start":4,"end":8}]})");
  // different series may overlap
  CHECK_NOTHROW(Scenario::from_json(R"({"seed":1,"duration":10,"injections":[
    {"kind":"cpu_hog","host":"h0","vm":"h0-vm0","start":1,"end":5},
    {"kind":"network_overhead","host":"h0","vm":"h0-vm0","start":1,"end":5}]})"));
  expect_scenario_error(R"({"seed":1,"duration":10,"injections":[{"kind":"serious_crash","host":"h0","start":1,"end":5}]})");
}

TEST_CASE("labels csv round trip with generator metadata") {
  const auto scenario = Scenario::load(oracle::fixture("scenario_endless_loop.json"));
  const auto sim = generate(scenario);
  const auto csv = labels_to_csv(sim.labels, scenario);
  CHECK(csv.rfind(std::string("# generator=") + kGeneratorAlgorithm, 0) == 0);
  CHECK(labels_from_csv(csv) == sim.labels);
}

TEST_CASE("metric keys") {
  CHECK(metric_key({"cpu", Scope::kVm}) == "vm.cpu");
  CHECK(parse_metric_key("host.storage_io") == ComponentId{"storage_io", Scope::kHost});
  CHECK_THROWS_AS(parse_metric_key("cpu"), Error);
  CHECK_THROWS_AS(parse_metric_key("rack.cpu"), Error);
}
