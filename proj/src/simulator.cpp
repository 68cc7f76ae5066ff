#include "afdi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "afdi/io.hpp"

namespace afdi {

using nlohmann::json;

std::string metric_key(const ComponentId& metric) {
  return std::string(scope_name(metric.level)) + "." + metric.name;
}

ComponentId parse_metric_key(std::string_view key) {
  const auto dot = key.find('.');
  if (dot == std::string_view::npos || dot + 1 == key.size()) {
    fail(ErrorCode::kInput, "metric key '" + std::string(key) + "' is not <level>.<name>");
  }
  return ComponentId{std::string(key.substr(dot + 1)), parse_scope(key.substr(0, dot))};
}

const std::vector<ComponentId>& standard_metrics() {
  static const std::vector<ComponentId> metrics{
      {"cpu", Scope::kHost},    {"storage_io", Scope::kHost}, {"cpu", Scope::kVm},
      {"memory", Scope::kVm},   {"network", Scope::kVm},      {"throughput", Scope::kVm},
  };
  return metrics;
}

std::map<std::string, DiscretizationSpec> standard_discretization() {
  std::map<std::string, DiscretizationSpec> specs;
  for (const auto& m : standard_metrics()) specs.emplace(metric_key(m), DiscretizationSpec::quartiles(m));
  return specs;
}

std::string_view fault_kind_name(FaultKind kind) noexcept {
  switch (kind) {
    case FaultKind::kCpuHog: return "cpu_hog";
    case FaultKind::kMemoryLeak: return "memory_leak";
    case FaultKind::kNetworkOverhead: return "network_overhead";
    case FaultKind::kEndlessLoop: return "endless_loop";
    case FaultKind::kSeriousCrash: return "serious_crash";
  }
  return "unknown";
}

std::string_view fault_label(FaultKind kind) noexcept {
  switch (kind) {
    case FaultKind::kCpuHog: return "high-cpu-usage";
    case FaultKind::kMemoryLeak: return "memory-shortage";
    case FaultKind::kNetworkOverhead: return "network-overhead";
    case FaultKind::kEndlessLoop: return "endless-loop";
    case FaultKind::kSeriousCrash: return "serious-crash";
  }
  return "unknown";
}

FaultKind parse_fault_kind(std::string_view name) {
  for (auto kind : {FaultKind::kCpuHog, FaultKind::kMemoryLeak, FaultKind::kNetworkOverhead, FaultKind::kEndlessLoop,
                    FaultKind::kSeriousCrash}) {
    if (fault_kind_name(kind) == name) return kind;
  }
  fail(ErrorCode::kScenario, "unknown fault kind '" + std::string(name) + "'");
}

const std::vector<std::string>& standard_fault_classes() {
  static const std::vector<std::string> classes{kNormalLabel,       "high-cpu-usage", "memory-shortage",
                                                "network-overhead", "endless-loop",   "serious-crash"};
  return classes;
}

AttributeSchema standard_schema() {
  std::vector<Attribute> attributes;
  for (const auto& m : standard_metrics()) attributes.push_back({metric_key(m), 4});
  return AttributeSchema(std::move(attributes), standard_fault_classes());
}

std::string host_name(std::size_t host) { return "h" + std::to_string(host); }
std::string vm_name(std::size_t host, std::size_t vm) { return host_name(host) + "-vm" + std::to_string(vm); }

namespace {

const std::map<std::string, MetricBaseline>& default_baseline() {
  static const std::map<std::string, MetricBaseline> baseline{
      {"host.cpu", {35.0, 2.0}},    {"host.storage_io", {20.0, 2.0}}, {"vm.cpu", {30.0, 2.0}},
      {"vm.memory", {40.0, 2.0}},   {"vm.network", {30.0, 2.0}},      {"vm.throughput", {60.0, 2.0}},
  };
  return baseline;
}

// (host, vm or "", metric key)
using SeriesId = std::tuple<std::string, std::string, std::string>;

std::vector<SeriesId> affected_series(const FaultInjection& inj) {
  const std::string vm = inj.vm.value_or("");
  switch (inj.kind) {
    case FaultKind::kCpuHog: return {{inj.host, vm, "vm.cpu"}};
    case FaultKind::kMemoryLeak: return {{inj.host, vm, "vm.memory"}};
    case FaultKind::kNetworkOverhead: return {{inj.host, vm, "vm.network"}};
    case FaultKind::kEndlessLoop: return {{inj.host, vm, "vm.cpu"}, {inj.host, vm, "vm.throughput"}, {inj.host, "", "host.cpu"}};
    case FaultKind::kSeriousCrash: {
      const auto key = inj.metric.value_or("");
      const bool host_level = parse_metric_key(key).level == Scope::kHost;
      return {{inj.host, host_level ? "" : vm, key}};
    }
  }
  return {};
}

bool targets_scope(const FaultInjection& inj, const std::string& host, const std::string& vm) {
  return inj.host == host && (!inj.vm || *inj.vm == vm);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void Scenario::validate() const {
  if (duration <= 0) fail(ErrorCode::kScenario, "duration must be positive");
  if (window_ms <= 0) fail(ErrorCode::kScenario, "window_ms must be positive");
  if (hosts == 0 || vms_per_host == 0) fail(ErrorCode::kScenario, "topology needs at least one host and one VM");
  for (const auto& m : standard_metrics()) {
    const auto key = metric_key(m);
    const auto it = baseline.find(key);
    if (it == baseline.end()) fail(ErrorCode::kScenario, "no baseline for '" + key + "'");
    if (!(it->second.jitter >= 0.0)) fail(ErrorCode::kScenario, "negative jitter for '" + key + "'");
    if (!(it->second.mean >= 0.0 && it->second.mean <= 100.0)) fail(ErrorCode::kScenario, "baseline mean of '" + key + "' outside [0, 100]");
  }
  std::set<std::string> host_ids;
  std::set<std::pair<std::string, std::string>> vm_ids;
  for (std::size_t h = 0; h < hosts; ++h) {
    host_ids.insert(host_name(h));
    for (std::size_t v = 0; v < vms_per_host; ++v) vm_ids.emplace(host_name(h), vm_name(h, v));
  }
  for (std::size_t i = 0; i < injections.size(); ++i) {
    const auto& inj = injections[i];
    const auto where = "injection " + std::to_string(i) + " (" + std::string(fault_kind_name(inj.kind)) + ")";
    if (!(inj.start >= 0 && inj.start < inj.end && inj.end <= duration)) {
      fail(ErrorCode::kScenario, where + " needs 0 <= start < end <= duration");
    }
    if (!(inj.intensity >= 0.0 && inj.intensity <= 1.0)) fail(ErrorCode::kScenario, where + " intensity outside [0, 1]");
    if (!host_ids.contains(inj.host)) fail(ErrorCode::kScenario, where + " targets unknown host '" + inj.host + "'");
    if (inj.vm && !vm_ids.contains({inj.host, *inj.vm})) fail(ErrorCode::kScenario, where + " targets unknown vm '" + *inj.vm + "'");
    if (inj.kind == FaultKind::kSeriousCrash) {
      if (!inj.metric) fail(ErrorCode::kScenario, where + " needs a metric");
      const auto metric = parse_metric_key(*inj.metric);
      if (!baseline.contains(*inj.metric)) fail(ErrorCode::kScenario, where + " targets unmonitored metric '" + *inj.metric + "'");
      if ((metric.level == Scope::kVm) != inj.vm.has_value()) {
        fail(ErrorCode::kScenario, where + ": vm target must match the metric's level");
      }
    } else {
      if (inj.metric) fail(ErrorCode::kScenario, where + ": only serious_crash takes a metric");
      if (!inj.vm) fail(ErrorCode::kScenario, where + " needs a vm target");
    }
  }
  for (std::size_t i = 0; i < injections.size(); ++i) {
    for (std::size_t j = i + 1; j < injections.size(); ++j) {
      const auto& a = injections[i];
      const auto& b = injections[j];
      if (a.end <= b.start || b.end <= a.start) continue;
      const auto sa = affected_series(a);
      for (const auto& s : affected_series(b)) {
        if (std::find(sa.begin(), sa.end(), s) != sa.end()) {
          fail(ErrorCode::kScenario, "injections " + std::to_string(i) + " and " + std::to_string(j) +
                                         " overlap on " + std::get<2>(s) + " of " + std::get<0>(s) +
                                         (std::get<1>(s).empty() ? "" : "/" + std::get<1>(s)));
        }
      }
    }
  }
}

Scenario Scenario::from_json(std::string_view text) {
  Scenario s;
  try {
    const auto j = json::parse(text);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.duration = j.at("duration").get<std::int64_t>();
    s.window_ms = j.value("window_ms", std::int64_t{1000});
    if (j.contains("topology")) {
      s.hosts = j["topology"].value("hosts", std::size_t{1});
      s.vms_per_host = j["topology"].value("vms_per_host", std::size_t{1});
    }
    s.baseline = default_baseline();
    if (j.contains("baseline")) {
      for (const auto& [key, b] : j["baseline"].items()) {
        parse_metric_key(key);
        auto& entry = s.baseline[key];
        entry.mean = b.value("mean", entry.mean);
        entry.jitter = b.value("jitter", entry.jitter);
      }
    }
    if (j.contains("injections")) {
      for (const auto& ji : j["injections"]) {
        FaultInjection inj;
        inj.kind = parse_fault_kind(ji.at("kind").get<std::string>());
        inj.host = ji.at("host").get<std::string>();
        if (ji.contains("vm") && !ji["vm"].is_null()) inj.vm = ji["vm"].get<std::string>();
        inj.start = ji.at("start").get<std::int64_t>();
        inj.end = ji.at("end").get<std::int64_t>();
        inj.intensity = ji.value("intensity", 1.0);
        if (ji.contains("metric")) inj.metric = ji["metric"].get<std::string>();
        s.injections.push_back(std::move(inj));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kScenario, std::string("malformed scenario: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kScenario, e.what());
  }
  s.validate();
  return s;
}

Scenario Scenario::load(const std::string& path) {
  try {
    return from_json(io::read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

SimulationOutput generate(const Scenario& scenario) {
  scenario.validate();
  const auto& metrics = standard_metrics();
  const auto seed_lo = static_cast<std::uint32_t>(scenario.seed & 0xffffffffu);
  const auto seed_hi = static_cast<std::uint32_t>(scenario.seed >> 32);

  struct Series {
    std::string host;
    std::optional<std::string> vm;
    std::size_t metric;
    std::mt19937_64 rng;
    std::vector<const FaultInjection*> injections;
  };
  // Emission order inside a window: host metrics, then each VM's metrics.
  std::vector<Series> series;
  for (std::size_t h = 0; h < scenario.hosts; ++h) {
    auto add = [&](std::optional<std::size_t> v, std::size_t m) {
      std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(h),
                        static_cast<std::uint32_t>(v ? *v + 1 : 0), static_cast<std::uint32_t>(m)};
      Series s{host_name(h), v ? std::optional(vm_name(h, *v)) : std::nullopt, m, std::mt19937_64(seq), {}};
      const SeriesId id{s.host, s.vm.value_or(""), metric_key(metrics[m])};
      for (const auto& inj : scenario.injections) {
        const auto affected = affected_series(inj);
        if (std::find(affected.begin(), affected.end(), id) != affected.end()) s.injections.push_back(&inj);
      }
      series.push_back(std::move(s));
    };
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      if (metrics[m].level == Scope::kHost) add(std::nullopt, m);
    }
    for (std::size_t v = 0; v < scenario.vms_per_host; ++v) {
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        if (metrics[m].level == Scope::kVm) add(v, m);
      }
    }
  }

  SimulationOutput out;
  out.samples.reserve(series.size() * static_cast<std::size_t>(scenario.duration));
  for (std::int64_t w = 0; w < scenario.duration; ++w) {
    for (auto& s : series) {
      const auto& metric = metrics[s.metric];
      const auto key = metric_key(metric);
      const auto& base = scenario.baseline.at(key);
      // Exactly one draw per series per window keeps streams aligned across
      // scenarios that differ only in their injections.
      const double u = uniform01(s.rng);
      const double noise = base.jitter * (2.0 * u - 1.0);
      double value = base.mean + noise;
      for (const auto* inj : s.injections) {
        if (w < inj->start || w >= inj->end) continue;
        const double target = 75.0 + 25.0 * inj->intensity;
        switch (inj->kind) {
          case FaultKind::kCpuHog:
          case FaultKind::kNetworkOverhead:
            value = target + noise;
            break;
          case FaultKind::kMemoryLeak: {
            const double progress = static_cast<double>(w - inj->start + 1) / static_cast<double>(inj->end - inj->start);
            value = base.mean + (target - base.mean) * progress + noise;
            break;
          }
          case FaultKind::kEndlessLoop:
            if (metric.name == "throughput") {
              value = 0.1 * base.mean * (1.0 - 0.5 * inj->intensity * u);
            } else {
              const double top = 80.0 + 20.0 * inj->intensity;
              value = top - std::min(base.jitter, 20.0 * inj->intensity) * u;
            }
            break;
          case FaultKind::kSeriousCrash:
            value = 100.0;
            break;
        }
      }
      value = std::clamp(value, 0.0, 100.0);
      out.samples.push_back(MetricSample{w * scenario.window_ms, s.host, s.vm, metric, value});
    }
    for (std::size_t h = 0; h < scenario.hosts; ++h) {
      for (std::size_t v = 0; v < scenario.vms_per_host; ++v) {
        WindowLabel label{w, host_name(h), vm_name(h, v), kNormalLabel};
        for (const auto& inj : scenario.injections) {
          if (w >= inj.start && w < inj.end && targets_scope(inj, label.host, label.vm)) {
            label.label = fault_label(inj.kind);
            break;
          }
        }
        out.labels.push_back(std::move(label));
      }
    }
  }
  return out;
}

std::string labels_to_csv(std::span<const WindowLabel> labels, const Scenario& scenario) {
  std::ostringstream out;
  out << "# generator=" << kGeneratorAlgorithm << " seed=" << scenario.seed << " duration=" << scenario.duration
      << " window_ms=" << scenario.window_ms << "\n";
  out << "window,host,vm,label\n";
  for (const auto& l : labels) out << l.window << "," << l.host << "," << l.vm << "," << l.label << "\n";
  return out.str();
}

std::vector<WindowLabel> labels_from_csv(std::string_view text) {
  auto rows = io::parse_csv(text);
  if (!rows.empty() && !rows.front().empty() && rows.front().front() == "window") rows.erase(rows.begin());
  std::vector<WindowLabel> labels;
  for (const auto& row : rows) {
    if (row.size() != 4) fail(ErrorCode::kInput, "label rows need window,host,vm,label");
    try {
      labels.push_back({std::stoll(row[0]), row[1], row[2], row[3]});
    } catch (const std::exception&) {
      fail(ErrorCode::kInput, "label row has a non-integer window '" + row[0] + "'");
    }
  }
  return labels;
}

std::vector<LabeledExample> to_training_set(std::span<const MetricSample> samples, std::span<const WindowLabel> labels,
                                            const std::map<std::string, DiscretizationSpec>& specs,
                                            const AttributeSchema& schema, std::int64_t window_ms) {
  if (window_ms <= 0) fail(ErrorCode::kInvalidArgument, "window_ms must be positive");
  using ScopeKey = std::tuple<std::int64_t, std::string, std::string>;  // window, host, vm ("" for host level)
  std::map<ScopeKey, std::map<std::string, double>> values;
  for (const auto& s : samples) {
    values[{s.timestamp / window_ms, s.host_id, s.vm_id.value_or("")}][metric_key(s.metric)] = s.value;
  }

  std::vector<ComponentId> attrs;
  for (const auto& a : schema.attributes()) {
    attrs.push_back(parse_metric_key(a.name));
    if (!specs.contains(a.name)) fail(ErrorCode::kInvalidArgument, "no discretization for attribute '" + a.name + "'");
  }

  std::set<ScopeKey> labelled;
  std::vector<LabeledExample> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const ScopeKey vm_key{l.window, l.host, l.vm};
    if (!labelled.insert(vm_key).second) {
      fail(ErrorCode::kAlignment, "window " + std::to_string(l.window) + " of " + l.vm + " is labelled twice");
    }
    const auto vm_it = values.find(vm_key);
    if (vm_it == values.end()) {
      fail(ErrorCode::kAlignment, "no samples for window " + std::to_string(l.window) + " of " + l.host + "/" + l.vm);
    }
    const auto host_it = values.find(ScopeKey{l.window, l.host, ""});
    LabeledExample ex;
    ex.features.resize(attrs.size());
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      const auto& name = schema.attributes()[a].name;
      const auto* scope_values = attrs[a].level == Scope::kVm ? &vm_it->second
                                 : host_it != values.end()    ? &host_it->second
                                                              : nullptr;
      if (scope_values == nullptr) continue;
      const auto v = scope_values->find(name);
      if (v == scope_values->end()) continue;
      ex.features[a] = discretize(v->second, specs.at(name)).value;
    }
    ex.label = schema.class_index(l.label);
    check_features(schema, ex.features);
    out.push_back(std::move(ex));
  }
  for (const auto& [key, _] : values) {
    if (!std::get<2>(key).empty() && !labelled.contains(key)) {
      fail(ErrorCode::kAlignment, "window " + std::to_string(std::get<0>(key)) + " of " + std::get<2>(key) + " has no label");
    }
  }
  return out;
}

}  // namespace afdi
