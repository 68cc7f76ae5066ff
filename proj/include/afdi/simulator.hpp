#pragma once

// Deterministic synthetic telemetry with labelled fault injection.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afdi/nbc.hpp"
#include "afdi/state_model.hpp"

namespace afdi {

/// Recorded in every output so fixtures can be regenerated elsewhere.
inline constexpr const char* kGeneratorAlgorithm = "mt19937_64/seed_seq(seed_lo,seed_hi,host,vm+1,metric)/u53";

/// "<level>.<name>", e.g. "vm.cpu" or "host.storage_io".
std::string metric_key(const ComponentId& metric);
ComponentId parse_metric_key(std::string_view key);

/// The monitored series per (host, vm) scope, in emission order:
/// host.cpu, host.storage_io, vm.cpu, vm.memory, vm.network, vm.throughput.
/// Throughput is reported as a percent of the nominal transaction rate.
const std::vector<ComponentId>& standard_metrics();

/// Quartile buckets {0,25,50,75,100} for every standard metric.
std::map<std::string, DiscretizationSpec> standard_discretization();

inline constexpr const char* kNormalLabel = "normal";

enum class FaultKind { kCpuHog, kMemoryLeak, kNetworkOverhead, kEndlessLoop, kSeriousCrash };

std::string_view fault_kind_name(FaultKind kind) noexcept;   // scenario spelling, e.g. "cpu_hog"
std::string_view fault_label(FaultKind kind) noexcept;       // class label, e.g. "high-cpu-usage"
FaultKind parse_fault_kind(std::string_view name);

/// normal, high-cpu-usage, memory-shortage, network-overhead, endless-loop,
/// serious-crash.
const std::vector<std::string>& standard_fault_classes();
/// Standard metrics as 4-valued attributes over the standard classes.
AttributeSchema standard_schema();

struct MetricBaseline {
  double mean = 0.0;
  double jitter = 0.0;  // half-width of the uniform noise, percent points
};

/// Intensity semantics per kind (I in [0, 1], values clamped to [0, 100]):
///  cpu_hog          vm.cpu ~ (75 + 25 I) +- jitter; bucket 3 whenever 25 I > jitter.
///  memory_leak      vm.memory ramps linearly from its baseline mean to 75 + 25 I,
///                   reaching the target in the last window of the span.
///  network_overhead vm.network ~ (75 + 25 I) +- jitter.
///  endless_loop     vm.cpu and host.cpu in [80, 80 + 20 I], never below 80;
///                   vm.throughput in (0, 10%] of its baseline mean.
///  serious_crash    `metric` pinned at 100.
struct FaultInjection {
  FaultKind kind = FaultKind::kCpuHog;
  std::string host;
  std::optional<std::string> vm;
  std::int64_t start = 0;  // first window
  std::int64_t end = 0;    // one past the last window
  double intensity = 1.0;
  std::optional<std::string> metric;  // serious_crash only: metric key
};

struct Scenario {
  std::uint64_t seed = 0;
  std::int64_t duration = 0;  // windows
  std::int64_t window_ms = 1000;
  std::size_t hosts = 1;
  std::size_t vms_per_host = 1;
  std::map<std::string, MetricBaseline> baseline;  // by metric key
  std::vector<FaultInjection> injections;

  /// Throws kScenario on any violated invariant, including two injections
  /// touching the same series in overlapping windows.
  void validate() const;

  static Scenario from_json(std::string_view text);
  static Scenario load(const std::string& path);
};

std::string host_name(std::size_t host);
std::string vm_name(std::size_t host, std::size_t vm);

struct WindowLabel {
  std::int64_t window = 0;
  std::string host;
  std::string vm;
  std::string label;

  bool operator==(const WindowLabel&) const = default;
};

struct SimulationOutput {
  std::vector<MetricSample> samples;
  std::vector<WindowLabel> labels;
};

SimulationOutput generate(const Scenario& scenario);

/// Labels CSV with a leading "# generator=..." metadata comment.
std::string labels_to_csv(std::span<const WindowLabel> labels, const Scenario& scenario);
std::vector<WindowLabel> labels_from_csv(std::string_view text);

/// One example per labelled (window, scope), attributes in schema order and
/// discretized with `specs` (keyed by attribute name). Throws kAlignment when
/// labels and samples do not cover the same windows and scopes.
std::vector<LabeledExample> to_training_set(std::span<const MetricSample> samples,
                                            std::span<const WindowLabel> labels,
                                            const std::map<std::string, DiscretizationSpec>& specs,
                                            const AttributeSchema& schema, std::int64_t window_ms = 1000);

}  // namespace afdi
