#pragma once

// Gate-then-diagnose pipeline: preprocess metric streams, classify window
// severity with the MDD, run the Naive Bayes diagnosis on minor anomalies and
// hand alarms to virtual sensors.

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "afdi/mdd.hpp"
#include "afdi/nbc.hpp"
#include "afdi/state_model.hpp"

namespace afdi {

/// Sliding-median outlier replacement (Hampel filter) plus range policy.
struct PreprocessPolicy {
  static constexpr double kMadScale = 1.4826;
  static constexpr double kEpsilon = 1e-9;
  static constexpr int kMaxPasses = 64;

  std::size_t window = 11;  // odd, centred on the sample
  double z_cutoff = 3.0;
  bool clamp = true;  // otherwise out-of-range percent samples are dropped
  /// Metric names whose values are not percentages (no range policy).
  std::set<std::string> non_percent_metrics{"latency"};

  void validate() const;
};

/// Per (host, vm, metric, level) series, in time order. Out-of-range percent
/// values are clamped or dropped first; then samples whose distance from the
/// window median exceeds z_cutoff scaled MADs are replaced by that median,
/// repeating until nothing changes so the result is a fixed point.
/// Throws kSequencing when a series goes backwards in time.
std::vector<MetricSample> preprocess(std::span<const MetricSample> samples, const PreprocessPolicy& policy = {});

enum class AlarmTrigger { kSeverityGate, kNbcDiagnosis };
std::string_view trigger_name(AlarmTrigger trigger) noexcept;

struct Alarm {
  std::int64_t timestamp = 0;
  std::string host_id;
  std::optional<std::string> vm_id;
  StateLevel severity;
  AlarmTrigger trigger = AlarmTrigger::kSeverityGate;
  /// Posterior over the model's classes, in class order.
  std::optional<std::vector<std::pair<std::string, double>>> diagnosis;
  std::optional<std::string> top_cause;

  bool operator==(const Alarm&) const = default;
};

/// Keys: timestamp, host_id, vm_id, severity, trigger, then diagnosis and
/// top_cause only when present.
std::string to_json_line(const Alarm& alarm);

/// Readings of one (host, vm) scope for one window, keyed by metric key.
struct Window {
  std::int64_t index = 0;
  std::int64_t timestamp = 0;
  std::string host_id;
  std::optional<std::string> vm_id;
  std::map<std::string, double> values;
};

/// Discretized buckets of one window, keyed by metric key.
struct WindowStates {
  std::int64_t index = 0;
  std::int64_t timestamp = 0;
  std::string host_id;
  std::optional<std::string> vm_id;
  std::map<std::string, StateLevel> buckets;
  StateLevel severity;
};

struct EndlessLoopRule {
  std::size_t windows = 3;
  std::string vm_cpu = "vm.cpu";
  std::string host_cpu = "host.cpu";
  std::string throughput = "vm.throughput";
  StateLevel cpu_bucket{3};
  StateLevel throughput_bucket{0};
  std::string cause = "endless-loop";
};

/// Fires when the last `rule.windows` entries of `history` are consecutive
/// windows where VM and host CPU both sit in the top bucket while
/// throughput sits in the bottom one. The alarm describes the newest window.
std::optional<Alarm> endless_loop_rule(std::span<const WindowStates> history, const EndlessLoopRule& rule,
                                       std::span<const std::string> classes);

struct MetricConfig {
  ComponentId metric;
  DiscretizationSpec spec;
  std::optional<std::string> severity_component;
  SeverityMap severity;
};

struct EngineConfig {
  std::int64_t window_ms = 1000;
  PreprocessPolicy preprocess;
  std::vector<MetricConfig> metrics;
  std::shared_ptr<const Mdd> severity_model;
  std::shared_ptr<const NbcModel> model;
  EndlessLoopRule endless_loop;

  /// Throws kInvalidModel when metrics, MDD components and NBC attributes
  /// disagree.
  void validate() const;

  /// JSON file; model and structure-table paths are relative to the config
  /// file and checked against their recorded sha256.
  static EngineConfig load(const std::string& path);
  /// quartile buckets for the standard metrics, max-severity MDD over
  /// cpu/memory/network/storage_io.
  static EngineConfig standard(std::shared_ptr<const NbcModel> model);
};

struct VirtualSensor {
  std::string id;
  bool active = true;
  std::int64_t frequency_ms = 1000;
  std::function<void(const Alarm&)> sink;
};

struct SensorStatus {
  bool active = false;
  std::int64_t frequency_ms = 0;
  std::uint64_t delivered = 0;
  std::uint64_t superseded = 0;
  std::optional<std::int64_t> last_delivery_ms;
  std::optional<Alarm> last_delivered;
  std::optional<Alarm> pending;
};

/// In-process alarm subscribers on a simulated clock. Each sensor delivers at
/// most one alarm per frequency interval: an alarm raised at t is held until
/// the end of its interval, and a newer alarm in the same interval replaces it.
class SensorHub {
 public:
  void register_sensor(VirtualSensor sensor);
  void set_active(const std::string& id, bool active);
  void set_frequency(const std::string& id, std::int64_t frequency_ms);
  SensorStatus status(const std::string& id) const;
  std::vector<std::string> sensor_ids() const;

  /// Advances the clock to the alarm time, then queues it on every active
  /// sensor. Returns the number of sensors reached.
  std::size_t dispatch(const Alarm& alarm);
  void advance_clock(std::int64_t now_ms);
  /// Delivers everything still pending.
  void flush();

 private:
  struct Entry {
    VirtualSensor sensor;
    SensorStatus status;
    std::int64_t due_ms = 0;
  };
  Entry& find(const std::string& id);
  const Entry& find(const std::string& id) const;
  static void deliver(Entry& entry, std::int64_t at_ms);

  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

class DiagnosisEngine {
 public:
  explicit DiagnosisEngine(EngineConfig config);

  const EngineConfig& config() const { return config_; }

  /// Groups preprocessed samples into per-scope windows ordered by
  /// (window, host, vm). Host-level readings are shared by every VM scope of
  /// that host.
  std::vector<Window> assemble_windows(std::span<const MetricSample> samples) const;

  /// Discretize, gate on severity, diagnose. Throws kIncompleteWindow when a
  /// configured metric is missing.
  std::vector<Alarm> step(const Window& window);

  /// preprocess + assemble + step over the whole stream, then flush sensors.
  std::vector<Alarm> run(std::span<const MetricSample> samples);

  WindowStates discretize_window(const Window& window) const;

  SensorHub& sensors() { return sensors_; }
  std::vector<Alarm> log() const;
  std::string log_jsonl() const;
  std::uint64_t nbc_invocations() const { return nbc_invocations_.load(); }
  std::uint64_t windows_processed() const { return windows_processed_.load(); }

 private:
  Alarm make_alarm(const WindowStates& states, AlarmTrigger trigger) const;
  void append(const Alarm& alarm);

  EngineConfig config_;
  std::vector<std::string> severity_components_;
  SensorHub sensors_;

  mutable std::mutex history_mutex_;
  std::map<std::pair<std::string, std::string>, std::deque<WindowStates>> history_;

  mutable std::mutex log_mutex_;
  std::vector<Alarm> log_;

  std::atomic<std::uint64_t> nbc_invocations_{0};
  std::atomic<std::uint64_t> windows_processed_{0};
};

}  // namespace afdi
