#pragma once

// Multi-state domain types shared by every module: component identities,
// state levels, state vectors, percent discretization and telemetry samples.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afdi/error.hpp"

namespace afdi {

enum class Scope { kVm, kHost };

std::string_view scope_name(Scope scope) noexcept;
Scope parse_scope(std::string_view text);

struct ComponentId {
  std::string name;
  Scope level = Scope::kVm;

  auto operator<=>(const ComponentId&) const = default;
};

/// Discrete state of one component. 0 = normal work, 1 = minor fault,
/// 2 = serious fault for the three-state severity scale; percent buckets use
/// 0..3.
struct StateLevel {
  unsigned value = 0;

  constexpr StateLevel() = default;
  constexpr explicit StateLevel(unsigned v) : value(v) {}

  auto operator<=>(const StateLevel&) const = default;
};

inline constexpr StateLevel kNormal{0};
inline constexpr StateLevel kMinorFault{1};
inline constexpr StateLevel kSeriousFault{2};

struct Assignment {
  std::string component;
  StateLevel level;

  bool operator==(const Assignment&) const = default;
};

/// One state per component, in the owning model's component order.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::vector<Assignment> assignments)
      : assignments_(std::move(assignments)) {}

  /// Pairs names and levels positionally.
  static StateVector from_levels(std::span<const std::string> names,
                                 std::span<const StateLevel> levels);

  const std::vector<Assignment>& assignments() const { return assignments_; }
  std::size_t size() const { return assignments_.size(); }

  /// Throws kInput unless the vector names exactly `components`, in order.
  std::vector<StateLevel> levels_for(std::span<const std::string> components) const;

  bool operator==(const StateVector&) const = default;

 private:
  std::vector<Assignment> assignments_;
};

/// Percent thresholds for one metric. Intervals are [b_i, b_{i+1}) except
/// the last, which is closed. `interval_levels[i]` is the level of interval i.
class DiscretizationSpec {
 public:
  /// Identity interval->level table.
  static DiscretizationSpec create(ComponentId component, std::vector<double> boundaries);
  static DiscretizationSpec create(ComponentId component, std::vector<double> boundaries,
                                   std::vector<StateLevel> interval_levels);

  /// The {0,25,50,75,100} CPU-usage quartiles.
  static DiscretizationSpec quartiles(ComponentId component);

  const ComponentId& component() const { return component_; }
  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::vector<StateLevel>& interval_levels() const { return interval_levels_; }
  std::size_t interval_count() const { return boundaries_.size() - 1; }
  /// Number of distinct output levels (max mapped level + 1).
  unsigned level_count() const;

 private:
  DiscretizationSpec() = default;

  ComponentId component_;
  std::vector<double> boundaries_;
  std::vector<StateLevel> interval_levels_;
};

/// Throws kOutOfRange when value lies outside [first, last] boundary and
/// kInvalidArgument for non-finite values.
StateLevel discretize(double value, const DiscretizationSpec& spec);

/// Maps usage buckets onto the three fault states.
class SeverityMap {
 public:
  /// {0,1} -> normal, {2} -> minor, {3} -> serious.
  SeverityMap();
  explicit SeverityMap(std::vector<StateLevel> table);

  StateLevel operator()(StateLevel usage) const;
  const std::vector<StateLevel>& table() const { return table_; }

 private:
  std::vector<StateLevel> table_;
};

StateLevel severity_map(StateLevel usage, const SeverityMap& map = SeverityMap{});

struct MetricSample {
  std::int64_t timestamp = 0;  // monotonic milliseconds
  std::string host_id;
  std::optional<std::string> vm_id;
  ComponentId metric;
  double value = 0.0;

  bool operator==(const MetricSample&) const = default;
};

/// Checks vm_id presence against metric.level.
void validate(const MetricSample& sample);

/// One JSON object per line: timestamp, host_id, vm_id, metric, value, level.
std::string to_json_line(const MetricSample& sample);
MetricSample metric_sample_from_json_line(std::string_view line);

std::vector<MetricSample> read_metric_samples(const std::string& path);
void write_metric_samples(const std::string& path, std::span<const MetricSample> samples);

}  // namespace afdi
