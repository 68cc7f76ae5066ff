#include "afdi/state_model.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "afdi/io.hpp"

namespace afdi {

using nlohmann::json;

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kInvalidModel: return "invalid_model";
    case ErrorCode::kInput: return "input";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kZeroLikelihood: return "zero_likelihood";
    case ErrorCode::kImpossibleEvidence: return "impossible_evidence";
    case ErrorCode::kLoad: return "load";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kSequencing: return "sequencing";
    case ErrorCode::kIncompleteWindow: return "incomplete_window";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kScenario: return "scenario";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::string_view scope_name(Scope scope) noexcept {
  return scope == Scope::kVm ? "vm" : "host";
}

Scope parse_scope(std::string_view text) {
  if (text == "vm") return Scope::kVm;
  if (text == "host") return Scope::kHost;
  fail(ErrorCode::kInput, "unknown measurement level '" + std::string(text) + "'");
}

StateVector StateVector::from_levels(std::span<const std::string> names,
                                     std::span<const StateLevel> levels) {
  if (names.size() != levels.size()) {
    fail(ErrorCode::kInput, "state vector has " + std::to_string(levels.size()) +
                                " levels for " + std::to_string(names.size()) + " components");
  }
  std::vector<Assignment> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back({names[i], levels[i]});
  return StateVector(std::move(out));
}

std::vector<StateLevel> StateVector::levels_for(std::span<const std::string> components) const {
  if (assignments_.size() != components.size()) {
    fail(ErrorCode::kInput, "state vector covers " + std::to_string(assignments_.size()) +
                                " components, model has " + std::to_string(components.size()));
  }
  std::vector<StateLevel> levels;
  levels.reserve(components.size());
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (assignments_[i].component != components[i]) {
      fail(ErrorCode::kInput, "expected component '" + components[i] + "' at position " +
                                  std::to_string(i) + ", got '" + assignments_[i].component + "'");
    }
    levels.push_back(assignments_[i].level);
  }
  return levels;
}

DiscretizationSpec DiscretizationSpec::create(ComponentId component, std::vector<double> boundaries) {
  std::vector<StateLevel> identity;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) identity.emplace_back(static_cast<unsigned>(i));
  return create(std::move(component), std::move(boundaries), std::move(identity));
}

DiscretizationSpec DiscretizationSpec::create(ComponentId component, std::vector<double> boundaries,
                                              std::vector<StateLevel> interval_levels) {
  if (component.name.empty()) fail(ErrorCode::kInvalidArgument, "component name is empty");
  if (boundaries.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "discretization of '" + component.name + "' needs at least two boundaries");
  }
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (!std::isfinite(boundaries[i]) || boundaries[i] < 0.0 || boundaries[i] > 100.0) {
      fail(ErrorCode::kInvalidArgument, "boundary outside [0, 100] for '" + component.name + "'");
    }
    if (i > 0 && !(boundaries[i] > boundaries[i - 1])) {
      fail(ErrorCode::kInvalidArgument, "boundaries of '" + component.name + "' are not strictly ascending");
    }
  }
  if (interval_levels.size() != boundaries.size() - 1) {
    fail(ErrorCode::kInvalidArgument, "interval->level table of '" + component.name + "' has " +
                                          std::to_string(interval_levels.size()) + " entries for " +
                                          std::to_string(boundaries.size() - 1) + " intervals");
  }
  DiscretizationSpec spec;
  spec.component_ = std::move(component);
  spec.boundaries_ = std::move(boundaries);
  spec.interval_levels_ = std::move(interval_levels);
  return spec;
}

DiscretizationSpec DiscretizationSpec::quartiles(ComponentId component) {
  return create(std::move(component), {0.0, 25.0, 50.0, 75.0, 100.0});
}

unsigned DiscretizationSpec::level_count() const {
  unsigned top = 0;
  for (auto level : interval_levels_) top = std::max(top, level.value);
  return top + 1;
}

StateLevel discretize(double value, const DiscretizationSpec& spec) {
  if (!std::isfinite(value)) {
    fail(ErrorCode::kInvalidArgument, "non-finite value for '" + spec.component().name + "'");
  }
  const auto& b = spec.boundaries();
  if (value < b.front() || value > b.back()) {
    std::ostringstream msg;
    msg << "value " << value << " outside [" << b.front() << ", " << b.back() << "] for '"
        << spec.component().name << "'";
    fail(ErrorCode::kOutOfRange, msg.str());
  }
  // First boundary strictly greater than value closes the interval; the
  // top boundary itself belongs to the last interval.
  const auto upper = std::upper_bound(b.begin(), b.end(), value);
  std::size_t interval = static_cast<std::size_t>(upper - b.begin());
  interval = interval == 0 ? 0 : interval - 1;
  interval = std::min(interval, spec.interval_count() - 1);
  return spec.interval_levels()[interval];
}

SeverityMap::SeverityMap() : table_{StateLevel{0}, StateLevel{0}, StateLevel{1}, StateLevel{2}} {}

SeverityMap::SeverityMap(std::vector<StateLevel> table) : table_(std::move(table)) {
  if (table_.empty()) fail(ErrorCode::kInvalidArgument, "severity map is empty");
  for (auto level : table_) {
    if (level > kSeriousFault) fail(ErrorCode::kInvalidArgument, "severity map targets a level above 2");
  }
}

StateLevel SeverityMap::operator()(StateLevel usage) const {
  if (usage.value >= table_.size()) {
    fail(ErrorCode::kOutOfRange, "usage level " + std::to_string(usage.value) + " has no severity mapping");
  }
  return table_[usage.value];
}

StateLevel severity_map(StateLevel usage, const SeverityMap& map) { return map(usage); }

void validate(const MetricSample& sample) {
  if (sample.host_id.empty()) fail(ErrorCode::kInput, "sample without host_id");
  if (sample.metric.name.empty()) fail(ErrorCode::kInput, "sample without metric name");
  const bool vm_level = sample.metric.level == Scope::kVm;
  if (vm_level != sample.vm_id.has_value()) {
    fail(ErrorCode::kInput, "metric '" + sample.metric.name + "' at level " +
                                std::string(scope_name(sample.metric.level)) +
                                (vm_level ? " requires" : " forbids") + " a vm_id");
  }
  if (!std::isfinite(sample.value)) fail(ErrorCode::kInput, "non-finite sample value");
}

std::string to_json_line(const MetricSample& sample) {
  nlohmann::ordered_json j;
  j["timestamp"] = sample.timestamp;
  j["host_id"] = sample.host_id;
  j["vm_id"] = sample.vm_id ? nlohmann::ordered_json(*sample.vm_id) : nlohmann::ordered_json(nullptr);
  j["metric"] = sample.metric.name;
  j["value"] = sample.value;
  j["level"] = scope_name(sample.metric.level);
  return j.dump();
}

MetricSample metric_sample_from_json_line(std::string_view line) {
  MetricSample sample;
  try {
    const auto j = json::parse(line);
    sample.timestamp = j.at("timestamp").get<std::int64_t>();
    sample.host_id = j.at("host_id").get<std::string>();
    if (const auto& vm = j.at("vm_id"); !vm.is_null()) sample.vm_id = vm.get<std::string>();
    sample.metric.name = j.at("metric").get<std::string>();
    sample.metric.level = parse_scope(j.at("level").get<std::string>());
    sample.value = j.at("value").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kInput, std::string("malformed metric sample: ") + e.what());
  }
  validate(sample);
  return sample;
}

std::vector<MetricSample> read_metric_samples(const std::string& path) {
  const auto text = io::read_file(path);
  std::vector<MetricSample> samples;
  std::size_t line_no = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    try {
      samples.push_back(metric_sample_from_json_line(line));
    } catch (const Error& e) {
      fail(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

void write_metric_samples(const std::string& path, std::span<const MetricSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json_line(s);
    out += '\n';
  }
  io::write_file(path, out);
}

}  // namespace afdi
