#include "afdi/engine.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <tuple>

#include "afdi/io.hpp"
#include "afdi/simulator.hpp"

namespace afdi {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Preprocessing

void PreprocessPolicy::validate() const {
  if (window < 3 || window % 2 == 0) fail(ErrorCode::kInvalidArgument, "preprocess window must be odd and >= 3");
  if (!(z_cutoff > 0.0)) fail(ErrorCode::kInvalidArgument, "z_cutoff must be positive");
}

namespace {

double median_of(std::vector<double>& v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// One Hampel pass over `values`; returns true if anything was replaced.
bool hampel_pass(std::vector<double>& values, const PreprocessPolicy& policy) {
  const std::size_t n = values.size();
  const std::size_t half = policy.window / 2;
  std::vector<double> next = values;
  std::vector<double> window;
  std::vector<double> deviations;
  bool changed = false;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    window.assign(values.begin() + static_cast<std::ptrdiff_t>(lo), values.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const double med = median_of(window);
    deviations.clear();
    for (std::size_t k = lo; k <= hi; ++k) deviations.push_back(std::abs(values[k] - med));
    const double mad = median_of(deviations);
    const double z = std::abs(values[i] - med) / (mad * PreprocessPolicy::kMadScale + PreprocessPolicy::kEpsilon);
    if (z > policy.z_cutoff && values[i] != med) {
      next[i] = med;
      changed = true;
    }
  }
  values = std::move(next);
  return changed;
}

}  // namespace

std::vector<MetricSample> preprocess(std::span<const MetricSample> samples, const PreprocessPolicy& policy) {
  policy.validate();
  using SeriesKey = std::tuple<std::string, std::string, std::string, Scope>;
  std::map<SeriesKey, std::vector<std::size_t>> series;
  std::vector<bool> dropped(samples.size(), false);
  std::vector<double> values(samples.size());

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto& idx = series[{s.host_id, s.vm_id.value_or(""), s.metric.name, s.metric.level}];
    if (!idx.empty() && samples[idx.back()].timestamp > s.timestamp) {
      fail(ErrorCode::kSequencing, "series " + s.host_id + (s.vm_id ? "/" + *s.vm_id : "") + "/" + s.metric.name +
                                       " goes back in time at timestamp " + std::to_string(s.timestamp));
    }
    values[i] = s.value;
    if (!policy.non_percent_metrics.contains(s.metric.name) && (s.value < 0.0 || s.value > 100.0)) {
      if (policy.clamp) {
        values[i] = std::clamp(s.value, 0.0, 100.0);
      } else {
        dropped[i] = true;
        continue;
      }
    }
    idx.push_back(i);
  }

  for (const auto& [key, idx] : series) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (auto i : idx) v.push_back(values[i]);
    for (int pass = 0; pass < PreprocessPolicy::kMaxPasses && hampel_pass(v, policy); ++pass) {
    }
    for (std::size_t k = 0; k < idx.size(); ++k) values[idx[k]] = v[k];
  }

  std::vector<MetricSample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (dropped[i]) continue;
    out.push_back(samples[i]);
    out.back().value = values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alarms

std::string_view trigger_name(AlarmTrigger trigger) noexcept {
  return trigger == AlarmTrigger::kSeverityGate ? "severity_gate" : "nbc_diagnosis";
}

std::string to_json_line(const Alarm& alarm) {
  ojson j;
  j["timestamp"] = alarm.timestamp;
  j["host_id"] = alarm.host_id;
  j["vm_id"] = alarm.vm_id ? ojson(*alarm.vm_id) : ojson(nullptr);
  j["severity"] = alarm.severity.value;
  j["trigger"] = trigger_name(alarm.trigger);
  if (alarm.diagnosis) {
    ojson d = ojson::object();
    for (const auto& [cls, p] : *alarm.diagnosis) d[cls] = p;
    j["diagnosis"] = std::move(d);
  }
  if (alarm.top_cause) j["top_cause"] = *alarm.top_cause;
  return j.dump();
}

std::optional<Alarm> endless_loop_rule(std::span<const WindowStates> history, const EndlessLoopRule& rule,
                                       std::span<const std::string> classes) {
  if (rule.windows == 0 || history.size() < rule.windows) return std::nullopt;
  const auto recent = history.subspan(history.size() - rule.windows);
  auto bucket = [](const WindowStates& w, const std::string& key) -> std::optional<StateLevel> {
    const auto it = w.buckets.find(key);
    if (it == w.buckets.end()) return std::nullopt;
    return it->second;
  };
  for (std::size_t i = 0; i < recent.size(); ++i) {
    const auto& w = recent[i];
    if (i > 0 && w.index != recent[i - 1].index + 1) return std::nullopt;
    const auto vm_cpu = bucket(w, rule.vm_cpu);
    const auto host_cpu = bucket(w, rule.host_cpu);
    const auto tput = bucket(w, rule.throughput);
    if (!vm_cpu || !host_cpu || !tput) return std::nullopt;
    if (*vm_cpu < rule.cpu_bucket || *host_cpu < rule.cpu_bucket || *tput > rule.throughput_bucket) return std::nullopt;
  }
  const auto& last = recent.back();
  Alarm alarm;
  alarm.timestamp = last.timestamp;
  alarm.host_id = last.host_id;
  alarm.vm_id = last.vm_id;
  alarm.severity = last.severity;
  alarm.trigger = AlarmTrigger::kNbcDiagnosis;
  std::vector<std::pair<std::string, double>> diagnosis;
  for (const auto& c : classes) diagnosis.emplace_back(c, c == rule.cause ? 1.0 : 0.0);
  alarm.diagnosis = std::move(diagnosis);
  alarm.top_cause = rule.cause;
  return alarm;
}

// ---------------------------------------------------------------------------
// Configuration

void EngineConfig::validate() const {
  if (window_ms <= 0) fail(ErrorCode::kInvalidModel, "window_ms must be positive");
  preprocess.validate();
  if (metrics.empty()) fail(ErrorCode::kInvalidModel, "no monitored metrics configured");
  if (!severity_model) fail(ErrorCode::kInvalidModel, "no severity model configured");
  if (!model) fail(ErrorCode::kInvalidModel, "no diagnosis model configured");

  std::set<std::string> keys;
  for (const auto& m : metrics) {
    const auto key = metric_key(m.metric);
    if (!keys.insert(key).second) fail(ErrorCode::kInvalidModel, "metric '" + key + "' configured twice");
    if (m.spec.component() != m.metric) fail(ErrorCode::kInvalidModel, "discretization of '" + key + "' names another metric");
    if (m.severity_component) {
      for (unsigned level = 0; level < m.spec.level_count(); ++level) m.severity(StateLevel{level});
    }
  }
  for (const auto& c : severity_model->components()) {
    const bool mapped = std::any_of(metrics.begin(), metrics.end(), [&](const MetricConfig& m) {
      return m.severity_component == c.name;
    });
    if (!mapped) fail(ErrorCode::kInvalidModel, "severity component '" + c.name + "' has no metric");
    if (c.arity < 3) fail(ErrorCode::kInvalidModel, "severity component '" + c.name + "' needs three states");
  }
  for (const auto& m : metrics) {
    if (!m.severity_component) continue;
    const auto& comps = severity_model->components();
    if (std::none_of(comps.begin(), comps.end(), [&](const MddComponent& c) { return c.name == *m.severity_component; })) {
      fail(ErrorCode::kInvalidModel, "metric '" + metric_key(m.metric) + "' maps to unknown severity component '" +
                                         *m.severity_component + "'");
    }
  }
  for (const auto& a : model->schema().attributes()) {
    const auto it = std::find_if(metrics.begin(), metrics.end(), [&](const MetricConfig& m) { return metric_key(m.metric) == a.name; });
    if (it == metrics.end()) fail(ErrorCode::kInvalidModel, "model attribute '" + a.name + "' is not a monitored metric");
    if (it->spec.level_count() != a.cardinality) {
      fail(ErrorCode::kInvalidModel, "model attribute '" + a.name + "' has cardinality " + std::to_string(a.cardinality) +
                                         " but its discretization yields " + std::to_string(it->spec.level_count()));
    }
  }
  if (endless_loop.windows == 0) fail(ErrorCode::kInvalidModel, "endless-loop persistence must be at least one window");
  for (const auto* key : {&endless_loop.vm_cpu, &endless_loop.host_cpu, &endless_loop.throughput}) {
    if (!keys.contains(*key)) fail(ErrorCode::kInvalidModel, "endless-loop rule reads unmonitored metric '" + *key + "'");
  }
  model->schema().class_index(endless_loop.cause);
}

namespace {

std::shared_ptr<const NbcModel> load_model_ref(const std::string& config_path, const ojson& ref) {
  const auto path = io::resolve_relative(config_path, ref.at("path").get<std::string>());
  const auto text = io::read_file(path);
  if (ref.contains("sha256") && ref["sha256"].get<std::string>() != io::sha256_hex(text)) {
    fail(ErrorCode::kLoad, "model file '" + path + "' does not match the sha256 recorded in the config");
  }
  return std::make_shared<const NbcModel>(NbcModel::from_json(text));
}

}  // namespace

EngineConfig EngineConfig::load(const std::string& path) {
  EngineConfig config;
  try {
    const auto j = ojson::parse(io::read_file(path));
    config.window_ms = j.value("window_ms", std::int64_t{1000});
    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      config.preprocess.window = p.value("window", config.preprocess.window);
      config.preprocess.z_cutoff = p.value("z_cutoff", config.preprocess.z_cutoff);
      config.preprocess.clamp = p.value("clamp", config.preprocess.clamp);
      if (p.contains("non_percent_metrics")) {
        config.preprocess.non_percent_metrics = p["non_percent_metrics"].get<std::set<std::string>>();
      }
    }
    for (const auto& jm : j.at("metrics")) {
      ComponentId id{jm.at("metric").get<std::string>(), parse_scope(jm.at("level").get<std::string>())};
      auto boundaries = jm.value("boundaries", std::vector<double>{0.0, 25.0, 50.0, 75.0, 100.0});
      auto spec = jm.contains("interval_levels")
                      ? DiscretizationSpec::create(id, std::move(boundaries),
                                                   [&] {
                                                     std::vector<StateLevel> levels;
                                                     for (auto v : jm["interval_levels"].get<std::vector<unsigned>>()) levels.emplace_back(v);
                                                     return levels;
                                                   }())
                      : DiscretizationSpec::create(id, std::move(boundaries));
      SeverityMap severity;
      if (jm.contains("severity_map")) {
        std::vector<StateLevel> table;
        for (auto v : jm["severity_map"].get<std::vector<unsigned>>()) table.emplace_back(v);
        severity = SeverityMap(std::move(table));
      }
      std::optional<std::string> component;
      if (jm.contains("severity_component") && !jm["severity_component"].is_null()) {
        component = jm["severity_component"].get<std::string>();
      }
      config.metrics.push_back(MetricConfig{std::move(id), std::move(spec), std::move(component), std::move(severity)});
    }
    const auto& sev = j.at("severity_mdd");
    if (sev.contains("max_of")) {
      const auto names = sev["max_of"].get<std::vector<std::string>>();
      config.severity_model = std::make_shared<const Mdd>(Mdd::build_max_severity(names));
    } else {
      const auto& ref = sev.at("table");
      const auto table_path = io::resolve_relative(path, ref.at("path").get<std::string>());
      const auto text = io::read_file(table_path);
      if (ref.contains("sha256") && ref["sha256"].get<std::string>() != io::sha256_hex(text)) {
        fail(ErrorCode::kLoad, "structure table '" + table_path + "' does not match its recorded sha256");
      }
      config.severity_model = std::make_shared<const Mdd>(Mdd::from_table_csv(text));
    }
    config.model = load_model_ref(path, j.at("model"));
    if (j.contains("endless_loop")) {
      const auto& e = j["endless_loop"];
      auto& r = config.endless_loop;
      r.windows = e.value("windows", r.windows);
      r.vm_cpu = e.value("vm_cpu", r.vm_cpu);
      r.host_cpu = e.value("host_cpu", r.host_cpu);
      r.throughput = e.value("throughput", r.throughput);
      r.cpu_bucket = StateLevel{e.value("cpu_bucket", r.cpu_bucket.value)};
      r.throughput_bucket = StateLevel{e.value("throughput_bucket", r.throughput_bucket.value)};
      r.cause = e.value("cause", r.cause);
    }
  } catch (const ojson::exception& e) {
    fail(ErrorCode::kLoad, path + ": malformed engine config: " + e.what());
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
  config.validate();
  return config;
}

EngineConfig EngineConfig::standard(std::shared_ptr<const NbcModel> model) {
  EngineConfig config;
  for (const auto& m : standard_metrics()) {
    std::optional<std::string> component;
    if (m.level == Scope::kVm && m.name != "throughput") component = m.name;
    if (m.level == Scope::kHost && m.name == "storage_io") component = m.name;
    config.metrics.push_back(MetricConfig{m, DiscretizationSpec::quartiles(m), component, SeverityMap{}});
  }
  const std::vector<std::string> components{"cpu", "memory", "network", "storage_io"};
  config.severity_model = std::make_shared<const Mdd>(Mdd::build_max_severity(components));
  config.model = std::move(model);
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Virtual sensors

SensorHub::Entry& SensorHub::find(const std::string& id) {
  for (auto& e : entries_) {
    if (e.sensor.id == id) return e;
  }
  fail(ErrorCode::kLookup, "unknown sensor '" + id + "'");
}

const SensorHub::Entry& SensorHub::find(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.sensor.id == id) return e;
  }
  fail(ErrorCode::kLookup, "unknown sensor '" + id + "'");
}

void SensorHub::register_sensor(VirtualSensor sensor) {
  if (sensor.id.empty()) fail(ErrorCode::kInvalidArgument, "sensor id is empty");
  if (sensor.frequency_ms <= 0) fail(ErrorCode::kInvalidArgument, "sensor frequency must be positive");
  std::lock_guard lock(mutex_);
  for (const auto& e : entries_) {
    if (e.sensor.id == sensor.id) fail(ErrorCode::kInvalidArgument, "sensor '" + sensor.id + "' already registered");
  }
  Entry entry;
  entry.status.active = sensor.active;
  entry.status.frequency_ms = sensor.frequency_ms;
  entry.sensor = std::move(sensor);
  entries_.push_back(std::move(entry));
}

void SensorHub::set_active(const std::string& id, bool active) {
  std::lock_guard lock(mutex_);
  auto& e = find(id);
  e.sensor.active = active;
  e.status.active = active;
  if (!active) e.status.pending.reset();
}

void SensorHub::set_frequency(const std::string& id, std::int64_t frequency_ms) {
  if (frequency_ms <= 0) fail(ErrorCode::kInvalidArgument, "sensor frequency must be positive");
  std::lock_guard lock(mutex_);
  auto& e = find(id);
  e.sensor.frequency_ms = frequency_ms;
  e.status.frequency_ms = frequency_ms;
  if (e.status.pending) e.due_ms = (e.status.pending->timestamp / frequency_ms + 1) * frequency_ms;
}

SensorStatus SensorHub::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return find(id).status;
}

std::vector<std::string> SensorHub::sensor_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& e : entries_) ids.push_back(e.sensor.id);
  return ids;
}

void SensorHub::deliver(Entry& entry, std::int64_t at_ms) {
  auto& st = entry.status;
  ++st.delivered;
  st.last_delivery_ms = at_ms;
  st.last_delivered = std::move(st.pending);
  st.pending.reset();
}

namespace {

using Delivery = std::pair<std::function<void(const Alarm&)>, Alarm>;

void invoke(std::vector<Delivery>& deliveries) {
  for (auto& [sink, alarm] : deliveries) {
    if (sink) sink(alarm);
  }
}

}  // namespace

std::size_t SensorHub::dispatch(const Alarm& alarm) {
  std::vector<Delivery> deliveries;
  std::size_t reached = 0;
  {
    std::lock_guard lock(mutex_);
    for (auto& e : entries_) {
      if (e.status.pending && e.due_ms <= alarm.timestamp) {
        deliver(e, e.due_ms);
        deliveries.emplace_back(e.sensor.sink, *e.status.last_delivered);
      }
    }
    for (auto& e : entries_) {
      if (!e.sensor.active) continue;
      if (e.status.pending) ++e.status.superseded;
      e.status.pending = alarm;
      e.due_ms = (alarm.timestamp / e.sensor.frequency_ms + 1) * e.sensor.frequency_ms;
      ++reached;
    }
  }
  invoke(deliveries);
  return reached;
}

void SensorHub::advance_clock(std::int64_t now_ms) {
  std::vector<Delivery> deliveries;
  {
    std::lock_guard lock(mutex_);
    for (auto& e : entries_) {
      if (e.status.pending && e.due_ms <= now_ms) {
        deliver(e, e.due_ms);
        deliveries.emplace_back(e.sensor.sink, *e.status.last_delivered);
      }
    }
  }
  invoke(deliveries);
}

void SensorHub::flush() {
  std::vector<Delivery> deliveries;
  {
    std::lock_guard lock(mutex_);
    for (auto& e : entries_) {
      if (e.status.pending) {
        deliver(e, e.due_ms);
        deliveries.emplace_back(e.sensor.sink, *e.status.last_delivered);
      }
    }
  }
  invoke(deliveries);
}

// ---------------------------------------------------------------------------
// Engine

DiagnosisEngine::DiagnosisEngine(EngineConfig config) : config_(std::move(config)) {
  config_.validate();
  severity_components_ = config_.severity_model->component_names();
}

std::vector<Window> DiagnosisEngine::assemble_windows(std::span<const MetricSample> samples) const {
  const bool vm_scopes = std::any_of(config_.metrics.begin(), config_.metrics.end(),
                                     [](const MetricConfig& m) { return m.metric.level == Scope::kVm; });
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  using Key = std::tuple<std::int64_t, std::string, std::string>;  // window, host, vm ("" = host level)
  std::map<Key, std::map<std::string, Acc>> acc;
  for (const auto& s : samples) {
    if (s.timestamp < 0) fail(ErrorCode::kInput, "negative timestamp");
    auto& a = acc[{s.timestamp / config_.window_ms, s.host_id, s.vm_id.value_or("")}][metric_key(s.metric)];
    a.sum += s.value;
    ++a.n;
  }
  std::vector<Window> windows;
  for (const auto& [key, metrics] : acc) {
    const auto& [index, host, vm] = key;
    if (vm_scopes == vm.empty()) continue;
    Window w;
    w.index = index;
    w.timestamp = index * config_.window_ms;
    w.host_id = host;
    if (!vm.empty()) w.vm_id = vm;
    for (const auto& [metric, a] : metrics) w.values[metric] = a.sum / static_cast<double>(a.n);
    if (vm_scopes) {
      if (const auto it = acc.find(Key{index, host, ""}); it != acc.end()) {
        for (const auto& [metric, a] : it->second) w.values[metric] = a.sum / static_cast<double>(a.n);
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

WindowStates DiagnosisEngine::discretize_window(const Window& window) const {
  WindowStates st;
  st.index = window.index;
  st.timestamp = window.timestamp;
  st.host_id = window.host_id;
  st.vm_id = window.vm_id;
  std::map<std::string, StateLevel> component_states;
  for (const auto& c : severity_components_) component_states[c] = kNormal;
  for (const auto& m : config_.metrics) {
    const auto key = metric_key(m.metric);
    const auto it = window.values.find(key);
    if (it == window.values.end()) {
      fail(ErrorCode::kIncompleteWindow, "window " + std::to_string(window.index) + " of " + window.host_id +
                                             (window.vm_id ? "/" + *window.vm_id : "") + " lacks '" + key + "'");
    }
    const auto bucket = discretize(it->second, m.spec);
    st.buckets[key] = bucket;
    if (m.severity_component) {
      auto& cs = component_states[*m.severity_component];
      cs = std::max(cs, m.severity(bucket));
    }
  }
  std::vector<StateLevel> levels;
  levels.reserve(severity_components_.size());
  for (const auto& c : severity_components_) levels.push_back(component_states[c]);
  st.severity = config_.severity_model->evaluate(levels);
  return st;
}

Alarm DiagnosisEngine::make_alarm(const WindowStates& states, AlarmTrigger trigger) const {
  Alarm alarm;
  alarm.timestamp = states.timestamp;
  alarm.host_id = states.host_id;
  alarm.vm_id = states.vm_id;
  alarm.severity = states.severity;
  alarm.trigger = trigger;
  return alarm;
}

void DiagnosisEngine::append(const Alarm& alarm) {
  {
    std::lock_guard lock(log_mutex_);
    log_.push_back(alarm);
  }
  sensors_.dispatch(alarm);
}

std::vector<Alarm> DiagnosisEngine::step(const Window& window) {
  const auto states = discretize_window(window);
  ++windows_processed_;

  std::vector<WindowStates> history;
  {
    std::lock_guard lock(history_mutex_);
    auto& h = history_[{states.host_id, states.vm_id.value_or("")}];
    if (!h.empty() && h.back().index + 1 != states.index) h.clear();
    h.push_back(states);
    while (h.size() > config_.endless_loop.windows) h.pop_front();
    history.assign(h.begin(), h.end());
  }

  // The composite endless-loop pattern explains its own CPU saturation, so it
  // takes the window's single alarm slot ahead of the plain severity gate.
  auto alarm = endless_loop_rule(history, config_.endless_loop, config_.model->schema().classes());
  if (!alarm && states.severity >= kSeriousFault) {
    alarm = make_alarm(states, AlarmTrigger::kSeverityGate);
  } else if (!alarm && states.severity == kMinorFault) {
    const auto& schema = config_.model->schema();
    FeatureVector features(schema.attribute_count());
    for (std::size_t a = 0; a < features.size(); ++a) {
      const auto it = states.buckets.find(schema.attributes()[a].name);
      if (it != states.buckets.end()) features[a] = it->second.value;
    }
    ++nbc_invocations_;
    const auto post = config_.model->posterior(features);
    alarm = make_alarm(states, AlarmTrigger::kNbcDiagnosis);
    std::vector<std::pair<std::string, double>> diagnosis;
    for (std::size_t c = 0; c < post.size(); ++c) diagnosis.emplace_back(schema.classes()[c], post[c]);
    alarm->diagnosis = std::move(diagnosis);
    alarm->top_cause = schema.classes()[static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin())];
  }
  if (!alarm) return {};
  append(*alarm);
  return {*alarm};
}

std::vector<Alarm> DiagnosisEngine::run(std::span<const MetricSample> samples) {
  const auto clean = preprocess(samples, config_.preprocess);
  std::vector<Alarm> alarms;
  for (const auto& w : assemble_windows(clean)) {
    for (auto& a : step(w)) alarms.push_back(std::move(a));
  }
  sensors_.flush();
  return alarms;
}

std::vector<Alarm> DiagnosisEngine::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::string DiagnosisEngine::log_jsonl() const {
  std::string out;
  for (const auto& a : log()) {
    out += to_json_line(a);
    out += '\n';
  }
  return out;
}

}  // namespace afdi
