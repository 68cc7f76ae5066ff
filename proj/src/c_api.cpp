#include "afdi/afdi.h"

#include <cstring>
#include <json.hpp>
#include <memory>
#include <string>

#include "afdi/bayesnet.hpp"
#include "afdi/engine.hpp"
#include "afdi/evaluation.hpp"
#include "afdi/io.hpp"
#include "afdi/mdd.hpp"
#include "afdi/nbc.hpp"
#include "afdi/simulator.hpp"

struct afdi_mdd {
  afdi::Mdd mdd;
};

struct afdi_nbc_model {
  afdi::NbcModel model;
};

struct afdi_bayes_net {
  afdi::DiscreteBayesNet net;
};

struct afdi_engine {
  explicit afdi_engine(afdi::EngineConfig config) : engine(std::move(config)) {}
  afdi::DiagnosisEngine engine;
};

namespace {

using ojson = nlohmann::ordered_json;

thread_local std::string g_last_error;

afdi_status set_error(afdi_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
afdi_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return AFDI_OK;
  } catch (const afdi::Error& e) {
    return set_error(static_cast<afdi_status>(static_cast<int>(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(AFDI_E_INPUT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(AFDI_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(AFDI_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(AFDI_E_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) afdi::fail(afdi::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

afdi::FeatureVector to_features(const int* features, std::size_t count) {
  if (count > 0) require(features, "features");
  afdi::FeatureVector fv(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (features[i] >= 0) fv[i] = static_cast<unsigned>(features[i]);
  }
  return fv;
}

ojson nullable(double (*fn)(const afdi::ConfusionMatrix&), const afdi::ConfusionMatrix& m) {
  try {
    return fn(m);
  } catch (const afdi::Error&) {
    return nullptr;
  }
}

}  // namespace

extern "C" {

const char* afdi_version(void) { return "1.0.0"; }

const char* afdi_last_error(void) { return g_last_error.c_str(); }

const char* afdi_status_name(afdi_status status) {
  if (status == AFDI_OK) return "ok";
  if (status == AFDI_E_INTERNAL) return "internal";
  return afdi::error_code_name(static_cast<afdi::ErrorCode>(static_cast<int>(status)));
}

void afdi_string_free(char* s) { std::free(s); }

// ---- severity model

afdi_status afdi_mdd_max_severity(const char* const* components, size_t count, afdi_mdd** out) {
  return guarded([&] {
    require(out, "out");
    if (count > 0) require(components, "components");
    std::vector<std::string> names;
    for (size_t i = 0; i < count; ++i) {
      require(components[i], "component name");
      names.emplace_back(components[i]);
    }
    *out = new afdi_mdd{afdi::Mdd::build_max_severity(names)};
  });
}

afdi_status afdi_mdd_from_table_file(const char* path, afdi_mdd** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new afdi_mdd{afdi::Mdd::from_table_file(path)};
  });
}

afdi_status afdi_mdd_component_count(const afdi_mdd* mdd, size_t* out) {
  return guarded([&] {
    require(mdd, "mdd");
    require(out, "out");
    *out = mdd->mdd.components().size();
  });
}

afdi_status afdi_mdd_node_count(const afdi_mdd* mdd, size_t* out) {
  return guarded([&] {
    require(mdd, "mdd");
    require(out, "out");
    *out = mdd->mdd.node_count();
  });
}

afdi_status afdi_mdd_evaluate(const afdi_mdd* mdd, const unsigned* states, size_t count, unsigned* out_level) {
  return guarded([&] {
    require(mdd, "mdd");
    require(out_level, "out_level");
    if (count > 0) require(states, "states");
    std::vector<afdi::StateLevel> levels;
    for (size_t i = 0; i < count; ++i) levels.emplace_back(states[i]);
    *out_level = mdd->mdd.evaluate(levels).value;
  });
}

afdi_status afdi_mdd_level_probabilities_json(const afdi_mdd* mdd, const char* dists_json, char** out_json) {
  return guarded([&] {
    require(mdd, "mdd");
    require(dists_json, "dists_json");
    require(out_json, "out_json");
    const auto j = nlohmann::json::parse(dists_json);
    std::vector<afdi::StateDistribution> dists;
    if (j.is_object()) {
      for (const auto& c : mdd->mdd.components()) {
        if (!j.contains(c.name)) afdi::fail(afdi::ErrorCode::kInput, "no distribution for component '" + c.name + "'");
        dists.emplace_back(j.at(c.name).get<std::vector<double>>());
      }
      if (j.size() != dists.size()) afdi::fail(afdi::ErrorCode::kInput, "distribution given for an unknown component");
    } else {
      for (const auto& d : j) dists.emplace_back(d.get<std::vector<double>>());
    }
    ojson result;
    result["probabilities"] = mdd->mdd.level_probabilities(dists);
    *out_json = dup_string(result.dump());
  });
}

afdi_status afdi_mdd_to_dot(const afdi_mdd* mdd, char** out_dot) {
  return guarded([&] {
    require(mdd, "mdd");
    require(out_dot, "out_dot");
    *out_dot = dup_string(mdd->mdd.to_dot());
  });
}

void afdi_mdd_free(afdi_mdd* mdd) { delete mdd; }

// ---- naive Bayes

afdi_status afdi_nbc_train_csv(const char* data_path, const char* schema_path, double alpha, afdi_nbc_model** out) {
  return guarded([&] {
    require(data_path, "data_path");
    require(schema_path, "schema_path");
    require(out, "out");
    auto schema = afdi::AttributeSchema::load(schema_path);
    const auto data = afdi::load_training_csv(data_path, schema);
    *out = new afdi_nbc_model{afdi::NbcModel::train(data, std::move(schema), alpha)};
  });
}

afdi_status afdi_nbc_load(const char* path, afdi_nbc_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new afdi_nbc_model{afdi::NbcModel::load(path)};
  });
}

afdi_status afdi_nbc_save(const afdi_nbc_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    model->model.save(path);
  });
}

afdi_status afdi_nbc_to_json(const afdi_nbc_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = dup_string(model->model.to_json());
  });
}

afdi_status afdi_nbc_class_count(const afdi_nbc_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.schema().class_count();
  });
}

afdi_status afdi_nbc_attribute_count(const afdi_nbc_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.schema().attribute_count();
  });
}

afdi_status afdi_nbc_class_name(const afdi_nbc_model* model, size_t index, const char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const auto& classes = model->model.schema().classes();
    if (index >= classes.size()) afdi::fail(afdi::ErrorCode::kOutOfRange, "class index out of range");
    *out = classes[index].c_str();
  });
}

afdi_status afdi_nbc_priors(const afdi_nbc_model* model, double* out, size_t capacity) {
  return guarded([&] {
    require(model, "model");
    const auto& p = model->model.priors();
    if (capacity < p.size()) afdi::fail(afdi::ErrorCode::kCapacity, "output buffer holds fewer entries than classes");
    require(out, "out");
    std::copy(p.begin(), p.end(), out);
  });
}

afdi_status afdi_nbc_zero_entry_count(const afdi_nbc_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.zero_entry_count();
  });
}

afdi_status afdi_nbc_posterior(const afdi_nbc_model* model, const int* features, size_t count, double* out,
                               size_t capacity) {
  return guarded([&] {
    require(model, "model");
    const auto post = model->model.posterior(to_features(features, count));
    if (capacity < post.size()) afdi::fail(afdi::ErrorCode::kCapacity, "output buffer holds fewer entries than classes");
    require(out, "out");
    std::copy(post.begin(), post.end(), out);
  });
}

afdi_status afdi_nbc_classify(const afdi_nbc_model* model, const int* features, size_t count, size_t* out_class) {
  return guarded([&] {
    require(model, "model");
    require(out_class, "out_class");
    *out_class = model->model.classify(to_features(features, count));
  });
}

void afdi_nbc_free(afdi_nbc_model* model) { delete model; }

// ---- Bayesian network

afdi_status afdi_bn_load(const char* path, afdi_bayes_net** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new afdi_bayes_net{afdi::DiscreteBayesNet::load(path)};
  });
}

afdi_status afdi_bn_warnings_json(const afdi_bayes_net* net, char** out_json) {
  return guarded([&] {
    require(net, "net");
    require(out_json, "out_json");
    ojson arr = ojson::array();
    for (const auto& w : net->net.warnings()) {
      arr.push_back({{"node", w.node}, {"row", w.row}, {"stated_sum", w.stated_sum}, {"message", w.message}});
    }
    *out_json = dup_string(arr.dump());
  });
}

afdi_status afdi_bn_query_json(const afdi_bayes_net* net, const char* query, const char* const* evidence,
                               size_t evidence_count, char** out_json) {
  return guarded([&] {
    require(net, "net");
    require(query, "query");
    require(out_json, "out_json");
    if (evidence_count > 0) require(evidence, "evidence");
    std::vector<std::string> items;
    for (size_t i = 0; i < evidence_count; ++i) {
      require(evidence[i], "evidence item");
      items.emplace_back(evidence[i]);
    }
    const auto& bn = net->net;
    const auto q = bn.index_of(query);
    const auto ev = bn.parse_evidence(items);
    const auto dist = bn.posterior_given_evidence(q, ev);
    ojson result;
    result["query"] = bn.nodes()[q].name;
    ojson e = ojson::object();
    for (const auto& [node, state] : ev) e[bn.nodes()[node].name] = bn.nodes()[node].states[state];
    result["evidence"] = std::move(e);
    result["states"] = bn.nodes()[q].states;
    result["probabilities"] = dist.probs();
    *out_json = dup_string(result.dump());
  });
}

void afdi_bn_free(afdi_bayes_net* net) { delete net; }

// ---- evaluation

afdi_status afdi_evaluate_files(const char* model_path, const char* data_path, char** out_report_json) {
  return guarded([&] {
    require(model_path, "model_path");
    require(data_path, "data_path");
    require(out_report_json, "out_report_json");
    const auto text = afdi::io::read_file(model_path);
    const auto model = afdi::NbcModel::from_json(text);
    const auto data = afdi::load_training_csv(data_path, model.schema());
    const auto m = afdi::score(model, data);
    *out_report_json = dup_string(afdi::evaluation_report_json(m, model.schema(), afdi::io::sha256_hex(text)));
  });
}

afdi_status afdi_metrics_from_counts(uint64_t tp, uint64_t fp, uint64_t fn, uint64_t tn, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto m = afdi::ConfusionMatrix::from_counts(tp, fp, fn, tn);
    ojson j;
    j["recall"] = nullable(afdi::recall, m);
    j["precision"] = nullable(afdi::precision, m);
    j["accuracy"] = nullable(afdi::accuracy, m);
    j["false_alarm_rate"] = nullable(afdi::false_alarm_rate, m);
    *out_json = dup_string(j.dump());
  });
}

// ---- simulator

afdi_status afdi_simulate_files(const char* scenario_path, const uint64_t* seed_override, const char* out_metrics,
                                const char* out_labels, const char* out_training, char** out_summary_json) {
  return guarded([&] {
    require(scenario_path, "scenario_path");
    require(out_metrics, "out_metrics");
    require(out_labels, "out_labels");
    auto scenario = afdi::Scenario::load(scenario_path);
    if (seed_override != nullptr) scenario.seed = *seed_override;
    const auto sim = afdi::generate(scenario);
    afdi::write_metric_samples(out_metrics, sim.samples);
    afdi::io::write_file(out_labels, afdi::labels_to_csv(sim.labels, scenario));
    if (out_training != nullptr) {
      const auto schema = afdi::standard_schema();
      const auto examples =
          afdi::to_training_set(sim.samples, sim.labels, afdi::standard_discretization(), schema, scenario.window_ms);
      afdi::io::write_file(out_training, afdi::to_training_csv(examples, schema));
    }
    if (out_summary_json != nullptr) {
      ojson j;
      j["windows"] = scenario.duration;
      j["injections"] = scenario.injections.size();
      j["scopes"] = scenario.hosts * scenario.vms_per_host;
      j["samples"] = sim.samples.size();
      j["seed"] = scenario.seed;
      j["generator"] = afdi::kGeneratorAlgorithm;
      j["metrics_sha256"] = afdi::io::sha256_file(out_metrics);
      *out_summary_json = dup_string(j.dump());
    }
  });
}

// ---- diagnosis engine

afdi_status afdi_engine_from_config_file(const char* path, afdi_engine** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new afdi_engine(afdi::EngineConfig::load(path));
  });
}

afdi_status afdi_engine_run_files(afdi_engine* engine, const char* metrics_path, const char* out_alarms,
                                  size_t* out_alarm_count) {
  return guarded([&] {
    require(engine, "engine");
    require(metrics_path, "metrics_path");
    const auto samples = afdi::read_metric_samples(metrics_path);
    const auto alarms = engine->engine.run(samples);
    if (out_alarms != nullptr) {
      std::string text;
      for (const auto& a : alarms) text += afdi::to_json_line(a) + "\n";
      afdi::io::write_file(out_alarms, text);
    }
    if (out_alarm_count != nullptr) *out_alarm_count = alarms.size();
  });
}

afdi_status afdi_engine_log_jsonl(const afdi_engine* engine, char** out_jsonl) {
  return guarded([&] {
    require(engine, "engine");
    require(out_jsonl, "out_jsonl");
    *out_jsonl = dup_string(engine->engine.log_jsonl());
  });
}

afdi_status afdi_engine_nbc_invocations(const afdi_engine* engine, uint64_t* out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    *out = engine->engine.nbc_invocations();
  });
}

afdi_status afdi_engine_windows_processed(const afdi_engine* engine, uint64_t* out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    *out = engine->engine.windows_processed();
  });
}

afdi_status afdi_engine_register_sensor(afdi_engine* engine, const char* sensor_id, int active, int64_t frequency_ms,
                                        afdi_alarm_callback callback, void* user_data) {
  return guarded([&] {
    require(engine, "engine");
    require(sensor_id, "sensor_id");
    afdi::VirtualSensor sensor;
    sensor.id = sensor_id;
    sensor.active = active != 0;
    sensor.frequency_ms = frequency_ms;
    if (callback != nullptr) {
      sensor.sink = [callback, user_data](const afdi::Alarm& alarm) {
        const auto line = afdi::to_json_line(alarm);
        callback(line.c_str(), user_data);
      };
    }
    engine->engine.sensors().register_sensor(std::move(sensor));
  });
}

afdi_status afdi_engine_set_sensor_active(afdi_engine* engine, const char* sensor_id, int active) {
  return guarded([&] {
    require(engine, "engine");
    require(sensor_id, "sensor_id");
    engine->engine.sensors().set_active(sensor_id, active != 0);
  });
}

afdi_status afdi_engine_set_sensor_frequency(afdi_engine* engine, const char* sensor_id, int64_t frequency_ms) {
  return guarded([&] {
    require(engine, "engine");
    require(sensor_id, "sensor_id");
    engine->engine.sensors().set_frequency(sensor_id, frequency_ms);
  });
}

afdi_status afdi_engine_sensor_status_json(afdi_engine* engine, const char* sensor_id, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    require(sensor_id, "sensor_id");
    require(out_json, "out_json");
    const auto st = engine->engine.sensors().status(sensor_id);
    ojson j;
    j["active"] = st.active;
    j["frequency_ms"] = st.frequency_ms;
    j["delivered"] = st.delivered;
    j["superseded"] = st.superseded;
    j["last_delivery_ms"] = st.last_delivery_ms ? ojson(*st.last_delivery_ms) : ojson(nullptr);
    j["pending"] = st.pending.has_value();
    *out_json = dup_string(j.dump());
  });
}

void afdi_engine_free(afdi_engine* engine) { delete engine; }

}  // extern "C"
