#ifndef AFDI_H
#define AFDI_H

/* C interface to the fault diagnosis core. Every function returns an
 * afdi_status; on failure afdi_last_error() holds a message for the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with afdi_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(AFDI_BUILDING)
#define AFDI_API __declspec(dllexport)
#else
#define AFDI_API __declspec(dllimport)
#endif
#else
#define AFDI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum afdi_status {
  AFDI_OK = 0,
  AFDI_E_INVALID_ARGUMENT = 1,
  AFDI_E_OUT_OF_RANGE = 2,
  AFDI_E_CAPACITY = 3,
  AFDI_E_INVALID_MODEL = 4,
  AFDI_E_INPUT = 5,
  AFDI_E_TRAINING = 6,
  AFDI_E_ZERO_LIKELIHOOD = 7,
  AFDI_E_IMPOSSIBLE_EVIDENCE = 8,
  AFDI_E_LOAD = 9,
  AFDI_E_UNDEFINED_METRIC = 10,
  AFDI_E_SEQUENCING = 11,
  AFDI_E_INCOMPLETE_WINDOW = 12,
  AFDI_E_LOOKUP = 13,
  AFDI_E_SCENARIO = 14,
  AFDI_E_ALIGNMENT = 15,
  AFDI_E_IO = 16,
  AFDI_E_INTERNAL = 100
} afdi_status;

typedef struct afdi_mdd afdi_mdd;
typedef struct afdi_nbc_model afdi_nbc_model;
typedef struct afdi_bayes_net afdi_bayes_net;
typedef struct afdi_engine afdi_engine;

AFDI_API const char* afdi_version(void);
AFDI_API const char* afdi_last_error(void);
AFDI_API const char* afdi_status_name(afdi_status status);
AFDI_API void afdi_string_free(char* s);

/* ---- severity model ---- */

AFDI_API afdi_status afdi_mdd_max_severity(const char* const* components, size_t count, afdi_mdd** out);
/* CSV truth table: component columns then the system level. */
AFDI_API afdi_status afdi_mdd_from_table_file(const char* path, afdi_mdd** out);
AFDI_API afdi_status afdi_mdd_component_count(const afdi_mdd* mdd, size_t* out);
AFDI_API afdi_status afdi_mdd_node_count(const afdi_mdd* mdd, size_t* out);
AFDI_API afdi_status afdi_mdd_evaluate(const afdi_mdd* mdd, const unsigned* states, size_t count, unsigned* out_level);
/* dists_json: [[p0,p1,...], ...] one array per component, or an object
 * keyed by component name. Writes {"probabilities":[...]} */
AFDI_API afdi_status afdi_mdd_level_probabilities_json(const afdi_mdd* mdd, const char* dists_json, char** out_json);
AFDI_API afdi_status afdi_mdd_to_dot(const afdi_mdd* mdd, char** out_dot);
AFDI_API void afdi_mdd_free(afdi_mdd* mdd);

/* ---- naive Bayes ---- */

AFDI_API afdi_status afdi_nbc_train_csv(const char* data_path, const char* schema_path, double alpha,
                                        afdi_nbc_model** out);
AFDI_API afdi_status afdi_nbc_load(const char* path, afdi_nbc_model** out);
AFDI_API afdi_status afdi_nbc_save(const afdi_nbc_model* model, const char* path);
AFDI_API afdi_status afdi_nbc_to_json(const afdi_nbc_model* model, char** out_json);
AFDI_API afdi_status afdi_nbc_class_count(const afdi_nbc_model* model, size_t* out);
AFDI_API afdi_status afdi_nbc_attribute_count(const afdi_nbc_model* model, size_t* out);
/* Borrowed pointer, valid while the model lives. */
AFDI_API afdi_status afdi_nbc_class_name(const afdi_nbc_model* model, size_t index, const char** out);
AFDI_API afdi_status afdi_nbc_priors(const afdi_nbc_model* model, double* out, size_t capacity);
AFDI_API afdi_status afdi_nbc_zero_entry_count(const afdi_nbc_model* model, size_t* out);
/* features[i] < 0 marks a missing reading. */
AFDI_API afdi_status afdi_nbc_posterior(const afdi_nbc_model* model, const int* features, size_t count, double* out,
                                        size_t capacity);
AFDI_API afdi_status afdi_nbc_classify(const afdi_nbc_model* model, const int* features, size_t count,
                                       size_t* out_class);
AFDI_API void afdi_nbc_free(afdi_nbc_model* model);

/* ---- Bayesian network ---- */

AFDI_API afdi_status afdi_bn_load(const char* path, afdi_bayes_net** out);
/* [{"node","row","stated_sum","message"}, ...] */
AFDI_API afdi_status afdi_bn_warnings_json(const afdi_bayes_net* net, char** out_json);
/* evidence: "NODE=STATE" strings. Writes {"query","evidence","states","probabilities"}. */
AFDI_API afdi_status afdi_bn_query_json(const afdi_bayes_net* net, const char* query, const char* const* evidence,
                                        size_t evidence_count, char** out_json);
AFDI_API void afdi_bn_free(afdi_bayes_net* net);

/* ---- evaluation ---- */

/* Scores a saved model on a labelled CSV; writes the JSON report. */
AFDI_API afdi_status afdi_evaluate_files(const char* model_path, const char* data_path, char** out_report_json);
/* {"recall","precision","accuracy","false_alarm_rate"}, null where undefined. */
AFDI_API afdi_status afdi_metrics_from_counts(uint64_t tp, uint64_t fp, uint64_t fn, uint64_t tn, char** out_json);

/* ---- simulator ---- */

/* seed_override may be NULL. out_training may be NULL; otherwise a training
 * CSV over the standard schema is written. Writes a JSON summary. */
AFDI_API afdi_status afdi_simulate_files(const char* scenario_path, const uint64_t* seed_override,
                                         const char* out_metrics, const char* out_labels, const char* out_training,
                                         char** out_summary_json);

/* ---- diagnosis engine ---- */

typedef void (*afdi_alarm_callback)(const char* alarm_json, void* user_data);

AFDI_API afdi_status afdi_engine_from_config_file(const char* path, afdi_engine** out);
/* Preprocess, gate and diagnose a MetricSample JSON Lines file. out_alarms
 * may be NULL. */
AFDI_API afdi_status afdi_engine_run_files(afdi_engine* engine, const char* metrics_path, const char* out_alarms,
                                           size_t* out_alarm_count);
AFDI_API afdi_status afdi_engine_log_jsonl(const afdi_engine* engine, char** out_jsonl);
AFDI_API afdi_status afdi_engine_nbc_invocations(const afdi_engine* engine, uint64_t* out);
AFDI_API afdi_status afdi_engine_windows_processed(const afdi_engine* engine, uint64_t* out);
AFDI_API afdi_status afdi_engine_register_sensor(afdi_engine* engine, const char* sensor_id, int active,
                                                 int64_t frequency_ms, afdi_alarm_callback callback,
                                                 void* user_data);
AFDI_API afdi_status afdi_engine_set_sensor_active(afdi_engine* engine, const char* sensor_id, int active);
AFDI_API afdi_status afdi_engine_set_sensor_frequency(afdi_engine* engine, const char* sensor_id,
                                                      int64_t frequency_ms);
/* {"active","frequency_ms","delivered","superseded","last_delivery_ms","pending"} */
AFDI_API afdi_status afdi_engine_sensor_status_json(afdi_engine* engine, const char* sensor_id, char** out_json);
AFDI_API void afdi_engine_free(afdi_engine* engine);

#ifdef __cplusplus
}
#endif

#endif
