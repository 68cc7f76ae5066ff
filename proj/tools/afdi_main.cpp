// afdi: command-line front end over the C interface.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "afdi/afdi.h"

namespace {

struct CallFailed {
  afdi_status status;
};

void check(afdi_status status) {
  if (status != AFDI_OK) throw CallFailed{status};
}

// Owns a char* handed out by the library.
class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { afdi_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }

 private:
  char* p_ = nullptr;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("afdi");
  logger->set_pattern("afdi: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("AFDI_LOG")) {
    const std::string level(env);
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring unknown AFDI_LOG level '{}'", level);
  }
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw std::runtime_error("cannot write '" + path + "'");
}

std::vector<unsigned> parse_states(const std::string& text) {
  std::vector<unsigned> states;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::runtime_error("bad state '" + item + "' in --query");
    states.push_back(static_cast<unsigned>(v));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return states;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Severity gating and probabilistic fault diagnosis for IaaS telemetry"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", afdi_version());

  // simulate
  std::string scenario, out_metrics, out_labels, out_training;
  std::optional<std::uint64_t> seed;
  auto* simulate = app.add_subcommand("simulate", "Generate labelled synthetic telemetry from a scenario");
  simulate->add_option("--scenario", scenario, "Scenario JSON file")->required();
  simulate->add_option("--out-metrics", out_metrics, "MetricSample JSON Lines output")->required();
  simulate->add_option("--out-labels", out_labels, "Per-window labels CSV output")->required();
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--out-training", out_training, "Also write a discretized training CSV");

  // train
  std::string data, schema, out_model;
  double alpha = 1.0;
  auto* train = app.add_subcommand("train", "Train a naive Bayes diagnosis model");
  train->add_option("--data", data, "Training CSV (attribute columns, then label)")->required();
  train->add_option("--schema", schema, "Attribute schema JSON")->required();
  train->add_option("--alpha", alpha, "Laplace smoothing pseudo-count")->check(CLI::NonNegativeNumber);
  train->add_option("--out-model", out_model, "Model JSON output")->required();

  // diagnose
  std::string config, metrics, out_alarms;
  auto* diagnose = app.add_subcommand("diagnose", "Run the severity gate and diagnosis over a metric stream");
  diagnose->add_option("--config", config, "Engine config JSON")->required();
  diagnose->add_option("--metrics", metrics, "MetricSample JSON Lines input")->required();
  diagnose->add_option("--out-alarms", out_alarms, "Alarm JSON Lines output")->required();

  // evaluate
  std::string model, report;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on labelled data");
  evaluate->add_option("--model", model, "Model JSON")->required();
  evaluate->add_option("--data", data, "Labelled CSV")->required();
  evaluate->add_option("--report", report, "Report JSON output (stdout when omitted)");

  // mdd
  std::string table, query, dists;
  auto* mdd = app.add_subcommand("mdd", "Evaluate a severity structure table as an MDD");
  mdd->add_option("--table", table, "Structure table CSV")->required();
  auto* mdd_input = mdd->add_option_group("input", "Exactly one of");
  mdd_input->add_option("--query", query, "Comma-separated component states, e.g. 0,1,0,2");
  mdd_input->add_option("--dists", dists, "JSON file with per-component state distributions");
  mdd_input->require_option(1);

  // bn-query
  std::string net, node;
  std::vector<std::string> evidence;
  auto* bn = app.add_subcommand("bn-query", "Posterior of one node in a discrete Bayesian network");
  bn->add_option("--net", net, "Network JSON")->required();
  bn->add_option("--query", node, "Node to query")->required();
  bn->add_option("--evidence", evidence, "Observation NODE=STATE (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) {
      OwnedString summary;
      check(afdi_simulate_files(scenario.c_str(), seed ? &*seed : nullptr, out_metrics.c_str(), out_labels.c_str(),
                                out_training.empty() ? nullptr : out_training.c_str(), summary.out()));
      std::cout << summary.str() << '\n';
      spdlog::info("simulation written to {} and {}", out_metrics, out_labels);
    } else if (*train) {
      afdi_nbc_model* m = nullptr;
      check(afdi_nbc_train_csv(data.c_str(), schema.c_str(), alpha, &m));
      std::unique_ptr<afdi_nbc_model, decltype(&afdi_nbc_free)> guard(m, afdi_nbc_free);
      size_t zeros = 0;
      check(afdi_nbc_zero_entry_count(m, &zeros));
      if (zeros > 0) {
        spdlog::warn("{} conditional estimates are exactly zero; unseen attribute values will veto their class", zeros);
      }
      check(afdi_nbc_save(m, out_model.c_str()));
      size_t classes = 0;
      check(afdi_nbc_class_count(m, &classes));
      std::vector<double> priors(classes);
      check(afdi_nbc_priors(m, priors.data(), priors.size()));
      std::string line = "{\"priors\":{";
      for (size_t c = 0; c < classes; ++c) {
        const char* name = nullptr;
        check(afdi_nbc_class_name(m, c, &name));
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", priors[c]);
        line += (c ? ",\"" : "\"") + std::string(name) + "\":" + buf;
      }
      line += "}}";
      std::cout << line << '\n';
      spdlog::info("model written to {}", out_model);
    } else if (*diagnose) {
      afdi_engine* e = nullptr;
      check(afdi_engine_from_config_file(config.c_str(), &e));
      std::unique_ptr<afdi_engine, decltype(&afdi_engine_free)> guard(e, afdi_engine_free);
      size_t alarms = 0;
      check(afdi_engine_run_files(e, metrics.c_str(), out_alarms.c_str(), &alarms));
      uint64_t windows = 0, invocations = 0;
      check(afdi_engine_windows_processed(e, &windows));
      check(afdi_engine_nbc_invocations(e, &invocations));
      std::cout << "{\"windows\":" << windows << ",\"alarms\":" << alarms << ",\"nbc_invocations\":" << invocations
                << "}\n";
      spdlog::info("{} alarms over {} windows written to {}", alarms, windows, out_alarms);
    } else if (*evaluate) {
      OwnedString out;
      check(afdi_evaluate_files(model.c_str(), data.c_str(), out.out()));
      write_or_print(report, out.str());
    } else if (*mdd) {
      afdi_mdd* d = nullptr;
      check(afdi_mdd_from_table_file(table.c_str(), &d));
      std::unique_ptr<afdi_mdd, decltype(&afdi_mdd_free)> guard(d, afdi_mdd_free);
      if (!query.empty()) {
        const auto states = parse_states(query);
        unsigned level = 0;
        check(afdi_mdd_evaluate(d, states.data(), states.size(), &level));
        std::cout << "{\"level\":" << level << "}\n";
      } else {
        OwnedString out;
        check(afdi_mdd_level_probabilities_json(d, read_text(dists).c_str(), out.out()));
        std::cout << out.str() << '\n';
      }
    } else if (*bn) {
      afdi_bayes_net* b = nullptr;
      check(afdi_bn_load(net.c_str(), &b));
      std::unique_ptr<afdi_bayes_net, decltype(&afdi_bn_free)> guard(b, afdi_bn_free);
      OwnedString warnings;
      check(afdi_bn_warnings_json(b, warnings.out()));
      if (warnings.str() != "[]") spdlog::warn("CPT rows renormalized on load: {}", warnings.str());
      std::vector<const char*> items;
      for (const auto& ev : evidence) items.push_back(ev.c_str());
      OwnedString out;
      check(afdi_bn_query_json(b, node.c_str(), items.data(), items.size(), out.out()));
      std::cout << out.str() << '\n';
    }
  } catch (const CallFailed& f) {
    spdlog::error("{}: {}", afdi_status_name(f.status), afdi_last_error());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
