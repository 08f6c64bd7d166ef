#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowdrel/data.hpp"
#include "crowdrel/matrix.hpp"
#include "crowdrel/model.hpp"

namespace crowdrel {

// Flat key=value settings shared by the simulate/train/eval pipelines.
// Keys accept '-' or '_'. Only explicitly set keys enter the hash.
class ExperimentConfig {
 public:
  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin = "<config>");

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // value or built-in default
  const std::map<std::string, std::string>& explicit_values() const noexcept {
    return values_;
  }

  // Output locations are left out so the same experiment hashes the same
  // wherever it is written.
  std::string canonical() const;
  std::string hash() const;

  static const std::vector<std::string>& known_keys();
  static std::string default_output_dir();  // $CROWDREL_OUT_DIR or ./crowdrel-out

 private:
  std::map<std::string, std::string> values_;
};

using Logger = std::function<void(const std::string&)>;

struct DataBundle {
  LabelSet labels;
  InstanceFormat format = InstanceFormat::dense_csv;
  std::vector<Instance> instances;
  AnnotationSet annotations;
  std::optional<GoldLabels> gold;
};

DataBundle load_data(const ExperimentConfig& config);

// Generated instances, annotations and gold from the dataset/panel keys.
DataBundle generate_data(const ExperimentConfig& config,
                         std::vector<std::string>* panel_names = nullptr);

struct Features {
  Matrix x;
  std::string kind;  // none | tfidf | embedding
};

Features featurize(const DataBundle& data, const ExperimentConfig& config);

// TrainConfig with layer widths defaulted from the feature kind.
TrainConfig train_config(const ExperimentConfig& config, const std::string& feature_kind);

struct SimulateOutput {
  std::string directory;
  std::vector<std::string> files;
  std::size_t n_instances = 0;
  std::size_t n_annotators = 0;
  std::size_t n_annotations = 0;
};

struct TrainOutput {
  std::string directory;
  std::vector<std::string> files;
  std::size_t outer_iterations = 0;
  bool stopped_early = false;
  std::optional<double> final_f1;
};

struct EvalOutput {
  std::string directory;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, double>> metrics;
  std::string text;  // tables, as written to report.txt
};

SimulateOutput cmd_simulate(const ExperimentConfig& config, const Logger& log = {});
TrainOutput cmd_train(const ExperimentConfig& config, const Logger& log = {});
EvalOutput cmd_eval(const ExperimentConfig& config, const Logger& log = {});

}  // namespace crowdrel
