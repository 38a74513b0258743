#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "impatient/architecture.hpp"
#include "impatient/budget.hpp"
#include "impatient/data.hpp"
#include "impatient/inference.hpp"
#include "impatient/synthetic.hpp"
#include "impatient/trainer.hpp"
#include "json.hpp"

namespace impatient::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // IO, config or shape errors
  kUsage = 2,    // bad command line
  kDiverged = 3,
};

/// Where examples come from: a directory of IDX files or the synthetic
/// scale-cue generator.
struct DataSpec {
  std::string source = "synthetic";  // "synthetic" | "idx" | "csv"
  std::string dir;                   // idx: directory holding the four files
  std::string train_csv, test_csv;   // csv
  std::size_t test_per_class = 100;  // synthetic
  SyntheticConfig synthetic;
  std::optional<std::size_t> num_classes;
};

struct RunConfig {
  std::string command;
  std::string checkpoint;
  std::string out = ".";
  Architecture architecture;
  bool architecture_given = false;
  DataSpec data;
  TrainConfig train;
  /// Unset: pick the default rate for the architecture's batch-norm setting.
  bool rate_given = false;
  double val_fraction = 0.1;
  BudgetSpec budget;
  std::vector<std::string> eval_schemes = {"eq", "lin", "poly", "ilin", "ipoly", "norm"};
  std::vector<std::string> criteria = {"ratio"};
  std::map<std::string, std::vector<double>> thresholds;
  std::size_t anytime_points = 12;
  bool measure_time = false;
};

/// Default run config (desk-scale synthetic setup).
RunConfig default_config();

/// Applies a JSON config document on top of `cfg`.
void apply_config(RunConfig& cfg, const nlohmann::json& doc);

/// Train/val split tagged, normalized with train statistics.
struct PreparedData {
  Dataset train;
  Dataset val;
  Normalization normalization;
};

PreparedData load_training_data(const RunConfig& cfg);
/// Test examples, not yet normalized.
Dataset load_test_data(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_costs(const RunConfig& cfg);
int cmd_cascade(const RunConfig& cfg);
int cmd_anytime_sim(const RunConfig& cfg);
int cmd_synth(const RunConfig& cfg);

/// Entry point shared by the executable and the tests.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace impatient::cli
