#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "impatient/checkpoint.hpp"
#include "impatient/evaluator.hpp"
#include "impatient/inference.hpp"
#include "impatient/net.hpp"

namespace impatient::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kIdxFiles[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                      "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

const std::vector<double> kDefaultRatioThresholds = {
    1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0, 1000.0,
    std::numeric_limits<double>::infinity()};
const std::vector<double> kDefaultEntropyThresholds = {0.0,  0.05, 0.1, 0.15, 0.2, 0.3,
                                                       0.4,  0.5,  0.6, 0.8,  1.0};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("output directory " + dir.string() + " is not writable");
  return dir;
}

std::string checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? (fs::path(cfg.out) / "model.ckpt").string() : cfg.checkpoint;
}

std::vector<double> parse_thresholds(const nlohmann::json& j) {
  std::vector<double> out;
  for (const auto& v : j) {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s != "inf") throw ConfigError("threshold strings other than \"inf\" are not allowed");
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      out.push_back(v.get<double>());
    }
  }
  return out;
}

std::vector<double> parse_threshold_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    if (cell == "inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad threshold '" + cell + "'");
      }
    }
  }
  return out;
}

std::vector<double> thresholds_for(const RunConfig& cfg, const std::string& criterion) {
  if (auto it = cfg.thresholds.find(criterion); it != cfg.thresholds.end()) return it->second;
  return criterion == "ratio" ? kDefaultRatioThresholds : kDefaultEntropyThresholds;
}

Checkpoint open_checkpoint(const RunConfig& cfg) {
  const std::string path = checkpoint_path(cfg);
  if (!fs::exists(path)) throw IoError("checkpoint " + path + " does not exist");
  return load_checkpoint(path, cfg.architecture_given ? std::optional(cfg.architecture) : std::nullopt);
}

Dataset normalized_test_data(const RunConfig& cfg, const Checkpoint& ckpt) {
  Dataset test = load_test_data(cfg);
  if (ckpt.normalization) apply_normalization(test, *ckpt.normalization);
  return test;
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.architecture = block_architecture({1, 16, 16}, kSyntheticClasses, {8, 16, 32, 32}, true);
  cfg.data.synthetic.per_class = 300;
  cfg.train.epochs = 10;
  cfg.train.scheme = WeightScheme::named(SchemeKind::eq, cfg.architecture.heads.size());
  return cfg;
}

void apply_config(RunConfig& cfg, const nlohmann::json& doc) {
  try {
    if (doc.contains("architecture")) {
      cfg.architecture = Architecture::from_json(doc.at("architecture"));
      cfg.architecture_given = true;
    }
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      cfg.data.source = d.value("source", cfg.data.source);
      cfg.data.dir = d.value("dir", cfg.data.dir);
      cfg.data.train_csv = d.value("train_csv", cfg.data.train_csv);
      cfg.data.test_csv = d.value("test_csv", cfg.data.test_csv);
      if (d.contains("classes")) cfg.data.num_classes = d.at("classes").get<std::size_t>();
      auto& s = cfg.data.synthetic;
      s.per_class = d.value("per_class", s.per_class);
      s.image_size = d.value("image_size", s.image_size);
      s.background = d.value("background", s.background);
      s.min_amplitude = d.value("min_amplitude", s.min_amplitude);
      s.max_amplitude = d.value("max_amplitude", s.max_amplitude);
      s.noise = d.value("noise", s.noise);
      s.distractors = d.value("distractors", s.distractors);
      s.jitter = d.value("jitter", s.jitter);
      s.seed = d.value("seed", s.seed);
      cfg.data.test_per_class = d.value("test_per_class", cfg.data.test_per_class);
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      if (t.contains("learning_rate")) {
        cfg.train.learning_rate = t.at("learning_rate").get<double>();
        cfg.rate_given = true;
      }
      cfg.train.momentum = t.value("momentum", cfg.train.momentum);
      cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
      cfg.train.seed = t.value("seed", cfg.train.seed);
      cfg.train.divergence_factor = t.value("divergence_factor", cfg.train.divergence_factor);
      cfg.val_fraction = t.value("val_fraction", cfg.val_fraction);
    }
    if (doc.contains("budget")) cfg.budget = BudgetSpec::from_json(doc.at("budget"));
    if (doc.contains("eval")) {
      cfg.eval_schemes = doc.at("eval").value("schemes", cfg.eval_schemes);
    }
    if (doc.contains("cascade")) {
      const auto& c = doc.at("cascade");
      cfg.criteria = c.value("criteria", cfg.criteria);
      if (c.contains("thresholds")) {
        for (const auto& [name, grid] : c.at("thresholds").items()) {
          cfg.thresholds[name] = parse_thresholds(grid);
        }
      }
    }
    if (doc.contains("anytime")) {
      cfg.anytime_points = doc.at("anytime").value("points", cfg.anytime_points);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

PreparedData load_training_data(const RunConfig& cfg) {
  Dataset all;
  if (cfg.data.source == "synthetic") {
    all = generate_scale_cues(cfg.data.synthetic);
  } else if (cfg.data.source == "idx") {
    const fs::path dir(cfg.data.dir);
    all = load_idx((dir / kIdxFiles[0]).string(), (dir / kIdxFiles[1]).string(), cfg.data.num_classes);
  } else if (cfg.data.source == "csv") {
    all = load_csv(cfg.data.train_csv, cfg.architecture.input_shape, cfg.data.num_classes);
  } else {
    throw ConfigError("unknown data source '" + cfg.data.source + "'");
  }
  if (all.num_classes > cfg.architecture.num_classes) {
    throw ConfigError("data has " + std::to_string(all.num_classes) + " classes, network predicts " +
                      std::to_string(cfg.architecture.num_classes));
  }
  all.num_classes = cfg.architecture.num_classes;
  const std::vector<double> fractions =
      cfg.val_fraction > 0.0 ? std::vector<double>{1.0 - cfg.val_fraction, cfg.val_fraction}
                             : std::vector<double>{1.0};
  Dataset split = stratified_split(all, fractions, cfg.train.seed);
  PreparedData prepared;
  prepared.normalization = fit_normalization(split);
  apply_normalization(split, prepared.normalization);
  prepared.train = split.select(Split::train);
  prepared.val = cfg.val_fraction > 0.0 ? split.select(Split::val) : prepared.train;
  return prepared;
}

Dataset load_test_data(const RunConfig& cfg) {
  Dataset test;
  if (cfg.data.source == "synthetic") {
    SyntheticConfig s = cfg.data.synthetic;
    s.per_class = cfg.data.test_per_class;
    s.seed = cfg.data.synthetic.seed + 1000003;
    test = generate_scale_cues(s);
  } else if (cfg.data.source == "idx") {
    const fs::path dir(cfg.data.dir);
    test = load_idx((dir / kIdxFiles[2]).string(), (dir / kIdxFiles[3]).string(), cfg.data.num_classes);
  } else if (cfg.data.source == "csv") {
    test = load_csv(cfg.data.test_csv, cfg.architecture.input_shape, cfg.data.num_classes);
  } else {
    throw ConfigError("unknown data source '" + cfg.data.source + "'");
  }
  test.splits.assign(test.size(), Split::test);
  return test;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(const RunConfig& cfg) {
  const fs::path out = output_dir(cfg);
  PreparedData data = load_training_data(cfg);
  TrainConfig train_cfg = cfg.train;
  train_cfg.batchnorm = false;
  for (const auto& l : cfg.architecture.backbone) {
    if (l.kind == LayerKind::batch_norm) train_cfg.batchnorm = true;
  }
  if (!cfg.rate_given) {
    train_cfg.learning_rate =
        train_cfg.batchnorm ? TrainConfig::kRateWithBatchNorm : TrainConfig::kRateWithoutBatchNorm;
  }
  ImpatientNet net = ImpatientNet::build(cfg.architecture, cfg.train.seed);
  const CostModel costs = analytic_costs(net);
  train_cfg.scheme = cfg.budget.resolve(net.num_heads(), &costs.t_a, &costs.t_b);

  TrainLog log;
  try {
    log = train(net, data.train, data.val, train_cfg);
  } catch (const DivergenceError& e) {
    write_text(out / "trainlog.csv", e.log().to_csv(net.num_heads()));
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  }
  write_text(out / "trainlog.csv", log.to_csv(net.num_heads()));
  save_checkpoint(checkpoint_path(cfg), net, data.normalization);
  const auto& last = log.epochs.back();
  std::cout << "trained " << log.epochs.size() << " epochs, final val accuracy:";
  for (double a : last.val_accuracy) std::printf(" %.4f", a);
  std::cout << "\ncheckpoint: " << checkpoint_path(cfg) << "\n";
  return kOk;
}

int cmd_eval(const RunConfig& cfg) {
  const fs::path out = output_dir(cfg);
  Checkpoint ckpt = open_checkpoint(cfg);
  const Dataset test = normalized_test_data(cfg, ckpt);
  const CostModel costs = analytic_costs(ckpt.net);
  const auto acc = head_accuracies(evaluate_staged(ckpt.net, test));
  std::vector<ExpectedAccuracyReport> reports;
  for (const auto& name : cfg.eval_schemes) {
    const SchemeKind kind = scheme_kind_from_string(name);
    WeightScheme scheme;
    if (kind == SchemeKind::from_density) {
      scheme = cfg.budget.resolve(ckpt.net.num_heads(), &costs.t_a, &costs.t_b);
    } else {
      scheme = WeightScheme::named(kind, ckpt.net.num_heads());
      if (cfg.budget.kind == kind) {
        scheme.gamma = cfg.budget.gamma;
        scheme.beta = cfg.budget.beta;
      }
    }
    reports.push_back(expected_accuracy(acc, scheme));
  }
  write_text(out / "eval.csv", reports_to_csv(reports));
  const std::string summary = reports_summary(reports);
  write_text(out / "eval_summary.txt", summary);
  std::cout << summary;
  return kOk;
}

int cmd_costs(const RunConfig& cfg) {
  const fs::path out = output_dir(cfg);
  Checkpoint ckpt = open_checkpoint(cfg);
  CostModel costs = analytic_costs(ckpt.net);
  if (cfg.measure_time) {
    const Dataset test = normalized_test_data(cfg, ckpt);
    costs = measure_costs(ckpt.net, test.images.slice_batch(0, std::min<std::size_t>(64, test.size())));
  }
  write_text(out / "costs.csv", costs.to_csv());
  std::cout << costs.to_csv();
  return kOk;
}

int cmd_cascade(const RunConfig& cfg) {
  if (cfg.criteria.empty()) throw ConfigError("no cascade criterion requested");
  for (const auto& c : cfg.criteria) {
    criterion_from_string(c);
    if (thresholds_for(cfg, c).empty()) throw ConfigError("empty threshold grid for " + c);
  }
  const fs::path out = output_dir(cfg);
  Checkpoint ckpt = open_checkpoint(cfg);
  const Dataset test = normalized_test_data(cfg, ckpt);
  CostModel costs = analytic_costs(ckpt.net);
  if (cfg.measure_time) {
    costs = measure_costs(ckpt.net, test.images.slice_batch(0, std::min<std::size_t>(64, test.size())));
  }
  const StagedOutputs staged = evaluate_staged(ckpt.net, test);
  write_text(out / "per_head.csv", per_head_curve(staged, costs).to_csv());
  for (const auto& name : cfg.criteria) {
    const auto criterion = criterion_from_string(name);
    const auto grid = thresholds_for(cfg, name);
    const auto curve = cascade_sweep(staged, criterion, grid, costs);
    write_text(out / ("cascade_" + to_string(criterion) + ".csv"), curve.to_csv());
  }
  std::cout << "wrote per_head.csv";
  for (const auto& name : cfg.criteria) std::cout << " cascade_" << to_string(criterion_from_string(name)) << ".csv";
  std::cout << " to " << out.string() << "\n";
  return kOk;
}

int cmd_anytime_sim(const RunConfig& cfg) {
  if (cfg.anytime_points < 2) throw ConfigError("anytime simulation needs at least two points");
  const fs::path out = output_dir(cfg);
  Checkpoint ckpt = open_checkpoint(cfg);
  const Dataset test = normalized_test_data(cfg, ckpt);
  const CostModel costs = analytic_costs(ckpt.net);

  // Exit times themselves plus an even grid from t_a(1) to 1.1 * t_a(K).
  std::vector<double> budgets(costs.t_a.begin(), costs.t_a.end());
  const double lo = costs.t_a.front(), hi = 1.1 * costs.t_a.back();
  for (std::size_t i = 0; i < cfg.anytime_points; ++i) {
    budgets.push_back(std::round(lo + (hi - lo) * static_cast<double>(i) /
                                          static_cast<double>(cfg.anytime_points - 1)));
  }
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());

  std::string csv = "budget_macs,anytime_head,anytime_accuracy,budget_head,budget_accuracy\n";
  char buf[160];
  for (double budget : budgets) {
    std::size_t any_correct = 0, budget_correct = 0, any_head = 0, budget_head = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const Tensor x = test.images.slice_batch(i, 1);
      const auto a = predict_anytime(ckpt.net, x, budget, costs);
      const auto b = predict_with_budget(ckpt.net, x, budget, costs);
      any_head = a.head;
      budget_head = b.head;
      if (static_cast<int>(a.predicted_class) == test.labels[i]) ++any_correct;
      if (static_cast<int>(b.predicted_class) == test.labels[i]) ++budget_correct;
    }
    const double n = static_cast<double>(test.size());
    std::snprintf(buf, sizeof(buf), "%.0f,%zu,%.6f,%zu,%.6f\n", budget, any_head + 1,
                  static_cast<double>(any_correct) / n, budget_head + 1,
                  static_cast<double>(budget_correct) / n);
    csv += buf;
  }
  write_text(out / "anytime.csv", csv);
  std::cout << csv;
  return kOk;
}

int cmd_synth(const RunConfig& cfg) {
  const fs::path out = output_dir(cfg);
  SyntheticConfig s = cfg.data.synthetic;
  write_idx((out / kIdxFiles[0]).string(), (out / kIdxFiles[1]).string(), generate_scale_cues(s));
  RunConfig synthetic_cfg = cfg;
  synthetic_cfg.data.source = "synthetic";
  write_idx((out / kIdxFiles[2]).string(), (out / kIdxFiles[3]).string(),
            load_test_data(synthetic_cfg));
  std::cout << "wrote IDX files to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

int run(int argc, char** argv) {
  CLI::App app{"Early-exit (impatient) network training, evaluation and budgeted inference"};
  app.require_subcommand(1);

  std::string config_path, data, checkpoint, out = ".", scheme, thresholds, criteria;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> rate;
  bool measure = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed for initialization, splits and shuffling");
    sub->add_option("--data", data, "IDX directory, or 'synthetic'");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint path (default <out>/model.ckpt)");
    sub->add_option("--out", out, "Output directory");
  };
  auto* train_cmd = app.add_subcommand("train", "Train the joint weighted objective");
  auto* eval_cmd = app.add_subcommand("eval", "Expected accuracy per weighting scheme");
  auto* costs_cmd = app.add_subcommand("costs", "Per-head cost model (t_B, t_A)");
  auto* cascade_cmd = app.add_subcommand("cascade", "Per-head and cascade time-accuracy curves");
  auto* anytime_cmd = app.add_subcommand("anytime-sim", "Simulated interruption and a-priori budgets");
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic data set as IDX files");
  for (auto* sub : {train_cmd, eval_cmd, costs_cmd, cascade_cmd, anytime_cmd, synth_cmd}) add_common(sub);
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  train_cmd->add_option("--lr", rate, "Learning rate");
  train_cmd->add_option("--scheme", scheme, "Weighting scheme: std eq lin poly ilin ipoly norm");
  eval_cmd->add_option("--schemes", scheme, "Comma-separated schemes to report");
  cascade_cmd->add_option("--criteria", criteria, "Comma-separated: ratio,entropy");
  cascade_cmd->add_option("--thresholds", thresholds, "Comma-separated ascending thresholds");
  for (auto* sub : {costs_cmd, cascade_cmd}) sub->add_flag("--measure-time", measure, "Add wall-clock columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = default_config();
    cfg.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + config_path + ": " + e.what());
      }
      apply_config(cfg, doc);
    }
    // Flags win over the config file.
    if (seed) {
      cfg.train.seed = *seed;
      cfg.data.synthetic.seed = *seed;
    }
    if (!data.empty()) {
      if (data == "synthetic") {
        cfg.data.source = "synthetic";
      } else {
        if (!fs::is_directory(data)) throw IoError("data path " + data + " does not exist");
        cfg.data.source = "idx";
        cfg.data.dir = data;
      }
    }
    if (cfg.data.source == "idx" && !fs::is_directory(cfg.data.dir)) {
      throw IoError("data path " + cfg.data.dir + " does not exist");
    }
    cfg.checkpoint = checkpoint;
    cfg.out = out;
    cfg.measure_time = measure;
    if (epochs) cfg.train.epochs = *epochs;
    if (rate) {
      cfg.train.learning_rate = *rate;
      cfg.rate_given = true;
    }
    if (cfg.command == "train" && !scheme.empty()) {
      cfg.budget = BudgetSpec{};
      cfg.budget.kind = scheme_kind_from_string(scheme);
    }
    if (cfg.command == "eval" && !scheme.empty()) {
      cfg.eval_schemes.clear();
      std::stringstream ss(scheme);
      std::string s;
      while (std::getline(ss, s, ',')) cfg.eval_schemes.push_back(s);
    }
    if (cfg.command == "cascade") {
      if (!criteria.empty()) {
        cfg.criteria.clear();
        std::stringstream ss(criteria);
        std::string c;
        while (std::getline(ss, c, ',')) cfg.criteria.push_back(c);
      }
      if (cascade_cmd->count("--thresholds") > 0) {
        const auto grid = parse_threshold_list(thresholds);
        for (const auto& c : cfg.criteria) cfg.thresholds[c] = grid;
      }
      for (const auto& c : cfg.criteria) {
        if (thresholds_for(cfg, c).empty()) {
          std::cerr << "usage error: empty threshold grid for criterion " << c << "\n";
          return kUsage;
        }
      }
    }

    if (cfg.command == "train") return cmd_train(cfg);
    if (cfg.command == "eval") return cmd_eval(cfg);
    if (cfg.command == "costs") return cmd_costs(cfg);
    if (cfg.command == "cascade") return cmd_cascade(cfg);
    if (cfg.command == "anytime-sim") return cmd_anytime_sim(cfg);
    if (cfg.command == "synth") return cmd_synth(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), "impatient");
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace impatient::cli
