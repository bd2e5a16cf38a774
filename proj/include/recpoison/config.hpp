#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "recpoison/attack.hpp"
#include "recpoison/data.hpp"
#include "recpoison/experiment.hpp"
#include "recpoison/model.hpp"

namespace recpoison {

// Config file layout (JSON, every key optional, unknown keys rejected):
//
// {
//   "dataset": {"path": "synthetic", "tag": "desk", "split_seed": 7, "n_targets": 10},
//   "model":   {"encoder": "LightGCN", "cl": "simgcl", "dim": 32, ...},
//   "attack":  {"kind": "CLeaR", "attack_size": 0.01, "budget_rule": "mean",
//               "popular_fraction": 0.1, "mode": "whitebox", "surrogate": {model keys},
//               "alpha": 0.5, "rounds": 5, "outer_steps": 50, ...},
//   "eval":    {"k": 50, "seeds": 10, "base_seed": 1, "metrics": ["hr", "ndcg", "recall"],
//               "models": [{model keys}, ...], "attacks": ["NoneAttack", "CLeaR"],
//               "sweep": {"axis": "attack_size", "values": [0.01, 0.02]}},
//   "output": "run"
// }
//
// dataset.path is "synthetic" (bundled generator), a persisted dataset
// directory, or a raw interaction file that is split with split_seed.

struct DatasetSection {
    std::string path = "synthetic";
    std::string tag = "desk";
    std::uint64_t split_seed = 7;
    std::size_t n_targets = 10;
};

struct AttackSection {
    std::string kind = "CLeaR";
    double attack_size = 0.01;
    std::string budget_rule = "mean";  // per-user budget = mean train interactions per user
    double popular_fraction = 0.1;
    std::string mode = "whitebox";     // or "blackbox"
    std::optional<ModelConfig> surrogate;
    AttackConfig params;
};

struct SweepSection {
    std::string axis;  // "", "attack_size" or "alpha"
    std::vector<double> values;
};

struct EvalSection {
    std::size_t k = 50;
    std::size_t seeds = 10;
    std::uint64_t base_seed = 1;
    std::vector<std::string> metrics{"hr", "ndcg", "recall"};
    std::vector<ModelConfig> models;  // empty: the model section alone
    std::vector<std::string> attacks;  // empty: attack.kind alone
    SweepSection sweep;
};

struct RunConfig {
    DatasetSection dataset;
    ModelConfig model;
    AttackSection attack;
    EvalSection eval;
    std::string output = "run";

    void validate() const;
};

// Desk defaults: embedding size, learning rate and epochs scaled down to the
// bundled 300 x 500 dataset.
RunConfig default_run_config();

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = default_run_config());
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

// Loads or generates the dataset named by the config (always split).
InteractionDataset load_config_dataset(const DatasetSection& d);

// Grid described by the eval section (models x attacks x seeds, plus the sweep axis).
ExperimentGrid make_grid(const RunConfig& c);

// Output directory: $RECPOISON_OUT (or ".") joined with c.output unless
// `override_dir` is given.
std::filesystem::path output_dir(const RunConfig& c, const std::optional<std::filesystem::path>& override_dir = {});

// Writes resolved_config.json into dir.
void write_resolved_config(const RunConfig& c, const std::filesystem::path& dir);

}  // namespace recpoison
