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
#include "recpoison/metrics.hpp"
#include "recpoison/model.hpp"

namespace recpoison {

// Attack tags accepted in grids: NoneAttack, Random, Bandwagon, CLeaR
// (alias CLeaR_D+R), CLeaR_D, CLeaR_R.
enum class AttackKind { None, Random, Bandwagon, Clear, ClearD, ClearR };

AttackKind parse_attack_kind(const std::string& tag);
std::string to_string(AttackKind k);
bool is_clear(AttackKind k);

struct ReportRow {
    std::string dataset;
    std::string model;
    std::string attack;
    std::string seed;  // decimal seed, or "mean" on aggregate rows
    double attack_size = 0.0;
    double alpha = 0.0;
    double hr_at_k = 0.0;
    double ndcg_at_k = 0.0;
    double recall_at_k = 0.0;
};

struct FailedCell {
    std::string dataset;
    std::string model;
    std::string attack;
    std::uint64_t seed = 0;
    std::string error;
};

struct AttackReport {
    std::vector<ReportRow> rows;        // per seed
    std::vector<ReportRow> aggregates;  // mean over seeds per (dataset, model, attack, size, alpha)
    std::vector<FailedCell> failures;
};

// Recomputes `aggregates` from `rows` (group order = first appearance).
void aggregate(AttackReport& report);

struct ExperimentCell {
    std::string dataset;
    ModelConfig victim;
    AttackKind attack = AttackKind::None;
    double attack_size = 0.01;
    AttackConfig attack_config;
    std::optional<ModelConfig> surrogate;  // black-box transfer when set
    std::size_t n_targets = 10;
    double popular_fraction = 0.1;
    std::size_t k = 50;
    std::uint64_t seed = 1;

    std::string attack_tag() const;
};

nlohmann::json to_json(const ExperimentCell& c);

// Attack parameters of a CLeaR cell (seed, K and the ablation switches applied).
AttackConfig effective_attack_config(const ExperimentCell& cell);
// Model the attacker trains: the victim config (white-box) or the surrogate.
ModelConfig inner_model(const ExperimentCell& cell);

// Profile used by one cell (empty discretized set list for NoneAttack).
MaliciousProfile build_attack(const InteractionDataset& ds, const ExperimentCell& cell, const AttackBudget& budget);

// Budget + attack + victim retraining + metrics for a single cell.
ReportRow run_cell(const InteractionDataset& ds, const ExperimentCell& cell);

struct ExperimentGrid {
    std::string dataset = "desk";
    std::vector<ModelConfig> models;
    std::vector<std::string> attacks;
    std::vector<double> attack_sizes{0.01};
    std::vector<double> alphas;  // empty: use attack_config.alpha
    std::size_t seeds = 10;
    std::uint64_t base_seed = 1;
    AttackConfig attack_config;
    std::optional<ModelConfig> surrogate;
    std::size_t n_targets = 10;
    double popular_fraction = 0.1;
    std::size_t k = 50;

    std::vector<ExperimentCell> cells() const;
};

struct RunOptions {
    std::optional<std::filesystem::path> cache_dir;  // per-cell results keyed by content hash
    std::size_t workers = 1;
};

AttackReport run_experiment(const InteractionDataset& ds, const ExperimentGrid& grid, const RunOptions& options = {});

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& s);
// Hash of the cell config together with the dataset contents.
std::string cell_key(const InteractionDataset& ds, const ExperimentCell& cell);

nlohmann::json report_to_json(const AttackReport& report);
AttackReport report_from_json(const nlohmann::json& j);
std::string report_csv(const AttackReport& report);
std::string report_long_csv(const AttackReport& report);
// Writes <stem>.csv, <stem>.json and <stem>_long.csv into dir.
void emit_report(const AttackReport& report, const std::filesystem::path& dir, const std::string& stem = "report");

}  // namespace recpoison
