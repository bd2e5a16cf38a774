#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "recpoison/data.hpp"
#include "recpoison/graph.hpp"
#include "recpoison/matrix.hpp"
#include "recpoison/model.hpp"
#include "recpoison/rng.hpp"
#include "recpoison/spectral.hpp"

namespace recpoison {

// Fake-user interactions. `weights` is the continuous relaxation (target
// columns pinned at 1); `discretized` holds the item sets actually injected.
struct MaliciousProfile {
    Matrix weights;
    MaliciousProfiles discretized;
    AttackBudget budget;

    std::size_t n_malicious() const { return budget.n_malicious; }
    // Throws InputError when a budget or pinning invariant is broken.
    void validate(std::size_t n_items) const;
};

struct AttackConfig {
    double alpha = 0.5;            // rank-promotion weight
    bool use_dispersion = true;    // false gives the rank-only ablation
    std::size_t rounds = 5;
    std::size_t inner_epochs = 20;
    std::size_t outer_steps = 50;
    double step_size = 0.01;
    std::size_t user_sample = 0;   // 0 = all genuine users in L_R
    std::size_t k = 50;
    std::uint64_t seed = 1;
    bool stacked = false;          // one L_D over [Z_U; Z_I] instead of a sum of two
    DispersionNorm norm = DispersionNorm::L1;
    std::size_t patience = 0;      // stop after this many rounds without HR gain; 0 runs all rounds
    std::size_t max_halvings = 8;

    void validate() const;
};

nlohmann::json to_json(const AttackConfig& c);
AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig base = {});

// Every malicious user interacts with the targets only; w pinned accordingly.
MaliciousProfile targets_only_profile(const AttackBudget& budget, std::size_t n_items);

MaliciousProfile random_attack(const AttackBudget& budget, const InteractionDataset& ds, std::uint64_t seed);

// Fillers drawn from the top `popular_fraction` items by train popularity
// (targets excluded). A popular set smaller than the filler count is taken whole.
MaliciousProfile bandwagon_attack(const AttackBudget& budget, const InteractionDataset& ds, double popular_fraction,
                                  std::uint64_t seed);

// g(x) = x for x >= 0, e^x - 1 otherwise.
double cw_g(double x);
double cw_g_prime(double x);

struct RankLossResult {
    double loss = 0.0;
    std::size_t pairs = 0;
    Matrix grad_users;  // same shape as user_final
    Matrix grad_items;
};

// Sum over users u and targets t not in u's train items of
// g(z_u.z_t - z_u.z_k), z_k the K-th best non-target, non-train item of u
// (the lowest available one when fewer than K exist).
RankLossResult cw_rank_loss(const Matrix& user_final, const Matrix& item_final, const std::vector<Index>& targets,
                            std::size_t k, std::span<const Index> users,
                            const std::vector<std::vector<Index>>& train_items, bool with_gradient = false);

// Frozen-degree relaxed problem for one outer step.
struct AttackProblem {
    std::size_t n_genuine = 0;
    std::size_t n_malicious = 0;
    std::size_t n_items = 0;
    std::size_t n_layers = 1;
    Matrix base;                        // E0 over [genuine, malicious, items]
    std::vector<WeightedEdge> genuine_edges;
    std::vector<double> frozen_degrees;
    std::vector<Index> targets;         // sorted
    std::vector<std::vector<Index>> train_items;  // genuine users
    std::vector<Index> rank_users;
    std::vector<DeflationState> deflation;  // {users, items} or {stacked}
    AttackConfig config;

    std::size_t n_users() const { return n_genuine + n_malicious; }
    std::size_t n_nodes() const { return n_users() + n_items; }
};

struct AttackTerms {
    double dispersion = 0.0;
    double rank = 0.0;
    double total = 0.0;
};

// Builds the problem around `w`: degrees are taken from w and frozen, V is
// drawn from Z(w) and the L_R user sample is drawn.
AttackProblem make_attack_problem(const InteractionDataset& ds, const ModelState& state, const Matrix& w,
                                  const std::vector<Index>& targets, const AttackConfig& config, Rng& rng);
// Re-freezes degrees at `w`, redraws V and the user sample.
void refresh_problem(AttackProblem& p, const Matrix& w, Rng& rng);

PropagationGraph relaxed_graph(const AttackProblem& p, const Matrix& w);
// Z(w) = propagate over the frozen-degree graph.
Matrix relaxed_forward(const AttackProblem& p, const Matrix& w);
// L_D + alpha * L_R on Z (L_D skipped when use_dispersion is false).
AttackTerms attack_loss(const AttackProblem& p, const Matrix& z);
// dL_attack / dZ with V' and the K-th items held fixed.
Matrix attack_loss_gradient(const AttackProblem& p, const Matrix& z);
// dL_attack / dw through the frozen-degree propagation; target columns are 0.
Matrix outer_gradient(const AttackProblem& p, const Matrix& w);

struct AscentStats {
    std::size_t steps = 0;
    std::size_t accepted = 0;
    AttackTerms last;
};

// T ascent steps on w (in place); each step refreezes degrees and redraws V,
// moves along g / max|g| and halves the step while the loss decreases.
AscentStats outer_ascent(const InteractionDataset& ds, const ModelState& state, Matrix& w,
                         const std::vector<Index>& targets, const AttackConfig& config, Rng& rng);

// Targets plus the per_user_budget - |targets| highest positive non-target
// weights of each row; ties go to the lower item index.
MaliciousProfiles greedy_discretize(const Matrix& w, const AttackBudget& budget);

struct RoundTrace {
    std::size_t round = 0;
    double dispersion = 0.0;
    double rank = 0.0;
    double hr_at_k = 0.0;
    std::size_t steps = 0;
    std::size_t accepted = 0;
};

struct ClearResult {
    MaliciousProfile profile;
    std::vector<RoundTrace> trace;
};

ClearResult clear_attack(const InteractionDataset& ds, const ModelConfig& victim, const AttackConfig& config,
                         const AttackBudget& budget);

// {"<malicious index>": [items...]}
nlohmann::json profile_to_json(const MaliciousProfiles& p);
MaliciousProfiles profile_from_json(const nlohmann::json& j, std::size_t n_items);
void save_profile(const MaliciousProfile& p, const std::filesystem::path& json_path);
// Reads the JSON profile and, when present, the `.w.bin` sidecar.
MaliciousProfile load_profile(const std::filesystem::path& json_path, const AttackBudget& budget, std::size_t n_items);
void write_weights(const Matrix& w, const std::filesystem::path& path);
Matrix read_weights(const std::filesystem::path& path);

}  // namespace recpoison
