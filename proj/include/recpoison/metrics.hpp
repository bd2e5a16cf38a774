#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "recpoison/data.hpp"
#include "recpoison/model.hpp"

namespace recpoison {

// lists[k] is the top-K list of users[k]; train_items / test_items are
// indexed by user and sorted.

// Mean over (u, t) with t not in u's train items of 1[t in list(u)].
// Throws InputError when no pair is eligible.
double hit_ratio_at_k(const RecommendationList& lists, std::span<const Index> users, const std::vector<Index>& targets,
                      const std::vector<std::vector<Index>>& train_items);

// Per-user DCG / IDCG over eligible targets, averaged over users with at
// least one eligible target.
double ndcg_at_k(const RecommendationList& lists, std::span<const Index> users, const std::vector<Index>& targets,
                 const std::vector<std::vector<Index>>& train_items, std::size_t k);

// Mean over users with test items of |list ∩ test| / |test|. 0 when no user has test items.
double recall_at_k(const RecommendationList& lists, std::span<const Index> users,
                   const std::vector<std::vector<Index>>& test_items);

struct EvalMetrics {
    double hr = 0.0;
    double ndcg = 0.0;
    double recall = 0.0;
};

// Scores every genuine user of a trained (possibly poisoned) model.
EvalMetrics evaluate_model(const ModelState& state, const InteractionDataset& ds,
                           const MaliciousProfiles* malicious, const std::vector<Index>& targets, std::size_t k);

// Clean final embeddings split into genuine users and items.
struct FinalTables {
    Matrix users;
    Matrix items;
};
FinalTables final_tables(const ModelState& state, const InteractionDataset& ds, const MaliciousProfiles* malicious);

}  // namespace recpoison
