#include "recpoison/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recpoison/error.hpp"

namespace recpoison {

namespace {

const std::vector<Index>& items_of(const std::vector<std::vector<Index>>& by_user, Index u) {
    static const std::vector<Index> none;
    return u < by_user.size() ? by_user[u] : none;
}

bool contains(const std::vector<Index>& sorted, Index x) { return std::binary_search(sorted.begin(), sorted.end(), x); }

void check_lists(const RecommendationList& lists, std::span<const Index> users) {
    if (lists.size() != users.size()) throw InputError("one recommendation list per user is required");
}

}  // namespace

double hit_ratio_at_k(const RecommendationList& lists, std::span<const Index> users, const std::vector<Index>& targets,
                      const std::vector<std::vector<Index>>& train_items) {
    check_lists(lists, users);
    std::size_t pairs = 0, hits = 0;
    for (std::size_t k = 0; k < users.size(); ++k) {
        const auto& seen = items_of(train_items, users[k]);
        for (Index t : targets) {
            if (contains(seen, t)) continue;
            ++pairs;
            if (std::find(lists[k].begin(), lists[k].end(), t) != lists[k].end()) ++hits;
        }
    }
    if (pairs == 0) throw InputError("hit ratio: no eligible (user, target) pairs");
    return static_cast<double>(hits) / static_cast<double>(pairs);
}

double ndcg_at_k(const RecommendationList& lists, std::span<const Index> users, const std::vector<Index>& targets,
                 const std::vector<std::vector<Index>>& train_items, std::size_t k) {
    check_lists(lists, users);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t n = 0; n < users.size(); ++n) {
        const auto& seen = items_of(train_items, users[n]);
        std::size_t eligible = 0;
        for (Index t : targets)
            if (!contains(seen, t)) ++eligible;
        if (eligible == 0) continue;
        double dcg = 0.0;
        for (std::size_t r = 0; r < lists[n].size() && r < k; ++r) {
            const Index item = lists[n][r];
            if (std::find(targets.begin(), targets.end(), item) != targets.end() && !contains(seen, item))
                dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
        double idcg = 0.0;
        for (std::size_t r = 0; r < std::min(eligible, k); ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        total += dcg / idcg;
        ++counted;
    }
    if (counted == 0) throw InputError("NDCG: no user with an eligible target");
    return total / static_cast<double>(counted);
}

double recall_at_k(const RecommendationList& lists, std::span<const Index> users,
                   const std::vector<std::vector<Index>>& test_items) {
    check_lists(lists, users);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t n = 0; n < users.size(); ++n) {
        const auto& test = items_of(test_items, users[n]);
        if (test.empty()) continue;
        std::size_t hit = 0;
        for (Index i : lists[n])
            if (contains(test, i)) ++hit;
        total += static_cast<double>(hit) / static_cast<double>(test.size());
        ++counted;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
}

FinalTables final_tables(const ModelState& state, const InteractionDataset& ds, const MaliciousProfiles* malicious) {
    const PropagationGraph g = malicious ? build_graph(ds, *malicious) : build_graph(ds);
    const Matrix z = final_embeddings(state, g);
    return {slice_rows(z, 0, ds.n_users()), slice_rows(z, state.n_users(), ds.n_items())};
}

EvalMetrics evaluate_model(const ModelState& state, const InteractionDataset& ds, const MaliciousProfiles* malicious,
                           const std::vector<Index>& targets, std::size_t k) {
    const auto tables = final_tables(state, ds, malicious);
    const auto train = ds.train_items_by_user();
    std::vector<Index> users(ds.n_users());
    std::iota(users.begin(), users.end(), Index{0});
    const auto lists = recommend_topk(tables.users, tables.items, train, k, users);
    EvalMetrics m;
    if (!targets.empty()) {
        m.hr = hit_ratio_at_k(lists, users, targets, train);
        m.ndcg = ndcg_at_k(lists, users, targets, train, k);
    }
    m.recall = recall_at_k(lists, users, ds.test_items_by_user());
    return m;
}

}  // namespace recpoison
