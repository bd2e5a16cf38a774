#pragma once

// Exhaustive-enumeration oracles for the target and accuracy metrics on tiny
// instances, plus a generator of such instances.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "recpoison/data.hpp"
#include "recpoison/rng.hpp"

namespace oracle {

using recpoison::Index;

struct TinyInstance {
    std::size_t n_items = 0;
    std::size_t k = 1;
    std::vector<Index> users;
    std::vector<std::vector<Index>> lists;  // per position in users
    std::vector<Index> targets;
    std::vector<std::vector<Index>> train;  // per user id
    std::vector<std::vector<Index>> test;
};

inline bool in(const std::vector<Index>& v, Index x) { return std::find(v.begin(), v.end(), x) != v.end(); }

inline TinyInstance random_instance(recpoison::Rng& rng) {
    TinyInstance t;
    std::uniform_int_distribution<int> nu(1, 5), ni(1, 8);
    std::bernoulli_distribution coin(0.3);
    const std::size_t n_users = static_cast<std::size_t>(nu(rng));
    t.n_items = static_cast<std::size_t>(ni(rng));
    t.k = std::uniform_int_distribution<std::size_t>(1, t.n_items)(rng);
    for (Index i = 0; i < t.n_items; ++i)
        if (coin(rng)) t.targets.push_back(i);
    if (t.targets.empty()) t.targets.push_back(std::uniform_int_distribution<Index>(0, static_cast<Index>(t.n_items - 1))(rng));
    t.train.resize(n_users);
    t.test.resize(n_users);
    for (Index u = 0; u < n_users; ++u) {
        t.users.push_back(u);
        std::vector<Index> pool;
        for (Index i = 0; i < t.n_items; ++i) {
            if (coin(rng)) t.train[u].push_back(i);
            else if (coin(rng)) t.test[u].push_back(i);
            else pool.push_back(i);
        }
        for (Index i : t.test[u]) pool.push_back(i);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min(pool.size(), t.k));
        t.lists.push_back(pool);
    }
    return t;
}

// Per (user, target) pair with target outside train: 1 if listed.
inline std::optional<double> hr(const TinyInstance& t) {
    double hits = 0.0, pairs = 0.0;
    for (std::size_t n = 0; n < t.users.size(); ++n)
        for (Index x : t.targets) {
            if (in(t.train[t.users[n]], x)) continue;
            pairs += 1.0;
            if (in(t.lists[n], x)) hits += 1.0;
        }
    if (pairs == 0.0) return std::nullopt;
    return hits / pairs;
}

inline double dcg_of(const std::vector<Index>& list, const std::vector<Index>& relevant, std::size_t k) {
    double s = 0.0;
    for (std::size_t r = 0; r < list.size() && r < k; ++r)
        if (in(relevant, list[r])) s += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return s;
}

// IDCG by enumerating every length-min(k, n_items - |train|) ordering of
// non-train items and keeping the best DCG.
inline double ideal_dcg(std::size_t n_items, const std::vector<Index>& train, const std::vector<Index>& relevant,
                        std::size_t k) {
    std::vector<Index> cand;
    for (Index i = 0; i < n_items; ++i)
        if (!in(train, i)) cand.push_back(i);
    const std::size_t len = std::min(k, cand.size());
    double best = 0.0;
    std::vector<Index> cur;
    std::vector<char> used(cand.size(), 0);
    std::function<void()> rec = [&] {
        if (cur.size() == len) {
            best = std::max(best, dcg_of(cur, relevant, k));
            return;
        }
        for (std::size_t c = 0; c < cand.size(); ++c) {
            if (used[c]) continue;
            used[c] = 1;
            cur.push_back(cand[c]);
            rec();
            cur.pop_back();
            used[c] = 0;
        }
    };
    rec();
    return best;
}

inline std::optional<double> ndcg(const TinyInstance& t) {
    double total = 0.0, users = 0.0;
    for (std::size_t n = 0; n < t.users.size(); ++n) {
        const auto& train = t.train[t.users[n]];
        std::vector<Index> relevant;
        for (Index x : t.targets)
            if (!in(train, x)) relevant.push_back(x);
        if (relevant.empty()) continue;
        total += dcg_of(t.lists[n], relevant, t.k) / ideal_dcg(t.n_items, train, relevant, t.k);
        users += 1.0;
    }
    if (users == 0.0) return std::nullopt;
    return total / users;
}

inline double recall(const TinyInstance& t) {
    double total = 0.0, users = 0.0;
    for (std::size_t n = 0; n < t.users.size(); ++n) {
        const auto& test = t.test[t.users[n]];
        if (test.empty()) continue;
        double hit = 0.0;
        for (Index i : t.lists[n])
            if (in(test, i)) hit += 1.0;
        total += hit / static_cast<double>(test.size());
        users += 1.0;
    }
    return users == 0.0 ? 0.0 : total / users;
}

}  // namespace oracle
