#include "recpoison/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "recpoison/error.hpp"
#include "recpoison/matrix.hpp"
#include "recpoison/rng.hpp"

namespace recpoison {

InteractionDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_users == 0 || spec.n_items < 2) throw InputError("synthetic dataset needs users and items");
    if (spec.min_interactions >= spec.n_items) throw InputError("min_interactions must be below n_items");

    auto rng = make_rng(spec.seed, {0x5e7});
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto unit_rows = [&](std::size_t n) {
        Matrix m(n, spec.latent_dim);
        for (std::size_t r = 0; r < n; ++r) {
            double norm = 0.0;
            for (double& v : m.row(r)) {
                v = gauss(rng);
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (double& v : m.row(r)) v /= norm;
        }
        return m;
    };
    const Matrix user_f = unit_rows(spec.n_users);
    const Matrix item_f = unit_rows(spec.n_items);

    // Popularity rank is a random permutation so item ids carry no signal.
    std::vector<std::size_t> rank(spec.n_items);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::shuffle(rank.begin(), rank.end(), rng);
    std::vector<double> log_pop(spec.n_items);
    for (std::size_t i = 0; i < spec.n_items; ++i)
        log_pop[i] = -spec.popularity_exponent * std::log(static_cast<double>(rank[i] + 1));

    // Per-user activity: log-normal around the requested mean.
    const double sigma = 0.5;
    std::lognormal_distribution<double> activity(std::log(spec.mean_interactions) - 0.5 * sigma * sigma, sigma);

    InteractionDataset ds;
    for (std::size_t u = 0; u < spec.n_users; ++u) ds.users.intern("u" + std::to_string(u));
    for (std::size_t i = 0; i < spec.n_items; ++i) ds.items.intern("i" + std::to_string(i));

    std::vector<double> weights(spec.n_items);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        auto n_u = static_cast<std::size_t>(std::llround(activity(rng)));
        n_u = std::clamp(n_u, spec.min_interactions, spec.n_items / 2);
        for (std::size_t i = 0; i < spec.n_items; ++i)
            weights[i] = std::exp(log_pop[i] + spec.affinity * dot(user_f.row(u), item_f.row(i)));
        // Weighted sampling without replacement (exponential keys).
        std::vector<std::pair<double, std::size_t>> keys(spec.n_items);
        std::exponential_distribution<double> expo(1.0);
        for (std::size_t i = 0; i < spec.n_items; ++i) keys[i] = {expo(rng) / weights[i], i};
        std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_u), keys.end());
        for (std::size_t k = 0; k < n_u; ++k)
            ds.train.push_back({static_cast<Index>(u), static_cast<Index>(keys[k].second)});
    }
    std::sort(ds.train.begin(), ds.train.end());
    ds.recompute_popularity();
    return ds;
}

}  // namespace recpoison
