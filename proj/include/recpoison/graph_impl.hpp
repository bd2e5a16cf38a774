#pragma once

#include <random>

namespace recpoison {

template <class Urbg>
PropagationGraph drop_edges(const PropagationGraph& g, double drop_rate, Urbg& rng) {
    std::bernoulli_distribution keep(1.0 - drop_rate);
    std::vector<WeightedEdge> kept;
    kept.reserve(g.edges().size());
    for (const auto& e : g.edges())
        if (keep(rng)) kept.push_back(e);
    return build_graph_from_edges(g.n_users(), g.n_items(), std::move(kept));
}

}  // namespace recpoison
