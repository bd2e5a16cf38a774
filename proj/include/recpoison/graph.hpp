#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "recpoison/data.hpp"
#include "recpoison/matrix.hpp"

namespace recpoison {

struct WeightedEdge {
    Index user = 0;  // global user row (genuine users first, malicious after)
    Index item = 0;
    double weight = 1.0;
};

// Symmetric-normalized bipartite adjacency, a_ui = w_ui / sqrt(deg(u) deg(i)),
// over nodes [users..., items...]. Isolated nodes keep a unit self-loop so they
// pass their base embedding through every layer.
class PropagationGraph {
public:
    PropagationGraph() = default;

    std::size_t n_users() const { return n_users_; }
    std::size_t n_items() const { return n_items_; }
    std::size_t n_nodes() const { return n_users_ + n_items_; }
    std::size_t item_node(Index item) const { return n_users_ + item; }

    const std::vector<WeightedEdge>& edges() const { return edges_; }
    const std::vector<double>& degrees() const { return degree_; }
    bool isolated(std::size_t node) const { return isolated_[node] != 0; }

    // Stored entry (node, node) or 0.
    double entry(std::size_t row, std::size_t col) const;
    std::size_t nnz() const { return col_.size(); }

    // y = A x for node-stacked x (n_nodes x d).
    Matrix multiply(const Matrix& x) const;

    friend PropagationGraph build_graph_from_edges(std::size_t, std::size_t, std::vector<WeightedEdge>,
                                                   const std::vector<double>*);

private:
    std::size_t n_users_ = 0;
    std::size_t n_items_ = 0;
    std::vector<WeightedEdge> edges_;
    std::vector<double> degree_;
    std::vector<char> isolated_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_;
    std::vector<double> val_;
};

// Edges with zero weight are dropped. When `frozen_degrees` is given the
// normalization uses those degrees instead of the edge weight sums.
PropagationGraph build_graph_from_edges(std::size_t n_users, std::size_t n_items, std::vector<WeightedEdge> edges,
                                        const std::vector<double>* frozen_degrees = nullptr);

// Genuine train edges plus optional relaxed malicious weights (n_malicious x n_items,
// entries in [0,1]); malicious user m is row n_users + m.
PropagationGraph build_graph(const InteractionDataset& ds, const Matrix* malicious_weights = nullptr);

// Genuine train edges plus discretized malicious profiles (weight 1).
PropagationGraph build_graph(const InteractionDataset& ds, const std::vector<std::vector<Index>>& malicious);

// Keeps each edge independently with probability 1 - drop_rate; degrees are recomputed.
template <class Urbg>
PropagationGraph drop_edges(const PropagationGraph& g, double drop_rate, Urbg& rng);

// Layer outputs E_0 .. E_L with E_l = A E_{l-1}.
std::vector<Matrix> propagate_layers(const PropagationGraph& g, const Matrix& base, std::size_t n_layers);

// Mean of E_0 .. E_L.
Matrix layer_mean(const std::vector<Matrix>& layers);
Matrix propagate(const PropagationGraph& g, const Matrix& base, std::size_t n_layers);

// Gradient w.r.t. E_0 given gradients w.r.t. each layer output E_l.
// Entries of layer_grads may be empty matrices (treated as zero).
Matrix backprop_layers(const PropagationGraph& g, const std::vector<Matrix>& layer_grads);

// Gradient w.r.t. E_0 of <G, propagate(g, E_0, L)>.
Matrix backprop_mean(const PropagationGraph& g, const Matrix& grad_mean, std::size_t n_layers);

}  // namespace recpoison

#include "recpoison/graph_impl.hpp"
