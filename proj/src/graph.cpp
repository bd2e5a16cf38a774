#include "recpoison/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recpoison/error.hpp"

namespace recpoison {

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw InputError("vstack: column mismatch");
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.data().size()));
    return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count) {
    if (begin + count > m.rows()) throw InputError("slice_rows: out of range");
    Matrix out(count, m.cols());
    const auto first = m.data().begin() + static_cast<std::ptrdiff_t>(begin * m.cols());
    std::copy(first, first + static_cast<std::ptrdiff_t>(count * m.cols()), out.data().begin());
    return out;
}

double PropagationGraph::entry(std::size_t row, std::size_t col) const {
    for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k)
        if (col_[k] == col) return val_[k];
    return 0.0;
}

Matrix PropagationGraph::multiply(const Matrix& x) const {
    if (x.rows() != n_nodes()) throw InputError("propagation: embedding rows do not match graph nodes");
    Matrix y(x.rows(), x.cols());
    for (std::size_t r = 0; r < n_nodes(); ++r) {
        auto out = y.row(r);
        if (isolated_[r]) {
            std::copy(x.row(r).begin(), x.row(r).end(), out.begin());
            continue;
        }
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) axpy(val_[k], x.row(col_[k]), out);
    }
    return y;
}

PropagationGraph build_graph_from_edges(std::size_t n_users, std::size_t n_items, std::vector<WeightedEdge> edges,
                                        const std::vector<double>* frozen_degrees) {
    PropagationGraph g;
    g.n_users_ = n_users;
    g.n_items_ = n_items;
    const std::size_t n = n_users + n_items;

    std::erase_if(edges, [](const WeightedEdge& e) { return e.weight == 0.0; });
    for (const auto& e : edges) {
        if (!(e.weight >= 0.0 && e.weight <= 1.0)) throw InputError("edge weight outside [0,1]");
        if (e.user >= n_users || e.item >= n_items) throw InputError("edge endpoint out of range");
    }

    if (frozen_degrees) {
        if (frozen_degrees->size() != n) throw InputError("frozen degree vector has wrong size");
        g.degree_ = *frozen_degrees;
    } else {
        g.degree_.assign(n, 0.0);
        for (const auto& e : edges) {
            g.degree_[e.user] += e.weight;
            g.degree_[n_users + e.item] += e.weight;
        }
    }
    g.isolated_.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) g.isolated_[v] = g.degree_[v] > 0.0 ? 0 : 1;
    auto norm_deg = [&](std::size_t v) { return g.degree_[v] > 0.0 ? g.degree_[v] : 1.0; };

    std::vector<std::size_t> count(n, 0);
    for (const auto& e : edges) {
        ++count[e.user];
        ++count[n_users + e.item];
    }
    g.row_ptr_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) g.row_ptr_[v + 1] = g.row_ptr_[v] + count[v];
    g.col_.assign(g.row_ptr_[n], 0);
    g.val_.assign(g.row_ptr_[n], 0.0);
    std::vector<std::size_t> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
    for (const auto& e : edges) {
        const std::size_t u = e.user, i = n_users + e.item;
        const double a = e.weight / std::sqrt(norm_deg(u) * norm_deg(i));
        g.col_[cursor[u]] = i;
        g.val_[cursor[u]++] = a;
        g.col_[cursor[i]] = u;
        g.val_[cursor[i]++] = a;
    }
    g.edges_ = std::move(edges);
    return g;
}

PropagationGraph build_graph(const InteractionDataset& ds, const Matrix* malicious_weights) {
    std::vector<WeightedEdge> edges;
    edges.reserve(ds.train.size());
    for (const auto& x : ds.train) edges.push_back({x.user, x.item, 1.0});
    std::size_t n_mal = 0;
    if (malicious_weights) {
        if (malicious_weights->cols() != ds.n_items()) throw InputError("malicious weight matrix has wrong item count");
        n_mal = malicious_weights->rows();
        for (std::size_t m = 0; m < n_mal; ++m) {
            for (std::size_t i = 0; i < ds.n_items(); ++i) {
                const double w = (*malicious_weights)(m, i);
                if (!(w >= 0.0 && w <= 1.0)) throw InputError("malicious weight outside [0,1]");
                if (w > 0.0)
                    edges.push_back({static_cast<Index>(ds.n_users() + m), static_cast<Index>(i), w});
            }
        }
    }
    return build_graph_from_edges(ds.n_users() + n_mal, ds.n_items(), std::move(edges));
}

PropagationGraph build_graph(const InteractionDataset& ds, const std::vector<std::vector<Index>>& malicious) {
    std::vector<WeightedEdge> edges;
    edges.reserve(ds.train.size());
    for (const auto& x : ds.train) edges.push_back({x.user, x.item, 1.0});
    for (std::size_t m = 0; m < malicious.size(); ++m)
        for (Index i : malicious[m]) edges.push_back({static_cast<Index>(ds.n_users() + m), i, 1.0});
    return build_graph_from_edges(ds.n_users() + malicious.size(), ds.n_items(), std::move(edges));
}

std::vector<Matrix> propagate_layers(const PropagationGraph& g, const Matrix& base, std::size_t n_layers) {
    if (base.rows() != g.n_nodes()) throw InputError("propagation: embedding rows do not match graph nodes");
    std::vector<Matrix> layers;
    layers.reserve(n_layers + 1);
    layers.push_back(base);
    for (std::size_t l = 0; l < n_layers; ++l) layers.push_back(g.multiply(layers.back()));
    return layers;
}

Matrix layer_mean(const std::vector<Matrix>& layers) {
    Matrix out = layers.front();
    for (std::size_t l = 1; l < layers.size(); ++l) out += layers[l];
    out *= 1.0 / static_cast<double>(layers.size());
    return out;
}

Matrix propagate(const PropagationGraph& g, const Matrix& base, std::size_t n_layers) {
    if (n_layers == 0) {
        if (base.rows() != g.n_nodes()) throw InputError("propagation: embedding rows do not match graph nodes");
        return base;
    }
    return layer_mean(propagate_layers(g, base, n_layers));
}

Matrix backprop_layers(const PropagationGraph& g, const std::vector<Matrix>& layer_grads) {
    // dE_{l-1} = G_{l-1} + A^T dE_l, with A symmetric.
    Matrix acc;
    for (std::size_t l = layer_grads.size(); l-- > 0;) {
        if (!acc.empty()) acc = g.multiply(acc);
        const Matrix& gl = layer_grads[l];
        if (gl.empty()) continue;
        if (acc.empty()) acc = gl;
        else acc += gl;
    }
    if (acc.empty()) throw InputError("backprop_layers: no gradient given");
    return acc;
}

Matrix backprop_mean(const PropagationGraph& g, const Matrix& grad_mean, std::size_t n_layers) {
    Matrix scaled = grad_mean;
    scaled *= 1.0 / static_cast<double>(n_layers + 1);
    std::vector<Matrix> grads(n_layers + 1, scaled);
    return backprop_layers(g, grads);
}

}  // namespace recpoison
