#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "recpoison/data.hpp"
#include "recpoison/matrix.hpp"

namespace recpoison {

// (user, positive item, negative item); user rows index the user table,
// item rows the item table.
struct Triple {
    Index user = 0;
    Index pos = 0;
    Index neg = 0;
};

double sigmoid(double x);
// -log(sigmoid(x)) without overflow.
double softplus_neg(double x);

// Mean over the batch of -log sigmoid(z_u.z_i - z_u.z_j).
double bpr_loss(const Matrix& users, const Matrix& items, std::span<const Triple> batch);

struct EmbeddingGradient {
    Matrix users;
    Matrix items;
};

// Gradient of bpr_loss w.r.t. both tables; rows not in the batch are zero.
EmbeddingGradient bpr_gradient(const Matrix& users, const Matrix& items, std::span<const Triple> batch);

// Rows of m scaled to unit L2 norm (only rows listed in `subset`, others copied).
Matrix normalize_rows(const Matrix& m, std::span<const std::size_t> subset);

// InfoNCE summed over the subset; negatives are all subset nodes (positive
// included). Views must already be row-normalized on the subset.
double infonce_loss(const Matrix& view1, const Matrix& view2, double tau, std::span<const std::size_t> subset);

// Same quantity via the split form: -(sum of positive similarities / tau
// - sum of log-partition terms).
double infonce_loss_decomposed(const Matrix& view1, const Matrix& view2, double tau,
                               std::span<const std::size_t> subset);

// Normalizes raw views on the subset, then evaluates infonce_loss.
double infonce_loss_raw(const Matrix& view1, const Matrix& view2, double tau, std::span<const std::size_t> subset);

struct InfoNceResult {
    double loss = 0.0;
    Matrix grad_view1;  // w.r.t. the raw (un-normalized) views
    Matrix grad_view2;
};

InfoNceResult infonce_gradient(const Matrix& view1, const Matrix& view2, double tau,
                               std::span<const std::size_t> subset);

}  // namespace recpoison
