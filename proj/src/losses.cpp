#include "recpoison/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "recpoison/error.hpp"

namespace recpoison {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_neg(double x) {
    // log(1 + exp(-x))
    return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

namespace {

void check_batch(const Matrix& users, const Matrix& items, std::span<const Triple> batch) {
    if (batch.empty()) throw InputError("BPR batch is empty");
    if (users.cols() != items.cols()) throw InputError("user/item embedding widths differ");
    for (const auto& t : batch)
        if (t.user >= users.rows() || t.pos >= items.rows() || t.neg >= items.rows())
            throw InputError("BPR triple index out of range");
}

void check_subset(const Matrix& a, const Matrix& b, double tau, std::span<const std::size_t> subset) {
    if (!(tau > 0.0)) throw InputError("InfoNCE temperature must be > 0");
    if (subset.empty()) throw InputError("InfoNCE node subset is empty");
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("InfoNCE views differ in shape");
    for (std::size_t p : subset)
        if (p >= a.rows()) throw InputError("InfoNCE subset index out of range");
}

void check_normalized(const Matrix& m, std::span<const std::size_t> subset) {
    for (std::size_t p : subset) {
        const double n = std::sqrt(dot(m.row(p), m.row(p)));
        if (std::abs(n - 1.0) > 1e-6) throw InputError("InfoNCE view row is not L2-normalized");
    }
}

// Similarity block S[p][n] = a_p . b_n / tau over the subset.
std::vector<double> similarity(const Matrix& a, const Matrix& b, double tau, std::span<const std::size_t> subset) {
    const std::size_t s = subset.size();
    std::vector<double> sim(s * s);
    for (std::size_t p = 0; p < s; ++p) {
        auto ap = a.row(subset[p]);
        for (std::size_t n = 0; n < s; ++n) sim[p * s + n] = dot(ap, b.row(subset[n])) / tau;
    }
    return sim;
}

double log_sum_exp(std::span<const double> xs) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : xs) mx = std::max(mx, x);
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

}  // namespace

double bpr_loss(const Matrix& users, const Matrix& items, std::span<const Triple> batch) {
    check_batch(users, items, batch);
    double total = 0.0;
    for (const auto& t : batch) {
        auto zu = users.row(t.user);
        const double margin = dot(zu, items.row(t.pos)) - dot(zu, items.row(t.neg));
        total += softplus_neg(margin);
    }
    return total / static_cast<double>(batch.size());
}

EmbeddingGradient bpr_gradient(const Matrix& users, const Matrix& items, std::span<const Triple> batch) {
    check_batch(users, items, batch);
    EmbeddingGradient g{Matrix(users.rows(), users.cols()), Matrix(items.rows(), items.cols())};
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::size_t d = users.cols();
    for (const auto& t : batch) {
        auto zu = users.row(t.user);
        auto zi = items.row(t.pos);
        auto zj = items.row(t.neg);
        const double margin = dot(zu, zi) - dot(zu, zj);
        // d/dmargin of -log sigmoid(margin) = -sigmoid(-margin)
        const double f = -sigmoid(-margin) * inv_b;
        auto gu = g.users.row(t.user);
        auto gi = g.items.row(t.pos);
        auto gj = g.items.row(t.neg);
        for (std::size_t k = 0; k < d; ++k) {
            gu[k] += f * (zi[k] - zj[k]);
            gi[k] += f * zu[k];
            gj[k] -= f * zu[k];
        }
    }
    return g;
}

Matrix normalize_rows(const Matrix& m, std::span<const std::size_t> subset) {
    Matrix out = m;
    for (std::size_t p : subset) {
        const double n = std::sqrt(dot(m.row(p), m.row(p)));
        if (!(n > 0.0) || !std::isfinite(n)) throw InputError("cannot L2-normalize a zero or non-finite row");
        for (double& v : out.row(p)) v /= n;
    }
    return out;
}

double infonce_loss(const Matrix& view1, const Matrix& view2, double tau, std::span<const std::size_t> subset) {
    check_subset(view1, view2, tau, subset);
    check_normalized(view1, subset);
    check_normalized(view2, subset);
    const std::size_t s = subset.size();
    const auto sim = similarity(view1, view2, tau, subset);
    double loss = 0.0;
    for (std::size_t p = 0; p < s; ++p) {
        std::span<const double> row(sim.data() + p * s, s);
        // -log(exp(S_pp) / sum_n exp(S_pn))
        loss += -(row[p] - log_sum_exp(row));
    }
    return loss;
}

double infonce_loss_decomposed(const Matrix& view1, const Matrix& view2, double tau,
                               std::span<const std::size_t> subset) {
    check_subset(view1, view2, tau, subset);
    check_normalized(view1, subset);
    check_normalized(view2, subset);
    double positive = 0.0;
    for (std::size_t p : subset) positive += dot(view1.row(p), view2.row(p)) / tau;
    double partition = 0.0;
    std::vector<double> row(subset.size());
    for (std::size_t p : subset) {
        for (std::size_t n = 0; n < subset.size(); ++n) row[n] = dot(view1.row(p), view2.row(subset[n])) / tau;
        partition += log_sum_exp(row);
    }
    return -(positive - partition);
}

double infonce_loss_raw(const Matrix& view1, const Matrix& view2, double tau, std::span<const std::size_t> subset) {
    check_subset(view1, view2, tau, subset);
    return infonce_loss(normalize_rows(view1, subset), normalize_rows(view2, subset), tau, subset);
}

InfoNceResult infonce_gradient(const Matrix& view1, const Matrix& view2, double tau,
                               std::span<const std::size_t> subset) {
    check_subset(view1, view2, tau, subset);
    const std::size_t s = subset.size();
    const std::size_t d = view1.cols();
    using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    // Normalized subset rows, gathered contiguously.
    Dense a(s, d), b(s, d);
    std::vector<double> norm_a(s), norm_b(s);
    for (std::size_t p = 0; p < s; ++p) {
        const auto ra = view1.row(subset[p]), rb = view2.row(subset[p]);
        norm_a[p] = std::sqrt(dot(ra, ra));
        norm_b[p] = std::sqrt(dot(rb, rb));
        if (!(norm_a[p] > 0.0) || !(norm_b[p] > 0.0) || !std::isfinite(norm_a[p]) || !std::isfinite(norm_b[p]))
            throw InputError("cannot L2-normalize a zero or non-finite row");
        for (std::size_t k = 0; k < d; ++k) {
            a(p, k) = ra[k] / norm_a[p];
            b(p, k) = rb[k] / norm_b[p];
        }
    }

    Dense prob = (a * b.transpose()) / tau;
    InfoNceResult r{0.0, Matrix(view1.rows(), d), Matrix(view2.rows(), d)};
    for (std::size_t p = 0; p < s; ++p) {
        std::span<double> row(prob.data() + p * s, s);
        const double lse = log_sum_exp(row);
        r.loss += lse - row[p];
        for (double& v : row) v = std::exp(v - lse);
    }

    // Gradients w.r.t. the normalized rows: (P - I) B and (P - I)^T A.
    prob.diagonal().array() -= 1.0;
    const Dense ga = prob * b;
    const Dense gb = prob.transpose() * a;

    // Chain rule through x / |x|: (g - xhat (xhat . g)) / |x|.
    auto through_norm = [&](const Dense& unit, const Dense& g, const std::vector<double>& norms, Matrix& out) {
        for (std::size_t p = 0; p < s; ++p) {
            double proj = 0.0;
            for (std::size_t k = 0; k < d; ++k) proj += unit(p, k) * g(p, k);
            auto o = out.row(subset[p]);
            for (std::size_t k = 0; k < d; ++k) o[k] += (g(p, k) - unit(p, k) * proj) / (tau * norms[p]);
        }
    };
    through_norm(a, ga, norm_a, r.grad_view1);
    through_norm(b, gb, norm_b, r.grad_view2);
    return r;
}

}  // namespace recpoison
