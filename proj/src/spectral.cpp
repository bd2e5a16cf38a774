#include "recpoison/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "recpoison/error.hpp"
#include "recpoison/losses.hpp"

namespace recpoison {

std::vector<double> jacobi_eigenvalues(Matrix a, double tol, std::size_t max_sweeps) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw InputError("jacobi_eigenvalues: matrix is not square");
    const double scale = std::sqrt(a.frobenius_sq());
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q)
                if (p != q) s += a(p, q) * a(p, q);
        return std::sqrt(s);
    };
    for (std::size_t sweep = 0; sweep < max_sweeps && scale > 0.0 && off_norm() > tol * scale; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t k = 0; k < n; ++k) eig[k] = a(k, k);
    return eig;
}

SpectralReport singular_values(const Matrix& z, std::string source) {
    if (!z.all_finite()) throw NumericError("singular_values: non-finite input");
    const std::size_t n = z.rows(), d = z.cols();
    if (d > n) throw InputError("singular_values: needs d <= n");
    Matrix gram(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = z.row(r);
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p; q < d; ++q) gram(p, q) += row[p] * row[q];
    }
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < p; ++q) gram(p, q) = gram(q, p);

    SpectralReport rep;
    rep.source = std::move(source);
    rep.singular_values = jacobi_eigenvalues(std::move(gram));
    for (double& v : rep.singular_values) v = std::sqrt(std::max(0.0, v));
    std::sort(rep.singular_values.begin(), rep.singular_values.end(), std::greater<>());
    if (!rep.singular_values.empty() && rep.singular_values.front() > 0.0) {
        const double mx = rep.singular_values.front();
        const double mean = std::accumulate(rep.singular_values.begin(), rep.singular_values.end(), 0.0) /
                            static_cast<double>(d);
        rep.max_over_mean = mx / mean;
        double mn = mx;
        for (double v : rep.singular_values)
            if (v > 1e-12 * mx) mn = v;
        rep.max_over_min_nonzero = mx / mn;
    }
    return rep;
}

DeflationState deflation_from_probe(const Matrix& z, std::vector<double> probe) {
    if (probe.size() != z.rows()) throw InputError("deflation probe length must equal the row count");
    const std::size_t d = z.cols();
    std::vector<double> t(d, 0.0);
    for (std::size_t r = 0; r < z.rows(); ++r) axpy(probe[r], z.row(r), t);
    DeflationState s;
    s.direction.resize(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) s.direction[r] = dot(z.row(r), t);
    s.direction_norm_sq = dot(s.direction, s.direction);
    s.probe = std::move(probe);
    return s;
}

DeflationState draw_deflation(const Matrix& z, Rng& rng) {
    if (!z.all_finite()) throw NumericError("degenerate spectrum input: non-finite embeddings");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t attempt = 0; attempt <= kDeflationMaxResamples; ++attempt) {
        std::vector<double> v(z.rows());
        for (double& x : v) x = gauss(rng);
        auto s = deflation_from_probe(z, std::move(v));
        if (std::sqrt(s.direction_norm_sq) > kDeflationGuard) {
            s.resamples = attempt;
            return s;
        }
    }
    throw NumericError("degenerate spectrum input");
}

namespace {

void check_deflation(const Matrix& z, const DeflationState& defl) {
    if (defl.direction.size() != z.rows()) throw InputError("deflation direction length mismatch");
    if (!(std::sqrt(defl.direction_norm_sq) > kDeflationGuard)) throw NumericError("degenerate spectrum input");
}

// c = V'^T Z / ||V'||^2, so the projected matrix is V' c^T.
std::vector<double> projection_coefficients(const Matrix& z, const DeflationState& defl) {
    std::vector<double> c(z.cols(), 0.0);
    for (std::size_t r = 0; r < z.rows(); ++r) axpy(defl.direction[r], z.row(r), c);
    for (double& v : c) v /= defl.direction_norm_sq;
    return c;
}

double l1(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

Matrix rank1_deflate(const Matrix& z, const DeflationState& defl) {
    check_deflation(z, defl);
    const auto c = projection_coefficients(z, defl);
    Matrix out = z;
    for (std::size_t r = 0; r < z.rows(); ++r) axpy(-defl.direction[r], c, out.row(r));
    return out;
}

double dispersion_loss(const Matrix& z, const DeflationState& defl, DispersionNorm norm) {
    check_deflation(z, defl);
    const auto c = projection_coefficients(z, defl);
    if (norm == DispersionNorm::L1) return -l1(defl.direction) * l1(c);
    return -std::sqrt(defl.direction_norm_sq) * std::sqrt(dot(c, c));
}

Matrix dispersion_gradient(const Matrix& z, const DeflationState& defl, DispersionNorm norm) {
    check_deflation(z, defl);
    const auto c = projection_coefficients(z, defl);
    std::vector<double> col(z.cols());
    if (norm == DispersionNorm::L1) {
        const double f = -l1(defl.direction) / defl.direction_norm_sq;
        for (std::size_t j = 0; j < c.size(); ++j) col[j] = f * sign(c[j]);
    } else {
        const double cn = std::sqrt(dot(c, c));
        const double f = cn > 0.0 ? -1.0 / (cn * std::sqrt(defl.direction_norm_sq)) : 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) col[j] = f * c[j];
    }
    Matrix g(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) axpy(defl.direction[r], col, g.row(r));
    return g;
}

double dispersion_loss_direct(double c, double beta, const Matrix& z) {
    if (!(c > 0.0)) throw InputError("power-law scale c must be > 0");
    if (!(beta >= 0.0)) throw InputError("power-law exponent beta must be >= 0");
    const auto rep = singular_values(z);
    double dist = 0.0;
    for (std::size_t k = 0; k < rep.singular_values.size(); ++k)
        dist += std::abs(rep.singular_values[k] - c * std::pow(static_cast<double>(k + 1), -beta));
    return dist;
}

namespace {

void check_orthonormal_columns(const Matrix& m, const char* what) {
    for (std::size_t p = 0; p < m.cols(); ++p) {
        for (std::size_t q = p; q < m.cols(); ++q) {
            double s = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, p) * m(r, q);
            if (std::abs(s - (p == q ? 1.0 : 0.0)) > 1e-10)
                throw InputError(std::string("bound check: ") + what + " factor is not orthonormal");
        }
    }
}

Matrix assemble_view(const Matrix& right, const std::vector<double>& sigma, const Matrix& left) {
    const std::size_t n = right.rows(), d = left.rows();
    Matrix v(n, d);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += right(p, k) * sigma[k] * left(j, k);
            v(p, j) = s;
        }
    return v;
}

}  // namespace

BoundCheckResult cl_bound_check(const BoundCheckInstance& inst) {
    const std::size_t d = inst.left.rows();
    const std::size_t n = inst.right.rows();
    if (inst.left.cols() != d || inst.right.cols() != d || inst.sigma1.size() != d || inst.sigma2.size() != d)
        throw InputError("bound check: factor shapes are inconsistent");
    if (n < d) throw InputError("bound check: needs n >= d");
    check_orthonormal_columns(inst.left, "left");
    check_orthonormal_columns(inst.right, "right");

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Matrix a, b;
    try {
        a = normalize_rows(assemble_view(inst.right, inst.sigma1, inst.left), all);
        b = normalize_rows(assemble_view(inst.right, inst.sigma2, inst.left), all);
    } catch (const InputError&) {
        throw InputError("bound check: views cannot be row-normalized (zero row)");
    }

    BoundCheckResult r;
    r.lhs = infonce_loss(a, b, 1.0, all);
    const double nn = static_cast<double>(n);
    double max_prod = 0.0, sum_prod = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        max_prod = std::max(max_prod, inst.sigma1[k] * inst.sigma2[k]);
        sum_prod += inst.sigma1[k] * inst.sigma2[k];
    }
    r.rhs = nn * max_prod - sum_prod + nn * std::log(nn);

    double pos = 0.0, row_max_sum = 0.0, diag_max = -1e300;
    for (std::size_t p = 0; p < n; ++p) {
        const double app = dot(a.row(p), b.row(p));
        pos += app;
        diag_max = std::max(diag_max, app);
        double mx = -1e300;
        for (std::size_t q = 0; q < n; ++q) mx = std::max(mx, dot(a.row(p), b.row(q)));
        row_max_sum += mx;
    }
    r.log_sum_exp_bound = -pos + nn * std::log(nn) + row_max_sum;
    r.alignment_bound = -pos + nn * std::log(nn) + nn * diag_max;
    r.holds = r.lhs < r.rhs;
    const double slack = 1e-12 * (1.0 + std::abs(r.lhs));
    r.chain_holds = r.lhs <= r.log_sum_exp_bound + slack && r.log_sum_exp_bound <= r.alignment_bound + slack;
    return r;
}

Matrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
    if (cols > rows) throw InputError("random_orthonormal: cols > rows");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (;;) {
        Matrix q(rows, cols);
        for (double& v : q.data()) v = gauss(rng);
        bool ok = true;
        for (std::size_t j = 0; j < cols && ok; ++j) {
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < j; ++k) {
                    double s = 0.0;
                    for (std::size_t r = 0; r < rows; ++r) s += q(r, k) * q(r, j);
                    for (std::size_t r = 0; r < rows; ++r) q(r, j) -= s * q(r, k);
                }
            }
            double norm = 0.0;
            for (std::size_t r = 0; r < rows; ++r) norm += q(r, j) * q(r, j);
            norm = std::sqrt(norm);
            if (norm < 1e-8) ok = false;
            else
                for (std::size_t r = 0; r < rows; ++r) q(r, j) /= norm;
        }
        if (ok) return q;
    }
}

BoundCheckInstance random_bound_instance(Rng& rng, std::size_t max_n, std::size_t max_d) {
    std::uniform_int_distribution<std::size_t> dd(1, max_d);
    const std::size_t d = dd(rng);
    std::uniform_int_distribution<std::size_t> dn(std::max<std::size_t>(2, d), std::max(max_n, std::max<std::size_t>(2, d)));
    const std::size_t n = dn(rng);
    BoundCheckInstance inst;
    inst.right = random_orthonormal(n, d, rng);
    inst.left = random_orthonormal(d, d, rng);
    std::uniform_real_distribution<double> sig(0.1, 2.0), jitter(-0.3, 0.3);
    inst.sigma1.resize(d);
    for (double& s : inst.sigma1) s = sig(rng);
    std::sort(inst.sigma1.begin(), inst.sigma1.end(), std::greater<>());
    inst.sigma2.resize(d);
    for (std::size_t k = 0; k < d; ++k) inst.sigma2[k] = inst.sigma1[k] * (1.0 + jitter(rng));
    return inst;
}

SmoothnessComparison smoothness_compare(const Matrix& a, const Matrix& b) {
    SmoothnessComparison c{singular_values(a, "a"), singular_values(b, "b"), false};
    c.a_sharper = c.a.max_over_mean > c.b.max_over_mean;
    return c;
}

}  // namespace recpoison
