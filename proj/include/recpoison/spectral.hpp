#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "recpoison/matrix.hpp"
#include "recpoison/rng.hpp"

namespace recpoison {

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, iterated until
// the off-diagonal Frobenius norm is below tol * ||A||_F. Unsorted.
std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-10, std::size_t max_sweeps = 100);

struct SpectralReport {
    std::vector<double> singular_values;  // descending, >= 0
    double max_over_mean = 0.0;           // sigma_max / mean sigma
    double max_over_min_nonzero = 0.0;    // sigma_max / smallest nonzero sigma
    std::string source;
};

// Singular values of an n x d matrix (d <= n) from the d x d Gram matrix.
SpectralReport singular_values(const Matrix& z, std::string source = {});

// Direction used by the rank-1 approximation. `direction` is V' = Z Z^T V for
// a standard-normal V of length n (rows of Z are entities).
struct DeflationState {
    std::vector<double> probe;      // V
    std::vector<double> direction;  // V'
    double direction_norm_sq = 0.0;
    std::size_t resamples = 0;
};

inline constexpr double kDeflationGuard = 1e-12;
inline constexpr std::size_t kDeflationMaxResamples = 8;

// Draws V until ||V'|| > guard (up to 8 resamples); throws NumericError
// "degenerate spectrum input" otherwise.
DeflationState draw_deflation(const Matrix& z, Rng& rng);
// V' for a caller-supplied V.
DeflationState deflation_from_probe(const Matrix& z, std::vector<double> probe);

// Z - V'V'^T Z / ||V'||^2.
Matrix rank1_deflate(const Matrix& z, const DeflationState& defl);

enum class DispersionNorm { L1, Frobenius };

// -|| V'V'^T Z ||  / ||V'||^2 (entrywise L1 by default).
double dispersion_loss(const Matrix& z, const DeflationState& defl, DispersionNorm norm = DispersionNorm::L1);

// Gradient of dispersion_loss w.r.t. Z with V' held fixed.
Matrix dispersion_gradient(const Matrix& z, const DeflationState& defl, DispersionNorm norm = DispersionNorm::L1);

// L1 distance between sorted singular values and the power law c * k^-beta.
double dispersion_loss_direct(double c, double beta, const Matrix& z);

// Two views sharing singular vectors: view = right * diag(sigma) * left^T,
// right is n x d with orthonormal columns, left is d x d orthogonal.
struct BoundCheckInstance {
    Matrix left;
    Matrix right;
    std::vector<double> sigma1;
    std::vector<double> sigma2;
};

struct BoundCheckResult {
    double lhs = 0.0;              // InfoNCE at tau = 1 on normalized views
    double rhs = 0.0;              // n max_j s1_j s2_j - sum_i s1_i s2_i + n ln n
    double log_sum_exp_bound = 0.0;  // -sum a_p.b_p + sum_p (ln n + max_n a_p.b_n)
    double alignment_bound = 0.0;    // -sum a_p.b_p + n ln n + n max_n a_n.b_n
    bool holds = false;              // lhs < rhs
    bool chain_holds = false;        // lhs <= lse bound <= alignment bound
};

BoundCheckResult cl_bound_check(const BoundCheckInstance& instance);

// Random instance with n in [max(2,d), max_n], d in [1, max_d]; sigma2 is a
// +/-30% perturbation of sigma1 (nearly aligned views).
BoundCheckInstance random_bound_instance(Rng& rng, std::size_t max_n = 32, std::size_t max_d = 8);

// Orthonormal columns from a Gaussian matrix by modified Gram-Schmidt.
Matrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng);

struct SmoothnessComparison {
    SpectralReport a;
    SpectralReport b;
    // true when a's sigma_max / mean sigma is strictly larger
    bool a_sharper = false;
};

SmoothnessComparison smoothness_compare(const Matrix& a, const Matrix& b);

}  // namespace recpoison
