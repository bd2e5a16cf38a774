#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "recpoison/error.hpp"
#include "recpoison/losses.hpp"
#include "recpoison/spectral.hpp"
#include "test_util.hpp"

using namespace recpoison;
using testutil::numeric_gradient;
using testutil::random_matrix;
using testutil::rel_error;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

std::vector<double> eigen_singular_values(const Matrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    auto s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

double entrywise_l1(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += std::abs(v);
    return s;
}

Matrix rank_one(std::size_t n, std::size_t d, Rng& rng, double sigma = 2.0) {
    auto l = random_matrix(n, 1, rng), r = random_matrix(d, 1, rng);
    Matrix z(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) z(i, j) = sigma * l(i, 0) * r(j, 0);
    return z;
}

}  // namespace

TEST_CASE("jacobi eigenvalues of a known matrix") {
    Matrix a(2, 2);
    a(0, 0) = 2.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 2.0;
    auto ev = jacobi_eigenvalues(a);
    REQUIRE(ev.size() == 2);
    std::sort(ev.rbegin(), ev.rend());
    CHECK(ev[0] == doctest::Approx(3.0));
    CHECK(ev[1] == doctest::Approx(1.0));
}

TEST_CASE("singular values special cases") {
    Matrix id(5, 3);
    for (std::size_t k = 0; k < 3; ++k) id(k, k) = 1.0;
    for (double s : singular_values(id).singular_values) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    Matrix diag(6, 3);
    diag(0, 0) = 3.0;
    diag(1, 1) = 1.0;
    diag(2, 2) = 2.0;
    auto r = singular_values(diag);
    CHECK(r.singular_values[0] == doctest::Approx(3.0));
    CHECK(r.singular_values[1] == doctest::Approx(2.0));
    CHECK(r.singular_values[2] == doctest::Approx(1.0));
    CHECK(r.max_over_mean == doctest::Approx(1.5));
    CHECK(r.max_over_min_nonzero == doctest::Approx(3.0));
}

TEST_CASE("singular values match an independent SVD") {
    auto rng = make_rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        auto z = random_matrix(20, 4, rng);
        auto ours = singular_values(z).singular_values;
        auto ref = eigen_singular_values(z);
        REQUIRE(ours.size() == ref.size());
        for (std::size_t k = 0; k < ours.size(); ++k) CHECK(std::abs(ours[k] - ref[k]) < 1e-8);
    }
}

TEST_CASE("singular values reject bad input") {
    Matrix wide(2, 3, 1.0);
    CHECK_THROWS_AS(singular_values(wide), InputError);
    Matrix nan(3, 2, 1.0);
    nan(1, 1) = std::nan("");
    CHECK_THROWS_AS(singular_values(nan), NumericError);
}

TEST_CASE("rank-1 deflation") {
    auto rng = make_rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        auto z = rank_one(9, 4, rng);
        auto defl = draw_deflation(z, rng);
        auto zh = rank1_deflate(z, defl);
        CHECK(std::sqrt(zh.frobenius_sq()) < 1e-10 * std::sqrt(z.frobenius_sq()));
        CHECK(dispersion_loss(z, defl) == doctest::Approx(-entrywise_l1(z)).epsilon(1e-10));
    }
}

TEST_CASE("deflation is an orthogonal projection") {
    auto rng = make_rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        auto z = random_matrix(12, 5, rng);
        auto defl = draw_deflation(z, rng);
        auto zh = rank1_deflate(z, defl);
        // ||Z^T V'||^2 / ||V'||^2 is the removed energy
        double zv = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < z.rows(); ++i) c += z(i, j) * defl.direction[i];
            zv += c * c;
        }
        const double expect = z.frobenius_sq() - zv / defl.direction_norm_sq;
        CHECK(std::abs(zh.frobenius_sq() - expect) <= 1e-10 * z.frobenius_sq());
        CHECK(singular_values(zh).singular_values[0] <= singular_values(z).singular_values[0] + 1e-12);
    }
}

TEST_CASE("dispersion loss scales with Z") {
    auto rng = make_rng(14);
    auto z = random_matrix(10, 4, rng);
    std::vector<double> probe(z.rows());
    for (double& p : probe) p = std::normal_distribution<double>()(rng);
    auto d1 = deflation_from_probe(z, probe);
    Matrix z2 = z;
    z2 *= 2.0;
    auto d2 = deflation_from_probe(z2, probe);
    CHECK(dispersion_loss(z2, d2) == doctest::Approx(2.0 * dispersion_loss(z, d1)).epsilon(1e-12));
    CHECK(dispersion_loss(z2, d2, DispersionNorm::Frobenius) ==
          doctest::Approx(2.0 * dispersion_loss(z, d1, DispersionNorm::Frobenius)).epsilon(1e-12));
}

TEST_CASE("dispersion gradient vs finite differences") {
    auto rng = make_rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        auto z = random_matrix(8, 3, rng);
        auto defl = draw_deflation(z, rng);
        for (auto norm : {DispersionNorm::L1, DispersionNorm::Frobenius}) {
            auto g = dispersion_gradient(z, defl, norm);
            auto n = numeric_gradient([&](const Matrix& x) { return dispersion_loss(x, defl, norm); }, z);
            CHECK(rel_error(g, n) < 1e-4);
        }
    }
}

TEST_CASE("direct dispersion loss") {
    Matrix z(5, 3);
    z(0, 0) = 4.0;
    z(1, 1) = 2.0;
    z(2, 2) = 4.0 / 3.0;
    CHECK(dispersion_loss_direct(4.0, 1.0, z) == doctest::Approx(0.0).epsilon(1e-12));
    // beta 0: flat target
    CHECK(dispersion_loss_direct(2.0, 0.0, z) == doctest::Approx(2.0 + 0.0 + 2.0 / 3.0));
    auto rng = make_rng(16);
    auto r = random_matrix(10, 4, rng);
    auto s = eigen_singular_values(r);
    double expect = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) expect += std::abs(s[k] - s[0] / static_cast<double>(k + 1));
    CHECK(dispersion_loss_direct(s[0], 1.0, r) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("bound check closed form") {
    BoundCheckInstance inst;
    inst.right = Matrix(2, 2);
    inst.right(0, 0) = 1.0;
    inst.right(1, 1) = 1.0;
    inst.left = inst.right;
    inst.sigma1 = {1.0, 1.0};
    inst.sigma2 = {1.0, 1.0};
    auto r = cl_bound_check(inst);
    CHECK(r.lhs == doctest::Approx(2.0 * std::log1p(std::exp(-1.0))).epsilon(1e-12));
    CHECK(r.rhs == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(r.holds);
    CHECK(r.chain_holds);
    inst.sigma2 = {0.0, 0.0};
    CHECK_THROWS_AS(cl_bound_check(inst), InputError);
}

TEST_CASE("bound holds on fuzzed instances") {
    auto rng = make_rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto inst = random_bound_instance(rng);
        auto r = cl_bound_check(inst);
        CHECK(r.holds);
        CHECK(r.chain_holds);
    }
}

TEST_CASE("random orthonormal columns") {
    auto rng = make_rng(18);
    auto q = random_orthonormal(7, 4, rng);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < 7; ++i) s += q(i, a) * q(i, b);
            CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("smoothness comparison") {
    auto rng = make_rng(19);
    auto z = random_matrix(10, 4, rng);
    auto same = smoothness_compare(z, z);
    CHECK(same.a.max_over_mean == same.b.max_over_mean);
    CHECK(!same.a_sharper);
    Matrix sharp(4, 4), flat(4, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        sharp(k, k) = k == 0 ? 10.0 : 1.0;
        flat(k, k) = 3.0;
    }
    CHECK(smoothness_compare(sharp, flat).a_sharper);
    CHECK(!smoothness_compare(flat, sharp).a_sharper);
}
