#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kgfa/fa.hpp"
#include "kgfa/finite_diff.hpp"
#include "oracles.hpp"

using namespace kgfa;

TEST_CASE("build_covariance hand values") {
    CHECK(build_covariance(Matrix::Zero(3, 2), Vector::Zero(3))
              .isApprox(Matrix::Identity(3, 3), 1e-15));

    Matrix w(2, 1);
    w << 1, 1;
    const Matrix cov = build_covariance(w, Vector::Zero(2));
    CHECK(cov(0, 0) == doctest::Approx(2.0));
    CHECK(cov(0, 1) == doctest::Approx(1.0));
    CHECK(cov(1, 0) == doctest::Approx(1.0));
    CHECK(cov(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("build_covariance smallest eigenvalue at least min variance") {
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        const int m = 2 + static_cast<int>(rng() % 6);
        const int d = 1 + static_cast<int>(rng() % 3);
        const Matrix w = oracles::random_matrix(rng, m, d);
        const Vector log_var = oracles::random_vector(rng, m, 0.7);
        const Matrix cov = build_covariance(w, log_var);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        CHECK(eig.eigenvalues().minCoeff() >=
              log_var.array().exp().minCoeff() - 1e-10);
    }
}

TEST_CASE("fa nll of centered data under identity covariance") {
    Rng rng(9);
    const int m = 4;
    Dataset data;
    data.values = Matrix::Zero(6, m);
    const Vector mu = oracles::random_vector(rng, m);
    data.values.rowwise() = mu.transpose();
    const FaParams params{mu, Vector::Zero(m), Matrix::Zero(m, 2)};
    CHECK(fa_marginal_nll(data, params) ==
          doctest::Approx(0.5 * m * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("fa nll scalar case") {
    Dataset data;
    data.values = Matrix::Zero(1, 1);
    const FaParams params{Vector::Zero(1), Vector::Zero(1), Matrix::Zero(1, 1)};
    CHECK(fa_marginal_nll(data, params) ==
          doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("fa nll matches explicit-inverse oracle") {
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        const int n = 2 + static_cast<int>(rng() % 15);
        const int m = 1 + static_cast<int>(rng() % 5);
        const int d = 1 + static_cast<int>(rng() % 3);
        const Dataset data = oracles::random_dataset(rng, n, m);
        const FaParams params{oracles::random_vector(rng, m), oracles::random_vector(rng, m, 0.5),
                              oracles::random_matrix(rng, m, d)};
        const double cholesky = fa_marginal_nll(data, params);
        const double naive = oracles::naive_nll(data, params);
        CHECK(relative_error(cholesky, naive) < 1e-10);
    }
}

TEST_CASE("fa nll invariant under right rotation of loadings") {
    Rng rng(13);
    for (int i = 0; i < 20; ++i) {
        const int m = 2 + static_cast<int>(rng() % 5);
        const int d = 2 + static_cast<int>(rng() % 2);
        const Dataset data = oracles::random_dataset(rng, 8, m);
        FaParams params{oracles::random_vector(rng, m), oracles::random_vector(rng, m, 0.5),
                        oracles::random_matrix(rng, m, d)};
        const double base = fa_marginal_nll(data, params);
        params.loadings = params.loadings * oracles::random_orthogonal(rng, d);
        CHECK(relative_error(base, fa_marginal_nll(data, params)) < 1e-10);
    }
}

TEST_CASE("fa nll translation consistency") {
    Rng rng(21);
    const Dataset data = oracles::random_dataset(rng, 10, 4);
    FaParams params{oracles::random_vector(rng, 4), oracles::random_vector(rng, 4, 0.5),
                    oracles::random_matrix(rng, 4, 2)};
    const double base = fa_marginal_nll(data, params);

    const Vector shift = oracles::random_vector(rng, 4, 3.0);
    Dataset shifted = data;
    shifted.values.rowwise() += shift.transpose();
    FaParams shifted_params = params;
    shifted_params.mu += shift;
    CHECK(relative_error(base, fa_marginal_nll(shifted, shifted_params)) < 1e-12);
}

TEST_CASE("fa gradient vanishes at the mean") {
    Rng rng(3);
    const int m = 3;
    Dataset data = oracles::random_dataset(rng, 8, m);
    const Vector mean = data.values.colwise().mean();
    const FaParams params{mean, oracles::random_vector(rng, m, 0.3), Matrix::Zero(m, 2)};
    const FaGradients grad = fa_marginal_nll_grad(data, params);
    CHECK(grad.mu.norm() < 1e-12);
}

TEST_CASE("fa gradient vanishes when the sample covariance equals the model") {
    // Four points mu +- a1, mu +- a2 with a_i = sqrt(2 lambda_i) v_i give a
    // sample second moment exactly equal to Sigma = [[2,1],[1,2]].
    const Vector mu = (Vector(2) << 0.4, -1.2).finished();
    const double s3 = std::sqrt(3.0);
    Matrix points(4, 2);
    points << s3, s3, -s3, -s3, 1, -1, -1, 1;
    Dataset data;
    data.values = points.rowwise() + mu.transpose();
    data.attribute_names = {"a0", "a1"};
    data.object_ids = {"0", "1", "2", "3"};

    Matrix w(2, 1);
    w << 1, 1;
    const FaParams params{mu, Vector::Zero(2), w};  // Sigma = [[2,1],[1,2]]
    const FaGradients grad = fa_marginal_nll_grad(data, params);
    CHECK(grad.loadings.norm() < 1e-12);
    CHECK(grad.log_var.norm() < 1e-12);
    CHECK(grad.mu.norm() < 1e-12);
}

TEST_CASE("fa gradients match finite differences") {
    Rng rng(77);
    for (int i = 0; i < 20; ++i) {
        const int n = 2 + static_cast<int>(rng() % 29);
        const int m = 1 + static_cast<int>(rng() % 8);
        const int d = 1 + static_cast<int>(rng() % 3);
        const Dataset data = oracles::random_dataset(rng, n, m);
        const FaParams params{oracles::random_vector(rng, m), oracles::random_vector(rng, m, 0.5),
                              oracles::random_matrix(rng, m, d)};
        const FaEval eval = fa_marginal_nll_eval(data, params);
        CHECK(relative_error(eval.nll, fa_marginal_nll(data, params)) < 1e-12);

        const Vector fd_mu = finite_difference_gradient(
            [&](const Vector& mu) {
                return fa_marginal_nll(data, {mu, params.log_var, params.loadings});
            },
            params.mu);
        CHECK(max_relative_error(eval.grad.mu, fd_mu) < 1e-5);

        const Vector fd_log_var = finite_difference_gradient(
            [&](const Vector& lv) {
                return fa_marginal_nll(data, {params.mu, lv, params.loadings});
            },
            params.log_var);
        CHECK(max_relative_error(eval.grad.log_var, fd_log_var) < 1e-5);
    }
}

TEST_CASE("fa rejects inconsistent shapes and non-finite input") {
    Dataset data;
    data.values = Matrix::Zero(3, 2);
    const FaParams wrong{Vector::Zero(3), Vector::Zero(3), Matrix::Zero(3, 1)};
    CHECK_THROWS_AS(fa_marginal_nll(data, wrong), std::invalid_argument);

    FaParams params{Vector::Zero(2), Vector::Zero(2), Matrix::Zero(2, 1)};
    params.loadings(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fa_marginal_nll(data, params), NumericalError);
}
