#include "kgfa/fa.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace kgfa {

namespace {

void check_shapes(const Dataset& data, const FaParams& params) {
    const auto m = params.mu.size();
    if (params.log_var.size() != m || params.loadings.rows() != m)
        throw std::invalid_argument("fa: parameter block sizes disagree");
    if (data.values.cols() != m)
        throw std::invalid_argument("fa: dataset column count does not match parameters");
    if (data.values.rows() < 1)
        throw std::invalid_argument("fa: empty dataset");
}

Eigen::LLT<Matrix> factorize(const Matrix& covariance) {
    if (!covariance.allFinite())
        throw NumericalError("fa: covariance has non-finite entries");
    Eigen::LLT<Matrix> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw NumericalError("fa: Cholesky factorization failed");
    return llt;
}

}  // namespace

Matrix build_covariance(const Matrix& loadings, const Vector& log_var) {
    if (loadings.rows() != log_var.size())
        throw std::invalid_argument("build_covariance: row count mismatch");
    Matrix cov = loadings * loadings.transpose();
    cov.diagonal() += log_var.array().exp().matrix();
    return cov;
}

double fa_marginal_nll(const Dataset& data, const FaParams& params) {
    check_shapes(data, params);
    const auto llt = factorize(build_covariance(params.loadings, params.log_var));

    const double n = static_cast<double>(data.n());
    const double m = static_cast<double>(data.m());
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    // Quadratic form through the triangular factor: z = L^-1 (y - mu).
    Matrix centered = (data.values.rowwise() - params.mu.transpose()).transpose();  // m x n
    llt.matrixL().solveInPlace(centered);
    const double mean_quad = centered.squaredNorm() / n;

    const double nll = 0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det + mean_quad);
    if (!std::isfinite(nll))
        throw NumericalError("fa: non-finite negative log-likelihood");
    return nll;
}

FaEval fa_marginal_nll_eval(const Dataset& data, const FaParams& params) {
    check_shapes(data, params);
    const auto llt = factorize(build_covariance(params.loadings, params.log_var));

    const double n = static_cast<double>(data.n());
    const double m = static_cast<double>(data.m());
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    const Matrix centered = data.values.rowwise() - params.mu.transpose();  // n x m
    const Vector residual_mean = centered.colwise().mean();
    const Matrix second_moment = centered.transpose() * centered / n;

    const Matrix precision = llt.solve(Matrix::Identity(data.m(), data.m()));

    FaEval eval;
    const double mean_quad = (precision * second_moment).trace();
    eval.nll = 0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det + mean_quad);
    if (!std::isfinite(eval.nll))
        throw NumericalError("fa: non-finite negative log-likelihood");

    // dNLL/dSigma = (P - P S P)/2, chained into mu, W and log sigma^2.
    const Matrix sigma_grad = 0.5 * (precision - precision * second_moment * precision);
    eval.grad.mu = -(precision * residual_mean);
    eval.grad.loadings = 2.0 * sigma_grad * params.loadings;
    eval.grad.log_var =
        (sigma_grad.diagonal().array() * params.log_var.array().exp()).matrix();
    return eval;
}

FaGradients fa_marginal_nll_grad(const Dataset& data, const FaParams& params) {
    return fa_marginal_nll_eval(data, params).grad;
}

}  // namespace kgfa
