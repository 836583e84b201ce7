#ifndef KGFA_FA_HPP
#define KGFA_FA_HPP

#include <string>
#include <vector>

#include "kgfa/types.hpp"

namespace kgfa {

/// n x m observation matrix with attribute names and object ids.
struct Dataset {
    Matrix values;
    std::vector<std::string> attribute_names;
    std::vector<std::string> object_ids;

    int n() const { return static_cast<int>(values.rows()); }
    int m() const { return static_cast<int>(values.cols()); }
};

/// Factor analysis parameters: mean, log noise variances, loading rows.
struct FaParams {
    Vector mu;        // m
    Vector log_var;   // m, log sigma_i^2
    Matrix loadings;  // m x d_x, row i = w_i^T
};

/// W W^T + diag(exp(log_var)); SPD by construction.
Matrix build_covariance(const Matrix& loadings, const Vector& log_var);

/// Average negative log marginal likelihood
///   -(1/n) sum_j log N(y_j | mu, W W^T + diag(sigma^2)),
/// computed through a Cholesky factorization of the covariance.
double fa_marginal_nll(const Dataset& data, const FaParams& params);

struct FaGradients {
    Vector mu;        // m
    Matrix loadings;  // m x d_x
    Vector log_var;   // m
};

struct FaEval {
    double nll = 0.0;
    FaGradients grad;
};

/// NLL together with its gradients, sharing one factorization.
/// Uses dNLL/dSigma = (Sigma^-1 - Sigma^-1 S Sigma^-1)/2 with S the
/// second-moment matrix of the data centered at mu.
FaEval fa_marginal_nll_eval(const Dataset& data, const FaParams& params);

FaGradients fa_marginal_nll_grad(const Dataset& data, const FaParams& params);

}  // namespace kgfa

#endif  // KGFA_FA_HPP
