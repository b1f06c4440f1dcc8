#ifndef TRANSIT_SAMPLERS_HPP
#define TRANSIT_SAMPLERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "transit/rng.hpp"

namespace transit {

struct SliceConfig {
    double epsilon = 0.5;   // bracket width
    int max_shrink = 200;   // shrink steps before falling back to current
};

struct SliceStats {
    long long evals = 0;
    long long fallbacks = 0;
};

// Scalar slice sampler with a randomly positioned fixed-width bracket.
// The threshold is log f(cur) + log(uniform); the bracket [cur - kappa,
// cur - kappa + epsilon] with kappa ~ U[0, epsilon] covers cur. Rejected
// proposals shrink the bracket toward the current point. If the bracket
// collapses the current value is kept.
template <typename LogDensity>
double slice_sample_scalar(Rng& rng, double current, LogDensity&& logf,
                           const SliceConfig& cfg = {}, SliceStats* stats = nullptr) {
    const double log_fcur = logf(current);
    if (stats) ++stats->evals;
    if (!std::isfinite(log_fcur))
        throw std::runtime_error("slice sampler: current point has non-finite density");
    const double threshold = log_fcur + std::log(runif(rng));

    const double kappa = runif(rng) * cfg.epsilon;
    double lo = current - kappa;
    double hi = lo + cfg.epsilon;

    for (int it = 0; it < cfg.max_shrink; ++it) {
        const double prop = runif(rng, lo, hi);
        const double log_fprop = logf(prop);
        if (stats) ++stats->evals;
        if (std::isfinite(log_fprop) && log_fprop > threshold) return prop;
        // Shrink the side the rejected proposal fell on.
        if (prop < current) lo = prop;
        else hi = prop;
    }
    if (stats) ++stats->fallbacks;
    return current;
}

// Elliptical slice sampler for a parameter with zero-mean Gaussian prior
// given by its lower Cholesky factor. One call advances the chain one step;
// the ellipse through the current state and an auxiliary prior draw is
// shrunk toward angle zero until the likelihood clears the threshold.
template <typename LogLik>
Eigen::VectorXd ess_sample(Rng& rng, const Eigen::VectorXd& current,
                           const Eigen::MatrixXd& prior_chol_lower, LogLik&& loglik,
                           SliceStats* stats = nullptr, int max_shrink = 200) {
    const int d = static_cast<int>(current.size());
    if (prior_chol_lower.rows() != d || prior_chol_lower.cols() != d)
        throw std::invalid_argument("ess: cholesky factor dimension mismatch");

    Eigen::VectorXd nu(d);
    for (int i = 0; i < d; ++i) nu(i) = rnorm(rng);
    nu = prior_chol_lower * nu;

    const double log_lcur = loglik(current);
    if (stats) ++stats->evals;
    if (!std::isfinite(log_lcur))
        throw std::runtime_error("ess: current point has non-finite likelihood");
    const double threshold = log_lcur + std::log(runif(rng));

    double phi = runif(rng, 0.0, 2.0 * std::numbers::pi);
    double lo = phi - 2.0 * std::numbers::pi;
    double hi = phi;

    for (int it = 0; it < max_shrink; ++it) {
        Eigen::VectorXd prop = current * std::cos(phi) + nu * std::sin(phi);
        const double log_lprop = loglik(prop);
        if (stats) ++stats->evals;
        if (std::isfinite(log_lprop) && log_lprop > threshold) return prop;
        if (phi < 0.0) lo = phi;
        else hi = phi;
        phi = runif(rng, lo, hi);
    }
    if (stats) ++stats->fallbacks;
    return current;
}

// Wishart draw W(scale = psi, dof = nu) by the Bartlett decomposition:
// with C = chol(psi) lower, A lower triangular with chi distributed diagonal
// and standard normal strict lower part, (C A)(C A)^T ~ W(psi, nu).
inline Eigen::MatrixXd sample_wishart(Rng& rng, const Eigen::MatrixXd& psi, double nu) {
    const int p = static_cast<int>(psi.rows());
    if (psi.cols() != p) throw std::invalid_argument("wishart: scale not square");
    if (!(nu > p - 1)) throw std::invalid_argument("wishart: dof must exceed dim - 1");
    Eigen::LLT<Eigen::MatrixXd> llt(psi);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("wishart: scale not positive definite");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        A(i, i) = std::sqrt(rchisq(rng, nu - i));
        for (int j = 0; j < i; ++j) A(i, j) = rnorm(rng);
    }
    Eigen::MatrixXd L = llt.matrixL() * A;
    return L * L.transpose();
}

// Inverse-Wishart draw IW(scale = omega, dof = nu): invert a Wishart draw
// with inverted scale. Mean is omega / (nu - p - 1) for nu > p + 1.
inline Eigen::MatrixXd sample_inverse_wishart(Rng& rng, const Eigen::MatrixXd& omega,
                                              double nu) {
    const int p = static_cast<int>(omega.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("inverse wishart: scale not positive definite");
    Eigen::MatrixXd omega_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    omega_inv = 0.5 * (omega_inv + omega_inv.transpose());
    Eigen::MatrixXd w = sample_wishart(rng, omega_inv, nu);
    Eigen::LLT<Eigen::MatrixXd> wllt(w);
    if (wllt.info() != Eigen::Success)
        throw std::runtime_error("inverse wishart: degenerate wishart draw");
    Eigen::MatrixXd x = wllt.solve(Eigen::MatrixXd::Identity(p, p));
    return 0.5 * (x + x.transpose());
}

}  // namespace transit

#endif  // TRANSIT_SAMPLERS_HPP
