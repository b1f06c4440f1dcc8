#ifndef TRANSIT_KERNELS_HPP
#define TRANSIT_KERNELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace transit {

// Cholesky with an escalating diagonal jitter. Starts at 1e-10 and grows
// tenfold up to the cap; throws if the matrix still fails to factor.
struct CholeskyResult {
    Eigen::MatrixXd lower;
    double jitter = 0.0;  // amount actually added to the diagonal
};

inline CholeskyResult stabilized_cholesky(const Eigen::MatrixXd& m, double jitter_cap = 1e-4) {
    if (m.rows() != m.cols()) throw std::invalid_argument("cholesky: matrix not square");
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    double jitter = 1e-10;
    while (jitter <= jitter_cap * (1.0 + 1e-12)) {
        Eigen::MatrixXd attempt = sym;
        attempt.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(attempt);
        if (llt.info() == Eigen::Success)
            return {Eigen::MatrixXd(llt.matrixL()), jitter};
        jitter *= 10.0;
    }
    throw std::runtime_error("cholesky: matrix not positive definite within jitter cap " +
                             std::to_string(jitter_cap));
}

// Covariance matrix bundled with its Cholesky factor.
struct KernelMatrix {
    Eigen::MatrixXd values;
    Eigen::MatrixXd chol_lower;
    double jitter = 0.0;

    int dim() const { return static_cast<int>(values.rows()); }

    static KernelMatrix from(Eigen::MatrixXd values, double jitter_cap = 1e-4) {
        KernelMatrix k;
        k.values = std::move(values);
        auto cr = stabilized_cholesky(k.values, jitter_cap);
        k.chol_lower = std::move(cr.lower);
        k.jitter = cr.jitter;
        return k;
    }
};

// Graph diffusion kernel expm(-alpha * L_norm) with the symmetric normalized
// Laplacian L_norm = D^{-1/2} (D - A) D^{-1/2}. The adjacency must be
// symmetric 0/1 with no isolated vertices. Computed through the
// eigendecomposition of the symmetric Laplacian.
inline Eigen::MatrixXd diffusion_kernel(const Eigen::MatrixXd& adjacency, double alpha) {
    const int n = static_cast<int>(adjacency.rows());
    if (adjacency.cols() != n) throw std::invalid_argument("diffusion kernel: adjacency not square");
    if (!(alpha > 0.0)) throw std::invalid_argument("diffusion kernel: alpha must be positive");
    if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("diffusion kernel: adjacency not symmetric");

    Eigen::VectorXd deg = adjacency.rowwise().sum();
    for (int i = 0; i < n; ++i)
        if (deg(i) <= 0.0)
            throw std::invalid_argument("diffusion kernel: station " + std::to_string(i) +
                                        " has no incident links");

    Eigen::VectorXd dinv_sqrt = deg.array().sqrt().inverse();
    Eigen::MatrixXd lnorm = Eigen::MatrixXd::Identity(n, n) -
                            dinv_sqrt.asDiagonal() * adjacency * dinv_sqrt.asDiagonal();
    lnorm = 0.5 * (lnorm + lnorm.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lnorm);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("diffusion kernel: eigendecomposition failed");
    Eigen::VectorXd scaled = (-alpha * es.eigenvalues().array()).exp();
    Eigen::MatrixXd k = es.eigenvectors() * scaled.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (k + k.transpose());
}

// Squared-exponential kernel on the interval grid 1..T:
// k(t, t') = variance * exp(-(t - t')^2 / (2 lengthscale^2)).
inline Eigen::MatrixXd se_kernel(int T, double lengthscale, double variance = 1.0) {
    if (T < 1) throw std::invalid_argument("se kernel: T must be >= 1");
    if (!(lengthscale > 0.0)) throw std::invalid_argument("se kernel: lengthscale must be positive");
    if (!(variance > 0.0)) throw std::invalid_argument("se kernel: variance must be positive");
    Eigen::MatrixXd k(T, T);
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            double d = static_cast<double>(i - j);
            k(i, j) = variance * std::exp(-d * d / (2.0 * lengthscale * lengthscale));
        }
    return k;
}

}  // namespace transit

#endif  // TRANSIT_KERNELS_HPP
