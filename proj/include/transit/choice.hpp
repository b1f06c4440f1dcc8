#ifndef TRANSIT_CHOICE_HPP
#define TRANSIT_CHOICE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "transit/network.hpp"

namespace transit {

// Station-by-interval utility coefficients, low-rank plus baseline:
//   theta(o,t) = q1 + sum_r U(0,r) V(o,r) W(t,r)   (in-vehicle weight)
//   phi(o,t)   = q2 + sum_r U(1,r) V(o,r) W(t,r)   (transfer weight)
// U is 2 x R, V is n x R, W is T x R.
struct ChoiceTensor {
    Eigen::MatrixXd U;  // 2 x R
    Eigen::MatrixXd V;  // n x R
    Eigen::MatrixXd W;  // T x R
    double q1 = 0.0;
    double q2 = 0.0;

    int rank() const { return static_cast<int>(U.cols()); }
    int stations() const { return static_cast<int>(V.rows()); }
    int intervals() const { return static_cast<int>(W.rows()); }

    static ChoiceTensor zeros(int n, int T, int R) {
        ChoiceTensor c;
        c.U = Eigen::MatrixXd::Zero(2, R);
        c.V = Eigen::MatrixXd::Zero(n, R);
        c.W = Eigen::MatrixXd::Zero(T, R);
        return c;
    }

    void check_shapes() const {
        if (U.rows() != 2) throw std::invalid_argument("choice tensor: U must have 2 rows");
        if (V.cols() != U.cols() || W.cols() != U.cols())
            throw std::invalid_argument("choice tensor: factor ranks disagree");
    }

    double theta_at(int o, int t) const {
        double acc = q1;
        for (int r = 0; r < U.cols(); ++r) acc += U(0, r) * V(o, r) * W(t, r);
        return acc;
    }
    double phi_at(int o, int t) const {
        double acc = q2;
        for (int r = 0; r < U.cols(); ++r) acc += U(1, r) * V(o, r) * W(t, r);
        return acc;
    }

    // Dense n x T coefficient slabs, reconstructed mode-1 style:
    // slab_m = q_m + U(m,:) (W kr V)^T reshaped, equivalently V diag(U(m,:)) W^T.
    Eigen::MatrixXd theta() const {
        return Eigen::MatrixXd::Constant(V.rows(), W.rows(), q1) +
               V * U.row(0).asDiagonal() * W.transpose();
    }
    Eigen::MatrixXd phi() const {
        return Eigen::MatrixXd::Constant(V.rows(), W.rows(), q2) +
               V * U.row(1).asDiagonal() * W.transpose();
    }
};

// Sum of the in-vehicle entries and of the transfer entries of x over one
// path. Access and egress never enter the utility.
struct PathCostSums {
    double invehicle = 0.0;
    double transfer = 0.0;
};

inline PathCostSums path_cost_sums(const PathAttrs& attrs, const Eigen::VectorXd& x) {
    PathCostSums s;
    for (int c : attrs.invehicle) s.invehicle += x(c);
    for (int c : attrs.transfer) s.transfer += x(c);
    return s;
}

// Systematic utilities of every path in the set at (origin o, interval t):
//   V_k = theta(o,t) * sum_iv(x) + phi(o,t) * sum_tr(x).
inline Eigen::VectorXd path_utilities(const PathSet& ps, const Eigen::VectorXd& x,
                                      double theta_ot, double phi_ot) {
    Eigen::VectorXd u(ps.path_count());
    for (int k = 0; k < ps.path_count(); ++k) {
        PathCostSums s = path_cost_sums(ps.attrs[static_cast<std::size_t>(k)], x);
        u(k) = theta_ot * s.invehicle + phi_ot * s.transfer;
    }
    return u;
}

// log sum_k exp(v_k), guarded against overflow.
inline double log_sum_exp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) throw std::runtime_error("log_sum_exp: non-finite utility");
    return m + std::log((v.array() - m).exp().sum());
}

// Multinomial-logit class probabilities from utilities, via the shifted
// softmax. Throws on non-finite input.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i))) throw std::runtime_error("softmax: non-finite utility");
    Eigen::VectorXd p = (v.array() - v.maxCoeff()).exp();
    return p / p.sum();
}

inline Eigen::VectorXd choice_probabilities(const PathSet& ps, const Eigen::VectorXd& x,
                                            double theta_ot, double phi_ot) {
    return softmax(path_utilities(ps, x, theta_ot, phi_ot));
}

// Log-probabilities, numerically matched to choice_probabilities.
inline Eigen::VectorXd choice_log_probabilities(const PathSet& ps, const Eigen::VectorXd& x,
                                                double theta_ot, double phi_ot) {
    Eigen::VectorXd u = path_utilities(ps, x, theta_ot, phi_ot);
    return u.array() - log_sum_exp(u);
}

}  // namespace transit

#endif  // TRANSIT_CHOICE_HPP
