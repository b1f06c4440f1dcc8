#ifndef TRANSIT_STATESPACE_HPP
#define TRANSIT_STATESPACE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "transit/kernels.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"

namespace transit {

// Observation-noise scale per cost block. The per-entry noise is
// proportional to the entry itself: sd of component c is x_c * scale(block).
struct NoiseScale {
    double access = 0.0;
    double invehicle = 0.0;
    double transfer = 0.0;
    double egress = 0.0;

    double of(CostKind k) const {
        switch (k) {
            case CostKind::Access: return access;
            case CostKind::InVehicle: return invehicle;
            case CostKind::Transfer: return transfer;
            case CostKind::Egress: return egress;
        }
        return 0.0;
    }

    // Length-c vector holding each position's block scale.
    Eigen::VectorXd expand(const NetworkModel& net) const {
        Eigen::VectorXd s(net.cost_dim());
        for (int i = 0; i < net.cost_dim(); ++i) s(i) = of(net.attr_of(i).first);
        return s;
    }
};

// Random-walk state evolution: x_1 ~ N(m0, diag(p0)),
// x_t | x_{t-1} ~ N(x_{t-1}, diag(tau2)).
struct StateParams {
    Eigen::VectorXd m0;
    Eigen::VectorXd p0;    // prior variance diagonal
    Eigen::VectorXd tau2;  // innovation variance diagonal

    void check(int c) const {
        if (m0.size() != c || p0.size() != c || tau2.size() != c)
            throw std::invalid_argument("state params: dimension mismatch");
        if (p0.minCoeff() <= 0.0 || tau2.minCoeff() <= 0.0)
            throw std::invalid_argument("state params: variances must be positive");
    }
};

// Var[y | path, x] = sum over the path's positions of (x_c * scale_c)^2,
// floored at 1 s^2. The floor applies only here; states are never clamped.
inline constexpr double kVarianceFloor = 1.0;

inline double observation_variance(const SparseRow& row, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& scale) {
    double v = 0.0;
    for (int c : row.cols) {
        double sd = x(c) * scale(c);
        v += sd * sd;
    }
    return std::max(v, kVarianceFloor);
}

inline double gaussian_logpdf(double y, double mean, double var) {
    double d = y - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

inline double trip_loglik(const SparseRow& row, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& scale, double y) {
    return gaussian_logpdf(y, row.dot(x), observation_variance(row, x, scale));
}

// One collapsed measurement: `count` trips sharing the same routing row and
// variance, entering the filter through y_sum and count only.
struct GroupedObs {
    std::vector<int> cols;
    double var = 1.0;
    double y_sum = 0.0;
    int count = 0;
};

struct FilterMoments {
    // mu_* are T x c; covariance lists hold one c x c matrix per interval.
    Eigen::MatrixXd mu_pred, mu_filt;
    std::vector<Eigen::MatrixXd> P_pred, P_filt;
};

// Information-form measurement update. Accumulates sum_g count_g a_g a_g^T /
// var_g into the precision and sum_g a_g y_sum_g / var_g into the shift,
// then inverts once. With no observations the predictive moments pass
// through unchanged.
inline void info_measurement_update(const Eigen::VectorXd& mu_pred,
                                    const Eigen::MatrixXd& P_pred,
                                    const std::vector<GroupedObs>& obs, Eigen::VectorXd& mu_filt,
                                    Eigen::MatrixXd& P_filt) {
    if (obs.empty()) {
        mu_filt = mu_pred;
        P_filt = P_pred;
        return;
    }
    const int c = static_cast<int>(mu_pred.size());
    Eigen::LDLT<Eigen::MatrixXd> pred_ldlt(P_pred);
    if (pred_ldlt.info() != Eigen::Success)
        throw std::runtime_error("filter: predictive covariance not factorizable");
    Eigen::MatrixXd precision = pred_ldlt.solve(Eigen::MatrixXd::Identity(c, c));
    Eigen::VectorXd shift = precision * mu_pred;
    for (const GroupedObs& g : obs) {
        if (g.count <= 0) throw std::invalid_argument("filter: observation group with count <= 0");
        if (!(g.var > 0.0)) throw std::invalid_argument("filter: non-positive variance");
        const double w = static_cast<double>(g.count) / g.var;
        for (int i : g.cols) {
            shift(i) += g.y_sum / g.var;
            for (int j : g.cols) precision(i, j) += w;
        }
    }
    precision = 0.5 * (precision + precision.transpose());
    Eigen::LDLT<Eigen::MatrixXd> post_ldlt(precision);
    if (post_ldlt.info() != Eigen::Success)
        throw std::runtime_error("filter: posterior precision not factorizable");
    P_filt = post_ldlt.solve(Eigen::MatrixXd::Identity(c, c));
    P_filt = 0.5 * (P_filt + P_filt.transpose());
    mu_filt = P_filt * shift;
}

// Kalman gain recovered from the information-form output:
// K = P_filt A^T Sigma^{-1}, one row of A per observation group (weighted by
// count through Sigma). Exposed for validation against the direct formula.
inline Eigen::MatrixXd kalman_gain_from_info(const Eigen::MatrixXd& P_filt,
                                             const std::vector<GroupedObs>& obs) {
    const int c = static_cast<int>(P_filt.rows());
    const int m = static_cast<int>(obs.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(c, m);
    for (int g = 0; g < m; ++g) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(c);
        for (int i : obs[static_cast<std::size_t>(g)].cols) a(i) = 1.0;
        K.col(g) = P_filt * a / obs[static_cast<std::size_t>(g)].var;
    }
    return K;
}

// Forward pass over all intervals. obs_by_t holds the grouped measurements
// of each interval; empty vectors are pure prediction steps.
inline FilterMoments forward_filter(const StateParams& params,
                                    const std::vector<std::vector<GroupedObs>>& obs_by_t) {
    const int T = static_cast<int>(obs_by_t.size());
    const int c = static_cast<int>(params.m0.size());
    if (T < 1) throw std::invalid_argument("filter: need at least one interval");
    params.check(c);

    FilterMoments fm;
    fm.mu_pred.resize(T, c);
    fm.mu_filt.resize(T, c);
    fm.P_pred.resize(static_cast<std::size_t>(T));
    fm.P_filt.resize(static_cast<std::size_t>(T));

    Eigen::VectorXd mu = params.m0;
    Eigen::MatrixXd P = params.p0.asDiagonal();
    for (int t = 0; t < T; ++t) {
        if (t > 0) {
            // mu carries over; the random walk only inflates covariance.
            P.diagonal() += params.tau2;
        }
        fm.mu_pred.row(t) = mu.transpose();
        fm.P_pred[static_cast<std::size_t>(t)] = P;
        Eigen::VectorXd mu_f;
        Eigen::MatrixXd P_f;
        info_measurement_update(mu, P, obs_by_t[static_cast<std::size_t>(t)], mu_f, P_f);
        fm.mu_filt.row(t) = mu_f.transpose();
        fm.P_filt[static_cast<std::size_t>(t)] = P_f;
        mu = std::move(mu_f);
        P = std::move(P_f);
    }
    return fm;
}

namespace detail {

// J_t = P_filt(t) P_pred(t+1)^{-1}, shared by the smoother and the sampler.
inline Eigen::MatrixXd backward_gain(const Eigen::MatrixXd& P_filt_t,
                                     const Eigen::MatrixXd& P_pred_next) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(P_pred_next);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("smoother: predictive covariance not factorizable");
    // J = P_filt P_pred^{-1}  <=>  J^T = P_pred^{-1} P_filt (P_pred symmetric)
    return ldlt.solve(P_filt_t.transpose()).transpose();
}

}  // namespace detail

struct SmoothedMoments {
    Eigen::MatrixXd mean;                  // T x c
    std::vector<Eigen::MatrixXd> cov;      // per-interval marginal covariance
};

// Rauch-Tung-Striebel pass over the filter output.
inline SmoothedMoments rts_smoother(const FilterMoments& fm) {
    const int T = static_cast<int>(fm.mu_filt.rows());
    const int c = static_cast<int>(fm.mu_filt.cols());
    SmoothedMoments sm;
    sm.mean.resize(T, c);
    sm.cov.resize(static_cast<std::size_t>(T));
    sm.mean.row(T - 1) = fm.mu_filt.row(T - 1);
    sm.cov[static_cast<std::size_t>(T - 1)] = fm.P_filt[static_cast<std::size_t>(T - 1)];
    for (int t = T - 2; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        Eigen::MatrixXd J = detail::backward_gain(fm.P_filt[ti], fm.P_pred[ti + 1]);
        sm.mean.row(t) =
            fm.mu_filt.row(t) +
            (J * (sm.mean.row(t + 1) - fm.mu_pred.row(t + 1)).transpose()).transpose();
        sm.cov[ti] = fm.P_filt[ti] +
                     J * (sm.cov[ti + 1] - fm.P_pred[ti + 1]) * J.transpose();
        sm.cov[ti] = 0.5 * (sm.cov[ti] + sm.cov[ti].transpose());
    }
    return sm;
}

// Draw from N(mean, cov) through the stabilized Cholesky factor.
inline Eigen::VectorXd sample_mvn(Rng& rng, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov, double jitter_cap = 1e-4) {
    auto cr = stabilized_cholesky(cov, jitter_cap);
    Eigen::VectorXd z(mean.size());
    for (int i = 0; i < z.size(); ++i) z(i) = rnorm(rng);
    return mean + cr.lower * z;
}

// Backward sampling: x_T from the final filter marginal, then
// x_t | x_{t+1} ~ N(mu_filt + J (x_{t+1} - mu_pred_next), P_filt - J P_pred_next J^T).
inline Eigen::MatrixXd backward_sample(Rng& rng, const FilterMoments& fm,
                                       double jitter_cap = 1e-4) {
    const int T = static_cast<int>(fm.mu_filt.rows());
    const int c = static_cast<int>(fm.mu_filt.cols());
    Eigen::MatrixXd x(T, c);
    x.row(T - 1) = sample_mvn(rng, fm.mu_filt.row(T - 1).transpose(),
                              fm.P_filt[static_cast<std::size_t>(T - 1)], jitter_cap)
                       .transpose();
    for (int t = T - 2; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        Eigen::MatrixXd J = detail::backward_gain(fm.P_filt[ti], fm.P_pred[ti + 1]);
        Eigen::VectorXd mean = fm.mu_filt.row(t).transpose() +
                               J * (x.row(t + 1) - fm.mu_pred.row(t + 1)).transpose();
        Eigen::MatrixXd cov =
            fm.P_filt[ti] - J * fm.P_pred[ti + 1] * J.transpose();
        cov = 0.5 * (cov + cov.transpose());
        x.row(t) = sample_mvn(rng, mean, cov, jitter_cap).transpose();
    }
    return x;
}

}  // namespace transit

#endif  // TRANSIT_STATESPACE_HPP
