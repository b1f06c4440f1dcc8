#ifndef TRANSIT_LIKELIHOOD_HPP
#define TRANSIT_LIKELIHOOD_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "transit/choice.hpp"
#include "transit/data.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"
#include "transit/statespace.hpp"

namespace transit {

// Per-path quantities at a fixed state vector. The observation variance for
// any noise scale follows from the squared block sums:
//   var = a^2 s_acc + h^2 s_iv + u^2 s_tr + e^2 s_egr  (floored).
struct PathMoments {
    double mean = 0.0;
    double s_acc = 0.0, s_iv = 0.0, s_tr = 0.0, s_egr = 0.0;
    double iv_sum = 0.0, tr_sum = 0.0;  // linear sums entering the utility
};

inline double variance_at(const PathMoments& pm, const NoiseScale& s) {
    double v = s.access * s.access * pm.s_acc + s.invehicle * s.invehicle * pm.s_iv +
               s.transfer * s.transfer * pm.s_tr + s.egress * s.egress * pm.s_egr;
    return std::max(v, kVarianceFloor);
}

// One dataset cell with its per-path moments at the current state.
struct CellCache {
    int cell_index = -1;
    std::vector<PathMoments> paths;
};

inline PathMoments path_moments(const PathAttrs& attrs, const Eigen::VectorXd& x) {
    PathMoments pm;
    double xa = x(attrs.access);
    pm.mean += xa;
    pm.s_acc = xa * xa;
    for (int c : attrs.invehicle) {
        double v = x(c);
        pm.mean += v;
        pm.iv_sum += v;
        pm.s_iv += v * v;
    }
    for (int c : attrs.transfer) {
        double v = x(c);
        pm.mean += v;
        pm.tr_sum += v;
        pm.s_tr += v * v;
    }
    double xe = x(attrs.egress);
    pm.mean += xe;
    pm.s_egr = xe * xe;
    return pm;
}

// Moments of every cell's paths at the state of the cell's interval.
inline std::vector<CellCache> build_cell_caches(const PathTable& table, const TripDataset& ds,
                                                const Eigen::MatrixXd& x_by_t) {
    std::vector<CellCache> out;
    out.reserve(static_cast<std::size_t>(ds.cell_count()));
    for (int i = 0; i < ds.cell_count(); ++i) {
        const Cell& cell = ds.cell(i);
        const PathSet& ps = table.set(cell.set_index);
        Eigen::VectorXd x = x_by_t.row(cell.t).transpose();
        CellCache cc;
        cc.cell_index = i;
        cc.paths.reserve(static_cast<std::size_t>(ps.path_count()));
        for (int k = 0; k < ps.path_count(); ++k)
            cc.paths.push_back(path_moments(ps.attrs[static_cast<std::size_t>(k)], x));
        out.push_back(std::move(cc));
    }
    return out;
}

// Sufficient statistics of the trips assigned to one (cell, path): the
// Gaussian log-likelihood in the noise scales needs only these.
struct SigmaGroup {
    const PathMoments* pm = nullptr;
    int count = 0;
    double y_sum = 0.0;
    double y_sumsq = 0.0;
};

inline std::vector<SigmaGroup> build_sigma_groups(const TripDataset& ds,
                                                  const std::vector<CellCache>& caches,
                                                  const std::vector<std::vector<int>>& z) {
    std::vector<SigmaGroup> groups;
    for (int i = 0; i < ds.cell_count(); ++i) {
        const Cell& cell = ds.cell(i);
        const CellCache& cc = caches[static_cast<std::size_t>(i)];
        const auto& zi = z[static_cast<std::size_t>(i)];
        if (static_cast<int>(zi.size()) != cell.trip_count())
            throw std::invalid_argument("sigma groups: assignment length mismatch");
        std::vector<SigmaGroup> local(cc.paths.size());
        for (std::size_t k = 0; k < cc.paths.size(); ++k)
            local[k].pm = &cc.paths[k];
        for (int j = 0; j < cell.trip_count(); ++j) {
            int k = zi[static_cast<std::size_t>(j)];
            if (k < 0 || k >= static_cast<int>(cc.paths.size()))
                throw std::invalid_argument("sigma groups: path index out of range");
            double y = cell.y[static_cast<std::size_t>(j)];
            auto& g = local[static_cast<std::size_t>(k)];
            ++g.count;
            g.y_sum += y;
            g.y_sumsq += y * y;
        }
        for (auto& g : local)
            if (g.count > 0) groups.push_back(g);
    }
    return groups;
}

// Sum over all trips of log N(y; mean_z, var_z(sigma)), computed per group:
// sum_i (y_i - m)^2 = y_sumsq - 2 m y_sum + n m^2.
inline double sigma_loglik(const std::vector<SigmaGroup>& groups, const NoiseScale& sigma) {
    double ll = 0.0;
    for (const SigmaGroup& g : groups) {
        const double v = variance_at(*g.pm, sigma);
        const double m = g.pm->mean;
        const double ss = g.y_sumsq - 2.0 * m * g.y_sum + g.count * m * m;
        ll += -0.5 * (g.count * std::log(2.0 * std::numbers::pi * v) + ss / v);
    }
    return ll;
}

// Per-trip Gaussian densities of the choice-relevant cells, at fixed state
// and noise scales. To keep repeated collapsed-likelihood evaluations cheap,
// the densities are stored rescaled by the per-trip maximum:
//   dens(k, j) = exp(log N(y_j; mean_k, var_k) - colmax(j)).
struct ChoiceLikCache {
    std::vector<int> cell_indices;            // the multipath cells, dataset order
    std::vector<Eigen::MatrixXd> dens;        // one K x M matrix per such cell
    std::vector<Eigen::RowVectorXd> colmax;   // per-trip max log density

    Eigen::VectorXd log_g_col(std::size_t idx, int j) const {
        return dens[idx].col(j).array().log() + colmax[idx](j);
    }
};

inline ChoiceLikCache build_choice_lik_cache(const TripDataset& ds,
                                             const std::vector<CellCache>& caches,
                                             const NoiseScale& sigma) {
    ChoiceLikCache out;
    out.cell_indices = ds.multipath_cells();
    out.dens.reserve(out.cell_indices.size());
    out.colmax.reserve(out.cell_indices.size());
    for (int ci : out.cell_indices) {
        const Cell& cell = ds.cell(ci);
        const CellCache& cc = caches[static_cast<std::size_t>(ci)];
        const int K = static_cast<int>(cc.paths.size());
        Eigen::MatrixXd g(K, cell.trip_count());
        for (int k = 0; k < K; ++k) {
            const PathMoments& pm = cc.paths[static_cast<std::size_t>(k)];
            const double v = variance_at(pm, sigma);
            const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
            for (int j = 0; j < cell.trip_count(); ++j) {
                double d = cell.y[static_cast<std::size_t>(j)] - pm.mean;
                g(k, j) = log_norm - 0.5 * d * d / v;
            }
        }
        Eigen::RowVectorXd m = g.colwise().maxCoeff();
        g.rowwise() -= m;
        out.dens.push_back(g.array().exp().matrix());
        out.colmax.push_back(std::move(m));
    }
    return out;
}

// Log path-choice probabilities of one cell under the coefficient tensor.
inline Eigen::VectorXd cell_log_choice_probs(const CellCache& cc, const Cell& cell,
                                             const ChoiceTensor& tensor) {
    const double theta = tensor.theta_at(cell.origin, cell.t);
    const double phi = tensor.phi_at(cell.origin, cell.t);
    Eigen::VectorXd u(static_cast<int>(cc.paths.size()));
    for (std::size_t k = 0; k < cc.paths.size(); ++k)
        u(static_cast<int>(k)) = theta * cc.paths[k].iv_sum + phi * cc.paths[k].tr_sum;
    return u.array() - log_sum_exp(u);
}

// Marginal likelihood of the multipath trips with path choices summed out:
//   sum_cells sum_trips log sum_k pi_k N(y; mean_k, var_k).
// Single-path cells contribute a constant in the tensor and are omitted.
// With the rescaled densities the per-trip term is
//   colmax_j + log(pi^T dens.col(j)), one GEMV and one log per trip.
inline double collapsed_loglik(const TripDataset& ds, const std::vector<CellCache>& caches,
                               const ChoiceLikCache& lik, const ChoiceTensor& tensor) {
    double total = 0.0;
    for (std::size_t idx = 0; idx < lik.cell_indices.size(); ++idx) {
        const int ci = lik.cell_indices[idx];
        const Cell& cell = ds.cell(ci);
        const CellCache& cc = caches[static_cast<std::size_t>(ci)];
        Eigen::VectorXd pi = cell_log_choice_probs(cc, cell, tensor).array().exp();
        const Eigen::MatrixXd& d = lik.dens[idx];
        const int K = static_cast<int>(d.rows());
        const int M = static_cast<int>(d.cols());
        // Sum of per-trip log mixtures as a running product, taking one log
        // per underflow flush instead of one per trip. The rescaled columns
        // keep each mixture in (0, K], so the product shrinks slowly.
        double sum_log = 0.0, prod = 1.0;
        for (int j = 0; j < M; ++j) {
            double mj = 0.0;
            for (int k = 0; k < K; ++k) mj += pi(k) * d(k, j);
            prod *= mj;
            if (prod < 1e-280) {
                sum_log += std::log(prod);
                prod = 1.0;
            }
        }
        total += lik.colmax[idx].sum() + sum_log + std::log(prod);
    }
    return total;
}

// Draw each trip's path from the categorical posterior
//   p(z = k) proportional to pi_k N(y; mean_k, var_k).
// Single-path cells are assigned path 0. Returns per-cell per-trip indices.
inline std::vector<std::vector<int>> sample_path_choices(Rng& rng, const TripDataset& ds,
                                                         const std::vector<CellCache>& caches,
                                                         const ChoiceLikCache& lik,
                                                         const ChoiceTensor& tensor) {
    std::vector<std::vector<int>> z(static_cast<std::size_t>(ds.cell_count()));
    for (int i = 0; i < ds.cell_count(); ++i)
        z[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(ds.cell(i).trip_count()), 0);

    std::vector<double> w;
    for (std::size_t idx = 0; idx < lik.cell_indices.size(); ++idx) {
        const int ci = lik.cell_indices[idx];
        const Cell& cell = ds.cell(ci);
        const CellCache& cc = caches[static_cast<std::size_t>(ci)];
        const Eigen::MatrixXd& d = lik.dens[idx];
        Eigen::VectorXd log_pi = cell_log_choice_probs(cc, cell, tensor);
        Eigen::VectorXd pi = log_pi.array().exp();
        const int K = static_cast<int>(d.rows());
        w.resize(static_cast<std::size_t>(K));
        for (int j = 0; j < cell.trip_count(); ++j) {
            double sum = 0.0;
            for (int k = 0; k < K; ++k) {
                w[static_cast<std::size_t>(k)] = pi(k) * d(k, j);
                sum += w[static_cast<std::size_t>(k)];
            }
            if (!(sum > 0.0) || !std::isfinite(sum)) {
                // Degenerate weights: fall back to the prior choice model.
                for (int k = 0; k < K; ++k)
                    w[static_cast<std::size_t>(k)] = std::exp(log_pi(k) - log_pi.maxCoeff());
            }
            z[static_cast<std::size_t>(ci)][static_cast<std::size_t>(j)] = rcategorical(rng, w);
        }
    }
    return z;
}

// Grouped measurements for the forward filter: trips of a cell assigned to
// the same path collapse into one group with the path's routing row and the
// variance evaluated at the supplied reference state.
inline std::vector<std::vector<GroupedObs>> build_filter_obs(
    const PathTable& table, const TripDataset& ds, const std::vector<std::vector<int>>& z,
    const Eigen::MatrixXd& x_ref, const NoiseScale& sigma) {
    std::vector<std::vector<GroupedObs>> by_t(static_cast<std::size_t>(ds.intervals()));
    std::vector<CellCache> caches = build_cell_caches(table, ds, x_ref);
    for (int i = 0; i < ds.cell_count(); ++i) {
        const Cell& cell = ds.cell(i);
        const PathSet& ps = table.set(cell.set_index);
        const CellCache& cc = caches[static_cast<std::size_t>(i)];
        const auto& zi = z[static_cast<std::size_t>(i)];
        std::vector<GroupedObs> local(cc.paths.size());
        for (int j = 0; j < cell.trip_count(); ++j) {
            int k = zi[static_cast<std::size_t>(j)];
            auto& g = local[static_cast<std::size_t>(k)];
            ++g.count;
            g.y_sum += cell.y[static_cast<std::size_t>(j)];
        }
        for (std::size_t k = 0; k < local.size(); ++k) {
            if (local[k].count == 0) continue;
            local[k].cols = ps.rows[k].cols;
            local[k].var = variance_at(cc.paths[k], sigma);
            by_t[static_cast<std::size_t>(cell.t)].push_back(std::move(local[k]));
        }
    }
    return by_t;
}

}  // namespace transit

#endif  // TRANSIT_LIKELIHOOD_HPP
