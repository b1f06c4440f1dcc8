#ifndef TRANSIT_GIBBS_HPP
#define TRANSIT_GIBBS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "transit/choice.hpp"
#include "transit/config.hpp"
#include "transit/data.hpp"
#include "transit/kernels.hpp"
#include "transit/likelihood.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"
#include "transit/samplers.hpp"
#include "transit/statespace.hpp"

namespace transit {

// Ridge least squares for the state prior mean: per O-D mean travel times
// regressed on the shortest path's routing row, shrunk toward a flat level.
// Entries are floored at 1 s.
inline Eigen::VectorXd warm_start_m0(const PathTable& table, const TripDataset& ds, int c,
                                     double center, double ridge = 1.0) {
    Eigen::MatrixXd ata = ridge * Eigen::MatrixXd::Identity(c, c);
    Eigen::VectorXd atb = Eigen::VectorXd::Constant(c, ridge * center);
    std::vector<double> y_sum(static_cast<std::size_t>(table.size()), 0.0);
    std::vector<long long> count(static_cast<std::size_t>(table.size()), 0);
    for (const Cell& cell : ds.cells()) {
        auto si = static_cast<std::size_t>(cell.set_index);
        for (double y : cell.y) y_sum[si] += y;
        count[si] += cell.trip_count();
    }
    for (int si = 0; si < table.size(); ++si) {
        if (count[static_cast<std::size_t>(si)] == 0) continue;
        const auto& cols = table.set(si).rows.front().cols;
        const double w = static_cast<double>(count[static_cast<std::size_t>(si)]);
        const double ybar = y_sum[static_cast<std::size_t>(si)] / w;
        for (int i : cols) {
            atb(i) += w * ybar;
            for (int j : cols) ata(i, j) += w;
        }
    }
    Eigen::VectorXd m = ata.ldlt().solve(atb);
    return m.cwiseMax(1.0);
}

struct ModelState {
    Eigen::MatrixXd x;  // T x c
    NoiseScale sigma;
    ChoiceTensor tensor;
    Eigen::MatrixXd Ku;  // 2 x 2
    std::vector<std::vector<int>> z;  // per cell, per trip path index
};

// Identity of one choice-relevant cell in the stored choice counts.
struct CellKey {
    int origin = -1;
    int destination = -1;
    int t = -1;
    int paths = 0;
};

struct PosteriorDraws {
    int T = 0, c = 0, n = 0, R = 0;
    std::vector<int> chain, iter;  // aligned with the per-draw vectors below
    std::vector<NoiseScale> sigma;
    std::vector<double> q1, q2;
    std::vector<Eigen::MatrixXd> U, V, W, Ku, x;
    std::vector<CellKey> zcells;  // the multipath cells, fixed across draws
    std::vector<std::vector<std::vector<int>>> zcounts;  // [draw][zcell][path]

    int draws() const { return static_cast<int>(chain.size()); }

    double theta_at(int draw, int o, int t) const {
        auto j = static_cast<std::size_t>(draw);
        double acc = q1[j];
        for (int r = 0; r < R; ++r) acc += U[j](0, r) * V[j](o, r) * W[j](t, r);
        return acc;
    }
    double phi_at(int draw, int o, int t) const {
        auto j = static_cast<std::size_t>(draw);
        double acc = q2[j];
        for (int r = 0; r < R; ++r) acc += U[j](1, r) * V[j](o, r) * W[j](t, r);
        return acc;
    }

    ChoiceTensor tensor_at(int draw) const {
        auto j = static_cast<std::size_t>(draw);
        ChoiceTensor t;
        t.U = U[j];
        t.V = V[j];
        t.W = W[j];
        t.q1 = q1[j];
        t.q2 = q2[j];
        return t;
    }
};

class GibbsEngine {
public:
    GibbsEngine(const NetworkModel& net, const PathTable& table, const TripDataset& ds,
                RunConfig cfg)
        : net_(net), table_(table), ds_(ds), cfg_(std::move(cfg)) {
        cfg_.validate();
        const int c = net_.cost_dim();
        params_.tau2 = Eigen::VectorXd::Constant(c, cfg_.tau2);
        params_.p0 = Eigen::VectorXd::Constant(c, cfg_.p0_var);
        params_.m0 = cfg_.m0_policy == "warmstart"
                         ? warm_start_m0(table_, ds_, c, cfg_.m0_flat)
                         : Eigen::VectorXd::Constant(c, cfg_.m0_flat);
        omega0_ = cfg_.omega0_scale * Eigen::MatrixXd::Identity(2, 2);
        if (cfg_.model != 1 && cfg_.model != 3)
            ks_ = KernelMatrix::from(diffusion_kernel(net_.adjacency(), cfg_.gp_alpha),
                                     cfg_.jitter_cap);
        if (cfg_.model != 1 && cfg_.model != 2)
            kt_ = KernelMatrix::from(
                se_kernel(ds_.intervals(), cfg_.gp_lengthscale, cfg_.gp_variance),
                cfg_.jitter_cap);
    }

    const StateParams& state_params() const { return params_; }

    // Replace the policy-derived state prior with an external estimate of
    // the baseline costs and a common prior variance.
    void set_state_prior(const Eigen::VectorXd& m0, double p0_var) {
        if (m0.size() != net_.cost_dim())
            throw std::invalid_argument("state prior mean has wrong dimension");
        if (!(p0_var > 0)) throw std::invalid_argument("state prior variance must be positive");
        params_.m0 = m0;
        params_.p0 = Eigen::VectorXd::Constant(net_.cost_dim(), p0_var);
    }

    ModelState initialize(Rng& rng) const {
        const int c = net_.cost_dim();
        const int n = net_.station_count();
        const int T = ds_.intervals();
        const int R = cfg_.cp_rank;
        ModelState st;
        st.x.resize(T, c);
        for (int t = 0; t < T; ++t) st.x.row(t) = params_.m0.transpose();
        const double s0 = std::exp(cfg_.prior_log_sigma_mean);
        st.sigma = {s0, s0, s0, s0};
        st.Ku = omega0_;
        st.tensor = ChoiceTensor::zeros(n, T, R);
        st.tensor.q1 = cfg_.prior_q_mean;
        st.tensor.q2 = cfg_.prior_q_mean;

        // Factor starts: scaled-down prior draws, with the factors a model
        // variant freezes pinned at their frozen values.
        auto gauss = [&](int d) {
            Eigen::VectorXd z(d);
            for (int i = 0; i < d; ++i) z(i) = rnorm(rng);
            return z;
        };
        if (cfg_.model != 1) {
            KernelMatrix ku0 = KernelMatrix::from(omega0_, cfg_.jitter_cap);
            for (int r = 0; r < R; ++r) {
                st.tensor.U.col(r) = 0.1 * (ku0.chol_lower * gauss(2));
                if (cfg_.model == 3) st.tensor.V.col(r).setOnes();
                else st.tensor.V.col(r) = 0.1 * (ks_.chol_lower * gauss(n));
                if (cfg_.model == 2) st.tensor.W.col(r).setOnes();
                else st.tensor.W.col(r) = 0.1 * (kt_.chol_lower * gauss(T));
            }
        }

        // Initial choices from the choice model alone.
        auto caches = build_cell_caches(table_, ds_, st.x);
        st.z.assign(static_cast<std::size_t>(ds_.cell_count()), {});
        std::vector<double> w;
        for (int i = 0; i < ds_.cell_count(); ++i) {
            const Cell& cell = ds_.cell(i);
            auto& zi = st.z[static_cast<std::size_t>(i)];
            zi.assign(static_cast<std::size_t>(cell.trip_count()), 0);
            const CellCache& cc = caches[static_cast<std::size_t>(i)];
            if (cc.paths.size() < 2) continue;
            Eigen::VectorXd log_pi = cell_log_choice_probs(cc, cell, st.tensor);
            w.resize(cc.paths.size());
            for (std::size_t k = 0; k < cc.paths.size(); ++k) w[k] = std::exp(log_pi(static_cast<int>(k)));
            for (int j = 0; j < cell.trip_count(); ++j)
                zi[static_cast<std::size_t>(j)] = rcategorical(rng, w);
        }
        return st;
    }

    // One full update sweep. Returns the executed block names in order.
    std::string step(ModelState& st, Rng& rng) const {
        std::string blocks;
        auto mark = [&](const char* b) {
            if (!blocks.empty()) blocks += ',';
            blocks += b;
        };

        // States: conditional on choices and noise scales; the observation
        // variances are evaluated at the previous sweep's states.
        auto obs = build_filter_obs(table_, ds_, st.z, st.x, st.sigma);
        FilterMoments fm = forward_filter(params_, obs);
        st.x = backward_sample(rng, fm, cfg_.jitter_cap);
        mark("states");

        // Noise scales: slice updates on the log scale, conditional on the
        // choices.
        auto caches = build_cell_caches(table_, ds_, st.x);
        auto groups = build_sigma_groups(ds_, caches, st.z);
        const SliceConfig scfg_sigma{cfg_.slice_eps_log_sigma, cfg_.slice_max_shrink};
        auto component = [](NoiseScale& s, int i) -> double& {
            switch (i) {
                case 0: return s.access;
                case 1: return s.invehicle;
                case 2: return s.transfer;
                default: return s.egress;
            }
        };
        for (int i = 0; i < 4; ++i) {
            double cur = std::log(component(st.sigma, i));
            double next = slice_sample_scalar(
                rng, cur,
                [&](double ls) {
                    NoiseScale trial = st.sigma;
                    component(trial, i) = std::exp(ls);
                    double d = ls - cfg_.prior_log_sigma_mean;
                    return sigma_loglik(groups, trial) -
                           0.5 * d * d / cfg_.prior_log_sigma_var;
                },
                scfg_sigma);
            component(st.sigma, i) = std::exp(next);
        }
        mark("sigma");

        // Coefficient factors and utility baselines: elliptical slice and
        // scalar slice moves against the choice-collapsed likelihood. Each
        // pass leaves the conditional invariant, so the pair of blocks can
        // be repeated; the elliptical steps shrink when the data dominate
        // the factor priors, and repetition restores mixing.
        ChoiceLikCache lik = build_choice_lik_cache(ds_, caches, st.sigma);
        auto coll = [&](const ChoiceTensor& t) { return collapsed_loglik(ds_, caches, lik, t); };
        const SliceConfig scfg_q{cfg_.slice_eps_q, cfg_.slice_max_shrink};
        KernelMatrix ku;
        if (cfg_.model != 1) ku = KernelMatrix::from(st.Ku, cfg_.jitter_cap);
        for (int rep = 0; rep < cfg_.factor_reps; ++rep) {
            if (cfg_.model != 1) {
                const int R = cfg_.cp_rank;
                if (cfg_.model != 3) {
                    for (int r = 0; r < R; ++r) {
                        Eigen::VectorXd cur = st.tensor.V.col(r);
                        Eigen::VectorXd next = ess_sample(rng, cur, ks_.chol_lower,
                                                          [&](const Eigen::VectorXd& v) {
                                                              st.tensor.V.col(r) = v;
                                                              return coll(st.tensor);
                                                          });
                        st.tensor.V.col(r) = next;
                    }
                }
                if (cfg_.model != 2) {
                    for (int r = 0; r < R; ++r) {
                        Eigen::VectorXd cur = st.tensor.W.col(r);
                        Eigen::VectorXd next = ess_sample(rng, cur, kt_.chol_lower,
                                                          [&](const Eigen::VectorXd& w) {
                                                              st.tensor.W.col(r) = w;
                                                              return coll(st.tensor);
                                                          });
                        st.tensor.W.col(r) = next;
                    }
                }
                for (int r = 0; r < R; ++r) {
                    Eigen::VectorXd cur = st.tensor.U.col(r);
                    Eigen::VectorXd next = ess_sample(rng, cur, ku.chol_lower,
                                                      [&](const Eigen::VectorXd& u) {
                                                          st.tensor.U.col(r) = u;
                                                          return coll(st.tensor);
                                                      });
                    st.tensor.U.col(r) = next;
                }
            }
            st.tensor.q1 = slice_sample_scalar(
                rng, st.tensor.q1,
                [&](double q) {
                    ChoiceTensor trial = st.tensor;
                    trial.q1 = q;
                    double d = q - cfg_.prior_q_mean;
                    return coll(trial) - 0.5 * d * d / cfg_.prior_q_var;
                },
                scfg_q);
            st.tensor.q2 = slice_sample_scalar(
                rng, st.tensor.q2,
                [&](double q) {
                    ChoiceTensor trial = st.tensor;
                    trial.q2 = q;
                    double d = q - cfg_.prior_q_mean;
                    return coll(trial) - 0.5 * d * d / cfg_.prior_q_var;
                },
                scfg_q);
        }
        if (cfg_.model != 1) mark("factors");
        mark("baselines");

        // Factor-loading covariance: conjugate inverse-Wishart draw.
        if (cfg_.model != 1) {
            Eigen::MatrixXd scale = omega0_ + st.tensor.U * st.tensor.U.transpose();
            st.Ku = sample_inverse_wishart(rng, scale, cfg_.nu0 + cfg_.cp_rank);
            mark("ku");
        }

        // Path choices: exact categorical conditional per trip.
        st.z = sample_path_choices(rng, ds_, caches, lik, st.tensor);
        mark("choices");
        return blocks;
    }

    using Progress = std::function<void(int chain, long long done, long long total)>;

    PosteriorDraws run(std::ostream* trace = nullptr, const Progress& progress = {}) const {
        PosteriorDraws out;
        out.T = ds_.intervals();
        out.c = net_.cost_dim();
        out.n = net_.station_count();
        out.R = cfg_.cp_rank;
        for (int ci : ds_.multipath_cells()) {
            const Cell& cell = ds_.cell(ci);
            out.zcells.push_back({cell.origin, cell.destination, cell.t,
                                  table_.set(cell.set_index).path_count()});
        }
        // Ends at the sweep that stores the last sample; thin > 1 adds no
        // trailing unstored sweeps.
        const long long total =
            static_cast<long long>(cfg_.burnin) +
            (cfg_.samples > 0
                 ? static_cast<long long>(cfg_.samples - 1) * static_cast<long long>(cfg_.thin) + 1
                 : 0);
        for (int chain = 0; chain < cfg_.chains; ++chain) {
            Rng rng = make_stream(cfg_.seed, StreamPurpose::Chain,
                                  static_cast<std::uint64_t>(chain));
            ModelState st = initialize(rng);
            for (long long it = 0; it < total; ++it) {
                std::string blocks = step(st, rng);
                bool store = it >= cfg_.burnin && (it - cfg_.burnin) % cfg_.thin == 0;
                if (store) record(out, st, chain, static_cast<int>(it));
                if (trace)
                    (*trace) << "chain=" << chain << " iter=" << it << " blocks=" << blocks
                             << " stored=" << (store ? 1 : 0) << '\n';
                if (progress && ((it + 1) % 100 == 0 || it + 1 == total))
                    progress(chain, it + 1, total);
            }
        }
        return out;
    }

private:
    void record(PosteriorDraws& out, const ModelState& st, int chain, int iter) const {
        out.chain.push_back(chain);
        out.iter.push_back(iter);
        out.sigma.push_back(st.sigma);
        out.q1.push_back(st.tensor.q1);
        out.q2.push_back(st.tensor.q2);
        out.U.push_back(st.tensor.U);
        out.V.push_back(st.tensor.V);
        out.W.push_back(st.tensor.W);
        out.Ku.push_back(st.Ku);
        out.x.push_back(st.x);
        std::vector<std::vector<int>> counts;
        counts.reserve(static_cast<std::size_t>(ds_.multipath_cells().size()));
        for (int ci : ds_.multipath_cells()) {
            const Cell& cell = ds_.cell(ci);
            std::vector<int> cnt(
                static_cast<std::size_t>(table_.set(cell.set_index).path_count()), 0);
            for (int k : st.z[static_cast<std::size_t>(ci)]) ++cnt[static_cast<std::size_t>(k)];
            counts.push_back(std::move(cnt));
        }
        out.zcounts.push_back(std::move(counts));
    }

    const NetworkModel& net_;
    const PathTable& table_;
    const TripDataset& ds_;
    RunConfig cfg_;
    StateParams params_;
    Eigen::MatrixXd omega0_;
    KernelMatrix ks_, kt_;
};

}  // namespace transit

#endif  // TRANSIT_GIBBS_HPP
