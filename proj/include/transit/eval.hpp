#ifndef TRANSIT_EVAL_HPP
#define TRANSIT_EVAL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "transit/data.hpp"
#include "transit/gibbs.hpp"
#include "transit/likelihood.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"

namespace transit {

// Linear-interpolation quantile (the h = (n-1)p + 1 convention).
inline double quantile_sorted(const std::vector<double>& v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile: empty sample");
    if (p <= 0.0) return v.front();
    if (p >= 1.0) return v.back();
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

struct Summary {
    double mean = 0.0, sd = 0.0, q05 = 0.0, q50 = 0.0, q95 = 0.0;
};

inline Summary summarize(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("summarize: empty sample");
    Summary s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
    }
    std::sort(v.begin(), v.end());
    s.q05 = quantile_sorted(v, 0.05);
    s.q50 = quantile_sorted(v, 0.50);
    s.q95 = quantile_sorted(v, 0.95);
    return s;
}

struct PointMetrics {
    double rmse = 0.0, mae = 0.0;
};

inline PointMetrics point_metrics(const std::vector<double>& pred,
                                  const std::vector<double>& actual) {
    if (pred.size() != actual.size() || pred.empty())
        throw std::invalid_argument("point_metrics: size mismatch or empty");
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - actual[i];
        se += d * d;
        ae += std::abs(d);
    }
    const auto n = static_cast<double>(pred.size());
    return {std::sqrt(se / n), ae / n};
}

// Sample-based CRPS in the energy form
//   E|X - y| - E|X - X'| / 2,
// with the pairwise term computed from the sorted sample:
//   sum_ij |x_i - x_j| = 2 sum_j (2j - 1 - m) x_(j)   (j 1-based).
inline double crps_from_samples(std::vector<double> x, double y) {
    const auto m = static_cast<double>(x.size());
    if (x.empty()) throw std::invalid_argument("crps: empty sample");
    std::sort(x.begin(), x.end());
    double term1 = 0.0, pair = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        term1 += std::abs(x[j] - y);
        pair += (2.0 * static_cast<double>(j + 1) - 1.0 - m) * x[j];
    }
    return term1 / m - pair / (m * m);
}

// Closed-form CRPS of a Gaussian forecast.
inline double crps_gaussian(double mean, double sd, double y) {
    if (!(sd > 0.0)) throw std::invalid_argument("crps_gaussian: sd must be positive");
    const double z = (y - mean) / sd;
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

// Effective sample size with the initial-positive-sequence rule: sums of
// consecutive autocorrelation pairs enter until the first non-positive
// pair. A constant chain reports its length.
inline double effective_sample_size(const std::vector<double>& chain) {
    const auto n = static_cast<long long>(chain.size());
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double x : chain) mean += x;
    mean /= static_cast<double>(n);
    auto autocov = [&](long long k) {
        double acc = 0.0;
        for (long long i = 0; i + k < n; ++i)
            acc += (chain[static_cast<std::size_t>(i)] - mean) *
                   (chain[static_cast<std::size_t>(i + k)] - mean);
        return acc / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0)) return static_cast<double>(n);
    double tau = -1.0;
    for (long long m = 0; 2 * m + 1 < n; ++m) {
        const double gamma = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if (gamma <= 0.0) break;
        tau += 2.0 * gamma;
    }
    tau = std::max(tau, 1e-10);
    return static_cast<double>(n) / tau;
}

// Stratified holdout: each multipath O-D pair is a stratum, and a fixed
// fraction of its trips (across all intervals) is held out after a
// stream-seeded shuffle. Single-path trips always stay in the training set.
struct SplitResult {
    std::vector<int> train_idx, test_idx;  // indices into the trip vector
};

inline SplitResult stratified_split(const PathTable& table,
                                    const std::vector<TripObservation>& trips, double fraction,
                                    std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw std::invalid_argument("split: fraction must be in [0,1)");
    std::map<int, std::vector<int>> strata;  // set index -> trip indices
    SplitResult out;
    for (int i = 0; i < static_cast<int>(trips.size()); ++i) {
        int si = table.find_index(trips[static_cast<std::size_t>(i)].origin,
                                  trips[static_cast<std::size_t>(i)].destination);
        if (si < 0)
            throw std::invalid_argument("split: trip has no path set");
        if (table.set(si).choice_relevant()) strata[si].push_back(i);
        else out.train_idx.push_back(i);
    }
    for (auto& [si, idx] : strata) {
        Rng rng = make_stream(seed, StreamPurpose::Split, static_cast<std::uint64_t>(si));
        // Fisher-Yates on the stratum's trip indices.
        for (std::size_t i = idx.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(runif(rng) * static_cast<double>(i));
            if (j >= i) j = i - 1;
            std::swap(idx[i - 1], idx[j]);
        }
        auto n_test = static_cast<std::size_t>(fraction * static_cast<double>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_test ? out.test_idx : out.train_idx).push_back(idx[i]);
    }
    std::sort(out.train_idx.begin(), out.train_idx.end());
    std::sort(out.test_idx.begin(), out.test_idx.end());
    return out;
}

inline std::vector<TripObservation> select_trips(const std::vector<TripObservation>& trips,
                                                 const std::vector<int>& idx) {
    std::vector<TripObservation> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(trips[static_cast<std::size_t>(i)]);
    return out;
}

// Predictive draws for one trip: each posterior draw contributes a path
// sampled from its choice probabilities and a travel time from the matching
// Gaussian. The mixture mean is also returned analytically.
struct TripPrediction {
    std::vector<double> samples;
    double mean = 0.0;
};

inline TripPrediction predict_trip(const PosteriorDraws& draws, const PathTable& table,
                                   const TripObservation& trip, int per_draw, Rng& rng) {
    const PathSet* ps = table.find(trip.origin, trip.destination);
    if (!ps) throw std::invalid_argument("predict: no path set for trip O-D");
    TripPrediction out;
    out.samples.reserve(static_cast<std::size_t>(draws.draws()) *
                        static_cast<std::size_t>(per_draw));
    const int K = ps->path_count();
    std::vector<double> w(static_cast<std::size_t>(K));
    std::vector<double> means(static_cast<std::size_t>(K)), sds(static_cast<std::size_t>(K));
    double mean_acc = 0.0;
    for (int j = 0; j < draws.draws(); ++j) {
        Eigen::VectorXd x = draws.x[static_cast<std::size_t>(j)].row(trip.t).transpose();
        Eigen::VectorXd probs =
            choice_probabilities(*ps, x, draws.theta_at(j, trip.origin, trip.t),
                                 draws.phi_at(j, trip.origin, trip.t));
        double draw_mean = 0.0;
        for (int k = 0; k < K; ++k) {
            PathMoments pm = path_moments(ps->attrs[static_cast<std::size_t>(k)], x);
            means[static_cast<std::size_t>(k)] = pm.mean;
            sds[static_cast<std::size_t>(k)] =
                std::sqrt(variance_at(pm, draws.sigma[static_cast<std::size_t>(j)]));
            w[static_cast<std::size_t>(k)] = probs(k);
            draw_mean += probs(k) * pm.mean;
        }
        mean_acc += draw_mean;
        for (int rep = 0; rep < per_draw; ++rep) {
            int k = rcategorical(rng, w);
            out.samples.push_back(rnorm(rng, means[static_cast<std::size_t>(k)],
                                        sds[static_cast<std::size_t>(k)]));
        }
    }
    out.mean = mean_acc / static_cast<double>(draws.draws());
    return out;
}

struct EvalReport {
    double rmse = 0.0, mae = 0.0, crps = 0.0;
    int trips = 0;
};

inline EvalReport evaluate_heldout(const PosteriorDraws& draws, const PathTable& table,
                                   const std::vector<TripObservation>& heldout, int per_draw,
                                   std::uint64_t seed) {
    if (heldout.empty()) throw std::invalid_argument("evaluate: no heldout trips");
    if (draws.draws() == 0) throw std::invalid_argument("evaluate: no posterior draws");
    std::vector<double> pred, actual;
    double crps_acc = 0.0;
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        Rng rng = make_stream(seed, StreamPurpose::Predictive, static_cast<std::uint64_t>(i));
        TripPrediction tp = predict_trip(draws, table, heldout[i], per_draw, rng);
        pred.push_back(tp.mean);
        actual.push_back(heldout[i].y);
        crps_acc += crps_from_samples(std::move(tp.samples), heldout[i].y);
    }
    PointMetrics pm = point_metrics(pred, actual);
    EvalReport rep;
    rep.rmse = pm.rmse;
    rep.mae = pm.mae;
    rep.crps = crps_acc / static_cast<double>(heldout.size());
    rep.trips = static_cast<int>(heldout.size());
    return rep;
}

// The fixed diagnostic panel: both baselines, the four noise scales, and an
// evenly spread sample of ten in-vehicle and ten transfer coefficients.
inline std::vector<std::pair<std::string, std::vector<double>>> monitored_series(
    const PosteriorDraws& draws) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    const int D = draws.draws();
    auto push = [&](const std::string& name, auto&& get) {
        std::vector<double> v(static_cast<std::size_t>(D));
        for (int j = 0; j < D; ++j) v[static_cast<std::size_t>(j)] = get(j);
        out.emplace_back(name, std::move(v));
    };
    push("q1", [&](int j) { return draws.q1[static_cast<std::size_t>(j)]; });
    push("q2", [&](int j) { return draws.q2[static_cast<std::size_t>(j)]; });
    push("sigma_access", [&](int j) { return draws.sigma[static_cast<std::size_t>(j)].access; });
    push("sigma_invehicle",
         [&](int j) { return draws.sigma[static_cast<std::size_t>(j)].invehicle; });
    push("sigma_transfer",
         [&](int j) { return draws.sigma[static_cast<std::size_t>(j)].transfer; });
    push("sigma_egress", [&](int j) { return draws.sigma[static_cast<std::size_t>(j)].egress; });
    for (int i = 0; i < 10; ++i) {
        const int o = (i * draws.n) / 10;
        const int t = (i * draws.T) / 10;
        push("theta[" + std::to_string(o) + "," + std::to_string(t) + "]",
             [&, o, t](int j) { return draws.theta_at(j, o, t); });
    }
    for (int i = 0; i < 10; ++i) {
        const int o = (i * draws.n) / 10;
        const int t = (i * draws.T) / 10;
        push("phi[" + std::to_string(o) + "," + std::to_string(t) + "]",
             [&, o, t](int j) { return draws.phi_at(j, o, t); });
    }
    return out;
}

struct DiagnosticRow {
    std::string name;
    double mean = 0.0, sd = 0.0, ess = 0.0;
    bool ok = false;
};

inline std::vector<DiagnosticRow> diagnose(const PosteriorDraws& draws, double ess_threshold) {
    std::vector<DiagnosticRow> rows;
    for (auto& [name, series] : monitored_series(draws)) {
        Summary s = summarize(series);
        DiagnosticRow row;
        row.name = name;
        row.mean = s.mean;
        row.sd = s.sd;
        row.ess = effective_sample_size(series);
        row.ok = row.ess >= ess_threshold;
        rows.push_back(std::move(row));
    }
    return rows;
}

// Fraction of coefficient cells whose central 95% posterior interval covers
// the matching truth entry. truth slabs are n x T.
struct CoverageReport {
    double theta_coverage = 0.0;
    double phi_coverage = 0.0;
};

inline CoverageReport coefficient_coverage(const PosteriorDraws& draws,
                                           const Eigen::MatrixXd& theta_truth,
                                           const Eigen::MatrixXd& phi_truth) {
    if (theta_truth.rows() != draws.n || theta_truth.cols() != draws.T ||
        phi_truth.rows() != draws.n || phi_truth.cols() != draws.T)
        throw std::invalid_argument("coverage: truth slab shape mismatch");
    const int D = draws.draws();
    std::vector<double> series(static_cast<std::size_t>(D));
    int cover_theta = 0, cover_phi = 0;
    for (int o = 0; o < draws.n; ++o)
        for (int t = 0; t < draws.T; ++t) {
            for (int j = 0; j < D; ++j)
                series[static_cast<std::size_t>(j)] = draws.theta_at(j, o, t);
            std::sort(series.begin(), series.end());
            if (quantile_sorted(series, 0.025) <= theta_truth(o, t) &&
                theta_truth(o, t) <= quantile_sorted(series, 0.975))
                ++cover_theta;
            for (int j = 0; j < D; ++j)
                series[static_cast<std::size_t>(j)] = draws.phi_at(j, o, t);
            std::sort(series.begin(), series.end());
            if (quantile_sorted(series, 0.025) <= phi_truth(o, t) &&
                phi_truth(o, t) <= quantile_sorted(series, 0.975))
                ++cover_phi;
        }
    const double cells = static_cast<double>(draws.n) * static_cast<double>(draws.T);
    return {cover_theta / cells, cover_phi / cells};
}

// Per-interval root-mean-square error of the posterior state mean against a
// truth trajectory.
inline std::vector<double> state_rmse_by_interval(const PosteriorDraws& draws,
                                                  const Eigen::MatrixXd& x_truth) {
    if (x_truth.rows() != draws.T || x_truth.cols() != draws.c)
        throw std::invalid_argument("state rmse: truth shape mismatch");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(draws.T, draws.c);
    for (const Eigen::MatrixXd& xd : draws.x) mean += xd;
    mean /= static_cast<double>(draws.draws());
    std::vector<double> out(static_cast<std::size_t>(draws.T));
    for (int t = 0; t < draws.T; ++t)
        out[static_cast<std::size_t>(t)] =
            std::sqrt((mean.row(t) - x_truth.row(t)).squaredNorm() /
                      static_cast<double>(draws.c));
    return out;
}

}  // namespace transit

#endif  // TRANSIT_EVAL_HPP
