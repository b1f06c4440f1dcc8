#ifndef TRANSIT_SIMULATE_HPP
#define TRANSIT_SIMULATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "transit/choice.hpp"
#include "transit/data.hpp"
#include "transit/kernels.hpp"
#include "transit/likelihood.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"
#include "transit/samplers.hpp"
#include "transit/statespace.hpp"

namespace transit {

// Enumerate paths for every ordered O-D pair of the network.
inline PathTable build_path_table(const NetworkModel& net, int k_max = 5,
                                  double detour_cap = 1.5) {
    PathTable table;
    for (int o = 0; o < net.station_count(); ++o)
        for (int d = 0; d < net.station_count(); ++d) {
            if (o == d) continue;
            table.add(enumerate_paths(net, o, d, k_max, detour_cap));
        }
    return table;
}

// A network bundled with baseline per-component costs in seconds. The
// baselines seed both truth generation and warm starts.
struct SyntheticNetwork {
    NetworkModel net;
    Eigen::VectorXd base_cost;  // length c
};

// Two intersecting lines sharing two interchange stations, with a balanced
// parallel corridor between them. Both corridor legs 1 -> 4 take three
// links, their baseline in-vehicle times differ by 3 s (450 vs 447), and
// the transfer penalties at the interchanges differ by 4 s. Every pair of
// competing routes therefore has the same hop count and a utility gap of a
// few seconds, so simulated path choices stay informative about the
// coefficients instead of collapsing onto one route.
//
//   line 1:  0 - 1 - 2 - 3 - 4 - 5 - 10
//   line 2:  6 - 1 - 7 - 8 - 4 - 9 - 11
//
// 12 stations, 24 directed links, 4 directed transfers: c = 64.
inline SyntheticNetwork desk_network() {
    std::vector<Station> stations;
    for (int i = 0; i < 12; ++i) stations.push_back({i, "s" + std::to_string(i), 0, 0, false});

    const std::vector<std::pair<int, int>> seg1 = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 10}};
    const std::vector<std::pair<int, int>> seg2 = {{6, 1}, {1, 7}, {7, 8}, {8, 4}, {4, 9}, {9, 11}};
    std::vector<Link> links;
    auto add_line = [&](const std::vector<std::pair<int, int>>& segs, int line) {
        for (auto [a, b] : segs) links.push_back({static_cast<int>(links.size()), a, b, line});
        for (auto it = segs.rbegin(); it != segs.rend(); ++it)
            links.push_back({static_cast<int>(links.size()), it->second, it->first, line});
    };
    add_line(seg1, 1);
    add_line(seg2, 2);

    std::vector<TransferLink> transfers = {
        {0, 1, 1, 2}, {1, 1, 2, 1}, {2, 4, 1, 2}, {3, 4, 2, 1}};

    SyntheticNetwork sn;
    sn.net = NetworkModel::build(std::move(stations), std::move(links), std::move(transfers));

    const int c = sn.net.cost_dim();
    sn.base_cost.resize(c);
    // In-vehicle baselines per link id. Forward corridor links are 1,2,3
    // (line 1, sum 450) and 13,14,15 (line 2, sum 447); reverses are 8,9,10
    // and 20,21,22 with the same sums; corridor links are uniform per line so
    // routes between interior stations (2,3 vs 7,8) balance too. Tail links
    // match their reverses.
    std::map<int, double> iv = {{0, 120},  {1, 150},  {2, 150},  {3, 150},  {4, 130},  {5, 125},
                                {6, 125},  {7, 130},  {8, 150},  {9, 150},  {10, 150}, {11, 120},
                                {12, 135}, {13, 149}, {14, 149}, {15, 149}, {16, 128}, {17, 122},
                                {18, 122}, {19, 128}, {20, 149}, {21, 149}, {22, 149}, {23, 135}};
    // Interchange penalties: 58/62 s at station 1, 62/58 s at station 4, so
    // competing routes differ by at most 4 s of transfer time.
    const double tr[4] = {58.0, 62.0, 62.0, 58.0};
    for (int i = 0; i < c; ++i) {
        auto [kind, id] = sn.net.attr_of(i);
        switch (kind) {
            case CostKind::Access:
                sn.base_cost(i) = 60.0 + (id % 5) * 10.0;
                break;
            case CostKind::InVehicle:
                sn.base_cost(i) = iv.at(id);
                break;
            case CostKind::Transfer:
                sn.base_cost(i) = tr[id];
                break;
            case CostKind::Egress:
                sn.base_cost(i) = 70.0 + (id % 4) * 10.0;
                break;
        }
    }
    return sn;
}

// Larger two-line variant of the same pattern: two lines of `len` stations
// each, crossing at two interchanges. n = 2 len - 2.
inline SyntheticNetwork large_network(int len = 46) {
    if (len < 6) throw std::invalid_argument("large_network: len must be >= 6");
    std::vector<Station> stations;
    const int n = 2 * len - 2;
    for (int i = 0; i < n; ++i) stations.push_back({i, "s" + std::to_string(i), 0, 0, false});

    // Line 1 uses stations 0..len-1 in order; line 2 uses len..2len-3 except
    // that its stations at 1/4 and 3/4 of its route are line 1's.
    std::vector<int> route1, route2;
    for (int i = 0; i < len; ++i) route1.push_back(i);
    const int i1 = len / 4, i2 = (3 * len) / 4;
    int next = len;
    for (int i = 0; i < len; ++i) {
        if (i == i1) route2.push_back(route1[i1]);
        else if (i == i2) route2.push_back(route1[i2]);
        else route2.push_back(next++);
    }
    if (next != n) throw std::logic_error("large_network: station count mismatch");

    std::vector<Link> links;
    auto add_route = [&](const std::vector<int>& r, int line) {
        for (std::size_t i = 0; i + 1 < r.size(); ++i)
            links.push_back({static_cast<int>(links.size()), r[i], r[i + 1], line});
        for (std::size_t i = r.size() - 1; i > 0; --i)
            links.push_back({static_cast<int>(links.size()), r[i], r[i - 1], line});
    };
    add_route(route1, 1);
    add_route(route2, 2);

    std::vector<TransferLink> transfers = {{0, route1[i1], 1, 2},
                                           {1, route1[i1], 2, 1},
                                           {2, route1[i2], 1, 2},
                                           {3, route1[i2], 2, 1}};

    SyntheticNetwork sn;
    sn.net = NetworkModel::build(std::move(stations), std::move(links), std::move(transfers));
    const int c = sn.net.cost_dim();
    sn.base_cost.resize(c);
    for (int i = 0; i < c; ++i) {
        auto [kind, id] = sn.net.attr_of(i);
        switch (kind) {
            case CostKind::Access: sn.base_cost(i) = 60.0 + (id % 5) * 10.0; break;
            case CostKind::InVehicle: sn.base_cost(i) = 90.0 + (id % 9) * 10.0; break;
            case CostKind::Transfer: sn.base_cost(i) = 35.0 + id * 7.0; break;
            case CostKind::Egress: sn.base_cost(i) = 45.0 + (id % 4) * 8.0; break;
        }
    }
    return sn;
}

struct GroundTruth {
    Eigen::MatrixXd x;  // T x c
    NoiseScale sigma;
    ChoiceTensor tensor;
    Eigen::MatrixXd Ku;  // 2 x 2
};

struct TruthConfig {
    int T = 8;
    int R = 2;
    NoiseScale sigma{0.32, 0.155, 0.31, 0.25};
    double q1 = -0.2;
    double q2 = -0.4;
    double tau2 = 25.0;
    double gp_lengthscale = 3.0;
    double gp_alpha = 0.2;
    double gp_variance = 1.0;
    double nu0 = 5.0;
};

// Draw a complete parameter state from the generative model: x_1 equals the
// baseline exactly, later intervals follow the random walk; the coefficient
// factors come from their GP and inverse-Wishart priors.
inline GroundTruth generate_truth(const SyntheticNetwork& sn, const TruthConfig& cfg,
                                  std::uint64_t seed) {
    const int c = sn.net.cost_dim();
    const int n = sn.net.station_count();
    GroundTruth gt;
    gt.sigma = cfg.sigma;

    Rng rng_x = make_stream(seed, StreamPurpose::TruthState);
    gt.x.resize(cfg.T, c);
    gt.x.row(0) = sn.base_cost.transpose();
    const double tau = std::sqrt(cfg.tau2);
    for (int t = 1; t < cfg.T; ++t)
        for (int i = 0; i < c; ++i) gt.x(t, i) = gt.x(t - 1, i) + tau * rnorm(rng_x);

    Rng rng_f = make_stream(seed, StreamPurpose::TruthFactors);
    KernelMatrix ks = KernelMatrix::from(diffusion_kernel(sn.net.adjacency(), cfg.gp_alpha));
    KernelMatrix kt =
        KernelMatrix::from(se_kernel(cfg.T, cfg.gp_lengthscale, cfg.gp_variance));
    gt.Ku = sample_inverse_wishart(rng_f, Eigen::MatrixXd::Identity(2, 2), cfg.nu0);
    KernelMatrix ku = KernelMatrix::from(gt.Ku);

    gt.tensor = ChoiceTensor::zeros(n, cfg.T, cfg.R);
    gt.tensor.q1 = cfg.q1;
    gt.tensor.q2 = cfg.q2;
    auto gaussian_vec = [&](int d) {
        Eigen::VectorXd z(d);
        for (int i = 0; i < d; ++i) z(i) = rnorm(rng_f);
        return z;
    };
    for (int r = 0; r < cfg.R; ++r) {
        gt.tensor.V.col(r) = ks.chol_lower * gaussian_vec(n);
        gt.tensor.W.col(r) = kt.chol_lower * gaussian_vec(cfg.T);
        gt.tensor.U.col(r) = ku.chol_lower * gaussian_vec(2);
    }
    return gt;
}

struct SimulatedData {
    std::vector<TripObservation> trips;
    std::vector<int> path_of_trip;  // chosen path index, aligned with trips
    long long clamped = 0;          // draws that exhausted the y > 0 retries
};

// Simulate trips for every O-D pair and interval. Multipath pairs receive
// `demand_multipath` trips per interval, the rest `demand_singlepath`. Each
// cell draws from its own RNG stream keyed by (origin, destination,
// interval), so demand changes elsewhere never shift its draws.
inline SimulatedData generate_trips(const PathTable& table, const GroundTruth& gt,
                                    int demand_multipath, int demand_singlepath,
                                    std::uint64_t seed) {
    SimulatedData out;
    const int T = static_cast<int>(gt.x.rows());
    for (int si = 0; si < table.size(); ++si) {
        const PathSet& ps = table.set(si);
        const int demand = ps.choice_relevant() ? demand_multipath : demand_singlepath;
        if (demand <= 0) continue;
        for (int t = 0; t < T; ++t) {
            const std::uint64_t od_key = (static_cast<std::uint64_t>(ps.origin) << 32) |
                                         static_cast<std::uint64_t>(ps.destination);
            Rng rng = make_stream(seed, StreamPurpose::Trips, od_key,
                                  static_cast<std::uint64_t>(t));
            Eigen::VectorXd x = gt.x.row(t).transpose();
            Eigen::VectorXd probs = choice_probabilities(
                ps, x, gt.tensor.theta_at(ps.origin, t), gt.tensor.phi_at(ps.origin, t));
            std::vector<double> w(probs.data(), probs.data() + probs.size());
            for (int j = 0; j < demand; ++j) {
                int k = rcategorical(rng, w);
                PathMoments pm = path_moments(ps.attrs[static_cast<std::size_t>(k)], x);
                const double sd = std::sqrt(variance_at(pm, gt.sigma));
                double y = 0.0;
                bool ok = false;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    y = pm.mean + sd * rnorm(rng);
                    if (y > 0.0) { ok = true; break; }
                }
                if (!ok) {
                    y = 1.0;
                    ++out.clamped;
                }
                out.trips.push_back({ps.origin, ps.destination, t, y});
                out.path_of_trip.push_back(k);
            }
        }
    }
    return out;
}

// Rebuild the per-cell path assignments for a dataset constructed from these
// exact trips in this exact order.
inline std::vector<std::vector<int>> align_assignments(const TripDataset& ds,
                                                       const PathTable& table,
                                                       const std::vector<TripObservation>& trips,
                                                       const std::vector<int>& path_of_trip) {
    if (trips.size() != path_of_trip.size())
        throw std::invalid_argument("align_assignments: length mismatch");
    std::vector<std::vector<int>> z(static_cast<std::size_t>(ds.cell_count()));
    std::map<std::pair<int, int>, int> cell_of;  // (set, t) -> cell index
    for (int i = 0; i < ds.cell_count(); ++i)
        cell_of[{ds.cell(i).set_index, ds.cell(i).t}] = i;
    std::vector<std::size_t> cursor(static_cast<std::size_t>(ds.cell_count()), 0);
    for (int i = 0; i < ds.cell_count(); ++i)
        z[static_cast<std::size_t>(i)].assign(
            static_cast<std::size_t>(ds.cell(i).trip_count()), -1);
    for (std::size_t j = 0; j < trips.size(); ++j) {
        int si = table.find_index(trips[j].origin, trips[j].destination);
        auto it = cell_of.find({si, trips[j].t});
        if (it == cell_of.end())
            throw std::invalid_argument("align_assignments: trip has no cell");
        auto ci = static_cast<std::size_t>(it->second);
        if (cursor[ci] >= z[ci].size())
            throw std::invalid_argument("align_assignments: cell overflow");
        z[ci][cursor[ci]++] = path_of_trip[j];
    }
    for (std::size_t i = 0; i < z.size(); ++i)
        if (cursor[i] != z[i].size())
            throw std::invalid_argument("align_assignments: cell underfilled");
    return z;
}

}  // namespace transit

#endif  // TRANSIT_SIMULATE_HPP
