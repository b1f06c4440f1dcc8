#ifndef TRANSIT_ASSIGNMENT_HPP
#define TRANSIT_ASSIGNMENT_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "transit/data.hpp"
#include "transit/gibbs.hpp"
#include "transit/network.hpp"
#include "transit/rng.hpp"

namespace transit {

// Per-cell assigned path counts aggregated over posterior draws. Counts are
// integers per draw; sums stay in integer arithmetic so that the mean
// counts of a cell add up to its observed trip total identically.
struct CellAssignment {
    CellKey key;
    std::vector<long long> count_sum;    // per path, over draws
    std::vector<double> count_sumsq;     // per path, over draws
    int observed = 0;

    double mean(int k, int draws) const {
        return static_cast<double>(count_sum[static_cast<std::size_t>(k)]) / draws;
    }
    double sd(int k, int draws) const {
        double m = mean(k, draws);
        double ex2 = count_sumsq[static_cast<std::size_t>(k)] / draws;
        return std::sqrt(std::max(0.0, ex2 - m * m));
    }
};

struct LinkFlowSummary {
    int link = -1;
    int t = -1;
    double mean = 0.0;
    double sd = 0.0;
};

struct AssignmentReport {
    int draws = 0;
    std::vector<CellAssignment> cells;      // multipath first, then single-path
    std::vector<LinkFlowSummary> flows;     // per (in-vehicle link, interval)
};

// Summarize assigned path counts and link flows over draws. With
// `prior_only` the stored choice counts are replaced by multinomial draws
// from each posterior draw's choice probabilities alone, i.e. the flow
// distribution before conditioning on the observed travel times.
inline AssignmentReport build_assignment(const PosteriorDraws& draws, const PathTable& table,
                                         const TripDataset& ds, bool prior_only = false,
                                         std::uint64_t seed = 0) {
    const int D = draws.draws();
    if (D == 0) throw std::invalid_argument("assignment: no posterior draws");
    const int T = ds.intervals();

    // Map the stored multipath cells onto dataset cells.
    std::map<std::tuple<int, int, int>, std::size_t> stored_index;
    for (std::size_t i = 0; i < draws.zcells.size(); ++i)
        stored_index[{draws.zcells[i].origin, draws.zcells[i].destination,
                      draws.zcells[i].t}] = i;

    AssignmentReport rep;
    rep.draws = D;

    struct CellPlan {
        int cell = -1;
        int set_index = -1;
        long long stored = -1;  // index into zcells, -1 for single-path
    };
    std::vector<CellPlan> plan;
    for (int ci = 0; ci < ds.cell_count(); ++ci) {
        const Cell& cell = ds.cell(ci);
        const PathSet& ps = table.set(cell.set_index);
        CellPlan cp;
        cp.cell = ci;
        cp.set_index = cell.set_index;
        if (ps.choice_relevant()) {
            auto it = stored_index.find({cell.origin, cell.destination, cell.t});
            if (it == stored_index.end())
                throw std::invalid_argument("assignment: stored run lacks cell (" +
                                            std::to_string(cell.origin) + "," +
                                            std::to_string(cell.destination) + ",t=" +
                                            std::to_string(cell.t) + ")");
            cp.stored = static_cast<long long>(it->second);
        }
        plan.push_back(cp);

        CellAssignment ca;
        ca.key = {cell.origin, cell.destination, cell.t, ps.path_count()};
        ca.count_sum.assign(static_cast<std::size_t>(ps.path_count()), 0);
        ca.count_sumsq.assign(static_cast<std::size_t>(ps.path_count()), 0.0);
        ca.observed = cell.trip_count();
        rep.cells.push_back(std::move(ca));
    }

    int link_count = 0;
    for (int si = 0; si < table.size(); ++si)
        for (const Path& p : table.set(si).paths)
            for (int id : p.links) link_count = std::max(link_count, id + 1);

    Eigen::MatrixXd flow_sum = Eigen::MatrixXd::Zero(link_count, T);
    Eigen::MatrixXd flow_sumsq = Eigen::MatrixXd::Zero(link_count, T);
    Eigen::MatrixXd flow(link_count, T);

    std::vector<int> counts;
    std::vector<double> w;
    for (int j = 0; j < D; ++j) {
        flow.setZero();
        for (std::size_t pi = 0; pi < plan.size(); ++pi) {
            const CellPlan& cp = plan[pi];
            const Cell& cell = ds.cell(cp.cell);
            const PathSet& ps = table.set(cp.set_index);
            const int K = ps.path_count();
            counts.assign(static_cast<std::size_t>(K), 0);
            if (cp.stored < 0) {
                counts[0] = cell.trip_count();
            } else if (prior_only) {
                // Multinomial draw from the choice model of this draw.
                Eigen::VectorXd x = draws.x[static_cast<std::size_t>(j)].row(cell.t).transpose();
                Eigen::VectorXd probs = choice_probabilities(
                    ps, x, draws.theta_at(j, cell.origin, cell.t),
                    draws.phi_at(j, cell.origin, cell.t));
                w.assign(probs.data(), probs.data() + probs.size());
                Rng rng = make_stream(seed, StreamPurpose::PriorAssign,
                                      static_cast<std::uint64_t>(j),
                                      static_cast<std::uint64_t>(pi));
                for (int trip = 0; trip < cell.trip_count(); ++trip)
                    ++counts[static_cast<std::size_t>(rcategorical(rng, w))];
            } else {
                const auto& stored =
                    draws.zcounts[static_cast<std::size_t>(j)][static_cast<std::size_t>(cp.stored)];
                if (static_cast<int>(stored.size()) != K)
                    throw std::invalid_argument("assignment: stored path count mismatch");
                for (int k = 0; k < K; ++k) counts[static_cast<std::size_t>(k)] = stored[static_cast<std::size_t>(k)];
            }
            CellAssignment& ca = rep.cells[pi];
            for (int k = 0; k < K; ++k) {
                const auto cnt = static_cast<long long>(counts[static_cast<std::size_t>(k)]);
                ca.count_sum[static_cast<std::size_t>(k)] += cnt;
                ca.count_sumsq[static_cast<std::size_t>(k)] +=
                    static_cast<double>(cnt) * static_cast<double>(cnt);
                if (cnt > 0)
                    for (int id : ps.paths[static_cast<std::size_t>(k)].links)
                        flow(id, cell.t) += static_cast<double>(cnt);
            }
        }
        flow_sum += flow;
        flow_sumsq += flow.cwiseProduct(flow);
    }

    for (int id = 0; id < link_count; ++id)
        for (int t = 0; t < T; ++t) {
            LinkFlowSummary lf;
            lf.link = id;
            lf.t = t;
            lf.mean = flow_sum(id, t) / D;
            double ex2 = flow_sumsq(id, t) / D;
            lf.sd = std::sqrt(std::max(0.0, ex2 - lf.mean * lf.mean));
            rep.flows.push_back(lf);
        }
    return rep;
}

}  // namespace transit

#endif  // TRANSIT_ASSIGNMENT_HPP
