#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <sstream>
#include <string>
#include <vector>

#include "transit/gibbs.hpp"
#include "transit/simulate.hpp"

using namespace transit;

namespace {

struct Fit {
    SyntheticNetwork sn = desk_network();
    PathTable table;
    TripDataset ds;
    RunConfig cfg;

    explicit Fit(int T = 3, int demand_multi = 6, int demand_single = 2) {
        table = build_path_table(sn.net);
        TruthConfig tcfg;
        tcfg.T = T;
        GroundTruth gt = generate_truth(sn, tcfg, 11);
        SimulatedData sd = generate_trips(table, gt, demand_multi, demand_single, 12);
        ds = TripDataset::build(table, sd.trips, T);
        cfg.intervals = T;
        cfg.burnin = 2;
        cfg.samples = 2;
        cfg.thin = 1;
        cfg.cp_rank = 2;
        cfg.seed = 901;
    }
};

}  // namespace

TEST_CASE("warm start recovers additive costs from clean trip means") {
    Fit f;
    // Noise-free trips at the baseline: every first-listed path's travel time
    // equals its routed baseline sum.
    std::vector<TripObservation> trips;
    for (int si = 0; si < f.table.size(); ++si) {
        const PathSet& ps = f.table.set(si);
        double y = ps.rows.front().dot(f.sn.base_cost);
        for (int rep = 0; rep < 5; ++rep) trips.push_back({ps.origin, ps.destination, 0, y});
    }
    TripDataset ds = TripDataset::build(f.table, trips, 1);
    Eigen::VectorXd m0 = warm_start_m0(f.table, ds, f.sn.net.cost_dim(), 120.0);
    REQUIRE(m0.size() == f.sn.net.cost_dim());
    CHECK(m0.minCoeff() >= 1.0);

    // The fitted prior mean reproduces each O-D's observed mean closely.
    double worst = 0.0;
    for (int si = 0; si < f.table.size(); ++si) {
        const PathSet& ps = f.table.set(si);
        double fit = ps.rows.front().dot(m0);
        double obs = ps.rows.front().dot(f.sn.base_cost);
        worst = std::max(worst, std::abs(fit - obs) / obs);
    }
    CHECK(worst < 0.10);
}

TEST_CASE("initialization respects the model variant freezes") {
    Fit f;
    auto init_for = [&](int model) {
        RunConfig cfg = f.cfg;
        cfg.model = model;
        GibbsEngine eng(f.sn.net, f.table, f.ds, cfg);
        Rng rng = make_rng(5);
        return eng.initialize(rng);
    };

    ModelState m1 = init_for(1);
    CHECK(m1.tensor.U.cwiseAbs().maxCoeff() == 0.0);
    CHECK(m1.tensor.V.cwiseAbs().maxCoeff() == 0.0);
    CHECK(m1.tensor.W.cwiseAbs().maxCoeff() == 0.0);

    ModelState m2 = init_for(2);
    CHECK((m2.tensor.W.array() == 1.0).all());
    CHECK(m2.tensor.V.cwiseAbs().maxCoeff() > 0.0);

    ModelState m3 = init_for(3);
    CHECK((m3.tensor.V.array() == 1.0).all());
    CHECK(m3.tensor.W.cwiseAbs().maxCoeff() > 0.0);

    ModelState m4 = init_for(4);
    CHECK(m4.tensor.U.cwiseAbs().maxCoeff() > 0.0);
    CHECK(m4.sigma.access == Catch::Approx(std::exp(-3.0)));
    CHECK(m4.tensor.q1 == 0.0);
    CHECK(m4.x.rows() == f.ds.intervals());
    CHECK(m4.x.cols() == f.sn.net.cost_dim());
    CHECK((m4.Ku - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

    // initial choices exist for every cell and stay in range
    REQUIRE(static_cast<int>(m4.z.size()) == f.ds.cell_count());
    for (int i = 0; i < f.ds.cell_count(); ++i) {
        const Cell& cell = f.ds.cell(i);
        int K = f.table.set(cell.set_index).path_count();
        REQUIRE(static_cast<int>(m4.z[static_cast<std::size_t>(i)].size()) == cell.trip_count());
        for (int k : m4.z[static_cast<std::size_t>(i)]) {
            REQUIRE(k >= 0);
            REQUIRE(k < K);
        }
    }
}

TEST_CASE("sweep visits the blocks of the chosen model variant in order") {
    Fit f;

    RunConfig full = f.cfg;
    full.model = 4;
    GibbsEngine eng4(f.sn.net, f.table, f.ds, full);
    Rng rng = make_rng(9);
    ModelState st = eng4.initialize(rng);
    CHECK(eng4.step(st, rng) == "states,sigma,factors,baselines,ku,choices");

    RunConfig plain = f.cfg;
    plain.model = 1;
    GibbsEngine eng1(f.sn.net, f.table, f.ds, plain);
    Rng rng1 = make_rng(9);
    ModelState st1 = eng1.initialize(rng1);
    CHECK(eng1.step(st1, rng1) == "states,sigma,baselines,choices");
    // the frozen factors never move
    CHECK(st1.tensor.U.cwiseAbs().maxCoeff() == 0.0);
    CHECK(st1.tensor.V.cwiseAbs().maxCoeff() == 0.0);

    RunConfig spatial_only = f.cfg;
    spatial_only.model = 2;
    GibbsEngine eng2(f.sn.net, f.table, f.ds, spatial_only);
    Rng rng2 = make_rng(9);
    ModelState st2 = eng2.initialize(rng2);
    CHECK(eng2.step(st2, rng2) == "states,sigma,factors,baselines,ku,choices");
    CHECK((st2.tensor.W.array() == 1.0).all());

    RunConfig temporal_only = f.cfg;
    temporal_only.model = 3;
    GibbsEngine eng3(f.sn.net, f.table, f.ds, temporal_only);
    Rng rng3 = make_rng(9);
    ModelState st3 = eng3.initialize(rng3);
    CHECK(eng3.step(st3, rng3) == "states,sigma,factors,baselines,ku,choices");
    CHECK((st3.tensor.V.array() == 1.0).all());

    // a sweep keeps the state finite and positive where it must be
    CHECK(st.x.allFinite());
    CHECK(st.sigma.access > 0.0);
    CHECK(st.sigma.invehicle > 0.0);
    CHECK(st.sigma.transfer > 0.0);
    CHECK(st.sigma.egress > 0.0);
    CHECK(st.Ku.llt().info() == Eigen::Success);
}

TEST_CASE("runs are deterministic in the seed") {
    Fit f;
    f.cfg.model = 4;
    GibbsEngine eng(f.sn.net, f.table, f.ds, f.cfg);
    PosteriorDraws a = eng.run();
    PosteriorDraws b = eng.run();
    REQUIRE(a.draws() == b.draws());
    for (int j = 0; j < a.draws(); ++j) {
        auto js = static_cast<std::size_t>(j);
        CHECK((a.x[js] - b.x[js]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.V[js] - b.V[js]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.q1[js] == b.q1[js]);
        CHECK(a.sigma[js].invehicle == b.sigma[js].invehicle);
        CHECK(a.zcounts[js] == b.zcounts[js]);
    }

    RunConfig moved = f.cfg;
    moved.seed = 902;
    GibbsEngine eng2(f.sn.net, f.table, f.ds, moved);
    PosteriorDraws c = eng2.run();
    CHECK((a.x[0] - c.x[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("burnin and thinning select the right sweeps") {
    Fit f;
    f.cfg.burnin = 3;
    f.cfg.samples = 2;
    f.cfg.thin = 2;
    f.cfg.model = 1;  // cheapest variant; the schedule is what matters
    GibbsEngine eng(f.sn.net, f.table, f.ds, f.cfg);
    std::ostringstream trace;
    PosteriorDraws draws = eng.run(&trace);
    REQUIRE(draws.draws() == 2);
    CHECK(draws.iter[0] == 3);
    CHECK(draws.iter[1] == 5);
    CHECK(draws.chain[0] == 0);

    // the trace logs every sweep with its block list and storage flag
    std::string log = trace.str();
    CHECK(log.find("chain=0 iter=0 blocks=states,sigma,baselines,choices stored=0") !=
          std::string::npos);
    CHECK(log.find("iter=3 blocks=states,sigma,baselines,choices stored=1") != std::string::npos);
    CHECK(log.find("iter=4 blocks=states,sigma,baselines,choices stored=0") != std::string::npos);
    CHECK(log.find("iter=5 blocks=states,sigma,baselines,choices stored=1") != std::string::npos);
    CHECK(log.find("iter=6") == std::string::npos);
}

TEST_CASE("stored choice counts add up to the observed trips") {
    Fit f;
    f.cfg.model = 4;
    GibbsEngine eng(f.sn.net, f.table, f.ds, f.cfg);
    PosteriorDraws draws = eng.run();
    REQUIRE(draws.draws() == f.cfg.samples);
    REQUIRE(draws.zcells.size() == draws.zcounts[0].size());

    for (std::size_t ci = 0; ci < draws.zcells.size(); ++ci) {
        const CellKey& key = draws.zcells[ci];
        // find the matching dataset cell
        int expect = -1;
        for (int i = 0; i < f.ds.cell_count(); ++i) {
            const Cell& cell = f.ds.cell(i);
            if (cell.origin == key.origin && cell.destination == key.destination &&
                cell.t == key.t) {
                expect = cell.trip_count();
                break;
            }
        }
        REQUIRE(expect >= 0);
        for (int j = 0; j < draws.draws(); ++j) {
            int total = 0;
            for (int cnt : draws.zcounts[static_cast<std::size_t>(j)][ci]) {
                REQUIRE(cnt >= 0);
                total += cnt;
            }
            CHECK(total == expect);
        }
    }

    // two chains tag their draws
    RunConfig two = f.cfg;
    two.chains = 2;
    two.burnin = 1;
    two.samples = 1;
    GibbsEngine eng2(f.sn.net, f.table, f.ds, two);
    PosteriorDraws d2 = eng2.run();
    REQUIRE(d2.draws() == 2);
    CHECK(d2.chain[0] == 0);
    CHECK(d2.chain[1] == 1);
}
