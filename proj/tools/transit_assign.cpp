// Command-line front end: simulate synthetic data, fit the model, evaluate
// held-out predictions, export assignments, and inspect posterior stores.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "transit/assignment.hpp"
#include "transit/config.hpp"
#include "transit/eval.hpp"
#include "transit/gibbs.hpp"
#include "transit/network_io.hpp"
#include "transit/simulate.hpp"
#include "transit/store.hpp"
#include "transit/trips_io.hpp"

namespace {

using nlohmann::json;

struct LoadedNetwork {
    transit::NetworkModel net;
    transit::PathTable table;
};

// Networks may carry their path sets inline; otherwise every O-D pair is
// enumerated with the default caps.
LoadedNetwork load_network(const std::string& path) {
    transit::NetworkFile nf = transit::read_network_file(path);
    LoadedNetwork ln;
    ln.net = std::move(nf.network);
    if (nf.has_paths) ln.table = std::move(nf.paths);
    else ln.table = transit::build_path_table(ln.net);
    return ln;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << '\n';
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, int k_max,
                 double detour_cap) {
    namespace fs = std::filesystem;
    transit::RunConfig cfg = transit::RunConfig::from_file(config_path);
    transit::SyntheticNetwork sn =
        cfg.sim_scale == "desk" ? transit::desk_network() : transit::large_network();
    transit::PathTable table = transit::build_path_table(sn.net, k_max, detour_cap);

    transit::TruthConfig tc;
    tc.T = cfg.intervals;
    tc.R = cfg.cp_rank;
    tc.sigma = cfg.sim_sigma();
    tc.q1 = cfg.sim_q1;
    tc.q2 = cfg.sim_q2;
    tc.tau2 = cfg.tau2;
    tc.gp_lengthscale = cfg.gp_lengthscale;
    tc.gp_alpha = cfg.gp_alpha;
    tc.gp_variance = cfg.gp_variance;
    tc.nu0 = cfg.nu0;
    transit::GroundTruth gt = transit::generate_truth(sn, tc, cfg.seed);
    transit::SimulatedData sim = transit::generate_trips(table, gt, cfg.demand_multipath,
                                                         cfg.demand_singlepath, cfg.seed);

    fs::create_directories(out_dir);
    transit::write_network_file(out_dir + "/network.txt", sn.net, &table);
    transit::write_trips_file(out_dir + "/trips.csv", sim.trips);

    {
        std::ofstream os(out_dir + "/truth_x.csv", std::ios::binary);
        os << "interval,attr,value\n";
        for (int t = 0; t < gt.x.rows(); ++t)
            for (int a = 0; a < gt.x.cols(); ++a)
                os << t << ',' << a << ',' << transit::format_g17(gt.x(t, a)) << '\n';
    }
    {
        std::ofstream os(out_dir + "/truth_coeffs.csv", std::ios::binary);
        os << "kind,station,interval,value\n";
        Eigen::MatrixXd th = gt.tensor.theta(), ph = gt.tensor.phi();
        for (int o = 0; o < th.rows(); ++o)
            for (int t = 0; t < th.cols(); ++t) {
                os << "theta," << o << ',' << t << ',' << transit::format_g17(th(o, t)) << '\n';
                os << "phi," << o << ',' << t << ',' << transit::format_g17(ph(o, t)) << '\n';
            }
    }
    {
        std::ofstream os(out_dir + "/truth_assignments.csv", std::ios::binary);
        os << "row,path\n";
        for (std::size_t i = 0; i < sim.path_of_trip.size(); ++i)
            os << i << ',' << sim.path_of_trip[i] << '\n';
    }
    json truth;
    truth["sigma"] = {{"access", gt.sigma.access},
                      {"invehicle", gt.sigma.invehicle},
                      {"transfer", gt.sigma.transfer},
                      {"egress", gt.sigma.egress}};
    truth["q1"] = gt.tensor.q1;
    truth["q2"] = gt.tensor.q2;
    truth["ku"] = {{"k11", gt.Ku(0, 0)}, {"k12", gt.Ku(0, 1)}, {"k22", gt.Ku(1, 1)}};
    truth["clamped_draws"] = sim.clamped;
    write_json_file(out_dir + "/truth.json", truth);

    int multipath = static_cast<int>(table.multipath_sets().size());
    json out;
    out["network"] = {{"stations", sn.net.station_count()},
                      {"links", sn.net.link_count()},
                      {"transfers", sn.net.transfer_count()},
                      {"cost_dim", sn.net.cost_dim()},
                      {"od_pairs", table.size()},
                      {"multipath_od_pairs", multipath}};
    out["trips"] = sim.trips.size();
    out["out_dir"] = out_dir;
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_fit(const std::string& config_path, const std::string& network_path,
            const std::string& trips_path, const std::string& out_dir,
            const std::string& trace_path, bool quiet) {
    transit::RunConfig cfg = transit::RunConfig::from_file(config_path);
    LoadedNetwork ln = load_network(network_path);
    transit::TripLoadResult trips =
        transit::read_trips_file(trips_path, cfg.intervals, cfg.max_malformed_fraction);
    transit::SplitResult split = transit::stratified_split(ln.table, trips.trips,
                                                           cfg.split_fraction, cfg.split_seed);
    std::vector<transit::TripObservation> train =
        transit::select_trips(trips.trips, split.train_idx);
    transit::TripDataset ds = transit::TripDataset::build(ln.table, train, cfg.intervals);

    transit::GibbsEngine engine(ln.net, ln.table, ds, cfg);
    std::ofstream trace;
    if (!trace_path.empty()) {
        trace.open(trace_path, std::ios::binary);
        if (!trace) throw std::runtime_error("cannot write trace file " + trace_path);
    }
    transit::GibbsEngine::Progress progress;
    if (!quiet)
        progress = [](int chain, long long done, long long total) {
            std::fprintf(stderr, "\rchain %d: %lld/%lld", chain, done, total);
            if (done == total) std::fprintf(stderr, "\n");
        };
    transit::PosteriorDraws draws = engine.run(trace.is_open() ? &trace : nullptr, progress);

    transit::StoreMeta meta;
    meta.config = cfg;
    meta.config_hash = transit::hex64(cfg.hash());
    meta.network_hash = transit::hex64(transit::network_hash(ln.net, ln.table));
    meta.data_hash = transit::hex64(transit::hash_file(trips_path));
    transit::write_store(out_dir, meta, draws);

    json out;
    out["store"] = out_dir;
    out["draws"] = draws.draws();
    out["chains"] = cfg.chains;
    out["train_trips"] = train.size();
    out["heldout_trips"] = split.test_idx.size();
    out["malformed_rows"] = trips.malformed.size();
    out["config_hash"] = meta.config_hash;
    out["network_hash"] = meta.network_hash;
    out["data_hash"] = meta.data_hash;
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_evaluate(const std::string& store_dir, const std::string& network_path,
                 const std::string& trips_path, const std::string& out_path, bool eval_all) {
    transit::StoredRun run = transit::read_store(store_dir);
    LoadedNetwork ln = load_network(network_path);
    const std::string net_hash = transit::hex64(transit::network_hash(ln.net, ln.table));
    if (net_hash != run.meta.network_hash)
        throw std::runtime_error("network hash mismatch: store was fit on " +
                                 run.meta.network_hash + ", this network is " + net_hash);
    const transit::RunConfig& cfg = run.meta.config;
    transit::TripLoadResult trips =
        transit::read_trips_file(trips_path, cfg.intervals, cfg.max_malformed_fraction);

    const bool same_data = transit::hex64(transit::hash_file(trips_path)) == run.meta.data_hash;
    std::vector<transit::TripObservation> heldout;
    std::string mode;
    if (same_data && !eval_all) {
        transit::SplitResult split = transit::stratified_split(
            ln.table, trips.trips, cfg.split_fraction, cfg.split_seed);
        heldout = transit::select_trips(trips.trips, split.test_idx);
        mode = "heldout_split";
    } else {
        heldout = trips.trips;
        mode = "all_trips";
    }
    transit::EvalReport rep = transit::evaluate_heldout(run.draws, ln.table, heldout,
                                                        cfg.predictive_per_draw, cfg.seed);
    json out;
    out["rmse"] = rep.rmse;
    out["mae"] = rep.mae;
    out["crps"] = rep.crps;
    out["trips"] = rep.trips;
    out["mode"] = mode;
    if (!out_path.empty()) write_json_file(out_path, out);
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_assign(const std::string& store_dir, const std::string& network_path,
               const std::string& trips_path, const std::string& out_dir, bool prior_only) {
    namespace fs = std::filesystem;
    transit::StoredRun run = transit::read_store(store_dir);
    LoadedNetwork ln = load_network(network_path);
    const std::string net_hash = transit::hex64(transit::network_hash(ln.net, ln.table));
    if (net_hash != run.meta.network_hash)
        throw std::runtime_error("network hash mismatch: store was fit on " +
                                 run.meta.network_hash + ", this network is " + net_hash);
    if (transit::hex64(transit::hash_file(trips_path)) != run.meta.data_hash)
        throw std::runtime_error("data hash mismatch: assignments need the training trip file");
    const transit::RunConfig& cfg = run.meta.config;
    transit::TripLoadResult trips =
        transit::read_trips_file(trips_path, cfg.intervals, cfg.max_malformed_fraction);
    transit::SplitResult split = transit::stratified_split(ln.table, trips.trips,
                                                           cfg.split_fraction, cfg.split_seed);
    transit::TripDataset ds = transit::TripDataset::build(
        ln.table, transit::select_trips(trips.trips, split.train_idx), cfg.intervals);

    transit::AssignmentReport rep =
        transit::build_assignment(run.draws, ln.table, ds, prior_only, cfg.seed);

    fs::create_directories(out_dir);
    {
        std::ofstream os(out_dir + "/assignment_cells.csv", std::ios::binary);
        os << "origin,destination,interval,path,mean,sd,observed\n";
        for (const transit::CellAssignment& ca : rep.cells)
            for (int k = 0; k < ca.key.paths; ++k)
                os << ca.key.origin << ',' << ca.key.destination << ',' << ca.key.t << ',' << k
                   << ',' << transit::format_g17(ca.mean(k, rep.draws)) << ','
                   << transit::format_g17(ca.sd(k, rep.draws)) << ',' << ca.observed << '\n';
    }
    {
        std::ofstream os(out_dir + "/assignment_flows.csv", std::ios::binary);
        os << "link,interval,mean,sd\n";
        for (const transit::LinkFlowSummary& lf : rep.flows)
            os << lf.link << ',' << lf.t << ',' << transit::format_g17(lf.mean) << ','
               << transit::format_g17(lf.sd) << '\n';
    }
    json out;
    out["out_dir"] = out_dir;
    out["cells"] = rep.cells.size();
    out["flows"] = rep.flows.size();
    out["draws"] = rep.draws;
    out["prior_only"] = prior_only;
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_diagnose(const std::string& store_dir, const std::string& out_path, bool strict) {
    transit::StoredRun run = transit::read_store(store_dir);
    auto rows = transit::diagnose(run.draws, run.meta.config.ess_threshold);
    json jrows = json::array();
    int failing = 0;
    for (const auto& r : rows) {
        jrows.push_back({{"name", r.name},
                         {"mean", r.mean},
                         {"sd", r.sd},
                         {"ess", r.ess},
                         {"ok", r.ok}});
        if (!r.ok) ++failing;
    }
    json out;
    out["ess_threshold"] = run.meta.config.ess_threshold;
    out["monitored"] = jrows;
    out["failing"] = failing;
    if (!out_path.empty()) write_json_file(out_path, out);
    std::cout << out.dump(2) << '\n';
    return strict && failing > 0 ? 4 : 0;
}

int cmd_summary(const std::string& store_dir) {
    transit::StoredRun run = transit::read_store(store_dir);
    json jrows = json::array();
    for (auto& [name, series] : transit::monitored_series(run.draws)) {
        transit::Summary s = transit::summarize(series);
        jrows.push_back({{"name", name},
                         {"mean", s.mean},
                         {"sd", s.sd},
                         {"q05", s.q05},
                         {"q50", s.q50},
                         {"q95", s.q95}});
    }
    json out;
    out["draws"] = run.draws.draws();
    out["dims"] = {{"T", run.draws.T}, {"c", run.draws.c}, {"n", run.draws.n},
                   {"R", run.draws.R}};
    out["config_hash"] = run.meta.config_hash;
    out["network_hash"] = run.meta.network_hash;
    out["data_hash"] = run.meta.data_hash;
    out["parameters"] = jrows;
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic network cost estimation from automated fare records"};
    app.require_subcommand(1);

    std::string config_path, network_path, trips_path, out_dir, store_dir, out_path, trace_path;
    int k_max = 5;
    double detour_cap = 1.5;
    bool prior_only = false, strict = false, eval_all = false, quiet = false;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic network and trip records");
    sim->add_option("--config", config_path, "run configuration file")->required();
    sim->add_option("--out-dir", out_dir, "output directory")->required();
    sim->add_option("--k-max", k_max, "max paths per O-D pair");
    sim->add_option("--detour-cap", detour_cap, "max hop ratio against the shortest path");

    auto* fit = app.add_subcommand("fit", "Run the sampler and write a posterior store");
    fit->add_option("--config", config_path, "run configuration file")->required();
    fit->add_option("--network", network_path, "network file")->required();
    fit->add_option("--trips", trips_path, "trip records CSV")->required();
    fit->add_option("--out", out_dir, "posterior store directory")->required();
    fit->add_option("--trace", trace_path, "write a per-iteration block trace");
    fit->add_flag("--quiet", quiet, "suppress progress output");

    auto* eval = app.add_subcommand("evaluate", "Score held-out trips under the posterior");
    eval->add_option("--store", store_dir, "posterior store directory")->required();
    eval->add_option("--network", network_path, "network file")->required();
    eval->add_option("--trips", trips_path, "trip records CSV")->required();
    eval->add_option("--out", out_path, "also write the report to this JSON file");
    eval->add_flag("--all", eval_all, "score every trip, not just the held-out split");

    auto* assign = app.add_subcommand("assign", "Export posterior path counts and link flows");
    assign->add_option("--store", store_dir, "posterior store directory")->required();
    assign->add_option("--network", network_path, "network file")->required();
    assign->add_option("--trips", trips_path, "trip records CSV")->required();
    assign->add_option("--out-dir", out_dir, "output directory")->required();
    assign->add_flag("--prior-only", prior_only,
                     "draw assignments from the choice model without the travel-time term");

    auto* diag = app.add_subcommand("diagnose", "Effective-sample-size panel");
    diag->add_option("--store", store_dir, "posterior store directory")->required();
    diag->add_option("--out", out_path, "also write the report to this JSON file");
    diag->add_flag("--strict", strict, "exit 4 when any monitored parameter fails");

    auto* summ = app.add_subcommand("summary", "Posterior summaries of the monitored panel");
    summ->add_option("--store", store_dir, "posterior store directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, k_max, detour_cap);
        if (fit->parsed())
            return cmd_fit(config_path, network_path, trips_path, out_dir, trace_path, quiet);
        if (eval->parsed())
            return cmd_evaluate(store_dir, network_path, trips_path, out_path, eval_all);
        if (assign->parsed())
            return cmd_assign(store_dir, network_path, trips_path, out_dir, prior_only);
        if (diag->parsed()) return cmd_diagnose(store_dir, out_path, strict);
        if (summ->parsed()) return cmd_summary(store_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
