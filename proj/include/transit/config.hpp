#ifndef TRANSIT_CONFIG_HPP
#define TRANSIT_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "transit/statespace.hpp"

namespace transit {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Run configuration, read from a key=value file. Unknown keys are errors.
// The canonical serialization (sorted keys, fixed float format) defines the
// configuration hash recorded in manifests.
struct RunConfig {
    // observation window
    int intervals = 32;
    std::string interval_start = "06:00";
    int interval_minutes = 30;

    // sampler schedule
    std::uint64_t seed = 20240901;
    int chains = 1;
    int burnin = 8000;
    int samples = 2000;
    int thin = 1;
    // extra repetitions of the collapsed factor/baseline updates per sweep;
    // the elliptical slice steps take small angles when the data dominate
    // the prior, so repeating them buys mixing at modest cost
    int factor_reps = 1;

    // model structure; model 1 drops the factors, 2 drops the temporal
    // factor, 3 drops the spatial factor, 4 is the full specification
    int cp_rank = 4;
    int model = 4;

    // priors
    double prior_log_sigma_mean = -3.0;
    double prior_log_sigma_var = 0.2;
    double prior_q_mean = 0.0;
    double prior_q_var = 0.1;
    double gp_lengthscale = 3.0;
    double gp_alpha = 0.2;
    double gp_variance = 1.0;
    double omega0_scale = 1.0;
    double nu0 = 5.0;

    // state evolution
    double tau2 = 25.0;
    std::string m0_policy = "warmstart";  // warmstart | flat
    double m0_flat = 120.0;
    double p0_var = 10000.0;

    // numerics
    double jitter_cap = 1e-4;
    double slice_eps_log_sigma = 0.5;
    double slice_eps_q = 0.2;
    int slice_max_shrink = 200;

    // data handling
    double max_malformed_fraction = 0.001;
    double split_fraction = 0.1;
    std::uint64_t split_seed = 7;

    // diagnostics and prediction
    double ess_threshold = 200.0;
    int predictive_per_draw = 1;

    // simulation
    std::string sim_scale = "desk";  // desk | large
    int demand_multipath = 50;
    int demand_singlepath = 10;
    double sim_sigma_access = 0.32;
    double sim_sigma_invehicle = 0.155;
    double sim_sigma_transfer = 0.31;
    double sim_sigma_egress = 0.25;
    double sim_q1 = -0.2;
    double sim_q2 = -0.4;

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
        if (intervals < 1) fail("intervals must be >= 1");
        if (interval_minutes < 1) fail("interval_minutes must be >= 1");
        if (chains < 1) fail("chains must be >= 1");
        if (burnin < 0) fail("burnin must be >= 0");
        if (samples < 1) fail("samples must be >= 1");
        if (thin < 1) fail("thin must be >= 1");
        if (factor_reps < 1) fail("factor_reps must be >= 1");
        if (cp_rank < 1) fail("cp_rank must be >= 1");
        if (model < 1 || model > 4) fail("model must be in 1..4");
        if (!(prior_log_sigma_var > 0)) fail("prior_log_sigma_var must be positive");
        if (!(prior_q_var > 0)) fail("prior_q_var must be positive");
        if (!(gp_lengthscale > 0)) fail("gp_lengthscale must be positive");
        if (!(gp_alpha > 0)) fail("gp_alpha must be positive");
        if (!(gp_variance > 0)) fail("gp_variance must be positive");
        if (!(omega0_scale > 0)) fail("omega0_scale must be positive");
        if (!(nu0 > 1)) fail("nu0 must exceed 1");
        if (!(tau2 > 0)) fail("tau2 must be positive");
        if (m0_policy != "warmstart" && m0_policy != "flat")
            fail("m0_policy must be warmstart or flat");
        if (!(m0_flat > 0)) fail("m0_flat must be positive");
        if (!(p0_var > 0)) fail("p0_var must be positive");
        if (!(jitter_cap > 0)) fail("jitter_cap must be positive");
        if (!(slice_eps_log_sigma > 0)) fail("slice_eps_log_sigma must be positive");
        if (!(slice_eps_q > 0)) fail("slice_eps_q must be positive");
        if (slice_max_shrink < 1) fail("slice_max_shrink must be >= 1");
        if (max_malformed_fraction < 0 || max_malformed_fraction > 1)
            fail("max_malformed_fraction must be in [0,1]");
        if (split_fraction < 0 || split_fraction >= 1) fail("split_fraction must be in [0,1)");
        if (predictive_per_draw < 1) fail("predictive_per_draw must be >= 1");
        if (sim_scale != "desk" && sim_scale != "large") fail("sim_scale must be desk or large");
        if (demand_multipath < 0 || demand_singlepath < 0) fail("demand must be >= 0");
        parse_clock(interval_start);
    }

    // "HH:MM" -> minutes since midnight.
    static int parse_clock(const std::string& s) {
        int h = 0, m = 0;
        char colon = 0;
        std::istringstream ss(s);
        if (!(ss >> h >> colon >> m) || colon != ':' || h < 0 || h > 23 || m < 0 || m > 59 ||
            !ss.eof())
            throw std::invalid_argument("config: bad clock time '" + s + "' (want HH:MM)");
        return 60 * h + m;
    }

    std::map<std::string, std::string> canonical_map() const {
        auto num = [](double v) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        std::map<std::string, std::string> kv;
        kv["intervals"] = std::to_string(intervals);
        kv["interval_start"] = interval_start;
        kv["interval_minutes"] = std::to_string(interval_minutes);
        kv["seed"] = std::to_string(seed);
        kv["chains"] = std::to_string(chains);
        kv["burnin"] = std::to_string(burnin);
        kv["samples"] = std::to_string(samples);
        kv["thin"] = std::to_string(thin);
        kv["factor_reps"] = std::to_string(factor_reps);
        kv["cp_rank"] = std::to_string(cp_rank);
        kv["model"] = std::to_string(model);
        kv["prior_log_sigma_mean"] = num(prior_log_sigma_mean);
        kv["prior_log_sigma_var"] = num(prior_log_sigma_var);
        kv["prior_q_mean"] = num(prior_q_mean);
        kv["prior_q_var"] = num(prior_q_var);
        kv["gp_lengthscale"] = num(gp_lengthscale);
        kv["gp_alpha"] = num(gp_alpha);
        kv["gp_variance"] = num(gp_variance);
        kv["omega0_scale"] = num(omega0_scale);
        kv["nu0"] = num(nu0);
        kv["tau2"] = num(tau2);
        kv["m0_policy"] = m0_policy;
        kv["m0_flat"] = num(m0_flat);
        kv["p0_var"] = num(p0_var);
        kv["jitter_cap"] = num(jitter_cap);
        kv["slice_eps_log_sigma"] = num(slice_eps_log_sigma);
        kv["slice_eps_q"] = num(slice_eps_q);
        kv["slice_max_shrink"] = std::to_string(slice_max_shrink);
        kv["max_malformed_fraction"] = num(max_malformed_fraction);
        kv["split_fraction"] = num(split_fraction);
        kv["split_seed"] = std::to_string(split_seed);
        kv["ess_threshold"] = num(ess_threshold);
        kv["predictive_per_draw"] = std::to_string(predictive_per_draw);
        kv["sim_scale"] = sim_scale;
        kv["demand_multipath"] = std::to_string(demand_multipath);
        kv["demand_singlepath"] = std::to_string(demand_singlepath);
        kv["sim_sigma_access"] = num(sim_sigma_access);
        kv["sim_sigma_invehicle"] = num(sim_sigma_invehicle);
        kv["sim_sigma_transfer"] = num(sim_sigma_transfer);
        kv["sim_sigma_egress"] = num(sim_sigma_egress);
        kv["sim_q1"] = num(sim_q1);
        kv["sim_q2"] = num(sim_q2);
        return kv;
    }

    std::string canonical_text() const {
        std::string out;
        for (const auto& [k, v] : canonical_map()) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

    std::uint64_t hash() const { return fnv1a64(canonical_text()); }

    void set(const std::string& key, const std::string& value) {
        auto to_int = [&](int lo, int hi) {
            std::size_t used = 0;
            long v = std::stol(value, &used);
            if (used != value.size() || v < lo || v > hi)
                throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
            return static_cast<int>(v);
        };
        auto to_u64 = [&]() {
            std::size_t used = 0;
            unsigned long long v = std::stoull(value, &used);
            if (used != value.size())
                throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
            return static_cast<std::uint64_t>(v);
        };
        auto to_double = [&]() {
            std::size_t used = 0;
            double v = std::stod(value, &used);
            if (used != value.size())
                throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
            return v;
        };
        if (key == "intervals") intervals = to_int(1, 1 << 20);
        else if (key == "interval_start") interval_start = value;
        else if (key == "interval_minutes") interval_minutes = to_int(1, 24 * 60);
        else if (key == "seed") seed = to_u64();
        else if (key == "chains") chains = to_int(1, 64);
        else if (key == "burnin") burnin = to_int(0, 1 << 30);
        else if (key == "samples") samples = to_int(1, 1 << 30);
        else if (key == "thin") thin = to_int(1, 1 << 20);
        else if (key == "factor_reps") factor_reps = to_int(1, 1 << 20);
        else if (key == "cp_rank") cp_rank = to_int(1, 256);
        else if (key == "model") model = to_int(1, 4);
        else if (key == "prior_log_sigma_mean") prior_log_sigma_mean = to_double();
        else if (key == "prior_log_sigma_var") prior_log_sigma_var = to_double();
        else if (key == "prior_q_mean") prior_q_mean = to_double();
        else if (key == "prior_q_var") prior_q_var = to_double();
        else if (key == "gp_lengthscale") gp_lengthscale = to_double();
        else if (key == "gp_alpha") gp_alpha = to_double();
        else if (key == "gp_variance") gp_variance = to_double();
        else if (key == "omega0_scale") omega0_scale = to_double();
        else if (key == "nu0") nu0 = to_double();
        else if (key == "tau2") tau2 = to_double();
        else if (key == "m0_policy") m0_policy = value;
        else if (key == "m0_flat") m0_flat = to_double();
        else if (key == "p0_var") p0_var = to_double();
        else if (key == "jitter_cap") jitter_cap = to_double();
        else if (key == "slice_eps_log_sigma") slice_eps_log_sigma = to_double();
        else if (key == "slice_eps_q") slice_eps_q = to_double();
        else if (key == "slice_max_shrink") slice_max_shrink = to_int(1, 1 << 20);
        else if (key == "max_malformed_fraction") max_malformed_fraction = to_double();
        else if (key == "split_fraction") split_fraction = to_double();
        else if (key == "split_seed") split_seed = to_u64();
        else if (key == "ess_threshold") ess_threshold = to_double();
        else if (key == "predictive_per_draw") predictive_per_draw = to_int(1, 1 << 20);
        else if (key == "sim_scale") sim_scale = value;
        else if (key == "demand_multipath") demand_multipath = to_int(0, 1 << 20);
        else if (key == "demand_singlepath") demand_singlepath = to_int(0, 1 << 20);
        else if (key == "sim_sigma_access") sim_sigma_access = to_double();
        else if (key == "sim_sigma_invehicle") sim_sigma_invehicle = to_double();
        else if (key == "sim_sigma_transfer") sim_sigma_transfer = to_double();
        else if (key == "sim_sigma_egress") sim_sigma_egress = to_double();
        else if (key == "sim_q1") sim_q1 = to_double();
        else if (key == "sim_q2") sim_q2 = to_double();
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    static RunConfig from_stream(std::istream& in) {
        RunConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash_pos = line.find('#');
            if (hash_pos != std::string::npos) line.erase(hash_pos);
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            auto last = line.find_last_not_of(" \t\r");
            std::string body = line.substr(first, last - first + 1);
            auto eq = body.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key=value");
            std::string key = body.substr(0, eq);
            std::string value = body.substr(eq + 1);
            auto trim = [](std::string& s) {
                auto a = s.find_first_not_of(" \t");
                auto b = s.find_last_not_of(" \t");
                s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            trim(key);
            trim(value);
            if (key.empty() || value.empty())
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": empty key or value");
            cfg.set(key, value);
        }
        cfg.validate();
        return cfg;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        return from_stream(in);
    }

    NoiseScale sim_sigma() const {
        return {sim_sigma_access, sim_sigma_invehicle, sim_sigma_transfer, sim_sigma_egress};
    }
};

}  // namespace transit

#endif  // TRANSIT_CONFIG_HPP
