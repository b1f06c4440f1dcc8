#ifndef TRANSIT_STORE_HPP
#define TRANSIT_STORE_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "transit/config.hpp"
#include "transit/gibbs.hpp"
#include "transit/network_io.hpp"

namespace transit {

// Posterior draws are persisted as a directory of columnar CSVs plus a
// manifest. The manifest records the schema, the configuration (canonical
// text and hash), hashes of the network and input data, the dimensions, and
// a content hash per file. Nothing time- or host-dependent is written, so
// identical runs produce byte-identical stores.

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

// Hash of the network plus the effective path table, via the canonical
// serialization.
inline std::uint64_t network_hash(const NetworkModel& net, const PathTable& paths) {
    std::ostringstream ss;
    write_network_stream(ss, net, &paths);
    return fnv1a64(ss.str());
}

struct StoreMeta {
    RunConfig config;
    std::string config_hash;   // hex
    std::string network_hash;  // hex
    std::string data_hash;     // hex
};

namespace detail {

inline void write_text_file(const std::string& path, const std::string& content,
                            std::map<std::string, std::string>& hashes,
                            const std::string& name) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
    os.close();
    hashes[name] = hex64(fnv1a64(content));
}

inline std::vector<std::string> read_lines_checked(const std::filesystem::path& dir,
                                                   const std::string& name,
                                                   const std::string& expect_hash) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw std::runtime_error("posterior store: missing file " + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string content = ss.str();
    if (hex64(fnv1a64(content)) != expect_hash)
        throw std::runtime_error("posterior store: content hash mismatch for " + name);
    std::vector<std::string> lines;
    std::istringstream ls(content);
    std::string line;
    while (std::getline(ls, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

}  // namespace detail

inline void write_store(const std::string& dir, const StoreMeta& meta,
                        const PosteriorDraws& draws) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::map<std::string, std::string> hashes;
    const int D = draws.draws();

    {
        std::string s = "draw,chain,iter\n";
        for (int j = 0; j < D; ++j)
            s += std::to_string(j) + ',' + std::to_string(draws.chain[static_cast<std::size_t>(j)]) +
                 ',' + std::to_string(draws.iter[static_cast<std::size_t>(j)]) + '\n';
        detail::write_text_file(dir + "/draws.csv", s, hashes, "draws.csv");
    }
    {
        std::string s = "draw,access,invehicle,transfer,egress\n";
        for (int j = 0; j < D; ++j) {
            const NoiseScale& g = draws.sigma[static_cast<std::size_t>(j)];
            s += std::to_string(j) + ',' + format_g17(g.access) + ',' + format_g17(g.invehicle) +
                 ',' + format_g17(g.transfer) + ',' + format_g17(g.egress) + '\n';
        }
        detail::write_text_file(dir + "/sigma.csv", s, hashes, "sigma.csv");
    }
    {
        std::string s = "draw,q1,q2\n";
        for (int j = 0; j < D; ++j)
            s += std::to_string(j) + ',' + format_g17(draws.q1[static_cast<std::size_t>(j)]) +
                 ',' + format_g17(draws.q2[static_cast<std::size_t>(j)]) + '\n';
        detail::write_text_file(dir + "/q.csv", s, hashes, "q.csv");
    }
    {
        std::string s = "draw,k11,k12,k22\n";
        for (int j = 0; j < D; ++j) {
            const Eigen::MatrixXd& k = draws.Ku[static_cast<std::size_t>(j)];
            s += std::to_string(j) + ',' + format_g17(k(0, 0)) + ',' + format_g17(k(0, 1)) + ',' +
                 format_g17(k(1, 1)) + '\n';
        }
        detail::write_text_file(dir + "/ku.csv", s, hashes, "ku.csv");
    }
    {
        std::string s = "draw,factor,row,col,value\n";
        for (int j = 0; j < D; ++j) {
            auto dump = [&](const char* name, const Eigen::MatrixXd& m) {
                for (int r = 0; r < m.rows(); ++r)
                    for (int col = 0; col < m.cols(); ++col)
                        s += std::to_string(j) + ',' + name + ',' + std::to_string(r) + ',' +
                             std::to_string(col) + ',' + format_g17(m(r, col)) + '\n';
            };
            dump("U", draws.U[static_cast<std::size_t>(j)]);
            dump("V", draws.V[static_cast<std::size_t>(j)]);
            dump("W", draws.W[static_cast<std::size_t>(j)]);
        }
        detail::write_text_file(dir + "/factors.csv", s, hashes, "factors.csv");
    }
    {
        std::string s = "draw,interval,attr,value\n";
        for (int j = 0; j < D; ++j) {
            const Eigen::MatrixXd& x = draws.x[static_cast<std::size_t>(j)];
            for (int t = 0; t < x.rows(); ++t)
                for (int a = 0; a < x.cols(); ++a)
                    s += std::to_string(j) + ',' + std::to_string(t) + ',' + std::to_string(a) +
                         ',' + format_g17(x(t, a)) + '\n';
        }
        detail::write_text_file(dir + "/x.csv", s, hashes, "x.csv");
    }
    {
        // Choice counts of the multipath cells; single-path cells are
        // implied by the data and carry no sampling variability.
        std::string s = "draw,origin,destination,interval,path,count\n";
        for (int j = 0; j < D; ++j)
            for (std::size_t ci = 0; ci < draws.zcells.size(); ++ci) {
                const CellKey& key = draws.zcells[ci];
                const auto& counts = draws.zcounts[static_cast<std::size_t>(j)][ci];
                for (std::size_t k = 0; k < counts.size(); ++k)
                    s += std::to_string(j) + ',' + std::to_string(key.origin) + ',' +
                         std::to_string(key.destination) + ',' + std::to_string(key.t) + ',' +
                         std::to_string(k) + ',' + std::to_string(counts[k]) + '\n';
            }
        detail::write_text_file(dir + "/zcounts.csv", s, hashes, "zcounts.csv");
    }

    nlohmann::json manifest;
    manifest["schema"] = "posterior/1";
    manifest["config_hash"] = meta.config_hash;
    manifest["network_hash"] = meta.network_hash;
    manifest["data_hash"] = meta.data_hash;
    manifest["config_text"] = meta.config.canonical_text();
    manifest["dims"] = {{"T", draws.T}, {"c", draws.c}, {"n", draws.n},
                        {"R", draws.R}, {"draws", D}};
    manifest["files"] = hashes;
    std::ofstream os(dir + "/manifest.json", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    os << manifest.dump(2) << '\n';
}

struct StoredRun {
    StoreMeta meta;
    PosteriorDraws draws;
};

inline StoredRun read_store(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in) throw std::runtime_error("posterior store: missing manifest.json in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.at("schema").get<std::string>() != "posterior/1")
        throw std::runtime_error("posterior store: unsupported schema " +
                                 manifest.at("schema").get<std::string>());

    StoredRun run;
    run.meta.config_hash = manifest.at("config_hash").get<std::string>();
    run.meta.network_hash = manifest.at("network_hash").get<std::string>();
    run.meta.data_hash = manifest.at("data_hash").get<std::string>();
    {
        std::istringstream cfg_in(manifest.at("config_text").get<std::string>());
        run.meta.config = RunConfig::from_stream(cfg_in);
    }
    PosteriorDraws& d = run.draws;
    d.T = manifest.at("dims").at("T").get<int>();
    d.c = manifest.at("dims").at("c").get<int>();
    d.n = manifest.at("dims").at("n").get<int>();
    d.R = manifest.at("dims").at("R").get<int>();
    const int D = manifest.at("dims").at("draws").get<int>();
    const auto& files = manifest.at("files");
    auto lines_of = [&](const std::string& name) {
        return detail::read_lines_checked(root, name, files.at(name).get<std::string>());
    };

    auto expect_draw = [&](const std::string& tok, const std::string& file) {
        int j = std::stoi(tok);
        if (j < 0 || j >= D)
            throw std::runtime_error("posterior store: draw index out of range in " + file);
        return j;
    };

    {
        auto lines = lines_of("draws.csv");
        d.chain.resize(static_cast<std::size_t>(D));
        d.iter.resize(static_cast<std::size_t>(D));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "draws.csv");
            d.chain[static_cast<std::size_t>(j)] = std::stoi(f.at(1));
            d.iter[static_cast<std::size_t>(j)] = std::stoi(f.at(2));
        }
    }
    {
        auto lines = lines_of("sigma.csv");
        d.sigma.resize(static_cast<std::size_t>(D));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "sigma.csv");
            d.sigma[static_cast<std::size_t>(j)] = {std::stod(f.at(1)), std::stod(f.at(2)),
                                                    std::stod(f.at(3)), std::stod(f.at(4))};
        }
    }
    {
        auto lines = lines_of("q.csv");
        d.q1.resize(static_cast<std::size_t>(D));
        d.q2.resize(static_cast<std::size_t>(D));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "q.csv");
            d.q1[static_cast<std::size_t>(j)] = std::stod(f.at(1));
            d.q2[static_cast<std::size_t>(j)] = std::stod(f.at(2));
        }
    }
    {
        auto lines = lines_of("ku.csv");
        d.Ku.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(2, 2));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "ku.csv");
            auto& k = d.Ku[static_cast<std::size_t>(j)];
            k(0, 0) = std::stod(f.at(1));
            k(0, 1) = k(1, 0) = std::stod(f.at(2));
            k(1, 1) = std::stod(f.at(3));
        }
    }
    {
        auto lines = lines_of("factors.csv");
        d.U.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(2, d.R));
        d.V.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(d.n, d.R));
        d.W.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(d.T, d.R));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "factors.csv");
            Eigen::MatrixXd* m = nullptr;
            if (f.at(1) == "U") m = &d.U[static_cast<std::size_t>(j)];
            else if (f.at(1) == "V") m = &d.V[static_cast<std::size_t>(j)];
            else if (f.at(1) == "W") m = &d.W[static_cast<std::size_t>(j)];
            else throw std::runtime_error("posterior store: unknown factor " + f.at(1));
            (*m)(std::stoi(f.at(2)), std::stoi(f.at(3))) = std::stod(f.at(4));
        }
    }
    {
        auto lines = lines_of("x.csv");
        d.x.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(d.T, d.c));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "x.csv");
            d.x[static_cast<std::size_t>(j)](std::stoi(f.at(1)), std::stoi(f.at(2))) =
                std::stod(f.at(3));
        }
    }
    {
        auto lines = lines_of("zcounts.csv");
        std::map<std::tuple<int, int, int>, int> cell_index;
        std::vector<std::map<int, int>> max_path;  // per cell: path -> seen
        // First pass over draw 0 rows assembles the cell list in file order.
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            if (std::stoi(f.at(0)) != 0) break;
            auto key = std::make_tuple(std::stoi(f.at(1)), std::stoi(f.at(2)), std::stoi(f.at(3)));
            if (!cell_index.count(key)) {
                cell_index[key] = static_cast<int>(d.zcells.size());
                d.zcells.push_back(
                    {std::get<0>(key), std::get<1>(key), std::get<2>(key), 0});
            }
            auto& cell = d.zcells[static_cast<std::size_t>(cell_index[key])];
            cell.paths = std::max(cell.paths, std::stoi(f.at(4)) + 1);
        }
        d.zcounts.assign(static_cast<std::size_t>(D), {});
        for (auto& per_draw : d.zcounts) {
            per_draw.resize(d.zcells.size());
            for (std::size_t ci = 0; ci < d.zcells.size(); ++ci)
                per_draw[ci].assign(static_cast<std::size_t>(d.zcells[ci].paths), 0);
        }
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto f = detail::split_fields(lines[i]);
            int j = expect_draw(f.at(0), "zcounts.csv");
            auto key = std::make_tuple(std::stoi(f.at(1)), std::stoi(f.at(2)), std::stoi(f.at(3)));
            auto it = cell_index.find(key);
            if (it == cell_index.end())
                throw std::runtime_error("posterior store: zcounts cell absent from draw 0");
            d.zcounts[static_cast<std::size_t>(j)][static_cast<std::size_t>(it->second)]
                     [static_cast<std::size_t>(std::stoi(f.at(4)))] = std::stoi(f.at(5));
        }
    }
    return run;
}

}  // namespace transit

#endif  // TRANSIT_STORE_HPP
