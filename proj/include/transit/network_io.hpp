#ifndef TRANSIT_NETWORK_IO_HPP
#define TRANSIT_NETWORK_IO_HPP

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "transit/network.hpp"

namespace transit {

// Sectioned plain-text network format, version 1:
//
//   version 1
//   [stations]
//   <id> <name> [<x> <y>]
//   [links]
//   <id> <from> <to> <line>
//   [transfers]
//   <id> <station> <from_line> <to_line>
//   [paths]                        (optional)
//   <origin> <dest> <link,link,...> <transfer,...|->
//
// '#' starts a comment; blank lines are ignored. Parse errors carry the
// 1-based line number.

namespace detail {

inline std::string strip_comment(const std::string& line) {
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] inline void parse_fail(int lineno, const std::string& msg) {
    throw std::runtime_error("network file line " + std::to_string(lineno) + ": " + msg);
}

inline int parse_int(const std::string& tok, int lineno, const char* what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        parse_fail(lineno, std::string("bad ") + what + " '" + tok + "'");
    }
}

inline double parse_double(const std::string& tok, int lineno, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        parse_fail(lineno, std::string("bad ") + what + " '" + tok + "'");
    }
}

// Comma-separated int list; "-" denotes the empty list.
inline std::vector<int> parse_int_list(const std::string& tok, int lineno, const char* what) {
    std::vector<int> out;
    if (tok == "-") return out;
    std::string cur;
    std::istringstream ss(tok);
    while (std::getline(ss, cur, ',')) out.push_back(parse_int(cur, lineno, what));
    if (out.empty()) parse_fail(lineno, std::string("empty ") + what + " list");
    return out;
}

}  // namespace detail

struct NetworkFile {
    NetworkModel network;
    // File-declared path sets, possibly empty. Keyed pairs are validated but
    // not required to cover every O-D.
    PathTable paths;
    bool has_paths = false;
};

inline NetworkFile read_network_stream(std::istream& in) {
    using namespace detail;
    std::vector<Station> stations;
    std::vector<Link> links;
    std::vector<TransferLink> transfers;
    struct RawPath {
        int origin, dest, lineno;
        Path path;
    };
    // Path lines grouped by O-D in file order.
    std::vector<RawPath> raw_paths;

    enum Section { None, Stations, Links, Transfers, Paths } section = None;
    bool saw_version = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = tokenize(strip_comment(line));
        if (toks.empty()) continue;
        if (!saw_version) {
            if (toks.size() != 2 || toks[0] != "version")
                parse_fail(lineno, "expected 'version <n>' header");
            int v = parse_int(toks[1], lineno, "version");
            if (v != 1)
                parse_fail(lineno, "unsupported network format version " + std::to_string(v));
            saw_version = true;
            continue;
        }
        if (toks.size() == 1 && toks[0].front() == '[') {
            if (toks[0] == "[stations]") section = Stations;
            else if (toks[0] == "[links]") section = Links;
            else if (toks[0] == "[transfers]") section = Transfers;
            else if (toks[0] == "[paths]") section = Paths;
            else parse_fail(lineno, "unknown section " + toks[0]);
            continue;
        }
        switch (section) {
            case None:
                parse_fail(lineno, "data before any section header");
            case Stations: {
                if (toks.size() != 2 && toks.size() != 4)
                    parse_fail(lineno, "station needs 'id name' or 'id name x y'");
                Station st;
                st.id = parse_int(toks[0], lineno, "station id");
                st.name = toks[1];
                if (toks.size() == 4) {
                    st.x = parse_double(toks[2], lineno, "station x");
                    st.y = parse_double(toks[3], lineno, "station y");
                    st.has_coords = true;
                }
                stations.push_back(std::move(st));
                break;
            }
            case Links: {
                if (toks.size() != 4) parse_fail(lineno, "link needs 'id from to line'");
                Link lk;
                lk.id = parse_int(toks[0], lineno, "link id");
                lk.from = parse_int(toks[1], lineno, "link from");
                lk.to = parse_int(toks[2], lineno, "link to");
                lk.line = parse_int(toks[3], lineno, "link line");
                links.push_back(lk);
                break;
            }
            case Transfers: {
                if (toks.size() != 4)
                    parse_fail(lineno, "transfer needs 'id station from_line to_line'");
                TransferLink tr;
                tr.id = parse_int(toks[0], lineno, "transfer id");
                tr.station = parse_int(toks[1], lineno, "transfer station");
                tr.from_line = parse_int(toks[2], lineno, "transfer from_line");
                tr.to_line = parse_int(toks[3], lineno, "transfer to_line");
                transfers.push_back(tr);
                break;
            }
            case Paths: {
                if (toks.size() != 4)
                    parse_fail(lineno, "path needs 'origin dest links transfers'");
                RawPath rp;
                rp.origin = parse_int(toks[0], lineno, "path origin");
                rp.dest = parse_int(toks[1], lineno, "path dest");
                rp.lineno = lineno;
                rp.path.links = parse_int_list(toks[2], lineno, "path link");
                rp.path.transfers = parse_int_list(toks[3], lineno, "path transfer");
                raw_paths.push_back(std::move(rp));
                break;
            }
        }
    }
    if (!saw_version) throw std::runtime_error("network file: empty or missing version header");

    NetworkFile out;
    out.network = NetworkModel::build(std::move(stations), std::move(links), std::move(transfers));

    if (!raw_paths.empty()) {
        out.has_paths = true;
        // Group consecutive-or-not lines by O-D, preserving first-seen order
        // of pairs and file order of paths within a pair.
        std::vector<std::pair<int, int>> order;
        std::map<std::pair<int, int>, std::vector<Path>> grouped;
        for (RawPath& rp : raw_paths) {
            auto key = std::make_pair(rp.origin, rp.dest);
            if (!grouped.count(key)) order.push_back(key);
            try {
                validate_path(out.network, rp.origin, rp.dest, rp.path);
            } catch (const std::exception& e) {
                detail::parse_fail(rp.lineno, e.what());
            }
            grouped[key].push_back(std::move(rp.path));
        }
        for (auto& key : order)
            out.paths.add(make_path_set(out.network, key.first, key.second,
                                        std::move(grouped[key])));
    }
    return out;
}

inline NetworkFile read_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    return read_network_stream(in);
}

inline void write_network_stream(std::ostream& os, const NetworkModel& net,
                                 const PathTable* paths = nullptr) {
    os << "version 1\n";
    os << "[stations]\n";
    for (const Station& st : net.stations()) {
        os << st.id << ' ' << st.name;
        if (st.has_coords)
            os << ' ' << std::setprecision(17) << st.x << ' ' << st.y;
        os << '\n';
    }
    os << "[links]\n";
    for (const Link& lk : net.links())
        os << lk.id << ' ' << lk.from << ' ' << lk.to << ' ' << lk.line << '\n';
    os << "[transfers]\n";
    for (const TransferLink& tr : net.transfers())
        os << tr.id << ' ' << tr.station << ' ' << tr.from_line << ' ' << tr.to_line << '\n';
    if (paths && paths->size() > 0) {
        os << "[paths]\n";
        for (int i = 0; i < paths->size(); ++i) {
            const PathSet& ps = paths->set(i);
            for (const Path& p : ps.paths) {
                os << ps.origin << ' ' << ps.destination << ' ';
                for (std::size_t j = 0; j < p.links.size(); ++j)
                    os << (j ? "," : "") << p.links[j];
                os << ' ';
                if (p.transfers.empty()) {
                    os << '-';
                } else {
                    for (std::size_t j = 0; j < p.transfers.size(); ++j)
                        os << (j ? "," : "") << p.transfers[j];
                }
                os << '\n';
            }
        }
    }
}

inline void write_network_file(const std::string& path, const NetworkModel& net,
                               const PathTable* paths = nullptr) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write network file: " + path);
    write_network_stream(os, net, paths);
}

}  // namespace transit

#endif  // TRANSIT_NETWORK_IO_HPP
