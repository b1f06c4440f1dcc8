#ifndef TRANSIT_NETWORK_HPP
#define TRANSIT_NETWORK_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace transit {

// The four cost blocks, in the canonical layout order of the cost vector:
// access (one per directed in-vehicle link), in-vehicle (one per link),
// transfer (one per transfer link), egress (one per station).
enum class CostKind { Access = 0, InVehicle = 1, Transfer = 2, Egress = 3 };

inline const char* cost_kind_name(CostKind k) {
    switch (k) {
        case CostKind::Access: return "access";
        case CostKind::InVehicle: return "invehicle";
        case CostKind::Transfer: return "transfer";
        case CostKind::Egress: return "egress";
    }
    return "?";
}

struct Station {
    int id = -1;
    std::string name;
    double x = 0.0, y = 0.0;
    bool has_coords = false;
};

// Directed in-vehicle link. Bidirectional track segments are represented as
// two links, one per direction, so access costs stay direction-specific.
struct Link {
    int id = -1;
    int from = -1;
    int to = -1;
    int line = 0;
};

// Directed transfer at a station from one line to another.
struct TransferLink {
    int id = -1;
    int station = -1;
    int from_line = 0;
    int to_line = 0;
};

class NetworkModel {
public:
    NetworkModel() = default;

    // Validates station/link/transfer lists and assembles the cost-vector
    // index layout and the station adjacency matrix.
    static NetworkModel build(std::vector<Station> stations, std::vector<Link> links,
                              std::vector<TransferLink> transfers) {
        NetworkModel net;
        net.stations_ = std::move(stations);
        net.links_ = std::move(links);
        net.transfers_ = std::move(transfers);

        const int n = static_cast<int>(net.stations_.size());
        const int l = static_cast<int>(net.links_.size());
        const int s = static_cast<int>(net.transfers_.size());
        if (n == 0) throw std::invalid_argument("network: no stations");

        require_dense_ids(net.stations_, "station", [](const Station& st) { return st.id; });
        require_dense_ids(net.links_, "link", [](const Link& lk) { return lk.id; });
        require_dense_ids(net.transfers_, "transfer", [](const TransferLink& tr) { return tr.id; });

        for (const Link& lk : net.links_) {
            if (lk.from < 0 || lk.from >= n || lk.to < 0 || lk.to >= n)
                throw std::invalid_argument("link " + std::to_string(lk.id) +
                                            ": endpoint references unknown station");
            if (lk.from == lk.to)
                throw std::invalid_argument("link " + std::to_string(lk.id) + ": self-loop");
        }
        for (const TransferLink& tr : net.transfers_) {
            if (tr.station < 0 || tr.station >= n)
                throw std::invalid_argument("transfer " + std::to_string(tr.id) +
                                            ": unknown station");
            if (tr.from_line == tr.to_line)
                throw std::invalid_argument("transfer " + std::to_string(tr.id) +
                                            ": from-line equals to-line");
        }

        net.adjacency_ = Eigen::MatrixXd::Zero(n, n);
        for (const Link& lk : net.links_) {
            net.adjacency_(lk.from, lk.to) = 1.0;
            net.adjacency_(lk.to, lk.from) = 1.0;
        }

        net.n_ = n;
        net.l_ = l;
        net.s_ = s;
        net.c_ = 2 * l + s + n;

        net.links_by_station_.assign(n, {});
        for (const Link& lk : net.links_) net.links_by_station_[lk.from].push_back(lk.id);
        for (auto& v : net.links_by_station_) std::sort(v.begin(), v.end());

        for (const TransferLink& tr : net.transfers_) {
            net.transfer_index_[{tr.station, {tr.from_line, tr.to_line}}] = tr.id;
        }
        return net;
    }

    int station_count() const { return n_; }
    int link_count() const { return l_; }
    int transfer_count() const { return s_; }
    int cost_dim() const { return c_; }

    const std::vector<Station>& stations() const { return stations_; }
    const std::vector<Link>& links() const { return links_; }
    const std::vector<TransferLink>& transfers() const { return transfers_; }
    const Eigen::MatrixXd& adjacency() const { return adjacency_; }

    const Link& link(int id) const { return links_.at(static_cast<std::size_t>(id)); }

    // (kind, element-id) -> position in [0, c)
    int attr_index(CostKind kind, int id) const {
        switch (kind) {
            case CostKind::Access:
                check_range(id, l_, "access");
                return id;
            case CostKind::InVehicle:
                check_range(id, l_, "invehicle");
                return l_ + id;
            case CostKind::Transfer:
                check_range(id, s_, "transfer");
                return 2 * l_ + id;
            case CostKind::Egress:
                check_range(id, n_, "egress");
                return 2 * l_ + s_ + id;
        }
        throw std::invalid_argument("attr_index: bad kind");
    }

    // position -> (kind, element-id); inverse of attr_index.
    std::pair<CostKind, int> attr_of(int pos) const {
        if (pos < 0 || pos >= c_) throw std::invalid_argument("attr_of: position out of range");
        if (pos < l_) return {CostKind::Access, pos};
        if (pos < 2 * l_) return {CostKind::InVehicle, pos - l_};
        if (pos < 2 * l_ + s_) return {CostKind::Transfer, pos - 2 * l_};
        return {CostKind::Egress, pos - 2 * l_ - s_};
    }

    // Links departing a station (sorted by id).
    const std::vector<int>& links_from(int station) const {
        return links_by_station_.at(static_cast<std::size_t>(station));
    }

    // Transfer link id at (station, from_line -> to_line), if one exists.
    std::optional<int> transfer_at(int station, int from_line, int to_line) const {
        auto it = transfer_index_.find({station, {from_line, to_line}});
        if (it == transfer_index_.end()) return std::nullopt;
        return it->second;
    }

private:
    template <typename T, typename GetId>
    static void require_dense_ids(const std::vector<T>& items, const char* what, GetId get_id) {
        std::set<int> seen;
        for (const T& item : items) {
            int id = get_id(item);
            if (id < 0 || id >= static_cast<int>(items.size()))
                throw std::invalid_argument(std::string(what) + " ids must be 0.." +
                                            std::to_string(items.size() - 1) + ", got " +
                                            std::to_string(id));
            if (!seen.insert(id).second)
                throw std::invalid_argument(std::string("duplicate ") + what + " id " +
                                            std::to_string(id));
        }
    }

    static void check_range(int id, int count, const char* what) {
        if (id < 0 || id >= count)
            throw std::invalid_argument(std::string(what) + " id " + std::to_string(id) +
                                        " out of range");
    }

    std::vector<Station> stations_;
    std::vector<Link> links_;
    std::vector<TransferLink> transfers_;
    Eigen::MatrixXd adjacency_;
    std::vector<std::vector<int>> links_by_station_;
    std::map<std::pair<int, std::pair<int, int>>, int> transfer_index_;
    int n_ = 0, l_ = 0, s_ = 0, c_ = 0;
};

// One feasible path: the ordered in-vehicle links plus the transfer links
// consumed at line changes. Access is implied by the first link, egress by
// the destination station.
struct Path {
    std::vector<int> links;
    std::vector<int> transfers;
};

// Path mapped into cost-vector positions.
struct PathAttrs {
    int access = -1;
    std::vector<int> invehicle;
    std::vector<int> transfer;
    int egress = -1;
    std::vector<int> cols;  // sorted union; the support of the routing row
};

// Sparse 0/1 routing-matrix row: the sorted column indices of its ones.
struct SparseRow {
    std::vector<int> cols;

    double dot(const Eigen::VectorXd& x) const {
        double acc = 0.0;
        for (int c : cols) acc += x(c);
        return acc;
    }
    int ones() const { return static_cast<int>(cols.size()); }
};

// Validates a path against the network: endpoints, link continuity, and
// that every line change is covered by exactly the listed transfer links.
// Applied identically to file-loaded and enumerated paths.
inline void validate_path(const NetworkModel& net, int origin, int destination,
                          const Path& path) {
    if (path.links.empty()) throw std::invalid_argument("path: no in-vehicle links");
    const auto& links = net.links();
    for (int id : path.links)
        if (id < 0 || id >= net.link_count())
            throw std::invalid_argument("path: unknown link id " + std::to_string(id));
    for (int id : path.transfers)
        if (id < 0 || id >= net.transfer_count())
            throw std::invalid_argument("path: unknown transfer id " + std::to_string(id));

    if (links[path.links.front()].from != origin)
        throw std::invalid_argument("path: first link does not start at origin");
    if (links[path.links.back()].to != destination)
        throw std::invalid_argument("path: last link does not end at destination");

    // Loop-free: the visited station sequence has no repeats.
    std::set<int> visited;
    visited.insert(origin);
    for (int id : path.links) {
        if (!visited.insert(links[id].to).second)
            throw std::invalid_argument("path: revisits station " +
                                        std::to_string(links[id].to));
    }

    std::size_t tpos = 0;
    for (std::size_t i = 0; i + 1 < path.links.size(); ++i) {
        const Link& a = links[path.links[i]];
        const Link& b = links[path.links[i + 1]];
        if (a.to != b.from)
            throw std::invalid_argument("path: links " + std::to_string(a.id) + " and " +
                                        std::to_string(b.id) + " do not share a station");
        if (a.line != b.line) {
            if (tpos >= path.transfers.size())
                throw std::invalid_argument("path: line change at station " +
                                            std::to_string(a.to) + " has no transfer link");
            const TransferLink& tr = net.transfers()[path.transfers[tpos]];
            if (tr.station != a.to || tr.from_line != a.line || tr.to_line != b.line)
                throw std::invalid_argument("path: transfer " + std::to_string(tr.id) +
                                            " does not match line change at station " +
                                            std::to_string(a.to));
            ++tpos;
        }
    }
    if (tpos != path.transfers.size())
        throw std::invalid_argument("path: extra transfer links beyond line changes");
}

inline PathAttrs path_attrs(const NetworkModel& net, int destination, const Path& path) {
    PathAttrs a;
    a.access = net.attr_index(CostKind::Access, path.links.front());
    for (int id : path.links) a.invehicle.push_back(net.attr_index(CostKind::InVehicle, id));
    for (int id : path.transfers) a.transfer.push_back(net.attr_index(CostKind::Transfer, id));
    a.egress = net.attr_index(CostKind::Egress, destination);
    a.cols.push_back(a.access);
    a.cols.insert(a.cols.end(), a.invehicle.begin(), a.invehicle.end());
    a.cols.insert(a.cols.end(), a.transfer.begin(), a.transfer.end());
    a.cols.push_back(a.egress);
    std::sort(a.cols.begin(), a.cols.end());
    return a;
}

inline SparseRow routing_row(const NetworkModel& net, int origin, int destination,
                             const Path& path) {
    validate_path(net, origin, destination, path);
    return SparseRow{path_attrs(net, destination, path).cols};
}

// The feasible paths of one O-D pair, with their precomputed attribute views.
struct PathSet {
    int origin = -1;
    int destination = -1;
    std::vector<Path> paths;
    std::vector<PathAttrs> attrs;
    std::vector<SparseRow> rows;

    bool choice_relevant() const { return paths.size() > 1; }
    int path_count() const { return static_cast<int>(paths.size()); }
};

inline PathSet make_path_set(const NetworkModel& net, int origin, int destination,
                             std::vector<Path> paths) {
    if (origin == destination)
        throw std::invalid_argument("path set: origin equals destination");
    if (paths.empty()) throw std::invalid_argument("path set: empty");
    PathSet ps;
    ps.origin = origin;
    ps.destination = destination;
    for (Path& p : paths) {
        validate_path(net, origin, destination, p);
        ps.attrs.push_back(path_attrs(net, destination, p));
        ps.rows.push_back(SparseRow{ps.attrs.back().cols});
        ps.paths.push_back(std::move(p));
    }
    return ps;
}

// All O-D path sets of a run, indexed by (origin, destination).
class PathTable {
public:
    void add(PathSet ps) {
        auto key = std::make_pair(ps.origin, ps.destination);
        if (index_.count(key))
            throw std::invalid_argument("duplicate path set for O-D (" +
                                        std::to_string(ps.origin) + "," +
                                        std::to_string(ps.destination) + ")");
        index_[key] = static_cast<int>(sets_.size());
        sets_.push_back(std::move(ps));
    }

    int size() const { return static_cast<int>(sets_.size()); }
    const PathSet& set(int i) const { return sets_.at(static_cast<std::size_t>(i)); }

    const PathSet* find(int origin, int destination) const {
        auto it = index_.find({origin, destination});
        return it == index_.end() ? nullptr : &sets_[static_cast<std::size_t>(it->second)];
    }
    int find_index(int origin, int destination) const {
        auto it = index_.find({origin, destination});
        return it == index_.end() ? -1 : it->second;
    }

    // Indices of choice-relevant sets (|R_od| > 1).
    std::vector<int> multipath_sets() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (sets_[static_cast<std::size_t>(i)].choice_relevant()) out.push_back(i);
        return out;
    }

private:
    std::vector<PathSet> sets_;
    std::map<std::pair<int, int>, int> index_;
};

// Loop-free path enumeration by depth-first search over the line-aware
// graph. Paths are ordered by hop count (links + transfers) with ties broken
// by the lexicographic link-id sequence, truncated at k_max and at
// detour_cap times the shortest hop count.
inline PathSet enumerate_paths(const NetworkModel& net, int origin, int destination,
                               int k_max = 5, double detour_cap = 1.5) {
    if (origin < 0 || origin >= net.station_count() || destination < 0 ||
        destination >= net.station_count())
        throw std::invalid_argument("enumerate_paths: unknown station");
    if (origin == destination) throw std::invalid_argument("enumerate_paths: origin == destination");
    if (k_max < 1) throw std::invalid_argument("enumerate_paths: k_max must be >= 1");

    std::vector<Path> found;
    std::vector<int> link_stack, transfer_stack;
    std::vector<char> visited(static_cast<std::size_t>(net.station_count()), 0);
    visited[static_cast<std::size_t>(origin)] = 1;

    // Hard cap on search depth keeps degenerate inputs bounded.
    const int max_links = net.station_count();

    auto dfs = [&](auto&& self, int station, int line) -> void {
        if (station == destination) {
            found.push_back(Path{link_stack, transfer_stack});
            return;
        }
        if (static_cast<int>(link_stack.size()) >= max_links) return;
        for (int lid : net.links_from(station)) {
            const Link& lk = net.link(lid);
            if (visited[static_cast<std::size_t>(lk.to)]) continue;
            bool needs_transfer = !link_stack.empty() && lk.line != line;
            std::optional<int> tid;
            if (needs_transfer) {
                tid = net.transfer_at(station, line, lk.line);
                if (!tid) continue;  // no transfer link: move infeasible
            }
            visited[static_cast<std::size_t>(lk.to)] = 1;
            link_stack.push_back(lid);
            if (tid) transfer_stack.push_back(*tid);
            self(self, lk.to, lk.line);
            if (tid) transfer_stack.pop_back();
            link_stack.pop_back();
            visited[static_cast<std::size_t>(lk.to)] = 0;
        }
    };
    dfs(dfs, origin, -1);

    if (found.empty())
        throw std::runtime_error("enumerate_paths: O-D (" + std::to_string(origin) + "," +
                                 std::to_string(destination) + ") is disconnected");

    auto hops = [](const Path& p) { return p.links.size() + p.transfers.size(); };
    std::sort(found.begin(), found.end(), [&](const Path& a, const Path& b) {
        if (hops(a) != hops(b)) return hops(a) < hops(b);
        return a.links < b.links;
    });
    const double shortest = static_cast<double>(hops(found.front()));
    std::vector<Path> kept;
    for (Path& p : found) {
        if (static_cast<int>(kept.size()) >= k_max) break;
        if (static_cast<double>(hops(p)) > detour_cap * shortest + 1e-12) break;
        kept.push_back(std::move(p));
    }
    return make_path_set(net, origin, destination, std::move(kept));
}

}  // namespace transit

#endif  // TRANSIT_NETWORK_HPP
