#ifndef TRANSIT_DATA_HPP
#define TRANSIT_DATA_HPP

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "transit/network.hpp"

namespace transit {

// One tap-in/tap-out record: total gate-to-gate travel time in seconds,
// stamped to a departure interval (0-based).
struct TripObservation {
    int origin = -1;
    int destination = -1;
    int t = -1;
    double y = 0.0;
};

// All trips of one (O-D, interval) cell.
struct Cell {
    int set_index = -1;  // index into the PathTable
    int origin = -1;
    int destination = -1;
    int t = -1;
    std::vector<double> y;

    int trip_count() const { return static_cast<int>(y.size()); }
};

// Trips grouped by (origin, destination, interval) against a fixed path
// table. Cells are ordered by (set_index, t); multipath_cells lists the
// cells whose O-D has more than one feasible path.
class TripDataset {
public:
    static TripDataset build(const PathTable& table, const std::vector<TripObservation>& trips,
                             int intervals) {
        TripDataset ds;
        ds.intervals_ = intervals;
        std::map<std::pair<int, int>, std::vector<double>> grouped;  // (set, t) -> times
        for (const TripObservation& tr : trips) {
            if (tr.t < 0 || tr.t >= intervals)
                throw std::invalid_argument("trip interval " + std::to_string(tr.t) +
                                            " outside 0.." + std::to_string(intervals - 1));
            if (!(tr.y > 0.0))
                throw std::invalid_argument("trip travel time must be positive");
            int si = table.find_index(tr.origin, tr.destination);
            if (si < 0)
                throw std::invalid_argument("no path set for O-D (" + std::to_string(tr.origin) +
                                            "," + std::to_string(tr.destination) + ")");
            grouped[{si, tr.t}].push_back(tr.y);
        }
        // Cells are ordered by (path set, interval); trips keep input order
        // within their cell.
        for (auto& [key, times] : grouped) {
            Cell cell;
            cell.set_index = key.first;
            cell.t = key.second;
            const PathSet& ps = table.set(cell.set_index);
            cell.origin = ps.origin;
            cell.destination = ps.destination;
            cell.y = std::move(times);
            if (ps.choice_relevant())
                ds.multipath_cells_.push_back(static_cast<int>(ds.cells_.size()));
            ds.cells_.push_back(std::move(cell));
        }
        ds.cells_by_t_.assign(static_cast<std::size_t>(intervals), {});
        for (int i = 0; i < static_cast<int>(ds.cells_.size()); ++i)
            ds.cells_by_t_[static_cast<std::size_t>(ds.cells_[static_cast<std::size_t>(i)].t)]
                .push_back(i);
        for (const Cell& c : ds.cells_) ds.trip_count_ += c.trip_count();
        return ds;
    }

    int intervals() const { return intervals_; }
    int trip_count() const { return trip_count_; }
    int cell_count() const { return static_cast<int>(cells_.size()); }
    const Cell& cell(int i) const { return cells_.at(static_cast<std::size_t>(i)); }
    const std::vector<Cell>& cells() const { return cells_; }

    // Cell indices observed in interval t.
    const std::vector<int>& cells_at(int t) const {
        return cells_by_t_.at(static_cast<std::size_t>(t));
    }

    // Cells whose O-D admits several paths; the choice-model likelihood runs
    // over exactly these.
    const std::vector<int>& multipath_cells() const { return multipath_cells_; }

    std::vector<TripObservation> to_trips() const {
        std::vector<TripObservation> out;
        out.reserve(static_cast<std::size_t>(trip_count_));
        for (const Cell& c : cells_)
            for (double y : c.y) out.push_back({c.origin, c.destination, c.t, y});
        return out;
    }

private:
    std::vector<Cell> cells_;
    std::vector<std::vector<int>> cells_by_t_;
    std::vector<int> multipath_cells_;
    int intervals_ = 0;
    int trip_count_ = 0;
};

}  // namespace transit

#endif  // TRANSIT_DATA_HPP
