#ifndef TRANSIT_TRIPS_IO_HPP
#define TRANSIT_TRIPS_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "transit/data.hpp"

namespace transit {

// Trip CSV, schema "trips/1":
//
//   # schema: trips/1
//   origin_id,destination_id,interval,travel_time_s
//   3,7,1,1023.5
//
// Intervals are 1-based in the file, 0-based in memory. Malformed rows are
// collected with their row number and offending rule; the load aborts when
// the malformed fraction exceeds the configured bound.

struct MalformedRow {
    int row = 0;  // 1-based physical line number
    std::string rule;
    std::string text;
};

struct TripLoadResult {
    std::vector<TripObservation> trips;
    std::vector<MalformedRow> malformed;
    int total_rows = 0;  // data rows seen, valid or not
};

namespace detail {

inline bool parse_field_int(const std::string& tok, int& out) {
    try {
        std::size_t used = 0;
        out = std::stoi(tok, &used);
        return used == tok.size() && !tok.empty();
    } catch (const std::exception&) {
        return false;
    }
}

inline bool parse_field_double(const std::string& tok, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(tok, &used);
        return used == tok.size() && !tok.empty();
    } catch (const std::exception&) {
        return false;
    }
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

inline TripLoadResult read_trips_stream(std::istream& in, int intervals,
                                        double max_malformed_fraction = 0.001) {
    TripLoadResult res;
    std::string line;
    int lineno = 0;
    bool saw_schema = false, saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("schema:");
            if (pos != std::string::npos) {
                std::string schema = line.substr(pos + 7);
                schema.erase(0, schema.find_first_not_of(" \t"));
                schema.erase(schema.find_last_not_of(" \t") + 1);
                if (schema != "trips/1")
                    throw std::runtime_error("unsupported trip schema '" + schema +
                                             "' (expected trips/1)");
                saw_schema = true;
            }
            continue;
        }
        if (!saw_header) {
            if (line != "origin_id,destination_id,interval,travel_time_s")
                throw std::runtime_error("trip file line " + std::to_string(lineno) +
                                         ": bad header row");
            saw_header = true;
            continue;
        }
        ++res.total_rows;
        auto fields = detail::split_csv(line);
        auto reject = [&](const std::string& rule) {
            res.malformed.push_back({lineno, rule, line});
        };
        if (fields.size() != 4) {
            reject("field_count");
            continue;
        }
        TripObservation tr;
        int interval_1based = 0;
        if (!detail::parse_field_int(fields[0], tr.origin)) { reject("origin_not_int"); continue; }
        if (!detail::parse_field_int(fields[1], tr.destination)) { reject("destination_not_int"); continue; }
        if (!detail::parse_field_int(fields[2], interval_1based)) { reject("interval_not_int"); continue; }
        if (!detail::parse_field_double(fields[3], tr.y)) { reject("travel_time_not_number"); continue; }
        if (interval_1based < 1 || interval_1based > intervals) { reject("interval_out_of_range"); continue; }
        if (!(tr.y > 0.0)) { reject("travel_time_not_positive"); continue; }
        if (tr.origin == tr.destination) { reject("origin_equals_destination"); continue; }
        tr.t = interval_1based - 1;
        res.trips.push_back(tr);
    }
    if (!saw_schema) throw std::runtime_error("trip file: missing '# schema: trips/1' line");
    if (!saw_header) throw std::runtime_error("trip file: missing header row");

    if (res.total_rows > 0) {
        double frac = static_cast<double>(res.malformed.size()) / res.total_rows;
        if (frac > max_malformed_fraction) {
            std::string msg = "trip file: " + std::to_string(res.malformed.size()) + " of " +
                              std::to_string(res.total_rows) + " rows malformed (limit " +
                              std::to_string(max_malformed_fraction) + "); first offenders:";
            int shown = 0;
            for (const MalformedRow& m : res.malformed) {
                if (shown++ == 5) break;
                msg += "\n  row " + std::to_string(m.row) + " [" + m.rule + "] " + m.text;
            }
            throw std::runtime_error(msg);
        }
    }
    return res;
}

inline TripLoadResult read_trips_file(const std::string& path, int intervals,
                                      double max_malformed_fraction = 0.001) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trip file: " + path);
    return read_trips_stream(in, intervals, max_malformed_fraction);
}

inline void write_trips_stream(std::ostream& os, const std::vector<TripObservation>& trips) {
    os << "# schema: trips/1\n";
    os << "origin_id,destination_id,interval,travel_time_s\n";
    char buf[64];
    for (const TripObservation& tr : trips) {
        std::snprintf(buf, sizeof(buf), "%.17g", tr.y);
        os << tr.origin << ',' << tr.destination << ',' << (tr.t + 1) << ',' << buf << '\n';
    }
}

inline void write_trips_file(const std::string& path, const std::vector<TripObservation>& trips) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write trip file: " + path);
    write_trips_stream(os, trips);
}

}  // namespace transit

#endif  // TRANSIT_TRIPS_IO_HPP
