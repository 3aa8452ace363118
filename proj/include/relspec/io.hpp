#pragma once

// File formats: recording CSV + manifest, dataset CSV + manifest, JSON files.
//
// Recording CSV:  time,<emg names...>,<force names...>
// Manifest (same stem, .json): {sample_rate_hz, emg_channels, force_channels,
//                               time_column}

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "relspec/dataset.hpp"
#include "relspec/error.hpp"
#include "relspec/format.hpp"
#include "relspec/signal.hpp"

namespace relspec::io {

namespace fs = std::filesystem;

inline nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline fs::path manifest_path(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

// ---------------------------------------------------------------------------
// CSV

inline std::vector<std::string> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line_no, const std::string& file) {
    double v = 0.0;
    std::string_view s = cell;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(file + ": unparsable value '" + cell + "' at line " + std::to_string(line_no));
    if (!std::isfinite(v))
        throw DataError(file + ": non-finite value at line " + std::to_string(line_no) + " (data row " +
                        std::to_string(line_no - 1) + ")");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

/// Header row plus numeric rows; every row must have as many cells as the header.
inline CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line) || line.empty() || line == "\r") throw DataError(path.string() + ": missing header row");
    t.header = split_csv_line(line);
    for (const auto& h : t.header)
        if (h.empty()) throw DataError(path.string() + ": empty column name in header");
    if (!t.header.empty()) {
        double probe = 0;
        const auto& h0 = t.header.front();
        if (std::from_chars(h0.data(), h0.data() + h0.size(), probe).ec == std::errc())
            throw DataError(path.string() + ": missing header row (first row is numeric)");
    }
    t.columns.assign(t.header.size(), {});
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw DataError(path.string() + ": ragged row at line " + std::to_string(line_no) + " (" +
                            std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()) + ")");
        for (std::size_t c = 0; c < cells.size(); ++c) t.columns[c].push_back(parse_cell(cells[c], line_no, path.string()));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Recording

inline void save_recording(const signal::Recording& rec, const fs::path& csv) {
    rec.validate();
    std::ostringstream os;
    os << "time";
    for (const auto& c : rec.emg) os << ',' << c.name;
    for (const auto& c : rec.force) os << ',' << c.name;
    os << '\n';
    for (std::size_t i = 0; i < rec.length(); ++i) {
        os << fmt17(static_cast<double>(i) / rec.sample_rate_hz);
        for (const auto& c : rec.emg) os << ',' << fmt17(c.samples[i]);
        for (const auto& c : rec.force) os << ',' << fmt17(c.samples[i]);
        os << '\n';
    }
    write_text(csv, os.str());
    write_json(manifest_path(csv), {{"sample_rate_hz", rec.sample_rate_hz},
                                    {"emg_channels", rec.emg_names()},
                                    {"force_channels", rec.force_names()},
                                    {"time_column", true}});
}

/// Load a recording. Channel roles come from the manifest next to the CSV.
/// With a time column, times must increase strictly; the sample rate is
/// taken from the manifest or, if absent there, from the time span.
inline signal::Recording load_recording(const fs::path& csv, const fs::path& manifest = {}) {
    const fs::path mpath = manifest.empty() ? manifest_path(csv) : manifest;
    if (!fs::exists(mpath)) throw DataError("recording manifest not found: " + mpath.string());
    const auto m = read_json(mpath);
    const auto t = read_csv(csv);

    signal::Recording rec;
    try {
        const bool time_column = m.value("time_column", true);
        std::size_t first = 0;
        if (time_column) {
            if (t.header.empty() || t.header.front() != "time")
                throw DataError(csv.string() + ": first column must be 'time'");
            const auto& time = t.columns.front();
            for (std::size_t i = 1; i < time.size(); ++i)
                if (!(time[i] > time[i - 1]))
                    throw DataError(csv.string() + ": time is not strictly increasing at line " + std::to_string(i + 2));
            first = 1;
            if (m.contains("sample_rate_hz"))
                rec.sample_rate_hz = m.at("sample_rate_hz").get<double>();
            else if (time.size() >= 2)
                rec.sample_rate_hz = static_cast<double>(time.size() - 1) / (time.back() - time.front());
            else
                throw DataError(csv.string() + ": cannot infer sample rate from fewer than 2 rows");
        } else {
            if (!m.contains("sample_rate_hz"))
                throw DataError(mpath.string() + ": sample_rate_hz required without a time column");
            rec.sample_rate_hz = m.at("sample_rate_hz").get<double>();
        }
        auto column = [&](const std::string& name) -> const std::vector<double>& {
            for (std::size_t c = first; c < t.header.size(); ++c)
                if (t.header[c] == name) return t.columns[c];
            throw DataError(csv.string() + ": channel '" + name + "' listed in manifest but missing from header");
        };
        for (const auto& name : m.at("emg_channels").get<std::vector<std::string>>()) rec.emg.push_back({name, column(name)});
        for (const auto& name : m.at("force_channels").get<std::vector<std::string>>())
            rec.force.push_back({name, column(name)});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(mpath.string() + ": " + e.what());
    }
    rec.validate();
    return rec;
}

// ---------------------------------------------------------------------------
// Dataset: bias,<features...>,<targets...> + manifest {features, targets, rows}

inline void save_dataset(const Dataset& d, const fs::path& csv) {
    d.validate();
    std::ostringstream os;
    os << "bias";
    for (const auto& n : d.feature_names) os << ',' << n;
    for (const auto& n : d.target_names) os << ',' << n;
    os << '\n';
    for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) os << (c ? "," : "") << fmt17(d.features(r, c));
        for (Eigen::Index c = 0; c < d.targets.cols(); ++c) os << ',' << fmt17(d.targets(r, c));
        os << '\n';
    }
    write_text(csv, os.str());
    write_json(manifest_path(csv), {{"features", d.feature_names}, {"targets", d.target_names}, {"rows", d.rows()}});
}

inline Dataset load_dataset(const fs::path& csv) {
    const auto m = read_json(manifest_path(csv));
    const auto t = read_csv(csv);
    Dataset d;
    try {
        d.feature_names = m.at("features").get<std::vector<std::string>>();
        d.target_names = m.at("targets").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(manifest_path(csv).string() + ": " + e.what());
    }
    const std::size_t nf = d.feature_names.size() + 1, nt = d.target_names.size();
    if (t.header.size() != nf + nt || t.header.front() != "bias")
        throw DataError(csv.string() + ": header does not match dataset manifest");
    const auto rows = static_cast<Eigen::Index>(t.columns.front().size());
    d.features.resize(rows, static_cast<Eigen::Index>(nf));
    d.targets.resize(rows, static_cast<Eigen::Index>(nt));
    for (std::size_t c = 0; c < nf; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) d.features(r, static_cast<Eigen::Index>(c)) = t.columns[c][static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < nt; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) d.targets(r, static_cast<Eigen::Index>(c)) = t.columns[nf + c][static_cast<std::size_t>(r)];
    try {
        d.validate();
    } catch (const ValidationError& e) {
        throw DataError(csv.string() + ": " + e.what());
    }
    return d;
}

}  // namespace relspec::io
