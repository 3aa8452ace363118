#pragma once

// Cross-subject reading of relation spectra: sign agreement of items
// ("same contribution") and Pearson coupling between output spectra.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relspec/error.hpp"
#include "relspec/format.hpp"
#include "relspec/spectrum.hpp"

namespace relspec::analysis {

/// Coefficient vectors for every (subject, finger), aligned to one shared
/// canonical item list.
struct SpectrumCollection {
    std::vector<std::string> subjects;
    std::vector<std::string> fingers;
    std::vector<std::string> item_labels;                   // index i <-> position i+1
    std::vector<std::vector<std::vector<double>>> spectra;  // [subject][finger][item]

    std::size_t items() const { return item_labels.size(); }

    void validate() const {
        relspec::detail::require(spectra.size() == subjects.size(), "collection: subject count mismatch");
        for (const auto& s : spectra) {
            relspec::detail::require(s.size() == fingers.size(), "collection: finger count mismatch");
            for (const auto& v : s)
                relspec::detail::require(v.size() == items(), "collection: coefficient vectors differ in length");
        }
    }

    const std::vector<double>& at(std::size_t subject, std::size_t finger) const { return spectra[subject][finger]; }

    std::size_t finger_index(const std::string& name) const {
        auto it = std::find(fingers.begin(), fingers.end(), name);
        if (it == fingers.end()) throw ValidationError("collection: unknown finger '" + name + "'");
        return static_cast<std::size_t>(it - fingers.begin());
    }
};

/// Align per-subject spectra on the canonical items up to max_degree. All
/// spectra must share variable names and output names; the first one's
/// display order is used for every subject.
inline SpectrumCollection make_collection(const std::vector<spectrum::RelationSpectrum>& per_subject,
                                          std::vector<std::string> subject_ids, std::size_t max_degree = 2) {
    relspec::detail::require(!per_subject.empty(), "collection: no spectra");
    if (subject_ids.empty())
        for (std::size_t s = 0; s < per_subject.size(); ++s) subject_ids.push_back("S" + std::to_string(s + 1));
    relspec::detail::require(subject_ids.size() == per_subject.size(), "collection: subject id count mismatch");

    const auto& ref = per_subject.front();
    std::vector<std::string> display;
    for (auto c : ref.display_order) display.push_back(ref.variable_names[c]);

    SpectrumCollection col;
    col.subjects = std::move(subject_ids);
    for (const auto& o : ref.outputs) col.fingers.push_back(o.name);
    for (const auto& m : spectrum::canonical_items(ref.display_order, max_degree))
        col.item_labels.push_back(spectrum::item_label(m, ref.variable_names, ref.display_order));

    for (const auto& raw : per_subject) {
        if (raw.variable_names != ref.variable_names)
            throw ValidationError("collection: spectra disagree on variable names");
        const auto s = spectrum::canonical_order(raw, display);
        std::vector<std::vector<double>> per_finger;
        for (const auto& finger : col.fingers) {
            auto it = std::find_if(s.outputs.begin(), s.outputs.end(), [&](const auto& o) { return o.name == finger; });
            if (it == s.outputs.end()) throw ValidationError("collection: spectrum lacks output '" + finger + "'");
            per_finger.push_back(
                spectrum::dense_coefficients(s, static_cast<std::size_t>(it - s.outputs.begin()), max_degree));
        }
        col.spectra.push_back(std::move(per_finger));
    }
    col.validate();
    return col;
}

/// Scale every (subject, finger) vector to unit L2 norm; zero vectors stay zero.
inline SpectrumCollection l2_normalized(SpectrumCollection c) {
    for (auto& s : c.spectra)
        for (auto& v : s) {
            double n = 0.0;
            for (double x : v) n += x * x;
            n = std::sqrt(n);
            if (n > 0)
                for (double& x : v) x /= n;
        }
    return c;
}

// ---------------------------------------------------------------------------

/// Percentage of subjects sharing the majority sign of the item's
/// coefficient. Exact zeros count for neither sign.
inline double same_contribution(const SpectrumCollection& c, std::size_t finger, std::size_t item_position) {
    if (c.subjects.empty()) throw ValidationError("same_contribution: empty collection");
    relspec::detail::require(finger < c.fingers.size(), "same_contribution: finger out of range");
    if (item_position < 1 || item_position > c.items())
        throw ValidationError("same_contribution: item position " + std::to_string(item_position) + " out of range");
    std::size_t pos = 0, neg = 0;
    for (std::size_t s = 0; s < c.subjects.size(); ++s) {
        const double v = c.at(s, finger)[item_position - 1];
        if (v > 0) ++pos;
        else if (v < 0) ++neg;
    }
    return static_cast<double>(std::max(pos, neg)) / static_cast<double>(c.subjects.size()) * 100.0;
}

enum class Aggregation { concatenate, per_subject_mean };

/// Pearson correlations between finger spectra. Entries involving a
/// zero-variance vector are left empty (undefined).
struct CouplingMatrix {
    std::vector<std::string> fingers;
    std::vector<std::vector<std::optional<double>>> r;
};

inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    relspec::detail::require(a.size() == b.size(), "pearson: length mismatch");
    relspec::detail::require(a.size() >= 2, "pearson: need at least 2 items");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

inline std::vector<double> aggregate(const SpectrumCollection& c, std::size_t finger, Aggregation agg) {
    std::vector<double> out;
    if (agg == Aggregation::concatenate) {
        for (std::size_t s = 0; s < c.subjects.size(); ++s) {
            const auto& v = c.at(s, finger);
            out.insert(out.end(), v.begin(), v.end());
        }
    } else {
        out.assign(c.items(), 0.0);
        for (std::size_t s = 0; s < c.subjects.size(); ++s)
            for (std::size_t i = 0; i < c.items(); ++i) out[i] += c.at(s, finger)[i];
        for (double& x : out) x /= static_cast<double>(c.subjects.size());
    }
    return out;
}

inline CouplingMatrix coupling_matrix(const SpectrumCollection& c, Aggregation agg = Aggregation::concatenate) {
    c.validate();
    if (c.subjects.empty()) throw ValidationError("coupling_matrix: empty collection");
    std::vector<std::vector<double>> vecs;
    for (std::size_t f = 0; f < c.fingers.size(); ++f) vecs.push_back(aggregate(c, f, agg));
    if (!vecs.empty() && vecs.front().size() < 2) throw ValidationError("coupling_matrix: need at least 2 items");

    CouplingMatrix m;
    m.fingers = c.fingers;
    const std::size_t n = c.fingers.size();
    m.r.assign(n, std::vector<std::optional<double>>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto self = pearson(vecs[i], vecs[i]);
        m.r[i][i] = self ? std::optional<double>(1.0) : std::nullopt;
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto v = pearson(vecs[i], vecs[j]);
            m.r[i][j] = v;
            m.r[j][i] = v;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------

struct SynergyRow {
    std::string finger;
    std::size_t position = 0;
    std::string label;
    double c = 0.0;                 // same-contribution percentage
    double mean_coefficient = 0.0;  // signed mean across subjects
    double mean_abs = 0.0;
    char sign = '0';                // majority sign: '+', '-', '0' (none) or '~' (tie)
};

/// Items with C(i) >= threshold per finger, ranked by C(i), then by mean
/// |coefficient|, then by position.
inline std::vector<SynergyRow> synergy_report(const SpectrumCollection& c, double threshold) {
    c.validate();
    relspec::detail::require(threshold >= 0 && threshold <= 100, "synergy_report: threshold outside [0, 100]");
    const double n = static_cast<double>(c.subjects.size());
    std::vector<SynergyRow> out;
    for (std::size_t f = 0; f < c.fingers.size(); ++f) {
        std::vector<SynergyRow> rows;
        for (std::size_t i = 0; i < c.items(); ++i) {
            SynergyRow r;
            r.finger = c.fingers[f];
            r.position = i + 1;
            r.label = c.item_labels[i];
            r.c = same_contribution(c, f, i + 1);
            if (r.c < threshold) continue;
            std::size_t pos = 0, neg = 0;
            for (std::size_t s = 0; s < c.subjects.size(); ++s) {
                const double v = c.at(s, f)[i];
                r.mean_coefficient += v;
                r.mean_abs += std::abs(v);
                if (v > 0) ++pos;
                else if (v < 0) ++neg;
            }
            r.mean_coefficient /= n;
            r.mean_abs /= n;
            r.sign = pos > neg ? '+' : neg > pos ? '-' : (pos == 0 ? '0' : '~');
            rows.push_back(std::move(r));
        }
        std::stable_sort(rows.begin(), rows.end(), [](const SynergyRow& a, const SynergyRow& b) {
            if (a.c != b.c) return a.c > b.c;
            if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
            return a.position < b.position;
        });
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

inline void write_coupling_csv(std::ostream& os, const CouplingMatrix& m) {
    os << "finger";
    for (const auto& f : m.fingers) os << ',' << f;
    os << '\n';
    for (std::size_t i = 0; i < m.fingers.size(); ++i) {
        os << m.fingers[i];
        for (const auto& v : m.r[i]) os << ',' << (v ? fmt17(*v) : "undefined");
        os << '\n';
    }
}

inline nlohmann::json to_json(const CouplingMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m.r) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& v : row) jr.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        rows.push_back(std::move(jr));
    }
    return {{"fingers", m.fingers}, {"correlation", rows}};
}

inline void write_synergy_csv(std::ostream& os, const std::vector<SynergyRow>& rows) {
    os << "finger,position,label,C_i,mean_coefficient,sign\n";
    for (const auto& r : rows)
        os << r.finger << ',' << r.position << ',' << r.label << ',' << fmt17(r.c) << ','
           << fmt17(r.mean_coefficient) << ',' << r.sign << '\n';
}

}  // namespace relspec::analysis
