#pragma once

// Relation spectrum: the exact polynomial a (residual) Dendrite Net computes,
// listed item by item in a fixed canonical order.
//
// Canonical order over display variables v_1..v_n (degree <= 2 part):
//   v_1^2, v_1 v_2, ..., v_1 v_n, v_1,
//   v_2^2, v_2 v_3, ..., v_2,
//   ...
//   v_n^2, v_n,
//   1
// Items of degree > 2 follow the constant in graded-lexicographic order and
// are flagged as extended. Positions are 1-based and do not depend on the
// highest degree present, so spectra of different models line up.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "relspec/dendrite.hpp"
#include "relspec/error.hpp"
#include "relspec/format.hpp"
#include "relspec/polynomial.hpp"

namespace relspec::spectrum {

using poly::Monomial;
using poly::SparsePoly;

inline constexpr std::size_t kTableDegree = 2;

struct SpectrumItem {
    std::size_t position = 0;
    Monomial monomial;  // exponents in variable_names order
    double coefficient = 0.0;

    bool extended() const { return monomial.degree() > kTableDegree; }
};

struct OutputSpectrum {
    std::string name;
    std::vector<SpectrumItem> items;
    double dropped_mass = 0.0;  // sum |c| of items removed by truncation
};

struct RelationSpectrum {
    std::vector<std::string> variable_names;  // exponent coordinate order
    std::vector<std::size_t> display_order;   // permutation of coordinates
    std::vector<OutputSpectrum> outputs;
    std::optional<std::size_t> truncated_degree;

    std::size_t variables() const { return variable_names.size(); }

    std::size_t max_degree() const {
        std::size_t d = 0;
        for (const auto& o : outputs)
            for (const auto& it : o.items) d = std::max(d, it.monomial.degree());
        return d;
    }

    /// Degree of the item universe used for dense tables.
    std::size_t table_degree() const {
        return truncated_degree ? *truncated_degree : std::max(kTableDegree, max_degree());
    }
};

// ---------------------------------------------------------------------------
// Canonical item universe

/// All monomials of degree <= max_degree in canonical order. display_order[k]
/// is the coordinate of the k-th display variable.
inline std::vector<Monomial> canonical_items(std::span<const std::size_t> display_order, std::size_t max_degree) {
    const std::size_t v = display_order.size();
    std::vector<Monomial> items;
    auto make = [&](const std::vector<std::size_t>& display_exps) {
        std::vector<Monomial::exponent_type> e(v, 0);
        for (std::size_t k = 0; k < v; ++k)
            e[display_order[k]] = static_cast<Monomial::exponent_type>(display_exps[k]);
        return Monomial(std::move(e));
    };

    std::vector<std::size_t> de(v, 0);
    for (std::size_t k = 0; k < v; ++k) {
        if (max_degree >= 2) {
            de.assign(v, 0);
            de[k] = 2;
            items.push_back(make(de));
            for (std::size_t j = k + 1; j < v; ++j) {
                de.assign(v, 0);
                de[k] = 1;
                de[j] = 1;
                items.push_back(make(de));
            }
        }
        if (max_degree >= 1) {
            de.assign(v, 0);
            de[k] = 1;
            items.push_back(make(de));
        }
    }
    items.push_back(Monomial(v));

    // graded lexicographic, highest power of the first display variable first
    for (std::size_t deg = kTableDegree + 1; deg <= max_degree; ++deg) {
        de.assign(v, 0);
        auto rec = [&](auto&& self, std::size_t k, std::size_t remaining) -> void {
            if (k + 1 == v) {
                de[k] = remaining;
                items.push_back(make(de));
                return;
            }
            for (std::size_t e = remaining + 1; e-- > 0;) {
                de[k] = e;
                self(self, k + 1, remaining - e);
            }
            de[k] = 0;
        };
        if (v > 0) rec(rec, 0, deg);
    }
    return items;
}

inline std::vector<std::size_t> identity_order(std::size_t v) {
    std::vector<std::size_t> o(v);
    for (std::size_t i = 0; i < v; ++i) o[i] = i;
    return o;
}

/// Label such as "E_FPL^2", "E_FPL*E_FDP" or "1"; factors follow display order.
inline std::string item_label(const Monomial& m, std::span<const std::string> names,
                              std::span<const std::size_t> display_order) {
    if (m.is_constant()) return "1";
    std::string s;
    for (auto coord : display_order) {
        const auto e = m[coord];
        if (e == 0) continue;
        if (!s.empty()) s += '*';
        s += "E_" + names[coord];
        if (e > 1) s += "^" + std::to_string(e);
    }
    return s;
}

namespace detail {

inline std::map<Monomial, std::size_t> position_map(std::span<const std::size_t> display_order,
                                                    std::size_t max_degree) {
    std::map<Monomial, std::size_t> pos;
    const auto items = canonical_items(display_order, max_degree);
    for (std::size_t i = 0; i < items.size(); ++i) pos.emplace(items[i], i + 1);
    return pos;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Expansion

/// Exact per-output polynomials of a model, in the variables x_1..x_v
/// (input components 1..input_dim-1; component 0 is the bias).
inline std::vector<SparsePoly> expand_polynomials(const dd::DDModel& model) {
    model.validate();
    const auto& arch = model.architecture;
    const std::size_t v = arch.input_dim - 1;

    std::vector<SparsePoly> input;
    input.push_back(SparsePoly::constant(v, 1.0));
    for (std::size_t i = 0; i < v; ++i) input.push_back(SparsePoly::variable(v, i));

    auto mix = [v](const Eigen::MatrixXd& w, const std::vector<SparsePoly>& a) {
        std::vector<SparsePoly> out;
        out.reserve(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            SparsePoly p(v);
            for (Eigen::Index c = 0; c < w.cols(); ++c) p.add_scaled(a[static_cast<std::size_t>(c)], w(r, c));
            out.push_back(std::move(p));
        }
        return out;
    };

    std::vector<SparsePoly> a = input;
    for (std::size_t l = 0; l < arch.modules(); ++l) {
        auto z = mix(model.weights[l], a);
        a.clear();
        for (std::size_t j = 0; j < z.size(); ++j) {
            SparsePoly gated = z[j] * input[arch.gate_index(j)];
            if (arch.residual_flags[l]) gated.add_scaled(z[j], 1.0);
            a.push_back(std::move(gated));
        }
    }
    return mix(model.weights.back(), a);
}

/// Spectrum from explicit polynomials (all over the same variables).
inline RelationSpectrum from_polynomials(const std::vector<SparsePoly>& polys,
                                         std::vector<std::string> variable_names,
                                         std::vector<std::string> output_names = {}) {
    const std::size_t v = variable_names.size();
    if (output_names.empty())
        for (std::size_t o = 0; o < polys.size(); ++o) output_names.push_back("y" + std::to_string(o + 1));
    relspec::detail::require(output_names.size() == polys.size(), "spectrum: output name count mismatch");

    RelationSpectrum s;
    s.variable_names = std::move(variable_names);
    s.display_order = identity_order(v);
    std::size_t deg = kTableDegree;
    for (const auto& p : polys) {
        relspec::detail::require(p.variables() == v, "spectrum: polynomial variable count mismatch");
        deg = std::max(deg, p.degree());
    }
    const auto pos = detail::position_map(s.display_order, deg);
    for (std::size_t o = 0; o < polys.size(); ++o) {
        OutputSpectrum out;
        out.name = output_names[o];
        for (const auto& [m, c] : polys[o].terms()) out.items.push_back({pos.at(m), m, c});
        std::sort(out.items.begin(), out.items.end(),
                  [](const auto& a, const auto& b) { return a.position < b.position; });
        s.outputs.push_back(std::move(out));
    }
    return s;
}

inline RelationSpectrum expand_model(const dd::DDModel& model, std::vector<std::string> variable_names = {},
                                     std::vector<std::string> output_names = {}) {
    const std::size_t v = model.architecture.input_dim - 1;
    if (variable_names.empty())
        for (std::size_t i = 0; i < v; ++i) variable_names.push_back("x" + std::to_string(i + 1));
    relspec::detail::require(variable_names.size() == v, "expand_model: variable name count != input_dim - 1");
    return from_polynomials(expand_polynomials(model), std::move(variable_names), std::move(output_names));
}

/// Polynomials back out of a spectrum.
inline std::vector<SparsePoly> to_polynomials(const RelationSpectrum& s) {
    std::vector<SparsePoly> out;
    for (const auto& o : s.outputs) {
        SparsePoly p(s.variables());
        for (const auto& it : o.items) p.add_term(it.monomial, it.coefficient);
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Re-position items for a new display order (given by variable names).
/// Coefficients are untouched.
inline RelationSpectrum canonical_order(const RelationSpectrum& s, std::span<const std::string> variable_order) {
    const std::size_t v = s.variables();
    if (variable_order.size() != v) throw ValidationError("canonical_order: variable order has wrong length");
    std::vector<std::size_t> order;
    for (const auto& name : variable_order) {
        auto it = std::find(s.variable_names.begin(), s.variable_names.end(), name);
        if (it == s.variable_names.end()) throw ValidationError("canonical_order: unknown variable '" + name + "'");
        order.push_back(static_cast<std::size_t>(it - s.variable_names.begin()));
    }
    std::vector<bool> seen(v, false);
    for (auto c : order) {
        if (seen[c]) throw ValidationError("canonical_order: variable order is not a permutation");
        seen[c] = true;
    }

    RelationSpectrum out = s;
    out.display_order = order;
    const auto pos = detail::position_map(order, std::max(kTableDegree, s.max_degree()));
    for (auto& o : out.outputs) {
        for (auto& it : o.items) it.position = pos.at(it.monomial);
        std::sort(o.items.begin(), o.items.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
    }
    return out;
}

/// sum_k c_k * prod_i x_i^{e_ki} per output; x excludes the bias.
inline Eigen::VectorXd evaluate_spectrum(const RelationSpectrum& s, std::span<const double> x) {
    if (x.size() != s.variables())
        throw ValidationError("evaluate_spectrum: point has " + std::to_string(x.size()) + " components, expected " +
                              std::to_string(s.variables()));
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.outputs.size()));
    for (std::size_t o = 0; o < s.outputs.size(); ++o)
        for (const auto& it : s.outputs[o].items) y(static_cast<Eigen::Index>(o)) += it.coefficient * it.monomial.evaluate(x);
    return y;
}

/// Drop items above max_degree, recording the absolute coefficient mass removed.
inline RelationSpectrum truncate_spectrum(const RelationSpectrum& s, std::size_t max_degree) {
    RelationSpectrum out = s;
    for (auto& o : out.outputs) {
        std::vector<SpectrumItem> kept;
        for (const auto& it : o.items) {
            if (it.monomial.degree() <= max_degree)
                kept.push_back(it);
            else
                o.dropped_mass += std::abs(it.coefficient);
        }
        o.items = std::move(kept);
    }
    out.truncated_degree = s.truncated_degree ? std::min(*s.truncated_degree, max_degree) : max_degree;
    return out;
}

/// Dense coefficient vector of one output over the canonical items up to
/// max_degree (missing items are 0).
inline std::vector<double> dense_coefficients(const RelationSpectrum& s, std::size_t output, std::size_t max_degree) {
    relspec::detail::require(output < s.outputs.size(), "spectrum: output index out of range");
    const auto items = canonical_items(s.display_order, max_degree);
    std::vector<double> out(items.size(), 0.0);
    for (const auto& it : s.outputs[output].items)
        if (it.position >= 1 && it.position <= out.size()) out[it.position - 1] = it.coefficient;
    return out;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const RelationSpectrum& s) {
    nlohmann::json display = nlohmann::json::array();
    for (auto c : s.display_order) display.push_back(s.variable_names[c]);
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& o : s.outputs) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& it : o.items)
            items.push_back({{"position", it.position},
                             {"monomial", it.monomial.exponents()},
                             {"label", item_label(it.monomial, s.variable_names, s.display_order)},
                             {"coefficient", it.coefficient},
                             {"extended", it.extended()}});
        outputs.push_back({{"name", o.name}, {"dropped_mass", o.dropped_mass}, {"items", std::move(items)}});
    }
    nlohmann::json j = {{"variables", s.variable_names},
                        {"display_order", display},
                        {"outputs", outputs},
                        {"format_version", 1}};
    j["truncated_degree"] = s.truncated_degree ? nlohmann::json(*s.truncated_degree) : nlohmann::json(nullptr);
    return j;
}

inline RelationSpectrum spectrum_from_json(const nlohmann::json& j) {
    try {
        RelationSpectrum s;
        s.variable_names = j.at("variables").get<std::vector<std::string>>();
        const std::size_t v = s.variables();
        std::vector<std::string> display = j.contains("display_order")
                                               ? j.at("display_order").get<std::vector<std::string>>()
                                               : s.variable_names;
        if (j.contains("truncated_degree") && !j.at("truncated_degree").is_null())
            s.truncated_degree = j.at("truncated_degree").get<std::size_t>();
        for (const auto& oj : j.at("outputs")) {
            OutputSpectrum o;
            o.name = oj.at("name").get<std::string>();
            o.dropped_mass = oj.value("dropped_mass", 0.0);
            for (const auto& ij : oj.at("items")) {
                auto e = ij.at("monomial").get<std::vector<Monomial::exponent_type>>();
                if (e.size() != v) throw ValidationError("spectrum json: monomial length != variable count");
                o.items.push_back({0, Monomial(std::move(e)), ij.at("coefficient").get<double>()});
            }
            s.outputs.push_back(std::move(o));
        }
        s.display_order = identity_order(v);
        return canonical_order(s, display);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("spectrum json: ") + e.what());
    }
}

/// position,label,<one coefficient column per output>; one row per canonical
/// item up to table_degree().
inline void write_csv(std::ostream& os, const RelationSpectrum& s) {
    const auto items = canonical_items(s.display_order, s.table_degree());
    os << "position,label";
    for (const auto& o : s.outputs) os << ',' << o.name;
    os << '\n';
    std::vector<std::vector<double>> cols;
    for (std::size_t o = 0; o < s.outputs.size(); ++o) cols.push_back(dense_coefficients(s, o, s.table_degree()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        os << (i + 1) << ',' << item_label(items[i], s.variable_names, s.display_order);
        for (const auto& c : cols) os << ',' << fmt17(c[i]);
        os << '\n';
    }
}

/// position,label,degree,extended
inline void write_item_table(std::ostream& os, const RelationSpectrum& s) {
    const auto items = canonical_items(s.display_order, s.table_degree());
    os << "position,label,degree,extended\n";
    for (std::size_t i = 0; i < items.size(); ++i)
        os << (i + 1) << ',' << item_label(items[i], s.variable_names, s.display_order) << ',' << items[i].degree()
           << ',' << (items[i].degree() > kTableDegree ? "true" : "false") << '\n';
}

}  // namespace relspec::spectrum
