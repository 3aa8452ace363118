#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "relspec/analysis.hpp"

using namespace relspec;
using namespace relspec::analysis;

namespace {

// spectra[subject][finger] given directly
SpectrumCollection collection(std::vector<std::vector<std::vector<double>>> spectra) {
    SpectrumCollection c;
    for (std::size_t s = 0; s < spectra.size(); ++s) c.subjects.push_back("S" + std::to_string(s + 1));
    for (std::size_t f = 0; f < spectra.front().size(); ++f) c.fingers.push_back("F" + std::to_string(f + 1));
    for (std::size_t i = 0; i < spectra.front().front().size(); ++i) c.item_labels.push_back("i" + std::to_string(i + 1));
    c.spectra = std::move(spectra);
    c.validate();
    return c;
}

// one finger, one item per subject
SpectrumCollection single_item(const std::vector<double>& values) {
    std::vector<std::vector<std::vector<double>>> s;
    for (double v : values) s.push_back({{v, 0.0}});
    return collection(s);
}

SpectrumCollection random_collection(std::mt19937_64& rng, std::size_t subjects, std::size_t fingers,
                                     std::size_t items) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<std::vector<double>>> s(subjects, std::vector<std::vector<double>>(fingers));
    for (auto& subj : s)
        for (auto& v : subj) {
            v.resize(items);
            for (double& x : v) x = n(rng);
        }
    return collection(s);
}

}  // namespace

TEST(SameContribution, HandCases) {
    EXPECT_DOUBLE_EQ(same_contribution(single_item({1, 2, 3, 4}), 0, 1), 100.0);
    EXPECT_DOUBLE_EQ(same_contribution(single_item({1, 2, 3, -4}), 0, 1), 75.0);
    EXPECT_DOUBLE_EQ(same_contribution(single_item({-1, -2, -3, 4}), 0, 1), 75.0);
    EXPECT_DOUBLE_EQ(same_contribution(single_item({1, 0, 3, 4}), 0, 1), 75.0);
    EXPECT_DOUBLE_EQ(same_contribution(single_item({1, -1}), 0, 1), 50.0);
    EXPECT_DOUBLE_EQ(same_contribution(single_item({0, 0, 0}), 0, 1), 0.0);
}

TEST(SameContribution, OutOfRange) {
    const auto c = single_item({1, 2});
    EXPECT_THROW(same_contribution(c, 0, 0), ValidationError);
    EXPECT_THROW(same_contribution(c, 0, 3), ValidationError);
    EXPECT_THROW(same_contribution(c, 1, 1), ValidationError);
}

TEST(SameContribution, BoundedAndScaleInvariant) {
    std::mt19937_64 rng(7);
    const auto c = random_collection(rng, 9, 3, 10);
    auto scaled = c;
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (auto& s : scaled.spectra)
        for (auto& v : s) {
            const double k = u(rng);
            for (double& x : v) x *= k;
        }
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t i = 1; i <= 10; ++i) {
            const double ci = same_contribution(c, f, i);
            EXPECT_GE(ci, 50.0 - 1e-12);  // no zeros: majority is at least half
            EXPECT_LE(ci, 100.0);
            EXPECT_EQ(ci, same_contribution(scaled, f, i));
        }
}

TEST(Coupling, SymmetricUnitDiagonalBounded) {
    std::mt19937_64 rng(11);
    const auto c = random_collection(rng, 5, 4, 28);
    for (auto agg : {Aggregation::concatenate, Aggregation::per_subject_mean}) {
        const auto m = coupling_matrix(c, agg);
        for (std::size_t i = 0; i < 4; ++i) {
            ASSERT_TRUE(m.r[i][i].has_value());
            EXPECT_EQ(*m.r[i][i], 1.0);
            for (std::size_t j = 0; j < 4; ++j) {
                ASSERT_TRUE(m.r[i][j].has_value());
                EXPECT_EQ(*m.r[i][j], *m.r[j][i]);
                EXPECT_LE(std::abs(*m.r[i][j]), 1.0);
            }
        }
    }
}

TEST(Coupling, HandCases) {
    const std::vector<double> a = {1, 2, 3, 4}, neg = {-1, -2, -3, -4}, shifted = {3, 5, 7, 9};
    EXPECT_NEAR(*pearson(a, neg), -1.0, 1e-15);
    EXPECT_NEAR(*pearson(a, shifted), 1.0, 1e-15);
    const std::vector<double> u = {1, -1, 1, -1}, v = {1, 1, -1, -1};
    EXPECT_EQ(*pearson(u, v), 0.0);
    const std::vector<double> flat = {2, 2, 2, 2};
    EXPECT_FALSE(pearson(a, flat).has_value());

    // finger 2 identically zero: its row and column are undefined
    const auto c = collection({{{1, 2, 3}, {0, 0, 0}}, {{2, 1, 0}, {0, 0, 0}}});
    const auto m = coupling_matrix(c);
    EXPECT_EQ(*m.r[0][0], 1.0);
    EXPECT_FALSE(m.r[1][1].has_value());
    EXPECT_FALSE(m.r[0][1].has_value());
    std::ostringstream os;
    write_coupling_csv(os, m);
    EXPECT_EQ(os.str(), "finger,F1,F2\nF1,1,undefined\nF2,undefined,undefined\n");
    EXPECT_TRUE(to_json(m)["correlation"][0][1].is_null());
}

TEST(Coupling, AggregationModesDiffer) {
    // per-subject patterns cancel in the mean but not in the concatenation
    const auto c = collection({{{1, 2, 3}, {1, 2, 3}}, {{3, 2, 1}, {1, 2, 3}}});
    const auto cat = coupling_matrix(c, Aggregation::concatenate);
    EXPECT_NEAR(*cat.r[0][1], 0.0, 1e-15);
    const auto mean = coupling_matrix(c, Aggregation::per_subject_mean);
    EXPECT_FALSE(mean.r[0][1].has_value());  // finger 1 mean is flat
    EXPECT_EQ(aggregate(c, 0, Aggregation::per_subject_mean), (std::vector<double>{2, 2, 2}));
}

TEST(Synergy, ThresholdsAndRanking) {
    std::mt19937_64 rng(3);
    auto c = random_collection(rng, 6, 2, 12);
    EXPECT_EQ(synergy_report(c, 0.0).size(), 24u);
    for (const auto& r : synergy_report(c, 100.0)) {
        EXPECT_EQ(r.c, 100.0);
        EXPECT_TRUE(r.sign == '+' || r.sign == '-');
    }
    // plant a unanimous, large item for finger F2
    for (auto& s : c.spectra) s[1][6] = -50.0;
    const auto rows = synergy_report(c, 50.0);
    auto it = std::find_if(rows.begin(), rows.end(), [](const SynergyRow& r) { return r.finger == "F2"; });
    ASSERT_NE(it, rows.end());
    EXPECT_EQ(it->position, 7u);
    EXPECT_EQ(it->label, "i7");
    EXPECT_EQ(it->sign, '-');
    EXPECT_DOUBLE_EQ(it->mean_coefficient, -50.0);
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].finger == rows[i - 1].finger) {
            EXPECT_GE(rows[i - 1].c, rows[i].c);
        }
    EXPECT_THROW(synergy_report(c, 101.0), ValidationError);

    std::ostringstream os;
    write_synergy_csv(os, rows);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "finger,position,label,C_i,mean_coefficient,sign");
}

TEST(Collection, AlignsSpectraByOutputName) {
    using spectrum::RelationSpectrum;
    using poly::Monomial;
    auto make = [](std::vector<std::string> outs, std::vector<double> x_coef) {
        std::vector<poly::SparsePoly> polys;
        for (double c : x_coef) {
            poly::SparsePoly p(2);
            p.add_term(Monomial({1, 0}), c);
            p.add_term(Monomial({0, 0}), 1.0);
            polys.push_back(p);
        }
        return spectrum::from_polynomials(polys, {"a", "b"}, outs);
    };
    const auto c = make_collection({make({"y1", "y2"}, {1, 2}), make({"y2", "y1"}, {-3, 4})}, {});
    EXPECT_EQ(c.subjects, (std::vector<std::string>{"S1", "S2"}));
    EXPECT_EQ(c.item_labels, (std::vector<std::string>{"E_a^2", "E_a*E_b", "E_a", "E_b^2", "E_b", "1"}));
    EXPECT_EQ(c.at(1, 0), (std::vector<double>{0, 0, 4, 0, 0, 1}));
    EXPECT_EQ(c.at(1, 1), (std::vector<double>{0, 0, -3, 0, 0, 1}));
    EXPECT_EQ(same_contribution(c, c.finger_index("y2"), 3), 50.0);
    EXPECT_EQ(same_contribution(c, c.finger_index("y2"), 6), 100.0);

    const auto n = l2_normalized(c);
    double norm = 0;
    for (double x : n.at(0, 0)) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-15);

    EXPECT_THROW(make_collection({make({"y1"}, {1}), make({"y3"}, {1})}, {}), ValidationError);
}
