#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "relspec/io.hpp"

using namespace relspec;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("relspec_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        const auto p = dir_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }

    fs::path manifest(const std::string& stem) {
        return write(stem + ".json", R"({"sample_rate_hz": 1000, "emg_channels": ["m1", "m2"], "force_channels": ["f1"]})");
    }

    std::string error_of(const fs::path& csv) {
        try {
            io::load_recording(csv);
        } catch (const DataError& e) {
            return e.what();
        }
        return {};
    }

    fs::path dir_;
};

}  // namespace

TEST_F(IoTest, LoadsSmallRecording) {
    manifest("rec");
    const auto csv = write("rec.csv", "time,m1,m2,f1\n0,1,2,3\n0.001,4,5,6\n0.002,7,8,9\n");
    const auto r = io::load_recording(csv);
    EXPECT_EQ(r.sample_rate_hz, 1000.0);
    EXPECT_EQ(r.length(), 3u);
    EXPECT_EQ(r.emg_names(), (std::vector<std::string>{"m1", "m2"}));
    EXPECT_EQ(r.emg[1].samples, (std::vector<double>{2, 5, 8}));
    EXPECT_EQ(r.force[0].samples, (std::vector<double>{3, 6, 9}));
}

TEST_F(IoTest, ChannelOrderFollowsManifest) {
    write("rec.json", R"({"emg_channels": ["m2", "m1"], "force_channels": ["f1"]})");
    const auto csv = write("rec.csv", "time,m1,m2,f1\n0,1,2,3\n0.5,4,5,6\n");
    const auto r = io::load_recording(csv);
    EXPECT_EQ(r.emg[0].name, "m2");
    EXPECT_EQ(r.emg[0].samples, (std::vector<double>{2, 5}));
    EXPECT_DOUBLE_EQ(r.sample_rate_hz, 2.0);  // inferred from time
}

TEST_F(IoTest, NonFiniteValueNamesTheRow) {
    manifest("rec");
    const auto csv = write("rec.csv", "time,m1,m2,f1\n0,1,2,3\n0.001,4,nan,6\n");
    const auto msg = error_of(csv);
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
}

TEST_F(IoTest, MalformedFilesAreRejected) {
    manifest("ragged");
    EXPECT_NE(error_of(write("ragged.csv", "time,m1,m2,f1\n0,1,2,3\n0.001,4,5\n")).find("ragged"), std::string::npos);
    manifest("noheader");
    EXPECT_NE(error_of(write("noheader.csv", "0,1,2,3\n0.001,4,5,6\n")).find("header"), std::string::npos);
    manifest("time");
    EXPECT_NE(error_of(write("time.csv", "time,m1,m2,f1\n0,1,2,3\n0,4,5,6\n")).find("strictly"), std::string::npos);
    manifest("missing");
    EXPECT_NE(error_of(write("missing.csv", "time,m1,f1\n0,1,3\n")).find("m2"), std::string::npos);
    EXPECT_NE(error_of(write("nomanifest.csv", "time,m1\n0,1\n")).find("manifest"), std::string::npos);
    manifest("garbage");
    EXPECT_NE(error_of(write("garbage.csv", "time,m1,m2,f1\n0,1,x,3\n")).find("unparsable"), std::string::npos);
}

TEST_F(IoTest, RecordingRoundTripIsBitExact) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1e-3);
    signal::Recording r;
    r.sample_rate_hz = 1000.0;
    for (auto name : {"m1", "m2", "m3"}) {
        signal::Channel c{name, {}};
        for (int i = 0; i < 200; ++i) c.samples.push_back(g(rng));
        r.emg.push_back(c);
    }
    r.force.push_back({"f1", std::vector<double>(200)});
    for (auto& v : r.force[0].samples) v = g(rng) * 1e6;
    const auto csv = dir_ / "sub" / "rec.csv";
    io::save_recording(r, csv);
    const auto back = io::load_recording(csv);
    EXPECT_EQ(back.sample_rate_hz, r.sample_rate_hz);
    ASSERT_EQ(back.emg.size(), 3u);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back.emg[c].samples, r.emg[c].samples);
    EXPECT_EQ(back.force[0].samples, r.force[0].samples);
}

TEST_F(IoTest, DatasetRoundTrip) {
    Eigen::MatrixXd x(4, 2), y(4, 1);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 1.0 / 3.0;
    y << 1, 2, 3, std::numbers::pi;
    const auto d = make_dataset(x, y, {"a", "b"}, {"y"});
    const auto csv = dir_ / "data.csv";
    io::save_dataset(d, csv);
    const auto back = io::load_dataset(csv);
    EXPECT_EQ(back.features, d.features);
    EXPECT_EQ(back.targets, d.targets);
    EXPECT_EQ(back.feature_names, d.feature_names);
    EXPECT_EQ(back.target_names, d.target_names);
    EXPECT_EQ(io::read_json(dir_ / "data.json")["rows"], 4);
}

TEST_F(IoTest, InvalidJson) {
    EXPECT_THROW(io::read_json(write("bad.json", "{not json")), DataError);
    EXPECT_THROW(io::read_json(dir_ / "absent.json"), DataError);
}
