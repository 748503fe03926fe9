#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "flam/csv.hpp"
#include "flam/errors.hpp"
#include "flam/fit.hpp"
#include "flam/model_io.hpp"
#include "test_support.hpp"

namespace flam {
namespace {

TEST(Csv, ReadsHeaderAndRows) {
    std::istringstream in("\xEF\xBB\xBFy, x1 ,x2\n1,2,3\n\n+4.5, -1e-3 ,0\r\n");
    const csv::Table t = csv::read(in);
    EXPECT_EQ(t.header, (std::vector<std::string>{"y", "x1", "x2"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1], (std::vector<double>{4.5, -1e-3, 0.0}));
    EXPECT_EQ(t.column("x2"), 2u);
    EXPECT_THROW(t.column("z"), DataError);
}

TEST(Csv, HeaderOnlyGivesNoRows) {
    std::istringstream in("y,x\n");
    EXPECT_TRUE(csv::read(in).rows.empty());
}

TEST(Csv, ErrorsNameLineAndColumn) {
    std::istringstream bad("y,x\n1,2\n3,abc\n");
    try {
        csv::read(bad, "data.csv");
        FAIL();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;
    }
    std::istringstream missing("y,x\n1,\n");
    EXPECT_THROW(csv::read(missing), DataError);
    std::istringstream ragged("y,x\n1,2,3\n");
    EXPECT_THROW(csv::read(ragged), DataError);
    std::istringstream nan("y,x\n1,nan\n");
    EXPECT_THROW(csv::read(nan), DataError);
    std::istringstream empty("");
    EXPECT_THROW(csv::read(empty), DataError);
}

TEST(Csv, MissingFileIsIoError) { EXPECT_THROW(csv::read_file("/nonexistent/dir/file.csv"), IoError); }

TEST(Csv, NumbersRoundTrip) {
    std::mt19937_64 rng(601);
    std::normal_distribution<double> normal(0.0, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = normal(rng);
        const std::string text = csv::format_number(v);
        EXPECT_EQ(std::stod(text), v);
    }
    EXPECT_EQ(csv::format_number(0.5), "0.5");
}

TEST(Csv, ToMatrixListsMissingColumns) {
    std::istringstream in("y,a\n1,2\n");
    const csv::Table t = csv::read(in);
    try {
        csv::to_matrix(t, {"a", "b", "c"});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("b, c"), std::string::npos);
    }
}

io::ModelFile fitted_models() {
    std::mt19937_64 rng(607);
    const Dataset data = testing::random_dataset(rng, 40, 3);
    const FitPath path = flam_path(data, 0.7, 4, 1e-2);
    io::ModelFile file;
    for (const FlamFit& fit : path.fits) {
        file.models.push_back(make_model(fit, data, LossKind::squared, {"a", "b", "c"}, "resp"));
    }
    return file;
}

TEST(ModelIo, JsonRoundTripIsExact) {
    const io::ModelFile file = fitted_models();
    const io::ModelFile back = io::from_json(io::to_json(file));
    ASSERT_EQ(back.models.size(), file.models.size());
    for (std::size_t m = 0; m < file.models.size(); ++m) {
        const FlamModel& a = file.models[m];
        const FlamModel& b = back.models[m];
        EXPECT_EQ(a.theta0, b.theta0);
        EXPECT_EQ(a.penalty.lambda, b.penalty.lambda);
        EXPECT_EQ(a.penalty.alpha, b.penalty.alpha);
        EXPECT_EQ(a.feature_names, b.feature_names);
        EXPECT_EQ(b.response_name, "resp");
        EXPECT_EQ(a.iterations, b.iterations);
        for (Index j = 0; j < a.p(); ++j) {
            EXPECT_EQ(a.components[j].knots, b.components[j].knots);
            EXPECT_EQ(a.components[j].levels, b.components[j].levels);
            EXPECT_EQ(a.components[j].domain_lo, b.components[j].domain_lo);
        }
    }
    EXPECT_EQ(io::to_json(back), io::to_json(file));
}

TEST(ModelIo, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "flam_io_roundtrip.json";
    const io::ModelFile file = fitted_models();
    io::save(path.string(), file);
    EXPECT_EQ(io::to_json(io::load(path.string())), io::to_json(file));
    std::filesystem::remove(path);
    EXPECT_THROW(io::load(path.string()), IoError);
}

TEST(ModelIo, RejectsOtherVersions) {
    std::string text = io::to_json(fitted_models());
    const std::string key = "\"format_version\": 1";
    const auto pos = text.find(key);
    ASSERT_NE(pos, std::string::npos) << text.substr(0, 200);
    text.replace(pos, key.size(), "\"format_version\": 2");
    EXPECT_THROW(io::from_json(text), DataError);
}

TEST(ModelIo, RejectsMalformedInput) {
    EXPECT_THROW(io::from_json("not json"), DataError);
    EXPECT_THROW(io::from_json("{\"format_version\": 1}"), DataError);
    const std::string bad_step =
        R"({"format_version":1,"loss":"squared","response":"y","features":["x"],"fits":[{"theta0":0,"lambda":1,)"
        R"("alpha":1,"epsilon":0,"objective":0,"iterations":1,"converged":true,)"
        R"("features":[{"name":"x","knots":[1.0],"levels":[0.0],"domain":[0,2]}]}]})";
    EXPECT_THROW(io::from_json(bad_step), DataError);
}

}  // namespace
}  // namespace flam
