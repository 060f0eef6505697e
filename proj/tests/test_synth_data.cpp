#include <debinet/synth_data.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace debinet;

namespace {
std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("debinet_test_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}
} // namespace

TEST(GenTable1, ShapesMatchTenInputsAndOneTreatment) {
    for (std::uint64_t s : {0ULL, 1ULL, 99ULL}) {
        PlmData d = gen_table1(10000, s);
        EXPECT_EQ(d.Z.cols(), 10);
        EXPECT_EQ(d.D.cols(), 1);
        EXPECT_EQ(d.y.size(), 10000);
        EXPECT_EQ(d.as_dataset().X.cols(), 11);
    }
}

TEST(GenTable1, NoiselessOriginGivesClosedForm) {
    PlmData d = table1_from_inputs(Mat::Zero(1, 10), 5, 0.0);
    EXPECT_DOUBLE_EQ(d.D(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(d.y(0), 10.0);
}

TEST(GenTable1, SameSeedIsBitIdentical) {
    PlmData a = gen_table1(200, 17), b = gen_table1(200, 17), c = gen_table1(200, 18);
    EXPECT_TRUE(a.Z == b.Z);
    EXPECT_TRUE(a.D == b.D);
    EXPECT_TRUE(a.y == b.y);
    EXPECT_FALSE(a.y == c.y);
}

TEST(GenTable1, InputsAreStandardNormal) {
    PlmData d = gen_table1(100000, 3);
    for (Index j = 0; j < 10; ++j) {
        double m = d.Z.col(j).mean();
        double v = (d.Z.col(j).array() - m).square().sum() / (d.Z.rows() - 1);
        EXPECT_LT(std::abs(m), 0.02);
        EXPECT_LT(std::abs(v - 1.0), 0.05);
    }
}

TEST(GenTable1, RejectsEmpty) {
    try {
        gen_table1(0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_size);
    }
}

TEST(GenTable2, CoefficientsAreLeadingOnes) {
    Dataset d = gen_table2(1000, 3000, 10, 4);
    ASSERT_TRUE(d.beta_true.has_value());
    EXPECT_DOUBLE_EQ(d.beta_true->sum(), 10.0);
    EXPECT_TRUE(d.beta_true->head(10).isOnes());
    EXPECT_TRUE(d.beta_true->tail(2990).isZero(0.0));

    Dataset full = gen_table2(5, 3, 3, 1);
    EXPECT_TRUE(full.beta_true->isOnes());
}

TEST(GenTable2, OlsOnGeneratedDataRecoversCoefficients) {
    Dataset d = gen_table2(50000, 2, 1, 8);
    // 2x2 normal equations solved by Cramer's rule
    double a = d.X.col(0).squaredNorm(), b = d.X.col(0).dot(d.X.col(1)), c = d.X.col(1).squaredNorm();
    double u = d.X.col(0).dot(d.y), v = d.X.col(1).dot(d.y);
    double det = a * c - b * b;
    EXPECT_NEAR((c * u - b * v) / det, 1.0, 0.02);
    EXPECT_NEAR((a * v - b * u) / det, 0.0, 0.02);
}

TEST(GenTable2, EntriesPassMeanAndVarianceCheck) {
    Dataset d = gen_table2(200, 100, 5, 12);
    const double np = static_cast<double>(d.X.size());
    const double m = d.X.mean();
    const double v = (d.X.array() - m).square().sum() / (np - 1);
    EXPECT_LT(std::abs(m), 4.0 / std::sqrt(np));
    EXPECT_LT(std::abs(v - 1.0), 0.1);
}

TEST(GenTable2, RejectsBadSparsity) {
    for (auto [p, k] : {std::pair<Index, Index>{3, 4}, {3, 0}}) {
        try {
            gen_table2(10, p, k, 1);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::invalid_sparsity);
        }
    }
}

TEST(GenComplex, NoiselessOriginGivesClosedForm) {
    PlmData d = complex_from_inputs(Mat::Zero(1, 5), 2, 0.0);
    EXPECT_DOUBLE_EQ(d.D(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.y(0), 2.0);
}

TEST(GenComplex, LogArgumentIsClamped) {
    Mat T = Mat::Zero(1, 5);
    T(0, 1) = -4.0;
    PlmData d = complex_from_inputs(T, 2, 0.0);
    EXPECT_TRUE(std::isfinite(d.D(0, 0)));
    EXPECT_NEAR(d.D(0, 0), std::log(0.001) + 1.0, 1e-12);
}

TEST(GenComplex, DeterministicAndCorrelated) {
    PlmData a = gen_complex(10000, 6), b = gen_complex(10000, 6);
    EXPECT_TRUE(a.Z == b.Z && a.D == b.D && a.y == b.y);
    Vec dc = a.D.col(0).array() - a.D.col(0).mean();
    Vec yc = a.y.array() - a.y.mean();
    double corr = dc.dot(yc) / (dc.norm() * yc.norm());
    EXPECT_GT(corr, 0.5);
}

TEST(Csv, LoadsAndDropsTarget) {
    std::string p = temp_path("small.csv");
    write_file(p, "a,y,b\n1,2,3\n4,5,6\n7,8,9\n");
    Dataset d = load_csv(p, "y");
    ASSERT_EQ(d.X.rows(), 3);
    ASSERT_EQ(d.X.cols(), 2);
    EXPECT_DOUBLE_EQ(d.X(1, 0), 4.0);
    EXPECT_DOUBLE_EQ(d.X(1, 1), 6.0);
    EXPECT_DOUBLE_EQ(d.y(2), 8.0);
    EXPECT_EQ(d.column_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, ConstantTargetLoads) {
    std::string p = temp_path("const.csv");
    write_file(p, "x,y\n1,3\n2,3\n");
    Dataset d = load_csv(p, "y");
    EXPECT_DOUBLE_EQ((d.y.array() - d.y.mean()).square().sum(), 0.0);
}

TEST(Csv, RoundTripIsExact) {
    Dataset d = gen_table2(20, 7, 3, 9);
    std::string p = temp_path("roundtrip.csv");
    write_csv(p, d);
    Dataset r = load_csv(p, "y");
    EXPECT_LE((r.X - d.X).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.y - d.y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Csv, ErrorsNameRowAndColumn) {
    try {
        load_csv(temp_path("does_not_exist.csv"), "y");
        FAIL();
    } catch (const CsvError& e) {
        EXPECT_EQ(e.code(), Errc::missing_file);
    }
    std::string p = temp_path("bad.csv");
    write_file(p, "a,y\n1,2\n3,oops\n");
    try {
        load_csv(p, "y");
        FAIL();
    } catch (const CsvError& e) {
        EXPECT_EQ(e.code(), Errc::non_numeric_cell);
        EXPECT_EQ(e.row(), 2);
        EXPECT_EQ(e.column(), "y");
    }
    try {
        load_csv(p, "target");
        FAIL();
    } catch (const CsvError& e) {
        EXPECT_EQ(e.code(), Errc::missing_column);
        EXPECT_EQ(e.column(), "target");
    }
}
