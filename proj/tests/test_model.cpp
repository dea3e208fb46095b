#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "swgs/error.hpp"
#include "swgs/model.hpp"

using namespace swgs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Random switching times that pass the allocation checks.
std::vector<int> random_allocation(std::mt19937_64& gen, int C, int T)
{
    std::uniform_int_distribution<int> s(1, T + 1);
    for (;;) {
        std::vector<int> S(static_cast<std::size_t>(C));
        for (auto& v : S) v = s(gen);
        try {
            (void)AllocationSchedule(S, T);
            return S;
        } catch (const ConstraintError&) {
        }
    }
}

Eigen::VectorXd cluster_period_means(const Eigen::VectorXd& y, int C, int m, int t)
{
    Eigen::VectorXd out(C * t);
    for (int j = 0; j < t; ++j)
        for (int c = 0; c < C; ++c) out(j * C + c) = y.segment((j * C + c) * m, m).mean();
    return out;
}

} // namespace

TEST_SUITE("model")
{
    TEST_CASE("treatment matrix follows the switching times")
    {
        const AllocationSchedule a({1, 2, 3, 5}, 5);
        const Eigen::MatrixXi X = build_treatment_matrix(a);
        REQUIRE(X.rows() == 4);
        REQUIRE(X.cols() == 5);
        for (int c = 0; c < 4; ++c)
            for (int t = 1; t <= 5; ++t) CHECK(X(c, t - 1) == (t >= a.switching_time(c) ? 1 : 0));
        CHECK(a.first_switch() == 1);
        // S_c = T + 1: never treated
        CHECK(build_treatment_matrix(AllocationSchedule({1, 6}, 5)).row(1).sum() == 0);
    }

    TEST_CASE("allocation constraints")
    {
        CHECK_THROWS_AS(AllocationSchedule({2, 2, 2}, 4), ConstraintError); // every cluster switches together
        CHECK_THROWS_AS(AllocationSchedule({0, 2}, 4), ConstraintError);
        CHECK_THROWS_AS(AllocationSchedule({1, 6}, 4), ConstraintError);
        CHECK_THROWS_AS(AllocationSchedule({1}, 4), ConstraintError);
        CHECK_NOTHROW(AllocationSchedule({1, 5}, 4));
    }

    TEST_CASE("analysis schedule and boundaries")
    {
        CHECK_THROWS_AS(AnalysisSchedule({3, 3, 5}, 5), ConstraintError);
        CHECK_THROWS_AS(AnalysisSchedule({3, 4}, 5), ConstraintError);
        CHECK_THROWS_AS(AnalysisSchedule({0, 5}, 5), ConstraintError);
        CHECK_NOTHROW(AnalysisSchedule({5}, 5));

        CHECK_THROWS_AS(StoppingBoundaries::from_vectors({2.3, 1.6}, {2.27, 1.6}), ConstraintError);
        CHECK_THROWS_AS(StoppingBoundaries::from_vectors({0.4, 1.6}, {2.27, 1.7}), ConstraintError);
        CHECK_THROWS_AS(StoppingBoundaries::from_vectors({0.4, kInf}, {2.27, kInf}), ConstraintError);
        const auto b = StoppingBoundaries::from_vectors({-kInf, 1.6}, {kInf, 1.6});
        CHECK(b.futility(1) == b.efficacy(1));
        CHECK(b.final_bound() == 1.6);
        CHECK(b.efficacy_bounds() == std::vector<double>{kInf, 1.6});
    }

    TEST_CASE("design checks")
    {
        const auto s = fixture::tds1();
        CHECK_THROWS_AS(fixture::design(s, 1, {1, 2, 3, 5}, {0.4, 1.6}, {2.2, 1.6}), ConstraintError);
        // No cluster switches by the first analysis.
        CHECK_THROWS_AS(fixture::design(s, 10, {4, 4, 5, 6}, {0.4, 1.6}, {2.2, 1.6}), ConstraintError);
        const auto d = fixture::tds1_designs()[0];
        CHECK(d.measurements_at(0) == 69 * 4 * 3);
        CHECK(d.max_measurements() == 1380);
    }

    TEST_CASE("design matrix layout")
    {
        const Eigen::MatrixXi X = build_treatment_matrix(AllocationSchedule({1, 2, 3}, 3));
        const Eigen::MatrixXd D = build_design_matrix(X, 2, 2);
        REQUIRE(D.rows() == 2 * 3 * 2);
        REQUIRE(D.cols() == 4);
        CHECK(D.col(0).sum() == 12);
        CHECK(D.col(2).sum() == 0); // period 3 not yet observed
        // Row (period 2, cluster 2, measurement 1)
        const int r = (1 * 3 + 1) * 2 + 0;
        CHECK(D(r, 1) == 1);
        CHECK(D(r, 3) == 1);
        CHECK(build_design_matrix(X, 2, 3).topRows(12) == build_design_matrix(X, 2, 2).leftCols(4));
    }

    TEST_CASE("covariance structure")
    {
        const VarianceComponents vc{0.3, 1.5};
        const Eigen::MatrixXd S = build_covariance(2, 2, 2, vc);
        // rows: (j, c, k)
        CHECK(S(0, 0) == doctest::Approx(1.8));
        CHECK(S(0, 1) == doctest::Approx(0.3)); // same cluster, same period
        CHECK(S(0, 2) == 0.0);                  // other cluster
        CHECK(S(0, 4) == doctest::Approx(0.3)); // same cluster, next period
        const Eigen::MatrixXd M = build_mean_covariance(2, 4, 2, vc);
        CHECK(M(0, 0) == doctest::Approx(0.3 + 1.5 / 4));
        CHECK(M(0, 2) == doctest::Approx(0.3));
        CHECK(M(0, 1) == 0.0);
    }

    TEST_CASE("closed-form information matches generic GLS on random designs")
    {
        std::mt19937_64 gen(2024);
        int checked = 0;
        while (checked < 50) {
            const int C = std::uniform_int_distribution<int>(2, 7)(gen);
            const int T = std::uniform_int_distribution<int>(2, 6)(gen);
            const int m = std::uniform_int_distribution<int>(2, 6)(gen);
            const int t = std::uniform_int_distribution<int>(1, T)(gen);
            const VarianceComponents vc{std::uniform_real_distribution<double>(0.0, 0.5)(gen),
                                        std::uniform_real_distribution<double>(0.2, 2.0)(gen)};
            const Eigen::MatrixXi X = build_treatment_matrix(AllocationSchedule(random_allocation(gen, C, T), T));
            double closed = 0.0;
            try {
                closed = information_closed_form(X, m, t, vc);
            } catch (const NonEstimableError&) {
                CHECK_THROWS(information_generic(build_mean_design_matrix(X, t), build_mean_covariance(C, m, t, vc)));
                continue;
            }
            const double generic = information_generic(build_design_matrix(X, m, t), build_covariance(C, m, t, vc));
            const double means = information_generic(build_mean_design_matrix(X, t), build_mean_covariance(C, m, t, vc));
            CAPTURE(C);
            CAPTURE(T);
            CAPTURE(t);
            CHECK(std::abs(closed - generic) <= 1e-8 * generic);
            CHECK(std::abs(closed - means) <= 1e-8 * means);
            ++checked;
        }
    }

    TEST_CASE("GLS on cluster-period means equals individual-level GLS")
    {
        std::mt19937_64 gen(7);
        std::normal_distribution<double> z;
        const int C = 5, T = 4, m = 3;
        const VarianceComponents vc{0.2, 0.8};
        const Eigen::MatrixXi X = build_treatment_matrix(AllocationSchedule({1, 2, 3, 4, 5}, T));
        for (int t = 2; t <= T; ++t) {
            const auto ind = make_gls_operator(build_design_matrix(X, m, t), build_covariance(C, m, t, vc));
            const auto mean = make_gls_operator(build_mean_design_matrix(X, t), build_mean_covariance(C, m, t, vc));
            CHECK(ind.columns == mean.columns);
            CHECK(ind.information == doctest::Approx(mean.information).epsilon(1e-10));
            Eigen::VectorXd y(C * m * t);
            for (auto& v : y) v = z(gen);
            const Eigen::VectorXd b1 = ind.estimate(y);
            const Eigen::VectorXd b2 = mean.estimate(cluster_period_means(y, C, m, t));
            CHECK((b1 - b2).cwiseAbs().maxCoeff() < 1e-10);
        }
    }

    TEST_CASE("GLS recovers the fixed effects of noiseless data")
    {
        const int C = 4, T = 5;
        const Eigen::MatrixXi X = build_treatment_matrix(AllocationSchedule({1, 2, 3, 5}, T));
        FixedEffects fe{0.7, {0.1, -0.2, 0.3, 0.05}, 0.25};
        const Eigen::MatrixXd D = build_mean_design_matrix(X, T);
        const auto op = make_gls_operator(D, build_mean_covariance(C, 10, T, {0.02, 0.51}));
        const Eigen::VectorXd b = op.estimate(D * fe.beta());
        CHECK(b(b.size() - 1) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(b(0) == doctest::Approx(0.7).epsilon(1e-12));
    }

    TEST_CASE("non-estimable treatment effect")
    {
        // No cluster treated by period 1.
        const Eigen::MatrixXi X = build_treatment_matrix(AllocationSchedule({2, 3, 4}, 3));
        CHECK_THROWS_AS(information_closed_form(X, 5, 1, {0.1, 1.0}), NonEstimableError);
        CHECK_THROWS_AS(make_gls_operator(build_mean_design_matrix(X, 1), build_mean_covariance(3, 5, 1, {0.1, 1.0})),
                        NonEstimableError);
    }

    TEST_CASE("covariance of the Z statistics")
    {
        const auto st = statistic_covariance(std::vector<double>{10.0, 40.0, 90.0});
        CHECK(st.lambda(0, 1) == doctest::Approx(0.5));
        CHECK(st.lambda(1, 2) == doctest::Approx(std::sqrt(40.0 / 90.0)));
        CHECK(st.lambda(2, 0) == doctest::Approx(1.0 / 3.0));
        CHECK(st.sqrt_information(2) == doctest::Approx(3 * std::sqrt(10.0)));
        CHECK_THROWS(statistic_covariance(std::vector<double>{10.0, 5.0}));

        const auto d = fixture::tds1_designs()[0];
        const auto sd = statistic_covariance(d);
        const Eigen::MatrixXi X = build_treatment_matrix(d.allocation());
        CHECK(sd.information[0] == doctest::Approx(information_closed_form(X, 69, 3, d.variance())));
        CHECK(sd.information[1] == doctest::Approx(information_closed_form(X, 69, 5, d.variance())));
    }

    TEST_CASE("scenario validation")
    {
        auto s = fixture::tds1();
        CHECK_NOTHROW(s.validate());
        s.alpha = 1.0;
        CHECK_THROWS_AS(s.validate(), ConstraintError);
        s = fixture::tds1();
        s.analysis_periods = {3, 4};
        CHECK_THROWS_AS(s.validate(), ConstraintError);
        s = fixture::tds1();
        s.switching_times = std::vector<int>{1, 2, 3};
        CHECK_THROWS_AS(s.validate(), ConstraintError);
    }
}
