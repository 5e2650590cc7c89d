#include "doctest.h"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"
#include "hazerp/rng.hpp"
#include "hazerp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

using namespace hazerp;

namespace {

// Adaptive Simpson quadrature, independent of the library's special-function
// code paths.
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fb,
               double fm, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) < 15.0 * eps) return left + right + delta / 15.0;
    return simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    return simpson(f, a, b, f(a), f(b), f(m), eps, 60);
}

double t_density(double u, long long df) {
    const double n = static_cast<double>(df);
    const double lognorm =
        std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0) - 0.5 * std::log(n * M_PI);
    return std::exp(lognorm - (n + 1.0) / 2.0 * std::log1p(u * u / n));
}

// Survival P(T > t) for t >= 0 by quadrature: a finite leg plus a 1/u
// substitution for the polynomial tail.
double t_sf_oracle(double t, long long df) {
    const double split = std::max(t * 2.0 + 10.0, 50.0);
    const double body = integrate([&](double u) { return t_density(u, df); }, t, split, 1e-13);
    const double tail = integrate(
        [&](double x) {
            if (x == 0.0) return 0.0;
            const double u = 1.0 / x;
            return t_density(u, df) * u * u;
        },
        0.0, 1.0 / split, 1e-13);
    return body + tail;
}

double chisq_density(double u, long long df) {
    const double a = static_cast<double>(df) / 2.0;
    if (u <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(u) - u / 2.0 - a * std::log(2.0) - std::lgamma(a));
}

double chisq_sf_oracle(double x, long long df) {
    const double hi = std::max(x, static_cast<double>(df)) + 250.0;
    return integrate([&](double u) { return chisq_density(u, df); }, x, hi, 1e-13);
}

// Builds an n = 10 paired difference hitting an exact t statistic.
std::vector<double> vector_with_t(double t, std::size_t n) {
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) base[i] = static_cast<double>(i * i % 7) - 2.0;
    const double m = mean_of(base);
    const double sd = sample_sd(base);
    std::vector<double> out(n);
    const double target_mean = t / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) out[i] = target_mean + (base[i] - m) / sd;
    return out;
}

} // namespace

TEST_SUITE("stats") {

TEST_CASE("t_sf basics") {
    CHECK(t_sf(0.0, 1) == 0.5);
    CHECK(t_sf(0.0, 9) == 0.5);
    // Headline test statistic: t(9) = 3.51 gives one-sided p near 0.0033.
    CHECK(std::fabs(t_sf(3.51, 9) - 0.00329) < 0.00025);
}

TEST_CASE("t_sf symmetry") {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const double t = rng.uniform(-8.0, 8.0);
        const long long df = 1 + static_cast<long long>(rng.below(40));
        CHECK(std::fabs(t_sf(t, df) + t_sf(-t, df) - 1.0) < 1e-12);
    }
}

TEST_CASE("t_sf matches quadrature oracle") {
    // df = 1 is the Cauchy worst case for tail handling.
    const long long dfs[] = {1, 2, 3, 5, 9, 20, 60, 200};
    const double ts[] = {0.1, 0.5, 1.0, 2.0, 3.51, 5.0, 8.0};
    for (long long df : dfs) {
        for (double t : ts) {
            CAPTURE(df);
            CAPTURE(t);
            CHECK(std::fabs(t_sf(t, df) - t_sf_oracle(t, df)) < 1e-8);
        }
    }
    CHECK(std::fabs(t_sf(2.0, 60) - t_sf_oracle(2.0, 60)) < 1e-8);
}

TEST_CASE("t_sf closed forms") {
    // df = 1: survival is 1/2 - atan(t)/pi. df = 2: 1/2 - t/(2 sqrt(2 + t^2)).
    for (double t : {0.25, 1.0, 3.0, 10.0}) {
        CHECK(t_sf(t, 1) == doctest::Approx(0.5 - std::atan(t) / M_PI).epsilon(1e-12));
        CHECK(t_sf(t, 2) ==
              doctest::Approx(0.5 - t / (2.0 * std::sqrt(2.0 + t * t))).epsilon(1e-12));
    }
}

TEST_CASE("chisq_sf basics") {
    CHECK(chisq_sf(0.0, 1) == 1.0);
    CHECK(chisq_sf(0.0, 7) == 1.0);
    // df = 2 has the closed form exp(-x/2).
    CHECK(chisq_sf(2.0 * std::log(2.0), 2) == doctest::Approx(0.5).epsilon(1e-12));
    for (double x : {0.5, 1.0, 5.0, 20.0}) {
        CHECK(chisq_sf(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    }
    // Far-tail value used by the paper's chi-square report.
    CHECK(chisq_sf(571.81, 3) < 1e-100);
    CHECK(chisq_sf(571.81, 3) > 0.0);
}

TEST_CASE("chisq_sf matches quadrature oracle") {
    const long long dfs[] = {1, 2, 3, 4, 9, 30};
    const double xs[] = {0.1, 0.7, 2.0, 5.0, 10.0, 40.0};
    for (long long df : dfs) {
        for (double x : xs) {
            CAPTURE(df);
            CAPTURE(x);
            CHECK(std::fabs(chisq_sf(x, df) - chisq_sf_oracle(x, df)) < 1e-9);
        }
    }
}

TEST_CASE("chisq_sf is non-increasing in x") {
    for (long long df : {1, 3, 10}) {
        double prev = 1.0;
        for (double x = 0.0; x <= 50.0; x += 0.37) {
            const double p = chisq_sf(x, df);
            CHECK(p <= prev + 1e-15);
            prev = p;
        }
    }
}

TEST_CASE("chi_square reproduces the published tables") {
    ContingencyTable first;
    first.row_names = {"Occlusion", "OccludedHazard"};
    first.counts = {{217, 3}, {18, 202}};
    const TestResult r1 = chi_square(first);
    CHECK(std::fabs(r1.statistic - 361.69) < 0.05);
    CHECK(r1.df == 1);
    CHECK(r1.p_two_tailed < 0.001);

    ContingencyTable second;
    second.row_names = {"OccludedPedestrian", "Occlusion", "VisiblePedestrian", "Control"};
    second.counts = {{220, 0}, {219, 1}, {59, 161}, {35, 185}};
    const TestResult r2 = chi_square(second);
    CHECK(std::fabs(r2.statistic - 571.81) < 0.05);
    CHECK(r2.df == 3);
    CHECK(r2.p_two_tailed < 0.001);
}

TEST_CASE("chi_square on homogeneous table is zero") {
    ContingencyTable t;
    t.row_names = {"a", "b"};
    t.counts = {{10, 10}, {10, 10}};
    const TestResult r = chi_square(t);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_two_tailed == 1.0);
}

TEST_CASE("chi_square matches a brute-force oracle on random tables") {
    Rng rng(23);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t rows = 2 + rng.below(3);
        const std::size_t cols = 2 + rng.below(2);
        ContingencyTable t;
        t.counts.assign(rows, std::vector<long long>(cols, 0));
        for (auto& row : t.counts)
            for (auto& cell : row) cell = 1 + static_cast<long long>(rng.below(200));

        // Independent recomputation straight from the definition.
        double n = 0.0;
        std::vector<double> rt(rows, 0.0);
        std::vector<double> ct(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                n += t.counts[r][c];
                rt[r] += t.counts[r][c];
                ct[c] += t.counts[r][c];
            }
        double expected_stat = 0.0;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double e = rt[r] * ct[c] / n;
                const double d = t.counts[r][c] - e;
                expected_stat += d * d / e;
            }

        const TestResult res = chi_square(t);
        CHECK(res.statistic == doctest::Approx(expected_stat).epsilon(1e-12));
        CHECK(res.df == static_cast<long long>((rows - 1) * (cols - 1)));
        CHECK(res.p_two_tailed == doctest::Approx(chisq_sf(res.statistic, res.df)));
    }
}

TEST_CASE("chi_square is invariant under row and column permutations") {
    Rng rng(25);
    ContingencyTable t;
    t.counts = {{30, 7, 13}, {5, 44, 11}, {19, 2, 28}, {9, 9, 40}};
    const double base = chi_square(t).statistic;
    for (int trial = 0; trial < 20; ++trial) {
        ContingencyTable p = t;
        rng.shuffle(p.counts);
        std::vector<std::size_t> colperm = {0, 1, 2};
        rng.shuffle(colperm);
        for (auto& row : p.counts) {
            const std::vector<long long> orig = row;
            for (std::size_t c = 0; c < 3; ++c) row[c] = orig[colperm[c]];
        }
        CHECK(chi_square(p).statistic == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("chi_square error paths") {
    ContingencyTable zero_col;
    zero_col.counts = {{5, 0}, {7, 0}};
    CHECK_THROWS_AS(chi_square(zero_col), Error);
    try {
        chi_square(zero_col);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroExpectedCount);
    }

    ContingencyTable one_row;
    one_row.counts = {{5, 6}};
    try {
        chi_square(one_row);
        FAIL_CHECK("single-row table must be rejected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PreconditionViolated);
    }
}

TEST_CASE("paired_t on identical samples") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const TestResult r = paired_t(x, x);
    CHECK(r.statistic == 0.0);
    CHECK(r.df == 9);
    CHECK(r.p_two_tailed == 1.0);
    CHECK(r.effect_size.value() == 0.0);
}

TEST_CASE("paired_t matches hand computation and the sf backend") {
    Rng rng(27);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = 2 + rng.below(12);
        std::vector<double> x(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal(1.0, 2.0);
            y[i] = rng.normal(0.5, 1.5);
        }
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - y[i];
        const double m = mean_of(d);
        const double sd = sample_sd(d);
        if (sd == 0.0) continue;
        const double expect_t = m / (sd / std::sqrt(static_cast<double>(n)));

        const TestResult r = paired_t(x, y);
        CHECK(r.statistic == doctest::Approx(expect_t).epsilon(1e-12));
        CHECK(r.df == static_cast<long long>(n - 1));
        CHECK(r.effect_size.value() == doctest::Approx(m / sd).epsilon(1e-12));
        CHECK(r.p_two_tailed ==
              doctest::Approx(2.0 * t_sf(std::fabs(expect_t), r.df)).epsilon(1e-12));
        // d = t / sqrt(n) identically.
        CHECK(r.effect_size.value() ==
              doctest::Approx(r.statistic / std::sqrt(static_cast<double>(n))).epsilon(1e-12));
    }
}

TEST_CASE("paired_t matches quadrature oracle on n = 6 vectors") {
    Rng rng(29);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> x(6);
        std::vector<double> y(6);
        for (std::size_t i = 0; i < 6; ++i) {
            x[i] = rng.normal();
            y[i] = rng.normal();
        }
        const TestResult r = paired_t(x, y);
        const double oracle_p = 2.0 * t_sf_oracle(std::fabs(r.statistic), 5);
        CHECK(std::fabs(r.p_two_tailed - oracle_p) < 1e-6);
    }
}

TEST_CASE("published t-to-d pairs all reproduce") {
    struct Pair {
        double t;
        double d;
    };
    // Reported (t, d) pairs from the ten-participant analyses.
    const Pair pairs[] = {{3.51, 1.11}, {1.59, 0.50}, {1.06, 0.34},
                          {2.64, 0.84}, {2.28, 0.72}, {2.31, 0.73}};
    for (const Pair& p : pairs) {
        CAPTURE(p.t);
        const std::vector<double> x = vector_with_t(p.t, 10);
        const std::vector<double> y(10, 0.0);
        const TestResult r = paired_t(x, y);
        CHECK(r.statistic == doctest::Approx(p.t).epsilon(1e-9));
        CHECK(r.df == 9);
        // Reported d values are rounded to two decimals, so allow half a
        // rounding step on each side.
        CHECK(std::fabs(r.effect_size.value() - p.d) <= 0.0055);
    }
    // The headline pair also pins the p-value.
    const TestResult headline = paired_t(vector_with_t(3.51, 10), std::vector<double>(10, 0.0));
    CHECK(std::fabs(headline.p_two_tailed - 0.0066) < 0.0005);
}

TEST_CASE("paired_t shift invariance and antisymmetry") {
    Rng rng(31);
    std::vector<double> x(8);
    std::vector<double> y(8);
    for (std::size_t i = 0; i < 8; ++i) {
        x[i] = rng.normal(2.0, 1.0);
        y[i] = rng.normal(1.0, 1.0);
    }
    const TestResult base = paired_t(x, y);
    std::vector<double> xs = x;
    std::vector<double> ys = y;
    for (std::size_t i = 0; i < 8; ++i) {
        xs[i] += 42.0;
        ys[i] += 42.0;
    }
    CHECK(paired_t(xs, ys).statistic == doctest::Approx(base.statistic).epsilon(1e-9));
    CHECK(paired_t(y, x).statistic == doctest::Approx(-base.statistic).epsilon(1e-12));
}

TEST_CASE("paired_t error paths") {
    try {
        paired_t({1.0, 2.0}, {1.0});
        FAIL_CHECK("length mismatch must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
    try {
        paired_t({1.0}, {0.5});
        FAIL_CHECK("n = 1 must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
    try {
        paired_t({2.0, 3.0, 4.0}, {1.0, 2.0, 3.0}); // constant nonzero difference
        FAIL_CHECK("zero variance must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroVariance);
    }
}

TEST_CASE("build_contingency reproduces published counts") {
    std::vector<TrialLog> logs;
    auto add = [&](ConditionLabel label, int pressed, int total) {
        for (int i = 0; i < total; ++i) {
            TrialLog log;
            log.participant_id = "p01";
            log.trial_id = condition_label_name(label) + std::to_string(logs.size());
            log.condition = {1, label};
            log.pressed = i < pressed;
            logs.push_back(log);
        }
    };
    add(ConditionLabel::Occlusion, 217, 220);
    add(ConditionLabel::OccludedHazard, 18, 220);

    const ContingencyTable t = build_contingency(
        logs, {ConditionLabel::Occlusion, ConditionLabel::OccludedHazard});
    REQUIRE(t.counts.size() == 2);
    CHECK(t.counts[0][0] == 217);
    CHECK(t.counts[0][1] == 3);
    CHECK(t.counts[1][0] == 18);
    CHECK(t.counts[1][1] == 202);
    CHECK(t.total() == 440);
    CHECK(t.row_names[0] == std::string("Occlusion"));

    const TestResult r = chi_square(t);
    CHECK(std::fabs(r.statistic - 361.69) < 0.05);
}

TEST_CASE("build_contingency edge cases") {
    const ContingencyTable empty =
        build_contingency({}, {ConditionLabel::Occlusion, ConditionLabel::Control});
    CHECK(empty.total() == 0);
    REQUIRE(empty.counts.size() == 2);
    CHECK(empty.counts[0][0] == 0);

    TrialLog log;
    log.condition = {2, ConditionLabel::Control};
    log.pressed = true;
    try {
        build_contingency({log}, {ConditionLabel::Occlusion});
        FAIL_CHECK("unknown condition must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownCondition);
    }

    // Single-condition table flows into the chi-square df = 0 rejection.
    const ContingencyTable one = build_contingency({log}, {ConditionLabel::Control});
    try {
        chi_square(one);
        FAIL_CHECK("df = 0 table must be rejected");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PreconditionViolated);
    }
}

} // TEST_SUITE
