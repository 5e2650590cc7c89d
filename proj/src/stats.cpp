#include "hazerp/stats.hpp"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace hazerp {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// Regularized incomplete beta I_x(a, b).
double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

// Regularized lower incomplete gamma P(a, x) by series; requires x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 0; n < 1000; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction (Lentz);
// requires x >= a + 1.
double gamma_q_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

long long ContingencyTable::total() const {
    long long n = 0;
    for (const auto& row : counts)
        for (long long cell : row) n += cell;
    return n;
}

double chisq_sf(double x, long long df) {
    if (df < 1) raise(ErrorCode::PreconditionViolated, "chisq_sf: df must be >= 1");
    if (x < 0.0) raise(ErrorCode::PreconditionViolated, "chisq_sf: x must be >= 0");
    const double a = static_cast<double>(df) / 2.0;
    const double hx = x / 2.0;
    if (hx == 0.0) return 1.0;
    if (hx < a + 1.0) return 1.0 - gamma_p_series(a, hx);
    return gamma_q_cf(a, hx);
}

double t_sf(double t, long long df) {
    if (df < 1) raise(ErrorCode::PreconditionViolated, "t_sf: df must be >= 1");
    const double n = static_cast<double>(df);
    if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
    const double x = n / (n + t * t);
    const double half = 0.5 * inc_beta(n / 2.0, 0.5, x);
    return t >= 0.0 ? half : 1.0 - half;
}

TestResult chi_square(const ContingencyTable& table) {
    const std::size_t rows = table.counts.size();
    if (rows == 0) raise(ErrorCode::PreconditionViolated, "chi_square: empty table");
    const std::size_t cols = table.counts[0].size();
    for (const auto& row : table.counts) {
        if (row.size() != cols)
            raise(ErrorCode::PreconditionViolated, "chi_square: ragged table");
        for (long long cell : row)
            if (cell < 0) raise(ErrorCode::PreconditionViolated, "chi_square: negative count");
    }
    if (rows < 2 || cols < 2)
        raise(ErrorCode::PreconditionViolated, "chi_square: table gives df = 0");

    std::vector<double> row_total(rows, 0.0);
    std::vector<double> col_total(cols, 0.0);
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double cell = static_cast<double>(table.counts[r][c]);
            row_total[r] += cell;
            col_total[c] += cell;
            n += cell;
        }
    }

    double stat = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double expected = n > 0.0 ? row_total[r] * col_total[c] / n : 0.0;
            if (expected <= 0.0)
                raise(ErrorCode::ZeroExpectedCount, "chi_square: expected cell count is zero");
            const double diff = static_cast<double>(table.counts[r][c]) - expected;
            stat += diff * diff / expected;
        }
    }

    TestResult out;
    out.statistic = stat;
    out.df = static_cast<long long>((rows - 1) * (cols - 1));
    out.p_two_tailed = chisq_sf(stat, out.df);
    return out;
}

TestResult paired_t(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        raise(ErrorCode::LengthMismatch, "paired_t: need equal-length samples with n >= 2");
    const std::size_t n = x.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - y[i];
    const double m = mean_of(diff);
    const double sd = sample_sd(diff);

    TestResult out;
    out.df = static_cast<long long>(n - 1);
    if (sd == 0.0) {
        if (m != 0.0)
            raise(ErrorCode::ZeroVariance, "paired_t: identical differences with nonzero mean");
        out.statistic = 0.0;
        out.p_two_tailed = 1.0;
        out.effect_size = 0.0;
        return out;
    }
    out.statistic = m / (sd / std::sqrt(static_cast<double>(n)));
    out.p_two_tailed = 2.0 * t_sf(std::fabs(out.statistic), out.df);
    out.effect_size = m / sd;
    return out;
}

ContingencyTable build_contingency(const std::vector<TrialLog>& logs,
                                   const std::vector<ConditionLabel>& conditions) {
    ContingencyTable table;
    table.row_names.reserve(conditions.size());
    for (ConditionLabel c : conditions) table.row_names.push_back(condition_label_name(c));
    table.counts.assign(conditions.size(), std::vector<long long>(2, 0));
    for (const TrialLog& log : logs) {
        const auto it = std::find(conditions.begin(), conditions.end(), log.condition.label);
        if (it == conditions.end())
            raise(ErrorCode::UnknownCondition,
                  "build_contingency: trial " + log.trial_id +
                      " has condition outside the requested list");
        const std::size_t row = static_cast<std::size_t>(it - conditions.begin());
        table.counts[row][log.pressed ? 0 : 1] += 1;
    }
    return table;
}

} // namespace hazerp
