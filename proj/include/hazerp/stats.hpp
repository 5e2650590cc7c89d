#pragma once

#include "hazerp/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hazerp {

// Rows are condition labels, columns are {pressed, not_pressed}.
struct ContingencyTable {
    std::vector<std::string> row_names;
    std::vector<std::vector<long long>> counts;
    long long total() const;
};

struct TestResult {
    double statistic = 0.0;
    long long df = 0;
    double p_two_tailed = 1.0;
    std::optional<double> effect_size;
};

// Pearson chi-square test of independence, no continuity correction.
// Requires every expected cell count to be positive.
TestResult chi_square(const ContingencyTable& table);

// Paired t-test on x - y with n-1 variance denominator; effect_size is
// paired Cohen's d = mean(diff)/sd(diff). Identical samples give t = 0,
// p = 1, d = 0; zero sd with nonzero mean is an error.
TestResult paired_t(const std::vector<double>& x, const std::vector<double>& y);

// One-sided survival function of Student's t, absolute error < 1e-10.
double t_sf(double t, long long df);

// Survival function of the chi-square distribution, absolute error < 1e-10.
double chisq_sf(double x, long long df);

ContingencyTable build_contingency(const std::vector<TrialLog>& logs,
                                   const std::vector<ConditionLabel>& conditions);

} // namespace hazerp
