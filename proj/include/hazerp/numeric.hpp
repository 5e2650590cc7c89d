#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace hazerp {

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse);

std::size_t next_pow2(std::size_t n);

// Dense symmetric matrix stored row-major.
struct SymEigen {
    std::vector<double> values;  // descending
    std::vector<double> vectors; // column j = eigenvector of values[j], row-major n x n
};

// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix.
SymEigen sym_eigen(const std::vector<double>& a, std::size_t n);

// Solves A x = b for dense square A by partial-pivot Gaussian elimination.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b,
                                 std::size_t n);

double mean_of(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v); // n-1 denominator
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Inverse standard normal CDF; p must lie in (0, 1).
double normal_quantile(double p);

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
// Strict parse of a full token; throws Error(ParseError) on failure.
double parse_double(const std::string& token, const std::string& context);
long long parse_int(const std::string& token, const std::string& context);

std::vector<std::string> split_csv(const std::string& line);

// Writes via a temp file in the same directory plus an atomic rename, so a
// crash mid-write never leaves a truncated file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Runs fn(0..count-1) on up to `jobs` threads. Tasks must be independent and
// deposit results by index so output does not depend on scheduling.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn);

} // namespace hazerp
