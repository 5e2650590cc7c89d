#pragma once

#include "hazerp/erp.hpp"
#include "hazerp/types.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hazerp {

enum class SeriesLabel { Negative, Positive };

// One ERP window at one electrode for one trial.
struct SeriesInstance {
    std::vector<double> values; // microvolts, window samples in recording order
    SeriesLabel label = SeriesLabel::Negative;
    std::string participant_id;
    std::string trial_id;
};

// Random convolution kernel. Weights are mean-centered and out-of-range input
// positions replicate the edge sample, so the response, and therefore every
// feature, is exactly invariant to a constant offset added to the series.
struct RocketKernel {
    std::vector<double> weights; // length 7, 9, or 11; sums to 0 within 1e-9
    double bias = 0.0;
    std::size_t dilation = 1;
    std::size_t padding = 0; // samples each side: 0, or (length-1)*dilation/2
};

struct KernelBank {
    std::vector<RocketKernel> kernels;
    std::uint64_t seed = 0;
    std::size_t series_length = 0;
};

// Kernel k depends only on (seed, k); series_length bounds the dilation so the
// dilated kernel always fits. Requires series_length >= 11.
KernelBank make_kernel_bank(std::size_t n_kernels, std::size_t series_length,
                            std::uint64_t seed);

// Per kernel, in bank order: {proportion of responses > 0, maximum response}.
// Feature dimension is 2 * n_kernels.
std::vector<double> kernel_features(const KernelBank& bank,
                                    const std::vector<double>& series);

struct RidgeFit {
    std::vector<double> weights;
    double alpha = 0.0;
    bool alpha_on_boundary = false;
    std::vector<double> gcv; // leave-one-out MSE per grid entry, grid order
};

// Minimizes |y - X w|^2 + alpha |w|^2 with alpha picked from the grid by
// leave-one-out cross-validation in closed form (hat-matrix diagonal);
// no intercept, rows are used as given. Ties pick the first grid entry.
RidgeFit ridge_gcv(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const std::vector<double>& alpha_grid);

// 1e-3 .. 1e3 in decade steps.
std::vector<double> default_alpha_grid();

struct RocketModel {
    KernelBank bank;
    std::vector<double> feature_mean;
    std::vector<double> feature_scale; // zero-variance features get scale 1
    std::vector<double> weights;       // and structurally zero weight
    double intercept = 0.0; // carried as a constant ridge feature; zero up
                            // to rounding for the zero-sum targets fit uses
    double alpha = 0.0;
    bool alpha_on_boundary = false;
    std::size_t n_train = 0;
    std::uint64_t train_seed = 0;
    std::string electrode;
    std::string task_name;
    std::string positive_class;
    std::string negative_class;
};

struct FitOptions {
    std::size_t n_kernels = 1000;
    std::vector<double> alpha_grid; // empty means default_alpha_grid()
    std::uint64_t seed = 0;
    int jobs = 1; // feature rows are deposited by index, so jobs never
                  // changes the result
    std::string electrode;
    std::string task_name;
    std::string positive_class = "positive";
    std::string negative_class = "negative";
};

// Class imbalance is absorbed by the regression targets (+-1 scaled inversely
// to class frequency), which also forces the intercept to zero.
RocketModel fit(const std::vector<SeriesInstance>& train, const FitOptions& options);

struct Prediction {
    SeriesLabel label = SeriesLabel::Negative;
    double score = 0.0; // ridge decision value; positive class iff score > 0
};

std::vector<Prediction> predict(const RocketModel& model,
                                const std::vector<SeriesInstance>& instances);

struct EvalResult {
    double accuracy = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

EvalResult evaluate(const RocketModel& model, const std::vector<SeriesInstance>& test);

enum class TaskKind {
    // P400 window; occlusion and occluded-pedestrian trials pooled as the
    // positive class against control.
    OcclusionVsControl,
    // N500 window; occluded-pedestrian trials against control.
    PedestrianVsControl,
};

const char* task_kind_name(TaskKind kind);
// The analysis window the task slices; the electrode is chosen separately.
ErpWindow task_window(TaskKind kind);

struct SplitSpec {
    std::size_t n_train = 16; // per participant per condition
    std::size_t n_test = 4;
    std::uint64_t selection_seed = 0;
};

struct TaskData {
    std::vector<SeriesInstance> train;
    std::vector<SeriesInstance> test;
    std::size_t n_train_positive = 0;
    std::size_t n_train_negative = 0;
    std::size_t n_test_positive = 0;
    std::size_t n_test_negative = 0;
    std::string positive_class;
    std::string negative_class;
};

// Slices the task's window at `electrode` from every matching baseline-
// corrected epoch, then draws n_train + n_test trials per participant per
// condition with a seeded shuffle; surplus trials are left out entirely.
TaskData make_task(const std::vector<Epoch>& epochs, TaskKind kind,
                   const std::string& electrode, const SplitSpec& split);

// Versioned self-describing text format; load(save(m)) reproduces predictions
// bit-identically.
void save_model(const RocketModel& model, const std::string& path);
RocketModel load_model(const std::string& path);

} // namespace hazerp
