#include "doctest.h"

#include "hazerp/erp.hpp"
#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"
#include "hazerp/rng.hpp"
#include "hazerp/tsc.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

using namespace hazerp;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

std::vector<double> noise_series(Rng& rng, double sigma = 1.0, std::size_t n = 100) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, sigma);
    return v;
}

// Gaussian bump centered mid-series; shape, not level, separates the classes
// because the kernel features ignore constant offsets.
void add_bump(std::vector<double>& v, double amplitude) {
    for (std::size_t t = 0; t < v.size(); ++t) {
        const double z = (static_cast<double>(t) - 50.0) / 12.0;
        v[t] += amplitude * std::exp(-0.5 * z * z);
    }
}

SeriesInstance instance(std::vector<double> values, SeriesLabel label,
                        const std::string& trial) {
    SeriesInstance inst;
    inst.values = std::move(values);
    inst.label = label;
    inst.participant_id = "P01";
    inst.trial_id = trial;
    return inst;
}

// Balanced two-class set; positives carry the bump.
std::vector<SeriesInstance> bump_set(std::size_t per_class, double amplitude,
                                     double sigma, Rng& rng, const std::string& tag) {
    std::vector<SeriesInstance> out;
    out.reserve(2 * per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        std::vector<double> pos = noise_series(rng, sigma);
        add_bump(pos, amplitude);
        out.push_back(instance(std::move(pos), SeriesLabel::Positive,
                               tag + "_pos" + std::to_string(i)));
        out.push_back(instance(noise_series(rng, sigma), SeriesLabel::Negative,
                               tag + "_neg" + std::to_string(i)));
    }
    return out;
}

// Ridge weights by the primal normal equations, independent of the dual path.
std::vector<double> oracle_ridge(const std::vector<std::vector<double>>& rows,
                                 const std::vector<double>& y, double alpha) {
    const std::size_t n = rows.size();
    const std::size_t p = rows[0].size();
    std::vector<double> a(p * p, 0.0);
    std::vector<double> b(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < p; ++f) {
            b[f] += rows[i][f] * y[i];
            for (std::size_t g = 0; g < p; ++g) a[f * p + g] += rows[i][f] * rows[i][g];
        }
    }
    for (std::size_t f = 0; f < p; ++f) a[f * p + f] += alpha;
    return solve_linear(a, b, p);
}

// Leave-one-out MSE by its definition: refit without row i, predict row i.
double oracle_loocv(const std::vector<std::vector<double>>& rows,
                    const std::vector<double>& y, double alpha) {
    const std::size_t n = rows.size();
    const std::size_t p = rows[0].size();
    double press = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> held_rows;
        std::vector<double> held_y;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            held_rows.push_back(rows[j]);
            held_y.push_back(y[j]);
        }
        const std::vector<double> w = oracle_ridge(held_rows, held_y, alpha);
        double yhat = 0.0;
        for (std::size_t f = 0; f < p; ++f) yhat += rows[i][f] * w[f];
        press += (y[i] - yhat) * (y[i] - yhat);
    }
    return press / static_cast<double>(n);
}

// A model whose decision value is identically zero, for tie-break checks.
RocketModel zero_model() {
    RocketModel model;
    model.bank = make_kernel_bank(4, 100, 1);
    model.feature_mean.assign(8, 0.0);
    model.feature_scale.assign(8, 1.0);
    model.weights.assign(8, 0.0);
    return model;
}

// Experiment-2 cohort with ramp waveforms so window slices are predictable:
// FPz carries the sample index, AF3 twice the sample index.
std::vector<Epoch> cohort_epochs(std::size_t n_participants, std::size_t per_condition,
                                 bool corrected = true) {
    const std::vector<ConditionLabel> all = experiment_labels(2);
    std::vector<Epoch> epochs;
    for (std::size_t p = 0; p < n_participants; ++p) {
        const std::string pid = "P" + std::to_string(p + 1);
        for (const ConditionLabel label : all) {
            for (std::size_t t = 0; t < per_condition; ++t) {
                Epoch e;
                e.participant_id = pid;
                e.trial_id = pid + "_" + condition_label_name(label) + "_" + std::to_string(t);
                e.clip_id = "clip";
                e.condition = {2, label};
                e.channels = {"FPz", "AF3"};
                e.samples.assign(2, std::vector<double>(1100));
                for (std::size_t s = 0; s < 1100; ++s) {
                    e.samples[0][s] = static_cast<double>(s);
                    e.samples[1][s] = 2.0 * static_cast<double>(s);
                }
                e.baseline_corrected = corrected;
                epochs.push_back(std::move(e));
            }
        }
    }
    return epochs;
}

std::set<std::string> trial_ids(const std::vector<SeriesInstance>& instances) {
    std::set<std::string> ids;
    for (const auto& inst : instances) ids.insert(inst.trial_id);
    return ids;
}

} // namespace

TEST_SUITE("tsc") {

TEST_CASE("kernel banks are reproducible and honor the sampling invariants") {
    const KernelBank bank = make_kernel_bank(400, 100, 99);
    REQUIRE(bank.kernels.size() == 400);
    CHECK(bank.series_length == 100);
    std::set<std::size_t> lengths;
    bool saw_padding = false;
    bool saw_no_padding = false;
    bool saw_dilation = false;
    for (const auto& k : bank.kernels) {
        lengths.insert(k.weights.size());
        CHECK((k.weights.size() == 7 || k.weights.size() == 9 || k.weights.size() == 11));
        double sum = 0.0;
        for (double w : k.weights) sum += w;
        CHECK(std::abs(sum) <= 1e-9);
        CHECK(k.bias >= -1.0);
        CHECK(k.bias < 1.0);
        CHECK(k.dilation >= 1);
        CHECK((k.weights.size() - 1) * k.dilation <= 99);
        const std::size_t half = (k.weights.size() - 1) * k.dilation / 2;
        CHECK((k.padding == 0 || k.padding == half));
        if (k.padding == 0) saw_no_padding = true;
        else saw_padding = true;
        if (k.dilation > 1) saw_dilation = true;
    }
    CHECK(lengths.size() == 3);
    CHECK(saw_padding);
    CHECK(saw_no_padding);
    CHECK(saw_dilation);

    const KernelBank again = make_kernel_bank(400, 100, 99);
    for (std::size_t k = 0; k < 400; ++k) {
        CHECK(again.kernels[k].weights == bank.kernels[k].weights);
        CHECK(again.kernels[k].bias == bank.kernels[k].bias);
        CHECK(again.kernels[k].dilation == bank.kernels[k].dilation);
        CHECK(again.kernels[k].padding == bank.kernels[k].padding);
    }

    // Kernel k depends on (seed, k) alone, so a shorter bank is a prefix.
    const KernelBank prefix = make_kernel_bank(7, 100, 99);
    CHECK(prefix.kernels[5].weights == bank.kernels[5].weights);
    CHECK(prefix.kernels[5].bias == bank.kernels[5].bias);

    const KernelBank other = make_kernel_bank(400, 100, 100);
    bool any_difference = false;
    for (std::size_t k = 0; k < 400 && !any_difference; ++k)
        any_difference = other.kernels[k].weights != bank.kernels[k].weights;
    CHECK(any_difference);
}

TEST_CASE("features and predictions ignore a constant series offset") {
    Rng rng(11);
    const std::vector<double> base = noise_series(rng, 3.0);
    std::vector<double> shifted = base;
    for (auto& v : shifted) v += 7.3;

    const KernelBank bank = make_kernel_bank(300, 100, 5);
    const std::vector<double> fa = kernel_features(bank, base);
    const std::vector<double> fb = kernel_features(bank, shifted);
    REQUIRE(fa.size() == 600);
    for (std::size_t i = 0; i < fa.size(); ++i) CHECK(std::abs(fa[i] - fb[i]) <= 1e-9);

    Rng train_rng(12);
    FitOptions options;
    options.n_kernels = 100;
    options.seed = 4;
    const RocketModel model = fit(bump_set(20, 6.0, 0.5, train_rng, "off"), options);
    const auto pa = predict(model, {instance(base, SeriesLabel::Negative, "a")});
    const auto pb = predict(model, {instance(shifted, SeriesLabel::Negative, "b")});
    CHECK(pa[0].label == pb[0].label);
    CHECK(pa[0].score == doctest::Approx(pb[0].score).epsilon(1e-6));
}

TEST_CASE("ridge matches the hand-solved normal equations on a 3x2 system") {
    const std::vector<std::vector<double>> rows = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
    const std::vector<double> y = {1.0, 2.0, 3.0};
    const RidgeFit fit = ridge_gcv(rows, y, {0.5});
    // (X^T X + 0.5 I) w = X^T y with X^T X = [[2,1],[1,2]] and X^T y = [4,5]:
    // w = (20/21, 34/21).
    REQUIRE(fit.weights.size() == 2);
    CHECK(fit.weights[0] == doctest::Approx(20.0 / 21.0).epsilon(1e-9));
    CHECK(fit.weights[1] == doctest::Approx(34.0 / 21.0).epsilon(1e-9));
    CHECK(fit.alpha == 0.5);
}

TEST_CASE("ridge agrees with an independent solver across random systems") {
    Rng rng(21);
    const std::vector<double> grid = default_alpha_grid();
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = 3 + rng.below(10);
        const std::size_t p = 1 + rng.below(6);
        std::vector<std::vector<double>> rows(n, std::vector<double>(p));
        std::vector<double> y(n);
        for (auto& row : rows)
            for (auto& v : row) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        const double alpha = grid[rng.below(grid.size())];
        const RidgeFit fit = ridge_gcv(rows, y, {alpha});
        const std::vector<double> want = oracle_ridge(rows, y, alpha);
        for (std::size_t f = 0; f < p; ++f)
            CHECK(fit.weights[f] ==
                  doctest::Approx(want[f]).epsilon(1e-6).scale(std::max(1.0, std::abs(want[f]))));
    }
}

TEST_CASE("alpha selection scores match held-out refits") {
    Rng rng(31);
    std::vector<std::vector<double>> rows(10, std::vector<double>(4));
    std::vector<double> y(10);
    for (auto& row : rows)
        for (auto& v : row) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    const std::vector<double> grid = default_alpha_grid();
    const RidgeFit fit = ridge_gcv(rows, y, grid);
    REQUIRE(fit.gcv.size() == grid.size());
    std::size_t best = 0;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        const double want = oracle_loocv(rows, y, grid[a]);
        CHECK(fit.gcv[a] == doctest::Approx(want).epsilon(1e-9));
        if (want < oracle_loocv(rows, y, grid[best])) best = a;
    }
    CHECK(fit.alpha == grid[best]);
}

TEST_CASE("a constant column keeps alpha selection honest on centered rows") {
    // Column-centered rows satisfy sum_i x_i = 0, so with zero-sum targets
    // every held-out row is predicted exactly by linear dependence and the
    // leave-one-out score collapses to zero at vanishing alpha. Appending a
    // constant column (as fit does) breaks the dependence.
    Rng rng(37);
    const std::size_t n = 24;
    const std::size_t p = 40;
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        y[i] = i % 2 == 0 ? 1.0 : -1.0;
    }
    for (std::size_t f = 0; f < p; ++f) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += rows[i][f];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) rows[i][f] -= mean;
    }
    const std::vector<double> grid = default_alpha_grid();
    const RidgeFit bare = ridge_gcv(rows, y, grid);
    CHECK(bare.alpha == grid.front());
    CHECK(bare.gcv.front() < 1e-3);
    std::vector<std::vector<double>> augmented = rows;
    for (auto& row : augmented) row.push_back(1.0);
    const RidgeFit cured = ridge_gcv(augmented, y, grid);
    CHECK(cured.alpha > grid.front());
    CHECK(cured.gcv.front() > 0.1);
    // Zero-sum targets: the constant column changes selection only, not the
    // fitted coefficients at a fixed alpha, and its own weight stays zero.
    const RidgeFit fixed_bare = ridge_gcv(rows, y, {10.0});
    const RidgeFit fixed_aug = ridge_gcv(augmented, y, {10.0});
    for (std::size_t f = 0; f < p; ++f)
        CHECK(std::abs(fixed_bare.weights[f] - fixed_aug.weights[f]) <= 1e-9);
    CHECK(std::abs(fixed_aug.weights[p]) <= 1e-9);
}

TEST_CASE("gcv picks an interior alpha on a well-conditioned problem") {
    Rng rng(41);
    const std::size_t n = 60;
    const std::size_t p = 8;
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        for (std::size_t f = 0; f < p; ++f)
            y[i] += rows[i][f] * (f % 2 == 0 ? 0.5 : -0.25);
        y[i] += rng.normal(0.0, 0.8);
    }
    const RidgeFit fit = ridge_gcv(rows, y, default_alpha_grid());
    CHECK_FALSE(fit.alpha_on_boundary);
    CHECK(fit.alpha > 1e-3);
    CHECK(fit.alpha < 1e3);
}

TEST_CASE("a separable toy trains to perfect accuracy and re-prediction matches") {
    Rng rng(51);
    const std::vector<SeriesInstance> train = bump_set(30, 8.0, 0.3, rng, "sep");
    FitOptions options;
    options.n_kernels = 150;
    options.seed = 6;
    const RocketModel model = fit(train, options);
    CHECK(model.n_train == 60);
    CHECK(std::abs(model.intercept) <= 1e-12);
    const EvalResult result = evaluate(model, train);
    CHECK(result.accuracy == 1.0);
    const auto preds = predict(model, train);
    for (std::size_t i = 0; i < train.size(); ++i) CHECK(preds[i].label == train[i].label);
}

TEST_CASE("a three-microvolt bump in unit noise is classified above 0.95") {
    Rng rng(61);
    const std::vector<SeriesInstance> train = bump_set(80, 3.0, 1.0, rng, "tr");
    const std::vector<SeriesInstance> test = bump_set(40, 3.0, 1.0, rng, "te");
    FitOptions options;
    options.n_kernels = 300;
    options.seed = 7;
    const RocketModel model = fit(train, options);
    const EvalResult result = evaluate(model, test);
    CHECK(result.accuracy >= 0.95);
    CHECK(result.tp + result.fp + result.tn + result.fn == test.size());
}

TEST_CASE("prediction ties resolve to the negative class") {
    const RocketModel model = zero_model();
    const auto preds =
        predict(model, {instance(std::vector<double>(100, 0.0), SeriesLabel::Positive, "z")});
    CHECK(preds[0].score == 0.0);
    CHECK(preds[0].label == SeriesLabel::Negative);
}

TEST_CASE("an all-negative predictor scores one half on a balanced test set") {
    const RocketModel model = zero_model();
    Rng rng(71);
    std::vector<SeriesInstance> test;
    for (int i = 0; i < 20; ++i) {
        test.push_back(instance(noise_series(rng), SeriesLabel::Positive, "p"));
        test.push_back(instance(noise_series(rng), SeriesLabel::Negative, "n"));
    }
    const EvalResult result = evaluate(model, test);
    CHECK(result.accuracy == 0.5);
    CHECK(result.tp == 0);
    CHECK(result.fp == 0);
    CHECK(result.tn == 20);
    CHECK(result.fn == 20);
}

TEST_CASE("task splits reproduce the 16/4 per-participant protocol") {
    const std::vector<Epoch> epochs = cohort_epochs(10, 22);
    SplitSpec split;
    split.selection_seed = 9;

    const TaskData b = make_task(epochs, TaskKind::PedestrianVsControl, "FPz", split);
    CHECK(b.train.size() == 320);
    CHECK(b.test.size() == 80);
    CHECK(b.n_train_positive == 160);
    CHECK(b.n_train_negative == 160);
    CHECK(b.n_test_positive == 40);
    CHECK(b.n_test_negative == 40);
    CHECK(b.positive_class == "OccludedPedestrian");
    CHECK(b.negative_class == "Control");
    for (const auto& inst : b.train) REQUIRE(inst.values.size() == 100);
    // The N500 window starts 951 samples into a -500 ms epoch; FPz carries the
    // sample index itself.
    for (std::size_t s = 0; s < 100; ++s)
        CHECK(b.train[0].values[s] == static_cast<double>(951 + s));

    const TaskData a = make_task(epochs, TaskKind::OcclusionVsControl, "AF3", split);
    CHECK(a.train.size() == 480);
    CHECK(a.test.size() == 120);
    CHECK(a.n_train_positive == 2 * a.n_train_negative);
    CHECK(a.n_test_positive == 2 * a.n_test_negative);
    CHECK(a.positive_class == "Occlusion+OccludedPedestrian");
    // P400 window at AF3: twice the sample index from 851.
    for (std::size_t s = 0; s < 100; ++s)
        CHECK(a.train[0].values[s] == 2.0 * static_cast<double>(851 + s));
    bool saw_occlusion = false;
    for (const auto& inst : a.train)
        if (inst.trial_id.find("Occlusion") != std::string::npos) saw_occlusion = true;
    CHECK(saw_occlusion);
}

TEST_CASE("task splits are seeded, disjoint, and leave surplus trials out") {
    const std::vector<Epoch> epochs = cohort_epochs(4, 23);
    SplitSpec split;
    split.selection_seed = 17;
    const TaskData first = make_task(epochs, TaskKind::PedestrianVsControl, "FPz", split);
    const TaskData second = make_task(epochs, TaskKind::PedestrianVsControl, "FPz", split);
    REQUIRE(first.train.size() == second.train.size());
    for (std::size_t i = 0; i < first.train.size(); ++i)
        CHECK(first.train[i].trial_id == second.train[i].trial_id);
    for (std::size_t i = 0; i < first.test.size(); ++i)
        CHECK(first.test[i].trial_id == second.test[i].trial_id);

    const std::set<std::string> train_ids = trial_ids(first.train);
    const std::set<std::string> test_ids = trial_ids(first.test);
    CHECK(train_ids.size() == first.train.size());
    CHECK(test_ids.size() == first.test.size());
    for (const auto& id : test_ids) CHECK(train_ids.count(id) == 0);
    // 23 trials per condition, 20 drawn: 3 surplus trials stay out entirely.
    CHECK(train_ids.size() + test_ids.size() == 4 * 2 * 20);

    SplitSpec reseeded;
    reseeded.selection_seed = 18;
    const TaskData third = make_task(epochs, TaskKind::PedestrianVsControl, "FPz", reseeded);
    CHECK(trial_ids(third.train) != train_ids);
}

TEST_CASE("a participant short on one condition is reported by name") {
    std::vector<Epoch> epochs = cohort_epochs(3, 21);
    // Drop P2's Occlusion trials down to 10.
    std::vector<Epoch> pruned;
    std::size_t kept = 0;
    for (auto& e : epochs) {
        const bool p2_occlusion =
            e.participant_id == "P2" && e.condition.label == ConditionLabel::Occlusion;
        if (p2_occlusion && ++kept > 10) continue;
        pruned.push_back(std::move(e));
    }
    try {
        make_task(pruned, TaskKind::OcclusionVsControl, "FPz", SplitSpec{});
        FAIL("expected InsufficientTrials");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientTrials);
        const std::string what = e.what();
        CHECK(what.find("P2") != std::string::npos);
        CHECK(what.find("Occlusion") != std::string::npos);
        CHECK(what.find("need 20") != std::string::npos);
    }
    // Task (b) never touches Occlusion counts, so the same cohort still splits.
    const TaskData b = make_task(pruned, TaskKind::PedestrianVsControl, "FPz", SplitSpec{});
    CHECK(b.train.size() == 96);
}

TEST_CASE("classification inputs must be baseline corrected") {
    const std::vector<Epoch> raw = cohort_epochs(2, 20, false);
    CHECK(code_of([&] {
              make_task(raw, TaskKind::PedestrianVsControl, "FPz", SplitSpec{});
          }) == ErrorCode::NotBaselineCorrected);
}

TEST_CASE("model files round-trip bit-identically and reject damage") {
    TempDir dir("hazerp_tsc_models");
    Rng rng(81);
    const std::vector<SeriesInstance> train = bump_set(12, 4.0, 0.8, rng, "rt");
    const std::vector<SeriesInstance> probe = bump_set(8, 4.0, 0.8, rng, "pr");
    FitOptions options;
    options.n_kernels = 50;
    options.seed = 13;
    options.electrode = "AF3";
    options.task_name = task_kind_name(TaskKind::PedestrianVsControl);
    options.positive_class = "OccludedPedestrian";
    options.negative_class = "Control";
    const RocketModel model = fit(train, options);

    const std::string path = dir.file("model.txt");
    save_model(model, path);
    const RocketModel loaded = load_model(path);
    CHECK(loaded.task_name == model.task_name);
    CHECK(loaded.electrode == "AF3");
    CHECK(loaded.alpha == model.alpha);
    CHECK(loaded.n_train == model.n_train);
    CHECK(loaded.train_seed == model.train_seed);
    CHECK(loaded.weights == model.weights);
    CHECK(loaded.feature_mean == model.feature_mean);
    CHECK(loaded.feature_scale == model.feature_scale);
    const auto before = predict(model, probe);
    const auto after = predict(loaded, probe);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        CHECK(before[i].score == after[i].score);
        CHECK(before[i].label == after[i].label);
    }

    const std::string text = read_file(path);
    write_file_atomic(dir.file("wrong_magic.txt"), "ROCKETv2\n" + text.substr(text.find('\n') + 1));
    CHECK(code_of([&] { load_model(dir.file("wrong_magic.txt")); }) ==
          ErrorCode::VersionMismatch);

    write_file_atomic(dir.file("truncated.txt"), text.substr(0, text.size() / 2));
    CHECK(code_of([&] { load_model(dir.file("truncated.txt")); }) == ErrorCode::CorruptModel);

    write_file_atomic(dir.file("empty.txt"), "");
    CHECK(code_of([&] { load_model(dir.file("empty.txt")); }) == ErrorCode::CorruptModel);

    CHECK(code_of([&] { load_model(dir.file("absent.txt")); }) == ErrorCode::ModelMissing);
}

TEST_CASE("label-shuffled training stays at chance on held-out data") {
    for (const std::uint64_t seed : {91u, 92u, 93u}) {
        Rng rng(seed);
        std::vector<SeriesInstance> train;
        for (int i = 0; i < 160; ++i)
            train.push_back(instance(noise_series(rng),
                                     i % 2 == 0 ? SeriesLabel::Positive : SeriesLabel::Negative,
                                     "tr" + std::to_string(i)));
        std::vector<SeriesInstance> test;
        for (int i = 0; i < 80; ++i)
            test.push_back(instance(noise_series(rng),
                                    i % 2 == 0 ? SeriesLabel::Positive : SeriesLabel::Negative,
                                    "te" + std::to_string(i)));
        FitOptions options;
        options.n_kernels = 200;
        options.seed = seed;
        const EvalResult result = evaluate(fit(train, options), test);
        CHECK(result.accuracy >= 0.30);
        CHECK(result.accuracy <= 0.70);
    }
}

TEST_CASE("degenerate and mismatched inputs raise typed errors") {
    Rng rng(101);
    std::vector<SeriesInstance> one_sided;
    for (int i = 0; i < 6; ++i)
        one_sided.push_back(instance(noise_series(rng), SeriesLabel::Positive, "p"));
    CHECK(code_of([&] { fit(one_sided, FitOptions{}); }) == ErrorCode::DegenerateLabels);
    one_sided.push_back(instance(noise_series(rng), SeriesLabel::Negative, "n"));
    CHECK(code_of([&] { fit(one_sided, FitOptions{}); }) == ErrorCode::DegenerateLabels);

    std::vector<SeriesInstance> ragged = bump_set(3, 2.0, 1.0, rng, "rg");
    ragged[2].values.resize(60);
    CHECK(code_of([&] { fit(ragged, FitOptions{}); }) == ErrorCode::LengthMismatch);

    FitOptions small;
    small.n_kernels = 20;
    const RocketModel model = fit(bump_set(4, 2.0, 1.0, rng, "ok"), small);
    CHECK(code_of([&] {
              predict(model, {instance(std::vector<double>(50, 0.0), SeriesLabel::Negative, "s")});
          }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { evaluate(model, {}); }) == ErrorCode::PreconditionViolated);

    CHECK(code_of([&] { make_kernel_bank(0, 100, 1); }) == ErrorCode::PreconditionViolated);
    CHECK(code_of([&] { make_kernel_bank(10, 5, 1); }) == ErrorCode::PreconditionViolated);
    CHECK(code_of([&] { ridge_gcv({{1.0}}, {1.0}, {}); }) == ErrorCode::PreconditionViolated);
    CHECK(code_of([&] { ridge_gcv({{1.0}}, {1.0, 2.0}, {1.0}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("feature rows computed in parallel match the serial result") {
    Rng rng(111);
    const std::vector<SeriesInstance> train = bump_set(20, 3.0, 1.0, rng, "par");
    FitOptions serial;
    serial.n_kernels = 120;
    serial.seed = 19;
    serial.jobs = 1;
    FitOptions threaded = serial;
    threaded.jobs = 4;
    const RocketModel a = fit(train, serial);
    const RocketModel b = fit(train, threaded);
    CHECK(a.alpha == b.alpha);
    CHECK(a.weights == b.weights);
    CHECK(a.feature_mean == b.feature_mean);
    CHECK(a.feature_scale == b.feature_scale);
    const std::vector<SeriesInstance> probe = {train[0], train[1]};
    const auto pa = predict(a, probe);
    const auto pb = predict(b, probe);
    for (std::size_t i = 0; i < probe.size(); ++i) CHECK(pa[i].score == pb[i].score);
}

} // TEST_SUITE
