#include "hazerp/tsc.hpp"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"
#include "hazerp/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hazerp {

namespace {

// Response at every output position, bias included. Out-of-range positions
// replicate the edge sample so a constant offset on the series cancels
// against the zero-sum weights everywhere, not just in the interior.
std::vector<double> kernel_response(const RocketKernel& kernel,
                                    const std::vector<double>& series) {
    const auto n = static_cast<std::ptrdiff_t>(series.size());
    const auto klen = static_cast<std::ptrdiff_t>(kernel.weights.size());
    const auto dil = static_cast<std::ptrdiff_t>(kernel.dilation);
    const auto pad = static_cast<std::ptrdiff_t>(kernel.padding);
    const std::ptrdiff_t out_len = n + 2 * pad - (klen - 1) * dil;
    std::vector<double> out(static_cast<std::size_t>(out_len));
    for (std::ptrdiff_t i = 0; i < out_len; ++i) {
        double acc = kernel.bias;
        std::ptrdiff_t idx = i - pad;
        for (std::ptrdiff_t j = 0; j < klen; ++j, idx += dil) {
            const std::ptrdiff_t c = std::clamp<std::ptrdiff_t>(idx, 0, n - 1);
            acc += kernel.weights[static_cast<std::size_t>(j)] *
                   series[static_cast<std::size_t>(c)];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

} // namespace

KernelBank make_kernel_bank(std::size_t n_kernels, std::size_t series_length,
                            std::uint64_t seed) {
    if (n_kernels == 0) raise(ErrorCode::PreconditionViolated, "n_kernels must be positive");
    if (series_length < 11)
        raise(ErrorCode::PreconditionViolated,
              "series length must be at least 11, got " + std::to_string(series_length));
    KernelBank bank;
    bank.seed = seed;
    bank.series_length = series_length;
    bank.kernels.reserve(n_kernels);
    static constexpr std::size_t kLengths[3] = {7, 9, 11};
    for (std::size_t k = 0; k < n_kernels; ++k) {
        Rng rng(derive_seed(seed, hash_tag("kernel"), 0, k));
        RocketKernel kernel;
        const std::size_t klen = kLengths[rng.below(3)];
        kernel.weights.resize(klen);
        double sum = 0.0;
        for (auto& w : kernel.weights) {
            w = rng.normal();
            sum += w;
        }
        const double mean = sum / static_cast<double>(klen);
        for (auto& w : kernel.weights) w -= mean;
        kernel.bias = rng.uniform(-1.0, 1.0);
        // Exponent below log2((L-1)/(klen-1)) keeps the dilated span inside
        // the series for every draw.
        const double max_exp = std::log2(static_cast<double>(series_length - 1) /
                                         static_cast<double>(klen - 1));
        kernel.dilation =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::exp2(rng.uniform(0.0, max_exp))));
        kernel.padding = rng.uniform() < 0.5 ? (klen - 1) * kernel.dilation / 2 : 0;
        bank.kernels.push_back(std::move(kernel));
    }
    return bank;
}

std::vector<double> kernel_features(const KernelBank& bank,
                                    const std::vector<double>& series) {
    if (series.size() != bank.series_length)
        raise(ErrorCode::LengthMismatch,
              "series has " + std::to_string(series.size()) + " samples, kernel bank expects " +
                  std::to_string(bank.series_length));
    std::vector<double> features;
    features.reserve(2 * bank.kernels.size());
    for (const auto& kernel : bank.kernels) {
        const std::vector<double> response = kernel_response(kernel, series);
        std::size_t positive = 0;
        double peak = -std::numeric_limits<double>::infinity();
        for (double r : response) {
            if (r > 0.0) ++positive;
            peak = std::max(peak, r);
        }
        features.push_back(static_cast<double>(positive) /
                           static_cast<double>(response.size()));
        features.push_back(peak);
    }
    return features;
}

std::vector<double> default_alpha_grid() {
    return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
}

RidgeFit ridge_gcv(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const std::vector<double>& alpha_grid) {
    const std::size_t n = rows.size();
    if (n == 0) raise(ErrorCode::PreconditionViolated, "ridge requires at least one row");
    const std::size_t p = rows[0].size();
    for (const auto& row : rows)
        if (row.size() != p)
            raise(ErrorCode::LengthMismatch, "ridge rows must all share one length");
    if (targets.size() != n)
        raise(ErrorCode::LengthMismatch,
              "ridge needs one target per row, got " + std::to_string(targets.size()) +
                  " targets for " + std::to_string(n) + " rows");
    if (alpha_grid.empty())
        raise(ErrorCode::PreconditionViolated, "alpha grid must be non-empty");
    for (double alpha : alpha_grid)
        if (!(alpha > 0.0))
            raise(ErrorCode::PreconditionViolated, "alpha values must be positive");

    // Dual form: the Gram matrix is n x n regardless of the feature count and
    // w = X^T (X X^T + alpha I)^{-1} y reproduces the primal solution exactly,
    // so one eigendecomposition serves the whole alpha grid.
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t f = 0; f < p; ++f) dot += rows[i][f] * rows[j][f];
            gram[i * n + j] = dot;
            gram[j * n + i] = dot;
        }
    }
    const SymEigen eig = sym_eigen(gram, n);
    std::vector<double> rotated(n, 0.0); // Q^T y
    for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += eig.vectors[i * n + j] * targets[i];
        rotated[j] = dot;
    }

    RidgeFit fit;
    fit.gcv.reserve(alpha_grid.size());
    std::size_t best = 0;
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
        const double alpha = alpha_grid[a];
        // Exact leave-one-out residuals e_i = r_i / (1 - H_ii) from the hat
        // matrix H = Q diag(lambda/(lambda+alpha)) Q^T. The trace-averaged
        // form degenerates to the no-shrinkage boundary whenever centered
        // features can interpolate the targets, so the per-sample diagonal
        // is used, as in standard ridge cross-validation implementations.
        double press = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double residual = 0.0;
            double leverage = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double lambda = std::max(eig.values[j], 0.0);
                const double q = eig.vectors[i * n + j];
                residual += q * (alpha / (lambda + alpha)) * rotated[j];
                leverage += q * q * (lambda / (lambda + alpha));
            }
            const double kept = 1.0 - leverage;
            if (kept <= 1e-12) {
                press = std::numeric_limits<double>::infinity();
                break;
            }
            const double e = residual / kept;
            press += e * e;
        }
        const double score = press / static_cast<double>(n);
        fit.gcv.push_back(score);
        if (score < fit.gcv[best]) best = a;
    }
    fit.alpha = alpha_grid[best];
    fit.alpha_on_boundary =
        alpha_grid.size() > 1 && (best == 0 || best + 1 == alpha_grid.size());

    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i)
        scaled[i] = rotated[i] / (std::max(eig.values[i], 0.0) + fit.alpha);
    std::vector<double> coef(n, 0.0); // (K + alpha I)^{-1} y
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += eig.vectors[i * n + j] * scaled[j];
        coef[i] = dot;
    }
    fit.weights.assign(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = coef[i];
        for (std::size_t f = 0; f < p; ++f) fit.weights[f] += c * rows[i][f];
    }
    return fit;
}

RocketModel fit(const std::vector<SeriesInstance>& train, const FitOptions& options) {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    for (const auto& inst : train)
        (inst.label == SeriesLabel::Positive ? n_pos : n_neg) += 1;
    if (n_pos < 2 || n_neg < 2)
        raise(ErrorCode::DegenerateLabels,
              "training needs at least two instances per class, got " +
                  std::to_string(n_pos) + " positive and " + std::to_string(n_neg) +
                  " negative");
    const std::size_t length = train[0].values.size();
    for (const auto& inst : train)
        if (inst.values.size() != length)
            raise(ErrorCode::LengthMismatch,
                  "training instance " + inst.trial_id + " has " +
                      std::to_string(inst.values.size()) + " samples, expected " +
                      std::to_string(length));

    RocketModel model;
    model.bank = make_kernel_bank(options.n_kernels, length, options.seed);
    const std::size_t n = train.size();
    const std::size_t p = 2 * options.n_kernels;
    std::vector<std::vector<double>> features(n);
    parallel_for(n, options.jobs, [&](std::size_t i) {
        features[i] = kernel_features(model.bank, train[i].values);
    });

    model.feature_mean.assign(p, 0.0);
    model.feature_scale.assign(p, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < p; ++f) model.feature_mean[f] += features[i][f];
    for (double& m : model.feature_mean) m /= static_cast<double>(n);
    if (n > 1) {
        std::vector<double> var(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < p; ++f) {
                const double d = features[i][f] - model.feature_mean[f];
                var[f] += d * d;
            }
        }
        for (std::size_t f = 0; f < p; ++f) {
            const double sd = std::sqrt(var[f] / static_cast<double>(n - 1));
            // A constant feature stays centered to zero, so its ridge weight
            // is structurally zero; scale 1 just avoids dividing by zero.
            if (sd > 0.0 && std::isfinite(sd)) model.feature_scale[f] = sd;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < p; ++f)
            features[i][f] = (features[i][f] - model.feature_mean[f]) / model.feature_scale[f];

    // Zero-sum class-weighted targets keep the two classes' pull equal under
    // imbalance and make the centered-feature intercept exactly zero.
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i)
        targets[i] = train[i].label == SeriesLabel::Positive
                         ? static_cast<double>(n) / (2.0 * static_cast<double>(n_pos))
                         : -static_cast<double>(n) / (2.0 * static_cast<double>(n_neg));

    // The intercept rides along as a constant ridge feature. Centered columns
    // make every row the negative sum of the others, so without this column
    // the held-out row of a zero-sum target vector is predicted exactly by
    // linear dependence and leave-one-out collapses to the no-shrinkage
    // boundary. The constant column breaks the dependence; for zero-sum
    // targets it leaves the kernel-feature weights unchanged and its own
    // weight, the intercept, at zero up to rounding.
    for (std::size_t i = 0; i < n; ++i) features[i].push_back(1.0);
    const RidgeFit ridge = ridge_gcv(
        features, targets, options.alpha_grid.empty() ? default_alpha_grid() : options.alpha_grid);
    model.weights.assign(ridge.weights.begin(), ridge.weights.begin() + static_cast<std::ptrdiff_t>(p));
    model.intercept = ridge.weights[p];
    model.alpha = ridge.alpha;
    model.alpha_on_boundary = ridge.alpha_on_boundary;
    model.n_train = n;
    model.train_seed = options.seed;
    model.electrode = options.electrode;
    model.task_name = options.task_name;
    model.positive_class = options.positive_class;
    model.negative_class = options.negative_class;
    return model;
}

std::vector<Prediction> predict(const RocketModel& model,
                                const std::vector<SeriesInstance>& instances) {
    std::vector<Prediction> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        if (inst.values.size() != model.bank.series_length)
            raise(ErrorCode::LengthMismatch,
                  "instance " + inst.trial_id + " has " + std::to_string(inst.values.size()) +
                      " samples, model expects " + std::to_string(model.bank.series_length));
        const std::vector<double> features = kernel_features(model.bank, inst.values);
        double score = model.intercept;
        for (std::size_t f = 0; f < features.size(); ++f)
            score += (features[f] - model.feature_mean[f]) / model.feature_scale[f] *
                     model.weights[f];
        Prediction pred;
        pred.score = score;
        pred.label = score > 0.0 ? SeriesLabel::Positive : SeriesLabel::Negative;
        out.push_back(pred);
    }
    return out;
}

EvalResult evaluate(const RocketModel& model, const std::vector<SeriesInstance>& test) {
    if (test.empty())
        raise(ErrorCode::PreconditionViolated, "evaluate requires a non-empty test set");
    const std::vector<Prediction> preds = predict(model, test);
    EvalResult result;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const bool truth = test[i].label == SeriesLabel::Positive;
        const bool called = preds[i].label == SeriesLabel::Positive;
        if (truth && called) ++result.tp;
        else if (!truth && called) ++result.fp;
        else if (!truth && !called) ++result.tn;
        else ++result.fn;
    }
    result.accuracy =
        static_cast<double>(result.tp + result.tn) / static_cast<double>(test.size());
    return result;
}

const char* task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::OcclusionVsControl: return "occlusion_vs_control";
        case TaskKind::PedestrianVsControl: return "pedestrian_vs_control";
    }
    return "?";
}

ErpWindow task_window(TaskKind kind) {
    return kind == TaskKind::OcclusionVsControl ? p400_window() : n500_window();
}

TaskData make_task(const std::vector<Epoch>& epochs, TaskKind kind,
                   const std::string& electrode, const SplitSpec& split) {
    if (split.n_train == 0)
        raise(ErrorCode::PreconditionViolated, "split must keep at least one training trial");
    const ErpWindow window = task_window(kind);
    const std::vector<ConditionLabel> positives =
        kind == TaskKind::OcclusionVsControl
            ? std::vector<ConditionLabel>{ConditionLabel::Occlusion,
                                          ConditionLabel::OccludedPedestrian}
            : std::vector<ConditionLabel>{ConditionLabel::OccludedPedestrian};
    // Participants in first-appearance order, conditions in report order;
    // the output order is then a pure function of the epoch list.
    const std::vector<ConditionLabel> labels =
        kind == TaskKind::OcclusionVsControl
            ? std::vector<ConditionLabel>{ConditionLabel::OccludedPedestrian,
                                          ConditionLabel::Occlusion, ConditionLabel::Control}
            : std::vector<ConditionLabel>{ConditionLabel::OccludedPedestrian,
                                          ConditionLabel::Control};

    std::vector<std::string> participant_order;
    std::map<std::string, std::map<ConditionLabel, std::vector<std::size_t>>> trials;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const Epoch& epoch = epochs[i];
        if (epoch.condition.experiment != 2) continue;
        if (std::find(labels.begin(), labels.end(), epoch.condition.label) == labels.end())
            continue;
        if (!epoch.baseline_corrected)
            raise(ErrorCode::NotBaselineCorrected,
                  "epoch " + epoch.trial_id + " must be baseline corrected before classification");
        if (trials.find(epoch.participant_id) == trials.end())
            participant_order.push_back(epoch.participant_id);
        trials[epoch.participant_id][epoch.condition.label].push_back(i);
    }
    if (participant_order.empty())
        raise(ErrorCode::NoMatchingEpochs,
              std::string("no epochs match the conditions of task ") + task_kind_name(kind));

    TaskData data;
    data.positive_class = kind == TaskKind::OcclusionVsControl
                              ? "Occlusion+OccludedPedestrian"
                              : "OccludedPedestrian";
    data.negative_class = "Control";
    const std::size_t need = split.n_train + split.n_test;
    for (const auto& participant : participant_order) {
        for (const ConditionLabel label : labels) {
            const auto& ids = trials[participant][label];
            if (ids.size() < need)
                raise(ErrorCode::InsufficientTrials,
                      "participant " + participant + " has " + std::to_string(ids.size()) +
                          " " + condition_label_name(label) + " trials, need " +
                          std::to_string(need));
            std::vector<std::size_t> order(ids.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(derive_seed(split.selection_seed, hash_tag("split"),
                                hash_tag(participant.c_str()),
                                static_cast<std::uint64_t>(label)));
            rng.shuffle(order);
            const bool positive =
                std::find(positives.begin(), positives.end(), label) != positives.end();
            for (std::size_t k = 0; k < need; ++k) {
                const Epoch& epoch = epochs[ids[order[k]]];
                SeriesInstance inst;
                inst.values = window_samples(epoch, window, electrode);
                inst.label = positive ? SeriesLabel::Positive : SeriesLabel::Negative;
                inst.participant_id = epoch.participant_id;
                inst.trial_id = epoch.trial_id;
                if (k < split.n_train) {
                    (positive ? data.n_train_positive : data.n_train_negative) += 1;
                    data.train.push_back(std::move(inst));
                } else {
                    (positive ? data.n_test_positive : data.n_test_negative) += 1;
                    data.test.push_back(std::move(inst));
                }
            }
        }
    }
    return data;
}

namespace {

constexpr const char* kModelMagic = "ROCKETv1";

void append_vector(std::ostringstream& out, const char* key,
                   const std::vector<double>& values) {
    out << key;
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
}

std::string expect_field(std::istream& in, const std::string& key, const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        raise(ErrorCode::CorruptModel, "truncated model file, missing " + key + ": " + path);
    if (line == key) return "";
    if (line.rfind(key + " ", 0) != 0)
        raise(ErrorCode::CorruptModel,
              "expected field " + key + ", got \"" + line + "\": " + path);
    return line.substr(key.size() + 1);
}

std::uint64_t parse_u64(const std::string& token, const std::string& context) {
    std::uint64_t value = 0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        raise(ErrorCode::CorruptModel, "bad unsigned integer \"" + token + "\" in " + context);
    return value;
}

std::vector<double> parse_vector(const std::string& text, std::size_t expected,
                                 const std::string& context) {
    std::istringstream in(text);
    std::vector<double> values;
    values.reserve(expected);
    std::string token;
    while (in >> token) values.push_back(parse_double(token, context));
    if (values.size() != expected)
        raise(ErrorCode::CorruptModel, context + " holds " + std::to_string(values.size()) +
                                           " values, expected " + std::to_string(expected));
    return values;
}

} // namespace

void save_model(const RocketModel& model, const std::string& path) {
    std::ostringstream out;
    out << kModelMagic << '\n';
    out << "task_name " << model.task_name << '\n';
    out << "electrode " << model.electrode << '\n';
    out << "positive_class " << model.positive_class << '\n';
    out << "negative_class " << model.negative_class << '\n';
    out << "n_train " << model.n_train << '\n';
    out << "train_seed " << model.train_seed << '\n';
    out << "alpha " << format_double(model.alpha) << '\n';
    out << "alpha_on_boundary " << (model.alpha_on_boundary ? 1 : 0) << '\n';
    out << "intercept " << format_double(model.intercept) << '\n';
    out << "series_length " << model.bank.series_length << '\n';
    out << "bank_seed " << model.bank.seed << '\n';
    out << "n_kernels " << model.bank.kernels.size() << '\n';
    for (const auto& kernel : model.bank.kernels) {
        out << "kernel " << kernel.weights.size() << ' ' << kernel.dilation << ' '
            << kernel.padding << ' ' << format_double(kernel.bias);
        for (double w : kernel.weights) out << ' ' << format_double(w);
        out << '\n';
    }
    append_vector(out, "feature_mean", model.feature_mean);
    append_vector(out, "feature_scale", model.feature_scale);
    append_vector(out, "weights", model.weights);
    out << "end\n";
    write_file_atomic(path, out.str());
}

RocketModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ModelMissing, "cannot open model file: " + path);
    std::string magic;
    if (!std::getline(in, magic))
        raise(ErrorCode::CorruptModel, "empty model file: " + path);
    if (magic != kModelMagic)
        raise(ErrorCode::VersionMismatch,
              std::string("expected magic ") + kModelMagic + ", got \"" + magic + "\": " + path);
    try {
        RocketModel model;
        model.task_name = expect_field(in, "task_name", path);
        model.electrode = expect_field(in, "electrode", path);
        model.positive_class = expect_field(in, "positive_class", path);
        model.negative_class = expect_field(in, "negative_class", path);
        model.n_train = parse_u64(expect_field(in, "n_train", path), "n_train");
        model.train_seed = parse_u64(expect_field(in, "train_seed", path), "train_seed");
        model.alpha = parse_double(expect_field(in, "alpha", path), "alpha");
        model.alpha_on_boundary =
            parse_u64(expect_field(in, "alpha_on_boundary", path), "alpha_on_boundary") != 0;
        model.intercept = parse_double(expect_field(in, "intercept", path), "intercept");
        model.bank.series_length =
            parse_u64(expect_field(in, "series_length", path), "series_length");
        model.bank.seed = parse_u64(expect_field(in, "bank_seed", path), "bank_seed");
        const std::size_t n_kernels =
            parse_u64(expect_field(in, "n_kernels", path), "n_kernels");
        model.bank.kernels.reserve(n_kernels);
        for (std::size_t k = 0; k < n_kernels; ++k) {
            const std::string body =
                expect_field(in, "kernel", path) + " "; // istream splits on spaces
            std::istringstream fields(body);
            std::string len_tok;
            std::string dil_tok;
            std::string pad_tok;
            std::string bias_tok;
            if (!(fields >> len_tok >> dil_tok >> pad_tok >> bias_tok))
                raise(ErrorCode::CorruptModel,
                      "kernel " + std::to_string(k) + " is incomplete: " + path);
            RocketKernel kernel;
            const std::size_t klen = parse_u64(len_tok, "kernel length");
            kernel.dilation = parse_u64(dil_tok, "kernel dilation");
            kernel.padding = parse_u64(pad_tok, "kernel padding");
            kernel.bias = parse_double(bias_tok, "kernel bias");
            std::string w_tok;
            while (fields >> w_tok)
                kernel.weights.push_back(parse_double(w_tok, "kernel weight"));
            if (kernel.weights.size() != klen || klen < 2 || kernel.dilation == 0)
                raise(ErrorCode::CorruptModel,
                      "kernel " + std::to_string(k) + " is malformed: " + path);
            if ((klen - 1) * kernel.dilation + 1 > model.bank.series_length + 2 * kernel.padding)
                raise(ErrorCode::CorruptModel,
                      "kernel " + std::to_string(k) + " does not fit the series: " + path);
            model.bank.kernels.push_back(std::move(kernel));
        }
        const std::size_t dim = 2 * n_kernels;
        model.feature_mean =
            parse_vector(expect_field(in, "feature_mean", path), dim, "feature_mean");
        model.feature_scale =
            parse_vector(expect_field(in, "feature_scale", path), dim, "feature_scale");
        model.weights = parse_vector(expect_field(in, "weights", path), dim, "weights");
        std::string closing;
        if (!std::getline(in, closing) || closing != "end")
            raise(ErrorCode::CorruptModel, "missing end marker: " + path);
        return model;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptModel) throw;
        raise(ErrorCode::CorruptModel, std::string("model parse failed: ") + e.what());
    }
}

} // namespace hazerp
