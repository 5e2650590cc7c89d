#include "hazerp/erp.hpp"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hazerp {

namespace {

struct SampleRange {
    std::size_t first = 0;
    std::size_t last = 0; // inclusive
};

SampleRange window_range(const ErpWindow& window, double window_start_ms, double sample_rate_hz,
                         std::size_t n_samples) {
    if (!(window.start_ms < window.end_ms))
        raise(ErrorCode::WindowOutOfBounds,
              "window '" + window.name + "' has start_ms >= end_ms");
    const std::int64_t offset =
        static_cast<std::int64_t>(std::llround(-window_start_ms / 1000.0 * sample_rate_hz));
    const std::int64_t first =
        offset + static_cast<std::int64_t>(std::llround(window.start_ms / 1000.0 * sample_rate_hz));
    const std::int64_t last =
        offset + static_cast<std::int64_t>(std::llround(window.end_ms / 1000.0 * sample_rate_hz));
    if (first < 0 || last < first || last >= static_cast<std::int64_t>(n_samples))
        raise(ErrorCode::WindowOutOfBounds,
              "window '" + window.name + "' spans samples [" + std::to_string(first) + ", " +
                  std::to_string(last) + "] outside the epoch of " + std::to_string(n_samples) +
                  " samples");
    return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

double range_mean(const std::vector<double>& waveform, SampleRange range) {
    double sum = 0.0;
    for (std::size_t i = range.first; i <= range.last; ++i) sum += waveform[i];
    return sum / static_cast<double>(range.last - range.first + 1);
}

} // namespace

ErpWindow p400_window() {
    ErpWindow w;
    w.name = "P400";
    w.start_ms = 351.0;
    w.end_ms = 450.0;
    w.polarity = Polarity::Positive;
    w.electrodes = {"FPz", "AF4", "F4"};
    return w;
}

ErpWindow n500_window() {
    ErpWindow w;
    w.name = "N500";
    w.start_ms = 451.0;
    w.end_ms = 550.0;
    w.polarity = Polarity::Negative;
    w.electrodes = {"AF3", "F3", "F1"};
    return w;
}

std::size_t ErpAverage::event_offset() const {
    return static_cast<std::size_t>(std::llround(-window_start_ms / 1000.0 * sample_rate_hz));
}

ErpAverage grand_average(const std::vector<Epoch>& epochs, const Condition& condition,
                         const std::string& electrode) {
    ErpAverage avg;
    avg.condition = condition;
    avg.electrode = electrode;

    for (const Epoch& e : epochs) {
        if (e.condition != condition) continue;
        if (!e.baseline_corrected)
            raise(ErrorCode::NotBaselineCorrected,
                  "trial '" + e.trial_id + "' must be baseline-corrected before averaging");
        const std::size_t ch = e.channel_index(electrode);
        if (avg.n_trials == 0) {
            avg.waveform.assign(e.n_samples(), 0.0);
            avg.window_start_ms = e.window_start_ms;
            avg.window_end_ms = e.window_end_ms;
            avg.sample_rate_hz = e.sample_rate_hz;
        } else if (e.n_samples() != avg.waveform.size()) {
            raise(ErrorCode::PreconditionViolated,
                  "trial '" + e.trial_id + "' has a different epoch length");
        }
        for (std::size_t t = 0; t < avg.waveform.size(); ++t)
            avg.waveform[t] += e.samples[ch][t];
        ++avg.n_trials;
    }
    if (avg.n_trials == 0)
        raise(ErrorCode::NoMatchingEpochs,
              std::string("no epochs match condition ") + condition_label_name(condition.label) +
                  " (experiment " + std::to_string(condition.experiment) + ")");
    const double inv = 1.0 / static_cast<double>(avg.n_trials);
    for (double& v : avg.waveform) v *= inv;
    return avg;
}

double window_amplitude(const Epoch& epoch, const ErpWindow& window,
                        const std::string& electrode) {
    const std::size_t ch = epoch.channel_index(electrode);
    const SampleRange range =
        window_range(window, epoch.window_start_ms, epoch.sample_rate_hz, epoch.n_samples());
    return range_mean(epoch.samples[ch], range);
}

std::vector<double> window_samples(const Epoch& epoch, const ErpWindow& window,
                                   const std::string& electrode) {
    const std::size_t ch = epoch.channel_index(electrode);
    const SampleRange range =
        window_range(window, epoch.window_start_ms, epoch.sample_rate_hz, epoch.n_samples());
    const auto& row = epoch.samples[ch];
    return std::vector<double>(row.begin() + static_cast<std::ptrdiff_t>(range.first),
                               row.begin() + static_cast<std::ptrdiff_t>(range.last) + 1);
}

double window_amplitude(const ErpAverage& average, const ErpWindow& window,
                        const std::string& electrode) {
    if (electrode != average.electrode)
        raise(ErrorCode::UnknownChannel, "average holds electrode '" + average.electrode +
                                             "', not '" + electrode + "'");
    const SampleRange range = window_range(window, average.window_start_ms,
                                           average.sample_rate_hz, average.waveform.size());
    return range_mean(average.waveform, range);
}

TestResult contrast_conditions(const std::vector<Epoch>& epochs, const Condition& cond_a,
                               const Condition& cond_b, const ErpWindow& window,
                               const std::string& electrode) {
    // participant -> (sum, count) per condition; std::map keeps participant
    // order deterministic.
    struct Acc {
        double sum_a = 0.0;
        std::size_t n_a = 0;
        double sum_b = 0.0;
        std::size_t n_b = 0;
    };
    std::map<std::string, Acc> by_participant;
    for (const Epoch& e : epochs) {
        const bool is_a = e.condition == cond_a;
        const bool is_b = e.condition == cond_b;
        if (!is_a && !is_b) continue;
        const double amp = window_amplitude(e, window, electrode);
        Acc& acc = by_participant[e.participant_id];
        if (is_a) {
            acc.sum_a += amp;
            ++acc.n_a;
        } else {
            acc.sum_b += amp;
            ++acc.n_b;
        }
    }

    std::vector<double> means_a;
    std::vector<double> means_b;
    for (const auto& [participant, acc] : by_participant) {
        if (acc.n_a == 0 || acc.n_b == 0)
            raise(ErrorCode::MissingParticipantData,
                  "participant '" + participant + "' has no retained epochs in condition " +
                      condition_label_name(acc.n_a == 0 ? cond_a.label : cond_b.label));
        means_a.push_back(acc.sum_a / static_cast<double>(acc.n_a));
        means_b.push_back(acc.sum_b / static_cast<double>(acc.n_b));
    }
    return paired_t(means_a, means_b);
}

} // namespace hazerp
