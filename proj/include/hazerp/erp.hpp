#pragma once

#include "hazerp/stats.hpp"
#include "hazerp/types.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace hazerp {

enum class Polarity { Positive, Negative };

// Post-event analysis window; endpoints in ms relative to the event, inclusive.
struct ErpWindow {
    std::string name;
    double start_ms = 0.0;
    double end_ms = 0.0;
    Polarity polarity = Polarity::Positive;
    std::vector<std::string> electrodes;
};

// 351..450 ms, positive deflection at FPz/AF4/F4.
ErpWindow p400_window();
// 451..550 ms, negative deflection at AF3/F3/F1.
ErpWindow n500_window();

// Pointwise mean across epochs of one condition at one electrode.
struct ErpAverage {
    Condition condition;
    std::string electrode;
    std::vector<double> waveform;
    std::size_t n_trials = 0;
    double window_start_ms = -500.0;
    double window_end_ms = 600.0;
    double sample_rate_hz = 1000.0;

    std::size_t event_offset() const;
};

// Mean of all baseline-corrected epochs matching `condition`.
ErpAverage grand_average(const std::vector<Epoch>& epochs, const Condition& condition,
                         const std::string& electrode);

// Mean amplitude over the window's inclusive sample range.
double window_amplitude(const Epoch& epoch, const ErpWindow& window,
                        const std::string& electrode);
// Raw samples over the window's inclusive sample range, in recording order.
std::vector<double> window_samples(const Epoch& epoch, const ErpWindow& window,
                                   const std::string& electrode);
double window_amplitude(const ErpAverage& average, const ErpWindow& window,
                        const std::string& electrode);

// Paired t-test over per-participant mean window amplitudes, A minus B.
TestResult contrast_conditions(const std::vector<Epoch>& epochs, const Condition& cond_a,
                               const Condition& cond_b, const ErpWindow& window,
                               const std::string& electrode);

} // namespace hazerp
