#pragma once

#include "hazerp/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hazerp {

struct FilterSpec {
    double low_cut_hz = 0.1;
    double high_cut_hz = 40.0;
    int order_per_pass = 4; // Butterworth prototype order; band-pass realizes 2x
};

// One second-order section, direct form II transposed, normalized a0 = 1.
struct Biquad {
    double b0 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

// Butterworth band-pass as cascaded biquads (low-pass prototype, analog
// band transform, bilinear mapping; unity gain at the band's geometric
// center frequency).
std::vector<Biquad> design_bandpass(const FilterSpec& spec, double sample_rate_hz);

// Forward-backward (zero phase) cascade application with odd-reflection
// padding of 3x the realized filter order and steady-state initial
// conditions, so constant inputs produce exactly constant outputs.
std::vector<double> filtfilt(const std::vector<Biquad>& sections, const std::vector<double>& x);

Recording rereference(const Recording& rec,
                      const std::vector<std::string>& refs = {"M1", "M2"});

Recording bandpass(const Recording& rec, const FilterSpec& spec);

// Replaces each bad channel by the inverse-square great-circle-distance
// weighted mean of its k = 6 nearest good channels.
Recording interpolate_channels(const Recording& rec, const std::vector<std::string>& bad,
                               const Montage& montage);

struct IcaDecomposition {
    std::size_t n_channels = 0;
    std::size_t n_components = 0;
    std::vector<double> mixing;    // n_channels x n_components, row-major
    std::vector<double> unmixing;  // n_components x n_channels, row-major
    std::vector<double> whitening; // n_components x n_channels, row-major
    std::vector<double> channel_means;
    std::vector<std::vector<double>> activations; // [component][time]
    bool converged = false;
    int iterations = 0;
    double final_delta = 0.0;
};

// Symmetric fixed-point ICA with tanh contrast on the whitened channel data.
// n_components = 0 selects the numerical rank of the channel covariance.
// Non-convergence is reported in the result, not thrown.
IcaDecomposition fast_ica(const Recording& rec, std::size_t n_components, std::uint64_t seed);

Recording remove_components(const Recording& rec, const IcaDecomposition& decomp,
                            const std::vector<std::size_t>& drop);

// Cuts one epoch per event: samples [e - pre, e + post) where pre and post
// are the window bounds scaled to the sample rate; the event sample sits at
// relative index pre (500 at 1000 Hz).
std::vector<Epoch> extract_epochs(const Recording& rec, double window_start_ms = -500.0,
                                  double window_end_ms = 600.0);

// Subtracts each channel's pre-event mean (relative samples [0, pre)).
Epoch baseline_correct(const Epoch& epoch);

struct RejectionResult {
    std::vector<Epoch> retained;
    std::vector<std::string> rejected_trial_ids;
};

// Drops epochs whose peak-to-peak amplitude exceeds the threshold on any
// channel. Requires baseline-corrected input.
RejectionResult reject_epochs(const std::vector<Epoch>& epochs, double threshold_uv = 100.0);

} // namespace hazerp
