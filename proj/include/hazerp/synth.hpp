#pragma once

#include "hazerp/erp.hpp"
#include "hazerp/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hazerp {

// One injected component: a Gaussian bump added to the listed conditions at
// the listed electrodes, spreading to neighbors by great-circle falloff.
struct ErpTemplateSpec {
    std::string name;
    double peak_ms = 400.0;
    double sigma_ms = 40.0;
    double amplitude_uv = 0.0;
    Polarity polarity = Polarity::Positive;
    double amplitude_jitter_uv = 0.0;   // per-trial additive sd
    double latency_jitter_ms = 0.0;     // per-trial peak shift sd
    double participant_sigma = 0.0;     // log-normal sigma of a mean-1 per-participant scale
    std::vector<std::string> electrodes;
    // Relative amplitude per electrode in (0, 1]; empty means 1.0 everywhere.
    std::vector<double> electrode_weights;
    std::vector<ConditionLabel> conditions;
};

struct SynthConfig {
    std::size_t n_participants = 10;
    std::size_t trials_per_condition = 20;
    int experiment = 2;
    double sample_rate_hz = 1000.0;
    double noise_sigma_uv = 4.0;
    double pink_exponent = 1.0; // power ~ 1/f^beta
    std::vector<ErpTemplateSpec> templates;
    std::map<ConditionLabel, double> press_probability;
    double blink_rate_per_min = 0.0;
    double blink_amplitude_uv = 100.0;
    double inter_trial_s = 9.0;
    double lead_in_s = 2.0;
    std::vector<std::string> channels;
    std::uint64_t master_seed = 1;
};

// Cohort shape, templates, and press rates mirroring the second driving
// experiment; template amplitudes and spreads are Monte-Carlo-calibrated
// against the full preprocessing pipeline (procedure documented at the
// constants in synth.cpp).
SynthConfig default_synth_config();

struct TrialTruth {
    std::string participant_id;
    std::string trial_id;
    std::string clip_id;
    Condition condition;
    std::int64_t event_sample = 0;
    bool pressed = false;
    // Realized injection per config template (0 when the template does not
    // apply to this trial's condition). Amplitudes are signed.
    std::vector<double> template_amplitude_uv;
    std::vector<double> template_peak_ms;
};

struct GroundTruth {
    std::vector<TrialTruth> trials;
    std::map<std::string, std::vector<std::int64_t>> blink_onsets; // per participant
};

struct SynthOutput {
    std::vector<Recording> recordings;
    std::vector<TrialLog> logs;
    GroundTruth truth;
};

// Spectral-synthesis noise: white spectrum shaped by f^{-beta/2}, inverse
// transformed, rescaled so the sample standard deviation equals sigma_uv.
std::vector<double> pink_noise(std::size_t n, double sigma_uv, double beta,
                               std::uint64_t seed);

// Gaussian bump on the epoch grid; polarity selects the sign.
std::vector<double> erp_template(double peak_ms, double sigma_ms, double amplitude_uv,
                                 Polarity polarity, double window_start_ms = -500.0,
                                 double window_end_ms = 600.0,
                                 double sample_rate_hz = 1000.0);

// Stereotyped 300 ms biphasic ocular deflection with a seeded amplitude jitter
// around amplitude_uv.
struct BlinkArtifact {
    std::vector<double> waveform;
    double amplitude_uv = 0.0; // realized peak magnitude
};
BlinkArtifact blink_artifact(std::uint64_t seed, double amplitude_uv = 100.0,
                             double sample_rate_hz = 1000.0);

// Frontal falloff of the blink: gain 1 at FPz, decaying with great-circle
// distance from it.
double blink_channel_gain(const Montage& montage, const std::string& channel);

// Template spread: the nearest template electrode's weight at that electrode
// itself, decaying with great-circle distance away from it.
double template_channel_gain(const Montage& montage, const ErpTemplateSpec& tmpl,
                             const std::string& channel);

// One participant's recording, behavior log, and ground truth. RNG streams are
// derived by counter so any participant can be generated independently.
SynthOutput generate_participant(const SynthConfig& config, std::size_t participant_index);

SynthOutput generate_cohort(const SynthConfig& config);

} // namespace hazerp
