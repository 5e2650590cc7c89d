#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hazerp {

enum class ConditionLabel {
    Occlusion,
    OccludedHazard,
    OccludedPedestrian,
    VisiblePedestrian,
    Control,
};

const char* condition_label_name(ConditionLabel label);
ConditionLabel parse_condition_label(const std::string& name);

struct Condition {
    int experiment = 2; // 1 or 2
    ConditionLabel label = ConditionLabel::Control;

    bool valid() const;
    bool operator==(const Condition& o) const {
        return experiment == o.experiment && label == o.label;
    }
    bool operator!=(const Condition& o) const { return !(*this == o); }
};

// Labels belonging to each experiment, in report order.
std::vector<ConditionLabel> experiment_labels(int experiment);

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

double great_circle_distance(const Vec3& a, const Vec3& b);

struct Montage {
    // Sorted by channel name; deterministic iteration.
    std::map<std::string, Vec3> entries;

    bool contains(const std::string& name) const { return entries.count(name) > 0; }
    std::optional<Vec3> lookup(const std::string& name) const;
};

struct EventMarker {
    std::int64_t sample_index = 0;
    std::string trial_id;
    Condition condition;
    std::string clip_id;
};

struct Recording {
    std::string participant_id;
    double sample_rate_hz = 1000.0;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> samples; // [channel][time], microvolts
    std::vector<EventMarker> events;

    std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
    std::size_t channel_index(const std::string& name) const; // throws UnknownChannel
};

struct TrialLog {
    std::string participant_id;
    std::string trial_id;
    Condition condition;
    bool pressed = false;
    std::optional<double> press_latency_ms;
};

struct ManifestEntry {
    std::string participant_id;
    std::string recording_path;
    std::string events_path;
    std::string behavior_path;
};

struct DatasetManifest {
    std::string dataset_name;
    double sample_rate_hz = 1000.0;
    std::string montage_path;
    std::vector<ManifestEntry> participants;
};

struct Epoch {
    std::string participant_id;
    std::string trial_id;
    std::string clip_id;
    Condition condition;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> samples; // [channel][time], microvolts
    double window_start_ms = -500.0;
    double window_end_ms = 600.0; // exclusive
    double sample_rate_hz = 1000.0;
    bool baseline_corrected = false;

    std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
    std::size_t channel_index(const std::string& name) const; // throws UnknownChannel
    // Relative sample index of the time-locking event (500 at 1000 Hz).
    std::size_t event_offset() const;
};

} // namespace hazerp
