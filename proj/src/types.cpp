#include "hazerp/types.hpp"

#include "hazerp/error.hpp"

#include <algorithm>
#include <cmath>

namespace hazerp {

const char* condition_label_name(ConditionLabel label) {
    switch (label) {
        case ConditionLabel::Occlusion: return "Occlusion";
        case ConditionLabel::OccludedHazard: return "OccludedHazard";
        case ConditionLabel::OccludedPedestrian: return "OccludedPedestrian";
        case ConditionLabel::VisiblePedestrian: return "VisiblePedestrian";
        case ConditionLabel::Control: return "Control";
    }
    return "?";
}

ConditionLabel parse_condition_label(const std::string& name) {
    if (name == "Occlusion") return ConditionLabel::Occlusion;
    if (name == "OccludedHazard") return ConditionLabel::OccludedHazard;
    if (name == "OccludedPedestrian") return ConditionLabel::OccludedPedestrian;
    if (name == "VisiblePedestrian") return ConditionLabel::VisiblePedestrian;
    if (name == "Control") return ConditionLabel::Control;
    raise(ErrorCode::UnknownCondition, "unknown condition label '" + name + "'");
}

std::vector<ConditionLabel> experiment_labels(int experiment) {
    if (experiment == 1)
        return {ConditionLabel::Occlusion, ConditionLabel::OccludedHazard};
    if (experiment == 2)
        return {ConditionLabel::OccludedPedestrian, ConditionLabel::Occlusion,
                ConditionLabel::VisiblePedestrian, ConditionLabel::Control};
    raise(ErrorCode::UnknownCondition,
          "experiment must be 1 or 2, got " + std::to_string(experiment));
}

bool Condition::valid() const {
    if (experiment != 1 && experiment != 2) return false;
    const auto labels = experiment_labels(experiment);
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

double great_circle_distance(const Vec3& a, const Vec3& b) {
    const double dot = a.x * b.x + a.y * b.y + a.z * b.z;
    const double cx = a.y * b.z - a.z * b.y;
    const double cy = a.z * b.x - a.x * b.z;
    const double cz = a.x * b.y - a.y * b.x;
    const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    return std::atan2(cross, dot);
}

std::optional<Vec3> Montage::lookup(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) return std::nullopt;
    return it->second;
}

std::size_t Recording::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return i;
    raise(ErrorCode::UnknownChannel,
          "channel '" + name + "' not present in recording " + participant_id);
}

std::size_t Epoch::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return i;
    raise(ErrorCode::UnknownChannel,
          "channel '" + name + "' not present in epoch " + trial_id);
}

std::size_t Epoch::event_offset() const {
    return static_cast<std::size_t>(
        std::llround(-window_start_ms * sample_rate_hz / 1000.0));
}

} // namespace hazerp
