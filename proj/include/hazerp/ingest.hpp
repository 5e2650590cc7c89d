#pragma once

#include "hazerp/types.hpp"

#include <string>
#include <vector>

namespace hazerp {

// Fully validated dataset: montage, per-participant recordings with merged
// events, and the joined behavior logs. Warnings hold non-fatal validation
// notes (events whose epoch window does not fit, unmatched behavior rows).
struct LoadedDataset {
    DatasetManifest manifest;
    Montage montage;
    std::vector<Recording> recordings;
    std::vector<TrialLog> trials;
    std::vector<std::string> warnings;
};

// Manifest: MANIFESTv1 key-value text with one [participant <id>] section per
// participant; paths are resolved relative to the manifest's directory and
// must exist. Grammar documented in docs/formats.md.
DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Recording file: line 1 = channel names, then one comma-separated row of
// microvolt values per time sample.
Recording read_recording(const std::string& path, const Montage& montage,
                         double sample_rate_hz, const std::string& participant_id);
void write_recording(const Recording& rec, const std::string& path);

// Events sidecar: sample_index,trial_id,clip_id,experiment,condition_label.
std::vector<EventMarker> read_events(const std::string& path);
void write_events(const std::vector<EventMarker>& events, const std::string& path);

// Behavior log: trial_id,condition_label,pressed(0|1),press_latency_ms(or
// empty). The file does not carry the experiment number; rows take it from
// the matching event when a dataset is loaded, so the standalone reader
// requires it explicitly.
std::vector<TrialLog> read_behavior(const std::string& path, int experiment,
                                    const std::string& participant_id);
void write_behavior(const std::vector<TrialLog>& logs, const std::string& path);

// Epoch file: EPOCHSv1 header with shared channels/window/rate, then one
// section per epoch with one sample row per channel.
void write_epochs(const std::vector<Epoch>& epochs, const std::string& path);
std::vector<Epoch> read_epochs(const std::string& path);

// Loads and cross-validates the whole dataset named by a manifest.
LoadedDataset load_dataset(const std::string& manifest_path);

} // namespace hazerp
