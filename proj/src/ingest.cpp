#include "hazerp/ingest.hpp"

#include "hazerp/error.hpp"
#include "hazerp/montage.hpp"
#include "hazerp/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

namespace hazerp {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> read_lines(const std::string& path) {
    const std::string content = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= content.size()) {
        const std::size_t nl = content.find('\n', start);
        if (nl == std::string::npos) {
            if (start < content.size()) lines.push_back(content.substr(start));
            break;
        }
        lines.push_back(content.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string loc(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

// Splits "key = value"; returns false for lines that are not assignments.
bool split_key_value(const std::string& line, std::string& key, std::string& value) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) return false;
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    return !key.empty();
}

Condition parse_condition(int experiment, const std::string& label_name,
                          const std::string& where) {
    Condition c;
    c.experiment = experiment;
    c.label = parse_condition_label(label_name); // throws UnknownCondition
    if (!c.valid())
        raise(ErrorCode::UnknownCondition,
              where + ": condition " + label_name + " is not part of experiment " +
                  std::to_string(experiment));
    return c;
}

// Number of samples an epoch spans and the sample offset of its start,
// mirroring the extraction arithmetic.
std::size_t epoch_length(double rate) {
    return static_cast<std::size_t>(std::llround(1100.0 / 1000.0 * rate));
}

std::size_t epoch_pre_samples(double rate) {
    return static_cast<std::size_t>(std::llround(500.0 / 1000.0 * rate));
}

struct BehaviorRow {
    std::string trial_id;
    std::string label_name;
    bool pressed = false;
    std::optional<double> latency_ms;
    std::size_t line_no = 0;
};

std::vector<BehaviorRow> read_behavior_rows(const std::string& path) {
    std::vector<BehaviorRow> rows;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string where = loc(path, i + 1);
        const std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 4)
            raise(ErrorCode::SchemaError,
                  where + ": expected trial_id,condition_label,pressed,press_latency_ms");
        BehaviorRow row;
        row.line_no = i + 1;
        row.trial_id = f[0];
        row.label_name = f[1];
        if (row.trial_id.empty()) raise(ErrorCode::SchemaError, where + ": empty trial_id");
        if (f[2] == "1") {
            row.pressed = true;
        } else if (f[2] == "0") {
            row.pressed = false;
        } else {
            raise(ErrorCode::ParseError, where + ": pressed must be 0 or 1, got '" + f[2] + "'");
        }
        if (!f[3].empty()) row.latency_ms = parse_double(f[3], where);
        if (row.pressed != row.latency_ms.has_value())
            raise(ErrorCode::SchemaError,
                  where + ": press_latency_ms must be present exactly when pressed is 1");
        if (row.latency_ms && *row.latency_ms < 0.0)
            raise(ErrorCode::SchemaError, where + ": negative press latency");
        rows.push_back(std::move(row));
    }
    return rows;
}

// The label set that pins a behavior row to one experiment when no event
// marker is available to say so. Occlusion exists in both experiments.
std::optional<int> unambiguous_experiment(ConditionLabel label) {
    switch (label) {
        case ConditionLabel::OccludedHazard: return 1;
        case ConditionLabel::OccludedPedestrian:
        case ConditionLabel::VisiblePedestrian:
        case ConditionLabel::Control: return 2;
        case ConditionLabel::Occlusion: return std::nullopt;
    }
    return std::nullopt;
}

void merge_events(Recording& rec, std::vector<EventMarker> events, const std::string& path) {
    std::set<std::string> seen;
    for (const EventMarker& ev : events) {
        if (!seen.insert(ev.trial_id).second)
            raise(ErrorCode::SchemaError,
                  path + ": duplicate trial_id '" + ev.trial_id + "' in events");
        if (ev.sample_index < 0 ||
            ev.sample_index >= static_cast<std::int64_t>(rec.n_samples()))
            raise(ErrorCode::EventOutOfRange,
                  path + ": trial '" + ev.trial_id + "' at sample " +
                      std::to_string(ev.sample_index) + " outside recording of " +
                      std::to_string(rec.n_samples()) + " samples");
    }
    rec.events = std::move(events);
}

} // namespace

DatasetManifest load_manifest(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || trim(lines[0]) != "MANIFESTv1")
        raise(ErrorCode::VersionMismatch, path + ": expected MANIFESTv1 header line");

    DatasetManifest manifest;
    manifest.sample_rate_hz = 0.0;
    ManifestEntry* current = nullptr;
    std::set<std::string> seen_ids;
    std::set<std::string> top_keys;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        const std::string where = loc(path, i + 1);
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']' || line.rfind("[participant ", 0) != 0)
                raise(ErrorCode::SchemaError, where + ": expected [participant <id>]");
            const std::string id = trim(line.substr(13, line.size() - 14));
            if (id.empty()) raise(ErrorCode::SchemaError, where + ": empty participant id");
            if (!seen_ids.insert(id).second)
                raise(ErrorCode::DuplicateParticipant, where + ": participant '" + id +
                                                           "' declared twice");
            manifest.participants.emplace_back();
            current = &manifest.participants.back();
            current->participant_id = id;
            continue;
        }

        std::string key;
        std::string value;
        if (!split_key_value(line, key, value))
            raise(ErrorCode::SchemaError, where + ": expected key = value");

        if (current == nullptr) {
            if (!top_keys.insert(key).second)
                raise(ErrorCode::SchemaError, where + ": duplicate key '" + key + "'");
            if (key == "dataset") {
                manifest.dataset_name = value;
            } else if (key == "sample_rate_hz") {
                manifest.sample_rate_hz = parse_double(value, where);
            } else if (key == "montage") {
                manifest.montage_path = value;
            } else {
                raise(ErrorCode::SchemaError, where + ": unknown key '" + key + "'");
            }
        } else {
            std::string* slot = nullptr;
            if (key == "recording") slot = &current->recording_path;
            else if (key == "events") slot = &current->events_path;
            else if (key == "behavior") slot = &current->behavior_path;
            else raise(ErrorCode::SchemaError, where + ": unknown key '" + key + "'");
            if (!slot->empty())
                raise(ErrorCode::SchemaError, where + ": duplicate key '" + key + "'");
            if (value.empty()) raise(ErrorCode::SchemaError, where + ": empty path for " + key);
            *slot = value;
        }
    }

    if (manifest.dataset_name.empty())
        raise(ErrorCode::SchemaError, path + ": missing 'dataset' key");
    if (manifest.sample_rate_hz <= 0.0)
        raise(ErrorCode::SchemaError, path + ": missing or non-positive 'sample_rate_hz'");
    if (manifest.montage_path.empty())
        raise(ErrorCode::SchemaError, path + ": missing 'montage' key");

    // Resolve all paths against the manifest's directory and require them now.
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p, const std::string& role, const std::string& id) {
        if (p.empty())
            raise(ErrorCode::SchemaError,
                  path + ": participant '" + id + "' is missing the " + role + " path");
        p = (base / p).string();
        if (!fs::exists(p))
            raise(ErrorCode::MissingFile, role + " file not found: " + p);
    };
    {
        std::string role = "montage";
        if (manifest.montage_path.empty())
            raise(ErrorCode::SchemaError, path + ": missing 'montage' key");
        manifest.montage_path = (base / manifest.montage_path).string();
        if (!fs::exists(manifest.montage_path))
            raise(ErrorCode::MissingFile, role + " file not found: " + manifest.montage_path);
    }
    for (ManifestEntry& entry : manifest.participants) {
        resolve(entry.recording_path, "recording", entry.participant_id);
        resolve(entry.events_path, "events", entry.participant_id);
        resolve(entry.behavior_path, "behavior", entry.participant_id);
    }
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    // Paths are written relative to the manifest's directory when possible.
    const fs::path base = fs::path(path).parent_path();
    auto rel = [&](const std::string& p) {
        const fs::path fp(p);
        std::error_code ec;
        const fs::path r = fs::relative(fp, base.empty() ? "." : base, ec);
        return (ec || r.empty()) ? p : r.string();
    };
    std::ostringstream out;
    out << "MANIFESTv1\n";
    out << "dataset = " << manifest.dataset_name << '\n';
    out << "sample_rate_hz = " << format_double(manifest.sample_rate_hz) << '\n';
    out << "montage = " << rel(manifest.montage_path) << '\n';
    for (const ManifestEntry& entry : manifest.participants) {
        out << "\n[participant " << entry.participant_id << "]\n";
        out << "recording = " << rel(entry.recording_path) << '\n';
        out << "events = " << rel(entry.events_path) << '\n';
        out << "behavior = " << rel(entry.behavior_path) << '\n';
    }
    write_file_atomic(path, out.str());
}

Recording read_recording(const std::string& path, const Montage& montage,
                         double sample_rate_hz, const std::string& participant_id) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || lines[0].empty())
        raise(ErrorCode::SchemaError, path + ": missing channel-name header line");

    Recording rec;
    rec.participant_id = participant_id;
    rec.sample_rate_hz = sample_rate_hz;
    rec.channels = split_csv(lines[0]);
    std::set<std::string> unique;
    for (const std::string& name : rec.channels) {
        if (name.empty()) raise(ErrorCode::SchemaError, loc(path, 1) + ": empty channel name");
        if (!unique.insert(name).second)
            raise(ErrorCode::SchemaError, loc(path, 1) + ": duplicate channel '" + name + "'");
        if (!montage.contains(name))
            raise(ErrorCode::UnknownChannel,
                  loc(path, 1) + ": channel '" + name + "' is not in the montage");
    }

    const std::size_t n_channels = rec.channels.size();
    std::size_t n_rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i)
        if (!lines[i].empty()) ++n_rows;
    rec.samples.assign(n_channels, std::vector<double>(n_rows));

    std::size_t row = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string where = loc(path, i + 1);
        const std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != n_channels)
            raise(ErrorCode::RaggedRows, where + ": expected " + std::to_string(n_channels) +
                                             " values, got " + std::to_string(f.size()));
        for (std::size_t c = 0; c < n_channels; ++c)
            rec.samples[c][row] = parse_double(f[c], where);
        ++row;
    }
    return rec;
}

void write_recording(const Recording& rec, const std::string& path) {
    std::ostringstream out;
    for (std::size_t c = 0; c < rec.channels.size(); ++c) {
        if (c) out << ',';
        out << rec.channels[c];
    }
    out << '\n';
    const std::size_t n = rec.n_samples();
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < rec.channels.size(); ++c) {
            if (c) out << ',';
            out << format_double(rec.samples[c][t]);
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<EventMarker> read_events(const std::string& path) {
    std::vector<EventMarker> events;
    const std::vector<std::string> lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string where = loc(path, i + 1);
        const std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 5)
            raise(ErrorCode::SchemaError,
                  where + ": expected sample_index,trial_id,clip_id,experiment,condition_label");
        EventMarker ev;
        ev.sample_index = parse_int(f[0], where);
        ev.trial_id = f[1];
        ev.clip_id = f[2];
        if (ev.trial_id.empty()) raise(ErrorCode::SchemaError, where + ": empty trial_id");
        const long long experiment = parse_int(f[3], where);
        if (experiment != 1 && experiment != 2)
            raise(ErrorCode::SchemaError, where + ": experiment must be 1 or 2");
        ev.condition = parse_condition(static_cast<int>(experiment), f[4], where);
        events.push_back(std::move(ev));
    }
    return events;
}

void write_events(const std::vector<EventMarker>& events, const std::string& path) {
    std::ostringstream out;
    for (const EventMarker& ev : events) {
        out << ev.sample_index << ',' << ev.trial_id << ',' << ev.clip_id << ','
            << ev.condition.experiment << ',' << condition_label_name(ev.condition.label)
            << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<TrialLog> read_behavior(const std::string& path, int experiment,
                                    const std::string& participant_id) {
    std::vector<TrialLog> logs;
    for (const BehaviorRow& row : read_behavior_rows(path)) {
        TrialLog log;
        log.participant_id = participant_id;
        log.trial_id = row.trial_id;
        log.condition = parse_condition(experiment, row.label_name, loc(path, row.line_no));
        log.pressed = row.pressed;
        log.press_latency_ms = row.latency_ms;
        logs.push_back(std::move(log));
    }
    return logs;
}

void write_behavior(const std::vector<TrialLog>& logs, const std::string& path) {
    std::ostringstream out;
    for (const TrialLog& log : logs) {
        out << log.trial_id << ',' << condition_label_name(log.condition.label) << ','
            << (log.pressed ? '1' : '0') << ',';
        if (log.press_latency_ms) out << format_double(*log.press_latency_ms);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

void write_epochs(const std::vector<Epoch>& epochs, const std::string& path) {
    if (epochs.empty())
        raise(ErrorCode::PreconditionViolated, path + ": refusing to write an empty epoch set");
    const Epoch& first = epochs[0];
    for (const Epoch& e : epochs) {
        if (e.channels != first.channels || e.sample_rate_hz != first.sample_rate_hz ||
            e.window_start_ms != first.window_start_ms || e.window_end_ms != first.window_end_ms)
            raise(ErrorCode::PreconditionViolated,
                  path + ": epochs in one file must share channels, window, and rate");
    }

    std::ostringstream out;
    out << "EPOCHSv1\n";
    out << "channels = ";
    for (std::size_t c = 0; c < first.channels.size(); ++c) {
        if (c) out << ',';
        out << first.channels[c];
    }
    out << '\n';
    out << "sample_rate_hz = " << format_double(first.sample_rate_hz) << '\n';
    out << "window_start_ms = " << format_double(first.window_start_ms) << '\n';
    out << "window_end_ms = " << format_double(first.window_end_ms) << '\n';

    for (const Epoch& e : epochs) {
        out << "\n[epoch " << e.trial_id << "]\n";
        out << "participant = " << e.participant_id << '\n';
        out << "clip = " << e.clip_id << '\n';
        out << "experiment = " << e.condition.experiment << '\n';
        out << "condition = " << condition_label_name(e.condition.label) << '\n';
        out << "baseline_corrected = " << (e.baseline_corrected ? '1' : '0') << '\n';
        for (const auto& channel_row : e.samples) {
            for (std::size_t t = 0; t < channel_row.size(); ++t) {
                if (t) out << ',';
                out << format_double(channel_row[t]);
            }
            out << '\n';
        }
    }
    write_file_atomic(path, out.str());
}

std::vector<Epoch> read_epochs(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || trim(lines[0]) != "EPOCHSv1")
        raise(ErrorCode::VersionMismatch, path + ": expected EPOCHSv1 header line");

    std::vector<std::string> channels;
    double rate = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    bool have_rate = false;
    bool have_start = false;
    bool have_end = false;

    std::vector<Epoch> epochs;
    Epoch* current = nullptr;
    std::size_t rows_needed = 0;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        const std::string where = loc(path, i + 1);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (channels.empty() || !have_rate || !have_start || !have_end)
                raise(ErrorCode::SchemaError, where + ": epoch section before complete header");
            if (current && rows_needed != 0)
                raise(ErrorCode::SchemaError, where + ": previous epoch is missing sample rows");
            if (line.back() != ']' || line.rfind("[epoch ", 0) != 0)
                raise(ErrorCode::SchemaError, where + ": expected [epoch <trial_id>]");
            epochs.emplace_back();
            current = &epochs.back();
            current->trial_id = trim(line.substr(7, line.size() - 8));
            if (current->trial_id.empty())
                raise(ErrorCode::SchemaError, where + ": empty trial_id");
            current->channels = channels;
            current->sample_rate_hz = rate;
            current->window_start_ms = window_start;
            current->window_end_ms = window_end;
            current->samples.clear();
            rows_needed = channels.size();
            continue;
        }

        std::string key;
        std::string value;
        const bool is_assignment = split_key_value(line, key, value);

        if (current == nullptr) {
            if (!is_assignment) raise(ErrorCode::SchemaError, where + ": expected key = value");
            if (key == "channels") {
                channels = split_csv(value);
                if (channels.empty() || channels[0].empty())
                    raise(ErrorCode::SchemaError, where + ": empty channel list");
            } else if (key == "sample_rate_hz") {
                rate = parse_double(value, where);
                have_rate = true;
            } else if (key == "window_start_ms") {
                window_start = parse_double(value, where);
                have_start = true;
            } else if (key == "window_end_ms") {
                window_end = parse_double(value, where);
                have_end = true;
            } else {
                raise(ErrorCode::SchemaError, where + ": unknown header key '" + key + "'");
            }
            continue;
        }

        // Inside an epoch section: metadata assignments first, then exactly
        // one sample row per channel.
        if (is_assignment && current->samples.empty()) {
            if (key == "participant") current->participant_id = value;
            else if (key == "clip") current->clip_id = value;
            else if (key == "experiment") {
                const long long e = parse_int(value, where);
                if (e != 1 && e != 2)
                    raise(ErrorCode::SchemaError, where + ": experiment must be 1 or 2");
                current->condition.experiment = static_cast<int>(e);
            } else if (key == "condition") {
                current->condition.label = parse_condition_label(value);
            } else if (key == "baseline_corrected") {
                if (value != "0" && value != "1")
                    raise(ErrorCode::SchemaError, where + ": baseline_corrected must be 0 or 1");
                current->baseline_corrected = value == "1";
            } else {
                raise(ErrorCode::SchemaError, where + ": unknown epoch key '" + key + "'");
            }
            continue;
        }

        if (rows_needed == 0)
            raise(ErrorCode::SchemaError, where + ": extra sample row in epoch");
        const std::vector<std::string> f = split_csv(lines[i]);
        const std::size_t expected =
            static_cast<std::size_t>(std::llround((window_end - window_start) / 1000.0 * rate));
        if (f.size() != expected)
            raise(ErrorCode::RaggedRows, where + ": expected " + std::to_string(expected) +
                                             " samples, got " + std::to_string(f.size()));
        std::vector<double> rowvals(expected);
        for (std::size_t t = 0; t < expected; ++t) rowvals[t] = parse_double(f[t], where);
        current->samples.push_back(std::move(rowvals));
        --rows_needed;
    }

    if (current && rows_needed != 0)
        raise(ErrorCode::SchemaError, path + ": last epoch is missing sample rows");
    for (Epoch& e : epochs) {
        if (!e.condition.valid())
            raise(ErrorCode::SchemaError,
                  path + ": epoch '" + e.trial_id + "' has a condition/experiment mismatch");
    }
    return epochs;
}

LoadedDataset load_dataset(const std::string& manifest_path) {
    LoadedDataset ds;
    ds.manifest = load_manifest(manifest_path);
    ds.montage = read_montage(ds.manifest.montage_path);

    for (const ManifestEntry& entry : ds.manifest.participants) {
        Recording rec = read_recording(entry.recording_path, ds.montage,
                                       ds.manifest.sample_rate_hz, entry.participant_id);
        merge_events(rec, read_events(entry.events_path), entry.events_path);

        // Epoch-fit validation: flag events whose [-500, +600) ms window does
        // not lie inside the recording.
        const std::size_t pre = epoch_pre_samples(rec.sample_rate_hz);
        const std::size_t len = epoch_length(rec.sample_rate_hz);
        for (const EventMarker& ev : rec.events) {
            const std::int64_t start = ev.sample_index - static_cast<std::int64_t>(pre);
            if (start < 0 ||
                start + static_cast<std::int64_t>(len) >
                    static_cast<std::int64_t>(rec.n_samples())) {
                ds.warnings.push_back("participant " + entry.participant_id + " trial '" +
                                      ev.trial_id + "': epoch window does not fit recording");
            }
        }

        // Join behavior rows to events by trial_id; matched rows inherit the
        // event's experiment, and their labels must agree.
        std::map<std::string, const EventMarker*> by_trial;
        for (const EventMarker& ev : rec.events) by_trial[ev.trial_id] = &ev;

        std::set<std::string> behavior_trials;
        for (const BehaviorRow& row : read_behavior_rows(entry.behavior_path)) {
            const std::string where = loc(entry.behavior_path, row.line_no);
            if (!behavior_trials.insert(row.trial_id).second)
                raise(ErrorCode::SchemaError,
                      where + ": duplicate trial_id '" + row.trial_id + "'");
            TrialLog log;
            log.participant_id = entry.participant_id;
            log.trial_id = row.trial_id;
            log.pressed = row.pressed;
            log.press_latency_ms = row.latency_ms;

            const auto it = by_trial.find(row.trial_id);
            if (it != by_trial.end()) {
                log.condition =
                    parse_condition(it->second->condition.experiment, row.label_name, where);
                if (log.condition.label != it->second->condition.label)
                    raise(ErrorCode::SchemaError,
                          where + ": condition disagrees with the event marker for trial '" +
                              row.trial_id + "'");
            } else {
                const ConditionLabel label = parse_condition_label(row.label_name);
                const std::optional<int> experiment = unambiguous_experiment(label);
                if (!experiment)
                    raise(ErrorCode::SchemaError,
                          where + ": trial '" + row.trial_id +
                              "' has no event marker and its condition fits both experiments");
                log.condition = parse_condition(*experiment, row.label_name, where);
                ds.warnings.push_back("participant " + entry.participant_id + " trial '" +
                                      row.trial_id + "': behavior row has no event marker");
            }
            ds.trials.push_back(std::move(log));
        }

        for (const EventMarker& ev : rec.events) {
            if (!behavior_trials.count(ev.trial_id))
                raise(ErrorCode::SchemaError,
                      entry.behavior_path + ": no behavior row for trial '" + ev.trial_id +
                          "' of participant " + entry.participant_id);
        }

        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

} // namespace hazerp
