#include "hazerp/pipeline.hpp"

#include "hazerp/error.hpp"
#include "hazerp/montage.hpp"
#include "hazerp/numeric.hpp"
#include "hazerp/rng.hpp"
#include "hazerp/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace hazerp {

namespace {

// ---------------------------------------------------------------- config io

[[noreturn]] void schema_error(const std::string& context, const std::string& what) {
    raise(ErrorCode::SchemaError, context + ": " + what);
}

void require_keys(const json& obj, const std::string& context,
                  const std::set<std::string>& allowed) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            schema_error(context, "unknown key '" + item.key() + "'");
}

double get_number(const json& obj, const std::string& key, double fallback,
                  const std::string& context) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) schema_error(context, key + " must be a number");
    return obj[key].get<double>();
}

std::uint64_t get_u64(const json& obj, const std::string& key, std::uint64_t fallback,
                      const std::string& context) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned())
        schema_error(context, key + " must be a non-negative integer");
    return obj[key].get<std::uint64_t>();
}

std::size_t get_size(const json& obj, const std::string& key, std::size_t fallback,
                     const std::string& context) {
    return static_cast<std::size_t>(get_u64(obj, key, fallback, context));
}

bool get_bool(const json& obj, const std::string& key, bool fallback,
              const std::string& context) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) schema_error(context, key + " must be a boolean");
    return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& fallback,
                       const std::string& context) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) schema_error(context, key + " must be a string");
    return obj[key].get<std::string>();
}

std::vector<std::string> get_string_list(const json& value, const std::string& context) {
    if (!value.is_array()) schema_error(context, "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : value) {
        if (!v.is_string()) schema_error(context, "must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

void apply_window(const json& obj, const std::string& context, ErpWindow& window) {
    require_keys(obj, context, {"start_ms", "end_ms", "polarity", "electrodes"});
    window.start_ms = get_number(obj, "start_ms", window.start_ms, context);
    window.end_ms = get_number(obj, "end_ms", window.end_ms, context);
    if (obj.contains("polarity")) {
        const std::string p = get_string(obj, "polarity", "", context);
        if (p == "positive") window.polarity = Polarity::Positive;
        else if (p == "negative") window.polarity = Polarity::Negative;
        else schema_error(context, "polarity must be 'positive' or 'negative'");
    }
    if (obj.contains("electrodes"))
        window.electrodes = get_string_list(obj["electrodes"], context + ".electrodes");
}

// ------------------------------------------------------------- small utils

std::string join_plus(const std::vector<std::string>& parts) {
    std::string out;
    for (const std::string& p : parts) {
        if (!out.empty()) out += "+";
        out += p;
    }
    return out;
}

double pearson_r(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n < 2) return 0.0;
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0;
    double sbb = 0.0;
    double sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::optional<TaskKind> task_from_name(const std::string& name) {
    for (TaskKind kind : {TaskKind::OcclusionVsControl, TaskKind::PedestrianVsControl})
        if (name == task_kind_name(kind)) return kind;
    return std::nullopt;
}

// Behavior and events without the recordings; manifest paths are already
// resolved by load_manifest. The behavior format does not carry the
// experiment number, so it is inferred from the participant's event file.
struct BehaviorData {
    std::vector<TrialLog> logs;                 // manifest order, file order
    std::map<std::string, std::string> clip_of; // participant|trial -> clip
};

std::string trial_key(const std::string& pid, const std::string& trial) {
    return pid + "|" + trial;
}

BehaviorData load_behavior_data(const DatasetManifest& manifest) {
    BehaviorData out;
    for (const ManifestEntry& entry : manifest.participants) {
        const std::vector<EventMarker> events = read_events(entry.events_path);
        const int experiment = events.empty() ? 2 : events[0].condition.experiment;
        for (const EventMarker& ev : events)
            out.clip_of[trial_key(entry.participant_id, ev.trial_id)] = ev.clip_id;
        std::vector<TrialLog> logs =
            read_behavior(entry.behavior_path, experiment, entry.participant_id);
        for (TrialLog& log : logs) out.logs.push_back(std::move(log));
    }
    return out;
}

std::vector<Epoch> read_epoch_files(const DatasetManifest& manifest,
                                    const std::string& out_dir) {
    std::vector<Epoch> all;
    for (const ManifestEntry& entry : manifest.participants) {
        std::vector<Epoch> eps = read_epochs(epochs_path(out_dir, entry.participant_id));
        for (Epoch& e : eps) all.push_back(std::move(e));
    }
    return all;
}

// ------------------------------------------------------- preprocessing core

struct ParticipantChainResult {
    std::vector<Epoch> epochs;
    std::size_t total = 0;
    std::vector<std::string> rejected;
    bool ica_ran = false;
    bool ica_converged = false;
    int ica_iterations = 0;
    std::vector<double> component_fpz_r;
    std::vector<std::size_t> suggested;
    std::vector<std::size_t> dropped;
};

ParticipantChainResult run_chain(const Recording& raw, const Montage& montage,
                                 const PipelineConfig& config) {
    const auto bad_it = config.bad_channels.find(raw.participant_id);
    const bool interpolate = bad_it != config.bad_channels.end() && !bad_it->second.empty();

    std::vector<Stage> stages = {Stage::Rereference, Stage::Bandpass};
    if (interpolate) stages.push_back(Stage::Interpolate);
    if (config.ica.enabled) stages.push_back(Stage::Ica);
    stages.push_back(Stage::Epoch);
    stages.push_back(Stage::Baseline);
    stages.push_back(Stage::Reject);
    validate_stage_order(stages);

    ParticipantChainResult out;
    Recording rec = rereference(raw, {"M1", "M2"});
    rec = bandpass(rec, config.filter);
    if (interpolate) rec = interpolate_channels(rec, bad_it->second, montage);
    if (config.ica.enabled) {
        const std::uint64_t seed = derive_seed(config.ica.seed, hash_tag("ica"),
                                               hash_tag(raw.participant_id.c_str()));
        const IcaDecomposition decomp = fast_ica(rec, 0, seed);
        out.ica_ran = true;
        out.ica_converged = decomp.converged;
        out.ica_iterations = decomp.iterations;
        // Blinks project most strongly onto FPz, so the per-component
        // correlation against it flags blink components. Without FPz the
        // suggestion column stays empty and dropping is fully manual.
        const bool has_fpz =
            std::find(rec.channels.begin(), rec.channels.end(), "FPz") != rec.channels.end();
        for (std::size_t k = 0; k < decomp.n_components; ++k) {
            const double r =
                has_fpz ? pearson_r(decomp.activations[k],
                                    rec.samples[rec.channel_index("FPz")])
                        : 0.0;
            out.component_fpz_r.push_back(r);
            if (has_fpz && std::abs(r) >= config.ica.blink_correlation_threshold)
                out.suggested.push_back(k);
        }
        const auto drop_it = config.ica.drop.find(raw.participant_id);
        if (drop_it != config.ica.drop.end() && !drop_it->second.empty()) {
            for (std::size_t k : drop_it->second)
                if (k >= decomp.n_components)
                    raise(ErrorCode::InvalidConfig,
                          "ica drop component " + std::to_string(k) + " out of range for " +
                              raw.participant_id + " (" +
                              std::to_string(decomp.n_components) + " components)");
            out.dropped = drop_it->second;
            rec = remove_components(rec, decomp, drop_it->second);
        }
    }
    std::vector<Epoch> epochs = extract_epochs(rec);
    out.total = epochs.size();
    std::vector<Epoch> corrected;
    corrected.reserve(epochs.size());
    for (const Epoch& e : epochs) corrected.push_back(baseline_correct(e));
    RejectionResult rejection = reject_epochs(corrected, config.rejection_threshold_uv);
    out.epochs = std::move(rejection.retained);
    out.rejected = std::move(rejection.rejected_trial_ids);
    return out;
}

// ------------------------------------------------------------ model loading

std::vector<RocketModel> load_task_models(const std::string& out_dir, TaskKind task) {
    std::vector<RocketModel> models;
    const ErpWindow window = task_window(task);
    for (const std::string& electrode : window.electrodes) {
        const std::string path = model_path(out_dir, task, electrode);
        RocketModel model = load_model(path);
        if (model.electrode != electrode)
            raise(ErrorCode::ElectrodeMismatch,
                  path + ": model was trained at '" + model.electrode + "', expected '" +
                      electrode + "'");
        models.push_back(std::move(model));
    }
    return models;
}

bool task_models_present(const std::string& out_dir, TaskKind task,
                         std::vector<std::string>* missing) {
    bool any = false;
    bool all = true;
    for (const std::string& electrode : task_window(task).electrodes) {
        const std::string path = model_path(out_dir, task, electrode);
        if (fs::exists(path)) {
            any = true;
        } else {
            all = false;
            if (missing) missing->push_back(path);
        }
    }
    if (any && !all && missing)
        raise(ErrorCode::ModelMissing,
              "incomplete model set for " + std::string(task_kind_name(task)) + ": missing " +
                  join_plus(*missing));
    return all;
}

struct TaskVote {
    std::size_t positives = 0;
    double mean_score = 0.0;
    std::vector<std::string> positive_electrodes;
};

TaskVote vote_task(const std::vector<RocketModel>& models, const ErpWindow& window,
                   const Epoch& epoch) {
    TaskVote vote;
    for (const RocketModel& model : models) {
        SeriesInstance inst;
        inst.values = window_samples(epoch, window, model.electrode);
        inst.participant_id = epoch.participant_id;
        inst.trial_id = epoch.trial_id;
        const Prediction pred = predict(model, {inst})[0];
        vote.mean_score += pred.score / static_cast<double>(models.size());
        if (pred.label == SeriesLabel::Positive) {
            ++vote.positives;
            vote.positive_electrodes.push_back(model.electrode);
        }
    }
    return vote;
}

} // namespace

// --------------------------------------------------------------- config api

PipelineConfig default_pipeline_config() {
    PipelineConfig config;
    config.synth = default_synth_config();
    config.p400 = p400_window();
    config.n500 = n500_window();
    return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, path + ": " + e.what());
    }
    if (!root.is_object()) schema_error(path, "top level must be an object");
    require_keys(root, path,
                 {"out_dir", "filter", "bad_channels", "ica", "rejection_threshold_uv",
                  "windows", "classifier", "split", "synth"});

    PipelineConfig config = default_pipeline_config();
    config.out_dir = get_string(root, "out_dir", config.out_dir, path);
    config.rejection_threshold_uv =
        get_number(root, "rejection_threshold_uv", config.rejection_threshold_uv, path);

    if (root.contains("filter")) {
        const json& f = root["filter"];
        const std::string ctx = path + ".filter";
        if (!f.is_object()) schema_error(path, "filter must be an object");
        require_keys(f, ctx, {"low_cut_hz", "high_cut_hz", "order_per_pass"});
        config.filter.low_cut_hz = get_number(f, "low_cut_hz", config.filter.low_cut_hz, ctx);
        config.filter.high_cut_hz = get_number(f, "high_cut_hz", config.filter.high_cut_hz, ctx);
        config.filter.order_per_pass = static_cast<int>(
            get_u64(f, "order_per_pass", static_cast<std::uint64_t>(config.filter.order_per_pass),
                    ctx));
    }

    if (root.contains("bad_channels")) {
        const json& b = root["bad_channels"];
        if (!b.is_object()) schema_error(path, "bad_channels must map participant to channels");
        for (const auto& item : b.items())
            config.bad_channels[item.key()] =
                get_string_list(item.value(), path + ".bad_channels." + item.key());
    }

    if (root.contains("ica")) {
        const json& i = root["ica"];
        const std::string ctx = path + ".ica";
        if (!i.is_object()) schema_error(path, "ica must be an object");
        require_keys(i, ctx, {"enabled", "seed", "drop", "blink_correlation_threshold"});
        config.ica.enabled = get_bool(i, "enabled", config.ica.enabled, ctx);
        config.ica.seed = get_u64(i, "seed", config.ica.seed, ctx);
        config.ica.blink_correlation_threshold = get_number(
            i, "blink_correlation_threshold", config.ica.blink_correlation_threshold, ctx);
        if (i.contains("drop")) {
            if (!i["drop"].is_object())
                schema_error(ctx, "drop must map participant to component indices");
            for (const auto& item : i["drop"].items()) {
                if (!item.value().is_array())
                    schema_error(ctx, "drop." + item.key() + " must be an array");
                std::vector<std::size_t> indices;
                for (const auto& v : item.value()) {
                    if (!v.is_number_unsigned())
                        schema_error(ctx, "drop." + item.key() +
                                              " entries must be non-negative integers");
                    indices.push_back(v.get<std::size_t>());
                }
                config.ica.drop[item.key()] = std::move(indices);
            }
        }
    }

    if (root.contains("windows")) {
        const json& w = root["windows"];
        if (!w.is_object()) schema_error(path, "windows must be an object");
        require_keys(w, path + ".windows", {"p400", "n500"});
        if (w.contains("p400")) apply_window(w["p400"], path + ".windows.p400", config.p400);
        if (w.contains("n500")) apply_window(w["n500"], path + ".windows.n500", config.n500);
    }

    if (root.contains("classifier")) {
        const json& c = root["classifier"];
        const std::string ctx = path + ".classifier";
        if (!c.is_object()) schema_error(path, "classifier must be an object");
        require_keys(c, ctx, {"n_kernels", "seed", "alpha_grid"});
        config.classifier.n_kernels = get_size(c, "n_kernels", config.classifier.n_kernels, ctx);
        config.classifier.seed = get_u64(c, "seed", config.classifier.seed, ctx);
        if (c.contains("alpha_grid")) {
            if (!c["alpha_grid"].is_array()) schema_error(ctx, "alpha_grid must be an array");
            config.classifier.alpha_grid.clear();
            for (const auto& v : c["alpha_grid"]) {
                if (!v.is_number()) schema_error(ctx, "alpha_grid entries must be numbers");
                config.classifier.alpha_grid.push_back(v.get<double>());
            }
        }
    }

    if (root.contains("split")) {
        const json& s = root["split"];
        const std::string ctx = path + ".split";
        if (!s.is_object()) schema_error(path, "split must be an object");
        require_keys(s, ctx, {"n_train", "n_test", "selection_seed"});
        config.split.n_train = get_size(s, "n_train", config.split.n_train, ctx);
        config.split.n_test = get_size(s, "n_test", config.split.n_test, ctx);
        config.split.selection_seed = get_u64(s, "selection_seed", config.split.selection_seed, ctx);
    }

    if (root.contains("synth")) {
        const json& s = root["synth"];
        const std::string ctx = path + ".synth";
        if (!s.is_object()) schema_error(path, "synth must be an object");
        require_keys(s, ctx,
                     {"n_participants", "trials_per_condition", "experiment", "noise_sigma_uv",
                      "master_seed", "inter_trial_s", "lead_in_s", "blink_rate_per_min",
                      "blink_amplitude_uv"});
        SynthConfig& sy = config.synth;
        sy.n_participants = get_size(s, "n_participants", sy.n_participants, ctx);
        sy.trials_per_condition =
            get_size(s, "trials_per_condition", sy.trials_per_condition, ctx);
        sy.experiment =
            static_cast<int>(get_u64(s, "experiment", static_cast<std::uint64_t>(sy.experiment), ctx));
        sy.noise_sigma_uv = get_number(s, "noise_sigma_uv", sy.noise_sigma_uv, ctx);
        sy.master_seed = get_u64(s, "master_seed", sy.master_seed, ctx);
        sy.inter_trial_s = get_number(s, "inter_trial_s", sy.inter_trial_s, ctx);
        sy.lead_in_s = get_number(s, "lead_in_s", sy.lead_in_s, ctx);
        sy.blink_rate_per_min = get_number(s, "blink_rate_per_min", sy.blink_rate_per_min, ctx);
        sy.blink_amplitude_uv = get_number(s, "blink_amplitude_uv", sy.blink_amplitude_uv, ctx);
    }
    return config;
}

void save_pipeline_config(const PipelineConfig& config, const std::string& path) {
    nlohmann::ordered_json root;
    root["out_dir"] = config.out_dir;
    root["filter"] = {{"low_cut_hz", config.filter.low_cut_hz},
                      {"high_cut_hz", config.filter.high_cut_hz},
                      {"order_per_pass", config.filter.order_per_pass}};
    nlohmann::ordered_json bad = nlohmann::ordered_json::object();
    for (const auto& [pid, channels] : config.bad_channels) bad[pid] = channels;
    root["bad_channels"] = bad;
    nlohmann::ordered_json drop = nlohmann::ordered_json::object();
    for (const auto& [pid, indices] : config.ica.drop) drop[pid] = indices;
    root["ica"] = {{"enabled", config.ica.enabled},
                   {"seed", config.ica.seed},
                   {"drop", drop},
                   {"blink_correlation_threshold", config.ica.blink_correlation_threshold}};
    root["rejection_threshold_uv"] = config.rejection_threshold_uv;
    auto window_json = [](const ErpWindow& w) {
        return nlohmann::ordered_json{
            {"start_ms", w.start_ms},
            {"end_ms", w.end_ms},
            {"polarity", w.polarity == Polarity::Positive ? "positive" : "negative"},
            {"electrodes", w.electrodes}};
    };
    root["windows"] = {{"p400", window_json(config.p400)}, {"n500", window_json(config.n500)}};
    root["classifier"] = {{"n_kernels", config.classifier.n_kernels},
                          {"seed", config.classifier.seed},
                          {"alpha_grid", config.classifier.alpha_grid.empty()
                                             ? default_alpha_grid()
                                             : config.classifier.alpha_grid}};
    root["split"] = {{"n_train", config.split.n_train},
                     {"n_test", config.split.n_test},
                     {"selection_seed", config.split.selection_seed}};
    root["synth"] = {{"n_participants", config.synth.n_participants},
                     {"trials_per_condition", config.synth.trials_per_condition},
                     {"experiment", config.synth.experiment},
                     {"noise_sigma_uv", config.synth.noise_sigma_uv},
                     {"master_seed", config.synth.master_seed},
                     {"inter_trial_s", config.synth.inter_trial_s},
                     {"lead_in_s", config.synth.lead_in_s},
                     {"blink_rate_per_min", config.synth.blink_rate_per_min},
                     {"blink_amplitude_uv", config.synth.blink_amplitude_uv}};
    write_file_atomic(path, root.dump(2) + "\n");
}

void validate_pipeline_config(const PipelineConfig& config, const Montage& montage) {
    for (const auto& [pid, channels] : config.bad_channels)
        for (const std::string& ch : channels)
            if (!montage.contains(ch))
                raise(ErrorCode::InvalidConfig,
                      "bad_channels for " + pid + " references unknown channel '" + ch + "'");
    for (const ErpWindow* window : {&config.p400, &config.n500}) {
        if (!(window->start_ms <= window->end_ms))
            raise(ErrorCode::InvalidConfig,
                  window->name + ": start_ms must not exceed end_ms");
        if (window->start_ms < -500.0 || window->end_ms >= 600.0)
            raise(ErrorCode::InvalidConfig,
                  window->name + ": window must lie inside the epoch range [-500, 600)");
        for (const std::string& e : window->electrodes)
            if (!montage.contains(e))
                raise(ErrorCode::InvalidConfig,
                      window->name + ": unknown electrode '" + e + "'");
    }
    if (!(config.rejection_threshold_uv > 0.0))
        raise(ErrorCode::InvalidConfig, "rejection_threshold_uv must be > 0");
    if (config.classifier.n_kernels == 0)
        raise(ErrorCode::InvalidConfig, "classifier.n_kernels must be >= 1");
    for (double alpha : config.classifier.alpha_grid)
        if (!(alpha > 0.0)) raise(ErrorCode::InvalidConfig, "alpha_grid entries must be > 0");
    if (config.split.n_train == 0 || config.split.n_test == 0)
        raise(ErrorCode::InvalidConfig, "split sizes must be >= 1");
}

// -------------------------------------------------------------- stage order

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Rereference: return "rereference";
        case Stage::Bandpass: return "bandpass";
        case Stage::Interpolate: return "interpolate";
        case Stage::Ica: return "ica";
        case Stage::Epoch: return "epoch";
        case Stage::Baseline: return "baseline";
        case Stage::Reject: return "reject";
    }
    return "unknown";
}

void validate_stage_order(const std::vector<Stage>& stages) {
    static constexpr Stage kCanonical[] = {Stage::Rereference, Stage::Bandpass,
                                           Stage::Interpolate, Stage::Ica,
                                           Stage::Epoch,       Stage::Baseline,
                                           Stage::Reject};
    const auto optional = [](Stage s) { return s == Stage::Interpolate || s == Stage::Ica; };
    std::size_t pos = 0;
    for (Stage want : kCanonical) {
        if (pos < stages.size() && stages[pos] == want) {
            ++pos;
            continue;
        }
        if (!optional(want))
            raise(ErrorCode::StageOrderViolation,
                  std::string("expected stage '") + stage_name(want) + "' but found '" +
                      (pos < stages.size() ? stage_name(stages[pos]) : "end of chain") + "'");
    }
    if (pos != stages.size())
        raise(ErrorCode::StageOrderViolation,
              std::string("unexpected stage '") + stage_name(stages[pos]) +
                  "' after the chain completed");
}

// -------------------------------------------------------------- file layout

static std::string under(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string manifest_path(const std::string& out_dir) { return under(out_dir, "manifest.txt"); }
std::string ground_truth_path(const std::string& out_dir) {
    return under(out_dir, "ground_truth.txt");
}
std::string epochs_dir(const std::string& out_dir) { return under(out_dir, "epochs"); }
std::string epochs_path(const std::string& out_dir, const std::string& participant_id) {
    return under(epochs_dir(out_dir), "epochs_" + participant_id + ".txt");
}
std::string reject_log_path(const std::string& out_dir) {
    return under(out_dir, "reject_log.txt");
}
std::string ica_log_path(const std::string& out_dir) { return under(out_dir, "ica_log.txt"); }
std::string stats_report_path(const std::string& out_dir) {
    return under(out_dir, "stats_report.txt");
}
std::string erp_report_path(const std::string& out_dir) {
    return under(out_dir, "erp_report.txt");
}
std::string models_dir(const std::string& out_dir) { return under(out_dir, "models"); }
std::string model_path(const std::string& out_dir, TaskKind task, const std::string& electrode) {
    return under(models_dir(out_dir),
                 std::string(task_kind_name(task)) + "_" + electrode + ".model");
}
std::string eval_report_path(const std::string& out_dir) {
    return under(out_dir, "eval_report.txt");
}
std::string classification_path(const std::string& out_dir) {
    return under(out_dir, "classification.txt");
}
std::string annotations_path(const std::string& out_dir) {
    return under(out_dir, "annotations.txt");
}
std::string sweep_report_path(const std::string& out_dir) {
    return under(out_dir, "sweep_report.txt");
}

// ----------------------------------------------------------------- simulate

SimulateSummary cmd_simulate(const PipelineConfig& config) {
    const Montage montage = builtin_montage();
    validate_pipeline_config(config, montage);
    fs::create_directories(config.out_dir);

    const SynthOutput cohort = generate_cohort(config.synth);
    write_montage(montage, under(config.out_dir, "montage.txt"));

    DatasetManifest manifest;
    manifest.dataset_name = "synthetic-cohort";
    manifest.sample_rate_hz = config.synth.sample_rate_hz;
    manifest.montage_path = under(config.out_dir, "montage.txt");
    for (const Recording& rec : cohort.recordings) {
        const std::string& pid = rec.participant_id;
        ManifestEntry entry;
        entry.participant_id = pid;
        entry.recording_path = under(config.out_dir, "rec_" + pid + ".txt");
        entry.events_path = under(config.out_dir, "events_" + pid + ".txt");
        entry.behavior_path = under(config.out_dir, "behavior_" + pid + ".txt");
        write_recording(rec, entry.recording_path);
        write_events(rec.events, entry.events_path);
        std::vector<TrialLog> logs;
        for (const TrialLog& log : cohort.logs)
            if (log.participant_id == pid) logs.push_back(log);
        write_behavior(logs, entry.behavior_path);
        manifest.participants.push_back(entry);
    }
    write_manifest(manifest, manifest_path(config.out_dir));

    std::ostringstream truth;
    truth << "GROUNDTRUTHv1\n";
    truth << "templates";
    for (const ErpTemplateSpec& tmpl : config.synth.templates) truth << "," << tmpl.name;
    truth << "\n";
    std::size_t n_pressed = 0;
    for (const TrialTruth& t : cohort.truth.trials) {
        truth << "trial," << t.participant_id << "," << t.trial_id << "," << t.clip_id << ","
              << t.condition.experiment << "," << condition_label_name(t.condition.label) << ","
              << t.event_sample << "," << (t.pressed ? 1 : 0);
        truth << ",";
        for (std::size_t j = 0; j < t.template_amplitude_uv.size(); ++j)
            truth << (j ? ";" : "") << format_double(t.template_amplitude_uv[j]);
        truth << ",";
        for (std::size_t j = 0; j < t.template_peak_ms.size(); ++j)
            truth << (j ? ";" : "") << format_double(t.template_peak_ms[j]);
        truth << "\n";
        if (t.pressed) ++n_pressed;
    }
    for (const auto& [pid, onsets] : cohort.truth.blink_onsets) {
        truth << "blinks," << pid << "," << onsets.size() << ",";
        for (std::size_t j = 0; j < onsets.size(); ++j)
            truth << (j ? ";" : "") << onsets[j];
        truth << "\n";
    }
    write_file_atomic(ground_truth_path(config.out_dir), truth.str());

    SimulateSummary summary;
    summary.manifest = manifest_path(config.out_dir);
    summary.n_participants = cohort.recordings.size();
    summary.n_trials = cohort.truth.trials.size();
    summary.n_pressed = n_pressed;
    return summary;
}

// --------------------------------------------------------------- preprocess

PreprocessSummary cmd_preprocess(const std::string& manifest, const PipelineConfig& config,
                                 int jobs) {
    const LoadedDataset ds = load_dataset(manifest);
    validate_pipeline_config(config, ds.montage);
    fs::create_directories(epochs_dir(config.out_dir));

    std::vector<ParticipantChainResult> results(ds.recordings.size());
    parallel_for(ds.recordings.size(), jobs, [&](std::size_t i) {
        results[i] = run_chain(ds.recordings[i], ds.montage, config);
        if (results[i].epochs.empty())
            raise(ErrorCode::InsufficientTrials,
                  ds.recordings[i].participant_id +
                      ": every epoch exceeded the rejection threshold");
        write_epochs(results[i].epochs,
                     epochs_path(config.out_dir, ds.recordings[i].participant_id));
    });

    std::ostringstream reject;
    reject << "REJECTLOGv1\n";
    reject << "participant,total,retained,rejected,rejected_trial_ids\n";
    PreprocessSummary summary;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const ParticipantChainResult& r = results[i];
        reject << ds.recordings[i].participant_id << "," << r.total << "," << r.epochs.size()
               << "," << r.rejected.size() << "," << join_plus(r.rejected) << "\n";
        summary.n_epochs += r.epochs.size();
        summary.n_rejected += r.rejected.size();
        summary.epoch_files.push_back(
            epochs_path(config.out_dir, ds.recordings[i].participant_id));
    }
    write_file_atomic(reject_log_path(config.out_dir), reject.str());

    if (config.ica.enabled) {
        std::ostringstream ica;
        ica << "ICALOGv1\n";
        ica << "participant,component,fpz_r,suggested,dropped,converged,iterations\n";
        for (std::size_t i = 0; i < results.size(); ++i) {
            const ParticipantChainResult& r = results[i];
            for (std::size_t k = 0; k < r.component_fpz_r.size(); ++k) {
                const bool suggested =
                    std::find(r.suggested.begin(), r.suggested.end(), k) != r.suggested.end();
                const bool dropped =
                    std::find(r.dropped.begin(), r.dropped.end(), k) != r.dropped.end();
                ica << ds.recordings[i].participant_id << "," << k << ","
                    << format_double(r.component_fpz_r[k]) << "," << (suggested ? 1 : 0) << ","
                    << (dropped ? 1 : 0) << "," << (r.ica_converged ? 1 : 0) << ","
                    << r.ica_iterations << "\n";
            }
        }
        write_file_atomic(ica_log_path(config.out_dir), ica.str());
    }
    return summary;
}

// ------------------------------------------------------------------- report

ReportSummary cmd_report(const std::string& manifest, const PipelineConfig& config) {
    const DatasetManifest mf = load_manifest(manifest);
    // load_manifest resolves montage_path against the manifest directory.
    const Montage montage = read_montage(mf.montage_path);
    validate_pipeline_config(config, montage);
    const BehaviorData behavior = load_behavior_data(mf);
    const std::vector<Epoch> epochs = read_epoch_files(mf, config.out_dir);

    std::ostringstream stats;
    stats << "STATSREPORTv1\n";
    stats << "test,scope,statistic,df,p,effect_size\n";
    ReportSummary summary;

    std::set<int> experiments;
    for (const TrialLog& log : behavior.logs) experiments.insert(log.condition.experiment);
    for (int experiment : experiments) {
        std::vector<TrialLog> logs;
        for (const TrialLog& log : behavior.logs)
            if (log.condition.experiment == experiment) logs.push_back(log);
        const ContingencyTable table =
            build_contingency(logs, experiment_labels(experiment));
        const TestResult chi = chi_square(table);
        stats << "chi_square,presses/experiment" << experiment << ","
              << format_double(chi.statistic) << "," << chi.df << ","
              << format_double(chi.p_two_tailed) << ",\n";
    }

    struct ContrastSpec {
        const ErpWindow* window;
        std::string electrode;
        ConditionLabel a;
        ConditionLabel b;
    };
    std::vector<ContrastSpec> contrasts;
    for (const std::string& e : config.p400.electrodes)
        contrasts.push_back({&config.p400, e, ConditionLabel::Occlusion, ConditionLabel::Control});
    for (const std::string& e : config.n500.electrodes)
        contrasts.push_back(
            {&config.n500, e, ConditionLabel::OccludedPedestrian, ConditionLabel::Control});
    for (const ContrastSpec& spec : contrasts) {
        const Condition cond_a{2, spec.a};
        const Condition cond_b{2, spec.b};
        std::size_t n_a = 0;
        std::size_t n_b = 0;
        for (const Epoch& e : epochs) {
            if (e.condition == cond_a) ++n_a;
            if (e.condition == cond_b) ++n_b;
        }
        if (n_a == 0 || n_b == 0) continue;
        const TestResult t =
            contrast_conditions(epochs, cond_a, cond_b, *spec.window, spec.electrode);
        stats << "paired_t," << spec.window->name << "/" << spec.electrode << "/"
              << condition_label_name(spec.a) << "-vs-" << condition_label_name(spec.b) << ","
              << format_double(t.statistic) << "," << t.df << ","
              << format_double(t.p_two_tailed) << ","
              << (t.effect_size ? format_double(*t.effect_size) : std::string()) << "\n";
        ++summary.n_contrasts;
    }
    write_file_atomic(stats_report_path(config.out_dir), stats.str());

    std::ostringstream erp;
    erp << "ERPREPORTv1\n";
    erp << "window,electrode,condition,n_trials,mean_uv\n";
    std::vector<Condition> present;
    for (const Epoch& e : epochs)
        if (std::find(present.begin(), present.end(), e.condition) == present.end())
            present.push_back(e.condition);
    std::sort(present.begin(), present.end(), [](const Condition& x, const Condition& y) {
        if (x.experiment != y.experiment) return x.experiment < y.experiment;
        const auto order = experiment_labels(x.experiment);
        return std::find(order.begin(), order.end(), x.label) <
               std::find(order.begin(), order.end(), y.label);
    });
    for (const ErpWindow* window : {&config.p400, &config.n500}) {
        for (const std::string& electrode : window->electrodes) {
            for (const Condition& condition : present) {
                const ErpAverage avg = grand_average(epochs, condition, electrode);
                erp << window->name << "," << electrode << ","
                    << condition_label_name(condition.label) << "," << avg.n_trials << ","
                    << format_double(window_amplitude(avg, *window, electrode)) << "\n";
            }
        }
    }
    write_file_atomic(erp_report_path(config.out_dir), erp.str());

    summary.stats_file = stats_report_path(config.out_dir);
    summary.erp_file = erp_report_path(config.out_dir);
    return summary;
}

// -------------------------------------------------------------------- train

static TrainedModelInfo train_one(const std::vector<Epoch>& epochs,
                                  const PipelineConfig& config, TaskKind task,
                                  const std::string& electrode, int jobs) {
    const TaskData data = make_task(epochs, task, electrode, config.split);
    FitOptions options;
    options.n_kernels = config.classifier.n_kernels;
    options.alpha_grid = config.classifier.alpha_grid;
    options.seed = config.classifier.seed;
    options.jobs = jobs;
    options.electrode = electrode;
    options.task_name = task_kind_name(task);
    options.positive_class = data.positive_class;
    options.negative_class = data.negative_class;
    const RocketModel model = fit(data.train, options);
    const std::string path = model_path(config.out_dir, task, electrode);
    save_model(model, path);

    TrainedModelInfo info;
    info.task = task;
    info.electrode = electrode;
    info.file = path;
    info.alpha = model.alpha;
    info.alpha_on_boundary = model.alpha_on_boundary;
    info.eval = evaluate(model, data.test);
    info.n_train = data.train.size();
    info.n_test = data.test.size();
    return info;
}

static void write_eval_report(const std::vector<TrainedModelInfo>& models,
                              const std::string& out_dir) {
    std::ostringstream eval;
    eval << "EVALREPORTv1\n";
    eval << "task,electrode,n_train,n_test,alpha,alpha_on_boundary,accuracy,tp,fp,tn,fn\n";
    for (const TrainedModelInfo& m : models)
        eval << task_kind_name(m.task) << "," << m.electrode << "," << m.n_train << ","
             << m.n_test << "," << format_double(m.alpha) << "," << (m.alpha_on_boundary ? 1 : 0)
             << "," << format_double(m.eval.accuracy) << "," << m.eval.tp << "," << m.eval.fp
             << "," << m.eval.tn << "," << m.eval.fn << "\n";
    write_file_atomic(eval_report_path(out_dir), eval.str());
}

TrainSummary cmd_train(const std::string& manifest, const PipelineConfig& config,
                       TaskKind task, const std::string& electrode, int jobs) {
    const DatasetManifest mf = load_manifest(manifest);
    const std::vector<Epoch> epochs = read_epoch_files(mf, config.out_dir);
    fs::create_directories(models_dir(config.out_dir));

    std::vector<std::string> electrodes;
    if (electrode.empty())
        electrodes = task_window(task).electrodes;
    else
        electrodes.push_back(electrode);

    TrainSummary summary;
    for (const std::string& e : electrodes)
        summary.models.push_back(train_one(epochs, config, task, e, jobs));
    write_eval_report(summary.models, config.out_dir);
    summary.eval_file = eval_report_path(config.out_dir);
    return summary;
}

TrainSummary cmd_train_all(const std::string& manifest, const PipelineConfig& config,
                           int jobs) {
    const DatasetManifest mf = load_manifest(manifest);
    const std::vector<Epoch> epochs = read_epoch_files(mf, config.out_dir);
    fs::create_directories(models_dir(config.out_dir));

    TrainSummary summary;
    for (TaskKind task : {TaskKind::OcclusionVsControl, TaskKind::PedestrianVsControl})
        for (const std::string& e : task_window(task).electrodes)
            summary.models.push_back(train_one(epochs, config, task, e, jobs));
    write_eval_report(summary.models, config.out_dir);
    summary.eval_file = eval_report_path(config.out_dir);
    return summary;
}

// ----------------------------------------------------------------- classify

ClassifySummary cmd_classify(const std::string& manifest, const PipelineConfig& config) {
    const DatasetManifest mf = load_manifest(manifest);
    const std::vector<Epoch> epochs = read_epoch_files(mf, config.out_dir);

    const std::string dir = models_dir(config.out_dir);
    std::vector<std::string> files;
    if (fs::is_directory(dir))
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".model")
                files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        raise(ErrorCode::ModelMissing, "no .model files under " + dir + "; run train first");

    std::ostringstream out;
    out << "CLASSIFYv1\n";
    out << "task,electrode,participant,trial_id,experiment,condition,score,predicted\n";
    ClassifySummary summary;
    for (const std::string& file : files) {
        const RocketModel model = load_model(file);
        const std::optional<TaskKind> kind = task_from_name(model.task_name);
        if (!kind)
            raise(ErrorCode::InvalidConfig,
                  file + ": unknown task '" + model.task_name + "', cannot pick a window");
        const ErpWindow window = task_window(*kind);
        for (const Epoch& epoch : epochs) {
            SeriesInstance inst;
            inst.values = window_samples(epoch, window, model.electrode);
            inst.participant_id = epoch.participant_id;
            inst.trial_id = epoch.trial_id;
            const Prediction pred = predict(model, {inst})[0];
            out << model.task_name << "," << model.electrode << "," << epoch.participant_id
                << "," << epoch.trial_id << "," << epoch.condition.experiment << ","
                << condition_label_name(epoch.condition.label) << ","
                << format_double(pred.score) << ","
                << (pred.label == SeriesLabel::Positive ? model.positive_class
                                                        : model.negative_class)
                << "\n";
            ++summary.n_records;
        }
    }
    write_file_atomic(classification_path(config.out_dir), out.str());
    summary.file = classification_path(config.out_dir);
    return summary;
}

// ----------------------------------------------------------------- annotate

AnnotateSummary cmd_annotate(const std::string& manifest, const PipelineConfig& config) {
    const DatasetManifest mf = load_manifest(manifest);
    const BehaviorData behavior = load_behavior_data(mf);
    const std::vector<Epoch> epochs = read_epoch_files(mf, config.out_dir);

    const std::vector<RocketModel> p400_models =
        load_task_models(config.out_dir, TaskKind::OcclusionVsControl);
    std::vector<std::string> missing;
    std::vector<RocketModel> n500_models;
    if (task_models_present(config.out_dir, TaskKind::PedestrianVsControl, &missing))
        n500_models = load_task_models(config.out_dir, TaskKind::PedestrianVsControl);
    const ErpWindow p400_win = task_window(TaskKind::OcclusionVsControl);
    const ErpWindow n500_win = task_window(TaskKind::PedestrianVsControl);

    std::map<std::string, const Epoch*> epoch_of;
    for (const Epoch& e : epochs) {
        epoch_of[trial_key(e.participant_id, e.trial_id)] = &e;
        for (const RocketModel& model : p400_models)
            if (std::find(e.channels.begin(), e.channels.end(), model.electrode) ==
                e.channels.end())
                raise(ErrorCode::ElectrodeMismatch,
                      "epochs for " + e.participant_id + " lack electrode '" + model.electrode +
                          "' required by the " + model.task_name + " models");
        for (const RocketModel& model : n500_models)
            if (std::find(e.channels.begin(), e.channels.end(), model.electrode) ==
                e.channels.end())
                raise(ErrorCode::ElectrodeMismatch,
                      "epochs for " + e.participant_id + " lack electrode '" + model.electrode +
                          "' required by the " + model.task_name + " models");
    }

    std::ostringstream out;
    out << "ANNOTv1\n";
    out << "clip_id,trial_id,behavioral_label,implicit_label,classifier_score,provenance\n";
    AnnotateSummary summary;
    for (const TrialLog& log : behavior.logs) {
        const std::string key = trial_key(log.participant_id, log.trial_id);
        const auto clip_it = behavior.clip_of.find(key);
        const std::string clip = clip_it != behavior.clip_of.end() ? clip_it->second : "-";
        std::string behavioral = "none";
        std::string implicit = "none";
        double score = 0.0;
        std::string provenance = "-";
        if (log.pressed) {
            behavioral = "overt_hazard";
            provenance = "press";
            ++summary.n_overt;
        } else {
            const auto epoch_it = epoch_of.find(key);
            if (epoch_it == epoch_of.end()) {
                provenance = "rejected";
            } else {
                const TaskVote p400_vote = vote_task(p400_models, p400_win, *epoch_it->second);
                score = p400_vote.mean_score;
                if (2 * p400_vote.positives > p400_models.size()) {
                    implicit = "covert_hazard";
                    provenance = "P400:" + join_plus(p400_vote.positive_electrodes);
                    ++summary.n_covert;
                } else if (!n500_models.empty()) {
                    const TaskVote n500_vote =
                        vote_task(n500_models, n500_win, *epoch_it->second);
                    if (2 * n500_vote.positives > n500_models.size()) {
                        implicit = "hazard";
                        score = n500_vote.mean_score;
                        provenance = "N500:" + join_plus(n500_vote.positive_electrodes);
                        ++summary.n_hazard;
                    }
                }
            }
        }
        out << clip << "," << log.trial_id << "," << behavioral << "," << implicit << ","
            << format_double(score) << "," << provenance << "\n";
        ++summary.n_trials;
    }
    write_file_atomic(annotations_path(config.out_dir), out.str());
    summary.file = annotations_path(config.out_dir);
    return summary;
}

// --------------------------------------------------------------- seed sweep

SweepSummary cmd_seed_sweep(const PipelineConfig& config, std::uint64_t first_seed,
                            std::size_t count, int jobs) {
    if (config.synth.experiment != 2)
        raise(ErrorCode::InvalidConfig,
              "seed sweep contrasts need the four-condition cohort (experiment 2)");
    if (count == 0) raise(ErrorCode::PreconditionViolated, "seed sweep needs count >= 1");
    const Montage montage = builtin_montage();
    validate_pipeline_config(config, montage);
    fs::create_directories(config.out_dir);

    std::ostringstream out;
    out << "SWEEPREPORTv1\n";
    out << "seed,t_p400_fpz,p_p400_fpz,d_p400_fpz,sig_p400,t_n500_af3,p_n500_af3,d_n500_af3,"
           "sig_n500,retention\n";
    SweepSummary summary;
    for (std::size_t s = 0; s < count; ++s) {
        SynthConfig synth = config.synth;
        synth.master_seed = first_seed + s;
        std::vector<ParticipantChainResult> results(synth.n_participants);
        parallel_for(synth.n_participants, jobs, [&](std::size_t p) {
            const SynthOutput one = generate_participant(synth, p);
            results[p] = run_chain(one.recordings[0], montage, config);
        });
        std::vector<Epoch> epochs;
        std::size_t total = 0;
        for (ParticipantChainResult& r : results) {
            total += r.total;
            for (Epoch& e : r.epochs) epochs.push_back(std::move(e));
        }

        SweepRow row;
        row.seed = synth.master_seed;
        row.p400_fpz = contrast_conditions(epochs, Condition{2, ConditionLabel::Occlusion},
                                           Condition{2, ConditionLabel::Control}, config.p400,
                                           "FPz");
        row.n500_af3 =
            contrast_conditions(epochs, Condition{2, ConditionLabel::OccludedPedestrian},
                                Condition{2, ConditionLabel::Control}, config.n500, "AF3");
        row.retention = total == 0 ? 1.0
                                   : static_cast<double>(epochs.size()) /
                                         static_cast<double>(total);
        const bool sig_p =
            row.p400_fpz.statistic > 0.0 && row.p400_fpz.p_two_tailed / 2.0 < 0.05;
        const bool sig_n =
            row.n500_af3.statistic < 0.0 && row.n500_af3.p_two_tailed / 2.0 < 0.05;
        if (sig_p) ++summary.n_significant_p400;
        if (sig_n) ++summary.n_significant_n500;
        out << row.seed << "," << format_double(row.p400_fpz.statistic) << ","
            << format_double(row.p400_fpz.p_two_tailed) << ","
            << format_double(row.p400_fpz.effect_size.value_or(0.0)) << "," << (sig_p ? 1 : 0)
            << "," << format_double(row.n500_af3.statistic) << ","
            << format_double(row.n500_af3.p_two_tailed) << ","
            << format_double(row.n500_af3.effect_size.value_or(0.0)) << "," << (sig_n ? 1 : 0)
            << "," << format_double(row.retention) << "\n";
        summary.rows.push_back(row);
    }
    out << "summary," << summary.rows.size() << "," << summary.n_significant_p400 << ","
        << summary.n_significant_n500 << "\n";
    write_file_atomic(sweep_report_path(config.out_dir), out.str());
    summary.file = sweep_report_path(config.out_dir);
    return summary;
}

} // namespace hazerp
