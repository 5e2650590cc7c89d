#pragma once

#include "hazerp/dsp.hpp"
#include "hazerp/erp.hpp"
#include "hazerp/ingest.hpp"
#include "hazerp/synth.hpp"
#include "hazerp/tsc.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hazerp {

struct ClassifierConfig {
    std::size_t n_kernels = 1000;
    std::uint64_t seed = 0;
    std::vector<double> alpha_grid; // empty means default_alpha_grid()
};

struct IcaConfig {
    bool enabled = false;
    std::uint64_t seed = 0;
    // Components dropped per participant; participants not listed keep all
    // components. Components whose activation correlates with FPz at or above
    // the threshold are logged as suggestions, never dropped automatically.
    std::map<std::string, std::vector<std::size_t>> drop;
    double blink_correlation_threshold = 0.7;
};

// One config drives every command. The classifier always slices the preset
// task windows it was trained on; the window overrides here feed the report
// tables only.
struct PipelineConfig {
    SynthConfig synth;
    FilterSpec filter;
    std::map<std::string, std::vector<std::string>> bad_channels; // per participant
    IcaConfig ica;
    double rejection_threshold_uv = 100.0;
    ErpWindow p400;
    ErpWindow n500;
    ClassifierConfig classifier;
    SplitSpec split;
    std::string out_dir = ".";
};

PipelineConfig default_pipeline_config();

// JSON object with optional keys: out_dir, filter, bad_channels, ica,
// rejection_threshold_uv, windows, classifier, split, synth. Unknown keys are
// SchemaError so typos cannot silently fall back to defaults. Grammar in
// docs/formats.md.
PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& config, const std::string& path);

// Channel references must exist in the montage and window bounds must lie
// inside the epoch range; raises InvalidConfig.
void validate_pipeline_config(const PipelineConfig& config, const Montage& montage);

// Preprocessing stages in their only legal order. Interpolate and Ica are
// optional; the rest are mandatory.
enum class Stage { Rereference, Bandpass, Interpolate, Ica, Epoch, Baseline, Reject };
const char* stage_name(Stage stage);

// Raises StageOrderViolation unless `stages` is the canonical chain with
// zero or more of the optional stages omitted.
void validate_stage_order(const std::vector<Stage>& stages);

// File names under out_dir, shared by the commands and their tests.
std::string manifest_path(const std::string& out_dir);
std::string ground_truth_path(const std::string& out_dir);
std::string epochs_dir(const std::string& out_dir);
std::string epochs_path(const std::string& out_dir, const std::string& participant_id);
std::string reject_log_path(const std::string& out_dir);
std::string ica_log_path(const std::string& out_dir);
std::string stats_report_path(const std::string& out_dir);
std::string erp_report_path(const std::string& out_dir);
std::string models_dir(const std::string& out_dir);
std::string model_path(const std::string& out_dir, TaskKind task, const std::string& electrode);
std::string eval_report_path(const std::string& out_dir);
std::string classification_path(const std::string& out_dir);
std::string annotations_path(const std::string& out_dir);
std::string sweep_report_path(const std::string& out_dir);

struct SimulateSummary {
    std::string manifest;
    std::size_t n_participants = 0;
    std::size_t n_trials = 0;
    std::size_t n_pressed = 0;
};

// Writes the synthetic dataset (montage, recordings, events, behavior,
// manifest) plus the GROUNDTRUTHv1 sidecar into config.out_dir.
SimulateSummary cmd_simulate(const PipelineConfig& config);

struct PreprocessSummary {
    std::size_t n_epochs = 0;
    std::size_t n_rejected = 0;
    std::vector<std::string> epoch_files; // manifest participant order
};

// Full chain per participant: rereference, bandpass, interpolate bad
// channels, optional ICA component removal, epoch extraction, baseline
// correction, peak-to-peak rejection. Writes one EPOCHSv1 file per
// participant, a REJECTLOGv1 summary, and an ICALOGv1 log when ICA ran.
PreprocessSummary cmd_preprocess(const std::string& manifest, const PipelineConfig& config,
                                 int jobs);

struct ReportSummary {
    std::string stats_file;
    std::string erp_file;
    std::size_t n_contrasts = 0;
};

// STATSREPORTv1: press contingency chi-square per experiment present, then
// the six window contrasts (P400 electrodes, occlusion vs control; N500
// electrodes, occluded pedestrian vs control). ERPREPORTv1: per-condition
// trial counts and mean window amplitude per window and electrode.
ReportSummary cmd_report(const std::string& manifest, const PipelineConfig& config);

struct TrainedModelInfo {
    TaskKind task = TaskKind::OcclusionVsControl;
    std::string electrode;
    std::string file;
    double alpha = 0.0;
    bool alpha_on_boundary = false;
    EvalResult eval;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

struct TrainSummary {
    std::vector<TrainedModelInfo> models;
    std::string eval_file;
};

// Trains one model per (task, electrode in the task window's electrode set),
// evaluates on the held-out split, saves ROCKETv1 files and EVALREPORTv1.
// Empty `electrode` trains the full set; otherwise the one named model.
TrainSummary cmd_train(const std::string& manifest, const PipelineConfig& config,
                       TaskKind task, const std::string& electrode, int jobs);
TrainSummary cmd_train_all(const std::string& manifest, const PipelineConfig& config, int jobs);

struct ClassifySummary {
    std::string file;
    std::size_t n_records = 0;
};

// Applies every model file under models_dir to every epoch carrying its
// electrode, emitting CLASSIFYv1 rows (score and label per trial per model).
ClassifySummary cmd_classify(const std::string& manifest, const PipelineConfig& config);

struct AnnotateSummary {
    std::string file;
    std::size_t n_trials = 0;
    std::size_t n_overt = 0;
    std::size_t n_covert = 0;
    std::size_t n_hazard = 0;
};

// Fuses behavior and classifiers into ANNOTv1, one record per behavior-log
// trial. Precedence: pressed => overt_hazard (provenance "press"); else the
// three P400-task models majority-vote, strict majority positive =>
// covert_hazard with score = mean decision value; else, when the N500-task
// models are also on disk, the same vote marks hazard; otherwise none.
// Trials whose epoch was rejected carry provenance "rejected" and score 0.
AnnotateSummary cmd_annotate(const std::string& manifest, const PipelineConfig& config);

struct SweepRow {
    std::uint64_t seed = 0;
    TestResult p400_fpz;
    TestResult n500_af3;
    double retention = 1.0;
};

struct SweepSummary {
    std::string file;
    std::vector<SweepRow> rows;
    std::size_t n_significant_p400 = 0; // two-tailed p < .05, positive t
    std::size_t n_significant_n500 = 0; // two-tailed p < .05, negative t
};

// Regenerates the synthetic cohort for `count` consecutive master seeds,
// runs the in-memory preprocess chain and the two headline contrasts, and
// writes SWEEPREPORTv1.
SweepSummary cmd_seed_sweep(const PipelineConfig& config, std::uint64_t first_seed,
                            std::size_t count, int jobs);

} // namespace hazerp
