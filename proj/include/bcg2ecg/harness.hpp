#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bcg2ecg/beats.hpp"
#include "bcg2ecg/metrics.hpp"
#include "bcg2ecg/recording.hpp"
#include "bcg2ecg/training.hpp"

namespace bcg2ecg {

struct HarnessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FoldMode { segment, subject };

// 5-way split of segments (segment mode) or subjects (subject mode).
// Folds are pairwise disjoint and cover the population.
struct FoldPlan {
    FoldMode mode = FoldMode::segment;
    std::vector<std::vector<std::size_t>> segment_folds;   // indices into the dataset
    std::vector<std::vector<std::string>> subject_folds;   // subject ids
    std::uint64_t seed = 0;

    std::size_t n_folds() const {
        return mode == FoldMode::segment ? segment_folds.size() : subject_folds.size();
    }
};

// Seeded shuffle then round-robin: fold sizes differ by at most one.
FoldPlan make_segment_folds(const std::vector<SegmentPair>& segments, std::uint64_t seed,
                            int n_folds = 5);

// Fold sizes used for the paper's cohorts: the first n-1 folds take
// round(n_subjects / n_folds) and the last takes the remainder
// (46 -> 9,9,9,9,10; 28 -> 6,6,6,6,4; 74 -> 15,15,15,15,14).
std::vector<int> paper_fold_counts(int n_subjects, int n_folds = 5);

// Subject folds honoring per-fold counts. When dataset_tags assigns subjects
// to cohorts, the per-fold counts are derived per cohort and composed, so
// every fold contains subjects from every cohort. Explicit mode_counts
// override the totals (and must match the composition when tags are given).
FoldPlan make_subject_folds(const std::vector<std::string>& subjects,
                            const std::map<std::string, std::string>& dataset_tags,
                            const std::vector<int>& mode_counts, std::uint64_t seed,
                            int n_folds = 5);

enum class Precision { f32, f64 };

struct CvOptions {
    ModelConfig model;
    TrainConfig train;
    PeakConfig peaks;
    Precision precision = Precision::f64;
    double rate_hz = 100.0;  // segment sample rate for RR conversion
};

struct FoldResult {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    AgreementReport proposed;  // beats from predicted ECG vs ground truth
    AgreementReport baseline;  // Lydon-on-BCG vs ground truth
    double final_train_loss = 0.0;
    double train_seconds = 0.0;
};

struct CvResult {
    FoldMode mode = FoldMode::segment;
    std::vector<FoldResult> folds;
    AgreementReport pooled_proposed;  // all test segments concatenated
    AgreementReport pooled_baseline;
    std::size_t total_segments = 0;   // segments entering the pooled comparison
};

// The 5 train/test cycles: train on 4 folds, predict the held-out fold,
// detect beats on the prediction and on the raw BCG baseline, compare both
// against ground-truth ECG beats. Fold results are pooled before computing
// the Table-I-style coefficients; per-fold reports are kept as well.
CvResult run_cv(const std::vector<SegmentPair>& dataset, const FoldPlan& plan,
                const CvOptions& opts);

// Per-segment metric extraction shared by run_cv and the evaluate command.
MetricsBySegment metrics_from_beats(
    const std::map<SegmentKey, BeatSeries>& beats_by_segment, double rate_hz,
    std::size_t* n_excluded = nullptr);

// beats.csv: subject_id,segment_index,source,beat_indices (space-separated)
void write_beats_csv(const std::filesystem::path& path,
                     const std::map<SegmentKey, BeatSeries>& beats, const std::string& source);
std::map<SegmentKey, BeatSeries> read_beats_csv(const std::filesystem::path& path);

// table1.csv: dataset,mode,total_segments,metric,proposed_r,baseline_r
void write_table1_csv(const std::filesystem::path& path, const std::string& dataset_name,
                      const CvResult& result);

void write_agreement_json(const std::filesystem::path& path, const AgreementReport& proposed,
                          const AgreementReport* baseline = nullptr);
void write_bland_altman_csv(const std::filesystem::path& path, const AgreementReport& report);
void write_histogram_csv(const std::filesystem::path& path, const AgreementReport& report);
void write_fold_json(const std::filesystem::path& path, const CvResult& result);
void write_loss_history_csv(const std::filesystem::path& path,
                            const std::vector<double>& history);

// All file outputs in this project go through a temp-file + rename so a
// failed run leaves no partial artifact behind.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(const std::filesystem::path&)>& writer);

}  // namespace bcg2ecg
