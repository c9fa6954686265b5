#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcg2ecg {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-segment HR and HRV indices. HR uses the median RR; MHBI/RMSSD/SDNN
// are in milliseconds. RMSSD and SDNN need at least two intervals.
struct SegmentMetrics {
    double hr_bpm = 0.0;
    std::optional<double> mhbi_ms;
    std::optional<double> rmssd_ms;
    std::optional<double> sdnn_ms;
    std::size_t n_rr = 0;
};

SegmentMetrics segment_metrics(const std::vector<double>& rr_s);

// even-length lists take the mean of the central pair
double median(std::vector<double> v);

// sample Pearson r; nullopt when either side has zero variance
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

struct BlandAltman {
    double mean_diff = 0.0;
    double loa_low = 0.0;   // mean - 1.96 sd
    double loa_high = 0.0;  // mean + 1.96 sd
    std::vector<std::pair<double, double>> points;  // (pair mean, diff) rows for plotting
};

// d = x - y, sd with the N-1 denominator
BlandAltman bland_altman(const std::vector<double>& x, const std::vector<double>& y);

struct ErrorHistogram {
    double bin_width_bpm = 1.0;
    std::vector<std::size_t> counts;  // bins [k*w, (k+1)*w)
    std::size_t overflow = 0;         // >= overflow_at_bpm
    double overflow_at_bpm = 10.0;

    std::size_t total() const;
};

ErrorHistogram error_histogram(const std::vector<double>& hr_pred,
                               const std::vector<double>& hr_gt, double bin_width_bpm = 1.0);

// One pooled agreement summary between a candidate beat source and ground
// truth: Pearson per metric, Bland-Altman per metric, HR absolute-error
// histogram, inclusion counts.
struct MetricAgreement {
    std::optional<double> pearson_r;
    BlandAltman ba;
    std::size_t n_pairs = 0;
};

struct AgreementReport {
    MetricAgreement hr, mhbi, rmssd, sdnn;
    ErrorHistogram hr_abs_error;
    std::size_t n_segments_included = 0;  // pairs with HR on both sides
    std::size_t n_excluded = 0;           // dropped on either side
    double median_abs_hr_diff_bpm = 0.0;
};

// One side of a paired comparison: metrics keyed by (subject, segment index).
using SegmentKey = std::pair<std::string, std::uint32_t>;
using MetricsBySegment = std::map<SegmentKey, SegmentMetrics>;

// Pairs segments by key; a segment missing or excluded on either side is
// excluded pairwise and counted.
AgreementReport build_agreement(const MetricsBySegment& candidate,
                                const MetricsBySegment& ground_truth);

}  // namespace bcg2ecg
