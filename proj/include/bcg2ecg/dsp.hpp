#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bcg2ecg/recording.hpp"

namespace bcg2ecg {

struct DspError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreprocessConfig {
    double target_rate_hz = 100.0;
    double band_low_hz = 0.7;
    double band_high_hz = 10.0;
    int filter_order = 6;
    double window_s = 5.0;
    double step_s = 0.25;

    std::size_t window_samples() const;
    std::size_t step_samples() const;
    void validate() const;  // throws DspError naming the offending field
};

// Cascade of second-order sections. Designed from an analog Butterworth
// prototype via the bilinear transform with prewarped band edges.
struct Biquad {
    double b0, b1, b2;  // numerator
    double a1, a2;      // denominator (a0 normalized to 1)
};

struct SosFilter {
    std::vector<Biquad> sections;
    double gain = 1.0;

    std::vector<double> apply(const std::vector<double>& x) const;      // single pass
    std::vector<double> filtfilt(const std::vector<double>& x) const;   // zero-phase
};

// order = prototype order (pole count doubles for the bandpass).
SosFilter design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs_hz);
SosFilter design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

// Index of the channel with the highest mean |x - mean(x)| over
// [window_start, window_start + window_len); ties go to the lowest index.
std::size_t select_channel(const Recording& rec, std::size_t window_start,
                           std::size_t window_len);

// Anti-aliased resampling: zero-phase order-8 Butterworth lowpass at
// 0.45 * to_hz (applied when downsampling), then sampling at the rational
// positions i * from/to. Output length = floor(len * to_hz / from_hz).
std::vector<double> resample(const std::vector<double>& x, double from_hz, double to_hz);

// Zero-phase 6th-order (by default) Butterworth bandpass per the config.
std::vector<double> bandpass(const std::vector<double>& x, const PreprocessConfig& cfg);

struct Normalized {
    std::vector<double> values;
    bool degenerate = false;  // flat input, emitted as all 0.5
};
// (x - min) / (max - min) elementwise onto [0,1].
Normalized normalize_unit(const std::vector<double>& x);

// Sliding-window segmentation of one already-filtered signal pair at the
// target rate. Windows start at k*step; each window is normalized
// independently per signal.
std::vector<SegmentPair> segment(const std::vector<double>& bcg_filtered,
                                 const std::vector<double>& ecg_filtered,
                                 const PreprocessConfig& cfg, const std::string& subject_id);

// Full §II-C-style pipeline for one recording: per-window channel selection
// on the raw signals, downsampling, bandpass on BCG (ECG is downsampled
// only), segmentation, per-segment normalization.
std::vector<SegmentPair> preprocess_recording(const Recording& rec, const PreprocessConfig& cfg);

}  // namespace bcg2ecg
