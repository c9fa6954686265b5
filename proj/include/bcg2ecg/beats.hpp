#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bcg2ecg {

struct BeatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PeakConfig {
    int min_distance_samples = 25;     // 0.25 s refractory at 100 Hz
    double min_prominence_frac = 0.3;  // of the signal range
    int envelope_window_samples = 30;  // short-time energy window (baseline)

    void validate() const {
        if (min_distance_samples < 1) throw BeatError("min_distance_samples must be >= 1");
        if (!(min_prominence_frac > 0.0 && min_prominence_frac < 1.0))
            throw BeatError("min_prominence_frac must be in (0,1)");
        if (envelope_window_samples < 1) throw BeatError("envelope_window_samples must be >= 1");
    }
};

// Beat locations within one segment plus the raw successive RR intervals.
struct BeatSeries {
    std::vector<std::size_t> beat_indices;  // strictly increasing
    std::vector<double> rr_intervals_s;     // successive diffs / rate

    std::size_t n_beats() const { return beat_indices.size(); }
};

// physiological RR gate, seconds: RR must be in (min, max]
inline constexpr double kRrMinS = 0.25;
inline constexpr double kRrMaxS = 3.0;

struct RrResult {
    std::vector<double> rr_s;   // gated intervals
    std::size_t n_discarded = 0;
    bool excluded = false;  // < 2 beats or no usable RR; drop from metrics
};

// Local maxima with prominence >= min_prominence_frac * (max - min),
// selected greedily by descending prominence under the pairwise
// min-distance constraint. Flat input yields an empty series.
BeatSeries find_rpeaks(const std::vector<double>& ecg, const PeakConfig& cfg,
                       double rate_hz = 100.0);

// Baseline detector on the BCG itself: short-time energy envelope (moving
// mean of the squared mean-removed signal), then the same peak picking.
BeatSeries lydon_baseline(const std::vector<double>& bcg, const PeakConfig& cfg,
                          double rate_hz = 100.0);

// Successive beat index differences / rate, gated to (0.25, 3.0] s.
RrResult rr_from_beats(const BeatSeries& beats, double rate_hz);

// scipy-style topographic prominence of a local maximum at `peak`
double peak_prominence(const std::vector<double>& x, std::size_t peak);

std::vector<double> energy_envelope(const std::vector<double>& x, int window);

}  // namespace bcg2ecg
