#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcg2ecg/recording.hpp"
#include "bcg2ecg/rng.hpp"

namespace bcg2ecg {

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Paired ECG/BCG generator with known beat times: the stand-in for the
// private cohorts and the oracle for end-to-end checks. Waveforms are
// idealized templates; the claims under test concern beat timing.
struct SynthConfig {
    int n_subjects = 1;
    double duration_s = 600.0;
    double base_hr_bpm = 70.0;
    double hrv_rmssd_target_ms = 30.0;
    double rj_interval_ms = 200.0;
    double j_peak_dominance = 0.9;  // 1 = clean dominant J-peak, 0 = diffuse
    double noise_snr_db = 15.0;     // vs the dominance-1 beat-train RMS
    double respiration_hz = 0.25;
    double respiration_amp = 0.8;   // relative to the unit J-peak
    double subject_variation = 0.0; // per-subject morphology spread in [0,1]
    double sample_rate_hz = 500.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subjects < 1) throw SynthError("n_subjects must be >= 1");
        if (duration_s <= 0.0) throw SynthError("duration_s must be positive");
        if (!(base_hr_bpm > 30.0 && base_hr_bpm < 200.0))
            throw SynthError("base_hr_bpm must be in (30, 200)");
        if (!(rj_interval_ms > 50.0 && rj_interval_ms < 400.0))
            throw SynthError("rj_interval_ms must be in (50, 400)");
        if (!(j_peak_dominance >= 0.0 && j_peak_dominance <= 1.0))
            throw SynthError("j_peak_dominance must be in [0,1]");
        if (hrv_rmssd_target_ms < 0.0) throw SynthError("hrv_rmssd_target_ms must be >= 0");
        if (respiration_hz <= 0.0) throw SynthError("respiration_hz must be positive");
        if (sample_rate_hz < 100.0) throw SynthError("sample_rate_hz must be >= 100");
        if (!(subject_variation >= 0.0 && subject_variation <= 1.0))
            throw SynthError("subject_variation must be in [0,1]");
    }
};

// Qualitative stand-ins for the two cohorts: clean dominant J-peaks vs
// diffuse low-SNR morphology with more HRV.
SynthConfig lab_preset();
SynthConfig elder_preset();

struct SynthRecording {
    Recording recording;
    std::vector<double> beat_times_s;  // ground-truth R-peak times
};

// RR series at the configured base HR with AR(1) jitter scaled so the
// empirical RMSSD lands near hrv_rmssd_target_ms.
std::vector<double> generate_rr_series(const SynthConfig& cfg);

// One subject: ECG pulse train (Gaussian R spikes plus small P/T bumps) and
// a 4-channel BCG whose per-beat IJK-like wavelet lags the R-peak by
// rj_interval, over a respiration sinusoid and white noise.
SynthRecording synthesize_pair(const std::vector<double>& rr, const SynthConfig& cfg,
                               const std::string& subject_id);

// Whole cohort with per-subject derived seeds (and, when subject_variation
// is on, per-subject morphology draws). Subject ids are s01, s02, ...
std::vector<SynthRecording> generate_cohort(const SynthConfig& cfg);

}  // namespace bcg2ecg
