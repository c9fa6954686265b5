#include "bcg2ecg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace bcg2ecg {

SynthConfig lab_preset() {
    SynthConfig cfg;
    cfg.j_peak_dominance = 0.9;
    cfg.noise_snr_db = 15.0;
    cfg.hrv_rmssd_target_ms = 25.0;
    return cfg;
}

SynthConfig elder_preset() {
    SynthConfig cfg;
    cfg.j_peak_dominance = 0.3;
    cfg.noise_snr_db = 5.0;
    cfg.hrv_rmssd_target_ms = 45.0;
    cfg.base_hr_bpm = 74.0;
    return cfg;
}

std::vector<double> generate_rr_series(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "rr"));
    const double base_rr = 60.0 / cfg.base_hr_bpm;

    // AR(1) jitter e_i = phi e_{i-1} + w_i. RMSSD of the series is
    // sqrt(2 (1-phi)) * sigma_e, so sigma_e is chosen from the target.
    const double phi = 0.7;
    const double sigma_e = (cfg.hrv_rmssd_target_ms / 1000.0) / std::sqrt(2.0 * (1.0 - phi));
    const double sigma_w = sigma_e * std::sqrt(1.0 - phi * phi);

    std::vector<double> rr;
    double t = 0.0;
    double e = sigma_e > 0.0 ? rng.normal(0.0, sigma_e) : 0.0;
    while (t < cfg.duration_s + 2.0) {
        double interval = std::clamp(base_rr + e, 0.35, 2.5);
        rr.push_back(interval);
        t += interval;
        e = phi * e + (sigma_w > 0.0 ? rng.normal(0.0, sigma_w) : 0.0);
    }
    return rr;
}

namespace {

void add_gaussian(std::vector<double>& sig, double fs, double center_s, double amp,
                  double sigma_s) {
    const double span = 4.0 * sigma_s;
    auto lo = static_cast<long>(std::floor((center_s - span) * fs));
    auto hi = static_cast<long>(std::ceil((center_s + span) * fs));
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(sig.size()) - 1);
    const double inv2s2 = 1.0 / (2.0 * sigma_s * sigma_s);
    for (long i = lo; i <= hi; ++i) {
        double dt = static_cast<double>(i) / fs - center_s;
        sig[i] += amp * std::exp(-dt * dt * inv2s2);
    }
}

void add_oscillation(std::vector<double>& sig, double fs, double center_s, double amp,
                     double freq_hz, double sigma_s) {
    const double span = 4.0 * sigma_s;
    auto lo = static_cast<long>(std::floor((center_s - span) * fs));
    auto hi = static_cast<long>(std::ceil((center_s + span) * fs));
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(sig.size()) - 1);
    const double inv2s2 = 1.0 / (2.0 * sigma_s * sigma_s);
    for (long i = lo; i <= hi; ++i) {
        double dt = static_cast<double>(i) / fs - center_s;
        sig[i] += amp * std::sin(2.0 * M_PI * freq_hz * dt) * std::exp(-dt * dt * inv2s2);
    }
}

// Morphology knobs one subject's waveforms are built from. Defaults mirror a
// textbook BCG: a narrow J bump plus a biphasic oscillation slightly after it.
struct Morphology {
    double j_sigma_s = 0.035;
    double osc_freq_hz = 4.5;
    double osc_sigma_s = 0.085;
    double osc_center_off_s = 0.05;
    double osc_amp_base = 0.45;
    double rj_offset_ms = 0.0;
    std::array<double, 4> channel_gains{1.0, 0.72, 0.55, 0.4};
};

Morphology draw_morphology(const SynthConfig& cfg, Rng& rng) {
    Morphology m;
    const double v = cfg.subject_variation;
    if (v > 0.0) {
        m.j_sigma_s *= 1.0 + v * rng.uniform(-0.35, 0.35);
        m.osc_freq_hz *= 1.0 + v * rng.uniform(-0.3, 0.3);
        m.osc_sigma_s *= 1.0 + v * rng.uniform(-0.3, 0.3);
        m.osc_center_off_s += v * rng.uniform(-0.03, 0.03);
        m.osc_amp_base *= 1.0 + v * rng.uniform(-0.4, 0.4);
        m.rj_offset_ms = v * rng.uniform(-40.0, 40.0);
        for (double& g : m.channel_gains) g *= 1.0 + v * rng.uniform(-0.25, 0.25);
    }
    return m;
}

std::vector<double> beat_train_bcg(const std::vector<double>& beats, double fs,
                                   std::size_t n, double dominance, double rj_s,
                                   const Morphology& m) {
    std::vector<double> sig(n, 0.0);
    // weaker J-peaks come with slightly stronger side oscillation, mimicking
    // the diffuse morphology of the low-dominance regime
    const double osc_amp = m.osc_amp_base + 0.25 * (1.0 - dominance);
    for (double tb : beats) {
        double tj = tb + rj_s;
        add_gaussian(sig, fs, tj, dominance, m.j_sigma_s);
        add_oscillation(sig, fs, tj + m.osc_center_off_s, osc_amp, m.osc_freq_hz,
                        m.osc_sigma_s);
    }
    return sig;
}

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

SynthRecording synthesize_with_morphology(const std::vector<double>& rr, const SynthConfig& cfg,
                                          const std::string& subject_id, const Morphology& m) {
    cfg.validate();
    if (rr.empty()) throw SynthError("synthesize_pair: empty RR series");
    const double fs = cfg.sample_rate_hz;
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
    Rng rng(derive_seed(cfg.seed, "wave"));

    // beat times from the cumulative RR series, first beat away from the edge
    std::vector<double> beats;
    double t = 0.45;
    for (double interval : rr) {
        if (t >= cfg.duration_s - 0.05) break;
        beats.push_back(t);
        t += interval;
    }
    if (beats.empty()) throw SynthError("synthesize_pair: duration too short for one beat");

    // ECG: R spike at each beat, small P before and T after
    std::vector<double> ecg(n, 0.0);
    for (double tb : beats) {
        add_gaussian(ecg, fs, tb, 1.0, 0.010);
        add_gaussian(ecg, fs, tb - 0.16, 0.12, 0.025);
        add_gaussian(ecg, fs, tb + 0.24, 0.22, 0.050);
    }
    for (double& v : ecg) v += rng.normal(0.0, 0.01);

    const double rj_s = (cfg.rj_interval_ms + m.rj_offset_ms) / 1000.0;
    std::vector<double> clean = beat_train_bcg(beats, fs, n, cfg.j_peak_dominance, rj_s, m);

    // noise floor referenced to the dominance-1 train so that lowering the
    // dominance is a genuine signal loss, not a matched noise reduction
    std::vector<double> ref = cfg.j_peak_dominance == 1.0
                                  ? clean
                                  : beat_train_bcg(beats, fs, n, 1.0, rj_s, m);
    const double noise_sigma = rms(ref) * std::pow(10.0, -cfg.noise_snr_db / 20.0);

    const double resp_phase = rng.uniform(0.0, 2.0 * M_PI);
    SynthRecording out;
    out.beat_times_s = beats;
    out.recording.subject_id = subject_id;
    out.recording.sample_rate_hz = fs;
    out.recording.ecg = std::move(ecg);
    out.recording.bcg_channels.assign(m.channel_gains.size(), std::vector<double>(n));
    for (std::size_t c = 0; c < m.channel_gains.size(); ++c) {
        auto& ch = out.recording.bcg_channels[c];
        const double g = m.channel_gains[c];
        for (std::size_t i = 0; i < n; ++i) {
            double ti = static_cast<double>(i) / fs;
            double resp = cfg.respiration_amp *
                          std::sin(2.0 * M_PI * cfg.respiration_hz * ti + resp_phase);
            ch[i] = g * (clean[i] + resp) + noise_sigma * rng.normal();
        }
    }
    return out;
}

}  // namespace

SynthRecording synthesize_pair(const std::vector<double>& rr, const SynthConfig& cfg,
                               const std::string& subject_id) {
    Rng morph_rng(derive_seed(cfg.seed, "morph"));
    return synthesize_with_morphology(rr, cfg, subject_id, draw_morphology(cfg, morph_rng));
}

std::vector<SynthRecording> generate_cohort(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<SynthRecording> out;
    out.reserve(cfg.n_subjects);
    for (int s = 0; s < cfg.n_subjects; ++s) {
        SynthConfig sub = cfg;
        sub.seed = derive_seed(cfg.seed, "subject:" + std::to_string(s));
        // spread resting HR across the cohort
        Rng subject_rng(derive_seed(sub.seed, "traits"));
        sub.base_hr_bpm = std::clamp(
            cfg.base_hr_bpm + subject_rng.uniform(-12.0, 12.0), 40.0, 180.0);

        char id[8];
        std::snprintf(id, sizeof(id), "s%02d", s + 1);
        out.push_back(synthesize_pair(generate_rr_series(sub), sub, id));
    }
    return out;
}

}  // namespace bcg2ecg
