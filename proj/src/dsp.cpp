#include "bcg2ecg/dsp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>

namespace bcg2ecg {

namespace {

using cplx = std::complex<double>;

// Butterworth analog lowpass prototype poles in the upper half plane
// (plus the real pole for odd orders). Conjugates are implied.
std::vector<cplx> prototype_upper_poles(int order) {
    std::vector<cplx> poles;
    for (int k = 0; k < order / 2; ++k) {
        double phi = M_PI * (2.0 * k + 1.0) / (2.0 * order) + M_PI / 2.0;
        poles.emplace_back(std::cos(phi), std::sin(phi));
    }
    if (order % 2 != 0) poles.emplace_back(-1.0, 0.0);
    return poles;
}

cplx bilinear(cplx s, double fs) {
    double k = 2.0 * fs;
    return (k + s) / (k - s);
}

double prewarp(double f_hz, double fs_hz) {
    return 2.0 * fs_hz * std::tan(M_PI * f_hz / fs_hz);
}

Biquad biquad_from_conj_pair(cplx pole, double b0, double b1, double b2) {
    return {b0, b1, b2, -2.0 * pole.real(), std::norm(pole)};
}

Biquad biquad_from_real_pair(double p1, double p2, double b0, double b1, double b2) {
    return {b0, b1, b2, -(p1 + p2), p1 * p2};
}

void check_stable(const std::vector<Biquad>& sections, const char* what) {
    for (const auto& s : sections) {
        // roots of z^2 + a1 z + a2 inside the unit circle iff
        // |a2| < 1 and |a1| < 1 + a2 (Jury criterion for 2nd order)
        if (!(std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2))
            throw DspError(std::string(what) +
                           ": unstable design, cutoffs too close to Nyquist or zero");
    }
}

cplx eval_response(const std::vector<Biquad>& sections, double theta) {
    cplx zinv = std::exp(cplx(0.0, -theta));
    cplx h(1.0, 0.0);
    for (const auto& s : sections)
        h *= (s.b0 + s.b1 * zinv + s.b2 * zinv * zinv) /
             (1.0 + s.a1 * zinv + s.a2 * zinv * zinv);
    return h;
}

void normalize_gain(SosFilter& f, double theta_ref) {
    double mag = std::abs(eval_response(f.sections, theta_ref));
    if (!(mag > 0.0)) throw DspError("filter design: zero response at reference frequency");
    double per_section = std::pow(1.0 / mag, 1.0 / static_cast<double>(f.sections.size()));
    for (auto& s : f.sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
}

// steady-state direct-form-II-transposed state for unit DC input
std::array<double, 2> section_step_state(const Biquad& s) {
    double h = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z2 = s.b2 - s.a2 * h;
    double z1 = s.b1 - s.a1 * h + z2;
    return {z1, z2};
}

std::vector<double> sos_forward(const std::vector<Biquad>& sections, std::vector<double> x,
                                double x0) {
    double dc_in = x0;
    for (const auto& s : sections) {
        auto zi = section_step_state(s);
        double z1 = zi[0] * dc_in, z2 = zi[1] * dc_in;
        for (double& v : x) {
            double y = s.b0 * v + z1;
            z1 = s.b1 * v - s.a1 * y + z2;
            z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
        dc_in *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    }
    return x;
}

}  // namespace

std::size_t PreprocessConfig::window_samples() const {
    return static_cast<std::size_t>(std::llround(window_s * target_rate_hz));
}

std::size_t PreprocessConfig::step_samples() const {
    return static_cast<std::size_t>(std::llround(step_s * target_rate_hz));
}

void PreprocessConfig::validate() const {
    if (target_rate_hz <= 0.0) throw DspError("target_rate_hz must be positive");
    if (band_low_hz <= 0.0) throw DspError("band_low_hz must be positive");
    if (band_low_hz >= band_high_hz) throw DspError("band_low_hz must be below band_high_hz");
    if (band_high_hz >= target_rate_hz / 2.0)
        throw DspError("band_high_hz must be below the Nyquist rate (target_rate_hz / 2)");
    if (filter_order < 1) throw DspError("filter_order must be positive");
    if (window_s <= 0.0) throw DspError("window_s must be positive");
    if (step_s <= 0.0) throw DspError("step_s must be positive");
    double w = window_s * target_rate_hz;
    if (std::abs(w - std::llround(w)) > 1e-9)
        throw DspError("window_s * target_rate_hz must be an integer sample count");
    if (step_samples() < 1) throw DspError("step_s is below one sample at the target rate");
}

SosFilter design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs_hz) {
    if (order < 1) throw DspError("bandpass: order must be >= 1");
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0))
        throw DspError("bandpass: need 0 < low < high < fs/2");

    double wl = prewarp(low_hz, fs_hz);
    double wh = prewarp(high_hz, fs_hz);
    double w0sq = wl * wh;
    double bw = wh - wl;

    SosFilter f;
    for (cplx p : prototype_upper_poles(order)) {
        // lowpass -> bandpass: each prototype pole spawns the two roots of
        // s^2 - p*bw*s + w0^2
        cplx half = p * bw * 0.5;
        cplx rad = std::sqrt(half * half - cplx(w0sq, 0.0));
        cplx s1 = half + rad;
        cplx s2 = half - rad;
        if (p.imag() > 0.0) {
            // conjugate partners come from conj(p); one biquad per root
            f.sections.push_back(biquad_from_conj_pair(bilinear(s1, fs_hz), 1.0, 0.0, -1.0));
            f.sections.push_back(biquad_from_conj_pair(bilinear(s2, fs_hz), 1.0, 0.0, -1.0));
        } else {
            // real prototype pole (odd order): both roots form one section
            cplx z1 = bilinear(s1, fs_hz), z2 = bilinear(s2, fs_hz);
            if (std::abs(s1.imag()) > 1e-12)
                f.sections.push_back(biquad_from_conj_pair(z1, 1.0, 0.0, -1.0));
            else
                f.sections.push_back(biquad_from_real_pair(z1.real(), z2.real(), 1.0, 0.0, -1.0));
        }
    }
    check_stable(f.sections, "bandpass");
    double theta0 = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs_hz));
    normalize_gain(f, theta0);
    return f;
}

SosFilter design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
    if (order < 1) throw DspError("lowpass: order must be >= 1");
    if (!(0.0 < cutoff_hz && cutoff_hz < fs_hz / 2.0))
        throw DspError("lowpass: need 0 < cutoff < fs/2");

    double wc = prewarp(cutoff_hz, fs_hz);
    SosFilter f;
    for (cplx p : prototype_upper_poles(order)) {
        cplx s = p * wc;
        if (p.imag() > 0.0)
            f.sections.push_back(biquad_from_conj_pair(bilinear(s, fs_hz), 1.0, 2.0, 1.0));
        else  // first-order tail for odd orders
            f.sections.push_back({1.0, 1.0, 0.0, -bilinear(s, fs_hz).real(), 0.0});
    }
    check_stable(f.sections, "lowpass");
    normalize_gain(f, 0.0);
    return f;
}

std::vector<double> SosFilter::apply(const std::vector<double>& x) const {
    if (x.empty()) return {};
    return sos_forward(sections, x, x.front());
}

std::vector<double> SosFilter::filtfilt(const std::vector<double>& x) const {
    if (x.empty()) return {};
    const std::size_t n = x.size();
    const std::size_t pad = std::min(n - 1, 3 * (2 * sections.size() + 1));

    // odd extension at both ends damps edge transients
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

    double lead = ext.front();
    ext = sos_forward(sections, std::move(ext), lead);
    std::reverse(ext.begin(), ext.end());
    lead = ext.front();
    ext = sos_forward(sections, std::move(ext), lead);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::size_t select_channel(const Recording& rec, std::size_t window_start,
                           std::size_t window_len) {
    if (rec.n_channels() == 0) throw DspError("select_channel: recording has no channels");
    if (window_len == 0) throw DspError("select_channel: empty window");
    if (window_start + window_len > rec.n_samples())
        throw DspError("select_channel: window exceeds recording bounds");

    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
        const auto& ch = rec.bcg_channels[c];
        double mean = std::accumulate(ch.begin() + window_start,
                                      ch.begin() + window_start + window_len, 0.0) /
                      static_cast<double>(window_len);
        double score = 0.0;
        for (std::size_t i = window_start; i < window_start + window_len; ++i)
            score += std::abs(ch[i] - mean);
        score /= static_cast<double>(window_len);
        if (score > best_score) {  // strict: ties keep the lowest index
            best_score = score;
            best = c;
        }
    }
    return best;
}

std::vector<double> resample(const std::vector<double>& x, double from_hz, double to_hz) {
    if (from_hz <= 0.0 || to_hz <= 0.0) throw DspError("resample: rates must be positive");
    if (from_hz < to_hz) throw DspError("resample: upsampling is not supported");
    if (from_hz == to_hz) return x;

    SosFilter aa = design_butterworth_lowpass(8, 0.45 * to_hz, from_hz);
    std::vector<double> filtered = aa.filtfilt(x);

    const double ratio = from_hz / to_hz;
    const auto out_len =
        static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) * to_hz / from_hz));
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        double pos = static_cast<double>(i) * ratio;
        auto idx = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(idx);
        if (idx + 1 < filtered.size())
            out[i] = filtered[idx] * (1.0 - frac) + filtered[idx + 1] * frac;
        else
            out[i] = filtered[idx];
    }
    return out;
}

std::vector<double> bandpass(const std::vector<double>& x, const PreprocessConfig& cfg) {
    cfg.validate();
    if (x.size() <= static_cast<std::size_t>(3 * cfg.filter_order))
        throw DspError("bandpass: signal too short for the filter order");
    SosFilter f = design_butterworth_bandpass(cfg.filter_order, cfg.band_low_hz,
                                              cfg.band_high_hz, cfg.target_rate_hz);
    return f.filtfilt(x);
}

Normalized normalize_unit(const std::vector<double>& x) {
    if (x.empty()) throw DspError("normalize_unit: empty input");
    auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    double mn = *mn_it, mx = *mx_it;
    Normalized out;
    if (mx == mn) {
        out.values.assign(x.size(), 0.5);
        out.degenerate = true;
        return out;
    }
    out.values.resize(x.size());
    double inv = 1.0 / (mx - mn);
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = (x[i] - mn) * inv;
    return out;
}

namespace {

SegmentPair make_segment(const std::vector<double>& bcg_win, const std::vector<double>& ecg_win,
                         const std::string& subject_id, std::uint32_t index, double start_s) {
    Normalized nb = normalize_unit(bcg_win);
    Normalized ne = normalize_unit(ecg_win);
    SegmentPair s;
    s.subject_id = subject_id;
    s.segment_index = index;
    s.start_time_s = start_s;
    s.degenerate = nb.degenerate || ne.degenerate;
    s.bcg.assign(nb.values.begin(), nb.values.end());
    s.ecg.assign(ne.values.begin(), ne.values.end());
    return s;
}

}  // namespace

std::vector<SegmentPair> segment(const std::vector<double>& bcg_filtered,
                                 const std::vector<double>& ecg_filtered,
                                 const PreprocessConfig& cfg, const std::string& subject_id) {
    cfg.validate();
    if (bcg_filtered.size() != ecg_filtered.size())
        throw DspError("segment: BCG and ECG lengths differ");
    const std::size_t W = cfg.window_samples();
    const std::size_t S = cfg.step_samples();
    const std::size_t T = bcg_filtered.size();
    if (T < W) throw DspError("segment: recording shorter than one window");

    const std::size_t K = (T - W) / S + 1;
    std::vector<SegmentPair> out;
    out.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t start = k * S;
        std::vector<double> bw(bcg_filtered.begin() + start, bcg_filtered.begin() + start + W);
        std::vector<double> ew(ecg_filtered.begin() + start, ecg_filtered.begin() + start + W);
        out.push_back(make_segment(bw, ew, subject_id, static_cast<std::uint32_t>(k),
                                   static_cast<double>(start) / cfg.target_rate_hz));
    }
    return out;
}

std::vector<SegmentPair> preprocess_recording(const Recording& rec, const PreprocessConfig& cfg) {
    cfg.validate();
    if (rec.sample_rate_hz < cfg.target_rate_hz)
        throw DspError("preprocess: recording rate below target rate");
    if (rec.n_channels() == 0) throw DspError("preprocess: recording has no channels");

    // downsample + bandpass every channel once; per-window selection then
    // just slices the filtered version of the chosen channel
    std::vector<std::vector<double>> filtered(rec.n_channels());
    for (std::size_t c = 0; c < rec.n_channels(); ++c)
        filtered[c] = bandpass(resample(rec.bcg_channels[c], rec.sample_rate_hz,
                                        cfg.target_rate_hz), cfg);
    // the ECG keeps its R-peak morphology: downsampled, never bandpassed
    std::vector<double> ecg_down = resample(rec.ecg, rec.sample_rate_hz, cfg.target_rate_hz);

    const std::size_t W = cfg.window_samples();
    const std::size_t S = cfg.step_samples();
    const std::size_t T = ecg_down.size();
    if (T < W) throw DspError("preprocess: recording shorter than one window");

    const auto raw_window =
        static_cast<std::size_t>(std::llround(cfg.window_s * rec.sample_rate_hz));
    const std::size_t K = (T - W) / S + 1;

    std::vector<SegmentPair> out;
    out.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t start = k * S;
        double start_s = static_cast<double>(start) / cfg.target_rate_hz;
        auto raw_start = static_cast<std::size_t>(std::llround(start_s * rec.sample_rate_hz));
        std::size_t raw_len = std::min(raw_window, rec.n_samples() - raw_start);
        std::size_t c = select_channel(rec, raw_start, raw_len);

        std::vector<double> bw(filtered[c].begin() + start, filtered[c].begin() + start + W);
        std::vector<double> ew(ecg_down.begin() + start, ecg_down.begin() + start + W);
        out.push_back(make_segment(bw, ew, rec.subject_id, static_cast<std::uint32_t>(k),
                                   start_s));
    }
    return out;
}

}  // namespace bcg2ecg
