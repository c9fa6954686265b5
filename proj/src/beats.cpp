#include "bcg2ecg/beats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcg2ecg {

namespace {

// Local maxima; plateaus report their middle sample.
std::vector<std::size_t> local_maxima(const std::vector<double>& x) {
    std::vector<std::size_t> peaks;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i] > x[i - 1]) {
            std::size_t ahead = i + 1;
            while (ahead < n && x[ahead] == x[i]) ++ahead;
            if (ahead < n && x[ahead] < x[i]) {
                peaks.push_back(i + (ahead - 1 - i) / 2);
                i = ahead;
                continue;
            }
            i = ahead;
        } else {
            ++i;
        }
    }
    return peaks;
}

}  // namespace

double peak_prominence(const std::vector<double>& x, std::size_t peak) {
    const double h = x[peak];
    // walk outward until a strictly higher sample or the edge; the base on
    // each side is the minimum over that stretch
    double left_min = h;
    for (std::size_t i = peak; i-- > 0;) {
        if (x[i] > h) break;
        left_min = std::min(left_min, x[i]);
    }
    double right_min = h;
    for (std::size_t i = peak + 1; i < x.size(); ++i) {
        if (x[i] > h) break;
        right_min = std::min(right_min, x[i]);
    }
    return h - std::max(left_min, right_min);
}

namespace {

BeatSeries pick_peaks(const std::vector<double>& x, const PeakConfig& cfg, double rate_hz) {
    cfg.validate();
    BeatSeries out;
    if (x.size() < 3) return out;

    auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double range = *mx - *mn;
    if (range <= 0.0) return out;  // flat/degenerate
    const double threshold = cfg.min_prominence_frac * range;

    struct Candidate {
        std::size_t idx;
        double prominence;
    };
    std::vector<Candidate> cands;
    for (std::size_t p : local_maxima(x)) {
        double prom = peak_prominence(x, p);
        if (prom >= threshold) cands.push_back({p, prom});
    }
    // greedy by descending prominence; ties resolved by the lower index so
    // selection is deterministic
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.prominence != b.prominence) return a.prominence > b.prominence;
        return a.idx < b.idx;
    });

    std::vector<std::size_t> kept;
    for (const auto& c : cands) {
        bool ok = true;
        for (std::size_t k : kept)
            if (std::llabs(static_cast<long long>(k) - static_cast<long long>(c.idx)) <
                cfg.min_distance_samples) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(c.idx);
    }
    std::sort(kept.begin(), kept.end());

    out.beat_indices = std::move(kept);
    for (std::size_t i = 1; i < out.beat_indices.size(); ++i)
        out.rr_intervals_s.push_back(
            static_cast<double>(out.beat_indices[i] - out.beat_indices[i - 1]) / rate_hz);
    return out;
}

}  // namespace

BeatSeries find_rpeaks(const std::vector<double>& ecg, const PeakConfig& cfg, double rate_hz) {
    return pick_peaks(ecg, cfg, rate_hz);
}

std::vector<double> energy_envelope(const std::vector<double>& x, int window) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (x[i] - mean) * (x[i] - mean);

    // centered moving mean, clamped at the edges
    const int half = window / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sq[i];
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= static_cast<std::size_t>(half) ? i - half : 0;
        std::size_t hi = std::min(n, i + static_cast<std::size_t>(window - half));
        env[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return env;
}

BeatSeries lydon_baseline(const std::vector<double>& bcg, const PeakConfig& cfg,
                          double rate_hz) {
    cfg.validate();
    if (bcg.empty()) return {};
    std::vector<double> env = energy_envelope(bcg, cfg.envelope_window_samples);
    return pick_peaks(env, cfg, rate_hz);
}

RrResult rr_from_beats(const BeatSeries& beats, double rate_hz) {
    if (rate_hz <= 0.0) throw BeatError("rr_from_beats: rate must be positive");
    RrResult res;
    if (beats.n_beats() < 2) {
        res.excluded = true;
        return res;
    }
    for (std::size_t i = 1; i < beats.beat_indices.size(); ++i) {
        if (beats.beat_indices[i] <= beats.beat_indices[i - 1])
            throw BeatError("rr_from_beats: beat indices must be strictly increasing");
        double rr = static_cast<double>(beats.beat_indices[i] - beats.beat_indices[i - 1]) /
                    rate_hz;
        if (rr > kRrMinS && rr <= kRrMaxS)
            res.rr_s.push_back(rr);
        else
            ++res.n_discarded;
    }
    if (res.rr_s.empty()) res.excluded = true;
    return res;
}

}  // namespace bcg2ecg
