#include "bcg2ecg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcg2ecg {

double median(std::vector<double> v) {
    if (v.empty()) throw MetricError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SegmentMetrics segment_metrics(const std::vector<double>& rr_s) {
    if (rr_s.empty()) throw MetricError("segment_metrics: empty RR list");
    SegmentMetrics m;
    m.n_rr = rr_s.size();
    m.hr_bpm = 60.0 / median(rr_s);

    const double n = static_cast<double>(rr_s.size());
    const double mean = std::accumulate(rr_s.begin(), rr_s.end(), 0.0) / n;
    m.mhbi_ms = mean * 1000.0;

    if (rr_s.size() >= 2) {
        double ssd = 0.0;
        for (std::size_t i = 0; i + 1 < rr_s.size(); ++i) {
            double d = rr_s[i + 1] - rr_s[i];
            ssd += d * d;
        }
        m.rmssd_ms = std::sqrt(ssd / (n - 1.0)) * 1000.0;

        double dev = 0.0;
        for (double rr : rr_s) dev += (rr - mean) * (rr - mean);
        m.sdnn_ms = std::sqrt(dev / (n - 1.0)) * 1000.0;
    }
    return m;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw MetricError("pearson: length mismatch");
    if (x.size() < 2) throw MetricError("pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;  // undefined, flagged
    return sxy / std::sqrt(sxx * syy);
}

BlandAltman bland_altman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw MetricError("bland_altman: length mismatch");
    if (x.size() < 2) throw MetricError("bland_altman: need at least 2 points");
    BlandAltman ba;
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    ba.points.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        sum += d;
        ba.points.emplace_back(0.5 * (x[i] + y[i]), d);
    }
    ba.mean_diff = sum / n;
    double ss = 0.0;
    for (const auto& [m, d] : ba.points) ss += (d - ba.mean_diff) * (d - ba.mean_diff);
    double sd = std::sqrt(ss / (n - 1.0));
    ba.loa_low = ba.mean_diff - 1.96 * sd;
    ba.loa_high = ba.mean_diff + 1.96 * sd;
    return ba;
}

std::size_t ErrorHistogram::total() const {
    return overflow + std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ErrorHistogram error_histogram(const std::vector<double>& hr_pred,
                               const std::vector<double>& hr_gt, double bin_width_bpm) {
    if (hr_pred.size() != hr_gt.size()) throw MetricError("error_histogram: length mismatch");
    if (bin_width_bpm <= 0.0) throw MetricError("error_histogram: bin width must be positive");
    ErrorHistogram h;
    h.bin_width_bpm = bin_width_bpm;
    h.counts.assign(static_cast<std::size_t>(std::ceil(h.overflow_at_bpm / bin_width_bpm)), 0);
    for (std::size_t i = 0; i < hr_pred.size(); ++i) {
        double err = std::abs(hr_pred[i] - hr_gt[i]);
        if (err >= h.overflow_at_bpm) {
            ++h.overflow;
        } else {
            ++h.counts[static_cast<std::size_t>(err / bin_width_bpm)];
        }
    }
    return h;
}

namespace {

MetricAgreement agree(const std::vector<double>& cand, const std::vector<double>& gt) {
    MetricAgreement a;
    a.n_pairs = cand.size();
    if (cand.size() >= 2) {
        a.pearson_r = pearson(cand, gt);
        a.ba = bland_altman(cand, gt);
    }
    return a;
}

}  // namespace

AgreementReport build_agreement(const MetricsBySegment& candidate,
                                const MetricsBySegment& ground_truth) {
    AgreementReport rep;
    std::vector<double> hr_c, hr_g, mhbi_c, mhbi_g, rmssd_c, rmssd_g, sdnn_c, sdnn_g;
    std::vector<double> abs_hr_diff;

    for (const auto& [key, gt] : ground_truth) {
        auto it = candidate.find(key);
        if (it == candidate.end()) {
            ++rep.n_excluded;
            continue;
        }
        const SegmentMetrics& c = it->second;
        hr_c.push_back(c.hr_bpm);
        hr_g.push_back(gt.hr_bpm);
        abs_hr_diff.push_back(std::abs(c.hr_bpm - gt.hr_bpm));
        if (c.mhbi_ms && gt.mhbi_ms) {
            mhbi_c.push_back(*c.mhbi_ms);
            mhbi_g.push_back(*gt.mhbi_ms);
        }
        if (c.rmssd_ms && gt.rmssd_ms) {
            rmssd_c.push_back(*c.rmssd_ms);
            rmssd_g.push_back(*gt.rmssd_ms);
        }
        if (c.sdnn_ms && gt.sdnn_ms) {
            sdnn_c.push_back(*c.sdnn_ms);
            sdnn_g.push_back(*gt.sdnn_ms);
        }
    }
    // candidate segments with no ground-truth partner also count as excluded
    for (const auto& [key, c] : candidate)
        if (!ground_truth.contains(key)) ++rep.n_excluded;

    rep.n_segments_included = hr_c.size();
    rep.hr = agree(hr_c, hr_g);
    rep.mhbi = agree(mhbi_c, mhbi_g);
    rep.rmssd = agree(rmssd_c, rmssd_g);
    rep.sdnn = agree(sdnn_c, sdnn_g);
    rep.hr_abs_error = error_histogram(hr_c, hr_g);
    rep.median_abs_hr_diff_bpm = abs_hr_diff.empty() ? 0.0 : median(abs_hr_diff);
    return rep;
}

}  // namespace bcg2ecg
