#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcg2ecg {

// One bed-sensor session: raw transducer channels plus the reference ECG,
// sample-aligned at a common clock.
struct Recording {
    std::string subject_id;
    double sample_rate_hz = 0.0;
    std::vector<std::vector<double>> bcg_channels;  // [C][T], C >= 1
    std::vector<double> ecg;                        // [T]

    std::size_t n_samples() const { return ecg.size(); }
    std::size_t n_channels() const { return bcg_channels.size(); }
    double duration_s() const { return static_cast<double>(ecg.size()) / sample_rate_hz; }
};

// A 5 s window at 100 Hz, min-max normalized per signal. The training and
// evaluation unit. Samples are kept as f32, matching the on-disk format.
struct SegmentPair {
    std::string subject_id;
    std::uint32_t segment_index = 0;
    double start_time_s = 0.0;
    std::vector<float> bcg;  // length kSegmentLen, values in [0,1]
    std::vector<float> ecg;  // length kSegmentLen, values in [0,1]
    bool degenerate = false;  // flat window; excluded from training

    bool operator==(const SegmentPair&) const = default;
};

inline constexpr std::size_t kSegmentLen = 500;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RecordingFormat { csv, binary };

// Recording CSV: header `t,ch1,...,chC,ecg`, one row per sample. Rejects
// ragged rows and NaN/Inf samples, naming the offending row. The sample rate
// is not stored in the CSV; it comes from a sidecar config or CLI flag.
Recording load_recording_csv(const std::filesystem::path& path, double sample_rate_hz,
                             const std::string& subject_id);
void save_recording_csv(const Recording& rec, const std::filesystem::path& path);

// Binary recording container, magic `BCGR`: version u16, subject-id
// (u16 length + UTF-8), sample_rate f64, channel count u32, sample count u64,
// then each channel as f64 LE, then the ECG as f64 LE.
Recording load_recording_bin(const std::filesystem::path& path);
void save_recording_bin(const Recording& rec, const std::filesystem::path& path);

Recording load_recording(const std::filesystem::path& path, RecordingFormat format,
                         double sample_rate_hz = 0.0, const std::string& subject_id = {});

// Segment store, magic `BCGS`: version u16=1, count u64, then per segment
// subject-id (u16 length + UTF-8), segment_index u32, start_time_s f64,
// 500 f32 BCG, 500 f32 ECG. Little-endian throughout. load(save(x)) == x
// bit-exactly; the degenerate flag is not stored, it is recovered on load
// (a normalized signal is all-0.5 iff the source window was flat).
void save_segments(const std::vector<SegmentPair>& segments, const std::filesystem::path& path);
std::vector<SegmentPair> load_segments(const std::filesystem::path& path);

}  // namespace bcg2ecg
