#include "bcg2ecg/recording.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bcg2ecg {

namespace {

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw IoError(std::string("unexpected end of file while reading ") + what);
}

template <typename T>
void put_le(std::ostream& os, T v) {
    // this codebase only targets little-endian hosts; assert it once
    static_assert(std::endian::native == std::endian::little);
    put_bytes(os, &v, sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    static_assert(std::endian::native == std::endian::little);
    T v{};
    get_bytes(is, &v, sizeof(T), what);
    return v;
}

double parse_field(const std::string& field, std::size_t row, std::size_t col) {
    const char* b = field.data();
    const char* e = b + field.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
        // from_chars accepts "nan"/"inf"; anything else unparseable lands here
        std::ostringstream msg;
        msg << "row " << row << ", column " << col << ": cannot parse '" << field << "'";
        throw IoError(msg.str());
    }
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "row " << row << ", column " << col << ": non-finite sample '" << field << "'";
        throw IoError(msg.str());
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

bool all_half(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.5f; });
}

constexpr char kSegmentMagic[4] = {'B', 'C', 'G', 'S'};
constexpr char kRecordingMagic[4] = {'B', 'C', 'G', 'R'};

}  // namespace

Recording load_recording_csv(const std::filesystem::path& path, double sample_rate_hz,
                             const std::string& subject_id) {
    if (sample_rate_hz <= 0.0) throw IoError("sample rate must be positive");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    auto header = split_csv_line(line);
    if (header.size() < 3 || header.front() != "t" || header.back() != "ecg")
        throw IoError(path.string() + ": malformed header, expected t,ch1,...,chC,ecg");
    const std::size_t n_channels = header.size() - 2;
    const std::size_t n_cols = header.size();

    Recording rec;
    rec.subject_id = subject_id.empty() ? path.stem().string() : subject_id;
    rec.sample_rate_hz = sample_rate_hz;
    rec.bcg_channels.resize(n_channels);

    std::size_t row = 1;  // header was row 0
    while (std::getline(in, line)) {
        if (line.empty()) break;
        auto fields = split_csv_line(line);
        if (fields.size() != n_cols) {
            std::ostringstream msg;
            msg << path.string() << ": row " << row << " has " << fields.size()
                << " fields, expected " << n_cols;
            throw IoError(msg.str());
        }
        for (std::size_t c = 0; c < n_channels; ++c)
            rec.bcg_channels[c].push_back(parse_field(fields[c + 1], row, c + 1));
        rec.ecg.push_back(parse_field(fields[n_cols - 1], row, n_cols - 1));
        ++row;
    }
    if (rec.ecg.empty()) throw IoError(path.string() + ": no samples");
    return rec;
}

void save_recording_csv(const Recording& rec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "t";
    for (std::size_t c = 0; c < rec.n_channels(); ++c) out << ",ch" << (c + 1);
    out << ",ecg\n";
    char buf[32];
    for (std::size_t i = 0; i < rec.n_samples(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(i) / rec.sample_rate_hz);
        out << buf;
        for (const auto& ch : rec.bcg_channels) {
            std::snprintf(buf, sizeof(buf), "%.9g", ch[i]);
            out << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.9g", rec.ecg[i]);
        out << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Recording load_recording_bin(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    get_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kRecordingMagic, 4) != 0)
        throw IoError(path.string() + ": bad magic, not a BCGR recording");
    auto version = get_le<std::uint16_t>(in, "version");
    if (version != 1) throw IoError(path.string() + ": unsupported BCGR version");

    Recording rec;
    auto id_len = get_le<std::uint16_t>(in, "subject id length");
    rec.subject_id.resize(id_len);
    if (id_len) get_bytes(in, rec.subject_id.data(), id_len, "subject id");
    rec.sample_rate_hz = get_le<double>(in, "sample rate");
    auto n_channels = get_le<std::uint32_t>(in, "channel count");
    auto n_samples = get_le<std::uint64_t>(in, "sample count");
    if (rec.sample_rate_hz <= 0.0) throw IoError(path.string() + ": non-positive sample rate");
    if (n_channels == 0 || n_samples == 0) throw IoError(path.string() + ": empty recording");

    rec.bcg_channels.assign(n_channels, std::vector<double>(n_samples));
    for (auto& ch : rec.bcg_channels)
        get_bytes(in, ch.data(), n_samples * sizeof(double), "channel samples");
    rec.ecg.resize(n_samples);
    get_bytes(in, rec.ecg.data(), n_samples * sizeof(double), "ecg samples");

    for (std::size_t c = 0; c < rec.n_channels(); ++c)
        for (std::size_t i = 0; i < n_samples; ++i)
            if (!std::isfinite(rec.bcg_channels[c][i])) {
                std::ostringstream msg;
                msg << path.string() << ": non-finite sample at channel " << (c + 1)
                    << ", row " << i;
                throw IoError(msg.str());
            }
    for (std::size_t i = 0; i < n_samples; ++i)
        if (!std::isfinite(rec.ecg[i])) {
            std::ostringstream msg;
            msg << path.string() << ": non-finite ECG sample at row " << i;
            throw IoError(msg.str());
        }
    return rec;
}

void save_recording_bin(const Recording& rec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    put_bytes(out, kRecordingMagic, 4);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(rec.subject_id.size()));
    put_bytes(out, rec.subject_id.data(), rec.subject_id.size());
    put_le<double>(out, rec.sample_rate_hz);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.n_channels()));
    put_le<std::uint64_t>(out, rec.n_samples());
    for (const auto& ch : rec.bcg_channels)
        put_bytes(out, ch.data(), ch.size() * sizeof(double));
    put_bytes(out, rec.ecg.data(), rec.ecg.size() * sizeof(double));
    if (!out) throw IoError("write failed: " + path.string());
}

Recording load_recording(const std::filesystem::path& path, RecordingFormat format,
                         double sample_rate_hz, const std::string& subject_id) {
    Recording rec = format == RecordingFormat::csv
                        ? load_recording_csv(path, sample_rate_hz, subject_id)
                        : load_recording_bin(path);
    const std::size_t n = rec.n_samples();
    if (n < 1) throw IoError(path.string() + ": recording has no samples");
    for (const auto& ch : rec.bcg_channels)
        if (ch.size() != n) throw IoError(path.string() + ": channel length mismatch");
    return rec;
}

void save_segments(const std::vector<SegmentPair>& segments, const std::filesystem::path& path) {
    for (const auto& s : segments) {
        if (s.bcg.size() != kSegmentLen || s.ecg.size() != kSegmentLen)
            throw IoError("segment length must be exactly 500");
        for (float v : s.bcg)
            if (!(v >= 0.0f && v <= 1.0f)) throw IoError("BCG sample outside [0,1]");
        for (float v : s.ecg)
            if (!(v >= 0.0f && v <= 1.0f)) throw IoError("ECG sample outside [0,1]");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    put_bytes(out, kSegmentMagic, 4);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint64_t>(out, segments.size());
    for (const auto& s : segments) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.subject_id.size()));
        put_bytes(out, s.subject_id.data(), s.subject_id.size());
        put_le<std::uint32_t>(out, s.segment_index);
        put_le<double>(out, s.start_time_s);
        put_bytes(out, s.bcg.data(), kSegmentLen * sizeof(float));
        put_bytes(out, s.ecg.data(), kSegmentLen * sizeof(float));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<SegmentPair> load_segments(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    get_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kSegmentMagic, 4) != 0)
        throw IoError(path.string() + ": bad magic, not a BCGS segment store");
    auto version = get_le<std::uint16_t>(in, "version");
    if (version != 1) throw IoError(path.string() + ": unsupported BCGS version");
    auto count = get_le<std::uint64_t>(in, "segment count");

    std::vector<SegmentPair> segments;
    segments.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        SegmentPair s;
        auto id_len = get_le<std::uint16_t>(in, "subject id length");
        s.subject_id.resize(id_len);
        if (id_len) get_bytes(in, s.subject_id.data(), id_len, "subject id");
        s.segment_index = get_le<std::uint32_t>(in, "segment index");
        s.start_time_s = get_le<double>(in, "start time");
        s.bcg.resize(kSegmentLen);
        get_bytes(in, s.bcg.data(), kSegmentLen * sizeof(float), "bcg samples");
        s.ecg.resize(kSegmentLen);
        get_bytes(in, s.ecg.data(), kSegmentLen * sizeof(float), "ecg samples");
        s.degenerate = all_half(s.bcg) || all_half(s.ecg);
        segments.push_back(std::move(s));
    }
    // declared count must match payload: anything left over is a format error
    char extra;
    in.read(&extra, 1);
    if (in.gcount() != 0)
        throw IoError(path.string() + ": trailing bytes after declared segment count");
    return segments;
}

}  // namespace bcg2ecg
