#include "rtmocap/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rtmocap {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double parse_field(const std::string& field, const std::string& file, std::size_t row,
                   const std::string& column) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(file + ": row " + std::to_string(row) + ", column " + column +
                         ": malformed number '" + field + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError(file + ": row " + std::to_string(row) + ", column " + column +
                         ": non-finite value");
    }
    return value;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::ifstream open_in(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open file: " + file.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot open file for writing: " + file.string());
    return out;
}

std::vector<std::string> sequence_header() {
    std::vector<std::string> cols;
    cols.reserve(1 + 3 * joint_count);
    cols.push_back("time_s");
    for (const auto& name : joint_names()) {
        cols.push_back(name + "_x");
        cols.push_back(name + "_y");
        cols.push_back(name + "_z");
    }
    return cols;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SkeletonSequence parse_sequence(const std::filesystem::path& file) {
    auto in = open_in(file);
    const std::string fname = file.string();
    const auto expected = sequence_header();

    std::string line;
    if (!std::getline(in, line)) throw ParseError(fname + ": empty file");
    const auto header = split_csv(strip_cr(line));
    if (header.size() != expected.size()) {
        throw ParseError(fname + ": header has " + std::to_string(header.size()) +
                         " columns, expected " + std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (header[i] != expected[i]) {
            throw ParseError(fname + ": header column " + std::to_string(i) + " is '" +
                             header[i] + "', expected '" + expected[i] + "'");
        }
    }

    SkeletonSequence seq;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) {
            ++row;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != expected.size()) {
            throw ParseError(fname + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(expected.size()));
        }
        Frame frame;
        frame.time_s = parse_field(fields[0], fname, row, expected[0]);
        for (int j = 0; j < joint_count; ++j) {
            for (int a = 0; a < 3; ++a) {
                const std::size_t col = 1 + 3 * static_cast<std::size_t>(j) + a;
                frame.positions[j][a] = parse_field(fields[col], fname, row, expected[col]);
            }
        }
        if (!seq.frames.empty() && !(frame.time_s > seq.frames.back().time_s)) {
            throw ParseError(fname + ": row " + std::to_string(row) +
                             ", column time_s: timestamps not strictly increasing");
        }
        seq.frames.push_back(frame);
        ++row;
    }
    validate_sequence(seq);
    return seq;
}

void write_sequence(const SkeletonSequence& seq, const std::filesystem::path& file) {
    auto out = open_out(file);
    const auto cols = sequence_header();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out << ',';
        out << cols[i];
    }
    out << '\n';
    for (const Frame& f : seq.frames) {
        out << format_double(f.time_s);
        for (int j = 0; j < joint_count; ++j) {
            for (int a = 0; a < 3; ++a) out << ',' << format_double(f.positions[j][a]);
        }
        out << '\n';
    }
}

AnnotationTrack parse_annotations(const std::filesystem::path& file) {
    auto in = open_in(file);
    const std::string fname = file.string();

    AnnotationTrack track;
    std::string line;
    if (!std::getline(in, line)) return track;  // fully empty file: no RT
    const auto header = split_csv(strip_cr(line));
    const std::vector<std::string> expected = {"rater_id", "onset_s", "offset_s", "label"};
    if (header != expected) {
        throw ParseError(fname + ": bad annotation header, expected rater_id,onset_s,offset_s,label");
    }

    std::size_t row = 1;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) {
            ++row;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 4) {
            throw ParseError(fname + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, expected 4");
        }
        if (fields[3] != "RT") {
            throw ParseError(fname + ": row " + std::to_string(row) + ": unknown label '" +
                             fields[3] + "'");
        }
        if (track.intervals.empty()) {
            track.rater_id = fields[0];
        } else if (track.rater_id != fields[0]) {
            throw ParseError(fname + ": row " + std::to_string(row) +
                             ": mixed rater ids in one file");
        }
        AnnotationInterval iv;
        iv.onset_s = parse_field(fields[1], fname, row, "onset_s");
        iv.offset_s = parse_field(fields[2], fname, row, "offset_s");
        track.intervals.push_back(iv);
        ++row;
    }
    validate_track(track);
    return track;
}

void write_annotations(const AnnotationTrack& track, const std::filesystem::path& file) {
    auto out = open_out(file);
    out << "rater_id,onset_s,offset_s,label\n";
    for (const auto& iv : track.intervals) {
        out << track.rater_id << ',' << format_double(iv.onset_s) << ','
            << format_double(iv.offset_s) << ",RT\n";
    }
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
    auto in = open_in(file);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
        throw ParseError(file.string() + ": manifest must be an object with an 'entries' array");
    }
    const auto base = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    DatasetManifest manifest;
    std::set<std::string> seen;
    for (const auto& e : doc["entries"]) {
        ManifestEntry entry;
        try {
            entry.sequence = base / e.at("sequence").get<std::string>();
            for (const auto& a : e.at("annotations")) {
                entry.annotations.push_back(base / a.get<std::string>());
            }
            entry.child_id = e.at("child_id").get<std::string>();
            entry.setting = setting_from_string(e.at("setting").get<std::string>());
            entry.task = task_from_string(e.at("task").get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(file.string() + ": bad manifest entry: " + ex.what());
        }
        if (!seen.insert(entry.sequence.string()).second) {
            throw ValidationError(file.string() + ": duplicate sequence path " +
                                  entry.sequence.string());
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file) {
    const auto base = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json annotations = nlohmann::json::array();
        for (const auto& a : e.annotations) {
            annotations.push_back(a.lexically_relative(base).generic_string());
        }
        entries.push_back({
            {"sequence", e.sequence.lexically_relative(base).generic_string()},
            {"annotations", annotations},
            {"child_id", e.child_id},
            {"setting", to_string(e.setting)},
            {"task", to_string(e.task)},
        });
    }
    auto out = open_out(file);
    out << nlohmann::json{{"entries", entries}}.dump(2) << '\n';
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header,
                      const std::filesystem::path& file) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols()) {
        throw ValidationError("matrix csv: header size does not match column count");
    }
    auto out = open_out(file);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& file,
                                std::vector<std::string>* header) {
    auto in = open_in(file);
    const std::string fname = file.string();
    std::string line;
    if (!std::getline(in, line)) throw ParseError(fname + ": empty file");
    const auto cols = split_csv(strip_cr(line));
    if (header) *header = cols;

    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) {
            ++row;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != cols.size()) {
            throw ParseError(fname + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(cols.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            values[c] = parse_field(fields[c], fname, row, cols[c]);
        }
        rows.push_back(std::move(values));
        ++row;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    return m;
}

namespace {
constexpr char tensor_magic[8] = {'R', 'T', 'T', 'E', 'N', 'S', 'R', '\0'};

void put_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}
}  // namespace

void write_tensor(const Eigen::MatrixXd& m, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ParseError("cannot open file for writing: " + file.string());
    out.write(tensor_magic, 8);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    }
}

Eigen::MatrixXd read_tensor(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, tensor_magic, 8) != 0) {
        throw ParseError(file.string() + ": bad tensor magic");
    }
    const auto rows = get_u64(in);
    const auto cols = get_u64(in);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t r = 0; r < rows; ++r) {
        for (std::uint64_t c = 0; c < cols; ++c) {
            const std::uint64_t bits = get_u64(in);
            double v;
            std::memcpy(&v, &bits, 8);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    if (!in) throw ParseError(file.string() + ": truncated tensor file");
    return m;
}

}  // namespace rtmocap
