#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rtmocap/skeleton.hpp"

namespace rtmocap {

// Sequence file: UTF-8 CSV with header `time_s` followed by
// `<joint>_x,<joint>_y,<joint>_z` per joint in canonical order (76 columns).
// Values are written with 17 significant digits so write/parse round-trips
// are bit-exact.
SkeletonSequence parse_sequence(const std::filesystem::path& file);
void write_sequence(const SkeletonSequence& seq, const std::filesystem::path& file);

// Annotation file: CSV with header `rater_id,onset_s,offset_s,label`,
// label literal `RT`. A file with no data rows is an empty track.
AnnotationTrack parse_annotations(const std::filesystem::path& file);
void write_annotations(const AnnotationTrack& track, const std::filesystem::path& file);

struct ManifestEntry {
    std::filesystem::path sequence;
    std::vector<std::filesystem::path> annotations;
    std::string child_id;
    Setting setting = Setting::A;
    Task task = Task::forming_angles;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

// Manifest JSON: {"entries":[{"sequence":...,"annotations":[...],
// "child_id":...,"setting":"A"|"B","task":...}]} with paths resolved
// relative to the manifest file's directory.
DatasetManifest load_manifest(const std::filesystem::path& file);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);

// Generic matrix CSV (one header row, 17 significant digits). Used for the
// feature-matrix file format.
void write_matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header,
                      const std::filesystem::path& file);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& file,
                                std::vector<std::string>* header = nullptr);

// Flat binary tensor: 8-byte magic "RTTENSR\0", two little-endian uint64
// dims (rows, cols), then rows*cols little-endian 64-bit floats, row-major.
void write_tensor(const Eigen::MatrixXd& m, const std::filesystem::path& file);
Eigen::MatrixXd read_tensor(const std::filesystem::path& file);

// 17-significant-digit decimal formatting shared by all text writers.
std::string format_double(double v);

}  // namespace rtmocap
