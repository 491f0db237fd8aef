#pragma once

#include <cstdint>
#include <filesystem>

#include "rtmocap/io.hpp"
#include "rtmocap/skeleton.hpp"

namespace rtmocap {

// Synthetic sequence classes. A pause_rich sequence holds a near-still
// skeleton (sub-millimetre jitter) with an occasional slow hand-to-head
// approach and is annotated RT over its whole span; a motion_rich sequence
// oscillates the limbs continuously and carries no RT annotation.
enum class SynthClass { pause_rich, motion_rich };

struct SynthResult {
    SkeletonSequence sequence;
    AnnotationTrack track;
};

// Deterministic given seed. duration_s >= 2.
SynthResult synth_sequence(SynthClass cls, double duration_s, std::uint64_t seed,
                           const std::string& child_id = "synth", Setting setting = Setting::A,
                           Task task = Task::forming_angles);

struct SynthDatasetConfig {
    int children_a = 4;
    int children_b = 2;
    int sequences_per_child = 4;  // classes alternate motion/pause
    double duration_s = 8.0;
    std::uint64_t seed = 1;
    bool two_raters = false;  // adds a second rater with jittered interval edges
};

// Writes sequence/annotation CSVs plus manifest.json under out_dir and
// returns the manifest.
DatasetManifest synth_dataset(const SynthDatasetConfig& config,
                              const std::filesystem::path& out_dir);

}  // namespace rtmocap
