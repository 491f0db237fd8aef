#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rtmocap/features.hpp"
#include "rtmocap/skeleton.hpp"

namespace rtmocap {

enum class Label { NRT = 0, RT = 1 };
enum class Axis { none, x, y, z };
enum class InputForm { POS, FEATS };

std::string to_string(Label l);
std::string to_string(Axis a);
std::string to_string(InputForm f);
InputForm input_form_from_string(const std::string& s);
Axis axis_from_string(const std::string& s);

struct PeriodProvenance {
    std::string child_id;
    Setting setting = Setting::A;
    Task task = Task::forming_angles;
    int sequence_index = 0;  // b, position of the sequence in the dataset
    int period_index = 0;    // m, position of the period within its sequence
    Axis augmentation = Axis::none;
};

// One contiguous span of frames sharing an RT/NRT label.
struct Period {
    Label label = Label::NRT;
    std::vector<Frame> frames;
    PeriodProvenance provenance;
};

struct PeriodSet {
    std::vector<Period> periods;
    InputForm input_form = InputForm::POS;
    int length_T = 120;
};

// Maximal constant-label runs covering the sequence, alternating RT/NRT.
// Single-frame runs are absorbed by the preceding run (a leading single by
// the following run): one frame cannot support the energy features.
std::vector<Period> extract_periods(const SkeletonSequence& seq,
                                    const std::vector<bool>& frame_labels, int sequence_index = 0);

// Drops the trailing NRT period of one sequence's period list, provided the
// sequence contains at least one RT period; an all-NRT sequence keeps its
// single period so it still contributes negative data.
std::vector<Period> balance_periods(std::vector<Period> sequence_periods);

// Negates the chosen coordinate of every joint; label and frame count are
// preserved and provenance records the axis. Involutive and bit-exact.
Period mirror_augment(const Period& p, Axis axis);

// Originals plus their x, y and z reflections: exactly 4x the period count.
std::vector<Period> augment_periods(const std::vector<Period>& originals);

// Per-channel linear interpolation on normalized time; endpoints exact,
// identity when the length already matches. Requires >= 2 input rows.
Eigen::MatrixXd resample_matrix(const Eigen::MatrixXd& rows, int target_len);
Period resample_period(const Period& p, int target_len);

struct WindowSpan {
    int start = 0;
    int length = 0;      // pre-resampling length; < w only for the tail
};

// Non-overlapping w-sized spans tiling a prefix of a length-`len` period:
// floor(len/w) full windows, then a tail of length in [v, w) that callers
// resample to w; shorter tails are discarded.
std::vector<WindowSpan> window_spans(int len, int w, int v = 7);

struct Subsegment {
    int parent = 0;  // index into the owning period collection
    int window_index = 0;
    WindowSpan span;
    Label label = Label::NRT;
    std::vector<Frame> frames;  // exactly w frames after tail resampling
};

std::vector<Subsegment> window_subsegments(const Period& p, int parent_index, int w, int v = 7);

// Model-ready item: rows are frames, columns are input channels
// (51 for POS, 29 for FEATS).
struct ModelInput {
    Eigen::MatrixXd data;
    Label label = Label::NRT;
    PeriodProvenance provenance;
};

// 51-channel position matrix over the major joints, canonical order,
// x/y/z interleaved per joint.
Eigen::MatrixXd pos_matrix(std::span<const Frame> frames);

// Period-level inputs: FEATS are computed on the original frames first and
// resampled afterwards; POS channels are resampled directly.
std::vector<ModelInput> make_inputs(const PeriodSet& set);

// Subsegment-level inputs for one sequence group S_b (originals plus
// augmented copies of one sequence): every RT subsegment is kept and each
// NRT period contributes at most q subsegments drawn without replacement,
// where q is the rounded mean subsegment yield of the RT periods in S_b.
std::vector<ModelInput> balance_subsegments(std::span<const Period> sequence_periods, int w, int v,
                                            InputForm form, std::uint64_t seed);

}  // namespace rtmocap
