#include "rtmocap/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rtmocap/errors.hpp"
#include "rtmocap/rng.hpp"

namespace rtmocap {

std::string to_string(Label l) { return l == Label::RT ? "RT" : "NRT"; }

std::string to_string(Axis a) {
    switch (a) {
        case Axis::none: return "none";
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "none";
}

std::string to_string(InputForm f) { return f == InputForm::POS ? "pos" : "feats"; }

InputForm input_form_from_string(const std::string& s) {
    if (s == "pos" || s == "POS") return InputForm::POS;
    if (s == "feats" || s == "FEATS") return InputForm::FEATS;
    throw ValidationError("unknown input form: " + s + " (expected pos or feats)");
}

Axis axis_from_string(const std::string& s) {
    if (s == "none") return Axis::none;
    if (s == "x") return Axis::x;
    if (s == "y") return Axis::y;
    if (s == "z") return Axis::z;
    throw ValidationError("unknown axis: " + s);
}

std::vector<Period> extract_periods(const SkeletonSequence& seq,
                                    const std::vector<bool>& frame_labels, int sequence_index) {
    if (frame_labels.size() != seq.frames.size()) {
        throw ValidationError("label count does not match frame count");
    }

    // Run-length encode, absorbing single-frame runs into the preceding run
    // (a leading single adopts the following run's label).
    struct Run {
        Label label;
        int length;
    };
    std::vector<Run> runs;
    int pending = 0;  // leading single frames waiting for a real run
    std::size_t i = 0;
    while (i < frame_labels.size()) {
        std::size_t j = i;
        while (j < frame_labels.size() && frame_labels[j] == frame_labels[i]) ++j;
        const Label label = frame_labels[i] ? Label::RT : Label::NRT;
        int length = static_cast<int>(j - i) + pending;
        pending = 0;
        if (length == 1) {
            if (!runs.empty()) {
                runs.back().length += 1;
            } else {
                pending = 1;
            }
        } else if (!runs.empty() && runs.back().label == label) {
            runs.back().length += length;
        } else {
            runs.push_back({label, length});
        }
        i = j;
    }
    if (pending > 0 && !runs.empty()) runs.back().length += pending;

    std::vector<Period> periods;
    int start = 0;
    for (std::size_t m = 0; m < runs.size(); ++m) {
        Period p;
        p.label = runs[m].label;
        p.frames.assign(seq.frames.begin() + start, seq.frames.begin() + start + runs[m].length);
        p.provenance.child_id = seq.child_id;
        p.provenance.setting = seq.setting;
        p.provenance.task = seq.task;
        p.provenance.sequence_index = sequence_index;
        p.provenance.period_index = static_cast<int>(m);
        periods.push_back(std::move(p));
        start += runs[m].length;
    }
    return periods;
}

std::vector<Period> balance_periods(std::vector<Period> sequence_periods) {
    const bool has_rt = std::any_of(sequence_periods.begin(), sequence_periods.end(),
                                    [](const Period& p) { return p.label == Label::RT; });
    if (has_rt && !sequence_periods.empty() && sequence_periods.back().label == Label::NRT) {
        sequence_periods.pop_back();
    }
    return sequence_periods;
}

Period mirror_augment(const Period& p, Axis axis) {
    if (axis == Axis::none) throw ValidationError("mirror_augment requires axis x, y or z");
    const int coord = static_cast<int>(axis) - 1;
    Period out = p;
    for (Frame& f : out.frames) {
        for (auto& pos : f.positions) pos[coord] = -pos[coord];
    }
    out.provenance.augmentation = axis;
    return out;
}

std::vector<Period> augment_periods(const std::vector<Period>& originals) {
    std::vector<Period> out;
    out.reserve(originals.size() * 4);
    for (const Period& p : originals) {
        out.push_back(p);
        out.push_back(mirror_augment(p, Axis::x));
        out.push_back(mirror_augment(p, Axis::y));
        out.push_back(mirror_augment(p, Axis::z));
    }
    return out;
}

namespace {

struct Lerp {
    int k;
    double frac;
};

// Sample positions for mapping src_len rows onto target_len rows. The form
// i*(L-1)/(T-1) is exact for integers, so endpoints (and the identity case)
// reproduce source rows without rounding.
std::vector<Lerp> lerp_grid(int src_len, int target_len) {
    if (src_len < 2) throw ValidationError("resampling requires at least 2 frames");
    if (target_len < 2) throw ValidationError("resample target must be at least 2 frames");
    std::vector<Lerp> grid(static_cast<std::size_t>(target_len));
    for (int i = 0; i < target_len; ++i) {
        const double s =
            static_cast<double>(i) * static_cast<double>(src_len - 1) /
            static_cast<double>(target_len - 1);
        int k = static_cast<int>(s);
        double frac = s - static_cast<double>(k);
        if (k >= src_len - 1) {
            k = src_len - 2;
            frac = 1.0;
        }
        grid[static_cast<std::size_t>(i)] = {k, frac};
    }
    return grid;
}

}  // namespace

Eigen::MatrixXd resample_matrix(const Eigen::MatrixXd& rows, int target_len) {
    const int src_len = static_cast<int>(rows.rows());
    if (src_len == target_len) return rows;
    const auto grid = lerp_grid(src_len, target_len);
    Eigen::MatrixXd out(target_len, rows.cols());
    for (int i = 0; i < target_len; ++i) {
        const auto [k, frac] = grid[static_cast<std::size_t>(i)];
        out.row(i) = (1.0 - frac) * rows.row(k) + frac * rows.row(k + 1);
    }
    return out;
}

namespace {

std::vector<Frame> resample_frames(std::span<const Frame> frames, int target_len) {
    const int src_len = static_cast<int>(frames.size());
    if (src_len == target_len) return {frames.begin(), frames.end()};
    const auto grid = lerp_grid(src_len, target_len);
    std::vector<Frame> out(static_cast<std::size_t>(target_len));
    for (int i = 0; i < target_len; ++i) {
        const auto [k, frac] = grid[static_cast<std::size_t>(i)];
        const Frame& a = frames[static_cast<std::size_t>(k)];
        const Frame& b = frames[static_cast<std::size_t>(k + 1)];
        Frame& f = out[static_cast<std::size_t>(i)];
        f.time_s = (1.0 - frac) * a.time_s + frac * b.time_s;
        for (int j = 0; j < joint_count; ++j) {
            f.positions[j] = (1.0 - frac) * a.positions[j] + frac * b.positions[j];
        }
    }
    return out;
}

}  // namespace

Period resample_period(const Period& p, int target_len) {
    Period out;
    out.label = p.label;
    out.provenance = p.provenance;
    out.frames = resample_frames(p.frames, target_len);
    return out;
}

std::vector<WindowSpan> window_spans(int len, int w, int v) {
    if (w < 2) throw ValidationError("window size w must be at least 2");
    if (v < 1 || v > w) throw ValidationError("tail threshold v must be in [1, w]");
    std::vector<WindowSpan> spans;
    const int full = len / w;
    for (int i = 0; i < full; ++i) spans.push_back({i * w, w});
    const int tail = len - full * w;
    if (tail >= v && tail >= 2) spans.push_back({full * w, tail});
    return spans;
}

std::vector<Subsegment> window_subsegments(const Period& p, int parent_index, int w, int v) {
    std::vector<Subsegment> out;
    const auto spans = window_spans(static_cast<int>(p.frames.size()), w, v);
    for (std::size_t i = 0; i < spans.size(); ++i) {
        Subsegment s;
        s.parent = parent_index;
        s.window_index = static_cast<int>(i);
        s.span = spans[i];
        s.label = p.label;
        const std::span<const Frame> slice(p.frames.data() + spans[i].start,
                                           static_cast<std::size_t>(spans[i].length));
        s.frames = spans[i].length == w ? std::vector<Frame>(slice.begin(), slice.end())
                                        : resample_frames(slice, w);
        out.push_back(std::move(s));
    }
    return out;
}

Eigen::MatrixXd pos_matrix(std::span<const Frame> frames) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(frames.size()), 3 * major_joint_count);
    const auto& joints = major_joints();
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (int j = 0; j < major_joint_count; ++j) {
            const auto& p = frames[t].at(joints[static_cast<std::size_t>(j)]);
            out(static_cast<Eigen::Index>(t), 3 * j + 0) = p.x();
            out(static_cast<Eigen::Index>(t), 3 * j + 1) = p.y();
            out(static_cast<Eigen::Index>(t), 3 * j + 2) = p.z();
        }
    }
    return out;
}

namespace {

Eigen::MatrixXd channel_matrix(std::span<const Frame> frames, InputForm form) {
    return form == InputForm::POS ? pos_matrix(frames) : extract_features(frames);
}

}  // namespace

std::vector<ModelInput> make_inputs(const PeriodSet& set) {
    std::vector<ModelInput> out;
    out.reserve(set.periods.size());
    for (const Period& p : set.periods) {
        ModelInput item;
        item.data = resample_matrix(channel_matrix(p.frames, set.input_form), set.length_T);
        item.label = p.label;
        item.provenance = p.provenance;
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<ModelInput> balance_subsegments(std::span<const Period> sequence_periods, int w, int v,
                                            InputForm form, std::uint64_t seed) {
    // q: rounded (half away from zero) mean subsegment yield of RT periods.
    long rt_periods = 0;
    long rt_subsegments = 0;
    std::vector<std::vector<WindowSpan>> spans_per_period;
    spans_per_period.reserve(sequence_periods.size());
    for (const Period& p : sequence_periods) {
        auto spans = window_spans(static_cast<int>(p.frames.size()), w, v);
        if (p.label == Label::RT) {
            ++rt_periods;
            rt_subsegments += static_cast<long>(spans.size());
        }
        spans_per_period.push_back(std::move(spans));
    }
    const long q = rt_periods > 0
                       ? std::llround(static_cast<double>(rt_subsegments) /
                                      static_cast<double>(rt_periods))
                       : 0;

    Rng rng(seed);
    std::vector<ModelInput> out;
    for (std::size_t pi = 0; pi < sequence_periods.size(); ++pi) {
        const Period& p = sequence_periods[pi];
        const auto& spans = spans_per_period[pi];
        if (spans.empty()) continue;

        std::vector<std::size_t> chosen(spans.size());
        std::iota(chosen.begin(), chosen.end(), 0);
        if (p.label == Label::NRT) {
            const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(q),
                                                           chosen.size());
            rng.shuffle(chosen);
            chosen.resize(keep);
            std::sort(chosen.begin(), chosen.end());
        }
        if (chosen.empty()) continue;

        const Eigen::MatrixXd channels = channel_matrix(p.frames, form);
        for (std::size_t ci : chosen) {
            const WindowSpan& s = spans[ci];
            ModelInput item;
            const Eigen::MatrixXd slice = channels.middleRows(s.start, s.length);
            item.data = s.length == w ? slice : resample_matrix(slice, w);
            item.label = p.label;
            item.provenance = p.provenance;
            out.push_back(std::move(item));
        }
    }
    return out;
}

}  // namespace rtmocap
