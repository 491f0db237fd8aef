#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtmocap/segmentation.hpp"
#include "rtmocap/skeleton.hpp"

namespace rtmocap {

struct ConfusionMatrix {
    std::int64_t tp = 0;  // RT is the positive class
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    void add(bool predicted_rt, bool actual_rt);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

struct Metrics {
    double accuracy = 0.0;
    double f1_rt = 0.0;
    double f1_nrt = 0.0;
    double mcc = 0.0;
};

// accuracy, per-class F1 from precision/recall (0 when undefined), and MCC
// with the zero-denominator convention MCC = 0.
Metrics metrics(const ConfusionMatrix& cm);

}  // namespace rtmocap
