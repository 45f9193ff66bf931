#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "btseg/model.hpp"
#include "btseg/synthdata.hpp"
#include "btseg/tensor.hpp"
#include "btseg/types.hpp"

namespace btseg::metrics {

/// Rows are ground truth, columns are prediction; ignored pixels not counted.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    void accumulate(const IntTensor& pred, const IntTensor& gt, std::int32_t ignore_index);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    std::uint64_t at(std::size_t gt, std::size_t pred) const {
        return counts_[gt * num_classes_ + pred];
    }
    std::uint64_t& at(std::size_t gt, std::size_t pred) {
        return counts_[gt * num_classes_ + pred];
    }
    std::size_t num_classes() const { return num_classes_; }
    std::uint64_t total() const;

private:
    std::size_t num_classes_;
    std::vector<std::uint64_t> counts_;
};

struct EvalReport {
    std::vector<double> per_class_iou;  // meaningful only where defined
    std::vector<bool> defined;          // false when the class union is empty
    double mean_iou = 0.0;              // mean over defined classes
    std::string config_fingerprint;
    std::size_t sample_count = 0;

    nlohmann::json to_json() const;
    /// Fixed-width table: mean first, then one column per class.
    std::string to_table(const std::string& row_label) const;
};

/// Per class c: IoU_c = TP / (TP + FP + FN); zero-union classes are marked
/// undefined and excluded from the mean.
EvalReport iou(const ConfusionMatrix& cm);

enum class EvalDomain { target, source };

struct EvalOptions {
    EvalDomain domain = EvalDomain::target;
    std::string config_fingerprint;
};

/// Runs inference on every sample of the split (encoder + decoder only) and
/// scores against the domain's labels: held-out adverse labels for the target
/// domain, source labels otherwise.
EvalReport evaluate(const nn::Model& model, const std::vector<synth::PairedSample>& split,
                    const EvalOptions& options);

}  // namespace btseg::metrics
