#include "btseg/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "btseg/errors.hpp"

namespace btseg::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {
    check(num_classes >= 2, "ConfusionMatrix: need at least 2 classes");
}

void ConfusionMatrix::accumulate(const IntTensor& pred, const IntTensor& gt,
                                 std::int32_t ignore_index) {
    check(pred.same_shape(gt), "ConfusionMatrix: prediction and ground truth shapes differ");
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        const auto g = gt[i];
        if (g == ignore_index) continue;
        const auto p = pred[i];
        check(g >= 0 && static_cast<std::size_t>(g) < num_classes_,
              "ConfusionMatrix: ground-truth class out of range: " + std::to_string(g));
        check(p >= 0 && static_cast<std::size_t>(p) < num_classes_,
              "ConfusionMatrix: predicted class out of range: " + std::to_string(p));
        ++counts_[static_cast<std::size_t>(g) * num_classes_ + static_cast<std::size_t>(p)];
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    check(num_classes_ == other.num_classes_, "ConfusionMatrix: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

EvalReport iou(const ConfusionMatrix& cm) {
    check(cm.total() > 0, "iou: empty confusion matrix");
    const std::size_t k = cm.num_classes();
    EvalReport r;
    r.per_class_iou.assign(k, 0.0);
    r.defined.assign(k, false);
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const std::uint64_t uni = tp + fp + fn;
        if (uni == 0) continue;
        r.defined[c] = true;
        r.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
        sum += r.per_class_iou[c];
        ++defined;
    }
    check(defined > 0, "iou: all classes undefined");
    r.mean_iou = sum / static_cast<double>(defined);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < per_class_iou.size(); ++c) {
        if (defined[c])
            per.push_back(per_class_iou[c]);
        else
            per.push_back(nullptr);
    }
    j["per_class_iou"] = per;
    j["mean_iou"] = mean_iou;
    j["config_fingerprint"] = config_fingerprint;
    j["sample_count"] = sample_count;
    return j;
}

std::string EvalReport::to_table(const std::string& row_label) const {
    char buf[32];
    std::string out = row_label;
    out.resize(std::max<std::size_t>(out.size(), 24), ' ');
    std::snprintf(buf, sizeof(buf), " %6.2f", mean_iou * 100.0);
    out += buf;
    for (std::size_t c = 0; c < per_class_iou.size(); ++c) {
        if (defined[c])
            std::snprintf(buf, sizeof(buf), " %6.2f", per_class_iou[c] * 100.0);
        else
            std::snprintf(buf, sizeof(buf), " %6s", "--");
        out += buf;
    }
    return out;
}

EvalReport evaluate(const nn::Model& model, const std::vector<synth::PairedSample>& split,
                    const EvalOptions& options) {
    check(!split.empty(), "evaluate: empty split");
    ConfusionMatrix cm(model.spec().decoder.num_classes);
    for (const auto& sample : split) {
        const Tensor& img =
            options.domain == EvalDomain::target ? sample.target : sample.source;
        const SegmentationMap& gt = options.domain == EvalDomain::target
                                        ? sample.adverse_labels_heldout
                                        : sample.source_labels;
        Tensor batch({1, 3, img.dim(1), img.dim(2)});
        std::copy(img.data(), img.data() + img.numel(), batch.data());
        const Tensor fused = model.encode(batch);
        const Tensor logits = model.decode(fused);
        Tensor one({logits.dim(1), logits.dim(2), logits.dim(3)});
        std::copy(logits.data(), logits.data() + logits.numel(), one.data());
        cm.accumulate(nn::argmax_channel(one), gt.labels, SegmentationMap::kIgnoreIndex);
    }
    EvalReport r = iou(cm);
    r.config_fingerprint = options.config_fingerprint;
    r.sample_count = split.size();
    return r;
}

}  // namespace btseg::metrics
