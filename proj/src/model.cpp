#include "btseg/model.hpp"

#include <cmath>

#include "btseg/errors.hpp"
#include "btseg/rng.hpp"

namespace btseg::nn {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

std::size_t EncoderSpec::fused_dim() const {
    std::size_t d = 0;
    for (auto c : stage_channels) d += c;
    return d;
}

void EncoderSpec::validate() const {
    check(!stage_channels.empty(), "EncoderSpec: at least one stage required");
    check(stage_channels.size() == stage_strides.size(),
          "EncoderSpec: stage_channels and stage_strides must have equal length");
    std::size_t prev = 1;
    for (std::size_t i = 0; i < stage_strides.size(); ++i) {
        check(stage_channels[i] >= 1, "EncoderSpec: stage channels must be >= 1");
        check(is_power_of_two(stage_strides[i]), "EncoderSpec: strides must be powers of two");
        check(stage_strides[i] >= prev, "EncoderSpec: strides must be non-decreasing");
        prev = stage_strides[i];
    }
}

void ProjectorSpec::validate() const {
    check(layer_dims.size() >= 2, "ProjectorSpec: at least two layers required");
    for (auto d : layer_dims) check(d >= 1, "ProjectorSpec: layer dims must be >= 1");
    check(layer_dims.back() >= 2, "ProjectorSpec: final embedding dimension must be >= 2");
}

void DecoderSpec::validate() const {
    check(num_classes >= 2, "DecoderSpec: need at least 2 classes");
    check(hidden_channels >= 1, "DecoderSpec: hidden channels must be >= 1");
}

void ModelSpec::validate() const {
    encoder.validate();
    projector.validate();
    decoder.validate();
    check(projector.input_dim() == encoder.fused_dim(),
          "ModelSpec: projector input dim must equal the fused feature dim");
    check(bn_momentum > 0.0 && bn_momentum < 1.0, "ModelSpec: bn_momentum must be in (0,1)");
    check(bn_epsilon > 0.0, "ModelSpec: bn_epsilon must be positive");
}

ModelSpec default_model_spec(std::size_t num_classes) {
    ModelSpec spec;
    spec.encoder.stage_channels = {16, 32};
    spec.encoder.stage_strides = {4, 8};
    const std::size_t d = spec.encoder.fused_dim();
    spec.projector.layer_dims = {d, d / 2, d / 4};
    spec.decoder.num_classes = num_classes;
    spec.decoder.hidden_channels = 24;
    return spec;
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();

    // Stage layout: one stride-2 conv per halving, then a stride-1 refinement
    // conv. All kernels are 3x3 with padding 1.
    std::size_t in_ch = 3;
    std::size_t prev_stride = 1;
    for (std::size_t s = 0; s < spec_.encoder.stage_channels.size(); ++s) {
        const std::size_t out_ch = spec_.encoder.stage_channels[s];
        std::size_t factor = spec_.encoder.stage_strides[s] / prev_stride;
        prev_stride = spec_.encoder.stage_strides[s];
        std::vector<ConvDef> stage;
        std::size_t idx = 0;
        while (factor > 1) {
            stage.push_back({"encoder.s" + std::to_string(s) + ".c" + std::to_string(idx++), in_ch,
                             out_ch, 2});
            in_ch = out_ch;
            factor /= 2;
        }
        stage.push_back(
            {"encoder.s" + std::to_string(s) + ".c" + std::to_string(idx), in_ch, out_ch, 1});
        in_ch = out_ch;
        stages_.push_back(std::move(stage));
    }

    const std::size_t d = spec_.encoder.fused_dim();
    dec_head_ = {"decoder.head", d, spec_.decoder.hidden_channels, 1};
    dec_cls_ = {"decoder.cls", spec_.decoder.hidden_channels, spec_.decoder.num_classes, 1};

    for (const auto& stage : stages_)
        for (const auto& cd : stage) {
            params_.add(cd.name + ".w", {cd.out_ch, cd.in_ch, 3, 3});
            params_.add(cd.name + ".b", {cd.out_ch});
        }
    params_.add(dec_head_.name + ".w", {dec_head_.out_ch, dec_head_.in_ch, 3, 3});
    params_.add(dec_head_.name + ".b", {dec_head_.out_ch});
    params_.add(dec_cls_.name + ".w", {dec_cls_.out_ch, dec_cls_.in_ch, 1, 1});
    params_.add(dec_cls_.name + ".b", {dec_cls_.out_ch});

    const auto& dims = spec_.projector.layer_dims;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::string base = "projector.l" + std::to_string(i);
        params_.add(base + ".w", {dims[i + 1], dims[i]});
        params_.add(base + ".b", {dims[i + 1]});
        if (i + 2 < dims.size()) {
            const std::string bn = "projector.bn" + std::to_string(i);
            params_.add(bn + ".gamma", {dims[i + 1]});
            params_.add(bn + ".beta", {dims[i + 1]});
            buffers_.add(bn + ".running_mean", {dims[i + 1]});
            buffers_.add(bn + ".running_var", {dims[i + 1]});
        }
    }

    // He fan-in initialization, biases zero, BN at identity, running var 1.
    Rng rng(mix_seed(seed, 0xAB1E));
    for (auto& [name, t] : params_) {
        if (name.ends_with(".b") || name.ends_with(".beta")) continue;
        if (name.ends_with(".gamma")) {
            t.fill(1.0);
            continue;
        }
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.dim(i);
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (auto& v : t.vec()) v = rng.normal(0.0, std_dev);
    }
    for (auto& [name, t] : buffers_)
        if (name.ends_with(".running_var")) t.fill(1.0);
}

Tensor fuse_multiscale(const std::vector<Tensor>& stages) {
    check(!stages.empty(), "fuse_multiscale: empty stage list");
    const std::size_t b = stages.front().dim(0);
    const std::size_t m = stages.front().dim(2);
    const std::size_t n = stages.front().dim(3);
    std::size_t d = 0;
    for (const auto& s : stages) {
        check(s.rank() == 4 && s.dim(0) == b, "fuse_multiscale: inconsistent batch");
        d += s.dim(1);
    }
    Tensor out({b, d, m, n});
    std::size_t ch_off = 0;
    for (const auto& s : stages) {
        const Tensor r = resize_bilinear(s, m, n);
        const std::size_t c = r.dim(1);
        for (std::size_t img = 0; img < b; ++img)
            for (std::size_t ch = 0; ch < c; ++ch)
                std::copy(r.data() + (img * c + ch) * m * n, r.data() + (img * c + ch + 1) * m * n,
                          out.data() + ((img * d + ch_off + ch) * m) * n);
        ch_off += c;
    }
    return out;
}

Tensor Model::encode(const Tensor& x, EncoderActs* acts) const {
    ++encode_calls_;
    check(x.rank() == 4 && x.dim(1) == 3, "encode: input must be (b,3,h,w), got " + x.shape_str());
    const std::size_t stride = spec_.encoder.stage_strides.back();
    check(x.dim(2) % stride == 0 && x.dim(3) % stride == 0,
          "encode: input size " + x.shape_str() + " not divisible by max stride " +
              std::to_string(stride));

    EncoderActs local;
    EncoderActs& a = acts ? *acts : local;
    a.blocks.clear();
    a.stage_outputs.clear();
    a.blocks.push_back(x);

    Tensor cur = x;
    for (const auto& stage : stages_) {
        for (const auto& cd : stage) {
            Tensor z = conv2d_forward(params_.at(cd.name + ".w"), params_.at(cd.name + ".b"), cur,
                                      cd.stride, 1);
            cur = relu_forward(z);
            a.blocks.push_back(cur);
        }
        a.stage_outputs.push_back(cur);
    }
    return fuse_multiscale(a.stage_outputs);
}

void Model::encode_backward(const Tensor& g_fused, const EncoderActs& acts, TensorMap& grads,
                            Tensor* g_input) const {
    const std::size_t b = g_fused.dim(0);
    const std::size_t m = g_fused.dim(2);
    const std::size_t n = g_fused.dim(3);

    // Split the fused gradient per stage and undo the bilinear resize.
    std::vector<Tensor> g_blocks(acts.blocks.size());
    std::size_t ch_off = 0;
    std::size_t block_idx = 0;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        block_idx += stages_[s].size();
        const Tensor& stage_out = acts.blocks[block_idx];
        const std::size_t c = stage_out.dim(1);
        Tensor g_resized({b, c, m, n});
        for (std::size_t img = 0; img < b; ++img)
            for (std::size_t ch = 0; ch < c; ++ch)
                std::copy(g_fused.data() + ((img * g_fused.dim(1) + ch_off + ch) * m) * n,
                          g_fused.data() + ((img * g_fused.dim(1) + ch_off + ch) * m + m) * n,
                          g_resized.data() + (img * c + ch) * m * n);
        g_blocks[block_idx] = resize_bilinear_backward(g_resized, stage_out.dim(2), stage_out.dim(3));
        ch_off += c;
    }

    // Reverse sweep through the conv blocks; stage outputs receive both the
    // fusion gradient and the gradient from the following stage.
    std::size_t idx = acts.blocks.size() - 1;
    for (std::size_t s = stages_.size(); s-- > 0;) {
        for (std::size_t c = stages_[s].size(); c-- > 0;) {
            const auto& cd = stages_[s][c];
            const Tensor& y = acts.blocks[idx];
            const Tensor& input = acts.blocks[idx - 1];
            Tensor g_y = relu_backward(g_blocks[idx], y);
            const bool need_gx = idx - 1 > 0 || g_input != nullptr;
            Tensor g_x;
            if (need_gx) g_x = Tensor(input.shape());
            conv2d_backward(params_.at(cd.name + ".w"), input, g_y, cd.stride, 1,
                            &grads.at(cd.name + ".w"), &grads.at(cd.name + ".b"),
                            need_gx ? &g_x : nullptr);
            if (need_gx) {
                if (g_blocks[idx - 1].empty())
                    g_blocks[idx - 1] = std::move(g_x);
                else
                    for (std::size_t i = 0; i < g_x.numel(); ++i) g_blocks[idx - 1][i] += g_x[i];
            }
            --idx;
        }
    }
    if (g_input) *g_input = std::move(g_blocks[0]);
}

Tensor Model::decode(const Tensor& fused, DecoderActs* acts) const {
    ++decode_calls_;
    check(fused.rank() == 4, "decode: fused features must be (b,d,m,n)");
    const std::size_t stride = spec_.encoder.output_stride();
    DecoderActs local;
    DecoderActs& a = acts ? *acts : local;
    a.input = fused;
    Tensor z = conv2d_forward(params_.at(dec_head_.name + ".w"), params_.at(dec_head_.name + ".b"),
                              fused, 1, 1);
    a.hidden = relu_forward(z);
    Tensor low = conv2d_forward(params_.at(dec_cls_.name + ".w"), params_.at(dec_cls_.name + ".b"),
                                a.hidden, 1, 0);
    a.low_h = low.dim(2);
    a.low_w = low.dim(3);
    return resize_bilinear(low, low.dim(2) * stride, low.dim(3) * stride);
}

void Model::decode_backward(const Tensor& g_logits, const DecoderActs& acts, TensorMap& grads,
                            Tensor* g_fused) const {
    Tensor g_low = resize_bilinear_backward(g_logits, acts.low_h, acts.low_w);
    Tensor g_hidden(acts.hidden.shape());
    conv2d_backward(params_.at(dec_cls_.name + ".w"), acts.hidden, g_low, 1, 0,
                    &grads.at(dec_cls_.name + ".w"), &grads.at(dec_cls_.name + ".b"), &g_hidden);
    Tensor g_z = relu_backward(g_hidden, acts.hidden);
    if (g_fused && g_fused->empty()) *g_fused = Tensor(acts.input.shape());
    conv2d_backward(params_.at(dec_head_.name + ".w"), acts.input, g_z, 1, 1,
                    &grads.at(dec_head_.name + ".w"), &grads.at(dec_head_.name + ".b"), g_fused);
}

Tensor Model::project(const Tensor& pooled, bool training, bool update_running,
                      ProjectorActs* acts) {
    ++project_calls_;
    check(pooled.rank() == 2, "project: pooled features must be (n,d)");
    check(pooled.dim(1) == spec_.projector.input_dim(),
          "project: feature dim mismatch, got " + pooled.shape_str());
    if (training)
        check(pooled.dim(0) >= 2, "project: training mode requires batch size >= 2");

    ProjectorActs local;
    ProjectorActs& a = acts ? *acts : local;
    a.linear_inputs.clear();
    a.relu_outputs.clear();
    a.bn_caches.clear();

    const auto& dims = spec_.projector.layer_dims;
    Tensor cur = pooled;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::string base = "projector.l" + std::to_string(i);
        a.linear_inputs.push_back(cur);
        cur = linear_forward(params_.at(base + ".w"), params_.at(base + ".b"), cur);
        if (i + 2 < dims.size()) {
            const std::string bn = "projector.bn" + std::to_string(i);
            BatchNormCache cache;
            if (training)
                cur = batchnorm_forward_train(params_.at(bn + ".gamma"), params_.at(bn + ".beta"),
                                              cur, spec_.bn_epsilon, spec_.bn_momentum,
                                              &buffers_.at(bn + ".running_mean"),
                                              &buffers_.at(bn + ".running_var"), update_running,
                                              &cache);
            else
                cur = batchnorm_forward_eval(params_.at(bn + ".gamma"), params_.at(bn + ".beta"),
                                             buffers_.at(bn + ".running_mean"),
                                             buffers_.at(bn + ".running_var"), cur,
                                             spec_.bn_epsilon);
            a.bn_caches.push_back(std::move(cache));
            cur = relu_forward(cur);
            a.relu_outputs.push_back(cur);
        }
    }
    return cur;
}

void Model::project_backward(const Tensor& g_emb, const ProjectorActs& acts, TensorMap& grads,
                             Tensor* g_pooled) const {
    const auto& dims = spec_.projector.layer_dims;
    const std::size_t n_linear = dims.size() - 1;
    Tensor g = g_emb;
    for (std::size_t i = n_linear; i-- > 0;) {
        const std::string base = "projector.l" + std::to_string(i);
        if (i + 1 < n_linear) {
            // Undo ReLU then batch norm of transition i.
            g = relu_backward(g, acts.relu_outputs[i]);
            Tensor g_bn(g.shape());
            const std::string bn = "projector.bn" + std::to_string(i);
            batchnorm_backward(params_.at(bn + ".gamma"), acts.bn_caches[i], g,
                               &grads.at(bn + ".gamma"), &grads.at(bn + ".beta"), &g_bn);
            g = std::move(g_bn);
        }
        const Tensor& input = acts.linear_inputs[i];
        const bool last = i == 0;
        Tensor g_x;
        if (!last || g_pooled) g_x = Tensor(input.shape());
        linear_backward(params_.at(base + ".w"), input, g, &grads.at(base + ".w"),
                        &grads.at(base + ".b"), (!last || g_pooled) ? &g_x : nullptr);
        if (last) {
            if (g_pooled) *g_pooled = std::move(g_x);
        } else {
            g = std::move(g_x);
        }
    }
}

std::size_t Model::projector_param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_)
        if (name.starts_with("projector.")) n += t.numel();
    return n;
}

}  // namespace btseg::nn
