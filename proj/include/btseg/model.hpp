#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btseg/nn.hpp"
#include "btseg/tensor.hpp"
#include "btseg/tensor_map.hpp"

namespace btseg::nn {

struct EncoderSpec {
    std::vector<std::size_t> stage_channels;  // output channels per stage
    std::vector<std::size_t> stage_strides;   // cumulative downsampling per stage

    std::size_t fused_dim() const;
    /// Stride of the fused feature grid = the finest stage's stride.
    std::size_t output_stride() const { return stage_strides.front(); }
    void validate() const;
};

struct ProjectorSpec {
    /// e.g. [d, d/2, d/4]; hidden transitions get batch norm + ReLU, the last
    /// one is a plain linear map.
    std::vector<std::size_t> layer_dims;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t embedding_dim() const { return layer_dims.back(); }
    void validate() const;
};

struct DecoderSpec {
    std::size_t num_classes = 0;
    std::size_t hidden_channels = 0;
    void validate() const;
};

struct ModelSpec {
    EncoderSpec encoder;
    ProjectorSpec projector;
    DecoderSpec decoder;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    void validate() const;
};

/// Returns the default desk-scale spec for a given class count: a two-stage
/// convolutional pyramid fused to 48 channels with a [48, 24, 12] projector.
ModelSpec default_model_spec(std::size_t num_classes);

struct ConvDef {
    std::string name;
    std::size_t in_ch, out_ch, stride;
};

struct EncoderActs {
    /// blocks[0] is the input; blocks[i+1] the output of conv block i.
    std::vector<Tensor> blocks;
    std::vector<Tensor> stage_outputs;  // aliases kept by value for fusion backward
};

struct DecoderActs {
    Tensor input;
    Tensor hidden;  // post-ReLU
    std::size_t low_h = 0, low_w = 0;
};

struct ProjectorActs {
    std::vector<Tensor> linear_inputs;
    std::vector<Tensor> relu_outputs;
    std::vector<BatchNormCache> bn_caches;
};

class Model {
public:
    Model(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    TensorMap& params() { return params_; }
    const TensorMap& params() const { return params_; }
    TensorMap& buffers() { return buffers_; }
    const TensorMap& buffers() const { return buffers_; }
    TensorMap make_grads() const { return params_.zeros_like(); }

    /// (b,3,h,w) -> fused feature map (b, d, h/stride, w/stride).
    Tensor encode(const Tensor& x, EncoderActs* acts = nullptr) const;
    void encode_backward(const Tensor& g_fused, const EncoderActs& acts, TensorMap& grads,
                         Tensor* g_input = nullptr) const;

    /// Fused features -> logits at input resolution (b, classes, h, w).
    Tensor decode(const Tensor& fused, DecoderActs* acts = nullptr) const;
    void decode_backward(const Tensor& g_logits, const DecoderActs& acts, TensorMap& grads,
                         Tensor* g_fused) const;

    /// Pooled features (n, d) -> embeddings (n, p). Training mode requires
    /// n >= 2; running statistics move only when update_running is set.
    Tensor project(const Tensor& pooled, bool training, bool update_running,
                   ProjectorActs* acts = nullptr);
    void project_backward(const Tensor& g_emb, const ProjectorActs& acts, TensorMap& grads,
                          Tensor* g_pooled) const;

    std::size_t projector_param_count() const;

    // Call counters for the inference-path purity contract.
    std::uint64_t encode_calls() const { return encode_calls_; }
    std::uint64_t decode_calls() const { return decode_calls_; }
    std::uint64_t project_calls() const { return project_calls_; }

private:
    ModelSpec spec_;
    std::vector<std::vector<ConvDef>> stages_;  // per stage conv definitions
    ConvDef dec_head_, dec_cls_;
    TensorMap params_;
    TensorMap buffers_;
    mutable std::uint64_t encode_calls_ = 0;
    mutable std::uint64_t decode_calls_ = 0;
    mutable std::uint64_t project_calls_ = 0;
};

/// Every stage resized bilinearly to the finest grid and concatenated on the
/// channel axis; standalone form of the fusion used inside encode().
Tensor fuse_multiscale(const std::vector<Tensor>& stages);

}  // namespace btseg::nn
