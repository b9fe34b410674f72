#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ros/dataset.hpp"
#include "ros/layers.hpp"
#include "ros/losses.hpp"

namespace ros {

enum class HeadRole { C1, R1, C2, R2 };

inline const char* head_role_name(HeadRole r) {
    switch (r) {
        case HeadRole::C1: return "C1";
        case HeadRole::R1: return "R1";
        case HeadRole::C2: return "C2";
        default: return "R2";
    }
}

/// Output width of a head for a given number of known classes.
inline int head_output_width(HeadRole role, int n_known) {
    switch (role) {
        case HeadRole::C1: return n_known;
        case HeadRole::R1: return 4 * n_known;
        case HeadRole::C2: return n_known + 1;
        default: return 4;
    }
}

/// R-heads consume the stacked anchor+rotated features (2F); C-heads see F.
inline bool head_uses_pair_input(HeadRole role) {
    return role == HeadRole::R1 || role == HeadRole::R2;
}

// ---------------------------------------------------------------------------
// Encoder: four conv blocks (conv3x3 -> batch norm -> leaky relu -> max pool)
// followed by global average pooling. Output width = last block's channels.
// ---------------------------------------------------------------------------

struct EncoderSpec {
    int in_channels = 3;
    std::array<int, 4> widths = {8, 16, 32, 128};
    int feature_dim() const { return widths[3]; }
};

template <typename T>
class Encoder {
public:
    struct Ctx {
        Mat<T> block_in[4];
        typename Conv3x3<T>::Ctx conv[4];
        typename BatchNorm<T>::Ctx bn[4];
        Mat<T> pre_act[4];
        typename MaxPool2<T>::Ctx pool[4];
        int gap_hw = 0;
    };

    Encoder() = default;

    void init(const EncoderSpec& spec, Rng& rng) {
        spec_ = spec;
        int prev = spec.in_channels;
        for (int b = 0; b < 4; ++b) {
            conv_[b].init(prev, spec.widths[b], "encoder.block" + std::to_string(b) + ".conv", rng);
            bn_[b].init(spec.widths[b], "encoder.block" + std::to_string(b) + ".bn");
            prev = spec.widths[b];
        }
    }

    const EncoderSpec& spec() const { return spec_; }
    int feature_dim() const { return spec_.feature_dim(); }

    /// images: (N, in_channels * size * size) planar rows. Returns (N, F).
    Mat<T> forward(const Mat<T>& images, int size, bool train, Ctx* ctx) {
        if (images.cols() != static_cast<Eigen::Index>(spec_.in_channels) * size * size)
            throw ShapeError("encoder: image width mismatch");
        Mat<T> x = images;
        int h = size, w = size;
        for (int b = 0; b < 4; ++b) {
            if (ctx) ctx->block_in[b] = x;
            x = conv_[b].forward(x, h, w, ctx ? &ctx->conv[b] : nullptr);
            x = bn_[b].forward(x, static_cast<Eigen::Index>(h) * w, train,
                               ctx ? &ctx->bn[b] : nullptr);
            if (ctx) ctx->pre_act[b] = x;
            x = leaky_relu(x, slope_);
            x = MaxPool2<T>::forward(x, spec_.widths[b], h, w, ctx ? &ctx->pool[b] : nullptr);
            h /= 2;
            w /= 2;
        }
        if (ctx) ctx->gap_hw = h * w;
        return global_avg_pool(x, spec_.widths[3], h * w);
    }

    /// Accumulates parameter gradients; input gradient is discarded.
    void backward(Ctx& ctx, const Mat<T>& dfeatures) {
        Mat<T> dx = global_avg_pool_backward(dfeatures, spec_.widths[3], ctx.gap_hw);
        for (int b = 3; b >= 0; --b) {
            dx = MaxPool2<T>::backward(ctx.pool[b], dx);
            dx = leaky_relu_backward(ctx.pre_act[b], dx, slope_);
            dx = bn_[b].backward(ctx.bn[b], dx);
            dx = conv_[b].backward(ctx.conv[b], dx);
        }
    }

    /// Trainable mask per block ("all" blocks, only the "last", or "none").
    void set_trainable_blocks(int first_trainable_block) {
        for (int b = 0; b < 4; ++b) {
            bool on = b >= first_trainable_block;
            conv_[b].weight.trainable = on;
            conv_[b].bias.trainable = on;
            bn_[b].gamma.trainable = on;
            bn_[b].beta.trainable = on;
        }
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        for (int b = 0; b < 4; ++b) {
            out.push_back(&conv_[b].weight);
            out.push_back(&conv_[b].bias);
            out.push_back(&bn_[b].gamma);
            out.push_back(&bn_[b].beta);
        }
        return out;
    }

    /// Non-trainable buffers that still belong in checkpoints.
    std::vector<std::pair<std::string, Mat<T>*>> buffers() {
        std::vector<std::pair<std::string, Mat<T>*>> out;
        for (int b = 0; b < 4; ++b) {
            out.emplace_back("encoder.block" + std::to_string(b) + ".bn.running_mean",
                             &bn_[b].running_mean);
            out.emplace_back("encoder.block" + std::to_string(b) + ".bn.running_var",
                             &bn_[b].running_var);
        }
        return out;
    }

private:
    EncoderSpec spec_;
    Conv3x3<T> conv_[4];
    BatchNorm<T> bn_[4];
    T slope_ = T(0.1);
};

// ---------------------------------------------------------------------------
// Head: affine -> batch norm -> leaky relu (0.2) -> affine. The 256-d
// post-rectifier activation is the penultimate vector exposed for the
// center loss.
// ---------------------------------------------------------------------------

constexpr int kHeadHiddenDim = 256;

template <typename T>
class Head {
public:
    struct Ctx {
        Mat<T> input;
        Mat<T> pre_bn;
        typename BatchNorm<T>::Ctx bn;
        Mat<T> pre_act;
        Mat<T> penultimate;  // v, width 256
    };

    Head() = default;

    void init(HeadRole role, int in_dim, int out_dim, Rng& rng) {
        role_ = role;
        std::string base = head_role_name(role);
        fc1_.init(in_dim, kHeadHiddenDim, base + ".fc1", rng);
        bn_.init(kHeadHiddenDim, base + ".bn");
        fc2_.init(kHeadHiddenDim, out_dim, base + ".fc2", rng);
    }

    HeadRole role() const { return role_; }
    int in_dim() const { return static_cast<int>(fc1_.weight.value.cols()); }
    int out_dim() const { return static_cast<int>(fc2_.weight.value.rows()); }

    Mat<T> forward(const Mat<T>& x, bool train, Ctx* ctx) {
        Mat<T> h = fc1_.forward(x);
        Mat<T> hb = bn_.forward(h, 1, train, ctx ? &ctx->bn : nullptr);
        Mat<T> v = leaky_relu(hb, slope_);
        Mat<T> logits = fc2_.forward(v);
        if (ctx) {
            ctx->input = x;
            ctx->pre_bn = std::move(h);
            ctx->pre_act = std::move(hb);
            ctx->penultimate = v;
        }
        return logits;
    }

    /// dv_extra, when nonempty, is added at the penultimate activation
    /// (center-loss path). Returns grad wrt the head input.
    Mat<T> backward(Ctx& ctx, const Mat<T>& dlogits, const Mat<T>& dv_extra = Mat<T>()) {
        Mat<T> dv = fc2_.backward(ctx.penultimate, dlogits);
        if (dv_extra.size() > 0) dv += dv_extra;
        Mat<T> dhb = leaky_relu_backward(ctx.pre_act, dv, slope_);
        Mat<T> dh = bn_.backward(ctx.bn, dhb);
        return fc1_.backward(ctx.input, dh);
    }

    std::vector<Param<T>*> params() {
        return {&fc1_.weight, &fc1_.bias, &bn_.gamma, &bn_.beta, &fc2_.weight, &fc2_.bias};
    }

    std::vector<std::pair<std::string, Mat<T>*>> buffers() {
        std::string base = head_role_name(role_);
        return {{base + ".bn.running_mean", &bn_.running_mean},
                {base + ".bn.running_var", &bn_.running_var}};
    }

    Linear<T>& fc1() { return fc1_; }
    BatchNorm<T>& bn() { return bn_; }
    Linear<T>& fc2() { return fc2_; }

private:
    HeadRole role_ = HeadRole::C1;
    Linear<T> fc1_;
    BatchNorm<T> bn_;
    Linear<T> fc2_;
    T slope_ = T(0.2);
};

// ---------------------------------------------------------------------------
// NetworkBundle: encoder + the heads of one stage
// ---------------------------------------------------------------------------

template <typename T>
struct SemanticOutput {
    Mat<T> probs;
    Mat<T> logits;
};

template <typename T>
struct RotationOutput {
    Mat<T> probs;
    Mat<T> logits;
    Mat<T> penultimate;  // v rows, width 256
};

template <typename T>
class NetworkBundle {
public:
    NetworkBundle() = default;

    /// Stage-one bundle: encoder + C1 + R1.
    static NetworkBundle make_stage1(const EncoderSpec& spec, int n_known, std::uint64_t seed) {
        NetworkBundle b;
        b.stage_ = 1;
        b.n_known_ = n_known;
        Rng rng(derive_seed({seed, 0x4e457u}));
        b.encoder_.init(spec, rng);
        const int f = spec.feature_dim();
        b.heads_[HeadRole::C1].init(HeadRole::C1, f, head_output_width(HeadRole::C1, n_known), rng);
        b.heads_[HeadRole::R1].init(HeadRole::R1, 2 * f, head_output_width(HeadRole::R1, n_known),
                                    rng);
        return b;
    }

    /// Fresh stage-two bundle (used when stage-one transfer is disabled).
    static NetworkBundle make_stage2(const EncoderSpec& spec, int n_known, std::uint64_t seed) {
        NetworkBundle b;
        b.stage_ = 2;
        b.n_known_ = n_known;
        Rng rng(derive_seed({seed, 0x4e457u, 2u}));
        b.encoder_.init(spec, rng);
        const int f = spec.feature_dim();
        b.heads_[HeadRole::C2].init(HeadRole::C2, f, head_output_width(HeadRole::C2, n_known), rng);
        b.heads_[HeadRole::R2].init(HeadRole::R2, 2 * f, head_output_width(HeadRole::R2, n_known),
                                    rng);
        return b;
    }

    int stage() const { return stage_; }
    int n_known() const { return n_known_; }
    Encoder<T>& encoder() { return encoder_; }
    const Encoder<T>& encoder() const { return encoder_; }
    bool has_head(HeadRole r) const { return heads_.count(r) > 0; }
    Head<T>& head(HeadRole r) {
        auto it = heads_.find(r);
        if (it == heads_.end())
            throw ValidationError(std::string("bundle has no head ") + head_role_name(r));
        return it->second;
    }

    /// Pack images into planar (N, C*H*W) rows.
    static Mat<T> pack_images(const std::vector<const Image*>& imgs) {
        if (imgs.empty()) return Mat<T>();
        const Image& first = *imgs[0];
        const Eigen::Index width =
            static_cast<Eigen::Index>(first.channels) * first.height * first.width;
        Mat<T> out(static_cast<Eigen::Index>(imgs.size()), width);
        for (std::size_t s = 0; s < imgs.size(); ++s) {
            const Image& im = *imgs[s];
            if (im.height != first.height || im.width != first.width ||
                im.channels != first.channels)
                throw ShapeError("pack_images: mixed image shapes in batch");
            Eigen::Index k = 0;
            for (int c = 0; c < im.channels; ++c)
                for (int y = 0; y < im.height; ++y)
                    for (int x = 0; x < im.width; ++x)
                        out(static_cast<Eigen::Index>(s), k++) = static_cast<T>(im.at(y, x, c));
        }
        return out;
    }

    /// softmax(C(E(x))) in evaluation mode; deterministic given the weights.
    SemanticOutput<T> forward_semantic(const std::vector<const Image*>& images, HeadRole role) {
        if (role != HeadRole::C1 && role != HeadRole::C2)
            throw ValidationError("forward_semantic: role must be a C head");
        if (images.empty()) return {};
        Mat<T> x = pack_images(images);
        Mat<T> feats = encoder_.forward(x, images.empty() ? 0 : images[0]->height, false, nullptr);
        SemanticOutput<T> out;
        out.logits = head(role).forward(feats, false, nullptr);
        out.probs = softmax(out.logits);
        return out;
    }

    /// softmax(R([E(x), E(x_rot)])) in evaluation mode. With use_anchor =
    /// false the rotated features are duplicated to fill both slots, which
    /// keeps the head shape fixed across the ablation.
    RotationOutput<T> forward_rotation(const std::vector<const Image*>& anchors,
                                       const std::vector<const Image*>& rotated, HeadRole role,
                                       bool use_anchor = true) {
        if (role != HeadRole::R1 && role != HeadRole::R2)
            throw ValidationError("forward_rotation: role must be an R head");
        if (use_anchor && anchors.size() != rotated.size())
            throw ShapeError("forward_rotation: anchor/rotated batch size mismatch");
        if (rotated.empty()) return {};
        Mat<T> rot_feats = encoder_.forward(pack_images(rotated),
                                            rotated.empty() ? 0 : rotated[0]->height, false,
                                            nullptr);
        Mat<T> anc_feats;
        if (use_anchor)
            anc_feats = encoder_.forward(pack_images(anchors),
                                         anchors.empty() ? 0 : anchors[0]->height, false, nullptr);
        else
            anc_feats = rot_feats;
        Mat<T> joint(rot_feats.rows(), anc_feats.cols() + rot_feats.cols());
        joint << anc_feats, rot_feats;
        typename Head<T>::Ctx ctx;
        RotationOutput<T> out;
        out.logits = head(role).forward(joint, false, &ctx);
        out.probs = softmax(out.logits);
        out.penultimate = std::move(ctx.penultimate);
        return out;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out = encoder_.params();
        for (auto& [role, h] : heads_) {
            auto hp = h.params();
            out.insert(out.end(), hp.begin(), hp.end());
        }
        return out;
    }

    std::vector<std::pair<std::string, Mat<T>*>> buffers() {
        auto out = encoder_.buffers();
        for (auto& [role, h] : heads_) {
            auto hb = h.buffers();
            out.insert(out.end(), hb.begin(), hb.end());
        }
        return out;
    }

    std::map<HeadRole, Head<T>>& heads() { return heads_; }

private:
    int stage_ = 0;
    int n_known_ = 0;
    Encoder<T> encoder_;
    std::map<HeadRole, Head<T>> heads_;
};

/// Stage-two bundle from a trained stage-one bundle: encoder copied, C2
/// seeded from C1 with a freshly drawn unknown-class row (which carries the
/// configured learning-rate multiplier), R2 drawn fresh.
template <typename T>
NetworkBundle<T> transfer_stage1_to_stage2(NetworkBundle<T>& stage1, std::uint64_t seed,
                                           T unknown_lr_multiplier = T(2)) {
    if (!stage1.has_head(HeadRole::C1) || !stage1.has_head(HeadRole::R1))
        throw ValidationError("transfer: source bundle is not a stage-one bundle");
    const int n_known = stage1.n_known();
    NetworkBundle<T> b2 = NetworkBundle<T>::make_stage2(stage1.encoder().spec(), n_known, seed);

    // encoder: verbatim copy, weights and running statistics
    auto src_params = stage1.encoder().params();
    auto dst_params = b2.encoder().params();
    for (std::size_t i = 0; i < src_params.size(); ++i)
        dst_params[i]->value = src_params[i]->value;
    auto src_buf = stage1.encoder().buffers();
    auto dst_buf = b2.encoder().buffers();
    for (std::size_t i = 0; i < src_buf.size(); ++i) *dst_buf[i].second = *src_buf[i].second;

    // C2 from C1: shared trunk plus the first n_known output rows
    Head<T>& c1 = stage1.head(HeadRole::C1);
    Head<T>& c2 = b2.head(HeadRole::C2);
    c2.fc1().weight.value = c1.fc1().weight.value;
    c2.fc1().bias.value = c1.fc1().bias.value;
    c2.bn().gamma.value = c1.bn().gamma.value;
    c2.bn().beta.value = c1.bn().beta.value;
    c2.bn().running_mean = c1.bn().running_mean;
    c2.bn().running_var = c1.bn().running_var;
    c2.fc2().weight.value.topRows(n_known) = c1.fc2().weight.value;
    c2.fc2().bias.value.leftCols(n_known) = c1.fc2().bias.value;
    // the unknown row keeps its fresh initialization and learns faster
    c2.fc2().weight.row_lr_mult.assign(static_cast<std::size_t>(n_known) + 1, T(1));
    c2.fc2().weight.row_lr_mult.back() = unknown_lr_multiplier;
    c2.fc2().bias.col_lr_mult.assign(static_cast<std::size_t>(n_known) + 1, T(1));
    c2.fc2().bias.col_lr_mult.back() = unknown_lr_multiplier;

    return b2;
}

// ---------------------------------------------------------------------------
// Checkpoints: self-describing binary archive, bit-exact round trip
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in) {
    std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'R', 'O', 'S', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void save_checkpoint(NetworkBundle<T>& bundle, const std::string& path,
                     const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    detail::write_u32(out, 1);  // format version
    detail::write_u32(out, static_cast<std::uint32_t>(sizeof(T)));
    detail::write_u32(out, static_cast<std::uint32_t>(bundle.stage()));
    detail::write_u32(out, static_cast<std::uint32_t>(bundle.n_known()));
    detail::write_str(out, config_hash);

    std::string roles;
    for (auto& [role, h] : bundle.heads()) {
        if (!roles.empty()) roles += ',';
        roles += head_role_name(role);
    }
    detail::write_str(out, roles);

    const auto& spec = bundle.encoder().spec();
    detail::write_u32(out, static_cast<std::uint32_t>(spec.in_channels));
    for (int wdt : spec.widths) detail::write_u32(out, static_cast<std::uint32_t>(wdt));

    auto write_mat = [&](const std::string& name, const Mat<T>& m) {
        detail::write_str(out, name);
        detail::write_u32(out, static_cast<std::uint32_t>(m.rows()));
        detail::write_u32(out, static_cast<std::uint32_t>(m.cols()));
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(T) * static_cast<std::size_t>(m.size())));
    };

    auto params = bundle.params();
    auto buffers = bundle.buffers();
    detail::write_u32(out, static_cast<std::uint32_t>(params.size() + buffers.size()));
    for (Param<T>* p : params) write_mat(p->name, p->value);
    for (auto& [name, m] : buffers) write_mat(name, *m);
    if (!out) throw IoError("short write on checkpoint: " + path);
}

struct CheckpointInfo {
    int stage = 0;
    int n_known = 0;
    std::string config_hash;
    std::string roles;
};

template <typename T>
CheckpointInfo load_checkpoint(NetworkBundle<T>& bundle, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path);
    if (detail::read_u32(in) != 1) throw IoError("unsupported checkpoint version: " + path);
    if (detail::read_u32(in) != sizeof(T))
        throw IoError("checkpoint scalar width differs from this build: " + path);
    CheckpointInfo info;
    info.stage = static_cast<int>(detail::read_u32(in));
    info.n_known = static_cast<int>(detail::read_u32(in));
    info.config_hash = detail::read_str(in);
    info.roles = detail::read_str(in);

    EncoderSpec spec;
    spec.in_channels = static_cast<int>(detail::read_u32(in));
    for (int b = 0; b < 4; ++b) spec.widths[b] = static_cast<int>(detail::read_u32(in));

    if (info.stage == 2)
        bundle = NetworkBundle<T>::make_stage2(spec, info.n_known, 0);
    else
        bundle = NetworkBundle<T>::make_stage1(spec, info.n_known, 0);

    std::map<std::string, Mat<T>*> slots;
    for (Param<T>* p : bundle.params()) slots[p->name] = &p->value;
    for (auto& [name, m] : bundle.buffers()) slots[name] = m;

    std::uint32_t count = detail::read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = detail::read_str(in);
        std::uint32_t rows = detail::read_u32(in);
        std::uint32_t cols = detail::read_u32(in);
        auto it = slots.find(name);
        if (it == slots.end()) throw IoError("checkpoint entry '" + name + "' has no slot");
        if (it->second->rows() != static_cast<Eigen::Index>(rows) ||
            it->second->cols() != static_cast<Eigen::Index>(cols))
            throw IoError("checkpoint entry '" + name + "' has mismatched shape");
        in.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(sizeof(T) * rows * cols));
    }
    if (!in) throw IoError("short read on checkpoint: " + path);
    return info;
}

}  // namespace ros
