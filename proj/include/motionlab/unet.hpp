#pragma once

// Miniature video denoiser: a two-level U-Net over channel-last clips
// [B,F,H,W,C]. Every block runs, in order, a per-frame residual conv
// stage, spatial self-attention with text cross-attention, and temporal
// self-attention across frames with a learned relative-position bias.
// Spatial layers never mix frames; temporal layers never see text.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "motionlab/diffusion.hpp"
#include "motionlab/digest.hpp"
#include "motionlab/errors.hpp"
#include "motionlab/rng.hpp"
#include "motionlab/tensor.hpp"

namespace motionlab {

// ---- prompts --------------------------------------------------------------

// Token id 0 is the pad token; prompts shorter than the model's text
// length are padded with it before embedding.
constexpr int32_t kPadToken = 0;

struct TokenSeq {
    std::vector<int32_t> ids;

    bool operator==(const TokenSeq& o) const { return ids == o.ids; }
    bool operator!=(const TokenSeq& o) const { return !(*this == o); }
    size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
};

// ---- configuration --------------------------------------------------------

struct UNetConfig {
    int frames = 8;
    int size = 16;                        // H = W
    std::vector<int> channels = {32, 64}; // one entry per resolution level
    int heads = 4;
    int in_channels = 3;
    int vocab = 48;
    int text_len = 16;
    int text_dim = 32;
    int time_dim = 64;
    int timesteps = 1000;

    int levels() const { return int(channels.size()); }

    void validate() const {
        require(frames >= 1, ErrCat::config, "frames must be >= 1");
        require(size >= 1, ErrCat::config, "spatial size must be >= 1");
        require(!channels.empty(), ErrCat::config, "channel list must be nonempty");
        require(heads >= 1, ErrCat::config, "heads must be >= 1");
        for (int c : channels) {
            require(c >= 1, ErrCat::config, "channel counts must be >= 1");
            require(c % heads == 0, ErrCat::config,
                    "channels " + std::to_string(c) + " not divisible by " +
                        std::to_string(heads) + " heads");
        }
        int div = 1 << (levels() - 1);
        require(size % div == 0, ErrCat::config,
                "size " + std::to_string(size) + " not divisible by 2^(levels-1) = " +
                    std::to_string(div));
        require(in_channels >= 1, ErrCat::config, "in_channels must be >= 1");
        require(vocab >= 2, ErrCat::config, "vocabulary must hold the pad token and a word");
        require(text_len >= 1, ErrCat::config, "text_len must be >= 1");
        require(text_dim >= 1, ErrCat::config, "text_dim must be >= 1");
        require(time_dim >= 2 && time_dim % 2 == 0, ErrCat::config,
                "time_dim must be even and >= 2");
        require(timesteps >= 1, ErrCat::config, "timesteps must be >= 1");
    }
};

// Checks a prompt against the model's text contract. Bad ids surface as
// input errors, overlength prompts likewise.
inline void check_tokens(const TokenSeq& seq, const UNetConfig& cfg) {
    require(int64_t(seq.ids.size()) <= int64_t(cfg.text_len), ErrCat::input,
            "prompt has " + std::to_string(seq.ids.size()) + " tokens, model accepts " +
                std::to_string(cfg.text_len));
    for (int32_t id : seq.ids)
        require(id >= 0 && id < cfg.vocab, ErrCat::input,
                "token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(cfg.vocab));
}

inline std::vector<int32_t> padded_ids(const TokenSeq& seq, const UNetConfig& cfg) {
    check_tokens(seq, cfg);
    std::vector<int32_t> ids(size_t(cfg.text_len), kPadToken);
    std::copy(seq.ids.begin(), seq.ids.end(), ids.begin());
    return ids;
}

// ---- parameters -----------------------------------------------------------

template <class S>
using ModelParams = std::map<std::string, Tensor<S>>;

enum class ParamTag { spatial, temporal, other };

// Attention parameters carry the branch they belong to in their path:
// sattn/xattn segments mark appearance layers, tattn segments mark
// motion layers. Everything else (convs, norms, embeddings) is shared.
inline ParamTag param_tag(const std::string& name) {
    if (name.find("tattn.") != std::string::npos) return ParamTag::temporal;
    if (name.find("sattn.") != std::string::npos || name.find("xattn.") != std::string::npos)
        return ParamTag::spatial;
    return ParamTag::other;
}

struct ParamPartition {
    std::set<std::string> spatial, temporal, other;

    const std::set<std::string>& group(ParamTag t) const {
        switch (t) {
            case ParamTag::spatial: return spatial;
            case ParamTag::temporal: return temporal;
            default: return other;
        }
    }

    size_t total() const { return spatial.size() + temporal.size() + other.size(); }
};

template <class S>
inline ParamPartition partition_params(const ModelParams<S>& params) {
    ParamPartition part;
    for (const auto& [name, t] : params) {
        (void)t;
        switch (param_tag(name)) {
            case ParamTag::spatial: part.spatial.insert(name); break;
            case ParamTag::temporal: part.temporal.insert(name); break;
            default: part.other.insert(name); break;
        }
    }
    return part;
}

// Order-independent digest over names, shapes, and raw values; used to
// prove a parameter set never changed.
template <class S>
uint64_t params_digest(const ModelParams<S>& params) {
    Fnv1a64 d;
    for (const auto& [name, t] : params) {
        d.update(name.data(), name.size());
        for (int64_t v : t.shape()) d.update(&v, sizeof(v));
        d.update(t.data(), size_t(t.numel()) * sizeof(S));
    }
    return d.value();
}

// ---- parameter providers --------------------------------------------------

enum class Init { zeros, ones, fan_in };

// The forward pass pulls every parameter through this interface, so one
// traversal can build, run, or differentiate the same network.
template <class S>
struct ParamProvider {
    virtual ~ParamProvider() = default;
    virtual Tensor<S> get(const std::string& name, const Shape& shape, Init init) = 0;
};

// Creates parameters on first request. Values are seeded per name, so
// initialization does not depend on traversal order.
template <class S>
struct BuildProvider final : ParamProvider<S> {
    uint64_t seed;
    ModelParams<S> params;

    explicit BuildProvider(uint64_t s) : seed(s) {}

    Tensor<S> get(const std::string& name, const Shape& shape, Init init) override {
        auto it = params.find(name);
        if (it != params.end()) {
            require(it->second.shape() == shape, ErrCat::contract,
                    "parameter " + name + " requested with conflicting shapes");
            return it->second;
        }
        Tensor<S> t;
        switch (init) {
            case Init::zeros: t = Tensor<S>::zeros(shape); break;
            case Init::ones: t = Tensor<S>::full(shape, S(1)); break;
            case Init::fan_in: {
                require(shape.size() >= 2, ErrCat::contract,
                        "fan-in init needs a rank >= 2 parameter: " + name);
                const int64_t fan = shape_numel(shape) / shape.back();
                Rng rng(Rng::derive(seed, fnv1a64(name.data(), name.size())));
                t = randn<S>(shape, rng, 1.0 / std::sqrt(double(fan)));
                break;
            }
        }
        params.emplace(name, t);
        return t;
    }
};

// Serves a fixed parameter set. With a tape attached, requested
// parameters are watched (optionally only those in `train`) so the
// reverse sweep can reach them; each is watched once per provider.
template <class S>
struct RunProvider final : ParamProvider<S> {
    const ModelParams<S>* params;
    Tape<S>* tape = nullptr;
    const std::set<std::string>* train = nullptr;
    std::map<std::string, Tensor<S>> watched;

    explicit RunProvider(const ModelParams<S>& p, Tape<S>* tp = nullptr,
                         const std::set<std::string>* tr = nullptr)
        : params(&p), tape(tp), train(tr) {}

    Tensor<S> get(const std::string& name, const Shape& shape, Init) override {
        auto it = params->find(name);
        require(it != params->end(), ErrCat::contract, "model has no parameter " + name);
        require(it->second.shape() == shape, ErrCat::contract,
                "parameter " + name + " has shape " + shape_str(it->second.shape()) +
                    ", expected " + shape_str(shape));
        if (!tape || (train && !train->count(name))) return it->second;
        auto w = watched.find(name);
        if (w != watched.end()) return w->second;
        Tensor<S> t = tape->watch(it->second);
        watched.emplace(name, t);
        return t;
    }

    // Gradients for every watched parameter the loss reached, keyed for
    // the optimizer. Parameters outside the map stay untouched.
    std::map<std::string, std::vector<S>> grads() const {
        std::map<std::string, std::vector<S>> out;
        for (const auto& [name, t] : watched)
            if (tape->has_grad(t)) out.emplace(name, tape->grad_vec(t));
        return out;
    }
};

// ---- timestep features ----------------------------------------------------

// Raw sinusoidal features at geometric frequencies, before any learned
// projection. First half sine, second half cosine, so t=0 maps to all
// zeros then all ones.
template <class S>
Tensor<S> embed_timestep(int t, int dim, int max_t = 1000) {
    require(t >= 0 && t < max_t, ErrCat::contract,
            "timestep " + std::to_string(t) + " outside [0, " + std::to_string(max_t) + ")");
    require(dim >= 2 && dim % 2 == 0, ErrCat::contract, "timestep feature dim must be even >= 2");
    const int half = dim / 2;
    std::vector<S> out(static_cast<size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double f = half > 1 ? std::exp(-std::log(10000.0) * double(i) / double(half - 1))
                                  : 1.0;
        out[size_t(i)] = S(std::sin(double(t) * f));
        out[size_t(half + i)] = S(std::cos(double(t) * f));
    }
    return Tensor<S>(Shape{int64_t(dim)}, std::move(out));
}

// ---- layer helpers --------------------------------------------------------

namespace unet_detail {

template <class S>
Tensor<S> linear(ParamProvider<S>& p, const std::string& prefix, const Tensor<S>& x, int64_t in,
                 int64_t out, Init winit = Init::fan_in) {
    Tensor<S> w = p.get(prefix + ".w", {in, out}, winit);
    Tensor<S> b = p.get(prefix + ".b", {out}, Init::zeros);
    return add(matmul(x, w), b);
}

template <class S>
Tensor<S> conv(ParamProvider<S>& p, const std::string& prefix, const Tensor<S>& x, int64_t cin,
               int64_t cout, int k = 3, int stride = 1, Init winit = Init::fan_in) {
    Tensor<S> w = p.get(prefix + ".k", {k, k, cin, cout}, winit);
    Tensor<S> b = p.get(prefix + ".b", {cout}, Init::zeros);
    return add(conv2d(x, w, stride), b);
}

template <class S>
Tensor<S> norm(ParamProvider<S>& p, const std::string& prefix, const Tensor<S>& x, int groups) {
    const int64_t c = x.dim(x.rank() - 1);
    Tensor<S> g = p.get(prefix + ".g", {c}, Init::ones);
    Tensor<S> b = p.get(prefix + ".b", {c}, Init::zeros);
    return group_norm(x, groups, g, b);
}

// [N, T, C] -> [N, heads, T, C/heads]
template <class S>
Tensor<S> split_heads(const Tensor<S>& x, int heads) {
    const int64_t n = x.dim(0), tok = x.dim(1), c = x.dim(2);
    return permute(reshape(x, {n, tok, heads, c / heads}), {0, 2, 1, 3});
}

template <class S>
Tensor<S> merge_heads(const Tensor<S>& x) {
    const int64_t n = x.dim(0), h = x.dim(1), tok = x.dim(2), d = x.dim(3);
    return reshape(permute(x, {0, 2, 1, 3}), {n, tok, h * d});
}

// Self-attention over the H*W positions of each frame, then
// cross-attention from those positions into the prompt tokens. Output
// projections start at zero so a fresh block is an identity.
template <class S>
Tensor<S> spatial_attention(ParamProvider<S>& p, const std::string& px, const Tensor<S>& x,
                            const Tensor<S>& text, const UNetConfig& cfg, int64_t c) {
    const int64_t bf = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int heads = cfg.heads;

    Tensor<S> t = reshape(norm(p, px + ".sattn.gn", x, heads), {bf, h * w, c});
    Tensor<S> q = split_heads(linear(p, px + ".sattn.q", t, c, c), heads);
    Tensor<S> k = split_heads(linear(p, px + ".sattn.k", t, c, c), heads);
    Tensor<S> v = split_heads(linear(p, px + ".sattn.v", t, c, c), heads);
    Tensor<S> a = merge_heads(attention(q, k, v));
    Tensor<S> o = linear(p, px + ".sattn.o", a, c, c, Init::zeros);
    Tensor<S> y = add(x, reshape(o, {bf, h, w, c}));

    const int64_t lt = int64_t(cfg.text_len);
    Tensor<S> tq = reshape(norm(p, px + ".xattn.gn", y, heads), {bf, h * w, c});
    Tensor<S> cq = split_heads(linear(p, px + ".xattn.q", tq, c, c), heads);
    Tensor<S> tk = linear(p, px + ".xattn.k", text, cfg.text_dim, c);
    Tensor<S> tv = linear(p, px + ".xattn.v", text, cfg.text_dim, c);
    Tensor<S> ck = permute(reshape(tk, {1, lt, heads, c / heads}), {0, 2, 1, 3});
    Tensor<S> cv = permute(reshape(tv, {1, lt, heads, c / heads}), {0, 2, 1, 3});
    Tensor<S> ca = merge_heads(attention(cq, ck, cv));
    Tensor<S> co = linear(p, px + ".xattn.o", ca, c, c, Init::zeros);
    return add(y, reshape(co, {bf, h, w, c}));
}

// Self-attention over the F frames at each spatial position, with a
// learned relative-position bias so frame order is visible.
template <class S>
Tensor<S> temporal_attention(ParamProvider<S>& p, const std::string& px, const Tensor<S>& x,
                             int64_t batch, int64_t frames, const UNetConfig& cfg, int64_t c) {
    const int64_t h = x.dim(1), w = x.dim(2);
    const int heads = cfg.heads;
    const int64_t span = 2 * int64_t(cfg.frames) - 1;

    Tensor<S> t = norm(p, px + ".tattn.gn", x, heads);
    t = reshape(permute(reshape(t, {batch, frames, h, w, c}), {0, 2, 3, 1, 4}),
                {batch * h * w, frames, c});
    Tensor<S> q = split_heads(linear(p, px + ".tattn.q", t, c, c), heads);
    Tensor<S> k = split_heads(linear(p, px + ".tattn.k", t, c, c), heads);
    Tensor<S> v = split_heads(linear(p, px + ".tattn.v", t, c, c), heads);
    Tensor<S> table = p.get(px + ".tattn.relpos", {int64_t(heads), span}, Init::zeros);
    Tensor<S> bias = relpos_bias(table, frames);
    Tensor<S> a = merge_heads(attention(q, k, v, &bias));
    Tensor<S> o = linear(p, px + ".tattn.o", a, c, c, Init::zeros);
    o = reshape(permute(reshape(o, {batch, h, w, frames, c}), {0, 3, 1, 2, 4}),
                {batch * frames, h, w, c});
    return add(x, o);
}

// Per-frame residual conv stage with timestep conditioning added on the
// channel axis. The second conv starts at zero.
template <class S>
Tensor<S> resblock(ParamProvider<S>& p, const std::string& px, const Tensor<S>& x,
                   const Tensor<S>& temb, const UNetConfig& cfg, int64_t cin, int64_t cout) {
    Tensor<S> h = conv(p, px + ".res.conv1", silu(norm(p, px + ".res.gn1", x, cfg.heads)), cin,
                       cout);
    Tensor<S> tp = linear(p, px + ".res.temb", silu(temb), cfg.time_dim, cout);
    h = add(h, reshape(tp, {cout}));
    h = conv(p, px + ".res.conv2", silu(norm(p, px + ".res.gn2", h, cfg.heads)), cout, cout, 3, 1,
             Init::zeros);
    Tensor<S> skip = cin == cout ? x : conv(p, px + ".res.skip", x, cin, cout, 1);
    return add(skip, h);
}

template <class S>
Tensor<S> block(ParamProvider<S>& p, const std::string& px, const Tensor<S>& x,
                const Tensor<S>& temb, const Tensor<S>& text, const UNetConfig& cfg,
                int64_t batch, int64_t frames, int64_t cin, int64_t cout) {
    Tensor<S> h = resblock(p, px, x, temb, cfg, cin, cout);
    h = spatial_attention(p, px, h, text, cfg, cout);
    return temporal_attention(p, px, h, batch, frames, cfg, cout);
}

} // namespace unet_detail

// ---- forward pass ---------------------------------------------------------

// Full denoiser traversal. `z` is [B,F,H,W,C]; F may be 1 for the
// single-frame path even when the model was built for more frames (the
// relative-position table covers any F up to the built frame count).
template <class S>
Tensor<S> unet_forward(ParamProvider<S>& p, const UNetConfig& cfg, const Tensor<S>& z, int t,
                       const TokenSeq& cond) {
    using namespace unet_detail;
    require(z.rank() == 5, ErrCat::shape, "latent clip must be [B,F,H,W,C], got " +
                                              shape_str(z.shape()));
    const int64_t B = z.dim(0), F = z.dim(1), H = z.dim(2), W = z.dim(3), C = z.dim(4);
    require(B >= 1 && F >= 1, ErrCat::shape, "latent clip needs at least one batch and frame");
    require(F <= int64_t(cfg.frames), ErrCat::shape,
            "clip has " + std::to_string(F) + " frames, model was built for " +
                std::to_string(cfg.frames));
    require(H == int64_t(cfg.size) && W == int64_t(cfg.size), ErrCat::shape,
            "clip spatial size " + std::to_string(H) + "x" + std::to_string(W) +
                " does not match model size " + std::to_string(cfg.size));
    require(C == int64_t(cfg.in_channels), ErrCat::shape,
            "clip has " + std::to_string(C) + " channels, model expects " +
                std::to_string(cfg.in_channels));
    require(t >= 0 && t < cfg.timesteps, ErrCat::contract,
            "timestep " + std::to_string(t) + " outside [0, " + std::to_string(cfg.timesteps) +
                ")");

    const int64_t td = int64_t(cfg.time_dim);
    Tensor<S> temb = reshape(embed_timestep<S>(t, cfg.time_dim, cfg.timesteps), {1, td});
    temb = linear(p, "time.mlp2", silu(linear(p, "time.mlp1", temb, td, td)), td, td);

    Tensor<S> table = p.get("text.embed", {int64_t(cfg.vocab), int64_t(cfg.text_dim)},
                            Init::fan_in);
    Tensor<S> text = embedding_rows(table, padded_ids(cond, cfg));

    const std::vector<int>& ch = cfg.channels;
    const int L = cfg.levels();
    Tensor<S> h = conv(p, "conv_in", reshape(z, {B * F, H, W, C}), C, ch[0]);

    std::vector<Tensor<S>> skips;
    for (int l = 0; l < L; ++l) {
        h = block(p, "down" + std::to_string(l), h, temb, text, cfg, B, F, h.dim(3), ch[size_t(l)]);
        skips.push_back(h);
        if (l + 1 < L)
            h = conv(p, "downsample" + std::to_string(l), h, ch[size_t(l)], ch[size_t(l) + 1], 3,
                     2);
    }

    h = block(p, "mid", h, temb, text, cfg, B, F, ch[size_t(L - 1)], ch[size_t(L - 1)]);

    for (int l = L - 1; l >= 0; --l) {
        h = concat<S>({h, skips[size_t(l)]}, 3);
        h = block(p, "up" + std::to_string(l), h, temb, text, cfg, B, F, 2 * ch[size_t(l)],
                  ch[size_t(l)]);
        if (l > 0)
            h = conv(p, "upsample" + std::to_string(l), upsample2x(h), ch[size_t(l)],
                     ch[size_t(l) - 1]);
    }

    h = conv(p, "conv_out", h, ch[0], C, 3, 1, Init::zeros);
    return reshape(h, {B, F, H, W, C});
}

// ---- model construction ---------------------------------------------------

// Instantiates every parameter by running one traversal with a builder
// provider, so the name set is exactly what the forward pass uses.
// Initialization is seed-deterministic and name-keyed.
template <class S>
std::pair<ModelParams<S>, ParamPartition> build_unet(const UNetConfig& cfg, uint64_t seed) {
    cfg.validate();
    BuildProvider<S> bp(seed);
    Tensor<S> dummy = Tensor<S>::zeros({1, cfg.frames, cfg.size, cfg.size, cfg.in_channels});
    unet_forward(bp, cfg, dummy, 0, TokenSeq{});
    ParamPartition part = partition_params(bp.params);
    return {std::move(bp.params), std::move(part)};
}

// ---- model bundle and clip-level entry points -----------------------------

template <class S>
struct LatentClip {
    Tensor<S> latent; // [B,F,H,W,C]
    TokenSeq prompt;
};

template <class S>
struct Model {
    UNetConfig config;
    NoiseSchedule sched;
    ModelParams<S> params;
    ParamPartition partition;
};

template <class S>
Model<S> make_model(const UNetConfig& cfg, uint64_t seed) {
    Model<S> m;
    m.config = cfg;
    m.sched = make_schedule(cfg.timesteps);
    auto built = build_unet<S>(cfg, seed);
    m.params = std::move(built.first);
    m.partition = std::move(built.second);
    return m;
}

namespace unet_detail {

// want_frames < 0 accepts any frame count the forward pass allows.
template <class S>
void check_clip_input(const UNetConfig& cfg, const Tensor<S>& z, int64_t want_frames) {
    require(z.defined(), ErrCat::input, "latent clip is undefined");
    require(z.rank() == 5, ErrCat::shape,
            "latent clip must be [B,F,H,W,C], got " + shape_str(z.shape()));
    require(want_frames < 0 || z.dim(1) == want_frames, ErrCat::contract,
            "expected " + std::to_string(want_frames) + " frames, got " +
                std::to_string(z.dim(1)));
    require(z.finite(), ErrCat::input, "latent clip contains non-finite values");
    (void)cfg;
}

} // namespace unet_detail

// Predicts the noise content of a full clip at timestep t. Shape in
// equals shape out. Use a RunProvider plus unet_forward directly when
// gradients are needed.
template <class S>
Tensor<S> predict_eps(const Model<S>& m, const Tensor<S>& z, int t, const TokenSeq& cond) {
    unet_detail::check_clip_input(m.config, z, m.config.frames);
    RunProvider<S> rp(m.params);
    return unet_forward(rp, m.config, z, t, cond);
}

// Single-frame path used by the per-frame loss: identical to running
// the full model on an F=1 clip, where temporal attention mixes one
// token and reduces to its value path.
template <class S>
Tensor<S> predict_eps_frame(const Model<S>& m, const Tensor<S>& z, int t, const TokenSeq& cond) {
    require(z.defined() && z.rank() == 5, ErrCat::shape,
            "frame latent must be [B,1,H,W,C], got " +
                (z.defined() ? shape_str(z.shape()) : std::string("undefined")));
    require(z.dim(1) == 1, ErrCat::contract,
            "single-frame path got " + std::to_string(z.dim(1)) + " frames");
    require(z.finite(), ErrCat::input, "frame latent contains non-finite values");
    RunProvider<S> rp(m.params);
    return unet_forward(rp, m.config, z, t, cond);
}

// Mean squared error between the true noise and the model's prediction
// on the noised clip. Differentiable through the provider, so the same
// routine serves evaluation and training.
template <class S>
Tensor<S> eps_loss(ParamProvider<S>& p, const UNetConfig& cfg, const NoiseSchedule& sched,
                   const Tensor<S>& z0, int t, const Tensor<S>& eps, const TokenSeq& cond) {
    require(eps.shape() == z0.shape(), ErrCat::shape,
            "noise shape " + shape_str(eps.shape()) + " does not match clip shape " +
                shape_str(z0.shape()));
    Tensor<S> zt = q_sample(z0, t, eps, sched);
    Tensor<S> pred = unet_forward(p, cfg, zt, t, cond);
    return mse(eps, pred);
}

template <class S>
Tensor<S> eps_loss(const Model<S>& m, const LatentClip<S>& clip, int t, const Tensor<S>& eps,
                   const TokenSeq& cond) {
    unet_detail::check_clip_input(m.config, clip.latent, -1);
    RunProvider<S> rp(m.params);
    return eps_loss(rp, m.config, m.sched, clip.latent, t, eps, cond);
}

// Draws a clip from noise with the DDIM ladder. Deterministic given the
// seed when eta = 0; eta > 0 consumes extra noise from the same stream.
template <class S>
LatentClip<S> ddim_sample(const Model<S>& m, const TokenSeq& cond, int steps, double eta,
                          uint64_t seed, const Shape& shape) {
    require(shape.size() == 5, ErrCat::shape,
            "sample shape must be [B,F,H,W,C], got " + shape_str(shape));
    require(shape[1] == int64_t(m.config.frames) && shape[2] == int64_t(m.config.size) &&
                shape[3] == int64_t(m.config.size) && shape[4] == int64_t(m.config.in_channels),
            ErrCat::shape,
            "sample shape " + shape_str(shape) + " does not match the model configuration");
    require(shape[0] >= 1, ErrCat::shape, "sample batch must be >= 1");
    check_tokens(cond, m.config);
    RunProvider<S> rp(m.params);
    auto eps_fn = [&](const Tensor<S>& zt, int t) {
        return unet_forward(rp, m.config, zt, t, cond);
    };
    LatentClip<S> out;
    out.latent = ddim_generate<S>(m.sched, shape, steps, eta, seed, eps_fn);
    out.prompt = cond;
    return out;
}

} // namespace motionlab
