#pragma once

// One-shot motion customization: parallel spatial/temporal fine-tuning
// on a single reference clip, with a frozen copy of the base model
// acting as an appearance prior. A KL penalty between the two branches'
// denoised means squeezes appearance information out of the trainable
// temporal layers, leaving motion behind.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "motionlab/unet.hpp"

namespace motionlab {

// ---- reference material ---------------------------------------------------

template <class S>
struct ReferenceClip {
    LatentClip<S> clip;   // the one-shot reference; clip.prompt describes it
    TokenSeq motion_desc; // contiguous part of the prompt naming the motion
};

inline bool contains_contiguous(const std::vector<int32_t>& hay,
                                const std::vector<int32_t>& needle) {
    if (needle.empty()) return true;
    if (needle.size() > hay.size()) return false;
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

template <class S>
void check_reference(const ReferenceClip<S>& ref, const UNetConfig& cfg) {
    unet_detail::check_clip_input(cfg, ref.clip.latent, cfg.frames);
    check_tokens(ref.clip.prompt, cfg);
    check_tokens(ref.motion_desc, cfg);
    require(contains_contiguous(ref.clip.prompt.ids, ref.motion_desc.ids), ErrCat::input,
            "motion description is not a contiguous part of the reference prompt");
}

// A prompt with one hole. Instantiation splices the motion description
// between prefix and suffix.
struct PromptTemplate {
    TokenSeq prefix;
    TokenSeq suffix;
};

struct TrainConfig {
    int steps = 400;
    double lr = 1e-4;
    double beta = 5.0;
    std::vector<PromptTemplate> templates;
    uint64_t seed = 0;
    int log_every = 10;
    int spatial_steps = 0; // appearance phase, runs before the motion phase

    // steps = 0 is the documented no-op path, so only negatives are out.
    void validate() const {
        require(steps >= 0, ErrCat::config, "training steps must be >= 0");
        require(spatial_steps >= 0, ErrCat::config, "spatial steps must be >= 0");
        require(beta >= 0, ErrCat::config, "beta must be >= 0");
        require(lr > 0, ErrCat::config, "learning rate must be positive");
        require(log_every >= 1, ErrCat::config, "log cadence must be >= 1");
    }
};

// One log line of a training run.
struct LossRecord {
    std::string phase; // "spatial", "motion", or "base"
    int step = 0;
    double temporal = 0;
    double appearance = 0;
    double total = 0;
};

using LossLogger = std::function<void(const LossRecord&)>;

// ---- losses ---------------------------------------------------------------

// Per-frame denoising loss: noise one sampled frame of the reference
// and score the single-frame prediction against the added noise.
template <class S>
Tensor<S> spatial_loss(ParamProvider<S>& p, const UNetConfig& cfg, const NoiseSchedule& sched,
                       const ReferenceClip<S>& ref, int t, const Tensor<S>& eps,
                       int frame_index) {
    const int64_t frames = ref.clip.latent.dim(1);
    require(frame_index >= 0 && int64_t(frame_index) < frames, ErrCat::contract,
            "frame index " + std::to_string(frame_index) + " outside [0, " +
                std::to_string(frames) + ")");
    Tensor<S> frame = slice(ref.clip.latent, 1, frame_index, 1);
    return eps_loss(p, cfg, sched, frame, t, eps, ref.clip.prompt);
}

// Whole-clip denoising loss conditioned on the reference prompt.
template <class S>
Tensor<S> temporal_loss(ParamProvider<S>& p, const UNetConfig& cfg, const NoiseSchedule& sched,
                        const ReferenceClip<S>& ref, int t, const Tensor<S>& eps) {
    return eps_loss(p, cfg, sched, ref.clip.latent, t, eps, ref.clip.prompt);
}

// KL divergence between the branches' denoised-mean Gaussians with
// shared per-timestep variance: mean over elements of
// (mu - mu_hat)^2 / (2 sigma_t^2).
template <class S>
Tensor<S> appearance_kl(const Tensor<S>& mu, const Tensor<S>& mu_hat, double sigma_t) {
    require(sigma_t > 0, ErrCat::contract, "appearance KL needs sigma_t > 0");
    require(mu.shape() == mu_hat.shape(), ErrCat::shape,
            "branch means disagree in shape: " + shape_str(mu.shape()) + " vs " +
                shape_str(mu_hat.shape()));
    return scale(mse(mu, mu_hat), S(1.0 / (2.0 * sigma_t * sigma_t)));
}

// Single training objective: reconstruction plus the weighted
// information bottleneck.
template <class S>
Tensor<S> motion_loss(const Tensor<S>& temporal_l, const Tensor<S>& appearance_l, double beta) {
    require(beta >= 0, ErrCat::contract, "beta must be >= 0");
    return add(temporal_l, scale(appearance_l, S(beta)));
}

// ---- appearance prior prompts ---------------------------------------------

// Fills every template's slot with the motion description. Lengths are
// checked against the model's text window; the offending template is
// named by position.
inline std::vector<TokenSeq> enhance_prompts(const std::vector<PromptTemplate>& templates,
                                             const TokenSeq& motion_desc, int max_len) {
    require(!templates.empty(), ErrCat::contract, "enhance_prompts needs at least one template");
    std::vector<TokenSeq> out;
    out.reserve(templates.size());
    for (size_t i = 0; i < templates.size(); ++i) {
        const PromptTemplate& t = templates[i];
        TokenSeq filled;
        filled.ids.reserve(t.prefix.ids.size() + motion_desc.ids.size() + t.suffix.ids.size());
        filled.ids.insert(filled.ids.end(), t.prefix.ids.begin(), t.prefix.ids.end());
        filled.ids.insert(filled.ids.end(), motion_desc.ids.begin(), motion_desc.ids.end());
        filled.ids.insert(filled.ids.end(), t.suffix.ids.begin(), t.suffix.ids.end());
        require(int64_t(filled.ids.size()) <= int64_t(max_len), ErrCat::prompt_template,
                "template " + std::to_string(i) + " instantiates to " +
                    std::to_string(filled.ids.size()) + " tokens, limit " +
                    std::to_string(max_len));
        out.push_back(std::move(filled));
    }
    return out;
}

// ---- dual-branch training -------------------------------------------------

template <class S>
ModelParams<S> clone_params(const ModelParams<S>& params) {
    ModelParams<S> out;
    for (const auto& [name, t] : params) out.emplace(name, t.clone());
    return out;
}

template <class S>
struct DualBranchState {
    ModelParams<S> frozen;    // base snapshot, never touched by the optimizer
    ModelParams<S> trainable; // starts as a copy of the snapshot
    ParamPartition partition;
    double beta = 5.0;
    AdamState<S> opt;
    uint64_t frozen_digest = 0;
};

template <class S>
DualBranchState<S> make_dual_branch(const ModelParams<S>& base, const ParamPartition& partition,
                                    double beta) {
    DualBranchState<S> st;
    st.frozen = clone_params(base);
    st.trainable = clone_params(base);
    st.partition = partition;
    st.beta = beta;
    st.frozen_digest = params_digest(st.frozen);
    return st;
}

// One optimization step of the motion phase. Draws a timestep and clip
// noise for the reconstruction term; with beta > 0 additionally draws a
// template prompt and a shared pure-noise latent, runs both branches on
// it, and penalizes the distance between their denoised means. The
// optimizer only ever sees temporal-tagged gradients.
//
// With beta = 0 the appearance pass is skipped entirely, so the step
// consumes exactly the random draws of plain temporal fine-tuning and
// matches it bit for bit.
template <class S>
LossRecord dual_branch_step(DualBranchState<S>& state, const UNetConfig& ucfg,
                            const NoiseSchedule& sched, const ReferenceClip<S>& ref,
                            const TrainConfig& cfg, Rng& rng) {
    const int t = int(rng.uniform_int(sched.steps));
    Tensor<S> eps = randn<S>(ref.clip.latent.shape(), rng);

    Tape<S> tape;
    RunProvider<S> rp(state.trainable, &tape, &state.partition.temporal);
    Tensor<S> temporal_l = temporal_loss(rp, ucfg, sched, ref, t, eps);

    LossRecord rec;
    rec.phase = "motion";
    rec.temporal = double(temporal_l.item());

    Tensor<S> total;
    if (cfg.beta > 0) {
        const auto prompts = enhance_prompts(cfg.templates, ref.motion_desc, ucfg.text_len);
        const TokenSeq& prompt = prompts[size_t(rng.uniform_int(int64_t(prompts.size())))];
        Tensor<S> anchor = randn<S>(ref.clip.latent.shape(), rng);

        Tensor<S> eps_train = unet_forward(rp, ucfg, anchor, t, prompt);
        RunProvider<S> frozen_rp(state.frozen);
        Tensor<S> eps_frozen = unet_forward(frozen_rp, ucfg, anchor, t, prompt);

        Tensor<S> mu = predicted_x0(anchor, t, eps_train, sched);
        Tensor<S> mu_hat = predicted_x0(anchor, t, eps_frozen, sched);
        Tensor<S> appearance_l = appearance_kl(mu, mu_hat, x0_noise_scale(sched, t));
        rec.appearance = double(appearance_l.item());
        total = motion_loss(temporal_l, appearance_l, cfg.beta);
    } else {
        total = temporal_l;
    }
    rec.total = double(total.item());

    tape.backward(total);
    AdamConfig oc;
    oc.lr = cfg.lr;
    adam_step(state.trainable, rp.grads(), state.opt, oc);

    require(params_digest(state.frozen) == state.frozen_digest, ErrCat::integrity,
            "frozen branch changed during a dual-branch step");
    return rec;
}

// ---- customization driver -------------------------------------------------

namespace customize_detail {

// Loss explosion guard shared by both phases: non-finite losses and
// sustained blowup beyond 10x the initial value both count.
struct DivergenceGuard {
    double initial = -1;
    int run = 0;

    void observe(const std::string& phase, int step, double loss) {
        if (initial < 0) initial = loss;
        const bool bad = !std::isfinite(loss) || loss > 10.0 * initial;
        run = bad ? run + 1 : 0;
        if (run >= 100)
            fail(ErrCat::training,
                 phase + " fine-tuning diverged: loss " + std::to_string(loss) + " at step " +
                     std::to_string(step) + " exceeded 10x the initial loss " +
                     std::to_string(initial) + " for 100 consecutive steps");
    }
};

} // namespace customize_detail

// Fine-tunes a copy of the base parameters on one reference clip:
// an optional appearance phase on spatial-tagged parameters, then the
// dual-branch motion phase on temporal-tagged parameters. Everything
// outside the tuned groups returns bit-equal to the base.
template <class S>
ModelParams<S> customize(const Model<S>& base, const ReferenceClip<S>& ref,
                         const TrainConfig& cfg, const LossLogger& log = nullptr) {
    cfg.validate();
    check_reference(ref, base.config);
    if (cfg.beta > 0 && cfg.steps > 0)
        require(!cfg.templates.empty(), ErrCat::config,
                "dual-branch training with beta > 0 needs appearance templates");

    Rng rng(cfg.seed);
    DualBranchState<S> state = make_dual_branch(base.params, base.partition, cfg.beta);

    if (cfg.spatial_steps > 0) {
        customize_detail::DivergenceGuard guard;
        AdamState<S> opt;
        AdamConfig oc;
        oc.lr = cfg.lr;
        const int64_t frames = ref.clip.latent.dim(1);
        for (int step = 0; step < cfg.spatial_steps; ++step) {
            const int t = int(rng.uniform_int(base.sched.steps));
            const int frame = int(rng.uniform_int(frames));
            Tensor<S> eps = randn<S>(slice(ref.clip.latent, 1, frame, 1).shape(), rng);

            Tape<S> tape;
            RunProvider<S> rp(state.trainable, &tape, &state.partition.spatial);
            Tensor<S> loss = spatial_loss(rp, base.config, base.sched, ref, t, eps, frame);
            tape.backward(loss);
            adam_step(state.trainable, rp.grads(), opt, oc);

            const double lv = double(loss.item());
            guard.observe("spatial", step, lv);
            if (log && (step % cfg.log_every == 0 || step + 1 == cfg.spatial_steps))
                log(LossRecord{"spatial", step, 0.0, 0.0, lv});
        }
    }

    customize_detail::DivergenceGuard guard;
    for (int step = 0; step < cfg.steps; ++step) {
        LossRecord rec = dual_branch_step(state, base.config, base.sched, ref, cfg, rng);
        rec.step = step;
        guard.observe("motion", step, rec.total);
        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) log(rec);
    }

    return std::move(state.trainable);
}

} // namespace motionlab
