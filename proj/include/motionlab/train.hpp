#pragma once

// Base model training: plain denoising on a clip corpus with every
// parameter trainable. Customization starts from the result.

#include <vector>

#include "motionlab/customize.hpp"
#include "motionlab/unet.hpp"

namespace motionlab {

struct BaseTrainConfig {
    int steps = 3000;
    double lr = 2e-4;
    int batch = 2;
    uint64_t seed = 0;
    int log_every = 50;

    void validate() const {
        require(steps >= 0, ErrCat::config, "training steps must be >= 0");
        require(lr > 0, ErrCat::config, "learning rate must be positive");
        require(batch >= 1, ErrCat::config, "batch size must be >= 1");
        require(log_every >= 1, ErrCat::config, "log cadence must be >= 1");
    }
};

// Runs denoising training in place on the model's parameters. Each step
// draws `batch` clips with replacement, a timestep and noise per clip,
// and averages the per-clip losses; prompts differ per clip so each
// clip makes its own pass through the network on a shared tape.
template <class S>
void train_base(Model<S>& m, const std::vector<LatentClip<S>>& data, const BaseTrainConfig& cfg,
                const LossLogger& log = nullptr) {
    cfg.validate();
    require(!data.empty(), ErrCat::data, "base training needs a nonempty corpus");
    for (const auto& clip : data)
        unet_detail::check_clip_input(m.config, clip.latent, m.config.frames);

    Rng rng(cfg.seed);
    AdamState<S> opt;
    AdamConfig oc;
    oc.lr = cfg.lr;

    for (int step = 0; step < cfg.steps; ++step) {
        Tape<S> tape;
        RunProvider<S> rp(m.params, &tape);
        Tensor<S> total;
        for (int b = 0; b < cfg.batch; ++b) {
            const size_t idx = size_t(rng.uniform_int(int64_t(data.size())));
            const int t = int(rng.uniform_int(m.sched.steps));
            Tensor<S> eps = randn<S>(data[idx].latent.shape(), rng);
            Tensor<S> l =
                eps_loss(rp, m.config, m.sched, data[idx].latent, t, eps, data[idx].prompt);
            total = b == 0 ? l : add(total, l);
        }
        if (cfg.batch > 1) total = scale(total, S(1.0 / double(cfg.batch)));

        tape.backward(total);
        adam_step(m.params, rp.grads(), opt, oc);

        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            log(LossRecord{"base", step, double(total.item()), 0.0, double(total.item())});
    }
}

} // namespace motionlab
