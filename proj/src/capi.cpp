#include <cstring>
#include <string>

#include "motionlab.h"

#include "motionlab/commands.hpp"
#include "motionlab/io.hpp"
#include "motionlab/metrics.hpp"

using namespace motionlab;

struct mc_model {
    Model<float> m;
};
struct mc_clip {
    LatentClip<float> c;
};

namespace {

thread_local int g_code = MC_OK;
thread_local std::string g_message;

// ErrCat values map to codes 1..16 in declaration order; the C enum must
// track the enum in errors.hpp
int code_of(ErrCat cat) { return int(cat) + 1; }

static_assert(int(ErrCat::config) + 1 == MC_ERR_CONFIG);
static_assert(int(ErrCat::io) + 1 == MC_ERR_IO);
static_assert(int(ErrCat::partial) + 1 == MC_ERR_PARTIAL);
static_assert(int(ErrCat::internal) + 1 == MC_ERR_INTERNAL);

template <class F>
int guarded(F&& fn) {
    g_code = MC_OK;
    g_message.clear();
    try {
        fn();
        return MC_OK;
    } catch (const Error& e) {
        g_code = code_of(e.category());
        g_message = e.what();
    } catch (const std::exception& e) {
        g_code = MC_ERR_INTERNAL;
        g_message = e.what();
    } catch (...) {
        g_code = MC_ERR_INTERNAL;
        g_message = "unknown failure";
    }
    return g_code;
}

void need(const void* p, const char* what) {
    require(p != nullptr, ErrCat::contract, std::string(what) + " must not be NULL");
}

} // namespace

extern "C" {

int mc_last_error_code(void) { return g_code; }

const char* mc_last_error_message(void) { return g_message.c_str(); }

const char* mc_error_category_name(int code) {
    if (code == MC_OK) return "ok";
    if (code < MC_ERR_CONFIG || code > MC_ERR_INTERNAL) return "unknown";
    return errcat_name(ErrCat(code - 1));
}

int mc_cmd(const char* name, const char* const* keys, const char* const* values, size_t n) {
    return guarded([&] {
        need(name, "name");
        require(n == 0 || (keys && values), ErrCat::contract,
                "keys and values must not be NULL");
        std::map<std::string, std::string> kv;
        for (size_t i = 0; i < n; ++i) {
            need(keys[i], "key");
            need(values[i], "value");
            require(kv.emplace(keys[i], values[i]).second, ErrCat::config,
                    std::string("duplicate key '") + keys[i] + "'");
        }
        run_command(name, kv);
    });
}

int mc_model_load(const char* path, mc_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new mc_model{load_checkpoint(path)};
    });
}

int mc_model_save(const mc_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        save_checkpoint(model->m, path);
    });
}

void mc_model_free(mc_model* model) { delete model; }

int mc_model_info(const mc_model* model, int32_t* frames, int32_t* size,
                  int32_t* in_channels, int32_t* timesteps) {
    return guarded([&] {
        need(model, "model");
        if (frames) *frames = model->m.config.frames;
        if (size) *size = model->m.config.size;
        if (in_channels) *in_channels = model->m.config.in_channels;
        if (timesteps) *timesteps = model->m.config.timesteps;
    });
}

int mc_model_digest(const mc_model* model, uint64_t* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = params_digest(model->m.params);
    });
}

int mc_clip_load(const char* path, mc_clip** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new mc_clip{load_clip(path)};
    });
}

int mc_clip_save(const mc_clip* clip, const char* path) {
    return guarded([&] {
        need(clip, "clip");
        need(path, "path");
        save_clip(clip->c, path);
    });
}

void mc_clip_free(mc_clip* clip) { delete clip; }

int mc_clip_shape(const mc_clip* clip, int64_t dims[5]) {
    return guarded([&] {
        need(clip, "clip");
        need(dims, "dims");
        const Shape& s = clip->c.latent.shape();
        require(s.size() == 5, ErrCat::shape, "clip tensor must have 5 dimensions");
        for (int i = 0; i < 5; ++i) dims[i] = s[size_t(i)];
    });
}

int mc_clip_data(const mc_clip* clip, const float** data, int64_t* numel) {
    return guarded([&] {
        need(clip, "clip");
        need(data, "data");
        need(numel, "numel");
        *data = clip->c.latent.data();
        *numel = clip->c.latent.numel();
    });
}

int mc_clip_prompt(const mc_clip* clip, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        need(clip, "clip");
        need(needed, "needed");
        const std::string text = detokenize(clip->c.prompt);
        *needed = text.size();
        if (!buf) return;
        require(cap > 0, ErrCat::contract, "cap must be positive when buf is set");
        const size_t n = std::min(cap - 1, text.size());
        std::memcpy(buf, text.data(), n);
        buf[n] = '\0';
    });
}

int mc_clip_temporal_consistency(const mc_clip* clip, double* out) {
    return guarded([&] {
        need(clip, "clip");
        need(out, "out");
        *out = temporal_consistency(clip->c);
    });
}

int mc_clip_export(const mc_clip* clip, const char* path, int format) {
    return guarded([&] {
        need(clip, "clip");
        need(path, "path");
        require(format == MC_EXPORT_PNG || format == MC_EXPORT_GIF, ErrCat::config,
                "format must be MC_EXPORT_PNG or MC_EXPORT_GIF");
        export_clip(clip->c, path,
                    format == MC_EXPORT_PNG ? ExportFormat::png_grid : ExportFormat::gif);
    });
}

int mc_generate(const mc_model* model, const char* prompt, int32_t steps, double eta,
                uint64_t seed, mc_clip** out) {
    return guarded([&] {
        need(model, "model");
        need(prompt, "prompt");
        need(out, "out");
        const Model<float>& m = model->m;
        const Shape shape = {1, int64_t(m.config.frames), int64_t(m.config.size),
                             int64_t(m.config.size), int64_t(m.config.in_channels)};
        *out = new mc_clip{ddim_sample(m, tokenize(prompt), steps, eta, seed, shape)};
    });
}

} // extern "C"
