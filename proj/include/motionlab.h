/* C interface to the motion customization laboratory.
 *
 * Every function returns MC_OK or an error code; the failing thread keeps
 * the code and a human readable message until its next API call. Handles
 * are opaque and must be released with the matching _free function.
 */
#ifndef MOTIONLAB_H
#define MOTIONLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    MC_OK = 0,
    MC_ERR_CONFIG = 1,
    MC_ERR_SHAPE = 2,
    MC_ERR_DOMAIN = 3,
    MC_ERR_CONTRACT = 4,
    MC_ERR_INPUT = 5,
    MC_ERR_IO = 6,
    MC_ERR_CORRUPT = 7,
    MC_ERR_VERSION = 8,
    MC_ERR_TRAINING = 9,
    MC_ERR_SAMPLING = 10,
    MC_ERR_RENDER = 11,
    MC_ERR_TEMPLATE = 12,
    MC_ERR_INTEGRITY = 13,
    MC_ERR_DATA = 14,
    MC_ERR_PARTIAL = 15,
    MC_ERR_INTERNAL = 16
};

enum {
    MC_EXPORT_PNG = 0, /* one still image, frames tiled left to right */
    MC_EXPORT_GIF = 1  /* animated, looping */
};

typedef struct mc_model mc_model;
typedef struct mc_clip mc_clip;

/* ---- errors ---------------------------------------------------------- */

/* Code and message of the last failed call on this thread. The message
 * pointer stays valid until the thread's next API call. */
int mc_last_error_code(void);
const char* mc_last_error_message(void);

/* Stable name for an error code, e.g. "config"; "ok" for MC_OK. */
const char* mc_error_category_name(int code);

/* ---- workflows ------------------------------------------------------- */

/* Runs one named workflow: "corpus", "train-base", "customize",
 * "generate", "evaluate", or "export". keys/values are n parallel
 * configuration pairs; pass only the keys the caller set explicitly so
 * config file values and built-in defaults can fill the rest. Every
 * workflow requires an "out" key naming a fresh run directory. */
int mc_cmd(const char* name, const char* const* keys, const char* const* values, size_t n);

/* ---- models ---------------------------------------------------------- */

int mc_model_load(const char* path, mc_model** out);
int mc_model_save(const mc_model* model, const char* path);
void mc_model_free(mc_model* model);

/* Core dimensions; any output pointer may be NULL. */
int mc_model_info(const mc_model* model, int32_t* frames, int32_t* size,
                  int32_t* in_channels, int32_t* timesteps);

/* Order independent digest of all parameter tensors. */
int mc_model_digest(const mc_model* model, uint64_t* out);

/* ---- clips ----------------------------------------------------------- */

int mc_clip_load(const char* path, mc_clip** out);
int mc_clip_save(const mc_clip* clip, const char* path);
void mc_clip_free(mc_clip* clip);

/* dims receives [batch, frames, height, width, channels]. */
int mc_clip_shape(const mc_clip* clip, int64_t dims[5]);

/* Borrowed pointer to the raw values, valid while the clip lives. */
int mc_clip_data(const mc_clip* clip, const float** data, int64_t* numel);

/* Conditioning text. needed receives the full length excluding the
 * terminator; when buf is not NULL, up to cap-1 bytes are copied and
 * terminated. Pass buf = NULL to query the length alone. */
int mc_clip_prompt(const mc_clip* clip, char* buf, size_t cap, size_t* needed);

/* Frame to frame coherence in [0, 1]; higher is smoother. */
int mc_clip_temporal_consistency(const mc_clip* clip, double* out);

int mc_clip_export(const mc_clip* clip, const char* path, int format);

/* ---- sampling -------------------------------------------------------- */

/* Denoises a fresh clip conditioned on a plain text prompt. */
int mc_generate(const mc_model* model, const char* prompt, int32_t steps, double eta,
                uint64_t seed, mc_clip** out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MOTIONLAB_H */
