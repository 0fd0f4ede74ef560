#ifndef NHMM_H
#define NHMM_H

#include <stddef.h>
#include <stdint.h>

#define NHMM_OK 0

// A required pointer argument was NULL.
#define NHMM_ERR_NULL 1

#define NHMM_ERR_IO 2

// Malformed checkpoint or feature file.
#define NHMM_ERR_FORMAT 3

// Bad data: unknown symbol, too few frames for the symbols, non-finite values.
#define NHMM_ERR_INPUT 4

// Invalid option values.
#define NHMM_ERR_CONFIG 5

#define NHMM_ERR_NUMERICAL 6

#define NHMM_ERR_PANIC 7

// Argument shapes or sizes are inconsistent.
#define NHMM_ERR_CONTRACT 8

#define NHMM_ACOUSTIC_MEAN 0

#define NHMM_ACOUSTIC_SAMPLED 1

#define NHMM_DURATION_QUANTILE 0

#define NHMM_DURATION_SAMPLED 1

// A loaded checkpoint.
typedef struct NhmmModel NhmmModel;

// Output of `nhmm_synthesize`.
typedef struct NhmmSynthResult NhmmSynthResult;

// Synthesis settings; fill with `nhmm_synth_options_default` first.
typedef struct NhmmSynthOptions {
  // `NHMM_ACOUSTIC_MEAN` or `NHMM_ACOUSTIC_SAMPLED`.
  int acoustic_mode;
  // `NHMM_DURATION_QUANTILE` or `NHMM_DURATION_SAMPLED`.
  int duration_mode;
  // Quantile threshold in (0, 1).
  double quantile;
  // Frame cap; 0 selects 30 frames per state.
  size_t max_frames;
  uint64_t seed;
  // Non-zero keeps pre-net dropout on.
  int dropout;
} NhmmSynthOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL if none.
const char *nhmm_last_error(void);

// Library version as a static NUL-terminated string.
const char *nhmm_version(void);

// Loads a checkpoint file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
int nhmm_model_load(const char *path, struct NhmmModel **out);

// # Safety
// `model` must be NULL or a handle from `nhmm_model_load` not yet freed.
void nhmm_model_free(struct NhmmModel *model);

// Feature dimension, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t nhmm_model_acoustic_dim(const struct NhmmModel *model);

// HMM states per input symbol, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t nhmm_model_states_per_symbol(const struct NhmmModel *model);

// Vocabulary size, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t nhmm_model_vocab_size(const struct NhmmModel *model);

// Looks up the ID of `symbol`.
//
// # Safety
// `model` must be a live handle, `symbol` NUL-terminated, `out_id` writable.
int nhmm_model_symbol_id(const struct NhmmModel *model, const char *symbol, size_t *out_id);

// Deterministic defaults: mean frames, quantile durations, the model's default
// threshold, dropout on, seed 0.
//
// # Safety
// `model` must be a live handle and `out` writable.
int nhmm_synth_options_default(const struct NhmmModel *model, struct NhmmSynthOptions *out);

// Generates frames for `symbols` (IDs). `options` may be NULL for defaults.
// On success `*out` owns a new result handle.
//
// # Safety
// `model` must be a live handle, `symbols` must hold `len` IDs, `out` writable.
int nhmm_synthesize(const struct NhmmModel *model,
                    const size_t *symbols,
                    size_t len,
                    const struct NhmmSynthOptions *options,
                    struct NhmmSynthResult **out);

// # Safety
// `result` must be NULL or a handle from `nhmm_synthesize` not yet freed.
void nhmm_synth_result_free(struct NhmmSynthResult *result);

// Number of generated frames, or 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
size_t nhmm_synth_result_frames(const struct NhmmSynthResult *result);

// Frame dimension, or 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
size_t nhmm_synth_result_dim(const struct NhmmSynthResult *result);

// Row-major `frames × dim` features, valid while the handle lives.
//
// # Safety
// `result` must be NULL or a live handle.
const double *nhmm_synth_result_data(const struct NhmmSynthResult *result);

// 0-based state index of every frame (`frames` entries).
//
// # Safety
// `result` must be NULL or a live handle.
const size_t *nhmm_synth_result_alignment(const struct NhmmSynthResult *result);

// Frames spent in each state; `*states` receives the state count.
//
// # Safety
// `result` must be NULL or a live handle; `states` may be NULL.
const size_t *nhmm_synth_result_durations(const struct NhmmSynthResult *result, size_t *states);

// 1 if every state was visited and left, 0 if the frame cap stopped generation.
//
// # Safety
// `result` must be NULL or a live handle.
int nhmm_synth_result_completed(const struct NhmmSynthResult *result);

// Exact log likelihood of raw (unnormalized) `frames × dim` features given
// symbol IDs, with pre-net dropout off. Returns the density of the normalized
// features, as used in training.
//
// # Safety
// `symbols` must hold `len` IDs, `features` `frames·dim` values, `out` writable.
int nhmm_loglik(const struct NhmmModel *model,
                const size_t *symbols,
                size_t len,
                const double *features,
                size_t frames,
                size_t dim,
                double *out);

// Forward algorithm over a caller-supplied `frames × states` lattice
// (row-major by frame): emission log densities and log transition pairs.
//
// # Safety
// Each array must hold `frames·states` values; `out` must be writable.
int nhmm_forward_loglik(size_t frames,
                        size_t states,
                        const double *emission,
                        const double *log_tau,
                        const double *log_stay,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NHMM_H */
