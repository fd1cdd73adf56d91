#ifndef AMCLAB_H
#define AMCLAB_H

/* Generated from the amclab-capi crate by cbindgen; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call succeeded.
 */
#define AMCLAB_OK 0

/**
 * A required pointer argument was null.
 */
#define AMCLAB_NULL_ARGUMENT 1

/**
 * Configuration rejected (unknown key, invalid value, bad argument).
 */
#define AMCLAB_CONFIG_ERROR 2

/**
 * Data malformed (wrong buffer length, out-of-range index, bad UTF-8).
 */
#define AMCLAB_DATA_ERROR 3

/**
 * Numeric failure (non-finite input, singular channel).
 */
#define AMCLAB_NUMERIC_ERROR 4

/**
 * A panic was caught at the boundary; state may be stale but is not corrupt.
 */
#define AMCLAB_PANIC 5

/**
 * Simulation context: parsed configuration, its scenario catalog, and the
 * scheme table.
 */
typedef struct AmclabLab AmclabLab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a nul-terminated static string.
 */
const char *amclab_version(void);

/**
 * Copies the message behind the most recent nonzero status on this thread
 * into `buf` (nul-terminated, truncated to `cap` bytes) and returns the
 * full message length in bytes. With a null `buf` or zero `cap`, only the
 * length is returned.
 */
size_t amclab_last_error(char *buf, size_t cap);

/**
 * Builds a lab from the same key=value configuration text the command-line
 * tool reads. Pass an empty string for defaults. On success `*out` owns the
 * handle; free it with `amclab_lab_free`.
 *
 * # Safety
 * `config` must be a nul-terminated string and `out` a valid pointer.
 */
int32_t amclab_lab_new(const char *config, struct AmclabLab **out);

/**
 * Releases a lab handle. Null is a no-op.
 *
 * # Safety
 * `lab` must be a pointer returned by `amclab_lab_new`, not yet freed.
 */
void amclab_lab_free(struct AmclabLab *lab);

/**
 * Reports the lab's array geometry and sample window length.
 *
 * # Safety
 * All pointers must be valid; `lab` must be a live handle.
 */
int32_t amclab_lab_geometry(const struct AmclabLab *lab,
                            size_t *out_n_bs,
                            size_t *out_n_ue,
                            size_t *out_window);

/**
 * Number of scenarios in the lab's catalog. Scenario arguments elsewhere
 * index this list.
 *
 * # Safety
 * `lab` must be a live handle and `out` a valid pointer.
 */
int32_t amclab_lab_scenario_count(const struct AmclabLab *lab, size_t *out);

/**
 * Largest feasible scheme index (10..=24) for a post-precoding SINR given
 * in dB, under the lab's link constants; 10 when nothing is feasible.
 *
 * # Safety
 * `lab` must be a live handle and `out_mcs` a valid pointer.
 */
int32_t amclab_lab_oracle_mcs(const struct AmclabLab *lab, double sinr_db, uint8_t *out_mcs);

/**
 * Coded bit error rate of scheme `mcs` at an SINR given in dB, using the
 * lab's code-rate gain model.
 *
 * # Safety
 * `lab` must be a live handle and `out_ber` a valid pointer.
 */
int32_t amclab_lab_coded_ber(const struct AmclabLab *lab,
                             double sinr_db,
                             uint8_t mcs,
                             double *out_ber);

/**
 * Exact uncoded Gray-mapped square-QAM bit error rate at a linear SNR.
 * Orders 4, 16, 64, and 256 are supported.
 *
 * # Safety
 * `out_ber` must be a valid pointer.
 */
int32_t amclab_qam_ber(uint32_t modulation_order, double snr_linear, double *out_ber);

/**
 * First-order temporal correlation coefficient for a user moving at
 * `speed_mps` under carrier `carrier_hz` with frame period `frame_s`.
 *
 * # Safety
 * `out_rho` must be a valid pointer.
 */
int32_t amclab_doppler_rho(double speed_mps, double carrier_hz, double frame_s, double *out_rho);

/**
 * Generates `n_frames` channel frames of catalog scenario `scenario`
 * starting at frame `start`, into `out`: per frame a row-major
 * n_bs x n_ue matrix of interleaved (re, im) pairs, so `out_len` must be
 * exactly n_frames * n_bs * n_ue * 2. Deterministic in (config, scenario,
 * start).
 *
 * # Safety
 * `lab` must be a live handle and `out` must point to `out_len` doubles.
 */
int32_t amclab_lab_channel_frames(const struct AmclabLab *lab,
                                  size_t scenario,
                                  uint32_t start,
                                  uint32_t n_frames,
                                  double *out,
                                  size_t out_len);

/**
 * Generates `n_frames` frames of catalog scenario `scenario` from `start`
 * and writes each user's post-precoding SINR in dB and oracle scheme index:
 * `out_sinr_db[f * n_ue + u]`, `out_mcs[f * n_ue + u]`, with `len` exactly
 * n_frames * n_ue. Fails with a numeric status if any frame in the range is
 * singular.
 *
 * # Safety
 * `lab` must be a live handle; both buffers must hold `len` elements.
 */
int32_t amclab_lab_frame_labels(const struct AmclabLab *lab,
                                size_t scenario,
                                uint32_t start,
                                uint32_t n_frames,
                                double *out_sinr_db,
                                uint8_t *out_mcs,
                                size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMCLAB_H */
