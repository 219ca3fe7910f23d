#ifndef NETCHAIN_H
#define NETCHAIN_H

/* Generated by cbindgen from crates/netchain-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status and error codes returned by every fallible call.
 */
typedef enum NcStatus {
  NcStatus_Ok = 0,
  NcStatus_NullArgument = 1,
  NcStatus_InvalidArgument = 2,
  NcStatus_Io = 3,
  NcStatus_Codec = 4,
  NcStatus_Ledger = 5,
  NcStatus_Search = 6,
  NcStatus_Panic = 7,
  /**
   * Verification rejected: a membership proof failed.
   */
  NcStatus_VerifyProofFailure = 10,
  /**
   * Verification rejected: proof leaf key differs from the query key.
   */
  NcStatus_VerifyKeyMismatch = 11,
  /**
   * Verification rejected: hash chain recomputation mismatch.
   */
  NcStatus_VerifyChainBreak = 12,
  /**
   * Verification rejected: a chain prefix was cut short.
   */
  NcStatus_VerifyTruncation = 13,
  /**
   * Verification rejected: boundary anchoring or walk structure violated.
   */
  NcStatus_VerifyBoundaryViolation = 14,
  /**
   * Verification rejected: missing proof coverage inside the window.
   */
  NcStatus_VerifyCoverageGap = 15,
  /**
   * Verification rejected: MPT proof missing or failing.
   */
  NcStatus_VerifyMptFailure = 16,
} NcStatus;

/**
 * Opaque ledger handle.
 */
typedef struct NcStore NcStore;

/**
 * One graph edge passed into `nc_store_append`.
 */
typedef struct NcObject {
  const uint8_t *u;
  size_t u_len;
  const uint8_t *v;
  size_t v_len;
  const uint8_t *edge_type;
  size_t edge_type_len;
  int64_t w;
} NcObject;

/**
 * An owned byte buffer handed across the ABI. Release with `nc_buffer_free`.
 */
typedef struct NcBuffer {
  uint8_t *data;
  size_t len;
} NcBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the underlying crate; a static, do not free.
 */
const char *nc_version(void);

/**
 * Message for the most recent error on this thread; valid until the next
 * failing call from the same thread. Do not free.
 */
const char *nc_last_error(void);

/**
 * Creates a fresh ledger file. `mode` is 0 for netchain, 1 for
 * netchain-plus. On success writes a handle to `out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum NcStatus nc_store_create(const char *path, uint8_t mode, struct NcStore **out);

/**
 * Opens and re-verifies an existing ledger file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum NcStatus nc_store_open(const char *path, struct NcStore **out);

/**
 * Releases a store handle. A null handle is a no-op.
 *
 * # Safety
 * `store` must be a handle from `nc_store_create`/`nc_store_open`, used at
 * most once here.
 */
void nc_store_close(struct NcStore *store);

/**
 * Protocol of the store: 0 netchain, 1 netchain-plus, 255 on null handle.
 *
 * # Safety
 * `store` must be a live handle or null.
 */
uint8_t nc_store_mode(const struct NcStore *store);

/**
 * Number of sealed blocks, or -1 on null handle.
 *
 * # Safety
 * `store` must be a live handle or null.
 */
int64_t nc_store_len(const struct NcStore *store);

/**
 * Appends one block built from `count` objects. Writes the new block id to
 * `out_block_id` when non-null.
 *
 * # Safety
 * `objects` must point to `count` valid `NcObject` records whose byte
 * pointers are live for the duration of the call.
 */
enum NcStatus nc_store_append(struct NcStore *store,
                              const struct NcObject *objects,
                              size_t count,
                              int64_t *out_block_id);

/**
 * Runs a top-k query (protocol chosen by the store's mode) and returns the
 * serialized response in `out`.
 *
 * # Safety
 * Byte pointers must cover their stated lengths; `out` must be valid.
 */
enum NcStatus nc_store_query(const struct NcStore *store,
                             const uint8_t *u,
                             size_t u_len,
                             const uint8_t *edge_type,
                             size_t edge_type_len,
                             uint32_t k,
                             int64_t lb,
                             int64_t ub,
                             struct NcBuffer *out);

/**
 * Returns the raw header concatenation (112 or 144 bytes per block).
 *
 * # Safety
 * `store` and `out` must be valid pointers.
 */
enum NcStatus nc_store_export_headers(const struct NcStore *store, struct NcBuffer *out);

/**
 * Verifies a serialized response against a raw header export. Returns `Ok`
 * and fills `out_result` with the verified entries on acceptance, or the
 * specific `Verify*` status on rejection.
 *
 * # Safety
 * Byte pointers must cover their stated lengths; `out_result` may be null if
 * the entries are not wanted.
 */
enum NcStatus nc_verify(const uint8_t *headers,
                        size_t headers_len,
                        const uint8_t *response,
                        size_t response_len,
                        struct NcBuffer *out_result);

/**
 * Releases a buffer returned by this library. Zeroed buffers are a no-op.
 *
 * # Safety
 * `buf` must come from this library and be freed at most once.
 */
void nc_buffer_free(struct NcBuffer buf);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NETCHAIN_H */
