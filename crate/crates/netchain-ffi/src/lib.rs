//! C ABI for the netchain engine.
//!
//! The surface is handle-based: a ledger is an opaque `NcStore*`, byte
//! payloads travel as `NcBuffer` (owned by this library, released with
//! `nc_buffer_free`), and every fallible call returns an `NcStatus`. On any
//! non-`Ok` status, `nc_last_error` returns a human-readable message for the
//! calling thread.
//!
//! Serialized formats crossing this boundary are the same files the CLI
//! reads and writes: ledger files, raw header exports, and response blobs.
//! A verified result buffer is `u32be count`, then per entry `u32be v_len`,
//! `v`, `i64be w`, `i64be block_id`.

use netchain::client::{self, VerifyErrorKind};
use netchain::codec::ByteWriter;
use netchain::ledger::HeaderChain;
use netchain::sp::{self, Query, Response};
use netchain::{Mode, Object, Store};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

/// Status and error codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Codec = 4,
    Ledger = 5,
    Search = 6,
    Panic = 7,
    /// Verification rejected: a membership proof failed.
    VerifyProofFailure = 10,
    /// Verification rejected: proof leaf key differs from the query key.
    VerifyKeyMismatch = 11,
    /// Verification rejected: hash chain recomputation mismatch.
    VerifyChainBreak = 12,
    /// Verification rejected: a chain prefix was cut short.
    VerifyTruncation = 13,
    /// Verification rejected: boundary anchoring or walk structure violated.
    VerifyBoundaryViolation = 14,
    /// Verification rejected: missing proof coverage inside the window.
    VerifyCoverageGap = 15,
    /// Verification rejected: MPT proof missing or failing.
    VerifyMptFailure = 16,
}

/// An owned byte buffer handed across the ABI. Release with `nc_buffer_free`.
#[repr(C)]
pub struct NcBuffer {
    pub data: *mut u8,
    pub len: usize,
}

impl NcBuffer {
    fn empty() -> Self {
        NcBuffer {
            data: ptr::null_mut(),
            len: 0,
        }
    }

    fn from_vec(v: Vec<u8>) -> Self {
        let mut boxed = v.into_boxed_slice();
        let buf = NcBuffer {
            data: boxed.as_mut_ptr(),
            len: boxed.len(),
        };
        std::mem::forget(boxed);
        buf
    }
}

/// One graph edge passed into `nc_store_append`.
#[repr(C)]
pub struct NcObject {
    pub u: *const u8,
    pub u_len: usize,
    pub v: *const u8,
    pub v_len: usize,
    pub edge_type: *const u8,
    pub edge_type_len: usize,
    pub w: i64,
}

/// Opaque ledger handle.
pub struct NcStore {
    inner: Store,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl AsRef<str>) {
    let sanitized = msg.as_ref().replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn verify_kind_status(kind: VerifyErrorKind) -> NcStatus {
    match kind {
        VerifyErrorKind::ProofFailure => NcStatus::VerifyProofFailure,
        VerifyErrorKind::KeyMismatch => NcStatus::VerifyKeyMismatch,
        VerifyErrorKind::ChainBreak => NcStatus::VerifyChainBreak,
        VerifyErrorKind::Truncation => NcStatus::VerifyTruncation,
        VerifyErrorKind::BoundaryViolation => NcStatus::VerifyBoundaryViolation,
        VerifyErrorKind::CoverageGap => NcStatus::VerifyCoverageGap,
        VerifyErrorKind::MptFailure => NcStatus::VerifyMptFailure,
    }
}

fn guarded(f: impl FnOnce() -> NcStatus) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            NcStatus::Panic
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, NcStatus> {
    if ptr.is_null() {
        set_error("path is null");
        return Err(NcStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(NcStatus::InvalidArgument)
        }
    }
}

unsafe fn bytes_from<'a>(ptr: *const u8, len: usize) -> Result<&'a [u8], NcStatus> {
    if ptr.is_null() && len > 0 {
        set_error("byte pointer is null");
        return Err(NcStatus::NullArgument);
    }
    if len == 0 {
        return Ok(&[]);
    }
    Ok(slice::from_raw_parts(ptr, len))
}

fn mode_from(byte: u8) -> Result<Mode, NcStatus> {
    Mode::from_byte(byte).map_err(|e| {
        set_error(e.to_string());
        NcStatus::InvalidArgument
    })
}

/// Version string of the underlying crate; a static, do not free.
#[no_mangle]
pub extern "C" fn nc_version() -> *const c_char {
    concat!("netchain ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread; valid until the next
/// failing call from the same thread. Do not free.
#[no_mangle]
pub extern "C" fn nc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a fresh ledger file. `mode` is 0 for netchain, 1 for
/// netchain-plus. On success writes a handle to `out`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_store_create(
    path: *const c_char,
    mode: u8,
    out: *mut *mut NcStore,
) -> NcStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return NcStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let mode = match mode_from(mode) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match Store::create(&path, mode) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(NcStore { inner: store }));
                NcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                NcStatus::Io
            }
        }
    })
}

/// Opens and re-verifies an existing ledger file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_store_open(path: *const c_char, out: *mut *mut NcStore) -> NcStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return NcStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Store::open(&path) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(NcStore { inner: store }));
                NcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                NcStatus::Ledger
            }
        }
    })
}

/// Releases a store handle. A null handle is a no-op.
///
/// # Safety
/// `store` must be a handle from `nc_store_create`/`nc_store_open`, used at
/// most once here.
#[no_mangle]
pub unsafe extern "C" fn nc_store_close(store: *mut NcStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Protocol of the store: 0 netchain, 1 netchain-plus, 255 on null handle.
///
/// # Safety
/// `store` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nc_store_mode(store: *const NcStore) -> u8 {
    if store.is_null() {
        return u8::MAX;
    }
    (*store).inner.mode().as_byte()
}

/// Number of sealed blocks, or -1 on null handle.
///
/// # Safety
/// `store` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nc_store_len(store: *const NcStore) -> i64 {
    if store.is_null() {
        return -1;
    }
    (*store).inner.len() as i64
}

/// Appends one block built from `count` objects. Writes the new block id to
/// `out_block_id` when non-null.
///
/// # Safety
/// `objects` must point to `count` valid `NcObject` records whose byte
/// pointers are live for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn nc_store_append(
    store: *mut NcStore,
    objects: *const NcObject,
    count: usize,
    out_block_id: *mut i64,
) -> NcStatus {
    guarded(|| {
        if store.is_null() {
            set_error("store is null");
            return NcStatus::NullArgument;
        }
        if objects.is_null() || count == 0 {
            set_error("a block needs at least one object");
            return NcStatus::InvalidArgument;
        }
        let raw = slice::from_raw_parts(objects, count);
        let mut parsed = Vec::with_capacity(count);
        for (i, o) in raw.iter().enumerate() {
            let u = match bytes_from(o.u, o.u_len) {
                Ok(b) => b,
                Err(s) => return s,
            };
            let v = match bytes_from(o.v, o.v_len) {
                Ok(b) => b,
                Err(s) => return s,
            };
            let t = match bytes_from(o.edge_type, o.edge_type_len) {
                Ok(b) => b,
                Err(s) => return s,
            };
            match Object::new(u, v, t, o.w) {
                Ok(obj) => parsed.push(obj),
                Err(e) => {
                    set_error(format!("object {i}: {e}"));
                    return NcStatus::InvalidArgument;
                }
            }
        }
        match (*store).inner.append(parsed) {
            Ok(id) => {
                if !out_block_id.is_null() {
                    *out_block_id = id;
                }
                NcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                NcStatus::Ledger
            }
        }
    })
}

/// Runs a top-k query (protocol chosen by the store's mode) and returns the
/// serialized response in `out`.
///
/// # Safety
/// Byte pointers must cover their stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_store_query(
    store: *const NcStore,
    u: *const u8,
    u_len: usize,
    edge_type: *const u8,
    edge_type_len: usize,
    k: u32,
    lb: i64,
    ub: i64,
    out: *mut NcBuffer,
) -> NcStatus {
    guarded(|| {
        if store.is_null() || out.is_null() {
            set_error("store or out is null");
            return NcStatus::NullArgument;
        }
        *out = NcBuffer::empty();
        let u = match bytes_from(u, u_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let t = match bytes_from(edge_type, edge_type_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let query = match Query::new(u, t, k as usize, lb, ub) {
            Ok(q) => q,
            Err(e) => {
                set_error(e.to_string());
                return NcStatus::InvalidArgument;
            }
        };
        match sp::search(&(*store).inner, &query) {
            Ok(resp) => {
                *out = NcBuffer::from_vec(resp.to_bytes());
                NcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                NcStatus::Search
            }
        }
    })
}

/// Returns the raw header concatenation (112 or 144 bytes per block).
///
/// # Safety
/// `store` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nc_store_export_headers(
    store: *const NcStore,
    out: *mut NcBuffer,
) -> NcStatus {
    guarded(|| {
        if store.is_null() || out.is_null() {
            set_error("store or out is null");
            return NcStatus::NullArgument;
        }
        *out = NcBuffer::from_vec((*store).inner.headers().to_bytes());
        NcStatus::Ok
    })
}

/// Verifies a serialized response against a raw header export. Returns `Ok`
/// and fills `out_result` with the verified entries on acceptance, or the
/// specific `Verify*` status on rejection.
///
/// # Safety
/// Byte pointers must cover their stated lengths; `out_result` may be null if
/// the entries are not wanted.
#[no_mangle]
pub unsafe extern "C" fn nc_verify(
    headers: *const u8,
    headers_len: usize,
    response: *const u8,
    response_len: usize,
    out_result: *mut NcBuffer,
) -> NcStatus {
    guarded(|| {
        if !out_result.is_null() {
            *out_result = NcBuffer::empty();
        }
        let header_bytes = match bytes_from(headers, headers_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let response_bytes = match bytes_from(response, response_len) {
            Ok(b) => b,
            Err(s) => return s,
        };
        let resp = match Response::from_bytes(response_bytes) {
            Ok(r) => r,
            Err(e) => {
                set_error(format!("response: {e}"));
                return NcStatus::Codec;
            }
        };
        let chain = match HeaderChain::from_bytes(header_bytes, resp.mode) {
            Ok(h) => h,
            Err(e) => {
                set_error(format!("headers: {e}"));
                return NcStatus::Codec;
            }
        };
        if let Err(e) = chain.verify_links() {
            set_error(format!("headers: {e}"));
            return NcStatus::Codec;
        }
        let query = resp.query.clone();
        match client::verify(&chain, &query, &resp) {
            Ok(result) => {
                if !out_result.is_null() {
                    let mut wtr = ByteWriter::new();
                    wtr.put_u32(result.entries.len() as u32);
                    for (value, block) in &result.entries {
                        wtr.put_bytes(&value.v);
                        wtr.put_i64(value.w);
                        wtr.put_i64(*block);
                    }
                    *out_result = NcBuffer::from_vec(wtr.into_vec());
                }
                NcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                verify_kind_status(e.kind)
            }
        }
    })
}

/// Releases a buffer returned by this library. Zeroed buffers are a no-op.
///
/// # Safety
/// `buf` must come from this library and be freed at most once.
#[no_mangle]
pub unsafe extern "C" fn nc_buffer_free(buf: NcBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(
            buf.data, buf.len,
        )));
    }
}
