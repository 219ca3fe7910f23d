//! Exercises the C ABI the way a foreign binding would: through raw pointers
//! and serialized buffers only.

use netchain_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

struct Edge {
    u: Vec<u8>,
    v: Vec<u8>,
    t: Vec<u8>,
    w: i64,
}

fn edge(u: &str, v: &str, w: i64) -> Edge {
    Edge {
        u: u.as_bytes().to_vec(),
        v: v.as_bytes().to_vec(),
        t: b"t".to_vec(),
        w,
    }
}

fn raw_objects(edges: &[Edge]) -> Vec<NcObject> {
    edges
        .iter()
        .map(|e| NcObject {
            u: e.u.as_ptr(),
            u_len: e.u.len(),
            v: e.v.as_ptr(),
            v_len: e.v.len(),
            edge_type: e.t.as_ptr(),
            edge_type_len: e.t.len(),
            w: e.w,
        })
        .collect()
}

fn take_buffer(buf: NcBuffer) -> Vec<u8> {
    assert!(!buf.data.is_null());
    let bytes = unsafe { std::slice::from_raw_parts(buf.data, buf.len) }.to_vec();
    unsafe { nc_buffer_free(buf) };
    bytes
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(nc_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn full_pipeline_over_the_c_surface() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("chain.ncl").to_str().unwrap()).unwrap();

    let mut store: *mut NcStore = ptr::null_mut();
    let status = unsafe { nc_store_create(path.as_ptr(), 1, &mut store) };
    assert_eq!(status, NcStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { nc_store_mode(store) }, 1);

    // Five blocks; the query key appears in blocks 1 and 3.
    for i in 0..5i64 {
        let mut edges = vec![edge(&format!("f{i}"), "x", 1)];
        if i == 1 || i == 3 {
            edges.push(edge("q", &format!("v{i}"), 10 + i));
            edges.push(edge("q", "extra", 2));
        }
        let objs = raw_objects(&edges);
        let mut id = -1;
        let status = unsafe { nc_store_append(store, objs.as_ptr(), objs.len(), &mut id) };
        assert_eq!(status, NcStatus::Ok, "{}", last_error());
        assert_eq!(id, i);
    }
    assert_eq!(unsafe { nc_store_len(store) }, 5);

    let mut resp_buf = NcBuffer {
        data: ptr::null_mut(),
        len: 0,
    };
    let status = unsafe {
        nc_store_query(
            store,
            b"q".as_ptr(),
            1,
            b"t".as_ptr(),
            1,
            2,
            0,
            4,
            &mut resp_buf,
        )
    };
    assert_eq!(status, NcStatus::Ok, "{}", last_error());
    let response = take_buffer(resp_buf);

    let mut hdr_buf = NcBuffer {
        data: ptr::null_mut(),
        len: 0,
    };
    let status = unsafe { nc_store_export_headers(store, &mut hdr_buf) };
    assert_eq!(status, NcStatus::Ok);
    let headers = take_buffer(hdr_buf);
    assert_eq!(headers.len(), 5 * 144);

    let mut result_buf = NcBuffer {
        data: ptr::null_mut(),
        len: 0,
    };
    let status = unsafe {
        nc_verify(
            headers.as_ptr(),
            headers.len(),
            response.as_ptr(),
            response.len(),
            &mut result_buf,
        )
    };
    assert_eq!(status, NcStatus::Ok, "{}", last_error());
    let result = take_buffer(result_buf);
    // u32 count followed by (len-prefixed v, w, block) entries.
    let count = u32::from_be_bytes(result[0..4].try_into().unwrap());
    assert_eq!(count, 2);

    // A flipped byte inside the response must be rejected, not accepted.
    let mut forged = response.clone();
    let n = forged.len();
    forged[n / 2] ^= 0x01;
    let status = unsafe {
        nc_verify(
            headers.as_ptr(),
            headers.len(),
            forged.as_ptr(),
            forged.len(),
            ptr::null_mut(),
        )
    };
    assert_ne!(status, NcStatus::Ok);

    unsafe { nc_store_close(store) };

    // Reopen through the ABI and query again.
    let mut reopened: *mut NcStore = ptr::null_mut();
    let status = unsafe { nc_store_open(path.as_ptr(), &mut reopened) };
    assert_eq!(status, NcStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { nc_store_len(reopened) }, 5);
    unsafe { nc_store_close(reopened) };
}

#[test]
fn null_arguments_are_reported_not_fatal() {
    let mut out: *mut NcStore = ptr::null_mut();
    assert_eq!(
        unsafe { nc_store_create(ptr::null(), 0, &mut out) },
        NcStatus::NullArgument
    );
    assert_eq!(
        unsafe { nc_store_append(ptr::null_mut(), ptr::null(), 0, ptr::null_mut()) },
        NcStatus::NullArgument
    );
    assert_eq!(unsafe { nc_store_mode(ptr::null()) }, u8::MAX);
    assert_eq!(unsafe { nc_store_len(ptr::null()) }, -1);
    assert!(!last_error().is_empty());
    unsafe { nc_store_close(ptr::null_mut()) };
    unsafe {
        nc_buffer_free(NcBuffer {
            data: ptr::null_mut(),
            len: 0,
        })
    };
}

#[test]
fn bad_mode_byte_is_invalid_argument() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.ncl").to_str().unwrap()).unwrap();
    let mut out: *mut NcStore = ptr::null_mut();
    assert_eq!(
        unsafe { nc_store_create(path.as_ptr(), 9, &mut out) },
        NcStatus::InvalidArgument
    );
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/netchain.h");
    assert!(
        std::path::Path::new(header).exists(),
        "header not generated"
    );
    let dir = tempfile::tempdir().unwrap();
    let main_c = dir.path().join("smoke.c");
    std::fs::write(
        &main_c,
        format!(
            "#include \"{header}\"\nint main(void) {{\n  NcBuffer b = {{0, 0}};\n  nc_buffer_free(b);\n  return nc_version() != 0 ? 0 : 1;\n}}\n"
        ),
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg(&main_c)
        .status()
        .expect("cc is available");
    assert!(status.success(), "generated header does not compile");
}
