use std::ffi::CStr;
use std::ptr;

use riemfoa_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rf_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut RfMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { rf_matrix_new(rows, cols, data.as_ptr(), &mut m) },
        RfStatus::Ok
    );
    m
}

fn read(m: *const RfMatrix) -> (usize, usize, Vec<f64>) {
    let (mut r, mut c) = (0, 0);
    assert_eq!(unsafe { rf_matrix_shape(m, &mut r, &mut c) }, RfStatus::Ok);
    let mut buf = vec![0.0; r * c];
    assert_eq!(unsafe { rf_matrix_copy(m, buf.as_mut_ptr(), buf.len()) }, RfStatus::Ok);
    (r, c, buf)
}

#[test]
fn matrix_round_trip_is_row_major() {
    let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let m = matrix(2, 3, &data);
    assert_eq!(read(m), (2, 3, data.to_vec()));
    let mut small = [0.0; 5];
    assert_eq!(
        unsafe { rf_matrix_copy(m, small.as_mut_ptr(), 5) },
        RfStatus::ShapeMismatch
    );
    assert!(last_error().contains("buffer"));
    unsafe { rf_matrix_free(m) };
    unsafe { rf_matrix_free(ptr::null_mut()) };
}

#[test]
fn null_and_invalid_inputs_map_to_status_codes() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rf_matrix_new(2, 2, ptr::null(), &mut out) },
        RfStatus::NullPointer
    );
    assert!(out.is_null());
    assert_eq!(
        unsafe { rf_matrix_new(1, 1, [1.0].as_ptr(), ptr::null_mut()) },
        RfStatus::NullPointer
    );
    assert_eq!(
        unsafe { rf_matrix_shape(ptr::null(), &mut 0, &mut 0) },
        RfStatus::NullPointer
    );
    assert_eq!(
        unsafe { rf_truncate_rank(ptr::null(), 1, &mut out) },
        RfStatus::NullPointer
    );

    assert_eq!(
        unsafe { rf_matrix_new(1, 2, [f64::NAN, 1.0].as_ptr(), &mut out) },
        RfStatus::NonFinite
    );
    assert!(out.is_null());
    let m = matrix(1, 2, &[1.0, 1.0]);
    assert_eq!(unsafe { rf_svt(m, -1.0, &mut out) }, RfStatus::InvalidArgument);
    assert_eq!(unsafe { rf_svt(m, f64::NAN, &mut out) }, RfStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    unsafe { rf_matrix_free(m) };

    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { rf_completion_generate(5, 5, 6, 3.0, 0, &mut inst) },
        RfStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { rf_clustering_error(ptr::null(), ptr::null(), 3, &mut 0.0) },
        RfStatus::NullPointer
    );
}

#[test]
fn success_clears_the_error_message() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rf_truncate_rank(ptr::null(), 1, &mut out) },
        RfStatus::NullPointer
    );
    assert!(!last_error().is_empty());
    let m = matrix(1, 1, &[2.0]);
    assert_eq!(read(m).2, vec![2.0]);
    assert_eq!(last_error(), "");
    unsafe { rf_matrix_free(m) };
}

#[test]
fn svd_and_prox_operators() {
    let a = matrix(2, 2, &[3.0, 0.0, 0.0, 1.0]);
    let (mut u, mut s, mut v) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { rf_thin_svd(a, &mut u, &mut s, &mut v) }, RfStatus::Ok);
    let sigma = read(s).2;
    assert!((sigma[0] - 3.0).abs() < 1e-14 && (sigma[1] - 1.0).abs() < 1e-14);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rf_svt(a, 2.0, &mut out) }, RfStatus::Ok);
    let got = read(out).2;
    assert!(got.iter().zip([1.0, 0.0, 0.0, 0.0]).all(|(g, w)| (g - w).abs() < 1e-14));
    unsafe { rf_matrix_free(out) };

    assert_eq!(unsafe { rf_truncate_rank(a, 1, &mut out) }, RfStatus::Ok);
    let got = read(out).2;
    assert!(got.iter().zip([3.0, 0.0, 0.0, 0.0]).all(|(g, w)| (g - w).abs() < 1e-14));
    unsafe { rf_matrix_free(out) };

    let w = matrix(2, 2, &[3.0, 0.3, 4.0, 0.4]);
    assert_eq!(unsafe { rf_shrink_columns(w, 1.0, &mut out) }, RfStatus::Ok);
    let got = read(out).2;
    assert!(got.iter().zip([2.4, 0.0, 3.2, 0.0]).all(|(g, w)| (g - w).abs() < 1e-14));
    for m in [a, u, s, v, out, w] {
        unsafe { rf_matrix_free(m) };
    }
}

#[test]
fn completion_round_trip() {
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { rf_completion_generate(40, 30, 2, 3.0, 1, &mut inst) },
        RfStatus::Ok
    );
    let mut len = 0;
    assert_eq!(unsafe { rf_completion_len(inst, &mut len) }, RfStatus::Ok);
    assert_eq!(len, 408);
    for solver in [RfSolver::Foa, RfSolver::ConjugateGradient] {
        let (mut x, mut iters, mut res) = (ptr::null_mut(), 0, 0.0);
        let st = unsafe { rf_completion_solve(inst, solver, 3000, 1e-6, &mut x, &mut iters, &mut res) };
        assert_eq!(st, RfStatus::Ok, "{}", last_error());
        assert!(res <= 1e-6 && iters > 0);
        assert_eq!(read(x).0, 40);
        unsafe { rf_matrix_free(x) };
    }
    let st = unsafe {
        rf_completion_solve(
            inst,
            RfSolver::Foa,
            5,
            0.0,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, RfStatus::Ok);
    unsafe { rf_completion_free(inst) };
}

#[test]
fn lrr_and_clustering() {
    // two orthogonal lines in R^4, three samples each
    let cols: [[f64; 4]; 6] = [
        [1.0, 1.0, 0.0, 0.0],
        [-2.0, -2.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, -3.0, 3.0],
        [0.0, 0.0, 2.0, -2.0],
    ];
    let data: Vec<f64> = (0..4).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
    let d = matrix(4, 6, &data);
    let (mut x, mut e, mut res) = (ptr::null_mut(), ptr::null_mut(), f64::NAN);
    let st = unsafe { rf_lrr_solve(d, 0.3, 0.01, 1.1, 1, 0, 0, &mut x, &mut e, &mut res) };
    assert_eq!(st, RfStatus::Ok, "{}", last_error());
    assert!(res <= 1e-4);
    let (n, _, xv) = read(x);
    let aff: Vec<f64> = (0..n * n)
        .map(|k| xv[k].abs() + xv[(k % n) * n + k / n].abs())
        .collect();
    let a = matrix(n, n, &aff);
    let mut labels = vec![0usize; n];
    assert_eq!(
        unsafe { rf_spectral_cluster(a, 2, 0, labels.as_mut_ptr()) },
        RfStatus::Ok
    );
    let truth = [0usize, 0, 1, 0, 1, 1];
    let mut err = f64::NAN;
    assert_eq!(
        unsafe { rf_clustering_error(labels.as_ptr(), truth.as_ptr(), 6, &mut err) },
        RfStatus::Ok
    );
    assert_eq!(err, 0.0);
    assert_eq!(
        unsafe { rf_lrr_solve(d, 0.0, 0.01, 1.1, 1, 0, 0, &mut x, ptr::null_mut(), ptr::null_mut()) },
        RfStatus::InvalidArgument
    );
    for m in [d, x, e, a] {
        unsafe { rf_matrix_free(m) };
    }
}

#[test]
fn header_declares_the_exported_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/riemfoa.h")).unwrap();
    for name in [
        "rf_last_error",
        "rf_matrix_new",
        "rf_matrix_free",
        "rf_thin_svd",
        "rf_svt",
        "rf_completion_solve",
        "rf_lrr_solve",
        "rf_spectral_cluster",
        "RF_STATUS_NULL_POINTER",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
