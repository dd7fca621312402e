use std::ffi::{CStr, CString};
use std::ptr;

use eigensr_ffi::*;

fn cube(l: usize, h: usize, w: usize) -> *mut EsrCube {
    let data: Vec<f64> = (0..l * h * w)
        .map(|i| {
            let (b, p) = (i / (h * w), i % (h * w));
            1.0 + (b as f64 * 0.3).sin() * (p as f64 * 0.05).cos() + 0.01 * b as f64
        })
        .collect();
    let mut out = ptr::null_mut();
    let st = unsafe { esr_cube_new(l, h, w, data.as_ptr(), data.len(), &mut out) };
    assert_eq!(st, EsrStatus::Ok);
    out
}

fn values(c: *const EsrCube) -> Vec<f64> {
    let (mut l, mut h, mut w) = (0, 0, 0);
    unsafe {
        assert_eq!(esr_cube_shape(c, &mut l, &mut h, &mut w), EsrStatus::Ok);
        std::slice::from_raw_parts(esr_cube_data(c), l * h * w).to_vec()
    }
}

fn last_error() -> String {
    let p = esr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn cube_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.hsc").to_str().unwrap()).unwrap();
    let c = cube(3, 4, 5);
    unsafe {
        assert_eq!(esr_cube_write(c, path.as_ptr()), EsrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(esr_cube_read(path.as_ptr(), &mut back), EsrStatus::Ok);
        // stored as f32
        let want: Vec<f64> = values(c).iter().map(|&v| v as f32 as f64).collect();
        assert_eq!(values(back), want);
        esr_cube_free(back);
        esr_cube_free(c);
    }
}

#[test]
fn alpha_and_beta_upscale_and_agree_at_one_iteration() {
    let c = cube(6, 12, 12);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(esr_model_bicubic(2, &mut model), EsrStatus::Ok);
        assert_eq!(esr_model_scale(model), 2);

        let mut a = ptr::null_mut();
        assert_eq!(esr_infer_alpha(c, model, 3, &mut a), EsrStatus::Ok);
        let (mut l, mut h, mut w) = (0, 0, 0);
        esr_cube_shape(a, &mut l, &mut h, &mut w);
        assert_eq!((l, h, w), (6, 24, 24));

        let mut b = ptr::null_mut();
        assert_eq!(esr_infer_beta(c, model, 3, 1, 1.0, &mut b), EsrStatus::Ok);
        assert_eq!(values(a), values(b));

        let mut m = EsrMetrics::default();
        assert_eq!(esr_evaluate(a, b, 0.0, &mut m), EsrStatus::Ok);
        assert!(m.psnr.is_infinite() && m.psnr > 0.0);
        assert_eq!(m.psnr_infinite_bands, 6);
        assert_eq!(m.ssim_valid, 1);
        assert_eq!(m.ssim, 1.0);
        assert!(m.sam.abs() < 1e-6);

        esr_cube_free(a);
        esr_cube_free(b);
        esr_model_free(model);
        esr_cube_free(c);
    }
}

#[test]
fn errors_set_status_and_message_without_touching_out() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(esr_model_bicubic(1, &mut model), EsrStatus::InvalidArgument);
        assert!(model.is_null());
        assert!(!last_error().is_empty());

        let data = [1.0; 4];
        let mut c = ptr::null_mut();
        assert_eq!(
            esr_cube_new(2, 2, 2, data.as_ptr(), 4, &mut c),
            EsrStatus::InvalidArgument
        );
        assert!(c.is_null());

        let nan = [f64::NAN; 8];
        assert_eq!(
            esr_cube_new(2, 2, 2, nan.as_ptr(), 8, &mut c),
            EsrStatus::NonFinite
        );

        assert_eq!(
            esr_cube_new(2, 2, 2, ptr::null(), 8, &mut c),
            EsrStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let missing = CString::new("/nonexistent/x.hsc").unwrap();
        assert_eq!(esr_cube_read(missing.as_ptr(), &mut c), EsrStatus::Io);

        let bad = CString::new("/nonexistent/x.esrw").unwrap();
        assert_ne!(esr_model_load(bad.as_ptr(), &mut model), EsrStatus::Ok);
        assert!(model.is_null());
    }
}

#[test]
fn rank_and_shape_errors_map_to_codes() {
    let a = cube(4, 12, 12);
    let b = cube(4, 12, 10);
    unsafe {
        let mut model = ptr::null_mut();
        esr_model_bicubic(2, &mut model);
        let mut out = ptr::null_mut();
        assert_eq!(
            esr_infer_alpha(a, model, 9, &mut out),
            EsrStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert_eq!(
            esr_infer_beta(a, model, 2, 1, 1.5, &mut out),
            EsrStatus::InvalidArgument
        );

        let mut m = EsrMetrics::default();
        assert_eq!(
            esr_evaluate(a, b, 0.0, &mut m),
            EsrStatus::DimensionMismatch
        );
        assert_eq!(
            esr_evaluate(a, ptr::null(), 0.0, &mut m),
            EsrStatus::NullPointer
        );

        esr_model_free(model);
        esr_cube_free(a);
        esr_cube_free(b);
    }
}

#[test]
fn null_handles_are_tolerated_where_documented() {
    unsafe {
        esr_cube_free(ptr::null_mut());
        esr_model_free(ptr::null_mut());
        assert!(esr_cube_data(ptr::null()).is_null());
        assert_eq!(esr_model_scale(ptr::null()), 0);
    }
    let v = unsafe { CStr::from_ptr(esr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/eigensr.h")).unwrap();
    for name in [
        "esr_last_error",
        "esr_version",
        "esr_cube_new",
        "esr_cube_read",
        "esr_cube_write",
        "esr_cube_shape",
        "esr_cube_data",
        "esr_cube_free",
        "esr_model_bicubic",
        "esr_model_load",
        "esr_model_scale",
        "esr_model_free",
        "esr_infer_alpha",
        "esr_infer_beta",
        "esr_evaluate",
        "typedef struct EsrCube EsrCube",
        "ESR_STATUS_OK",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
