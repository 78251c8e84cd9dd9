use std::ffi::c_char;
use std::path::Path;
use std::process::Command;
use std::ptr;

use sllg_ffi::*;

fn family(p: u32) -> *mut SllgNodeFamily {
    let mut fam = ptr::null_mut();
    assert_eq!(
        unsafe { sllg_node_family_new(p, 5.0, &mut fam) },
        SllgStatus::Ok
    );
    assert!(!fam.is_null());
    fam
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { sllg_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn node_values_and_buffer_protocol() {
    unsafe {
        let fam = family(2);
        let mut len = 0;
        assert_eq!(
            sllg_nodes(fam, 1, ptr::null_mut(), 0, &mut len),
            SllgStatus::BufferTooSmall
        );
        assert_eq!(len, 3);
        let mut buf = vec![0.0; len];
        assert_eq!(
            sllg_nodes(fam, 1, buf.as_mut_ptr(), buf.len(), &mut len),
            SllgStatus::Ok
        );
        assert!((buf[2] - 1.50820493).abs() < 1e-6);
        assert_eq!(buf[1], 0.0);
        assert!((buf[0] + buf[2]).abs() < 1e-15);
        sllg_node_family_free(fam);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut fam = ptr::null_mut();
        assert_eq!(
            sllg_node_family_new(1, 5.0, &mut fam),
            SllgStatus::InvalidArgument
        );
        assert!(fam.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            sllg_node_family_new(2, 5.0, ptr::null_mut()),
            SllgStatus::NullPointer
        );
        let mut out = 0.0;
        assert_eq!(
            sllg_wiener_eval(ptr::null(), 3, 0.5, &mut out),
            SllgStatus::NullPointer
        );
        assert_eq!(
            sllg_wiener_eval([1.0].as_ptr(), 1, 1.5, &mut out),
            SllgStatus::InvalidArgument
        );
        let mut n = 0;
        assert_eq!(sllg_grid_len(ptr::null(), &mut n), SllgStatus::NullPointer);
        sllg_grid_free(ptr::null_mut());
        sllg_interpolant_free(ptr::null_mut());
        sllg_node_family_free(ptr::null_mut());
    }
}

#[test]
fn wiener_endpoint() {
    unsafe {
        let y = [0.7, 0.1, -0.2, 0.4];
        let mut w = 0.0;
        assert_eq!(
            sllg_wiener_eval(y.as_ptr(), y.len(), 1.0, &mut w),
            SllgStatus::Ok
        );
        assert!((w - 0.7).abs() < 1e-15);
        assert_eq!(
            sllg_wiener_eval(y.as_ptr(), y.len(), 0.0, &mut w),
            SllgStatus::Ok
        );
        assert_eq!(w, 0.0);
    }
}

#[test]
fn grid_interpolant_reproduces_samples() {
    unsafe {
        let fam = family(2);
        let mut grid = ptr::null_mut();
        assert_eq!(
            sllg_grid_new(fam, SllgProfit::Improved, 20, &mut grid),
            SllgStatus::Ok
        );
        let (mut q, mut dims) = (0, 0);
        assert_eq!(sllg_grid_len(grid, &mut q), SllgStatus::Ok);
        assert_eq!(sllg_grid_dims(grid, &mut dims), SllgStatus::Ok);
        assert!(q <= 20 && q > 1 && dims >= 1);
        let f = |y: &[f64]| {
            y.iter()
                .enumerate()
                .map(|(i, v)| (v / (i + 1) as f64).sin())
                .sum::<f64>()
        };
        let mut points = Vec::new();
        for i in 0..q {
            let mut y = vec![0.0; dims];
            let mut len = 0;
            assert_eq!(
                sllg_grid_point(grid, i, y.as_mut_ptr(), y.len(), &mut len),
                SllgStatus::Ok
            );
            assert_eq!(len, dims);
            points.push(y);
        }
        let values: Vec<f64> = points.iter().map(|y| f(y)).collect();
        let mut interp = ptr::null_mut();
        assert_eq!(
            sllg_interpolant_new(grid, values.as_ptr(), values.len() - 1, &mut interp),
            SllgStatus::InvalidArgument
        );
        assert_eq!(
            sllg_interpolant_new(grid, values.as_ptr(), values.len(), &mut interp),
            SllgStatus::Ok
        );
        for (y, v) in points.iter().zip(&values) {
            let mut out = 0.0;
            assert_eq!(
                sllg_interpolant_eval(interp, y.as_ptr(), y.len(), &mut out),
                SllgStatus::Ok
            );
            assert!((out - v).abs() < 1e-12);
        }
        let mut len = 0;
        assert_eq!(
            sllg_grid_point(grid, q, ptr::null_mut(), 0, &mut len),
            SllgStatus::InvalidArgument
        );
        sllg_interpolant_free(interp);
        sllg_grid_free(grid);
        sllg_node_family_free(fam);
    }
}

#[test]
fn sample_path_keeps_unit_length() {
    unsafe {
        let y = [0.3, -1.2, 0.5, 0.8];
        let n = 2;
        let mut buf = vec![0.0; 3 * (n + 1) * (n + 1)];
        let mut len = 0;
        let status = sllg_sample_final_state(
            n,
            4,
            1.0,
            y.as_ptr(),
            y.len(),
            buf.as_mut_ptr(),
            buf.len(),
            &mut len,
        );
        assert_eq!(status, SllgStatus::Ok);
        assert_eq!(len, buf.len());
        for m in buf.chunks(3) {
            assert!(((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt() - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            sllg_sample_final_state(
                0,
                4,
                1.0,
                y.as_ptr(),
                y.len(),
                buf.as_mut_ptr(),
                buf.len(),
                &mut len
            ),
            SllgStatus::InvalidArgument
        );
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sllg.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sllg_node_family_new",
        "sllg_nodes",
        "sllg_grid_new",
        "sllg_interpolant_eval",
        "sllg_sample_final_state",
        "sllg_last_error",
        "SLLG_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    match Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; syntax check skipped"),
    }
}
