use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use flowdeblur_ffi::*;

fn last_error() -> String {
    let p = fd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

/// Bright square on a dark ramp.
fn scene(w: usize, h: usize) -> Vec<f32> {
    let mut d = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let inside = (w / 4..3 * w / 4).contains(&x) && (h / 4..3 * h / 4).contains(&y);
            d[y * w + x] = if inside { 0.9 } else { 0.1 + 0.2 * x as f32 / w as f32 };
        }
    }
    d
}

#[test]
fn image_handles_round_trip() {
    unsafe {
        let data: Vec<f32> = (0..3 * 3 * 4).map(|i| i as f32 / 36.0).collect();
        let mut img = ptr::null_mut();
        assert_eq!(fd_image_from_data(4, 3, 3, data.as_ptr(), &mut img), FdStatus::Ok);
        assert_eq!((fd_image_width(img), fd_image_height(img), fd_image_channels(img)), (4, 3, 3));
        assert_eq!(std::slice::from_raw_parts(fd_image_data(img), 36), &data[..]);
        assert!(fd_last_error().is_null());

        let dir = tempfile::tempdir().unwrap();
        let file = cpath(&dir.path().join("x.png"));
        assert_eq!(fd_image_write_png(img, file.as_ptr(), 16), FdStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(fd_image_read_png(file.as_ptr(), &mut back), FdStatus::Ok);
        let mut db = 0.0;
        assert_eq!(fd_psnr(back, img, &mut db), FdStatus::Ok);
        assert!(db > 90.0, "{db}");
        assert_eq!(fd_image_write_png(img, file.as_ptr(), 12), FdStatus::Parameter);
        assert!(last_error().contains("12"));
        fd_image_free(back);
        fd_image_free(img);
        fd_image_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(fd_image_from_data(4, 4, 1, ptr::null(), &mut img), FdStatus::NullPointer);
        assert_eq!(fd_image_new(0, 4, 1, &mut img), FdStatus::Parameter);
        assert_eq!(fd_image_new(4, 4, 2, &mut img), FdStatus::Parameter);
        assert!(last_error().contains("channels"));
        assert!(img.is_null());
        assert_eq!(fd_image_new(4, 4, 1, ptr::null_mut()), FdStatus::NullPointer);

        let missing = CString::new("/nonexistent/a.png").unwrap();
        assert_eq!(fd_image_read_png(missing.as_ptr(), &mut img), FdStatus::Io);
        assert_eq!(fd_flow_read(missing.as_ptr(), &mut ptr::null_mut()), FdStatus::Io);

        let mut a = ptr::null_mut();
        let mut flow = ptr::null_mut();
        assert_eq!(fd_image_new(8, 8, 1, &mut a), FdStatus::Ok);
        assert_eq!(fd_flow_new(7, 8, ptr::null(), ptr::null(), &mut flow), FdStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(fd_forward_blur(a, flow, FdBoundary::Replicate, &mut out), FdStatus::Shape);
        assert!(out.is_null());
        let mut v = 0.0;
        assert_eq!(fd_psnr(a, ptr::null(), &mut v), FdStatus::NullPointer);

        let betas = [0.5, 0.1];
        let opts = FdDeblurOptions {
            betas: betas.as_ptr(),
            n_betas: 2,
            ..fd_deblur_options_default()
        };
        let mut f8 = ptr::null_mut();
        assert_eq!(fd_flow_new(8, 8, ptr::null(), ptr::null(), &mut f8), FdStatus::Ok);
        assert_eq!(fd_hqs_deblur(a, f8, &opts, &mut out), FdStatus::Parameter);
        assert!(!last_error().is_empty());
        fd_flow_free(f8);
        fd_flow_free(flow);
        fd_image_free(a);
    }
}

#[test]
fn blur_adjoint_and_deblur() {
    unsafe {
        let (w, h) = (40, 40);
        let sharp_data = scene(w, h);
        let mut sharp = ptr::null_mut();
        assert_eq!(fd_image_from_data(w, h, 1, sharp_data.as_ptr(), &mut sharp), FdStatus::Ok);
        let u = vec![5.0f32; w * h];
        let v = vec![-2.0f32; w * h];
        let mut flow = ptr::null_mut();
        assert_eq!(fd_flow_new(w, h, u.as_ptr(), v.as_ptr(), &mut flow), FdStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let fpath = cpath(&dir.path().join("f.mflo"));
        assert_eq!(fd_flow_write(flow, fpath.as_ptr()), FdStatus::Ok);
        let mut flow2 = ptr::null_mut();
        assert_eq!(fd_flow_read(fpath.as_ptr(), &mut flow2), FdStatus::Ok);
        assert_eq!((fd_flow_width(flow2), fd_flow_height(flow2)), (w, h));

        let mut blurred = ptr::null_mut();
        assert_eq!(fd_forward_blur(sharp, flow2, FdBoundary::Replicate, &mut blurred), FdStatus::Ok);

        // <Kx, y> = <x, Kᵀy>
        let mut adj = ptr::null_mut();
        assert_eq!(fd_adjoint_blur(sharp, flow2, FdBoundary::Zero, &mut adj), FdStatus::Ok);
        let mut kx = ptr::null_mut();
        assert_eq!(fd_forward_blur(sharp, flow2, FdBoundary::Zero, &mut kx), FdStatus::Ok);
        let n = w * h;
        let s = std::slice::from_raw_parts(fd_image_data(sharp), n);
        let dot = |p: *const f32| std::slice::from_raw_parts(p, n).iter().zip(s).map(|(a, b)| (a * b) as f64).sum::<f64>();
        let (lhs, rhs) = (dot(fd_image_data(kx)), dot(fd_image_data(adj)));
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs(), "{lhs} vs {rhs}");

        let mut before = 0.0;
        assert_eq!(fd_psnr(blurred, sharp, &mut before), FdStatus::Ok);
        let mut restored = ptr::null_mut();
        assert_eq!(fd_hqs_deblur(blurred, flow2, ptr::null(), &mut restored), FdStatus::Ok);
        let mut after = 0.0;
        assert_eq!(fd_psnr(restored, sharp, &mut after), FdStatus::Ok);
        assert!(after > before, "{after} <= {before}");
        let mut s1 = 0.0;
        assert_eq!(fd_ssim(restored, restored, &mut s1), FdStatus::Ok);
        assert!((s1 - 1.0).abs() < 1e-12);

        // identity prior with a zero flow hands the input back
        let mut zero = ptr::null_mut();
        assert_eq!(fd_flow_new(w, h, ptr::null(), ptr::null(), &mut zero), FdStatus::Ok);
        let opts = FdDeblurOptions {
            prior: FdPrior::Identity,
            global_iterations: 2,
            ..fd_deblur_options_default()
        };
        let mut same = ptr::null_mut();
        assert_eq!(fd_hqs_deblur(sharp, zero, &opts, &mut same), FdStatus::Ok);
        let got = std::slice::from_raw_parts(fd_image_data(same), n);
        assert!(got.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-5));

        for p in [sharp, blurred, adj, kx, restored, same] {
            fd_image_free(p);
        }
        for f in [flow, flow2, zero] {
            fd_flow_free(f);
        }
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(fd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("h.c");
    std::fs::write(&src, "#include \"flowdeblur.h\"\nint main(void) { FdDeblurOptions o = fd_deblur_options_default(); return (int)o.prior - FD_PRIOR_TV; }\n").unwrap();
    let ok = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header())
        .arg(&src)
        .status()
        .unwrap();
    assert!(ok.success());
    let ok = Command::new("c++")
        .args(["-x", "c++", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header())
        .arg(&src)
        .status()
        .unwrap();
    assert!(ok.success());
}

/// `target/<profile>`, where cargo puts the staticlib.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("libflowdeblur_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <math.h>
#include "flowdeblur.h"

int main(void) {
    float px[64];
    for (int i = 0; i < 64; i++) px[i] = (float)(i % 8) / 8.0f;
    FdImage *img = NULL, *blurred = NULL, *out = NULL;
    FdFlow *flow = NULL;
    if (fd_image_from_data(8, 8, 1, px, &img) != FD_STATUS_OK) return 1;
    if (fd_flow_new(8, 8, NULL, NULL, &flow) != FD_STATUS_OK) return 2;
    if (fd_forward_blur(img, flow, FD_BOUNDARY_REPLICATE, &blurred) != FD_STATUS_OK) return 3;
    FdDeblurOptions o = fd_deblur_options_default();
    o.prior = FD_PRIOR_IDENTITY;
    if (fd_hqs_deblur(blurred, flow, &o, &out) != FD_STATUS_OK) return 4;
    double db = 0;
    if (fd_psnr(out, img, &db) != FD_STATUS_OK) return 5;
    if (fd_image_new(0, 1, 1, &out) != FD_STATUS_PARAMETER) return 6;
    printf("%s %d %s\n", fd_version(), db > 80.0, fd_last_error());
    fd_image_free(img); fd_image_free(blurred); fd_flow_free(flow);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg("-I")
        .arg(header())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with(&format!("{} 1 ", env!("CARGO_PKG_VERSION"))), "{line}");
    assert!(line.contains("empty"), "{line}");
}
