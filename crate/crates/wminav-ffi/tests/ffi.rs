//! Exercises the C ABI surface from Rust.

use std::ffi::{CStr, CString};
use std::ptr;

use wminav_ffi::*;

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("wminav_ffi_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn version_is_non_empty() {
    let v = unsafe { CStr::from_ptr(wminav_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn trajectory_load_len_point_free() {
    let dir = temp_dir("traj");
    let path = dir.join("t.csv");
    std::fs::write(&path, "t,x,y\n0,0,0\n0.2,0.1,0\n0.4,0.2,0\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut WminavTrajectory = ptr::null_mut();
    let st = unsafe { wminav_trajectory_load_csv(c_path.as_ptr(), &mut handle) };
    assert_eq!(st, WminavStatus::Ok);
    assert_eq!(unsafe { wminav_trajectory_len(handle) }, 3);
    let (mut t, mut x, mut y) = (0.0, 0.0, 0.0);
    let st = unsafe { wminav_trajectory_point(handle, 1, &mut t, &mut x, &mut y) };
    assert_eq!(st, WminavStatus::Ok);
    assert_eq!((t, x, y), (0.2, 0.1, 0.0));
    let st = unsafe { wminav_trajectory_point(handle, 9, &mut t, &mut x, &mut y) };
    assert_eq!(st, WminavStatus::InvalidArgument);
    unsafe { wminav_trajectory_free(handle) };
    unsafe { wminav_trajectory_free(ptr::null_mut()) };
}

#[test]
fn missing_file_sets_error_message() {
    let c_path = CString::new("/nonexistent/definitely_missing.csv").unwrap();
    let mut handle: *mut WminavTrajectory = ptr::null_mut();
    let st = unsafe { wminav_trajectory_load_csv(c_path.as_ptr(), &mut handle) };
    assert_eq!(st, WminavStatus::DataError);
    let msg = unsafe { CStr::from_ptr(wminav_last_error()) };
    assert!(msg.to_str().unwrap().contains("definitely_missing"));
}

#[test]
fn simulate_mechanize_prmse_round_trip() {
    let dir = temp_dir("session");
    let c_dir = CString::new(dir.to_str().unwrap()).unwrap();
    let st = unsafe {
        wminav_simulate_session(c_dir.as_ptr(), 0.5, 0.0, 0.2, 10.0, 7, 0)
    };
    assert_eq!(st, WminavStatus::Ok);

    let wheel = CString::new("front").unwrap();
    let mut est: *mut WminavTrajectory = ptr::null_mut();
    let mut truth: *mut WminavTrajectory = ptr::null_mut();
    let st = unsafe {
        wminav_mechanize_session(c_dir.as_ptr(), wheel.as_ptr(), 1, &mut est, &mut truth)
    };
    assert_eq!(st, WminavStatus::Ok);
    assert!(unsafe { wminav_trajectory_len(est) } > 100);

    let mut err = f64::NAN;
    let st = unsafe { wminav_prmse(truth, est, &mut err) };
    assert_eq!(st, WminavStatus::Ok);
    assert!(err < 0.05, "prmse {err}");

    let mut t = f64::NAN;
    assert_eq!(unsafe { wminav_tde(err, 5.0, &mut t) }, WminavStatus::Ok);
    assert!((t - 100.0 * err / 5.0).abs() < 1e-12);
    assert_eq!(
        unsafe { wminav_tde(1.0, 0.0, &mut t) },
        WminavStatus::InvalidArgument
    );

    unsafe {
        wminav_trajectory_free(est);
        wminav_trajectory_free(truth);
    }
}

#[test]
fn model_load_and_infer() {
    // Tiny architecture keeps this test quick.
    let cfg = wminav::wminet::ModelConfig {
        window: 24,
        intervals: 1,
        head_channels: 2,
        head1_kernel: (3, 3),
        head2_kernel: (1, 3),
        trunk_channels: 2,
        trunk_kernel: (1, 3),
        fc1: 8,
        fc2: 4,
        seed: 3,
    };
    let model = wminav::wminet::build_model(&cfg).unwrap();
    let dir = temp_dir("model");
    let path = dir.join("m.ckpt");
    wminav::wminet::save_model(&path, &model).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut WminavModel = ptr::null_mut();
    assert_eq!(
        unsafe { wminav_model_load(c_path.as_ptr(), &mut handle) },
        WminavStatus::Ok
    );
    assert_eq!(unsafe { wminav_model_window(handle) }, 24);
    assert_eq!(unsafe { wminav_model_intervals(handle) }, 1);

    let acc = vec![0.3f64; 72];
    let gyro = vec![-0.2f64; 72];
    let mut out = vec![f64::NAN; 2];
    assert_eq!(
        unsafe { wminav_model_infer(handle, acc.as_ptr(), gyro.as_ptr(), out.as_mut_ptr()) },
        WminavStatus::Ok
    );
    assert!(out.iter().all(|v| v.is_finite()));

    // Matches the library-level forward path.
    let acc_t = wminav::tensornet::Tensor::new(vec![3, 24], acc).unwrap();
    let gyro_t = wminav::tensornet::Tensor::new(vec![3, 24], gyro).unwrap();
    let pred = wminav::wminet::forward(&model, &acc_t, &gyro_t).unwrap();
    assert_eq!(out, vec![pred.deltas[0][0], pred.deltas[0][1]]);

    unsafe { wminav_model_free(handle) };
}
