use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use iampc::estimator::{EstimatorConfig, EstimatorState, Transition};
use iampc::model::VertexModel;
use iampc::nalgebra::DVector;
use iampc::simplex::SimplexVec;
use iampc_ffi::*;

struct Ctrl(*mut IampcController);

impl Drop for Ctrl {
    fn drop(&mut self) {
        unsafe { iampc_controller_free(self.0) };
    }
}

fn benchmark() -> Ctrl {
    let mut h = ptr::null_mut();
    let s = unsafe { iampc_controller_from_config(ptr::null(), &mut h) };
    assert_eq!(s, IampcStatus::Ok);
    assert!(!h.is_null());
    Ctrl(h)
}

fn last_error() -> String {
    let p = iampc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn step(c: &Ctrl, x: &[f64], xi: &[f64]) -> (IampcStatus, f64, f64) {
    let mut u = [0.0];
    let mut v = 0.0;
    let s = unsafe {
        iampc_controller_step(
            c.0,
            x.as_ptr(),
            x.len(),
            xi.as_ptr(),
            xi.len(),
            u.as_mut_ptr(),
            1,
            &mut v,
        )
    };
    (s, u[0], v)
}

#[test]
fn dims_and_step() {
    let c = benchmark();
    let (mut n, mut m, mut ell, mut h) = (0, 0, 0, 0);
    assert_eq!(
        unsafe { iampc_controller_dims(c.0, &mut n, &mut m, &mut ell, &mut h) },
        IampcStatus::Ok
    );
    assert_eq!((n, m, ell, h), (2, 1, 5, 8));

    let x = [4.0, -1.5];
    let mut v0 = 0.0;
    assert_eq!(
        unsafe { iampc_controller_value(c.0, x.as_ptr(), 2, &mut v0) },
        IampcStatus::Ok
    );
    let (s, u, v) = step(&c, &x, &[0.2; 5]);
    assert_eq!(s, IampcStatus::Ok);
    assert!(u.abs() <= 10.0 + 1e-9);
    assert!(v > 0.0);
    // The buffer was uniform before and after this step.
    assert!((v - v0).abs() <= 1e-9 * v0);
    assert!(iampc_last_error().is_null());
}

#[test]
fn bad_arguments_report_status_and_message() {
    let c = benchmark();
    let (s, _, _) = step(&c, &[1.0], &[0.2; 5]);
    assert_eq!(s, IampcStatus::DimensionMismatch);
    assert!(last_error().contains('x'));

    let (s, _, _) = step(&c, &[1.0, 0.0], &[0.5, 0.6, 0.0, 0.0, 0.0]);
    assert_eq!(s, IampcStatus::InvalidInput);

    let mut u = [0.0];
    let s = unsafe {
        iampc_controller_step(
            c.0,
            ptr::null(),
            2,
            [0.2; 5].as_ptr(),
            5,
            u.as_mut_ptr(),
            1,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, IampcStatus::NullPointer);
    let s = unsafe {
        iampc_controller_dims(
            ptr::null(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(s, IampcStatus::NullPointer);

    let missing = CString::new("/nonexistent/iampc.toml").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { iampc_controller_from_config(missing.as_ptr(), &mut h) },
        IampcStatus::Io
    );
    assert!(h.is_null());
}

#[test]
fn infeasible_state_leaves_controller_usable() {
    let c = benchmark();
    let (s, _, _) = step(&c, &[15.0, 15.0], &[0.2; 5]);
    assert!(
        matches!(s, IampcStatus::ControllerInfeasible | IampcStatus::InitialStateOutside),
        "{s:?}"
    );
    assert!(!last_error().is_empty());
    let (s, _, _) = step(&c, &[1.0, 0.5], &[0.2; 5]);
    assert_eq!(s, IampcStatus::Ok);
}

#[test]
fn loaded_artifacts_match_built_ones() {
    let built = benchmark();
    let dir = tempfile::tempdir().unwrap();
    let cfg = iampc::sim::ScenarioConfig::default();
    let artifacts = iampc::sim::build_artifacts(&cfg).unwrap();
    let (mp, dp, sp) = (
        dir.path().join("model.json"),
        dir.path().join("design.ia"),
        dir.path().join("suite"),
    );
    iampc::io::write_model(&mp, &artifacts.model).unwrap();
    iampc::io::write_design(&dp, &artifacts.design).unwrap();
    iampc::io::write_suite(&sp, &artifacts.suite).unwrap();
    let cs = |p: &Path| CString::new(p.to_str().unwrap()).unwrap();
    let (mp, dp, sp) = (cs(&mp), cs(&dp), cs(&sp));
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { iampc_controller_load(mp.as_ptr(), dp.as_ptr(), sp.as_ptr(), &mut h) },
        IampcStatus::Ok
    );
    let loaded = Ctrl(h);
    let xi = [0.1, 0.3, 0.2, 0.25, 0.15];
    let mut x = [3.0, -2.0];
    for _ in 0..5 {
        let (s1, u1, v1) = step(&built, &x, &xi);
        let (s2, u2, v2) = step(&loaded, &x, &xi);
        assert_eq!((s1, s2), (IampcStatus::Ok, IampcStatus::Ok));
        assert_eq!(u1.to_bits(), u2.to_bits());
        assert_eq!(v1.to_bits(), v2.to_bits());
        x = [x[0] + 0.2 * x[1] - 0.035 * u1, x[1] - 0.905 * u1];
    }

    let bogus = CString::new(dir.path().join("nope.ia").to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { iampc_controller_load(mp.as_ptr(), bogus.as_ptr(), sp.as_ptr(), &mut h) },
        IampcStatus::Io
    );
}

#[test]
fn estimator_identifies_a_vertex() {
    let c = benchmark();
    let mut e = ptr::null_mut();
    assert_eq!(
        unsafe { iampc_estimator_new(c.0, 3, 1.0, 1e-8, &mut e) },
        IampcStatus::Ok
    );
    let mut xi = [0.0; 5];
    assert_eq!(
        unsafe { iampc_estimator_current(e, xi.as_mut_ptr(), 5) },
        IampcStatus::Ok
    );
    assert!(xi.iter().all(|w| (w - 0.2).abs() < 1e-15));

    let model = VertexModel::benchmark();
    let truth = SimplexVec::vertex(5, 3);
    let config = EstimatorConfig {
        window: 3,
        gain: 1.0,
        ridge: 1e-8,
    };
    let mut reference = EstimatorState::new(5, config).unwrap();
    let mut x = DVector::from_vec(vec![2.0, -1.0]);
    for t in 0..6 {
        let u = DVector::from_vec(vec![(t as f64 * 0.7).sin()]);
        let next = model.step(&truth, &x, &u).unwrap();
        let s = unsafe { iampc_estimator_step(e, c.0, x.as_ptr(), u.as_ptr(), next.as_ptr(), xi.as_mut_ptr(), 5) };
        assert_eq!(s, IampcStatus::Ok);
        let expected = reference
            .step(
                Transition {
                    x_prev: x.clone(),
                    u_prev: u,
                    x_next: next.clone(),
                },
                &model,
            )
            .unwrap();
        assert_eq!(xi.as_slice(), expected.as_slice());
        x = next;
    }
    let a_true = model.a_of(&truth).unwrap();
    let err = |w: &SimplexVec| (model.a_of(w).unwrap() - &a_true).norm();
    assert!(err(&SimplexVec::from_slice(&xi).unwrap()) < 0.1 * err(&SimplexVec::uniform(5)));

    let s = unsafe { iampc_estimator_current(e, xi.as_mut_ptr(), 4) };
    assert_eq!(s, IampcStatus::DimensionMismatch);
    let mut bad = ptr::null_mut();
    assert_eq!(
        unsafe { iampc_estimator_new(c.0, 3, 1.5, 0.0, &mut bad) },
        IampcStatus::InvalidInput
    );
    unsafe { iampc_estimator_free(e) };
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(iampc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/iampc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "iampc_controller_step",
        "iampc_controller_load",
        "iampc_estimator_step",
        "iampc_last_error",
        "IAMPC_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"iampc.h\"\nint main(void) {\n  IampcController *c = 0;\n  IampcStatus s = iampc_controller_from_config(0, &c);\n  iampc_controller_free(c);\n  return s == IAMPC_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
