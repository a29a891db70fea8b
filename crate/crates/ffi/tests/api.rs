use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use flowcl::model::{build_encoder, EncoderCheckpoint, EncoderConfig, COMPACT};
use flowcl::numgrad::Tensor;
use flowcl::synthetic::{generate, SyntheticSpec};
use flowcl_ffi::*;

fn last_error() -> String {
    let p = flowcl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn parameter_counts() {
    let mut n = 0u64;
    let name = CString::new("smaller-pack").unwrap();
    assert_eq!(
        unsafe { flowcl_preset_parameter_count(name.as_ptr(), &mut n) },
        FlowclStatus::Ok
    );
    assert_eq!(n, 482_528);
    let bad = CString::new("huge").unwrap();
    assert_eq!(
        unsafe { flowcl_preset_parameter_count(bad.as_ptr(), &mut n) },
        FlowclStatus::InvalidArgument
    );
    assert!(last_error().contains("huge"));
    assert_eq!(
        unsafe { flowcl_preset_parameter_count(ptr::null(), &mut n) },
        FlowclStatus::NullPointer
    );
}

#[test]
fn loss_matches_the_library() {
    let z = [0.3, -1.0, 0.2, 0.5, 0.9, 0.1, -0.4, 0.7];
    let mut got = f64::NAN;
    assert_eq!(
        unsafe { flowcl_batch_loss(z.as_ptr(), 4, 2, 0.5, &mut got) },
        FlowclStatus::Ok
    );
    let want = flowcl::sscl::batch_loss(&Tensor::new(vec![4, 2], z.to_vec()).unwrap(), 0.5).unwrap();
    assert_eq!(got, want);
    assert_eq!(
        unsafe { flowcl_batch_loss(z.as_ptr(), 3, 2, 0.5, &mut got) },
        FlowclStatus::Shape
    );
    let zeros = [0.0; 4];
    assert_eq!(
        unsafe { flowcl_batch_loss(zeros.as_ptr(), 2, 2, 0.5, &mut got) },
        FlowclStatus::Numeric
    );
}

#[test]
fn metrics_and_empty_input() {
    let preds = [0usize, 1, 1];
    let labels = [0usize, 1, 0];
    let mut m = FlowclMetrics::default();
    assert_eq!(
        unsafe { flowcl_metrics(preds.as_ptr(), labels.as_ptr(), 3, 2, &mut m) },
        FlowclStatus::Ok
    );
    assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.precision - 5.0 / 6.0).abs() < 1e-12);
    assert_eq!(m.recall, m.accuracy);
    assert_eq!(
        unsafe { flowcl_metrics(ptr::null(), ptr::null(), 0, 2, &mut m) },
        FlowclStatus::InsufficientData
    );
}

#[test]
fn mask_view_is_keyed_and_exact() {
    let x = [1.0; 8];
    let mut a = [0.0; 8];
    let mut b = [0.0; 8];
    unsafe {
        assert_eq!(
            flowcl_mask_view(x.as_ptr(), 8, 0.25, 9, 4, a.as_mut_ptr()),
            FlowclStatus::Ok
        );
        assert_eq!(
            flowcl_mask_view(x.as_ptr(), 8, 0.25, 9, 4, b.as_mut_ptr()),
            FlowclStatus::Ok
        );
        assert_eq!(
            flowcl_mask_view(x.as_ptr(), 8, 1.5, 9, 4, b.as_mut_ptr()),
            FlowclStatus::InvalidArgument
        );
    }
    assert_eq!(a.iter().filter(|&&v| v == 0.0).count(), 2);
    assert_eq!(a, b);
}

#[test]
fn encoder_handle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.ckpt");
    let (encoder, projector) = build_encoder(EncoderConfig::preset(COMPACT, 16).unwrap(), 3).unwrap();
    let rows: Vec<Vec<f64>> = generate(&SyntheticSpec {
        samples: 4,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .rows;
    let x = Tensor::from_rows(&rows).unwrap();
    let h_ref = encoder.encode(&x).unwrap();
    let z_ref = projector.project(&h_ref).unwrap();
    EncoderCheckpoint {
        encoder,
        projector,
        extra: Default::default(),
    }
    .save(&path)
    .unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut FlowclEncoder = ptr::null_mut();
    unsafe {
        assert_eq!(flowcl_encoder_load(c_path.as_ptr(), &mut handle), FlowclStatus::Ok);
        let (mut w, mut hd, mut cd) = (0, 0, 0);
        assert_eq!(flowcl_encoder_dims(handle, &mut w, &mut hd, &mut cd), FlowclStatus::Ok);
        assert_eq!((w, hd), (16, h_ref.shape()[1]));

        let mut h = vec![0.0; 4 * hd];
        assert_eq!(
            flowcl_encoder_encode(handle, x.data().as_ptr(), 4, 16, h.as_mut_ptr(), h.len()),
            FlowclStatus::Ok
        );
        assert_eq!(h, h_ref.data());
        let mut z = vec![0.0; 4 * cd];
        assert_eq!(
            flowcl_encoder_project(handle, h.as_ptr(), 4, z.as_mut_ptr(), z.len()),
            FlowclStatus::Ok
        );
        assert_eq!(z, z_ref.data());

        let mut small = vec![0.0; 3];
        assert_eq!(
            flowcl_encoder_encode(handle, x.data().as_ptr(), 4, 16, small.as_mut_ptr(), small.len()),
            FlowclStatus::BufferTooSmall
        );
        assert_eq!(
            flowcl_encoder_encode(handle, x.data().as_ptr(), 2, 32, h.as_mut_ptr(), h.len()),
            FlowclStatus::Shape
        );
        flowcl_encoder_free(handle);
    }
}

#[test]
fn preprocessor_handle() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SyntheticSpec {
        samples: 10,
        features: 4,
        ..SyntheticSpec::default()
    })
    .unwrap();
    data.write(dir.path(), "toy").unwrap();
    let (csv_path, schema_path) = (dir.path().join("toy.csv"), dir.path().join("toy.schema.toml"));
    let schema = flowcl::dataio::DatasetSchema::load(&schema_path).unwrap();
    let records = flowcl::dataio::load_csv(&csv_path, &schema).unwrap();
    let state = flowcl::dataio::fit_preprocessor(&records, &schema).unwrap();
    let state_path = dir.path().join("pre.json");
    state.save(&state_path).unwrap();

    let s = CString::new(schema_path.to_str().unwrap()).unwrap();
    let p = CString::new(state_path.to_str().unwrap()).unwrap();
    let mut handle: *mut FlowclPreprocessor = ptr::null_mut();
    unsafe {
        assert_eq!(
            flowcl_preprocessor_load(s.as_ptr(), p.as_ptr(), &mut handle),
            FlowclStatus::Ok
        );
        let mut width = 0;
        assert_eq!(flowcl_preprocessor_width(handle, &mut width), FlowclStatus::Ok);
        assert_eq!(width, 4);
        let text = CString::new(std::fs::read_to_string(&csv_path).unwrap()).unwrap();
        let mut out = vec![0.0; 10 * width];
        let mut rows = 0;
        assert_eq!(
            flowcl_preprocessor_transform_csv(handle, text.as_ptr(), out.as_mut_ptr(), out.len(), &mut rows),
            FlowclStatus::Ok
        );
        assert_eq!(rows, 10);
        let (want, _) = state.transform_all(&records);
        let flat: Vec<f64> = want.iter().flat_map(|s| s.features.clone()).collect();
        assert_eq!(out, flat);
        flowcl_preprocessor_free(handle);

        let other = CString::new("builtin:unsw-nb15-smaller").unwrap();
        assert_eq!(
            flowcl_preprocessor_load(other.as_ptr(), p.as_ptr(), &mut handle),
            FlowclStatus::Schema
        );
    }
}

/// Compile a C program against the generated header and the static library.
#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.parent().unwrap().join("libflowcl_ffi.a");
    let lib = if lib.exists() {
        lib
    } else {
        deps.join("libflowcl_ffi.a")
    };
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c_smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
