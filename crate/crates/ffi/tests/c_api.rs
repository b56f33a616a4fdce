use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use splitnn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sn_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn repo_file(rel: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel);
    CString::new(p.to_str().unwrap()).unwrap()
}

/// Two informative feature pairs; NaN marks missing cells.
fn toy_arrays(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n * 4);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 2) as f64;
        let z = ((i * 37) % 11) as f64 / 11.0 - 0.5;
        x.extend([c + z, c + z * 0.9, c - z, if i % 7 == 0 { f64::NAN } else { -z }]);
        y.push(c);
    }
    (x, y)
}

unsafe fn toy_dataset(n: usize) -> *mut SnDataset {
    let (x, y) = toy_arrays(n);
    let mut ds = ptr::null_mut();
    assert_eq!(
        sn_dataset_from_arrays(x.as_ptr(), y.as_ptr(), n, 4, 2, &mut ds),
        SnStatus::Ok
    );
    ds
}

#[test]
fn dataset_from_arrays_reports_shape_and_missingness() {
    unsafe {
        let ds = toy_dataset(70);
        let (mut rows, mut cols, mut missing) = (0, 0, 0.0);
        assert_eq!(sn_dataset_shape(ds, &mut rows, &mut cols), SnStatus::Ok);
        assert_eq!((rows, cols), (70, 4));
        assert_eq!(sn_dataset_missing_fraction(ds, &mut missing), SnStatus::Ok);
        assert!((missing - 10.0 / 280.0).abs() < 1e-12);
        sn_dataset_free(ds);
    }
}

#[test]
fn load_train_predict_save_load() {
    unsafe {
        let schema = repo_file("data/wisconsin.toml");
        let mut ds = ptr::null_mut();
        assert_eq!(
            sn_dataset_load(schema.as_ptr(), ptr::null(), &mut ds),
            SnStatus::Ok,
            "{}",
            last_error()
        );
        let (mut rows, mut cols) = (0, 0);
        sn_dataset_shape(ds, &mut rows, &mut cols);
        assert_eq!((rows, cols), (699, 9));

        let mut clustering = ptr::null_mut();
        assert_eq!(sn_cluster(ds, 0.5, false, &mut clustering), SnStatus::Ok);
        let mut k = 0;
        sn_clustering_k(clustering, &mut k);
        let mut assignment = vec![usize::MAX; cols];
        assert_eq!(
            sn_clustering_assignment(clustering, assignment.as_mut_ptr(), cols),
            SnStatus::Ok
        );
        assert_eq!(assignment.iter().max().unwrap() + 1, k);
        assert_eq!(
            sn_clustering_assignment(clustering, assignment.as_mut_ptr(), cols - 1),
            SnStatus::Shape
        );

        let mut config = sn_train_config_default();
        assert_eq!(config.total_hidden, 50);
        config.epochs = 30;
        let mut model = ptr::null_mut();
        assert_eq!(
            sn_model_train(ds, clustering, &config, &mut model),
            SnStatus::Ok,
            "{}",
            last_error()
        );
        let mut dim = 0;
        sn_model_output_dim(model, &mut dim);
        assert_eq!(dim, 2);
        let mut pred = vec![0.0; rows * dim];
        assert_eq!(sn_model_predict(model, ds, pred.as_mut_ptr(), pred.len()), SnStatus::Ok);
        for p in pred.chunks(2) {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
        let mut acc = 0.0;
        assert_eq!(sn_model_evaluate(model, ds, &mut acc), SnStatus::Ok);
        assert!(acc > 0.9, "training accuracy {acc}");

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(sn_model_save(model, path.as_ptr()), SnStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(
            sn_model_load(path.as_ptr(), &mut loaded),
            SnStatus::Ok,
            "{}",
            last_error()
        );
        let mut again = vec![0.0; pred.len()];
        sn_model_predict(loaded, ds, again.as_mut_ptr(), again.len());
        assert_eq!(
            pred.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );

        sn_model_free(loaded);
        sn_model_free(model);
        sn_clustering_free(clustering);
        sn_dataset_free(ds);
    }
}

#[test]
fn vanilla_model_from_null_clustering() {
    unsafe {
        let ds = toy_dataset(60);
        let mut config = sn_train_config_default();
        config.epochs = 5;
        config.total_hidden = 4;
        let mut model = ptr::null_mut();
        assert_eq!(sn_model_train(ds, ptr::null(), &config, &mut model), SnStatus::Ok);
        assert!(!model.is_null());
        sn_model_free(model);
        sn_dataset_free(ds);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let missing = repo_file("data/does-not-exist.toml");
        let mut ds = ptr::null_mut();
        assert_eq!(
            sn_dataset_load(missing.as_ptr(), ptr::null(), &mut ds),
            SnStatus::Schema
        );
        assert!(ds.is_null());
        assert!(last_error().contains("does-not-exist.toml"));

        assert_eq!(
            sn_dataset_load(ptr::null(), ptr::null(), &mut ds),
            SnStatus::NullPointer
        );
        assert_eq!(
            sn_dataset_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()),
            SnStatus::NullPointer
        );

        let ds = toy_dataset(10);
        let mut c = ptr::null_mut();
        assert_eq!(sn_cluster(ds, 0.0, false, &mut c), SnStatus::InvalidArgument);
        assert!(c.is_null());

        let mut config = sn_train_config_default();
        config.learning_rate = -1.0;
        let mut model = ptr::null_mut();
        assert_eq!(
            sn_model_train(ds, ptr::null(), &config, &mut model),
            SnStatus::InvalidArgument
        );

        let bad = CString::new("/nonexistent/dir/model.json").unwrap();
        assert_eq!(sn_model_load(bad.as_ptr(), &mut model), SnStatus::Io);

        let mut k = 0;
        sn_dataset_free(ds);
        sn_clustering_free(ptr::null_mut());
        assert_eq!(sn_clustering_k(ptr::null(), &mut k), SnStatus::NullPointer);
    }
}

#[test]
fn success_clears_previous_error() {
    unsafe {
        let mut k = 0;
        sn_clustering_k(ptr::null(), &mut k);
        assert!(!last_error().is_empty());
        let ds = toy_dataset(10);
        let mut missing = 0.0;
        sn_dataset_missing_fraction(ds, &mut missing);
        assert!(last_error().is_empty());
        sn_dataset_free(ds);
    }
}

#[test]
fn header_is_generated_and_compiles() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/splitnn.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for symbol in [
        "typedef struct SnDataset SnDataset",
        "SN_STATUS_OK = 0",
        "sn_model_train",
        "sn_last_error_message",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"splitnn.h\"\nint main(void) { SnTrainConfig c = sn_train_config_default(); return (int)c.epochs == 0; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
