use std::ffi::{CStr, CString};
use std::ptr;

use emojisem::embedding::{build_vocabulary, save_model, train_cbow, TrainMode, TrainParams};
use emojisem_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    es_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(es_last_error()).to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(es_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn inventory_lookup_and_tokenize() {
    unsafe {
        let inv = es_inventory_builtin();
        assert_eq!(es_inventory_len(inv), 1281);
        let mut yes = false;
        assert_eq!(es_inventory_contains(inv, c("😂").as_ptr(), &mut yes), EsStatus::Ok);
        assert!(yes);
        assert_eq!(es_inventory_contains(inv, c("a").as_ptr(), &mut yes), EsStatus::Ok);
        assert!(!yes);

        let mut cat = ptr::null_mut();
        assert_eq!(es_inventory_category(inv, c("😂").as_ptr(), &mut cat), EsStatus::Ok);
        assert!(!take(cat).is_empty());
        assert_eq!(es_inventory_category(inv, c("x").as_ptr(), &mut cat), EsStatus::Ok);
        assert!(cat.is_null());

        let mut out = ptr::null_mut();
        let st = es_tokenize(
            inv,
            c("Love it😂 see http://x.co @bob").as_ptr(),
            c("en").as_ptr(),
            false,
            &mut out,
        );
        assert_eq!(st, EsStatus::Ok);
        assert_eq!(take(out), "love it 😂 see <url> <user>");

        assert_eq!(
            es_normalize_text(c("call 555-123-4567").as_ptr(), &mut out),
            EsStatus::Ok
        );
        assert_eq!(take(out), "call <phone>");
        es_inventory_free(inv);
    }
}

#[test]
fn null_and_bad_utf8_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(es_normalize_text(ptr::null(), &mut out), EsStatus::NullPointer);
        assert!(last_error().contains("text"));
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(es_normalize_text(bad.as_ptr().cast(), &mut out), EsStatus::InvalidUtf8);
        assert!(out.is_null());
        // a successful call clears the message
        assert_eq!(es_normalize_text(c("ok").as_ptr(), &mut out), EsStatus::Ok);
        assert!(es_last_error().is_null());
        es_string_free(out);
    }
}

#[test]
fn numerics_match_the_library() {
    unsafe {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 4.0, 3.0];
        let mut r = 0.0;
        assert_eq!(es_spearman(x.as_ptr(), y.as_ptr(), 4, &mut r), EsStatus::Ok);
        assert!((r - 0.6).abs() < 1e-15);
        assert_eq!(es_pearson(x.as_ptr(), y.as_ptr(), 4, &mut r), EsStatus::Ok);
        assert!((r - 0.6).abs() < 1e-15);
        let flat = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(es_spearman(x.as_ptr(), flat.as_ptr(), 4, &mut r), EsStatus::Undefined);

        assert_eq!(es_cosine(x.as_ptr(), x.as_ptr(), 4, &mut r), EsStatus::Ok);
        assert!((r - 1.0).abs() < 1e-15);
        let zero = [0.0; 4];
        assert_eq!(es_cosine(x.as_ptr(), zero.as_ptr(), 4, &mut r), EsStatus::Undefined);

        let vs = [3.0, 0.0, 0.0, 1.0, 2.0, 0.0];
        let mut out = [0.0; 6];
        assert_eq!(es_gram_schmidt(vs.as_ptr(), 2, 3, out.as_mut_ptr()), EsStatus::Ok);
        assert_eq!(out, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let dependent = [1.0, 2.0, 3.0, 2.0, 4.0, 6.0];
        assert_eq!(
            es_gram_schmidt(dependent.as_ptr(), 2, 3, out.as_mut_ptr()),
            EsStatus::Undefined
        );
        assert!(last_error().contains("row 1"));
    }
}

#[test]
fn model_handle_round_trip() {
    let sentences: Vec<Vec<String>> = (0..200)
        .map(|i| {
            ["a", "b", "c", "d", "e"]
                .iter()
                .map(|t| format!("{t}{}", i % 3))
                .collect()
        })
        .collect();
    let vocab = build_vocabulary(&sentences, 1).unwrap();
    let params = TrainParams {
        dim: 8,
        epochs: 2,
        min_count: 1,
        ..TrainParams::default()
    };
    let model = train_cbow(&vocab.encode(&sentences), &vocab, &params, TrainMode::Deterministic).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vec");
    save_model(&model, &path).unwrap();

    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(es_model_load(c(path.to_str().unwrap()).as_ptr(), &mut h), EsStatus::Ok);
        assert_eq!(es_model_dim(h), 8);
        assert_eq!(es_model_len(h), model.len());
        assert!(es_model_token(h, model.len()).is_null());

        let mut v = [0f32; 8];
        assert_eq!(es_model_vector(h, c("a0").as_ptr(), v.as_mut_ptr(), 8), EsStatus::Ok);
        assert_eq!(&v[..], model.vector("a0").unwrap());
        assert_eq!(
            es_model_vector(h, c("zzz").as_ptr(), v.as_mut_ptr(), 8),
            EsStatus::NotFound
        );
        assert_eq!(
            es_model_vector(h, c("a0").as_ptr(), v.as_mut_ptr(), 4),
            EsStatus::InvalidArgument
        );

        let (mut idx, mut sc, mut n) = ([0usize; 3], [0f64; 3], 0usize);
        let st = es_model_neighbors(h, c("a0").as_ptr(), 3, idx.as_mut_ptr(), sc.as_mut_ptr(), &mut n);
        assert_eq!(st, EsStatus::Ok);
        assert_eq!(n, 3);
        let want = emojisem::embedding::neighbors(&model, "a0", 3).unwrap();
        for i in 0..3 {
            let tok = CStr::from_ptr(es_model_token(h, idx[i])).to_str().unwrap();
            assert_eq!(tok, want[i].0);
            assert_eq!(sc[i], want[i].1);
        }
        es_model_free(h);

        assert_eq!(es_model_load(c("/nonexistent.vec").as_ptr(), &mut h), EsStatus::Io);
        assert!(h.is_null());
        assert!(last_error().contains("nonexistent"));
    }
}
