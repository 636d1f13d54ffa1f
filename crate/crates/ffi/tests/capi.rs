use longsynth_ffi::*;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/corpus_1k.jsonl")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ls_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_corpus(dir: &Path) -> CString {
    let text = std::fs::read_to_string(corpus()).unwrap();
    let path = dir.join("small.jsonl");
    let head: Vec<&str> = text.lines().take(80).collect();
    std::fs::write(&path, head.join("\n")).unwrap();
    c(path.to_str().unwrap())
}

fn build(path: &CString) -> *mut LsIndex {
    let mut index = ptr::null_mut();
    assert_eq!(
        unsafe { ls_index_build(path.as_ptr(), 2048, 128, &mut index) },
        LsStatus::Ok
    );
    assert!(!index.is_null());
    index
}

#[test]
fn budget_matches_worked_example() {
    let cfg = LsSynthesisConfig {
        target_tokens: 1000,
        encoding_rate: 4.0,
        adjustment: 1.5,
        ..ls_synthesis_config_default()
    };
    let mut b = LsBudget::default();
    assert_eq!(unsafe { ls_negative_budget(1000, 2, 500, &cfg, &mut b) }, LsStatus::Ok);
    assert_eq!((b.total_chars, b.remaining_chars, b.k, b.skip), (6000, 5000, 5, false));
    assert_eq!(unsafe { ls_negative_budget(7000, 2, 500, &cfg, &mut b) }, LsStatus::Ok);
    assert_eq!((b.k, b.skip), (0, true));
    assert_eq!(
        unsafe { ls_negative_budget(1000, 0, 500, &cfg, &mut b) },
        LsStatus::Config
    );
}

#[test]
fn null_and_bad_arguments_map_to_status_codes() {
    let mut index = ptr::null_mut();
    assert_eq!(
        unsafe { ls_index_build(ptr::null(), 2048, 64, &mut index) },
        LsStatus::NullArgument
    );
    assert!(last_error().contains("corpus_path"));
    let missing = c("/no/such/file.jsonl");
    assert_eq!(
        unsafe { ls_index_build(missing.as_ptr(), 2048, 64, &mut index) },
        LsStatus::Io
    );
    assert!(index.is_null());
    assert_eq!(
        unsafe { ls_index_load(missing.as_ptr(), ptr::null(), &mut index) },
        LsStatus::Io
    );
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { ls_index_build(bad.as_ptr().cast(), 2048, 64, &mut index) },
        LsStatus::InvalidUtf8
    );
    let cfg = ls_synthesis_config_default();
    assert_eq!(
        unsafe { ls_negative_budget(1, 1, 1, &cfg, ptr::null_mut()) },
        LsStatus::NullArgument
    );
    assert_eq!(unsafe { ls_index_len(ptr::null()) }, 0);
    unsafe { ls_index_free(ptr::null_mut()) };
    unsafe { ls_string_free(ptr::null_mut()) };
}

#[test]
fn index_round_trip_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_corpus(dir.path());
    let index = build(&path);
    let len = unsafe { ls_index_len(index) };
    assert!(len > 80);
    assert_eq!(unsafe { ls_index_granularity(index) }, 2048);

    let snap = c(dir.path().join("idx.bin").to_str().unwrap());
    assert_eq!(unsafe { ls_index_save(index, snap.as_ptr()) }, LsStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(
        unsafe { ls_index_load(snap.as_ptr(), ptr::null(), &mut loaded) },
        LsStatus::Ok
    );
    assert_eq!(unsafe { ls_index_len(loaded) }, len);

    let query = c("shai tra bu");
    let exclude = c("doc-00000");
    let (mut a, mut b) = ([LsHit::default(); 16], [LsHit::default(); 16]);
    let (mut na, mut nb) = (0, 0);
    unsafe {
        assert_eq!(
            ls_index_query(index, query.as_ptr(), 16, exclude.as_ptr(), a.as_mut_ptr(), 16, &mut na),
            LsStatus::Ok
        );
        assert_eq!(
            ls_index_query(
                loaded,
                query.as_ptr(),
                16,
                exclude.as_ptr(),
                b.as_mut_ptr(),
                16,
                &mut nb
            ),
            LsStatus::Ok
        );
    }
    assert_eq!((na, nb), (16, 16));
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].score >= w[1].score));

    for hit in &a {
        let (mut text, mut doc, mut ordinal) = (ptr::null_mut(), ptr::null_mut(), 0usize);
        assert_eq!(
            unsafe { ls_index_chunk(index, hit.chunk_id, &mut text, &mut doc, &mut ordinal) },
            LsStatus::Ok
        );
        let doc_id = unsafe { CStr::from_ptr(doc) }.to_str().unwrap().to_string();
        assert_ne!(doc_id, "doc-00000");
        assert!(ordinal >= 1);
        assert!(!unsafe { CStr::from_ptr(text) }.to_bytes().is_empty());
        unsafe {
            ls_string_free(text);
            ls_string_free(doc);
        }
    }
    let mut text = ptr::null_mut();
    assert_eq!(
        unsafe { ls_index_chunk(index, 1 << 40, &mut text, ptr::null_mut(), ptr::null_mut()) },
        LsStatus::NotFound
    );
    assert_eq!(
        unsafe { ls_index_query(index, query.as_ptr(), 16, ptr::null(), a.as_mut_ptr(), 8, &mut na) },
        LsStatus::BufferTooSmall
    );
    unsafe {
        ls_index_free(index);
        ls_index_free(loaded);
    }
}

#[test]
fn corrupt_snapshot_is_an_index_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("bad.bin");
    std::fs::write(&snap, b"LSYNIDX\0not really an index").unwrap();
    let snap = c(snap.to_str().unwrap());
    let mut index = ptr::null_mut();
    assert_eq!(
        unsafe { ls_index_load(snap.as_ptr(), ptr::null(), &mut index) },
        LsStatus::IndexFormat
    );
    assert!(index.is_null());
}

#[test]
fn extend_document_accepts_or_reports_reason() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_corpus(dir.path());
    let index = build(&path);
    let mut cfg = LsSynthesisConfig {
        target_tokens: 2048,
        ..ls_synthesis_config_default()
    };
    assert_eq!(
        unsafe { ls_measure_encoding_rate(path.as_ptr(), &mut cfg.encoding_rate) },
        LsStatus::Ok
    );
    assert!(cfg.encoding_rate > 1.0);

    let doc = longsynth::corpus::read_all(corpus()).unwrap().swap_remove(0);
    let (id, text) = (c(doc.doc_id()), c(doc.text()));
    let (mut json, mut reason) = (ptr::null_mut(), LsRejectReason::Failed);
    assert_eq!(
        unsafe { ls_extend_document(index, &cfg, id.as_ptr(), text.as_ptr(), &mut json, &mut reason) },
        LsStatus::Ok
    );
    assert_eq!(reason, LsRejectReason::None);
    let record = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
    assert!(record.starts_with(&format!("{{\"id\":\"{}.ext\"", doc.doc_id())));
    unsafe { ls_string_free(json) };

    cfg.selection = LsSelection::SelfRepeat;
    cfg.encoding_rate = 1.0;
    cfg.adjustment = 1.0;
    assert_eq!(
        unsafe { ls_extend_document(index, &cfg, id.as_ptr(), text.as_ptr(), &mut json, &mut reason) },
        LsStatus::Ok
    );
    assert!(json.is_null());
    assert_eq!(reason, LsRejectReason::BelowTarget);
    unsafe { ls_index_free(index) };
}

#[test]
fn synthesize_file_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_corpus(dir.path());
    let index = build(&path);
    let cfg = LsSynthesisConfig {
        target_tokens: 2048,
        encoding_rate: 6.7,
        selection: LsSelection::RandomD,
        position: LsPosition::Random,
        seed: 3,
        ..ls_synthesis_config_default()
    };
    let dataset = dir.path().join("out.jsonl");
    let rejects = dir.path().join("rejects.jsonl");
    let (d, r) = (c(dataset.to_str().unwrap()), c(rejects.to_str().unwrap()));
    let mut report = LsReport::default();
    assert_eq!(
        unsafe { ls_synthesize_file(index, &cfg, path.as_ptr(), d.as_ptr(), r.as_ptr(), &mut report) },
        LsStatus::Ok
    );
    assert_eq!(report.attempted, 80);
    assert_eq!(report.accepted + report.rejected, 80);
    let lines = std::fs::read_to_string(&dataset).unwrap().lines().count();
    assert_eq!(lines, report.accepted);
    assert!(report.min_extension_ratio >= 1.0);
    unsafe { ls_index_free(index) };
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("liblongsynth_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let small = small_corpus(dir.path());
    let run = Command::new(&bin)
        .arg(small.to_str().unwrap())
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "{stdout}\n{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(stdout.contains("ok 0.1.0"));
}
