mod common;

use std::fs;

use guiscout::corpus::{Corpus, INDEX_FILE};
use guiscout::embedder::attach_external;
use guiscout::ingest::{ingest, update, IngestError, IngestOptions};
use guiscout::mock::{MockServer, MockState};
use guiscout::synth::write_manifest;
use guiscout_core::{IndexKind, Platform, ScreenRecord};

use common::{embedder, fixture, ingested, options, DIM, SEED};

#[test]
fn twenty_lines_split_into_ingested_duplicates_and_failures() {
    let root = tempfile::tempdir().unwrap();
    let (corpus, report) = ingested(root.path());
    assert_eq!(report.total_lines, 20);
    assert_eq!(report.ingested, 17);
    assert_eq!(report.skipped_duplicates, 2);
    assert_eq!(report.failed.len(), 1);
    assert!(report.balances());
    assert_eq!(report.failed[0].line, 20);
    assert_eq!(corpus.index.len(), 17);
    assert_eq!(corpus.store.len(), 17);
    let dup_of: Vec<&str> = report.duplicates.iter().map(|d| d.duplicate_of.as_str()).collect();
    assert_eq!(dup_of, ["screen-001", "screen-002"]);
}

#[test]
fn dedup_can_be_disabled() {
    let root = tempfile::tempdir().unwrap();
    let manifest = fixture(&root.path().join("fx"), 5, 2, 0);
    let opts = IngestOptions { dedup_threshold: None, ..options() };
    let (_, report) = ingest(&manifest, &root.path().join("ix"), &embedder(), &opts).unwrap();
    assert_eq!((report.ingested, report.skipped_duplicates), (7, 0));
}

#[test]
fn repeated_builds_write_identical_index_files() {
    for kind in [IndexKind::Flat, IndexKind::Hnsw] {
        let root = tempfile::tempdir().unwrap();
        let manifest = fixture(&root.path().join("fx"), 17, 2, 1);
        let opts = IngestOptions { kind, ..options() };
        ingest(&manifest, &root.path().join("a"), &embedder(), &opts).unwrap();
        ingest(&manifest, &root.path().join("b"), &embedder(), &opts).unwrap();
        let a = fs::read(root.path().join("a").join(INDEX_FILE)).unwrap();
        let b = fs::read(root.path().join("b").join(INDEX_FILE)).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn update_adds_and_tombstones() {
    let root = tempfile::tempdir().unwrap();
    let (mut corpus, _) = ingested(root.path());
    let fx = root.path().join("fixture");
    let new = ScreenRecord {
        id: "screen-100".into(),
        app_id: "vitalis".into(),
        app_url: "https://apps.example.com/vitalis".into(),
        caption: "Another health view".into(),
        image_path: "images/screen-005.png".into(),
        platform: Platform::Ios,
        category: None,
    };
    let delta = fx.join("delta.jsonl");
    let mut text = serde_json::to_string(&new).unwrap();
    text.push_str("\n{\"id\": \"screen-003\", \"tombstone\": true}\n");
    fs::write(&delta, text).unwrap();
    // screen-100 reuses screen-005's picture, so dedup must be off for it to land.
    corpus.meta.dedup_threshold = None;
    let report = update(&mut corpus, &delta, &embedder(), 8).unwrap();
    assert_eq!((report.ingested, report.tombstoned, report.total_lines), (1, 1, 2));
    assert!(report.balances());

    let reopened = Corpus::open(&root.path().join("index")).unwrap();
    assert_eq!(reopened.index.len(), 17);
    assert!(reopened.index.contains("screen-100"));
    assert!(!reopened.index.contains("screen-003"));
    assert!(reopened.store.get("screen-003").is_err());
}

#[test]
fn delta_outside_the_image_root_is_refused() {
    let root = tempfile::tempdir().unwrap();
    let (mut corpus, _) = ingested(root.path());
    let elsewhere = root.path().join("elsewhere");
    fs::create_dir_all(&elsewhere).unwrap();
    let delta = elsewhere.join("delta.jsonl");
    fs::write(&delta, "{\"id\": \"screen-001\", \"tombstone\": true}\n").unwrap();
    assert!(matches!(
        update(&mut corpus, &delta, &embedder(), 8),
        Err(IngestError::ImageRootMismatch { .. })
    ));
}

#[test]
fn tombstones_in_a_fresh_manifest_fail_per_line() {
    let root = tempfile::tempdir().unwrap();
    let manifest = fixture(&root.path().join("fx"), 3, 0, 0);
    let mut text = fs::read_to_string(&manifest).unwrap();
    text.push_str("{\"id\": \"screen-001\", \"tombstone\": true}\nnot json\n");
    fs::write(&manifest, text).unwrap();
    let (_, report) = ingest(&manifest, &root.path().join("ix"), &embedder(), &options()).unwrap();
    assert_eq!((report.ingested, report.failed.len(), report.total_lines), (3, 2, 5));
}

#[test]
fn external_embedder_matches_the_reference_one() {
    let mock = MockServer::start(MockState::new(DIM, SEED)).unwrap();
    let external = attach_external(&mock.url(), DIM).unwrap();
    let root = tempfile::tempdir().unwrap();
    let manifest = fixture(&root.path().join("fx"), 10, 0, 0);
    let (a, ra) = ingest(&manifest, &root.path().join("ref"), &embedder(), &options()).unwrap();
    let (b, rb) = ingest(&manifest, &root.path().join("ext"), &external, &options()).unwrap();
    assert_eq!(ra.ingested, rb.ingested);
    assert!(mock.state.embed_calls() > 0);
    for (id, v) in a.index.iter() {
        let w = b.index.vector(id).unwrap();
        let diff = v.iter().zip(w).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
        assert!(diff < 1e-6, "{id}: {diff}");
    }
}

#[test]
fn embedder_dimension_is_checked_at_handshake() {
    let mock = MockServer::start(MockState::new(DIM, SEED).advertise_dim(64)).unwrap();
    assert!(attach_external(&mock.url(), DIM).is_err());
    let root = tempfile::tempdir().unwrap();
    let manifest = root.path().join("m.jsonl");
    write_manifest(&manifest, &[]).unwrap();
    let wrong = guiscout::embedder::ReferenceEmbedder::new(64, SEED);
    assert!(matches!(
        ingest(&manifest, &root.path().join("ix"), &wrong, &options()),
        Err(IngestError::DimensionMismatch { .. })
    ));
}
