//! Generated corpora for benchmarks, tests and demos.
//!
//! [`synthesize`] writes a large corpus of random unit vectors with made-up
//! metadata and no images. [`write_fixture`] writes a small manifest with
//! real PNG screenshots. Each fixture image is drawn so that, under the
//! reference embedder, it lands near the embedding of its own caption. Text
//! queries therefore find the screens they describe.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use guiscout_core::reference::{MatrixFamily, Projection, IMAGE_GRID};
use guiscout_core::rng::SplitMix64;
use guiscout_core::{Embedding, HnswParams, IndexKind, Platform, ScreenRecord, VectorIndex};
use serde::Serialize;

use crate::corpus::{Corpus, CorpusError, CorpusMeta, META_VERSION};
use crate::embedder::{Embedder, ReferenceEmbedder};
use crate::store::MetadataStore;

const ADJECTIVES: [&str; 12] = [
    "minimal", "dark", "colorful", "clean", "compact", "playful", "modern", "classic", "bold", "soft", "flat", "rounded",
];
const SCREENS: [&str; 16] = [
    "login", "sign up", "dashboard", "settings", "profile", "checkout", "search results", "chat", "calendar", "map",
    "music player", "news feed", "onboarding", "report", "product detail", "notifications",
];
const DOMAINS: [&str; 12] = [
    "health", "banking", "shopping", "travel", "fitness", "education", "food delivery", "social", "weather", "music",
    "productivity", "games",
];
const CATEGORIES: [&str; 6] = ["health", "finance", "shopping", "social", "lifestyle", "utilities"];
const PLATFORMS: [Platform; 3] = [Platform::Ios, Platform::Android, Platform::Web];

fn pick<'a>(rng: &mut SplitMix64, items: &[&'a str]) -> &'a str {
    items[(rng.next_u64() % items.len() as u64) as usize]
}

fn caption(rng: &mut SplitMix64) -> String {
    format!("{} {} screen of a {} app", pick(rng, &ADJECTIVES), pick(rng, &SCREENS), pick(rng, &DOMAINS))
}

/// `n` seeded query strings drawn from the synthetic caption vocabulary.
pub fn synthetic_queries(n: usize, seed: u64) -> Vec<String> {
    let mut rng = SplitMix64::new(seed ^ 0x5155_4552_5953);
    (0..n).map(|_| caption(&mut rng)).collect()
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub kind: IndexKind,
    pub hnsw: HnswParams,
}

/// Write a corpus of `n` random unit vectors to `dir`. Vectors come from a
/// seeded Gaussian, so the corpus is reproducible. The embedder recorded in
/// the config is the reference embedder, which is what queries use.
pub fn synthesize(dir: &Path, opts: &SynthOptions) -> Result<Corpus, CorpusError> {
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
    let mut index = VectorIndex::new(opts.kind, opts.dim, opts.seed, opts.hnsw)?;
    let mut store = MetadataStore::create(dir)?;
    let mut rng = SplitMix64::new(opts.seed);
    let mut buf = vec![0.0; opts.dim];
    for i in 0..opts.n {
        rng.fill_gaussian(&mut buf);
        let e = Embedding::normalize(&buf, opts.dim)?;
        let id = format!("syn-{i:07}");
        let record = ScreenRecord {
            id: id.clone(),
            app_id: format!("syn-app-{:05}", i / 10),
            app_url: format!("https://apps.example.com/syn-app-{:05}", i / 10),
            caption: caption(&mut rng),
            image_path: format!("synthetic/{id}.png"),
            platform: PLATFORMS[i % PLATFORMS.len()],
            category: Some(CATEGORIES[i % CATEGORIES.len()].to_string()),
        };
        index.insert(&id, &e)?;
        store.append(&record)?;
    }
    let corpus = Corpus {
        dir: dir.to_path_buf(),
        meta: CorpusMeta {
            version: META_VERSION,
            dim: opts.dim,
            seed: opts.seed,
            kind: opts.kind,
            hnsw: opts.hnsw.into(),
            embedder: ReferenceEmbedder::new(opts.dim, opts.seed).descriptor().clone(),
            image_root: std::path::absolute(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?,
            dedup_threshold: None,
        },
        index,
        store,
    };
    corpus.save()?;
    Ok(corpus)
}

/// One screen of the fixture catalogue.
#[derive(Debug, Clone, Copy)]
pub struct CatalogueScreen {
    pub app_id: &'static str,
    pub platform: Platform,
    pub category: &'static str,
    pub caption: &'static str,
}

const fn screen(app_id: &'static str, platform: Platform, category: &'static str, caption: &'static str) -> CatalogueScreen {
    CatalogueScreen { app_id, platform, category, caption }
}

/// Hand-written screens. The first three are health monitoring reports.
pub const CATALOGUE: [CatalogueScreen; 24] = [
    screen("vitalis", Platform::Ios, "health", "Health monitoring report with heart rate and sleep charts"),
    screen("vitalis", Platform::Ios, "health", "Health monitoring report with vitals summary and profile"),
    screen("pulsewatch", Platform::Android, "health", "Health monitoring dashboard with blood pressure trends"),
    screen("vitalis", Platform::Ios, "health", "Medication reminder list with dosage times"),
    screen("stridefit", Platform::Android, "lifestyle", "Workout tracker with step counter and calories"),
    screen("coinly", Platform::Ios, "finance", "Login screen with email and password fields"),
    screen("coinly", Platform::Ios, "finance", "Account balance overview with recent transactions"),
    screen("cartwheel", Platform::Web, "shopping", "Shopping cart with item list and checkout button"),
    screen("cartwheel", Platform::Web, "shopping", "Product detail page with photos and reviews"),
    screen("chatter", Platform::Android, "social", "Chat conversation with message bubbles and input bar"),
    screen("tunebox", Platform::Ios, "lifestyle", "Music player with album art and playback controls"),
    screen("skycast", Platform::Android, "utilities", "Weather forecast for the week with temperature icons"),
    screen("wayfind", Platform::Web, "utilities", "Map with nearby restaurants and rating pins"),
    screen("coinly", Platform::Ios, "finance", "Settings page with notification toggles"),
    screen("planit", Platform::Web, "utilities", "Calendar month view with colored events"),
    screen("dailybrief", Platform::Android, "social", "News feed with article cards and thumbnails"),
    screen("jetset", Platform::Web, "lifestyle", "Flight booking search form with dates and passengers"),
    screen("munch", Platform::Ios, "lifestyle", "Food delivery restaurant menu with prices"),
    screen("chatter", Platform::Android, "social", "User profile with photo grid and follow button"),
    screen("stridefit", Platform::Android, "lifestyle", "Onboarding welcome screen with sign up button"),
    screen("mailbird", Platform::Web, "utilities", "Email inbox list with unread badges"),
    screen("jotter", Platform::Ios, "utilities", "Note editor with formatting toolbar"),
    screen("streamly", Platform::Web, "lifestyle", "Video streaming home with featured carousel"),
    screen("cartwheel", Platform::Web, "shopping", "Order history with delivery status"),
];

/// Number of health monitoring report screens at the head of the catalogue.
pub const HEALTH_REPORT_SCREENS: usize = 3;

#[derive(Debug, Clone)]
pub struct FixtureOptions {
    /// Distinct screens taken from the head of [`CATALOGUE`].
    pub screens: usize,
    /// Extra lines whose image is a byte copy of an earlier screen.
    pub duplicates: usize,
    /// Extra lines whose image file does not exist.
    pub missing: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions { screens: 17, duplicates: 2, missing: 1, dim: guiscout_core::DEFAULT_DIM, seed: guiscout_core::DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureSummary {
    pub manifest: PathBuf,
    pub lines: usize,
    pub screens: usize,
    pub duplicates: usize,
    pub missing: usize,
}

/// A 16x16 grayscale picture whose reference image embedding points toward
/// `target`. The grid is `W_img · target` rescaled into [0.05, 0.95], plus a
/// little seeded noise so no two screens share an image.
pub fn steered_png(projection: &Projection, target: &Embedding, noise_seed: u64) -> Vec<u8> {
    let grid = projection.back_project(target.values());
    let peak = grid.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut rng = SplitMix64::new(noise_seed);
    let img = image::GrayImage::from_fn(IMAGE_GRID as u32, IMAGE_GRID as u32, |x, y| {
        let v = grid[y as usize * IMAGE_GRID + x as usize] / peak;
        let jitter = (rng.next_f64() - 0.5) * 0.04;
        image::Luma([((0.5 + 0.45 * v + jitter).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    let mut out = io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("png encoding to memory");
    out.into_inner()
}

/// Write `manifest.jsonl` and `images/` into `dir`.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions) -> io::Result<FixtureSummary> {
    if opts.screens == 0 || opts.screens > CATALOGUE.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("screens must be between 1 and {}", CATALOGUE.len()),
        ));
    }
    let images = dir.join("images");
    std::fs::create_dir_all(&images)?;
    let embedder = ReferenceEmbedder::new(opts.dim, opts.seed);
    let projection = Projection::generate(MatrixFamily::Image, opts.dim, opts.seed);
    let mut records = Vec::new();
    let mut pngs: Vec<Vec<u8>> = Vec::new();
    for (i, s) in CATALOGUE.iter().take(opts.screens).enumerate() {
        let target = embedder
            .embed_text(&[s.caption.to_string()])
            .map_err(io::Error::other)?
            .remove(0);
        let png = steered_png(&projection, &target, opts.seed ^ (i as u64 + 1));
        let file = format!("images/screen-{:03}.png", i + 1);
        std::fs::write(dir.join(&file), &png)?;
        pngs.push(png);
        records.push(fixture_record(i + 1, s, file));
    }
    for d in 0..opts.duplicates {
        let src = d % opts.screens;
        let n = records.len() + 1;
        let file = format!("images/screen-{n:03}-copy.png");
        std::fs::write(dir.join(&file), &pngs[src])?;
        records.push(fixture_record(n, &CATALOGUE[src], file));
    }
    for _ in 0..opts.missing {
        let n = records.len() + 1;
        records.push(fixture_record(n, &CATALOGUE[0], format!("images/screen-{n:03}-missing.png")));
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    Ok(FixtureSummary {
        manifest,
        lines: records.len(),
        screens: opts.screens,
        duplicates: opts.duplicates,
        missing: opts.missing,
    })
}

fn fixture_record(n: usize, s: &CatalogueScreen, image_path: String) -> ScreenRecord {
    ScreenRecord {
        id: format!("screen-{n:03}"),
        app_id: s.app_id.to_string(),
        app_url: format!("https://apps.example.com/{}", s.app_id),
        caption: s.caption.to_string(),
        image_path,
        platform: s.platform,
        category: Some(s.category.to_string()),
    }
}

/// One JSON object per line.
pub fn write_manifest(path: &Path, records: &[ScreenRecord]) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
