//! Blinded pairwise annotation service.
//!
//! Items are the volumes of one directory, known to clients only by opaque ids. Unordered
//! pairs are presented in a seeded random round-robin order with random left/right
//! placement. A pair stays current for a session until it is answered; each pair token
//! is accepted once. The comparisons log is appended under the state lock, so the
//! server is its only writer.

use crate::ServeArgs;
use anyhow::{bail, Context};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use momoc_core::io;
use momoc_core::metrics::percentile;
use momoc_core::pmas::{fit_bt, parse_comparisons, BtOptions, ComparisonRecord, Outcome};
use momoc_core::RealVolume32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

struct Item {
    id: String,
    opaque: String,
    /// Scaled to `[0, 1]` by the 99.9th percentile.
    display: RealVolume32,
}

struct Pending {
    pair: usize,
    swap: bool,
    session: String,
}

#[derive(Default)]
struct Session {
    current: Option<String>,
}

struct Inner {
    records: Vec<ComparisonRecord>,
    sessions: HashMap<String, Session>,
    pending: HashMap<String, Pending>,
    answered: BTreeSet<String>,
    rng: ChaCha8Rng,
}

pub struct AppState {
    items: Vec<Item>,
    by_opaque: HashMap<String, usize>,
    by_id: HashMap<String, usize>,
    /// Unordered item pairs in presentation order.
    schedule: Vec<(usize, usize)>,
    log_path: PathBuf,
    inner: Mutex<Inner>,
}

fn token(rng: &mut ChaCha8Rng) -> String {
    format!("{:016x}{:016x}", rng.random::<u64>(), rng.random::<u64>())
}

fn display_scaled(v: &RealVolume32) -> RealVolume32 {
    let vals: Vec<f64> = v.data().iter().map(|&x| x as f64).collect();
    let peak = percentile(&vals, 99.9).unwrap_or(0.0);
    let inv = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    v.map(|&x| ((x as f64 * inv).clamp(0.0, 1.0)) as f32)
}

impl AppState {
    /// Index the named volumes and replay an existing comparisons log.
    pub fn new(
        volumes: Vec<(String, RealVolume32)>,
        log_path: PathBuf,
        seed: u64,
    ) -> anyhow::Result<Self> {
        if volumes.len() < 2 {
            bail!(
                "at least two volumes are needed for pairwise comparison, found {}",
                volumes.len()
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<Item> = volumes
            .into_iter()
            .map(|(id, v)| Item {
                id,
                opaque: token(&mut rng),
                display: display_scaled(&v),
            })
            .collect();
        let by_opaque = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.opaque.clone(), i))
            .collect();
        let by_id: HashMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.id.clone(), i))
            .collect();
        if by_id.len() != items.len() {
            bail!("volume ids must be unique");
        }
        let mut schedule: Vec<(usize, usize)> = (0..items.len())
            .flat_map(|i| (i + 1..items.len()).map(move |j| (i, j)))
            .collect();
        for i in (1..schedule.len()).rev() {
            schedule.swap(i, rng.random_range(0..=i));
        }
        let records = if log_path.exists() {
            parse_comparisons(&std::fs::read_to_string(&log_path)?)
                .with_context(|| format!("reading {}", log_path.display()))?
        } else {
            if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::File::create(&log_path)
                .with_context(|| format!("creating {}", log_path.display()))?;
            Vec::new()
        };
        let inner = Inner {
            records,
            sessions: HashMap::new(),
            pending: HashMap::new(),
            answered: BTreeSet::new(),
            rng,
        };
        Ok(Self {
            items,
            by_opaque,
            by_id,
            schedule,
            log_path,
            inner: Mutex::new(inner),
        })
    }

    /// Load every `.pmv` and `.nii` file of `dir`, keyed by file stem.
    pub fn from_dir(dir: &Path, log_path: PathBuf, seed: u64) -> anyhow::Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading volume directory {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "pmv" || e == "nii"))
            .collect();
        paths.sort();
        let volumes = paths
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                Ok((id, io::load_magnitude::<f32>(p)?))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Self::new(volumes, log_path, seed)
    }

    fn pair_key(&self, a: &str, b: &str) -> Option<usize> {
        let (i, j) = (*self.by_id.get(a)?, *self.by_id.get(b)?);
        self.schedule
            .iter()
            .position(|&(x, y)| (x, y) == (i.min(j), i.max(j)))
    }

    /// Pairs already judged in a session; the default session counts every record.
    fn done(&self, inner: &Inner, session: &str) -> BTreeSet<usize> {
        inner
            .records
            .iter()
            .filter(|r| session.is_empty() || r.annotator == session)
            .filter_map(|r| self.pair_key(&r.a, &r.b))
            .collect()
    }
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/pairs/next", get(next_pair))
        .route("/api/slices/{opaque}/{axis}/{file}", get(slice_png))
        .route("/api/comparisons", post(post_comparison))
        .route("/api/pmas", get(pmas))
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    annotator: String,
}

#[derive(Serialize)]
struct NextPair {
    pair_token: Option<String>,
    left_id_opaque: Option<String>,
    right_id_opaque: Option<String>,
    n_done: usize,
    n_total: usize,
}

async fn next_pair(
    State(st): State<Arc<AppState>>,
    Query(q): Query<NextQuery>,
) -> ApiResult<Json<NextPair>> {
    let mut guard = st.inner.lock().map_err(internal)?;
    let inner = &mut *guard;
    let done = st.done(inner, &q.annotator);
    let n_done = done.len();
    let n_total = st.schedule.len();
    let current = inner
        .sessions
        .get(&q.annotator)
        .and_then(|s| s.current.clone());
    let tok = match current.filter(|t| {
        inner
            .pending
            .get(t)
            .is_some_and(|p| !done.contains(&p.pair))
    }) {
        Some(t) => t,
        None => {
            let Some(pair) = (0..n_total).find(|k| !done.contains(k)) else {
                inner
                    .sessions
                    .entry(q.annotator.clone())
                    .or_default()
                    .current = None;
                return Ok(Json(NextPair {
                    pair_token: None,
                    left_id_opaque: None,
                    right_id_opaque: None,
                    n_done,
                    n_total,
                }));
            };
            let swap = inner.rng.random_bool(0.5);
            let t = token(&mut inner.rng);
            inner.pending.insert(
                t.clone(),
                Pending {
                    pair,
                    swap,
                    session: q.annotator.clone(),
                },
            );
            inner
                .sessions
                .entry(q.annotator.clone())
                .or_default()
                .current = Some(t.clone());
            t
        }
    };
    let p = &inner.pending[&tok];
    let (i, j) = st.schedule[p.pair];
    let (l, r) = if p.swap { (j, i) } else { (i, j) };
    Ok(Json(NextPair {
        pair_token: Some(tok),
        left_id_opaque: Some(st.items[l].opaque.clone()),
        right_id_opaque: Some(st.items[r].opaque.clone()),
        n_done,
        n_total,
    }))
}

#[derive(Deserialize)]
struct PostComparison {
    pair_token: String,
    outcome: String,
    annotator: String,
}

#[derive(Serialize)]
struct Accepted {
    accepted: bool,
    n_comparisons: usize,
}

async fn post_comparison(
    State(st): State<Arc<AppState>>,
    body: Result<Json<PostComparison>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Accepted>)> {
    let Json(body) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let outcome = match body.outcome.as_str() {
        "left_worse" => Outcome::AWorse,
        "right_worse" => Outcome::BWorse,
        "similar" => Outcome::Similar,
        other => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("outcome must be left_worse, right_worse or similar, got '{other}'"),
            ))
        }
    };
    let mut guard = st.inner.lock().map_err(internal)?;
    let inner = &mut *guard;
    if inner.answered.contains(&body.pair_token) {
        return Err(ApiError(
            StatusCode::CONFLICT,
            "pair token already answered".into(),
        ));
    }
    let Some(p) = inner.pending.remove(&body.pair_token) else {
        return Err(ApiError(StatusCode::NOT_FOUND, "unknown pair token".into()));
    };
    let (i, j) = st.schedule[p.pair];
    let (l, r) = if p.swap { (j, i) } else { (i, j) };
    let record = ComparisonRecord {
        a: st.items[l].id.clone(),
        b: st.items[r].id.clone(),
        outcomes: vec![outcome],
        annotator: body.annotator,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let line = serde_json::to_string(&record).map_err(internal)?;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&st.log_path)
        .map_err(internal)?;
    writeln!(f, "{line}")
        .and_then(|_| f.flush())
        .map_err(internal)?;
    inner.records.push(record);
    inner.answered.insert(body.pair_token.clone());
    if let Some(s) = inner.sessions.get_mut(&p.session) {
        if s.current.as_deref() == Some(body.pair_token.as_str()) {
            s.current = None;
        }
    }
    Ok((
        StatusCode::CREATED,
        Json(Accepted {
            accepted: true,
            n_comparisons: inner.records.len(),
        }),
    ))
}

fn encode_png(width: usize, height: usize, pixels: &[u8]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header()?;
    w.write_image_data(pixels)?;
    w.finish()?;
    Ok(buf)
}

/// Grayscale slice at `index` along `axis`: `x` gives a `(y, z)` image, `y` a `(z, x)`
/// image and `z` a `(y, x)` image, rows first.
fn render_slice(
    v: &RealVolume32,
    axis: &str,
    index: usize,
) -> Result<(usize, usize, Vec<u8>), ApiError> {
    let d = v.dims();
    let (n, rows, cols) = match axis {
        "x" => (d.nx, d.ny, d.nz),
        "y" => (d.ny, d.nz, d.nx),
        "z" => (d.nz, d.ny, d.nx),
        other => {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("axis must be x, y or z, got '{other}'"),
            ))
        }
    };
    if index >= n {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("slice index {index} out of range 0..{n} along {axis}"),
        ));
    }
    let mut px = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let val = match axis {
                "x" => *v.get(r, c, index),
                "y" => *v.get(index, r, c),
                _ => *v.get(r, index, c),
            };
            px.push((val * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok((cols, rows, px))
}

async fn slice_png(
    State(st): State<Arc<AppState>>,
    UrlPath((opaque, axis, file)): UrlPath<(String, String, String)>,
) -> ApiResult<Response> {
    let Some(&item) = st.by_opaque.get(&opaque) else {
        return Err(ApiError(StatusCode::NOT_FOUND, "unknown volume".into()));
    };
    let index: usize = file
        .strip_suffix(".png")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            ApiError(
                StatusCode::BAD_REQUEST,
                format!("expected <index>.png, got '{file}'"),
            )
        })?;
    let (w, h, px) = render_slice(&st.items[item].display, &axis, index)?;
    let png = encode_png(w, h, &px).map_err(internal)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Serialize)]
struct PmasResponse {
    scores: BTreeMap<String, f64>,
    n_comparisons: usize,
}

async fn pmas(State(st): State<Arc<AppState>>) -> ApiResult<Json<PmasResponse>> {
    let records = st.inner.lock().map_err(internal)?.records.clone();
    if records.is_empty() {
        return Ok(Json(PmasResponse {
            scores: BTreeMap::new(),
            n_comparisons: 0,
        }));
    }
    let fit = fit_bt(&records, &BtOptions::default()).map_err(internal)?;
    Ok(Json(PmasResponse {
        scores: fit.scores,
        n_comparisons: records.len(),
    }))
}

pub fn serve_blocking(args: ServeArgs, seed: u64) -> anyhow::Result<()> {
    let state = Arc::new(AppState::from_dir(
        &args.volumes,
        args.comparisons.clone(),
        seed,
    )?);
    let addr = format!("{}:{}", args.host, args.port);
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        eprintln!(
            "serving {} items ({} pairs) on http://{addr}",
            state.items.len(),
            state.schedule.len()
        );
        axum::serve(listener, app(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
