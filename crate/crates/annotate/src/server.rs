use crate::error::ApiError;
use crate::queue::{AnnotationQueue, AnnotationTask, Choice, Pending, Progress};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use stylespace::data::{append_label, load_labels, load_triplets, DatasetManifest, TripletLabel};
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 8377;

const INDEX_HTML: &str = include_str!("../assets/index.html");
const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Source of "now" in unix seconds; injectable so lease expiry is testable.
pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    })
}

/// A loaded corpus: manifest, triplet queue and the label file it appends to.
pub struct Corpus {
    manifest: DatasetManifest,
    labels_path: PathBuf,
    // Queue updates and label appends happen under this one lock, so records
    // are written whole and in commit order.
    queue: Mutex<AnnotationQueue>,
}

impl Corpus {
    /// Loads the manifest and triplet file; labels already in `labels_path`
    /// mark their triplets as done.
    pub fn open(manifest_path: &Path, triplets_path: &Path, labels_path: &Path, seed: u64) -> Result<Self, ApiError> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let triplets = load_triplets(triplets_path)?;
        Self::new(manifest, triplets, labels_path, seed)
    }

    pub fn new(
        manifest: DatasetManifest,
        triplets: Vec<stylespace::data::Triplet>,
        labels_path: &Path,
        seed: u64,
    ) -> Result<Self, ApiError> {
        for t in &triplets {
            for id in std::iter::once(&t.anchor).chain(&t.candidates) {
                if !manifest.contains(id) {
                    return Err(ApiError::Internal(format!("triplet references unknown image {id}")));
                }
            }
        }
        let stored = if labels_path.exists() {
            load_labels(labels_path, Some(&manifest))?
        } else {
            Vec::new()
        };
        let queue = AnnotationQueue::new(triplets, &stored, seed)?;
        log::info!("annotation queue: {:?}", queue.progress());
        Ok(Self {
            manifest,
            labels_path: labels_path.to_path_buf(),
            queue: Mutex::new(queue),
        })
    }

    fn queue(&self) -> std::sync::MutexGuard<'_, AnnotationQueue> {
        // A panic mid-update cannot leave the queue half-written: every
        // mutation is a single commit after the append succeeded.
        self.queue.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn progress(&self) -> Progress {
        self.queue().progress()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub corpus: Option<Arc<Corpus>>,
    pub clock: Clock,
    /// Directory of built UI assets; the bundled page is served when absent.
    pub ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(corpus: Option<Corpus>) -> Self {
        Self {
            corpus: corpus.map(Arc::new),
            clock: system_clock(),
            ui_dir: None,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ui_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.ui_dir = Some(dir.into());
        self
    }

    fn corpus(&self) -> Result<&Corpus, ApiError> {
        self.corpus.as_deref().ok_or(ApiError::NoCorpus)
    }
}

#[derive(Deserialize)]
struct LabelRequest {
    task_id: String,
    choice: String,
    annotator: String,
}

async fn next_task(State(s): State<AppState>) -> Result<Response, ApiError> {
    let corpus = s.corpus()?;
    let now = (s.clock)();
    let task: Option<AnnotationTask> = corpus.queue().next_task(now);
    Ok(match task {
        Some(t) => Json(t).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit_label(
    State(s): State<AppState>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<TripletLabel>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let corpus = s.corpus()?;
    let choice: Choice = req.choice.parse()?;
    let now = (s.clock)();
    let mut queue = corpus.queue();
    match queue.prepare(&req.task_id, choice, &req.annotator, now)? {
        Pending::Duplicate(label) => Ok((StatusCode::CREATED, Json(label))),
        Pending::New(label) => {
            label.validate(Some(&corpus.manifest))?;
            append_label(&corpus.labels_path, &label)?;
            queue.commit(&req.task_id, choice, label.clone());
            Ok((StatusCode::CREATED, Json(label)))
        }
    }
}

async fn progress(State(s): State<AppState>) -> Result<Json<Progress>, ApiError> {
    Ok(Json(s.corpus()?.progress()))
}

async fn image(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let corpus = s.corpus()?;
    let record = corpus
        .manifest
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no image {id}")))?;
    let bytes = tokio::fs::read(corpus.manifest.resolve(record))
        .await
        .map_err(|e| ApiError::NotFound(format!("image {id}: {e}")))?;
    if !bytes.starts_with(PNG_MAGIC) {
        return Err(ApiError::Internal(format!("image {id} is not a PNG file")));
    }
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/task", get(next_task))
        .route("/api/label", post(submit_label))
        .route("/api/progress", get(progress))
        .route("/images/{id}", get(image));
    let app = match &state.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)),
    };
    app.with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("annotation service listening on http://{addr}");
    }
    axum::serve(listener, router(state)).await
}
