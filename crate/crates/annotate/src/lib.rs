//! Triplet annotation service.
//!
//! Hands out one triplet at a time (anchor plus two candidates in random
//! left/right order) and appends the annotator's choice to the label file as
//! a [`TripletLabel`](stylespace::data::TripletLabel). Issued tasks are leased
//! for ten minutes; an unanswered task goes back into the queue afterwards.
//!
//! ```text
//! GET  /api/task      200 {"task_id","anchor","left","right"} | 204 nothing to issue | 409 no corpus
//! POST /api/label     {"task_id","choice":"left"|"right","annotator"} -> 201 label | 400 | 410
//! GET  /api/progress  200 {"labeled","total"}
//! GET  /images/{id}   200 image/png | 404
//! GET  /              annotation page
//! ```

pub mod error;
pub mod queue;
pub mod server;

pub use error::ApiError;
pub use queue::{AnnotationQueue, AnnotationTask, Choice, Pending, Progress, LEASE_SECS};
pub use server::{router, serve, system_clock, AppState, Clock, Corpus, DEFAULT_PORT};
