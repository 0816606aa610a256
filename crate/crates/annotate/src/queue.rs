//! Task queue: which triplets are labelled, which are leased out, and to whom.

use crate::error::ApiError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use stylespace::data::{Triplet, TripletLabel};

/// How long an issued task stays reserved for its session.
pub const LEASE_SECS: i64 = 600;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    #[serde(rename = "anchor")]
    pub anchor_id: String,
    #[serde(rename = "left")]
    pub left_id: String,
    #[serde(rename = "right")]
    pub right_id: String,
    #[serde(skip)]
    pub issued_at: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
}

impl std::str::FromStr for Choice {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, ApiError> {
        match s {
            "left" => Ok(Choice::Left),
            "right" => Ok(Choice::Right),
            other => Err(ApiError::BadRequest(format!(
                "choice must be \"left\" or \"right\", got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub labeled: usize,
    pub total: usize,
}

struct Lease {
    task: AnnotationTask,
    triplet: usize,
}

struct Done {
    choice: Choice,
    annotator: String,
    label: TripletLabel,
}

/// Outcome of validating a submission, before anything is persisted.
#[derive(Debug)]
pub enum Pending {
    /// Exact repeat of an accepted submission; nothing new to store.
    Duplicate(TripletLabel),
    New(TripletLabel),
}

pub struct AnnotationQueue {
    triplets: Vec<Triplet>,
    labeled: Vec<bool>,
    open: HashMap<String, Lease>,
    issued: HashMap<usize, String>,
    done: HashMap<String, Done>,
    rng: ChaCha8Rng,
    counter: u64,
}

impl AnnotationQueue {
    /// Builds the queue; triplets whose anchor already has a stored label
    /// count as done.
    pub fn new(triplets: Vec<Triplet>, stored: &[TripletLabel], seed: u64) -> Result<Self, ApiError> {
        let mut anchors = HashSet::new();
        for t in &triplets {
            let [l, r] = &t.candidates;
            if t.anchor == *l || t.anchor == *r || l == r {
                return Err(ApiError::Internal(format!("triplet for {} repeats an id", t.anchor)));
            }
            if !anchors.insert(t.anchor.as_str()) {
                return Err(ApiError::Internal(format!(
                    "anchor {} appears in more than one triplet",
                    t.anchor
                )));
            }
        }
        let labeled_anchors: HashSet<&str> = stored.iter().map(|l| l.anchor.as_str()).collect();
        let labeled = triplets
            .iter()
            .map(|t| labeled_anchors.contains(t.anchor.as_str()))
            .collect();
        Ok(Self {
            triplets,
            labeled,
            open: HashMap::new(),
            issued: HashMap::new(),
            done: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        })
    }

    fn expire(&mut self, now: i64) {
        let stale: Vec<String> = self
            .open
            .iter()
            .filter(|(_, l)| now - l.task.issued_at >= LEASE_SECS)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            if let Some(l) = self.open.remove(&id) {
                self.issued.remove(&l.triplet);
                log::info!("lease {id} on {} expired", l.task.anchor_id);
            }
        }
    }

    /// First unlabelled triplet not leased to anyone, or `None` when every
    /// remaining triplet is either labelled or out on an unexpired lease.
    pub fn next_task(&mut self, now: i64) -> Option<AnnotationTask> {
        self.expire(now);
        let i = (0..self.triplets.len()).find(|i| !self.labeled[*i] && !self.issued.contains_key(i))?;
        let t = &self.triplets[i];
        let [a, b] = &t.candidates;
        let (left, right) = if self.rng.random_bool(0.5) { (b, a) } else { (a, b) };
        self.counter += 1;
        let task_id = format!("t{}-{:08x}", self.counter, self.rng.random::<u32>());
        let task = AnnotationTask {
            task_id: task_id.clone(),
            anchor_id: t.anchor.clone(),
            left_id: left.clone(),
            right_id: right.clone(),
            issued_at: now,
        };
        self.issued.insert(i, task_id.clone());
        self.open.insert(
            task_id,
            Lease {
                task: task.clone(),
                triplet: i,
            },
        );
        Some(task)
    }

    /// Whether every triplet is labelled (as opposed to merely leased out).
    pub fn exhausted(&self) -> bool {
        self.labeled.iter().all(|l| *l)
    }

    /// Checks a submission and builds its label without changing any state.
    pub fn prepare(&self, task_id: &str, choice: Choice, annotator: &str, now: i64) -> Result<Pending, ApiError> {
        if annotator.trim().is_empty() {
            return Err(ApiError::BadRequest("annotator must not be empty".into()));
        }
        if let Some(d) = self.done.get(task_id) {
            if d.choice == choice && d.annotator == annotator {
                return Ok(Pending::Duplicate(d.label.clone()));
            }
            return Err(ApiError::Gone(format!("task {task_id} is already labelled")));
        }
        let lease = self
            .open
            .get(task_id)
            .ok_or_else(|| ApiError::Gone(format!("unknown or expired task {task_id}")))?;
        if now - lease.task.issued_at >= LEASE_SECS {
            return Err(ApiError::Gone(format!("task {task_id} expired")));
        }
        let t = &lease.task;
        let (positive, negative) = match choice {
            Choice::Left => (&t.left_id, &t.right_id),
            Choice::Right => (&t.right_id, &t.left_id),
        };
        Ok(Pending::New(TripletLabel {
            anchor: t.anchor_id.clone(),
            positive: positive.clone(),
            negative: negative.clone(),
            annotator: annotator.to_string(),
            labeled_at: now,
        }))
    }

    /// Records a prepared label as stored.
    pub fn commit(&mut self, task_id: &str, choice: Choice, label: TripletLabel) {
        if let Some(lease) = self.open.remove(task_id) {
            self.issued.remove(&lease.triplet);
            self.labeled[lease.triplet] = true;
            let annotator = label.annotator.clone();
            self.done.insert(
                task_id.to_string(),
                Done {
                    choice,
                    annotator,
                    label,
                },
            );
        }
    }

    pub fn progress(&self) -> Progress {
        Progress {
            labeled: self.labeled.iter().filter(|l| **l).count(),
            total: self.triplets.len(),
        }
    }
}
