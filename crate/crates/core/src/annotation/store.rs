//! Append-only JSON-lines store for submitted annotations and ratings.
//!
//! Every accepted submission is appended and synced before it is
//! acknowledged; opening a store replays the log. A resubmission for the
//! same (item, annotator) gets a new revision and replaces the earlier one.
//! Readers work on immutable snapshots; appends are serialized by a single
//! writer lock.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationRecord, Campaign, EvalAssignment, EvalRating, Protocol, RatingSubmission};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A settable clock for tests and reproducible runs.
pub struct FixedClock(AtomicU64);

impl FixedClock {
    pub fn new(ms: u64) -> Self {
        Self(AtomicU64::new(ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogEntry {
    Annotation {
        revision: u64,
        record: AnnotationRecord,
    },
    Rating {
        revision: u64,
        example_id: String,
        annotator_id: String,
        ratings: Vec<EvalRating>,
    },
}

type Key = (String, String);

#[derive(Debug, Clone, Default)]
struct State {
    /// (pair_id, annotator_id) → latest record.
    annotations: BTreeMap<Key, Arc<(u64, AnnotationRecord)>>,
    /// (example_id, annotator_id) → latest ratings for the assignment.
    ratings: BTreeMap<Key, Arc<(u64, Vec<EvalRating>)>>,
    revision: u64,
    log_entries: usize,
}

impl State {
    fn apply(&mut self, entry: LogEntry) -> bool {
        self.log_entries += 1;
        match entry {
            LogEntry::Annotation { revision, record } => {
                self.revision = self.revision.max(revision);
                let key = (record.pair_id.clone(), record.annotator_id.clone());
                self.annotations.insert(key, Arc::new((revision, record))).is_some()
            }
            LogEntry::Rating {
                revision,
                example_id,
                annotator_id,
                ratings,
            } => {
                self.revision = self.revision.max(revision);
                self.ratings
                    .insert((example_id, annotator_id), Arc::new((revision, ratings)))
                    .is_some()
            }
        }
    }

    fn live(&self) -> usize {
        self.annotations.len() + self.ratings.len()
    }

    fn entries(&self) -> Vec<LogEntry> {
        let mut out: Vec<LogEntry> = self
            .annotations
            .values()
            .map(|a| LogEntry::Annotation {
                revision: a.0,
                record: a.1.clone(),
            })
            .chain(self.ratings.iter().map(|((e, a), r)| LogEntry::Rating {
                revision: r.0,
                example_id: e.clone(),
                annotator_id: a.clone(),
                ratings: r.1.clone(),
            }))
            .collect();
        out.sort_by_key(|e| match e {
            LogEntry::Annotation { revision, .. } | LogEntry::Rating { revision, .. } => *revision,
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub revision: u64,
    /// True when an earlier submission for the same item was replaced.
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairView {
    /// 1-based position in the annotator's queue.
    pub index: usize,
    pub total: usize,
    pub pair_id: String,
    pub code: String,
    pub docstring: String,
    pub has_branch_blocks: bool,
    pub code_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindCandidateView {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentView {
    pub index: usize,
    pub total: usize,
    pub example_id: String,
    pub code: String,
    pub candidates: Vec<BlindCandidateView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NextItem {
    Pair(PairView),
    Assignment(AssignmentView),
    Done,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolProgress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub annotator_id: String,
    pub annotate3step: ProtocolProgress,
    pub eval4aspect: ProtocolProgress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub annotators: Vec<AnnotatorProgress>,
    pub annotate3step: ProtocolProgress,
    pub eval4aspect: ProtocolProgress,
}

struct LogWriter {
    file: File,
}

/// Obsolete entries tolerated before a submission triggers compaction.
const COMPACT_SLACK: usize = 1024;

pub struct AnnotationStore {
    campaign: Arc<Campaign>,
    items: HashMap<String, usize>,
    examples: HashMap<String, usize>,
    assignments: HashMap<Key, usize>,
    eval_queues: HashMap<String, Vec<usize>>,
    state: ArcSwap<State>,
    writer: Mutex<LogWriter>,
    path: PathBuf,
    clock: Box<dyn Clock>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> AnnotationError + '_ {
    move |source| AnnotationError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Replays `path`; a torn final line from an interrupted append is cut off.
fn replay(path: &Path) -> Result<State, AnnotationError> {
    let mut state = State::default();
    if !path.exists() {
        return Ok(state);
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        log::warn!(
            "{}: discarding {} bytes of an incomplete final entry",
            path.display(),
            bytes.len() - complete
        );
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(complete as u64).map_err(io_err(path))?;
        f.sync_all().map_err(io_err(path))?;
    }
    for (i, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line).map_err(|e| AnnotationError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        state.apply(entry);
    }
    Ok(state)
}

fn open_append(path: &Path) -> Result<File, AnnotationError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}

impl AnnotationStore {
    pub fn open(campaign: Campaign, log_path: &Path, clock: Box<dyn Clock>) -> Result<Self, AnnotationError> {
        campaign.validate()?;
        let state = replay(log_path)?;
        let file = open_append(log_path)?;
        let items = campaign
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.pair_id.clone(), i))
            .collect();
        let examples = campaign
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.example_id.clone(), i))
            .collect();
        let mut assignments = HashMap::new();
        let mut eval_queues: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, a) in campaign.assignments.iter().enumerate() {
            assignments.insert((a.example_id.clone(), a.annotator_id.clone()), i);
            eval_queues.entry(a.annotator_id.clone()).or_default().push(i);
        }
        Ok(Self {
            campaign: Arc::new(campaign),
            items,
            examples,
            assignments,
            eval_queues,
            state: ArcSwap::from_pointee(state),
            writer: Mutex::new(LogWriter { file }),
            path: log_path.to_path_buf(),
            clock,
        })
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    fn known(&self, annotator: &str) -> Result<(), AnnotationError> {
        if self.campaign.annotators.iter().any(|a| a == annotator) {
            Ok(())
        } else {
            Err(AnnotationError::UnknownAnnotator(annotator.to_string()))
        }
    }

    fn queue(&self, annotator: &str) -> &[String] {
        self.campaign.queues.get(annotator).map_or(&[], Vec::as_slice)
    }

    fn eval_queue(&self, annotator: &str) -> &[usize] {
        self.eval_queues.get(annotator).map_or(&[], Vec::as_slice)
    }

    /// The lowest-index incomplete item for the annotator.
    pub fn next_item(&self, annotator: &str, protocol: Protocol) -> Result<NextItem, AnnotationError> {
        self.known(annotator)?;
        let state = self.state.load();
        match protocol {
            Protocol::Annotate3Step => {
                let queue = self.queue(annotator);
                let pending = queue
                    .iter()
                    .position(|p| !state.annotations.contains_key(&(p.clone(), annotator.to_string())));
                Ok(match pending {
                    None => NextItem::Done,
                    Some(i) => {
                        let item = &self.campaign.items[self.items[&queue[i]]];
                        NextItem::Pair(PairView {
                            index: i + 1,
                            total: queue.len(),
                            pair_id: item.pair_id.clone(),
                            code: item.code.clone(),
                            docstring: item.docstring.clone(),
                            has_branch_blocks: item.has_branch_blocks,
                            code_lines: item.code_lines(),
                        })
                    }
                })
            }
            Protocol::Eval4Aspect => {
                let queue = self.eval_queue(annotator);
                let pending = queue.iter().position(|&a| {
                    let a = &self.campaign.assignments[a];
                    !state
                        .ratings
                        .contains_key(&(a.example_id.clone(), annotator.to_string()))
                });
                Ok(match pending {
                    None => NextItem::Done,
                    Some(i) => {
                        let a = &self.campaign.assignments[queue[i]];
                        let example = &self.campaign.examples[self.examples[&a.example_id]];
                        let candidates = a
                            .candidates
                            .iter()
                            .map(|c| BlindCandidateView {
                                label: c.label.clone(),
                                text: example.text_for(&c.system_id).expect("validated campaign").to_string(),
                            })
                            .collect();
                        NextItem::Assignment(AssignmentView {
                            index: i + 1,
                            total: queue.len(),
                            example_id: a.example_id.clone(),
                            code: example.code.clone(),
                            candidates,
                        })
                    }
                })
            }
        }
    }

    fn append(&self, make: impl FnOnce(u64) -> (LogEntry, String)) -> Result<Ack, AnnotationError> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.state.load_full();
        let revision = current.revision + 1;
        let (entry, what) = make(revision);
        let mut line = serde_json::to_string(&entry).expect("log entries serialize");
        line.push('\n');
        let err = io_err(&self.path);
        writer.file.write_all(line.as_bytes()).map_err(&err)?;
        writer.file.sync_data().map_err(&err)?;

        let mut next = (*current).clone();
        let replaced = next.apply(entry);
        if replaced {
            log::info!("revision {revision} replaces earlier submission for {what}");
        }
        let compact = next.log_entries > next.live() + COMPACT_SLACK;
        self.state.store(Arc::new(next));
        if compact {
            self.compact_locked(&mut writer)?;
        }
        Ok(Ack { revision, replaced })
    }

    pub fn submit_annotation(&self, mut record: AnnotationRecord) -> Result<Ack, AnnotationError> {
        self.known(&record.annotator_id)?;
        if !self.queue(&record.annotator_id).contains(&record.pair_id) {
            return Err(AnnotationError::NotAssigned {
                annotator: record.annotator_id,
                item: record.pair_id,
            });
        }
        let item = &self.campaign.items[self.items[&record.pair_id]];
        record.validate(item)?;
        record.timestamp = self.clock.now_ms();
        let what = format!("pair {} by {}", record.pair_id, record.annotator_id);
        self.append(|revision| (LogEntry::Annotation { revision, record }, what))
    }

    /// Stores all ratings of one assignment at once, or none of them.
    pub fn submit_rating(&self, submission: RatingSubmission) -> Result<Ack, AnnotationError> {
        self.known(&submission.annotator_id)?;
        let key = (submission.example_id.clone(), submission.annotator_id.clone());
        let Some(&index) = self.assignments.get(&key) else {
            return Err(AnnotationError::NotAssigned {
                annotator: submission.annotator_id,
                item: submission.example_id,
            });
        };
        let ratings = submission.resolve(&self.campaign.assignments[index], self.clock.now_ms())?;
        let what = format!("example {} by {}", key.0, key.1);
        self.append(|revision| {
            (
                LogEntry::Rating {
                    revision,
                    example_id: key.0,
                    annotator_id: key.1,
                    ratings,
                },
                what,
            )
        })
    }

    pub fn progress(&self) -> Progress {
        let state = self.state.load();
        let mut annotators = Vec::new();
        let (mut ann_total, mut eval_total) = (ProtocolProgress::default(), ProtocolProgress::default());
        for a in &self.campaign.annotators {
            let queue = self.queue(a);
            let three = ProtocolProgress {
                done: queue
                    .iter()
                    .filter(|p| state.annotations.contains_key(&((*p).clone(), a.clone())))
                    .count(),
                total: queue.len(),
            };
            let evals = self.eval_queue(a);
            let four = ProtocolProgress {
                done: evals
                    .iter()
                    .filter(|&&i| {
                        let key = (self.campaign.assignments[i].example_id.clone(), a.clone());
                        state.ratings.contains_key(&key)
                    })
                    .count(),
                total: evals.len(),
            };
            ann_total.done += three.done;
            ann_total.total += three.total;
            eval_total.done += four.done;
            eval_total.total += four.total;
            annotators.push(AnnotatorProgress {
                annotator_id: a.clone(),
                annotate3step: three,
                eval4aspect: four,
            });
        }
        Progress {
            annotators,
            annotate3step: ann_total,
            eval4aspect: eval_total,
        }
    }

    /// Current annotation records, ordered by (pair id, annotator id).
    pub fn annotations(&self) -> Vec<AnnotationRecord> {
        self.state.load().annotations.values().map(|a| a.1.clone()).collect()
    }

    /// Current ratings, ordered by (example id, annotator id) then
    /// presentation order.
    pub fn ratings(&self) -> Vec<EvalRating> {
        self.state
            .load()
            .ratings
            .values()
            .flat_map(|r| r.1.iter().cloned())
            .collect()
    }

    /// The annotator's assignments with completion filled in.
    pub fn assignments_for(&self, annotator: &str) -> Result<Vec<EvalAssignment>, AnnotationError> {
        self.known(annotator)?;
        let state = self.state.load();
        Ok(self
            .eval_queue(annotator)
            .iter()
            .map(|&i| {
                let mut a = self.campaign.assignments[i].clone();
                a.completed = state
                    .ratings
                    .contains_key(&(a.example_id.clone(), annotator.to_string()));
                a
            })
            .collect())
    }

    /// Rewrites the log with only the live entries.
    pub fn compact(&self) -> Result<(), AnnotationError> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        self.compact_locked(&mut writer)
    }

    fn compact_locked(&self, writer: &mut LogWriter) -> Result<(), AnnotationError> {
        let err = io_err(&self.path);
        let current = self.state.load_full();
        let tmp = self.path.with_extension("compact.tmp");
        {
            let mut f = File::create(&tmp).map_err(&err)?;
            for entry in current.entries() {
                let line = serde_json::to_string(&entry).expect("log entries serialize");
                writeln!(f, "{line}").map_err(&err)?;
            }
            f.sync_all().map_err(&err)?;
        }
        fs::rename(&tmp, &self.path).map_err(&err)?;
        writer.file = open_append(&self.path)?;
        let mut next = (*current).clone();
        next.log_entries = next.live();
        self.state.store(Arc::new(next));
        log::info!("compacted {} to {} entries", self.path.display(), current.live());
        Ok(())
    }
}
