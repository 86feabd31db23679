//! Seeded work assignment for both protocols.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BlindCandidate, EvalAssignment, REFERENCE_SYSTEM};

const QUEUE_STREAM: u64 = 1;
const ASSIGNMENT_STREAM: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Round-robin over a seeded shuffle: position `k` goes to annotators
/// `k, k+1, .., k+overlap-1` (mod count).
fn round_robin(count: usize, annotators: usize, overlap: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, Vec<usize>)> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let overlap = overlap.clamp(1, annotators.max(1));
    order
        .into_iter()
        .enumerate()
        .map(|(k, item)| (item, (0..overlap).map(|j| (k + j) % annotators).collect()))
        .collect()
}

/// Per-annotator queues of pair ids for the 3-step protocol.
pub fn build_annotation_queues(
    pair_ids: &[String],
    annotators: &[String],
    seed: u64,
    overlap: usize,
) -> BTreeMap<String, Vec<String>> {
    let mut queues: BTreeMap<String, Vec<String>> = annotators.iter().map(|a| (a.clone(), Vec::new())).collect();
    if annotators.is_empty() {
        return queues;
    }
    let mut rng = rng(seed, QUEUE_STREAM);
    for (item, owners) in round_robin(pair_ids.len(), annotators.len(), overlap, &mut rng) {
        for a in owners {
            queues
                .get_mut(&annotators[a])
                .expect("queue exists")
                .push(pair_ids[item].clone());
        }
    }
    queues
}

fn fresh_label(rng: &mut ChaCha8Rng, taken: &BTreeSet<String>) -> String {
    loop {
        let label = format!("c{:06x}", rng.gen::<u32>() & 0x00ff_ffff);
        if !taken.contains(&label) {
            return label;
        }
    }
}

/// Blind evaluation assignments. Every assignment lists all `systems` plus
/// the reference, shuffled and relabelled; with `overlap` 1 each example
/// goes to exactly one annotator.
pub fn build_assignments(
    examples: &[String],
    systems: &[String],
    annotators: &[String],
    seed: u64,
    overlap: usize,
) -> Vec<EvalAssignment> {
    if annotators.is_empty() {
        return Vec::new();
    }
    let mut all: Vec<String> = systems
        .iter()
        .filter(|s| s.as_str() != REFERENCE_SYSTEM)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    all.push(REFERENCE_SYSTEM.to_string());

    let mut rng = rng(seed, ASSIGNMENT_STREAM);
    let mut out = Vec::new();
    for (item, owners) in round_robin(examples.len(), annotators.len(), overlap, &mut rng) {
        for a in owners {
            let mut order = all.clone();
            order.shuffle(&mut rng);
            let mut taken = BTreeSet::new();
            let candidates = order
                .into_iter()
                .map(|system_id| {
                    let label = fresh_label(&mut rng, &taken);
                    taken.insert(label.clone());
                    BlindCandidate { label, system_id }
                })
                .collect();
            out.push(EvalAssignment {
                annotator_id: annotators[a].clone(),
                example_id: examples[item].clone(),
                candidates,
                completed: false,
            });
        }
    }
    out
}

/// Aspect scores a completed campaign yields: four per candidate.
pub fn expected_scores(assignments: &[EvalAssignment]) -> usize {
    assignments.iter().map(|a| a.candidates.len() * 4).sum()
}
