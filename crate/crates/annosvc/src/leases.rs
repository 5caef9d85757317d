use std::collections::{BTreeMap, BTreeSet};

use affectline_core::corpus::Task;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub id: String,
    pub task: Task,
    pub round: u32,
    pub post_ids: Vec<String>,
    pub owner: String,
    pub expires_at: i64,
}

/// Outstanding leases. A post is in at most one unexpired batch per task.
#[derive(Debug, Default)]
pub struct LeaseTable {
    active: BTreeMap<String, Batch>,
    issued: BTreeSet<String>,
    seq: u64,
}

pub enum Lookup<'a> {
    Live(&'a Batch),
    Stale,
    Unknown,
}

impl LeaseTable {
    pub fn purge_expired(&mut self, now: i64) {
        self.active.retain(|_, b| b.expires_at > now);
    }

    pub fn leased(&self, task: Task) -> BTreeSet<&str> {
        self.active
            .values()
            .filter(|b| b.task == task)
            .flat_map(|b| b.post_ids.iter().map(String::as_str))
            .collect()
    }

    pub fn issue(&mut self, prefix: &str, task: Task, round: u32, post_ids: Vec<String>, owner: &str, expires_at: i64) -> Batch {
        self.seq += 1;
        let batch = Batch {
            id: format!("{prefix}-{}", self.seq),
            task,
            round,
            post_ids,
            owner: owner.to_string(),
            expires_at,
        };
        self.issued.insert(batch.id.clone());
        self.active.insert(batch.id.clone(), batch.clone());
        batch
    }

    pub fn lookup(&self, id: &str, now: i64) -> Lookup<'_> {
        match self.active.get(id) {
            Some(b) if b.expires_at > now => Lookup::Live(b),
            Some(_) => Lookup::Stale,
            None if self.issued.contains(id) => Lookup::Stale,
            None => Lookup::Unknown,
        }
    }

    pub fn complete(&mut self, id: &str) {
        self.active.remove(id);
    }
}
