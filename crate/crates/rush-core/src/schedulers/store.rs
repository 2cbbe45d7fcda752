//! The persistent incumbent set A*: winners of previous tasks, in insertion
//! order, with optional FIFO capacity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::ArmId;

#[derive(Debug, Error)]
pub enum StoreFormatError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid incumbent store: {0}")]
    Invalid(String),
}

/// Insertion-ordered set of past winning arms.
///
/// `update` is idempotent: a winner already present leaves the store (and
/// its insertion order) untouched. When a capacity is set, inserting past it
/// evicts the oldest entry first.
///
/// Serializes as `{"cap": <int or null>, "entries": [ids in insertion
/// order]}` and round-trips exactly; `null` means unlimited.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncumbentStore {
    cap: Option<usize>,
    entries: Vec<ArmId>,
}

impl IncumbentStore {
    pub fn new(cap: Option<usize>) -> Self {
        IncumbentStore {
            cap,
            entries: Vec::new(),
        }
    }

    pub fn unbounded() -> Self {
        IncumbentStore::new(None)
    }

    pub fn with_cap(cap: usize) -> Self {
        IncumbentStore::new(Some(cap))
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn entries(&self) -> &[ArmId] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, arm: &ArmId) -> bool {
        self.entries.iter().any(|a| a == arm)
    }

    /// Records a task winner: no-op if present, else append and FIFO-evict
    /// past the capacity.
    pub fn update(&mut self, winner: ArmId) {
        if self.contains(&winner) {
            return;
        }
        self.entries.push(winner);
        if let Some(cap) = self.cap {
            while self.entries.len() > cap {
                self.entries.remove(0);
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("store serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, StoreFormatError> {
        let store: IncumbentStore = serde_json::from_str(s)?;
        if store.cap == Some(0) {
            return Err(StoreFormatError::Invalid("cap must be positive".into()));
        }
        if let Some(cap) = store.cap {
            if store.entries.len() > cap {
                return Err(StoreFormatError::Invalid(format!(
                    "{} entries exceed cap {cap}",
                    store.entries.len()
                )));
            }
        }
        for (i, a) in store.entries.iter().enumerate() {
            if a.is_empty() {
                return Err(StoreFormatError::Invalid("empty arm id".into()));
            }
            if store.entries[..i].contains(a) {
                return Err(StoreFormatError::Invalid(format!("duplicate entry `{a}`")));
            }
        }
        Ok(store)
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// update(update(S, a), a) = update(S, a)
        #[test]
        fn update_is_idempotent(
            ids in proptest::collection::vec(0u8..12, 0..20),
            winner in 0u8..12,
            cap in proptest::option::of(1usize..6),
        ) {
            let mut store = IncumbentStore::new(cap);
            for i in ids {
                store.update(ArmId::new(format!("a{i}")));
            }
            let winner = ArmId::new(format!("a{winner}"));
            let mut once = store.clone();
            once.update(winner.clone());
            let mut twice = once.clone();
            twice.update(winner);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn json_round_trips(
            ids in proptest::collection::vec(0u8..20, 0..10),
            cap in proptest::option::of(1usize..8),
        ) {
            let mut store = IncumbentStore::new(cap);
            for i in ids {
                store.update(ArmId::new(format!("a{i}")));
            }
            let back = IncumbentStore::from_json(&store.to_json()).unwrap();
            prop_assert_eq!(back, store);
        }
    }
}
