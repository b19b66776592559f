//! A single OpenFlow 1.0 flow table.
//!
//! Exact-match entries (no wildcard bits) are hashed by key and always win
//! over wildcarded ones. Wildcarded entries are kept sorted by priority,
//! highest first, with earlier insertion winning ties.

use std::collections::HashMap;

use crate::codec::{port, Action, FlowKey, FlowMod, FlowModCommand, OfMatch};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEntry {
    /// Insertion order; survives in-place replacement.
    pub id: u64,
    pub of_match: OfMatch,
    pub priority: u16,
    pub actions: Vec<Action>,
    pub idle_timeout: u16,
    pub hard_timeout: u16,
    pub cookie: u64,
    pub packets: u64,
    pub bytes: u64,
}

#[derive(Debug, Default, Clone)]
pub struct FlowTable {
    entries: HashMap<u64, FlowEntry>,
    exact: HashMap<FlowKey, Vec<u64>>,
    /// Wildcarded entry ids ordered by (priority desc, id asc).
    wild: Vec<u64>,
    next_id: u64,
    pub ignored_commands: u64,
}

impl FlowTable {
    pub fn new() -> FlowTable {
        FlowTable::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> Vec<&FlowEntry> {
        let mut v: Vec<_> = self.entries.values().collect();
        v.sort_by_key(|e| e.id);
        v
    }

    pub fn find_strict(&self, m: &OfMatch, priority: u16) -> Option<&FlowEntry> {
        self.strict_id(m, priority).map(|id| &self.entries[&id])
    }

    fn strict_id(&self, m: &OfMatch, priority: u16) -> Option<u64> {
        match m.exact_key() {
            Some(k) => self.exact.get(&k)?.iter().copied().find(|id| self.entries[id].priority == priority),
            None => self.wild.iter().copied().find(|id| {
                let e = &self.entries[id];
                e.priority == priority && e.of_match == *m
            }),
        }
    }

    fn best_exact(&self, ids: &[u64]) -> Option<u64> {
        ids.iter()
            .copied()
            .min_by_key(|id| (std::cmp::Reverse(self.entries[id].priority), *id))
    }

    /// The winning entry id for a packet, without touching counters.
    pub fn lookup_id(&self, key: &FlowKey) -> Option<u64> {
        if let Some(id) = self.exact.get(key).and_then(|ids| self.best_exact(ids)) {
            return Some(id);
        }
        self.wild.iter().copied().find(|id| self.entries[id].of_match.matches(key))
    }

    pub fn lookup(&self, key: &FlowKey) -> Option<&FlowEntry> {
        self.lookup_id(key).map(|id| &self.entries[&id])
    }

    /// Looks up and charges the winning entry with one packet of `len` bytes.
    pub fn hit(&mut self, key: &FlowKey, len: usize) -> Option<&FlowEntry> {
        let id = self.lookup_id(key)?;
        let e = self.entries.get_mut(&id).expect("indexed entry");
        e.packets += 1;
        e.bytes += len as u64;
        Some(e)
    }

    pub fn insert(&mut self, of_match: OfMatch, priority: u16, actions: Vec<Action>) -> u64 {
        self.insert_entry(of_match, priority, actions, 0, 0, 0)
    }

    fn insert_entry(&mut self, of_match: OfMatch, priority: u16, actions: Vec<Action>, idle: u16, hard: u16, cookie: u64) -> u64 {
        if let Some(id) = self.strict_id(&of_match, priority) {
            let e = self.entries.get_mut(&id).expect("indexed entry");
            e.actions = actions;
            e.idle_timeout = idle;
            e.hard_timeout = hard;
            e.cookie = cookie;
            e.packets = 0;
            e.bytes = 0;
            return id;
        }
        let id = self.next_id;
        self.next_id += 1;
        match of_match.exact_key() {
            Some(k) => self.exact.entry(k).or_default().push(id),
            None => {
                let pos = self.wild.partition_point(|w| self.entries[w].priority >= priority);
                self.wild.insert(pos, id);
            }
        }
        self.entries.insert(
            id,
            FlowEntry {
                id,
                of_match,
                priority,
                actions,
                idle_timeout: idle,
                hard_timeout: hard,
                cookie,
                packets: 0,
                bytes: 0,
            },
        );
        id
    }

    fn remove_id(&mut self, id: u64) -> Option<FlowEntry> {
        let e = self.entries.remove(&id)?;
        match e.of_match.exact_key() {
            Some(k) => {
                let ids = self.exact.get_mut(&k).expect("indexed key");
                ids.retain(|x| *x != id);
                if ids.is_empty() {
                    self.exact.remove(&k);
                }
            }
            None => self.wild.retain(|x| *x != id),
        }
        Some(e)
    }

    fn outputs_to(e: &FlowEntry, out_port: u16) -> bool {
        out_port == port::NONE
            || e.actions
                .iter()
                .any(|a| matches!(a, Action::Output { port, .. } if *port == out_port))
    }

    /// Removes every entry `m` covers. Returns the number removed.
    pub fn delete(&mut self, m: &OfMatch, out_port: u16) -> usize {
        let doomed: Vec<u64> = self
            .entries
            .values()
            .filter(|e| m.covers(&e.of_match) && Self::outputs_to(e, out_port))
            .map(|e| e.id)
            .collect();
        for id in &doomed {
            self.remove_id(*id);
        }
        doomed.len()
    }

    pub fn delete_strict(&mut self, m: &OfMatch, priority: u16) -> bool {
        self.strict_id(m, priority).and_then(|id| self.remove_id(id)).is_some()
    }

    pub fn apply(&mut self, fm: &FlowMod) {
        let (m, p) = (fm.of_match, fm.priority);
        match fm.command {
            FlowModCommand::Add => {
                self.insert_entry(m, p, fm.actions.clone(), fm.idle_timeout, fm.hard_timeout, fm.cookie);
            }
            FlowModCommand::Modify => {
                let ids: Vec<u64> = self.entries.values().filter(|e| m.covers(&e.of_match)).map(|e| e.id).collect();
                if ids.is_empty() {
                    self.insert_entry(m, p, fm.actions.clone(), fm.idle_timeout, fm.hard_timeout, fm.cookie);
                }
                for id in ids {
                    self.entries.get_mut(&id).expect("indexed entry").actions = fm.actions.clone();
                }
            }
            FlowModCommand::ModifyStrict => match self.strict_id(&m, p) {
                Some(id) => self.entries.get_mut(&id).expect("indexed entry").actions = fm.actions.clone(),
                None => {
                    self.insert_entry(m, p, fm.actions.clone(), fm.idle_timeout, fm.hard_timeout, fm.cookie);
                }
            },
            FlowModCommand::Delete => {
                self.delete(&m, fm.out_port);
            }
            FlowModCommand::DeleteStrict => {
                self.delete_strict(&m, p);
            }
            FlowModCommand::Other(_) => self.ignored_commands += 1,
        }
    }
}
