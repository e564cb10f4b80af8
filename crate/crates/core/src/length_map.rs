//! The persistent problem -> target-length map M.
//!
//! Discovery overwrites the target each step with the fresh statistic — the
//! map should track current capability, not history — and resets to the
//! default (max generation length, 4096) when a step produces no correct
//! responses. Internalization ratchets: min(old, new) once a problem has
//! ever been solved, plain set on the first solve, and no change on an
//! empty sample.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{select_target, TargetStatistic};
use crate::types::CorrectLengthSample;

pub const DEFAULT_TARGET: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub target: u32,
    pub ever_solved: bool,
}

/// The map M. BTreeMap keeps serialized keys sorted, so saved files diff
/// deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthMap {
    pub default_target: u32,
    pub entries: BTreeMap<String, MapEntry>,
}

impl Default for LengthMap {
    fn default() -> Self {
        LengthMap::new(DEFAULT_TARGET)
    }
}

impl LengthMap {
    pub fn new(default_target: u32) -> Self {
        LengthMap {
            default_target,
            entries: BTreeMap::new(),
        }
    }

    /// n = M(q): the stored target, or the exploration default for unknown
    /// (or never-solved) problems.
    pub fn get_target(&self, problem_id: &str) -> u32 {
        self.entries
            .get(problem_id)
            .map(|e| e.target)
            .unwrap_or(self.default_target)
    }

    pub fn ever_solved(&self, problem_id: &str) -> bool {
        self.entries
            .get(problem_id)
            .map(|e| e.ever_solved)
            .unwrap_or(false)
    }

    /// Discovery update (Eq. 3): overwrite with the fresh statistic; an
    /// empty sample resets the target to the default so later steps explore
    /// at full length again. `ever_solved` flips to true only on a solve.
    pub fn update_discovery(
        &mut self,
        problem_id: &str,
        sample: &CorrectLengthSample,
        stat: TargetStatistic,
    ) {
        if sample.is_empty() {
            let solved = self.ever_solved(problem_id);
            self.entries.insert(
                problem_id.to_string(),
                MapEntry {
                    target: self.default_target,
                    ever_solved: solved,
                },
            );
            return;
        }
        let target = select_target(sample, stat)
            .expect("non-empty sample")
            .clamp(1, self.default_target);
        self.entries.insert(
            problem_id.to_string(),
            MapEntry {
                target,
                ever_solved: true,
            },
        );
    }

    /// Internalization dual-strategy update: min-ratchet once solved, plain
    /// set on the first solve, keep-previous on an empty sample.
    pub fn update_internalization(
        &mut self,
        problem_id: &str,
        sample: &CorrectLengthSample,
        stat: TargetStatistic,
    ) {
        if sample.is_empty() {
            return;
        }
        let fresh = select_target(sample, stat)
            .expect("non-empty sample")
            .clamp(1, self.default_target);
        let target = if self.ever_solved(problem_id) {
            self.get_target(problem_id).min(fresh)
        } else {
            fresh
        };
        self.entries.insert(
            problem_id.to_string(),
            MapEntry {
                target,
                ever_solved: true,
            },
        );
    }

    fn validate(&self) -> Result<()> {
        if self.default_target == 0 {
            return Err(Error::config("length map default_target must be >= 1"));
        }
        for (id, entry) in &self.entries {
            if entry.target == 0 || entry.target > self.default_target {
                return Err(Error::config(format!(
                    "length map entry {id:?}: target {} outside [1, {}]",
                    entry.target, self.default_target
                )));
            }
            if !entry.ever_solved && entry.target != self.default_target {
                return Err(Error::config(format!(
                    "length map entry {id:?}: never solved but target {} != default {}",
                    entry.target, self.default_target
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("map serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: LengthMap = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        map.validate()?;
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: &[u32]) -> CorrectLengthSample {
        CorrectLengthSample::new(v.to_vec())
    }

    #[test]
    fn unknown_id_gets_default() {
        let map = LengthMap::default();
        assert_eq!(map.get_target("nope"), 4096);
    }

    #[test]
    fn discovery_overwrites_not_min() {
        let mut map = LengthMap::default();
        map.update_discovery("q", &sample(&[900]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 900);
        // a longer median later overwrites upward — Discovery tracks, never ratchets
        map.update_discovery("q", &sample(&[1200]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 1200);
    }

    #[test]
    fn discovery_empty_sample_resets_to_default() {
        let mut map = LengthMap::default();
        map.update_discovery("q", &sample(&[900]), TargetStatistic::Median);
        map.update_discovery("q", &sample(&[]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 4096);
        // solve history survives the reset
        assert!(map.ever_solved("q"));
    }

    #[test]
    fn discovery_empty_sample_on_fresh_id_stays_unsolved() {
        let mut map = LengthMap::default();
        map.update_discovery("q", &sample(&[]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 4096);
        assert!(!map.ever_solved("q"));
    }

    #[test]
    fn internalization_min_ratchet() {
        let mut map = LengthMap::default();
        map.update_internalization("q", &sample(&[1000]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 1000);
        // larger median does not raise the target
        map.update_internalization("q", &sample(&[1200]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 1000);
        // smaller one lowers it
        map.update_internalization("q", &sample(&[800]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 800);
    }

    #[test]
    fn internalization_first_solve_sets_plainly() {
        let mut map = LengthMap::default();
        map.update_internalization("q", &sample(&[800]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 800);
        assert!(map.ever_solved("q"));
    }

    #[test]
    fn internalization_empty_sample_keeps_previous() {
        let mut map = LengthMap::default();
        map.update_internalization("q", &sample(&[1000]), TargetStatistic::Median);
        map.update_internalization("q", &sample(&[]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 1000);
        // and on a fresh id it stays absent entirely
        map.update_internalization("r", &sample(&[]), TargetStatistic::Median);
        assert!(!map.entries.contains_key("r"));
    }

    #[test]
    fn internalization_idempotent() {
        let mut map = LengthMap::default();
        map.update_internalization("q", &sample(&[700, 900]), TargetStatistic::Median);
        let once = map.clone();
        map.update_internalization("q", &sample(&[700, 900]), TargetStatistic::Median);
        assert_eq!(map, once);
    }

    #[test]
    fn targets_clamp_to_default_ceiling() {
        let mut map = LengthMap::new(500);
        map.update_discovery("q", &sample(&[900]), TargetStatistic::Median);
        assert_eq!(map.get_target("q"), 500);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        let mut map = LengthMap::default();
        map.update_discovery("a", &sample(&[100]), TargetStatistic::Median);
        map.update_discovery("b", &sample(&[200, 400]), TargetStatistic::Median);
        map.update_discovery("c", &sample(&[]), TargetStatistic::Median);
        map.save(&path).unwrap();
        assert_eq!(LengthMap::load(&path).unwrap(), map);
    }

    #[test]
    fn load_rejects_invalid_files() {
        let dir = tempfile::tempdir().unwrap();
        let zero = dir.path().join("zero.json");
        std::fs::write(
            &zero,
            r#"{"default_target":4096,"entries":{"q":{"target":0,"ever_solved":true}}}"#,
        )
        .unwrap();
        assert!(LengthMap::load(&zero).is_err());

        let unsolved = dir.path().join("unsolved.json");
        std::fs::write(
            &unsolved,
            r#"{"default_target":4096,"entries":{"q":{"target":100,"ever_solved":false}}}"#,
        )
        .unwrap();
        assert!(LengthMap::load(&unsolved).is_err());

        let empty = dir.path().join("empty.json");
        std::fs::write(&empty, "").unwrap();
        assert!(LengthMap::load(&empty).is_err());
    }
}
