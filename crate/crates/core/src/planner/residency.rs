use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::matrix::MatrixId;

/// Resident bytes went over a limit. `matrix` is `None` for the global
/// limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub matrix: Option<MatrixId>,
    pub resident: u64,
    pub limit: u64,
}

#[derive(Default)]
struct Account {
    limit: Option<u64>,
    current: u64,
    peak: u64,
}

#[derive(Default)]
struct TrackerState {
    accounts: HashMap<MatrixId, Account>,
    global_current: u64,
    global_peak: u64,
    violations: Vec<Violation>,
}

/// Instrumented accounting of resident block bytes, per matrix and in
/// total. Every charge is checked against the limits in force; breaches are
/// recorded, not prevented.
pub struct ResidencyTracker {
    global_limit: Option<u64>,
    state: Mutex<TrackerState>,
}

/// Bytes held against a tracker; released on drop.
pub struct Charge {
    tracker: Arc<ResidencyTracker>,
    matrix: MatrixId,
    bytes: u64,
}

impl Charge {
    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}

impl Drop for Charge {
    fn drop(&mut self) {
        self.tracker.release(self.matrix, self.bytes);
    }
}

impl std::fmt::Debug for Charge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Charge({}, {} bytes)", self.matrix, self.bytes)
    }
}

impl ResidencyTracker {
    pub fn new(global_limit: Option<u64>) -> Arc<Self> {
        Arc::new(ResidencyTracker {
            global_limit,
            state: Mutex::new(TrackerState::default()),
        })
    }

    pub fn global_limit(&self) -> Option<u64> {
        self.global_limit
    }

    pub fn set_limit(&self, matrix: MatrixId, limit: Option<u64>) {
        self.state.lock().unwrap().accounts.entry(matrix).or_default().limit = limit;
    }

    pub fn charge(self: &Arc<Self>, matrix: MatrixId, bytes: u64) -> Charge {
        let mut st = self.state.lock().unwrap();
        let acct = st.accounts.entry(matrix).or_default();
        acct.current += bytes;
        acct.peak = acct.peak.max(acct.current);
        let own = acct.limit.filter(|&l| acct.current > l).map(|limit| Violation {
            matrix: Some(matrix),
            resident: acct.current,
            limit,
        });
        st.global_current += bytes;
        st.global_peak = st.global_peak.max(st.global_current);
        let global = self.global_limit.filter(|&l| st.global_current > l).map(|limit| Violation {
            matrix: None,
            resident: st.global_current,
            limit,
        });
        st.violations.extend(own.into_iter().chain(global));
        Charge {
            tracker: Arc::clone(self),
            matrix,
            bytes,
        }
    }

    fn release(&self, matrix: MatrixId, bytes: u64) {
        let mut st = self.state.lock().unwrap();
        if let Some(a) = st.accounts.get_mut(&matrix) {
            a.current -= bytes;
        }
        st.global_current -= bytes;
    }

    /// Whether `bytes` more could be charged without breaching the global
    /// limit.
    pub fn fits_globally(&self, bytes: u64) -> bool {
        let st = self.state.lock().unwrap();
        self.global_limit.is_none_or(|l| st.global_current + bytes <= l)
    }

    pub fn current(&self, matrix: MatrixId) -> u64 {
        self.state.lock().unwrap().accounts.get(&matrix).map_or(0, |a| a.current)
    }

    pub fn peak(&self, matrix: MatrixId) -> u64 {
        self.state.lock().unwrap().accounts.get(&matrix).map_or(0, |a| a.peak)
    }

    /// Peak per matrix, sorted by id.
    pub fn peaks(&self) -> Vec<(MatrixId, u64)> {
        let st = self.state.lock().unwrap();
        let mut v: Vec<_> = st.accounts.iter().map(|(m, a)| (*m, a.peak)).collect();
        v.sort();
        v
    }

    pub fn global_current(&self) -> u64 {
        self.state.lock().unwrap().global_current
    }

    pub fn global_peak(&self) -> u64 {
        self.state.lock().unwrap().global_peak
    }

    pub fn violations(&self) -> Vec<Violation> {
        self.state.lock().unwrap().violations.clone()
    }
}

/// Directive: drop `key` from memory before `before_step` runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eviction<K> {
    pub key: K,
    pub before_step: usize,
}

/// Spill schedule for a plan. `steps[s]` lists the items (with their
/// bytes) step `s` needs resident. Under pressure the resident item whose
/// next use is farthest away is evicted first.
pub fn residency_check<K>(steps: &[Vec<(K, u64)>], global_limit: Option<u64>) -> Result<Vec<Eviction<K>>>
where
    K: Clone + Ord + Hash,
{
    let Some(limit) = global_limit else {
        return Ok(Vec::new());
    };
    let next_use = |key: &K, after: usize| -> usize {
        steps[after..]
            .iter()
            .position(|s| s.iter().any(|(k, _)| k == key))
            .map_or(usize::MAX, |d| after + d)
    };
    let mut resident: BTreeMap<K, u64> = BTreeMap::new();
    let mut schedule = Vec::new();
    for (s, needed) in steps.iter().enumerate() {
        let mut want: BTreeMap<K, u64> = BTreeMap::new();
        for (k, b) in needed {
            let e = want.entry(k.clone()).or_insert(0);
            *e = (*e).max(*b);
        }
        let need_total: u64 = want.values().sum();
        if need_total > limit {
            return Err(Error::BudgetInfeasible(format!(
                "step {s} needs {need_total} bytes resident at once, global limit is {limit}"
            )));
        }
        let incoming: u64 = want.iter().filter(|(k, _)| !resident.contains_key(*k)).map(|(_, b)| b).sum();
        let mut total: u64 = resident.values().sum::<u64>() + incoming;
        while total > limit {
            let victim = resident
                .iter()
                .filter(|(k, _)| !want.contains_key(*k))
                .max_by_key(|(k, b)| (next_use(k, s + 1), **b))
                .map(|(k, _)| k.clone())
                .expect("needed set fits, so something else is resident");
            total -= resident.remove(&victim).unwrap();
            schedule.push(Eviction {
                key: victim,
                before_step: s,
            });
        }
        for (k, b) in want {
            resident.insert(k, b);
        }
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MB: u64 = 1 << 20;

    #[test]
    fn everything_fits() {
        let steps = vec![vec![("a", MB)], vec![("b", MB)], vec![("a", MB), ("b", MB)]];
        assert!(residency_check(&steps, Some(3 * MB)).unwrap().is_empty());
        assert!(residency_check(&steps, None).unwrap().is_empty());
    }

    #[test]
    fn second_evicts_first() {
        let steps = vec![vec![("a", 2 * MB)], vec![("b", 2 * MB)]];
        let s = residency_check(&steps, Some(3 * MB)).unwrap();
        assert_eq!(
            s,
            vec![Eviction {
                key: "a",
                before_step: 1
            }]
        );
    }

    #[test]
    fn oversized_step_is_infeasible() {
        let steps = vec![vec![("a", 2 * MB), ("b", 2 * MB)]];
        assert!(matches!(residency_check(&steps, Some(3 * MB)), Err(Error::BudgetInfeasible(_))));
    }

    #[test]
    fn tracker_records_breaches() {
        let t = ResidencyTracker::new(Some(100));
        t.set_limit(MatrixId(1), Some(50));
        let a = t.charge(MatrixId(1), 40);
        assert!(t.violations().is_empty());
        let b = t.charge(MatrixId(1), 20);
        assert_eq!(t.violations().len(), 1);
        drop((a, b));
        assert_eq!(t.current(MatrixId(1)), 0);
        assert_eq!(t.peak(MatrixId(1)), 60);
        let _c = t.charge(MatrixId(2), 101);
        assert_eq!(t.violations().last().unwrap().matrix, None);
        assert_eq!(t.global_peak(), 101);
    }

    proptest! {
        #[test]
        fn replaying_schedule_never_exceeds_limit(
            steps in proptest::collection::vec(
                proptest::collection::vec((0u8..8, 1u64..50), 1..4), 1..30),
            limit in 150u64..400,
        ) {
            // one size per key
            let size = |k: u8| 1 + (k as u64 * 7) % 49;
            let steps: Vec<Vec<(u8, u64)>> = steps
                .into_iter()
                .map(|s| s.into_iter().map(|(k, _)| (k, size(k))).collect())
                .collect();
            let schedule = residency_check(&steps, Some(limit)).unwrap();
            let mut resident: BTreeMap<u8, u64> = BTreeMap::new();
            for (s, needed) in steps.iter().enumerate() {
                for e in schedule.iter().filter(|e| e.before_step == s) {
                    prop_assert!(resident.remove(&e.key).is_some());
                    prop_assert!(!needed.iter().any(|(k, _)| *k == e.key));
                }
                for (k, b) in needed {
                    resident.insert(*k, *b);
                }
                prop_assert!(resident.values().sum::<u64>() <= limit);
            }
        }
    }
}
