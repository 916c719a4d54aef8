//! Canonical contact-trace model: node identity, contact and visit records,
//! time windowing, and the per-period adjacency snapshot tensor.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("self-contact: node {0} paired with itself")]
    SelfContact(usize),
    #[error("invalid interval: start {start} > end {end}")]
    StartAfterEnd { start: f64, end: f64 },
    #[error("non-finite time in interval [{start}, {end}]")]
    NonFiniteTime { start: f64, end: f64 },
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
}

/// Bijective map between external node identifiers and dense indices `0..N`.
///
/// Indices are assigned in first-appearance order, so a registry built from
/// the same record stream is always identical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeRegistry {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the dense index for `id`, registering it if unseen.
    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), idx);
        idx
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// External ids in dense-index order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }
}

/// Builds a registry covering every id appearing in the given pairs,
/// in first-appearance order (left id of a pair before the right one).
pub fn register_nodes<I, S>(pairs: I) -> NodeRegistry
where
    I: IntoIterator<Item = (S, S)>,
    S: AsRef<str>,
{
    let mut reg = NodeRegistry::new();
    for (a, b) in pairs {
        reg.get_or_insert(a.as_ref());
        reg.get_or_insert(b.as_ref());
    }
    reg
}

/// An undirected contact between two nodes over a closed time interval
/// `[start, end]`, in trace-relative seconds. Stored canonically with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub a: usize,
    pub b: usize,
    pub start: f64,
    pub end: f64,
}

impl ContactEvent {
    /// Canonicalizes the node order; rejects self-contacts and inverted or
    /// non-finite intervals. Zero-length contacts (`start == end`) are valid.
    pub fn new(a: usize, b: usize, start: f64, end: f64) -> Result<Self, TraceError> {
        if a == b {
            return Err(TraceError::SelfContact(a));
        }
        if !start.is_finite() || !end.is_finite() {
            return Err(TraceError::NonFiniteTime { start, end });
        }
        if start > end {
            return Err(TraceError::StartAfterEnd { start, end });
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Ok(Self { a, b, start, end })
    }
}

/// A node dwelling at a location over a closed time interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationVisit {
    pub node: usize,
    pub location: usize,
    pub start: f64,
    pub end: f64,
}

impl LocationVisit {
    pub fn new(node: usize, location: usize, start: f64, end: f64) -> Result<Self, TraceError> {
        if !start.is_finite() || !end.is_finite() {
            return Err(TraceError::NonFiniteTime { start, end });
        }
        if start > end {
            return Err(TraceError::StartAfterEnd { start, end });
        }
        Ok(Self { node, location, start, end })
    }
}

/// Time windowing: `slice_count` consecutive slices of `slice_duration`
/// seconds starting at `origin`. Slice `k` (0-based) covers the half-open
/// interval `[origin + k*D, origin + (k+1)*D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    origin: f64,
    slice_duration: f64,
    slice_count: usize,
}

impl WindowConfig {
    pub fn new(origin: f64, slice_duration: f64, slice_count: usize) -> Result<Self, TraceError> {
        if !origin.is_finite() {
            return Err(TraceError::InvalidWindow(format!("non-finite origin {origin}")));
        }
        if !(slice_duration > 0.0) || !slice_duration.is_finite() {
            return Err(TraceError::InvalidWindow(format!(
                "slice duration must be positive and finite, got {slice_duration}"
            )));
        }
        if slice_count == 0 {
            return Err(TraceError::InvalidWindow("slice count must be >= 1".into()));
        }
        // +1 covers the ground-truth slice that follows the window.
        let span_end = origin + (slice_count as f64 + 1.0) * slice_duration;
        if !span_end.is_finite() {
            return Err(TraceError::InvalidWindow(
                "slice_count * slice_duration overflows the time domain".into(),
            ));
        }
        Ok(Self { origin, slice_duration, slice_count })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn slice_duration(&self) -> f64 {
        self.slice_duration
    }

    pub fn slice_count(&self) -> usize {
        self.slice_count
    }

    /// Bounds of observed slice `k` (0-based), half-open.
    pub fn slice_interval(&self, k: usize) -> (f64, f64) {
        let lo = self.origin + k as f64 * self.slice_duration;
        (lo, lo + self.slice_duration)
    }

    /// Bounds of the prediction-target slice that follows the window.
    pub fn truth_interval(&self) -> (f64, f64) {
        self.slice_interval(self.slice_count)
    }

    /// End of the observed window, `origin + T*D`.
    pub fn window_end(&self) -> f64 {
        self.origin + self.slice_count as f64 * self.slice_duration
    }
}

/// Symmetric binary adjacency over `n` nodes with zero diagonal,
/// stored as the canonical edge set `{(i, j) : i < j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self { n, edges: BTreeSet::new() }
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<(), TraceError> {
        if i == j {
            return Err(TraceError::SelfContact(i));
        }
        let max = i.max(j);
        if max >= self.n {
            return Err(TraceError::NodeOutOfRange { index: max, n: self.n });
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Canonical edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

/// Stack of per-period adjacency snapshots: slice `k` records which links
/// occurred at any point during `[origin + k*D, origin + (k+1)*D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTensor {
    n: usize,
    config: WindowConfig,
    slices: Vec<Adjacency>,
}

impl SnapshotTensor {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn slices(&self) -> &[Adjacency] {
        &self.slices
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    /// Union of all slice edge sets: every pair linked at least once
    /// during the observed window.
    pub fn union_support(&self) -> Adjacency {
        let mut union = Adjacency::empty(self.n);
        for slice in &self.slices {
            for (i, j) in slice.edges() {
                union.insert(i, j).expect("slice edges are in range");
            }
        }
        union
    }
}

/// A closed event interval `[s, e]` overlaps a half-open slice `[lo, hi)`
/// iff the intersection is nonempty. Zero-length events count toward the
/// slice containing their instant.
#[inline]
pub fn overlaps_slice(start: f64, end: f64, lo: f64, hi: f64) -> bool {
    start < hi && end >= lo
}

fn check_events(events: &[ContactEvent], n: usize) -> Result<(), TraceError> {
    for ev in events {
        if ev.b >= n {
            return Err(TraceError::NodeOutOfRange { index: ev.b, n });
        }
    }
    Ok(())
}

/// Candidate slice range for an event, padded by one slice on each side so
/// the exact overlap test decides every boundary case.
fn candidate_slices(cfg: &WindowConfig, start: f64, end: f64, last: usize) -> (usize, usize) {
    let d = cfg.slice_duration();
    let lo = ((start - cfg.origin()) / d).floor().max(0.0);
    let hi = ((end - cfg.origin()) / d).floor().max(0.0);
    let k_lo = (lo as usize).saturating_sub(1);
    let k_hi = ((hi as usize).saturating_add(1)).min(last);
    (k_lo, k_hi)
}

/// Builds the snapshot tensor: slice `k` gets the bit for `(i, j)` iff some
/// event on that pair overlaps the slice interval. Events wholly outside
/// the window are ignored.
pub fn build_tensor(
    events: &[ContactEvent],
    cfg: &WindowConfig,
    n: usize,
) -> Result<SnapshotTensor, TraceError> {
    check_events(events, n)?;
    let t = cfg.slice_count();
    let mut slices = vec![Adjacency::empty(n); t];
    for ev in events {
        let (k_lo, k_hi) = candidate_slices(cfg, ev.start, ev.end, t - 1);
        for (k, slice) in slices.iter_mut().enumerate().take(k_hi + 1).skip(k_lo) {
            let (lo, hi) = cfg.slice_interval(k);
            if overlaps_slice(ev.start, ev.end, lo, hi) {
                slice.insert(ev.a, ev.b)?;
            }
        }
    }
    Ok(SnapshotTensor { n, config: *cfg, slices })
}

/// Adjacency of the prediction-target period `[origin + T*D, origin + (T+1)*D)`,
/// with the same overlap rule as `build_tensor`.
pub fn ground_truth_slice(
    events: &[ContactEvent],
    cfg: &WindowConfig,
    n: usize,
) -> Result<Adjacency, TraceError> {
    check_events(events, n)?;
    let (lo, hi) = cfg.truth_interval();
    let mut truth = Adjacency::empty(n);
    for ev in events {
        if overlaps_slice(ev.start, ev.end, lo, hi) {
            truth.insert(ev.a, ev.b)?;
        }
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn registry_first_appearance_order() {
        let reg = register_nodes([("x", "y"), ("z", "x")]);
        assert_eq!(reg.len(), 3);
        assert_eq!(reg.index_of("x"), Some(0));
        assert_eq!(reg.index_of("y"), Some(1));
        assert_eq!(reg.index_of("z"), Some(2));
        assert_eq!(reg.id_of(2), Some("z"));
    }

    #[test]
    fn registry_empty_input() {
        let reg = register_nodes(Vec::<(&str, &str)>::new());
        assert!(reg.is_empty());
    }

    #[test]
    fn registry_duplicate_registration_is_idempotent() {
        let mut reg = NodeRegistry::new();
        assert_eq!(reg.get_or_insert("x"), 0);
        assert_eq!(reg.get_or_insert("x"), 0);
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn contact_event_canonicalizes_order() {
        let ev = ContactEvent::new(3, 1, 0.0, 5.0).unwrap();
        assert_eq!((ev.a, ev.b), (1, 3));
        assert_eq!(ContactEvent::new(2, 2, 0.0, 1.0), Err(TraceError::SelfContact(2)));
        assert!(matches!(
            ContactEvent::new(0, 1, 2.0, 1.0),
            Err(TraceError::StartAfterEnd { .. })
        ));
    }

    fn cfg(d: f64, t: usize) -> WindowConfig {
        WindowConfig::new(0.0, d, t).unwrap()
    }

    #[test]
    fn tensor_event_spanning_both_slices() {
        let events = [ContactEvent::new(0, 1, 0.0, 600.0).unwrap()];
        let tensor = build_tensor(&events, &cfg(300.0, 2), 2).unwrap();
        assert!(tensor.slices()[0].contains(0, 1));
        assert!(tensor.slices()[1].contains(0, 1));
    }

    /// Independent overlap oracle: expected slice bits computed straight
    /// from the interval definition, one slice at a time.
    fn oracle_bits(cfg: &WindowConfig, start: f64, end: f64) -> Vec<bool> {
        (0..cfg.slice_count())
            .map(|k| {
                let (lo, hi) = cfg.slice_interval(k);
                start < hi && end >= lo
            })
            .collect()
    }

    #[test]
    fn tensor_boundary_straddling_event_matches_overlap_oracle() {
        let c = cfg(300.0, 2);
        let events = [ContactEvent::new(0, 1, 290.0, 310.0).unwrap()];
        let tensor = build_tensor(&events, &c, 2).unwrap();
        let expected = oracle_bits(&c, 290.0, 310.0);
        assert_eq!(expected, vec![true, true]);
        for (k, want) in expected.iter().enumerate() {
            assert_eq!(tensor.slices()[k].contains(0, 1), *want, "slice {k}");
        }
    }

    #[test]
    fn tensor_event_beyond_window_is_ignored() {
        let events = [ContactEvent::new(0, 1, 700.0, 800.0).unwrap()];
        let tensor = build_tensor(&events, &cfg(300.0, 2), 2).unwrap();
        assert_eq!(tensor.slices()[0].edge_count(), 0);
        assert_eq!(tensor.slices()[1].edge_count(), 0);
    }

    #[test]
    fn tensor_rejects_out_of_range_node() {
        let events = [ContactEvent::new(0, 5, 0.0, 10.0).unwrap()];
        let err = build_tensor(&events, &cfg(300.0, 2), 2).unwrap_err();
        assert_eq!(err, TraceError::NodeOutOfRange { index: 5, n: 2 });
    }

    #[test]
    fn window_rejects_degenerate_configs() {
        assert!(WindowConfig::new(0.0, 0.0, 4).is_err());
        assert!(WindowConfig::new(0.0, 300.0, 0).is_err());
        assert!(WindowConfig::new(0.0, f64::MAX, 2).is_err());
    }

    #[test]
    fn ground_truth_exact_span() {
        let c = cfg(300.0, 2);
        let events = [ContactEvent::new(0, 1, 600.0, 900.0).unwrap()];
        let truth = ground_truth_slice(&events, &c, 2).unwrap();
        assert!(truth.contains(0, 1));
    }

    #[test]
    fn ground_truth_empty_after_window() {
        let c = cfg(300.0, 2);
        let events = [ContactEvent::new(0, 1, 0.0, 500.0).unwrap()];
        let truth = ground_truth_slice(&events, &c, 2).unwrap();
        assert_eq!(truth.edge_count(), 0);
    }

    #[test]
    fn ground_truth_boundary_event_lands_in_last_slice_and_truth() {
        // Straddles the window end at T*D = 600.
        let c = cfg(300.0, 2);
        let events = [ContactEvent::new(0, 1, 590.0, 610.0).unwrap()];
        let tensor = build_tensor(&events, &c, 2).unwrap();
        let truth = ground_truth_slice(&events, &c, 2).unwrap();
        assert!(tensor.slices()[1].contains(0, 1));
        assert!(truth.contains(0, 1));
    }

    #[test]
    fn union_support_covers_all_slices() {
        let events = [
            ContactEvent::new(0, 1, 0.0, 10.0).unwrap(),
            ContactEvent::new(1, 2, 400.0, 410.0).unwrap(),
        ];
        let tensor = build_tensor(&events, &cfg(300.0, 2), 3).unwrap();
        let support = tensor.union_support();
        assert!(support.contains(0, 1));
        assert!(support.contains(1, 2));
        assert!(!support.contains(0, 2));
    }

    /// Strategy: small random event lists over up to 6 nodes, times in
    /// [0, 1200), so events fall before, inside, and after the window.
    fn events_strategy(n: usize) -> impl Strategy<Value = Vec<ContactEvent>> {
        prop::collection::vec(
            (0..n, 0..n, 0.0f64..1200.0, 0.0f64..300.0).prop_filter_map(
                "no self-contacts",
                |(a, b, s, len)| {
                    (a != b).then(|| ContactEvent::new(a, b, s, s + len).unwrap())
                },
            ),
            0..24,
        )
    }

    proptest! {
        #[test]
        fn build_is_order_independent(mut events in events_strategy(6)) {
            let c = cfg(300.0, 3);
            let forward = build_tensor(&events, &c, 6).unwrap();
            events.reverse();
            let backward = build_tensor(&events, &c, 6).unwrap();
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn build_is_permutation_equivariant(
            events in events_strategy(5),
            perm_seed in 0usize..120,
        ) {
            // Enumerate a permutation of 0..5 from the seed.
            let mut perm = vec![0, 1, 2, 3, 4];
            let mut k = perm_seed;
            for i in (1..5).rev() {
                perm.swap(i, k % (i + 1));
                k /= i + 1;
            }
            let c = cfg(300.0, 3);
            let base = build_tensor(&events, &c, 5).unwrap();
            let relabeled: Vec<_> = events
                .iter()
                .map(|e| ContactEvent::new(perm[e.a], perm[e.b], e.start, e.end).unwrap())
                .collect();
            let mapped = build_tensor(&relabeled, &c, 5).unwrap();
            for (t, slice) in base.slices().iter().enumerate() {
                for i in 0..5 {
                    for j in (i + 1)..5 {
                        prop_assert_eq!(
                            slice.contains(i, j),
                            mapped.slices()[t].contains(perm[i], perm[j])
                        );
                    }
                }
            }
        }

        #[test]
        fn splitting_an_event_leaves_tensor_unchanged(
            a in 0usize..4,
            b in 0usize..4,
            s in 0.0f64..900.0,
            len in 0.0f64..200.0,
            frac in 0.0f64..=1.0,
        ) {
            prop_assume!(a != b);
            let c = cfg(300.0, 3);
            let e = s + len;
            let m = s + frac * len;
            let whole = [ContactEvent::new(a, b, s, e).unwrap()];
            let halves = [
                ContactEvent::new(a, b, s, m).unwrap(),
                ContactEvent::new(a, b, m, e).unwrap(),
            ];
            prop_assert_eq!(
                build_tensor(&whole, &c, 4).unwrap(),
                build_tensor(&halves, &c, 4).unwrap()
            );
        }

        #[test]
        fn slices_are_symmetric_with_zero_diagonal(events in events_strategy(6)) {
            let tensor = build_tensor(&events, &cfg(300.0, 3), 6).unwrap();
            for slice in tensor.slices() {
                for i in 0..6 {
                    prop_assert!(!slice.contains(i, i));
                    for j in 0..6 {
                        prop_assert_eq!(slice.contains(i, j), slice.contains(j, i));
                    }
                }
            }
        }
    }
}
