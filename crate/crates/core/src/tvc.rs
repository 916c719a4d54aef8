//! Synthetic contact/visit trace generator with time-variant community
//! mobility: every node owns a set of preferred community boxes inside the
//! simulation area and alternates between dwelling in them and roaming,
//! following random-waypoint motion the whole time.
//!
//! Generation is a pure function of the parameters: each node draws from its
//! own counter-based RNG stream, so traces are reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace::{ContactEvent, LocationVisit};

#[derive(Debug, Error, PartialEq)]
pub enum TvcError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Generator parameters. Speeds are meters/second, times seconds, lengths
/// meters. `p_switch` is the chance of heading to the next preferred
/// community at an epoch end, `p_roam` the chance of roaming the whole
/// area; otherwise the node stays in its current region.
#[derive(Debug, Clone, PartialEq)]
pub struct TvcParams {
    pub area_edge: f64,
    pub node_count: usize,
    pub radio_range: f64,
    pub community_count: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub p_switch: f64,
    pub p_roam: f64,
    pub community_edge: f64,
    pub epoch_duration: f64,
    pub tick: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for TvcParams {
    fn default() -> Self {
        Self {
            area_edge: 1000.0,
            node_count: 100,
            radio_range: 75.0,
            community_count: 2,
            v_min: 5.0,
            v_max: 15.0,
            p_switch: 0.7,
            p_roam: 0.1,
            community_edge: 100.0,
            epoch_duration: 300.0,
            tick: 1.0,
            duration: 14700.0,
            seed: 42,
        }
    }
}

impl TvcParams {
    pub fn validate(&self) -> Result<(), TvcError> {
        let fail = |msg: String| Err(TvcError::InvalidParams(msg));
        if !(self.area_edge > 0.0) || !self.area_edge.is_finite() {
            return fail(format!("area_edge must be positive, got {}", self.area_edge));
        }
        if self.node_count == 0 {
            return fail("node_count must be >= 1".into());
        }
        if !(self.radio_range > 0.0) || self.radio_range >= self.area_edge {
            return fail(format!(
                "radio_range must be in (0, area_edge), got {}",
                self.radio_range
            ));
        }
        if self.community_count == 0 {
            return fail("community_count must be >= 1".into());
        }
        if !(self.v_min >= 0.0) || !(self.v_max >= self.v_min) || !self.v_max.is_finite() {
            return fail(format!(
                "need 0 <= v_min <= v_max, got [{}, {}]",
                self.v_min, self.v_max
            ));
        }
        let p_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !p_ok(self.p_switch) || !p_ok(self.p_roam) || self.p_switch + self.p_roam > 1.0 {
            return fail(format!(
                "probabilities must satisfy 0 <= p_switch, p_roam and p_switch + p_roam <= 1, \
                 got {} and {}",
                self.p_switch, self.p_roam
            ));
        }
        if !(self.community_edge >= 0.0) || self.community_edge > self.area_edge {
            return fail(format!(
                "community_edge must be in [0, area_edge], got {}",
                self.community_edge
            ));
        }
        if !(self.epoch_duration > 0.0) || !self.epoch_duration.is_finite() {
            return fail(format!("epoch_duration must be positive, got {}", self.epoch_duration));
        }
        if !(self.tick > 0.0) || !self.tick.is_finite() {
            return fail(format!("tick must be positive, got {}", self.tick));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return fail(format!("duration must be non-negative, got {}", self.duration));
        }
        Ok(())
    }
}

/// Axis-aligned square region `[x, x + edge] x [y, y + edge]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub edge: f64,
}

impl Rect {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.x + self.edge && py >= self.y && py <= self.y + self.edge
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (
            rng.random_range(self.x..=self.x + self.edge),
            rng.random_range(self.y..=self.y + self.edge),
        )
    }
}

// RNG streams: one per node for motion, one reserved for preferences.
const PREFS_STREAM: u64 = u64::MAX;

fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws each node's ordered list of preferred community boxes, placed
/// uniformly inside the area (overlap allowed).
pub fn assign_preferences(params: &TvcParams) -> Result<Vec<Vec<Rect>>, TvcError> {
    params.validate()?;
    let mut rng = rng_for_stream(params.seed, PREFS_STREAM);
    let span = params.area_edge - params.community_edge;
    let prefs = (0..params.node_count)
        .map(|_| {
            (0..params.community_count)
                .map(|_| Rect {
                    x: rng.random_range(0.0..=span),
                    y: rng.random_range(0.0..=span),
                    edge: params.community_edge,
                })
                .collect()
        })
        .collect();
    Ok(prefs)
}

/// Where a node currently draws its waypoints from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Community(usize),
    Roaming,
}

#[derive(Debug)]
struct NodeState {
    pos: (f64, f64),
    waypoint: (f64, f64),
    speed: f64,
    region: Region,
    pref_cursor: usize,
    next_epoch: f64,
    rng: ChaCha8Rng,
}

/// Steps all nodes at tick granularity; exposed to tests so invariants can
/// be checked against live positions.
pub(crate) struct Simulator {
    params: TvcParams,
    prefs: Vec<Vec<Rect>>,
    nodes: Vec<NodeState>,
}

impl Simulator {
    pub(crate) fn new(params: &TvcParams) -> Result<Self, TvcError> {
        let prefs = assign_preferences(params)?;
        let nodes = (0..params.node_count)
            .map(|i| {
                let mut rng = rng_for_stream(params.seed, i as u64);
                let home = prefs[i][0];
                let pos = home.sample(&mut rng);
                let waypoint = home.sample(&mut rng);
                let speed = draw_speed(&mut rng, params);
                // Random phase: epoch ends are not synchronized across nodes.
                let next_epoch = rng.random_range(0.0..=params.epoch_duration);
                NodeState {
                    pos,
                    waypoint,
                    speed,
                    region: Region::Community(0),
                    pref_cursor: 0,
                    next_epoch,
                    rng,
                }
            })
            .collect();
        Ok(Self { params: params.clone(), prefs, nodes })
    }

    fn region_rect(&self, node: usize, region: Region) -> Rect {
        match region {
            Region::Community(k) => self.prefs[node][k],
            Region::Roaming => Rect { x: 0.0, y: 0.0, edge: self.params.area_edge },
        }
    }

    /// Advances every node by one tick, then applies any epoch boundary the
    /// node crossed at `time` (mode re-draw plus fresh waypoint and speed).
    pub(crate) fn advance_to(&mut self, time: f64) {
        let tick = self.params.tick;
        for i in 0..self.nodes.len() {
            let rect = self.region_rect(i, self.nodes[i].region);
            let node = &mut self.nodes[i];
            let dx = node.waypoint.0 - node.pos.0;
            let dy = node.waypoint.1 - node.pos.1;
            let dist = (dx * dx + dy * dy).sqrt();
            let step = node.speed * tick;
            if dist <= step {
                node.pos = node.waypoint;
                node.waypoint = rect.sample(&mut node.rng);
                node.speed = draw_speed(&mut node.rng, &self.params);
            } else {
                node.pos.0 += dx / dist * step;
                node.pos.1 += dy / dist * step;
            }
            while time >= self.nodes[i].next_epoch {
                let (p_switch, p_roam) = (self.params.p_switch, self.params.p_roam);
                let communities = self.params.community_count;
                let node = &mut self.nodes[i];
                let u: f64 = node.rng.random();
                if u < p_switch {
                    node.pref_cursor = (node.pref_cursor + 1) % communities;
                    node.region = Region::Community(node.pref_cursor);
                } else if u < p_switch + p_roam {
                    node.region = Region::Roaming;
                } else {
                    // Roaming is a one-epoch excursion: on "stay" the node
                    // keeps (or returns to) its current preferred community.
                    node.region = Region::Community(node.pref_cursor);
                }
                let rect = self.region_rect(i, self.nodes[i].region);
                let node = &mut self.nodes[i];
                node.waypoint = rect.sample(&mut node.rng);
                node.speed = draw_speed(&mut node.rng, &self.params);
                node.next_epoch += self.params.epoch_duration;
            }
        }
    }

    pub(crate) fn positions(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|n| n.pos).collect()
    }

    /// Preferred-community box the node is inside, by preference order.
    pub(crate) fn location_of(&self, node: usize) -> Option<usize> {
        let (px, py) = self.nodes[node].pos;
        self.prefs[node].iter().position(|r| r.contains(px, py))
    }
}

fn draw_speed(rng: &mut ChaCha8Rng, params: &TvcParams) -> f64 {
    rng.random_range(params.v_min..=params.v_max)
}

/// Runs the simulation and extracts maximal contact runs (pairs within
/// radio range) and visit runs (node inside one of its community boxes)
/// at tick granularity.
pub fn generate(params: &TvcParams) -> Result<(Vec<ContactEvent>, Vec<LocationVisit>), TvcError> {
    let mut sim = Simulator::new(params)?;
    let n = params.node_count;
    let n_ticks = (params.duration / params.tick).floor() as usize;
    let range_sq = params.radio_range * params.radio_range;

    let mut contact_start: Vec<Option<usize>> = vec![None; n * (n - 1) / 2];
    let mut visit_start: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut contacts = Vec::new();
    let mut visits = Vec::new();

    let pair_idx = |i: usize, j: usize| i * n - i * (i + 1) / 2 + (j - i - 1);

    for k in 0..=n_ticks {
        if k > 0 {
            sim.advance_to(k as f64 * params.tick);
        }
        let pos = sim.positions();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[i].0 - pos[j].0;
                let dy = pos[i].1 - pos[j].1;
                let in_range = dx * dx + dy * dy <= range_sq;
                let slot = &mut contact_start[pair_idx(i, j)];
                match (*slot, in_range) {
                    (None, true) => *slot = Some(k),
                    (Some(s), false) => {
                        contacts.push(
                            ContactEvent::new(i, j, s as f64 * params.tick, (k - 1) as f64 * params.tick)
                                .expect("i < j"),
                        );
                        *slot = None;
                    }
                    _ => {}
                }
            }
            let here = sim.location_of(i);
            let slot = &mut visit_start[i];
            let open_loc = slot.map(|(loc, _)| loc);
            if open_loc != here {
                if let Some((loc, s)) = slot.take() {
                    visits.push(
                        LocationVisit::new(i, loc, s as f64 * params.tick, (k - 1) as f64 * params.tick)
                            .expect("valid run"),
                    );
                }
                if let Some(loc) = here {
                    *slot = Some((loc, k));
                }
            }
        }
    }

    let end_time = n_ticks as f64 * params.tick;
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(s) = contact_start[pair_idx(i, j)] {
                contacts.push(
                    ContactEvent::new(i, j, s as f64 * params.tick, end_time).expect("i < j"),
                );
            }
        }
        if let Some((loc, s)) = visit_start[i] {
            visits.push(
                LocationVisit::new(i, loc, s as f64 * params.tick, end_time).expect("valid run"),
            );
        }
    }

    contacts.sort_by(|a, b| {
        a.start.total_cmp(&b.start).then(a.a.cmp(&b.a)).then(a.b.cmp(&b.b))
    });
    visits.sort_by(|a, b| {
        a.start.total_cmp(&b.start).then(a.node.cmp(&b.node)).then(a.location.cmp(&b.location))
    });
    Ok((contacts, visits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_params() -> TvcParams {
        TvcParams {
            area_edge: 200.0,
            node_count: 8,
            radio_range: 40.0,
            community_count: 2,
            community_edge: 30.0,
            epoch_duration: 60.0,
            duration: 400.0,
            seed: 11,
            ..TvcParams::default()
        }
    }

    #[test]
    fn rejects_invalid_params() {
        let check = |mutate: fn(&mut TvcParams)| {
            let mut p = tiny_params();
            mutate(&mut p);
            assert!(p.validate().is_err(), "{p:?}");
        };
        check(|p| p.node_count = 0);
        check(|p| p.radio_range = 0.0);
        check(|p| p.radio_range = p.area_edge);
        check(|p| p.v_min = -1.0);
        check(|p| p.v_max = p.v_min - 1.0);
        check(|p| {
            p.p_switch = 0.8;
            p.p_roam = 0.3;
        });
        check(|p| p.community_edge = p.area_edge + 1.0);
        check(|p| p.tick = 0.0);
        check(|p| p.community_count = 0);
    }

    #[test]
    fn preferences_are_deterministic_and_in_bounds() {
        let params = TvcParams { seed: 9, ..TvcParams::default() };
        let a = assign_preferences(&params).unwrap();
        let b = assign_preferences(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        for boxes in &a {
            assert_eq!(boxes.len(), 2);
            for r in boxes {
                assert!(r.x >= 0.0 && r.x + r.edge <= params.area_edge);
                assert!(r.y >= 0.0 && r.y + r.edge <= params.area_edge);
            }
        }
        let other = assign_preferences(&TvcParams { seed: 10, ..params }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn pinned_nodes_stay_in_contact_for_the_whole_run() {
        // Zero speed and zero-size communities pin each node to one point;
        // the seed is fixed so the two points land within radio range.
        let params = TvcParams {
            area_edge: 100.0,
            node_count: 2,
            radio_range: 99.0,
            community_count: 1,
            community_edge: 0.0,
            v_min: 0.0,
            v_max: 0.0,
            duration: 50.0,
            tick: 1.0,
            epoch_duration: 10.0,
            seed: 1,
            ..TvcParams::default()
        };
        let (contacts, visits) = generate(&params).unwrap();
        assert_eq!(contacts.len(), 1, "{contacts:?}");
        assert_eq!((contacts[0].a, contacts[0].b), (0, 1));
        assert_eq!(contacts[0].start, 0.0);
        assert_eq!(contacts[0].end, 50.0);
        // Each node dwells in its own zero-size community the whole time.
        assert_eq!(visits.len(), 2);
        assert!(visits.iter().all(|v| v.start == 0.0 && v.end == 50.0));
    }

    #[test]
    fn single_node_has_visits_but_no_contacts() {
        let params = TvcParams { node_count: 1, duration: 300.0, ..tiny_params() };
        let (contacts, visits) = generate(&params).unwrap();
        assert!(contacts.is_empty());
        assert!(!visits.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let params = tiny_params();
        let (c1, v1) = generate(&params).unwrap();
        let (c2, v2) = generate(&params).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(v1, v2);
        let (c3, _) = generate(&TvcParams { seed: 12, ..params }).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn contacts_are_canonical_and_inside_the_run() {
        let params = tiny_params();
        let (contacts, visits) = generate(&params).unwrap();
        assert!(!contacts.is_empty());
        for c in &contacts {
            assert!(c.a < c.b);
            assert!(c.start >= 0.0 && c.end <= params.duration);
        }
        for v in &visits {
            assert!(v.start >= 0.0 && v.end <= params.duration);
            assert!(v.location < params.community_count);
        }
    }

    /// Replays the simulation tick by tick (determinism makes the replay
    /// exact) and checks every tick covered by an emitted contact interval
    /// has the pair within radio range.
    #[test]
    fn contact_ticks_respect_radio_range() {
        let params = tiny_params();
        let (contacts, _) = generate(&params).unwrap();
        let mut sim = Simulator::new(&params).unwrap();
        let n_ticks = (params.duration / params.tick).floor() as usize;
        let mut trajectory = vec![sim.positions()];
        for k in 1..=n_ticks {
            sim.advance_to(k as f64 * params.tick);
            trajectory.push(sim.positions());
        }
        assert!(!contacts.is_empty());
        for c in &contacts {
            let k_lo = (c.start / params.tick).round() as usize;
            let k_hi = (c.end / params.tick).round() as usize;
            for (k, snapshot) in trajectory.iter().enumerate().take(k_hi + 1).skip(k_lo) {
                let (ax, ay) = snapshot[c.a];
                let (bx, by) = snapshot[c.b];
                let dist = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
                assert!(
                    dist <= params.radio_range + 1e-9,
                    "pair ({},{}) at tick {k}: {dist}",
                    c.a,
                    c.b
                );
            }
            // Runs are maximal: the neighboring ticks are out of range.
            if k_lo > 0 {
                let (ax, ay) = trajectory[k_lo - 1][c.a];
                let (bx, by) = trajectory[k_lo - 1][c.b];
                assert!(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt() > params.radio_range);
            }
        }
    }

    #[test]
    fn positions_stay_inside_the_area() {
        let params = tiny_params();
        let mut sim = Simulator::new(&params).unwrap();
        for k in 1..=200usize {
            sim.advance_to(k as f64 * params.tick);
            for (x, y) in sim.positions() {
                assert!((0.0..=params.area_edge).contains(&x));
                assert!((0.0..=params.area_edge).contains(&y));
            }
        }
    }
}
