//! Interfaces, layer counting and the slow-motion diagnostics computed from
//! run records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::profiles::LayerPattern;
use crate::solver::{Integrator, RunRecord};

/// Closed level set `K`; must not contain `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LevelSet {
    Point { value: f64 },
    Interval { lo: f64, hi: f64 },
}

impl LevelSet {
    pub fn zero() -> Self {
        Self::Point { value: 0.0 }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let k = Self::Interval { lo, hi };
        k.validate()?;
        Ok(k)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Point { value } if *value == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("level set [{lo}, {hi}] is not a closed interval")));
        }
        if (lo <= -1.0 && -1.0 <= hi) || (lo <= 1.0 && 1.0 <= hi) {
            return Err(Error::InvalidArgument(format!("level set [{lo}, {hi}] must avoid ±1")));
        }
        Ok(())
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Point { value } => (value, value),
            Self::Interval { lo, hi } => (lo, hi),
        }
    }
}

impl Default for LevelSet {
    fn default() -> Self {
        Self::zero()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSet {
    pub positions: Vec<f64>,
    pub level: LevelSet,
}

impl InterfaceSet {
    pub fn new(mut positions: Vec<f64>, level: LevelSet) -> Self {
        positions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { positions, level }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Sign changes of `u − level`, linearly interpolated. A run of exact zeros
/// between opposite signs counts once, at its midpoint; touching without a
/// sign change does not count.
fn crossings(field: &Field, level: f64, out: &mut Vec<f64>) {
    let g = &field.grid;
    let mut last: Option<(usize, f64)> = None;
    let mut zero_start: Option<usize> = None;
    for (i, &u) in field.values.iter().enumerate() {
        let w = u - level;
        if w == 0.0 {
            if zero_start.is_none() {
                zero_start = Some(i);
            }
            continue;
        }
        if let Some((j, wj)) = last {
            if (wj < 0.0) != (w < 0.0) {
                match zero_start {
                    Some(z) => out.push(0.5 * (g.x(z) + g.x(i - 1))),
                    None => {
                        let (x0, x1) = (g.x(j), g.x(i));
                        out.push(x0 + (x1 - x0) * wj / (wj - w));
                    }
                }
            }
        }
        last = Some((i, w));
        zero_start = None;
    }
}

/// `I_K[u]`: sign-change locations for a point level, boundary crossings of
/// the preimage for an interval.
pub fn interface(field: &Field, level: &LevelSet) -> Result<InterfaceSet> {
    level.validate()?;
    let mut positions = Vec::new();
    match *level {
        LevelSet::Point { value } => crossings(field, value, &mut positions),
        LevelSet::Interval { lo, hi } => {
            crossings(field, lo, &mut positions);
            if hi > lo {
                crossings(field, hi, &mut positions);
            }
        }
    }
    Ok(InterfaceSet::new(positions, *level))
}

/// Interface of a step pattern, `I[v] = {h₁, …, h_N}`.
pub fn pattern_interface(pattern: &LayerPattern) -> InterfaceSet {
    InterfaceSet::new(pattern.jumps.clone(), LevelSet::zero())
}

fn directed(a: &[f64], b: &[f64]) -> f64 {
    // b is sorted
    a.iter()
        .map(|&x| {
            let k = b.partition_point(|&y| y < x);
            let mut d = f64::INFINITY;
            if k < b.len() {
                d = d.min(b[k] - x);
            }
            if k > 0 {
                d = d.min(x - b[k - 1]);
            }
            d
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance of finite point sets; `None` when either is empty.
pub fn hausdorff_points(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(directed(&sa, &sb).max(directed(&sb, &sa)))
}

pub fn hausdorff(a: &InterfaceSet, b: &InterfaceSet) -> Option<f64> {
    hausdorff_points(&a.positions, &b.positions)
}

/// Trapezoid `‖u − v‖_{L¹}` with the jump cells split at the `h_j`; `u` is
/// interpolated linearly at split points and `v` takes its one-sided value
/// on each piece.
pub fn l1_distance_to_pattern(field: &Field, pattern: &LayerPattern) -> f64 {
    let g = &field.grid;
    let u = &field.values;
    let tol = 1e-12 * (g.b - g.a);
    let mut total = 0.0;
    let mut pts = Vec::new();
    for i in 0..g.n_cells {
        let (x0, x1) = (g.x(i), g.x(i + 1));
        let (u0, u1) = (u[i], u[i + 1]);
        pts.clear();
        pts.push(x0);
        let start = pattern.jumps.partition_point(|&h| h <= x0 + tol);
        for &h in &pattern.jumps[start..] {
            if h >= x1 - tol {
                break;
            }
            pts.push(h);
        }
        pts.push(x1);
        let lerp = |x: f64| u0 + (u1 - u0) * (x - x0) / (x1 - x0);
        for w in pts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let v = pattern.value(0.5 * (p + q));
            let fp = (if p == x0 { u0 } else { lerp(p) } - v).abs();
            let fq = (if q == x1 { u1 } else { lerp(q) } - v).abs();
            total += 0.5 * (q - p) * (fp + fq);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub t_event: f64,
    /// Bracket `[t_lo, t_hi]` around the event from the bisection.
    pub t_bracket: (f64, f64),
    pub layers_before: usize,
    pub layers_after: usize,
    /// Positions just before the event of the interfaces that vanished. A
    /// single layer absorbed by the boundary is paired with that endpoint.
    pub vanished_pair: (f64, f64),
    /// The same interfaces at the first observation of the plateau that
    /// the event ends.
    pub vanished_origin: Option<(f64, f64)>,
}

/// Relative width at which the collapse bisection stops.
pub const COLLAPSE_REL_PRECISION: f64 = 0.01;

fn zero_count(field: &Field) -> usize {
    interface(field, &LevelSet::zero()).map(|s| s.len()).unwrap_or(0)
}

/// Locate the interfaces removed between `before` and `after`: the
/// contiguous block whose removal leaves the set closest to `after`.
fn vanished(before: &[f64], after: &[f64], a: f64, b: f64) -> (f64, f64) {
    match vanished_block(before, after) {
        Some((start, k)) => block_pair(&before[start..start + k], a, b),
        None => (f64::NAN, f64::NAN),
    }
}

fn vanished_block(before: &[f64], after: &[f64]) -> Option<(usize, usize)> {
    let k = before.len().saturating_sub(after.len()).max(1).min(before.len());
    if before.is_empty() {
        return None;
    }
    let mut best = (f64::INFINITY, 0usize);
    for start in 0..=before.len() - k {
        let rest: Vec<f64> = before[..start].iter().chain(&before[start + k..]).cloned().collect();
        let d = match (rest.is_empty(), after.is_empty()) {
            (true, true) => 0.0,
            _ => hausdorff_points(&rest, after).unwrap_or(f64::INFINITY),
        };
        if d < best.0 {
            best = (d, start);
        }
    }
    Some((best.1, k))
}

fn block_pair(block: &[f64], a: f64, b: f64) -> (f64, f64) {
    let k = block.len();
    if k == 1 {
        let x = block[0];
        let wall = if x - a < b - x { a } else { b };
        if wall < x {
            (wall, x)
        } else {
            (x, wall)
        }
    } else {
        (block[0], block[k - 1])
    }
}

/// One event per strict drop in the layer count, timed by bisection
/// re-simulation from the last observation before the drop.
pub fn detect_collapses(record: &RunRecord) -> Result<Vec<CollapseEvent>> {
    let mut events = Vec::new();
    let (a, b) = (record.u0.grid.a, record.u0.grid.b);
    let mut plateau_start = record.u0.time;
    for cp in &record.checkpoints {
        let mut lo_state = cp.before.clone();
        let mut lo_layers = cp.layers_before;
        let mut hi = cp.t_after;
        let mut hi_layers = cp.layers_after;
        let mut hi_interfaces = cp.interfaces_after.clone();
        while hi - lo_state.time > COLLAPSE_REL_PRECISION * hi {
            let mid = 0.5 * (lo_state.time + hi);
            let mut integrator = Integrator::new(record.config.clone())?;
            let mut state = lo_state.clone();
            integrator.advance_to(&mut state, mid, |_, _| true)?;
            let n = zero_count(&state);
            if n >= lo_layers {
                lo_layers = n;
                lo_state = state;
            } else {
                hi = mid;
                hi_layers = n;
                hi_interfaces = interface(&state, &LevelSet::zero())?.positions;
            }
        }
        let before = interface(&lo_state, &LevelSet::zero())?.positions;
        let block = vanished_block(&before, &hi_interfaces);
        let origin = record
            .series
            .iter()
            .find(|r| r.t >= plateau_start && r.n_layers == before.len())
            .zip(block)
            .map(|(r, (start, k))| block_pair(&r.interfaces[start..start + k], a, b));
        events.push(CollapseEvent {
            t_event: 0.5 * (lo_state.time + hi),
            t_bracket: (lo_state.time, hi),
            layers_before: lo_layers,
            layers_after: hi_layers,
            vanished_pair: vanished(&before, &hi_interfaces, a, b),
            vanished_origin: origin,
        });
        plateau_start = cp.t_after;
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowMotionCertificate {
    pub delta1: f64,
    pub rate: f64,
    pub eps: f64,
    pub level: LevelSet,
    /// `exp(A/ε)`.
    pub reference_time: f64,
    /// Last observation with `d(I_K[u(t)], I_K[u₀]) ≤ δ₁`; a lower bound on `t_ε(δ₁)`.
    pub t_last_inside: f64,
    /// First observation outside; `None` if the interfaces stayed put.
    pub t_exit: Option<f64>,
    pub horizon: f64,
    pub exceeds_horizon: bool,
    pub no_interfaces: bool,
    pub passed: bool,
}

/// Measure the exit time of the interfaces from the `δ₁`-neighbourhood of
/// the initial ones and compare it with `exp(A/ε)`.
///
/// For `K = {0}` the recorded series is used; for other level sets the
/// interfaces are recomputed from the stored snapshots, checkpoints and
/// final field.
pub fn slow_motion_certificate(record: &RunRecord, delta1: f64, level: &LevelSet, rate: f64) -> Result<SlowMotionCertificate> {
    level.validate()?;
    if !(delta1 > 0.0) {
        return Err(Error::InvalidArgument(format!("delta1 must be positive, got {delta1}")));
    }
    let eps = record.config.eps;
    let i0 = interface(&record.u0, level)?;
    let mut timeline: Vec<(f64, Vec<f64>)> = if level.is_zero() {
        record.series.iter().map(|r| (r.t, r.interfaces.clone())).collect()
    } else {
        let mut fields: Vec<&Field> = record.snapshots.iter().collect();
        fields.extend(record.checkpoints.iter().map(|c| &c.before));
        fields.push(&record.final_field);
        let mut v = Vec::with_capacity(fields.len());
        for f in fields {
            v.push((f.time, interface(f, level)?.positions));
        }
        v
    };
    timeline.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let horizon = record.final_field.time;
    let reference_time = (rate / eps).exp();
    let mut cert = SlowMotionCertificate {
        delta1,
        rate,
        eps,
        level: *level,
        reference_time,
        t_last_inside: horizon,
        t_exit: None,
        horizon,
        exceeds_horizon: true,
        no_interfaces: i0.is_empty(),
        passed: true,
    };
    if i0.is_empty() {
        return Ok(cert);
    }
    let mut last_inside = record.u0.time;
    for (t, pos) in timeline {
        let inside = matches!(hausdorff_points(&pos, &i0.positions), Some(d) if d <= delta1);
        if inside {
            last_inside = t;
        } else {
            cert.t_exit = Some(t);
            cert.exceeds_horizon = false;
            cert.t_last_inside = last_inside;
            break;
        }
    }
    cert.passed = cert.t_last_inside > reference_time;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;
    use crate::grid::Grid1D;
    use crate::potentials::PotentialSpec;
    use crate::profiles::{build_layer_datum, ProfileTable, DEFAULT_ETA};
    use proptest::prelude::*;

    #[test]
    fn interface_examples() {
        let g = Grid1D::new(-1.0, 1.0, 20).unwrap();
        let id = Field::from_fn(g, |x| x).unwrap();
        assert_eq!(interface(&id, &LevelSet::zero()).unwrap().positions, vec![0.0]);
        let off = Field::from_fn(Grid1D::new(-1.0, 1.0, 21).unwrap(), |x| x).unwrap();
        let p = interface(&off, &LevelSet::zero()).unwrap().positions;
        assert_eq!(p.len(), 1);
        assert!(p[0].abs() < 1e-15);
        assert!(interface(&Field::constant(g, 1.0), &LevelSet::zero()).unwrap().is_empty());
        let k = LevelSet::interval(-0.5, 0.5).unwrap();
        let p = interface(&id, &k).unwrap().positions;
        assert_eq!(p.len(), 2);
        assert!((p[0] + 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn level_sets_must_avoid_wells() {
        assert!(LevelSet::interval(-2.0, 0.0).is_err());
        assert!(LevelSet::interval(0.5, 1.0).is_err());
        assert!(LevelSet::interval(0.5, 0.2).is_err());
        let g = Grid1D::new(-1.0, 1.0, 20).unwrap();
        let f = Field::constant(g, 0.0);
        assert!(interface(&f, &LevelSet::Point { value: -1.0 }).is_err());
        assert!(interface(&f, &LevelSet::Point { value: 1.5 }).unwrap().is_empty());
    }

    #[test]
    fn zero_runs_and_touching() {
        let g = Grid1D::new(0.0, 6.0, 6).unwrap();
        let f = Field::new(g, vec![-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(interface(&f, &LevelSet::zero()).unwrap().positions, vec![2.0]);
    }

    #[test]
    fn layer_datum_zeros_detected() {
        let q = PotentialSpec::QuarticDoubleWell;
        let jumps = vec![-3.4, -2.0, -0.5, 0.8, 2.2, 3.2];
        let p = LayerPattern::new(-4.0, 4.0, jumps.clone(), 1).unwrap();
        let t = ProfileTable::build(&q, FluxModel::Euclidean, 0.1, DEFAULT_ETA, 4001).unwrap();
        let g = Grid1D::new(-4.0, 4.0, 1600).unwrap();
        let f = build_layer_datum(&p, &t, g).unwrap();
        let i = interface(&f, &LevelSet::zero()).unwrap();
        assert_eq!(i.len(), 6);
        for (x, h) in i.positions.iter().zip(&jumps) {
            assert!((x - h).abs() < g.h());
        }
        assert!(hausdorff(&i, &pattern_interface(&p)).unwrap() < g.h());
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_points(&[0.0, 1.0], &[0.0]), Some(1.0));
        assert_eq!(hausdorff_points(&[0.3, -2.0], &[-2.0, 0.3]), Some(0.0));
        assert_eq!(hausdorff_points(&[], &[1.0]), None);
        assert_eq!(hausdorff_points(&[1.0], &[]), None);
    }

    #[test]
    fn l1_examples() {
        let g = Grid1D::new(-4.0, 4.0, 1600).unwrap();
        let p = LayerPattern::new(-4.0, 4.0, vec![-3.4, -2.0, -0.5, 0.8, 2.2, 3.2], 1).unwrap();
        // sampled v: only the six jump cells contribute, h each
        let v = Field::from_fn(g, |x| p.value(x)).unwrap();
        assert!((l1_distance_to_pattern(&v, &p) - 6.0 * g.h()).abs() < 1e-9);
        let fine = Grid1D::new(-4.0, 4.0, 16000).unwrap();
        let v = Field::from_fn(fine, |x| p.value(x)).unwrap();
        assert!((l1_distance_to_pattern(&v, &p) - 6.0 * fine.h()).abs() < 1e-9);
        let one = LayerPattern::new(-4.0, 4.0, vec![0.0], -1).unwrap();
        let ones = Field::constant(g, 1.0);
        assert!((l1_distance_to_pattern(&ones, &one) - 8.0).abs() < 1e-12);
        // jump strictly inside a cell
        let off = LayerPattern::new(-4.0, 4.0, vec![0.0012], -1).unwrap();
        assert!((l1_distance_to_pattern(&ones, &off) - 2.0 * 4.0012).abs() < 1e-12);
    }

    #[test]
    fn l1_of_layer_datum_scales_with_eps() {
        let q = PotentialSpec::QuarticDoubleWell;
        let p = LayerPattern::new(-4.0, 4.0, vec![-3.4, -2.0, -0.5, 0.8, 2.2, 3.2], 1).unwrap();
        let g = Grid1D::new(-4.0, 4.0, 8000).unwrap();
        let d: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let t = ProfileTable::build(&q, FluxModel::Euclidean, eps, DEFAULT_ETA, 4001).unwrap();
                l1_distance_to_pattern(&build_layer_datum(&p, &t, g).unwrap(), &p)
            })
            .collect();
        for w in d.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.1, "{d:?}");
        }
    }

    #[test]
    fn vanished_pair_identification() {
        let before = [-3.4, -2.0, -0.5, 0.8, 2.2, 3.2];
        let after = [-3.4, -2.0, -0.5, 0.8];
        assert_eq!(vanished(&before, &after, -4.0, 4.0), (2.2, 3.2));
        let after = [-2.0, -0.5, 0.8, 2.2];
        assert_eq!(vanished(&[-3.5, -2.0, -0.5, 0.8, 2.2], &after, -4.0, 4.0), (-4.0, -3.5));
        assert_eq!(vanished(&[0.1, 0.2], &[], -1.0, 1.0), (0.1, 0.2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn hausdorff_pseudometric(
            a in prop::collection::vec(-10.0f64..10.0, 1..8),
            b in prop::collection::vec(-10.0f64..10.0, 1..8),
            c in prop::collection::vec(-10.0f64..10.0, 1..8),
        ) {
            let ab = hausdorff_points(&a, &b).unwrap();
            let ba = hausdorff_points(&b, &a).unwrap();
            let bc = hausdorff_points(&b, &c).unwrap();
            let ac = hausdorff_points(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(hausdorff_points(&a, &a).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn interface_sorted_within_domain(
            vals in prop::collection::vec(-1.0f64..1.0, 5..40),
        ) {
            let n = vals.len() - 1;
            let g = Grid1D::new(-2.0, 3.0, n).unwrap();
            let f = Field::new(g, vals, 0.0).unwrap();
            let i = interface(&f, &LevelSet::zero()).unwrap();
            prop_assert!(i.positions.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(i.positions.iter().all(|&x| (-2.0..=3.0).contains(&x)));
        }
    }
}
