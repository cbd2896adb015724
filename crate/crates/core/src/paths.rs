//! Functionals on simulated cadlag paths: the partition modulus and its
//! exhaustive oracle, Skorokhod-type path distances, weak projections,
//! the weak-ball metric, Aldous increment tables and tightness reports.
//!
//! Infima over partitions and over time changes are taken over classes
//! anchored to the event grid (optionally refined and capped); these are
//! upper bounds that converge under refinement, and the exhaustive
//! oracle certifies exactness of the dynamic programs on small
//! instances, where both sides search the same finite class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{CadlagPath, Ensemble};
use crate::spectral::{Rep, SpectralField};

/// A real-valued cadlag path as `(time, value)` breakpoints with the
/// right-continuous convention.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealCadlagPath {
    pub breakpoints: Vec<(f64, f64)>,
    pub t_horizon: f64,
}

impl RealCadlagPath {
    /// Breakpoints must start at time 0 and be strictly increasing; a
    /// closing breakpoint at the horizon is appended when missing.
    pub fn new(mut breakpoints: Vec<(f64, f64)>, t_horizon: f64) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints[0].0 != 0.0 {
            return Err(Error::invalid("path must start at time 0"));
        }
        if !(t_horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        for w in breakpoints.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("breakpoint times must be strictly increasing"));
            }
        }
        let last = *breakpoints.last().unwrap();
        if last.0 > t_horizon {
            return Err(Error::invalid("breakpoint beyond the horizon"));
        }
        if last.0 < t_horizon {
            breakpoints.push((t_horizon, last.1));
        }
        Ok(RealCadlagPath { breakpoints, t_horizon })
    }

    pub fn constant(value: f64, t_horizon: f64) -> Self {
        RealCadlagPath {
            breakpoints: vec![(0.0, value), (t_horizon, value)],
            t_horizon,
        }
    }

    /// Counting path of a marked point process realisation.
    pub fn counting(times: &[f64], t_horizon: f64) -> Result<Self> {
        let mut bp = vec![(0.0, 0.0)];
        for (i, t) in times.iter().enumerate() {
            bp.push((*t, (i + 1) as f64));
        }
        RealCadlagPath::new(bp, t_horizon)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let mut v = self.breakpoints[0].1;
        for (ti, vi) in &self.breakpoints {
            if *ti <= t {
                v = *vi;
            } else {
                break;
            }
        }
        v
    }
}

/// Event times plus a dense pairwise state-distance matrix; the common
/// substrate of the modulus computations.
pub struct MetricView {
    times: Vec<f64>,
    t_horizon: f64,
    n: usize,
    dist: Vec<f64>,
}

impl MetricView {
    fn build<S>(times: Vec<f64>, t_horizon: f64, states: &[S], d: impl Fn(&S, &S) -> f64) -> Self {
        let n = times.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d(&states[i], &states[j]);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        MetricView { times, t_horizon, n, dist }
    }

    pub fn from_real(path: &RealCadlagPath) -> Self {
        let times: Vec<f64> = path.breakpoints.iter().map(|b| b.0).collect();
        let states: Vec<f64> = path.breakpoints.iter().map(|b| b.1).collect();
        Self::build(times, path.t_horizon, &states, |a, b| (a - b).abs())
    }

    /// `U'`-metric view of a spectral path.
    pub fn from_spectral_dual_u(path: &CadlagPath) -> Self {
        let r = path.basis().hw_r().to_vec();
        let times: Vec<f64> = path.events.iter().map(|e| e.time).collect();
        let states: Vec<&[f64]> = path.events.iter().map(|e| e.state.as_slice()).collect();
        Self::build(times, path.t_horizon(), &states, move |a, b| {
            a.iter()
                .zip(b.iter())
                .zip(&r)
                .map(|((x, y), ri)| {
                    let d = ri * (x - y);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
    }

    /// `H`-metric view of a spectral path.
    pub fn from_spectral_h(path: &CadlagPath) -> Self {
        let times: Vec<f64> = path.events.iter().map(|e| e.time).collect();
        let states: Vec<&[f64]> = path.events.iter().map(|e| e.state.as_slice()).collect();
        Self::build(times, path.t_horizon(), &states, |a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Maximum pairwise distance among recorded states.
    pub fn diameter(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max(self.d(i, j));
            }
        }
        m
    }
}

/// Candidate partition breakpoints: the event grid plus a uniform
/// refinement, capped at `cap` points with the origin always kept.
fn partition_candidates(view: &MetricView, refine: usize, cap: usize) -> Vec<f64> {
    let mut c: Vec<f64> = view
        .times
        .iter()
        .copied()
        .filter(|t| *t < view.t_horizon)
        .collect();
    for k in 1..=refine {
        let t = view.t_horizon * k as f64 / (refine + 1) as f64;
        if t < view.t_horizon {
            c.push(t);
        }
    }
    c.push(0.0);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.dedup();
    if c.len() > cap {
        let stride = (c.len() as f64 / cap as f64).ceil() as usize;
        let mut thin: Vec<f64> = c.iter().copied().step_by(stride).collect();
        if thin[0] != 0.0 {
            thin.insert(0, 0.0);
        }
        c = thin;
    }
    c
}

/// Oscillation over the right-open windows `[c_a, c_b)` and the final
/// windows `[c_a, T)`: maximum pairwise distance among the state active
/// at the window start and the states of events inside it.
struct OscTable {
    osc: Vec<f64>,
    osc_final: Vec<f64>,
}

fn oscillation_table(view: &MetricView, cands: &[f64]) -> OscTable {
    let k = cands.len();
    let e = view.n;
    let lo: Vec<usize> = cands
        .iter()
        .map(|c| {
            let mut idx = 0;
            for (i, t) in view.times.iter().enumerate() {
                if *t <= *c {
                    idx = i;
                } else {
                    break;
                }
            }
            idx
        })
        .collect();
    let hi: Vec<usize> = cands
        .iter()
        .map(|c| view.times.iter().position(|t| *t >= *c).unwrap_or(e))
        .collect();
    // events at or beyond the horizon never enter a window (the modulus
    // sup runs over t < T)
    let hi_t: usize = view
        .times
        .iter()
        .position(|t| *t >= view.t_horizon)
        .unwrap_or(e);
    let mut osc = vec![0.0; k * k];
    let mut osc_final = vec![0.0; k];
    for a in 0..k {
        let start = lo[a];
        let mut running: f64 = 0.0;
        let mut next_b = a + 1;
        for t in start..e {
            // close every window whose end precedes event t
            while next_b < k && hi[next_b] <= t {
                osc[a * k + next_b] = running;
                next_b += 1;
            }
            if t > start && t < hi_t {
                let mut row: f64 = 0.0;
                for l in start..t {
                    row = row.max(view.d(l, t));
                }
                running = running.max(row);
            }
        }
        while next_b < k {
            osc[a * k + next_b] = running;
            next_b += 1;
        }
        osc_final[a] = running;
    }
    OscTable { osc, osc_final }
}

/// Partition modulus of a metric path view by minimax dynamic
/// programming over the candidate grid.
pub fn modulus_view(view: &MetricView, delta: f64, refine: usize, cap: usize) -> Result<f64> {
    if !(delta > 0.0) || delta > view.t_horizon {
        return Err(Error::invalid(format!(
            "delta = {delta} outside (0, T = {}]",
            view.t_horizon
        )));
    }
    let cands = partition_candidates(view, refine, cap);
    let table = oscillation_table(view, &cands);
    let k = cands.len();
    let mut dp = vec![f64::INFINITY; k];
    dp[0] = 0.0;
    for j in 1..k {
        for i in 0..j {
            if cands[j] - cands[i] >= delta && dp[i].is_finite() {
                let v = dp[i].max(table.osc[i * k + j]);
                if v < dp[j] {
                    dp[j] = v;
                }
            }
        }
    }
    // the single-segment partition {0, T} is always admissible
    let mut best = f64::INFINITY;
    for i in 0..k {
        if view.t_horizon - cands[i] >= delta && dp[i].is_finite() {
            best = best.min(dp[i].max(table.osc_final[i]));
        }
    }
    Ok(best)
}

/// Exhaustive-partition modulus over the same candidate class; exact
/// infimum by enumerating every admissible breakpoint subset.
pub fn modulus_bruteforce_view(
    view: &MetricView,
    delta: f64,
    refine: usize,
    cap: usize,
) -> Result<f64> {
    if !(delta > 0.0) || delta > view.t_horizon {
        return Err(Error::invalid("delta outside (0, T]"));
    }
    let cands = partition_candidates(view, refine, cap);
    let k = cands.len();
    if k > 14 {
        return Err(Error::OracleTooLarge(format!(
            "{k} candidate breakpoints, bound is 14"
        )));
    }
    let table = oscillation_table(view, &cands);
    let interior = k - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << interior) {
        let mut prev = 0usize;
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for b in 0..interior {
            if mask & (1 << b) != 0 {
                let j = b + 1;
                if cands[j] - cands[prev] < delta {
                    ok = false;
                    break;
                }
                worst = worst.max(table.osc[prev * k + j]);
                prev = j;
            }
        }
        if !ok || view.t_horizon - cands[prev] < delta {
            continue;
        }
        worst = worst.max(table.osc_final[prev]);
        best = best.min(worst);
    }
    Ok(best)
}

/// Modulus of a real cadlag path.
pub fn modulus_real(path: &RealCadlagPath, delta: f64) -> Result<f64> {
    modulus_view(&MetricView::from_real(path), delta, 0, 256)
}

pub fn modulus_bruteforce_real(path: &RealCadlagPath, delta: f64) -> Result<f64> {
    // no candidate thinning: oversized instances are refused, never
    // silently approximated
    modulus_bruteforce_view(&MetricView::from_real(path), delta, 0, usize::MAX)
}

/// Modulus of a spectral path in the `U'` norm.
pub fn modulus_dual_u(path: &CadlagPath, delta: f64) -> Result<f64> {
    modulus_view(&MetricView::from_spectral_dual_u(path), delta, 0, 256)
}

/// Pointwise weak projection `t -> <u(t), h>_H` of a spectral path.
pub fn weak_projection_path(path: &CadlagPath, h: &SpectralField) -> Result<RealCadlagPath> {
    if !std::sync::Arc::ptr_eq(h.basis(), path.basis()) {
        return Err(Error::BasisMismatch);
    }
    if h.rep() != Rep::Primal {
        return Err(Error::RepresentationMismatch(
            "projection direction must be primal".into(),
        ));
    }
    let mut bp: Vec<(f64, f64)> = Vec::with_capacity(path.events.len());
    for e in &path.events {
        let v: f64 = e.state.iter().zip(h.coeffs()).map(|(a, hc)| a * hc).sum();
        match bp.last_mut() {
            // duplicate times collapse to the last (right-continuous) value
            Some(last) if last.0 == e.time => last.1 = v,
            _ => bp.push((e.time, v)),
        }
    }
    RealCadlagPath::new(bp, path.t_horizon())
}

/// Options for the time-change search class.
#[derive(Clone, Copy, Debug)]
pub struct TimeChangeOpts {
    /// Cap on the merged candidate node grid.
    pub max_candidates: usize,
    /// Cap on the Pareto front per DP state; 0 means unbounded.
    pub front_cap: usize,
}

impl Default for TimeChangeOpts {
    fn default() -> Self {
        TimeChangeOpts { max_candidates: 40, front_cap: 512 }
    }
}

struct CrossView {
    times_u: Vec<f64>,
    times_v: Vec<f64>,
    t_horizon: f64,
    dist: Vec<f64>,
}

impl CrossView {
    fn build<S>(
        times_u: Vec<f64>,
        states_u: &[S],
        times_v: Vec<f64>,
        states_v: &[S],
        t_horizon: f64,
        d: impl Fn(&S, &S) -> f64,
    ) -> Self {
        let m = times_v.len();
        let mut dist = vec![0.0; times_u.len() * m];
        for (i, a) in states_u.iter().enumerate() {
            for (j, b) in states_v.iter().enumerate() {
                dist[i * m + j] = d(a, b);
            }
        }
        CrossView { times_u, times_v, t_horizon, dist }
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.times_v.len() + j]
    }

    fn state_index(times: &[f64], t: f64) -> usize {
        let mut idx = 0;
        for (i, ti) in times.iter().enumerate() {
            if *ti <= t {
                idx = i;
            } else {
                break;
            }
        }
        idx
    }

    /// `sup_t rho(u(t), v(lambda(t)))` over the segment `[a0, a1)`
    /// mapped linearly onto `[b0, b1)`, by a merged two-pointer walk of
    /// both paths' events.
    fn segment_sup(&self, a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
        let mut p = Self::state_index(&self.times_u, a0);
        let mut q = Self::state_index(&self.times_v, b0);
        let mut worst = self.d(p, q);
        let mut iu = p + 1;
        let mut iv = q + 1;
        let scale = (a1 - a0) / (b1 - b0);
        loop {
            let tu = self.times_u.get(iu).copied().filter(|t| *t < a1);
            let tv = self.times_v.get(iv).copied().filter(|t| *t < b1);
            match (tu, tv) {
                (None, None) => break,
                (Some(_), None) => {
                    p = iu;
                    iu += 1;
                }
                (None, Some(_)) => {
                    q = iv;
                    iv += 1;
                }
                (Some(t1), Some(t2)) => {
                    let pre = a0 + (t2 - b0) * scale;
                    if t1 <= pre {
                        p = iu;
                        iu += 1;
                    } else {
                        q = iv;
                        iv += 1;
                    }
                }
            }
            worst = worst.max(self.d(p, q));
        }
        worst
    }
}

fn merged_candidates(cv: &CrossView, opts: &TimeChangeOpts) -> Vec<f64> {
    let mut c: Vec<f64> = cv
        .times_u
        .iter()
        .chain(cv.times_v.iter())
        .copied()
        .filter(|t| *t < cv.t_horizon)
        .collect();
    c.push(0.0);
    c.push(cv.t_horizon);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.dedup();
    if c.len() > opts.max_candidates {
        let inner: Vec<f64> = c[1..c.len() - 1].to_vec();
        let keep = opts.max_candidates.saturating_sub(2).max(1);
        let mut thin = vec![0.0];
        for k in 0..keep {
            thin.push(inner[k * inner.len() / keep]);
        }
        thin.push(cv.t_horizon);
        thin.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thin.dedup();
        c = thin;
    }
    c
}

#[derive(Clone, Copy, PartialEq)]
struct Triple {
    sup_d: f64,
    time_d: f64,
    slope_d: f64,
}

impl Triple {
    fn total(&self) -> f64 {
        self.sup_d + self.time_d + self.slope_d
    }

    fn dominates(&self, o: &Triple) -> bool {
        self.sup_d <= o.sup_d && self.time_d <= o.time_d && self.slope_d <= o.slope_d
    }
}

fn push_front(front: &mut Vec<Triple>, t: Triple, cap: usize) {
    if front.iter().any(|f| f.dominates(&t)) {
        return;
    }
    front.retain(|f| !t.dominates(f));
    front.push(t);
    if cap > 0 && front.len() > cap {
        // overflow keeps the best totals; every retained time change is
        // still a valid upper-bound witness
        front.sort_by(|a, b| a.total().partial_cmp(&b.total()).unwrap());
        front.truncate(cap);
    }
}

/// Upper bound on
/// `inf_lambda [ sup rho(u, v o lambda) + sup |t - lambda(t)| + sup |log slope| ]`
/// over piecewise-linear increasing time changes with nodes on the
/// merged event grid. The identity time change is in the class, so the
/// result never exceeds the uniform distance.
fn skorokhod_view(cv: &CrossView, opts: &TimeChangeOpts) -> f64 {
    let cands = merged_candidates(cv, opts);
    let k = cands.len();
    let mut fronts: Vec<Vec<Vec<Triple>>> = vec![vec![Vec::new(); k]; k];
    fronts[0][0].push(Triple { sup_d: cv.d(0, 0), time_d: 0.0, slope_d: 0.0 });
    for i in 1..k {
        for j in 1..k {
            if (i == k - 1) != (j == k - 1) {
                continue; // endpoints must be matched to each other
            }
            let mut acc: Vec<Triple> = Vec::new();
            for pi in 0..i {
                for pj in 0..j {
                    if fronts[pi][pj].is_empty() {
                        continue;
                    }
                    let (a0, a1) = (cands[pi], cands[i]);
                    let (b0, b1) = (cands[pj], cands[j]);
                    let seg = cv.segment_sup(a0, a1, b0, b1);
                    let slope = ((b1 - b0) / (a1 - a0)).ln().abs();
                    let node = (a1 - b1).abs();
                    for f in fronts[pi][pj].clone() {
                        push_front(
                            &mut acc,
                            Triple {
                                sup_d: f.sup_d.max(seg),
                                time_d: f.time_d.max(node),
                                slope_d: f.slope_d.max(slope),
                            },
                            opts.front_cap,
                        );
                    }
                }
            }
            fronts[i][j] = acc;
        }
    }
    fronts[k - 1][k - 1]
        .iter()
        .map(Triple::total)
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive search over the same time-change class, for small grids.
fn skorokhod_bruteforce_view(cv: &CrossView, opts: &TimeChangeOpts) -> Result<f64> {
    let cands = merged_candidates(cv, opts);
    let k = cands.len();
    if k > 9 {
        return Err(Error::OracleTooLarge(format!("{k} candidates, bound is 9")));
    }
    fn rec(cv: &CrossView, cands: &[f64], i: usize, j: usize, cur: Triple, best: &mut f64) {
        let k = cands.len();
        if i == k - 1 && j == k - 1 {
            *best = best.min(cur.total());
            return;
        }
        for ni in (i + 1)..k {
            for nj in (j + 1)..k {
                if (ni == k - 1) != (nj == k - 1) {
                    continue;
                }
                let seg = cv.segment_sup(cands[i], cands[ni], cands[j], cands[nj]);
                let slope = ((cands[nj] - cands[j]) / (cands[ni] - cands[i])).ln().abs();
                let node = (cands[ni] - cands[nj]).abs();
                rec(
                    cv,
                    cands,
                    ni,
                    nj,
                    Triple {
                        sup_d: cur.sup_d.max(seg),
                        time_d: cur.time_d.max(node),
                        slope_d: cur.slope_d.max(slope),
                    },
                    best,
                );
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(
        cv,
        &cands,
        0,
        0,
        Triple { sup_d: cv.d(0, 0), time_d: 0.0, slope_d: 0.0 },
        &mut best,
    );
    Ok(best)
}

fn cross_view_real(u: &RealCadlagPath, v: &RealCadlagPath) -> Result<CrossView> {
    if (u.t_horizon - v.t_horizon).abs() > 1e-12 {
        return Err(Error::invalid("paths must share the horizon"));
    }
    let su: Vec<f64> = u.breakpoints.iter().map(|b| b.1).collect();
    let sv: Vec<f64> = v.breakpoints.iter().map(|b| b.1).collect();
    Ok(CrossView::build(
        u.breakpoints.iter().map(|b| b.0).collect(),
        &su,
        v.breakpoints.iter().map(|b| b.0).collect(),
        &sv,
        u.t_horizon,
        |a, b| (a - b).abs(),
    ))
}

/// Skorokhod distance (upper bound over the restricted time-change
/// class) between real cadlag paths.
pub fn skorokhod_distance_real(
    u: &RealCadlagPath,
    v: &RealCadlagPath,
    opts: &TimeChangeOpts,
) -> Result<f64> {
    Ok(skorokhod_view(&cross_view_real(u, v)?, opts))
}

pub fn skorokhod_bruteforce_real(
    u: &RealCadlagPath,
    v: &RealCadlagPath,
    opts: &TimeChangeOpts,
) -> Result<f64> {
    skorokhod_bruteforce_view(&cross_view_real(u, v)?, opts)
}

fn spectral_states(path: &CadlagPath) -> (Vec<f64>, Vec<Vec<f64>>) {
    let times = path.events.iter().map(|e| e.time).collect();
    let states = path.events.iter().map(|e| e.state.clone()).collect();
    (times, states)
}

/// Skorokhod distance between spectral paths in the `U'` norm.
pub fn skorokhod_distance_dual_u(
    u: &CadlagPath,
    v: &CadlagPath,
    opts: &TimeChangeOpts,
) -> Result<f64> {
    if !std::sync::Arc::ptr_eq(u.basis(), v.basis()) {
        return Err(Error::BasisMismatch);
    }
    if (u.t_horizon() - v.t_horizon()).abs() > 1e-12 {
        return Err(Error::invalid("paths must share the horizon"));
    }
    let r = u.basis().hw_r().to_vec();
    let (tu, su) = spectral_states(u);
    let (tv, sv) = spectral_states(v);
    let cv = CrossView::build(tu, &su, tv, &sv, u.t_horizon(), move |a, b| {
        let n = a.len().max(b.len());
        let mut acc = 0.0;
        for i in 0..n {
            let x = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            let w = r[i] * x;
            acc += w * w;
        }
        acc.sqrt()
    });
    Ok(skorokhod_view(&cv, opts))
}

/// The bounded weak-ball state metric
/// `q_r(x, y) = sum_k 2^-k |x_k - y_k| / (1 + |x_k - y_k|)` over the `H`
/// coordinates against the basis.
pub fn q_r_state(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let mut acc = 0.0;
    let mut w = 0.5;
    for i in 0..n {
        let d = (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs();
        acc += w * d / (1.0 + d);
        w *= 0.5;
    }
    acc
}

/// Metric of `D([0,T]; B_w)`: the Skorokhod construction over the
/// weak-ball state metric `q_r`, for paths confined to the `H`-ball of
/// radius `r`.
pub fn weak_ball_metric(
    u: &CadlagPath,
    v: &CadlagPath,
    r: f64,
    opts: &TimeChangeOpts,
) -> Result<f64> {
    if !std::sync::Arc::ptr_eq(u.basis(), v.basis()) {
        return Err(Error::BasisMismatch);
    }
    if u.sup_h_norm() > r || v.sup_h_norm() > r {
        return Err(Error::invalid(format!(
            "ball violation: paths exceed |.|_H <= {r}"
        )));
    }
    let (tu, su) = spectral_states(u);
    let (tv, sv) = spectral_states(v);
    let cv = CrossView::build(tu, &su, tv, &sv, u.t_horizon(), |a, b| q_r_state(a, b));
    Ok(skorokhod_view(&cv, opts))
}

/// Stopping rules for the Aldous table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Fixed deterministic times; each `(path, time)` pair is a sample.
    Deterministic { times: Vec<f64> },
    /// First time the path norm reaches `level` (capped at the horizon).
    FirstHitting { level: f64 },
}

/// Path interface the Aldous estimator needs.
pub trait AldousPath {
    fn horizon(&self) -> f64;
    /// `rho(X(t2), X(t1))`.
    fn increment_distance(&self, t1: f64, t2: f64) -> f64;
    /// First event time at which the path norm reaches `level`.
    fn first_hitting(&self, level: f64) -> Option<f64>;
}

impl AldousPath for RealCadlagPath {
    fn horizon(&self) -> f64 {
        self.t_horizon
    }

    fn increment_distance(&self, t1: f64, t2: f64) -> f64 {
        (self.value_at(t2) - self.value_at(t1)).abs()
    }

    fn first_hitting(&self, level: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .find(|(_, v)| v.abs() >= level)
            .map(|(t, _)| *t)
    }
}

impl AldousPath for CadlagPath {
    fn horizon(&self) -> f64 {
        self.t_horizon()
    }

    fn increment_distance(&self, t1: f64, t2: f64) -> f64 {
        let r = self.basis().hw_r();
        let a = self.state_at(t1);
        let b = self.state_at(t2);
        a.iter()
            .zip(b)
            .zip(r)
            .map(|((x, y), ri)| {
                let d = ri * (x - y);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn first_hitting(&self, level: f64) -> Option<f64> {
        self.events
            .iter()
            .find(|e| CadlagPath::h_norm_of(&e.state) >= level)
            .map(|e| e.time)
    }
}

/// Empirical Aldous increment table: for each `(theta, eta)` the
/// probability `P(rho(X(tau + theta), X(tau)) >= eta)` with Wilson
/// intervals, plus the running supremum over smaller `theta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AldousTable {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    /// `prob[e][t]` for `eta[e]`, `theta[t]`.
    pub prob: Vec<Vec<f64>>,
    pub wilson_low: Vec<Vec<f64>>,
    pub wilson_high: Vec<Vec<f64>>,
    /// Running `sup over theta' <= theta` of the probabilities.
    pub sup_prob: Vec<Vec<f64>>,
    /// Samples where `tau + theta` overran the horizon (capped at `T`).
    pub truncated: usize,
    pub samples: usize,
}

fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    (
        ((center - half) / denom).max(0.0),
        ((center + half) / denom).min(1.0),
    )
}

/// Estimate the Aldous increment probabilities over an ensemble of
/// paths under a stopping rule.
pub fn aldous_estimate<P: AldousPath>(
    paths: &[P],
    rule: &StoppingRule,
    theta_grid: &[f64],
    eta_grid: &[f64],
) -> Result<AldousTable> {
    if paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if theta_grid.is_empty() || eta_grid.is_empty() {
        return Err(Error::invalid("need nonempty theta and eta grids"));
    }
    let mut taus: Vec<(usize, f64)> = Vec::new();
    for (pi, p) in paths.iter().enumerate() {
        match rule {
            StoppingRule::Deterministic { times } => {
                for t in times {
                    if *t < 0.0 || *t > p.horizon() {
                        return Err(Error::invalid(
                            "deterministic stopping time outside [0, T]",
                        ));
                    }
                    taus.push((pi, *t));
                }
            }
            StoppingRule::FirstHitting { level } => {
                let tau = p.first_hitting(*level).unwrap_or(p.horizon());
                taus.push((pi, tau));
            }
        }
    }
    let samples = taus.len();
    let mut truncated = 0usize;
    let mut counts = vec![vec![0usize; theta_grid.len()]; eta_grid.len()];
    for (pi, tau) in &taus {
        let p = &paths[*pi];
        for (ti, theta) in theta_grid.iter().enumerate() {
            let mut t2 = tau + theta;
            if t2 > p.horizon() {
                t2 = p.horizon();
                truncated += 1;
            }
            let d = p.increment_distance(*tau, t2);
            for (ei, eta) in eta_grid.iter().enumerate() {
                if d >= *eta {
                    counts[ei][ti] += 1;
                }
            }
        }
    }
    let mut prob = vec![vec![0.0; theta_grid.len()]; eta_grid.len()];
    let mut lo = prob.clone();
    let mut hi = prob.clone();
    let mut sup = prob.clone();
    for e in 0..eta_grid.len() {
        let mut run: f64 = 0.0;
        for t in 0..theta_grid.len() {
            let p = counts[e][t] as f64 / samples as f64;
            prob[e][t] = p;
            let (l, h) = wilson_interval(counts[e][t], samples, 1.96);
            lo[e][t] = l;
            hi[e][t] = h;
            run = run.max(p);
            sup[e][t] = run;
        }
    }
    Ok(AldousTable {
        theta: theta_grid.to_vec(),
        eta: eta_grid.to_vec(),
        prob,
        wilson_low: lo,
        wilson_high: hi,
        sup_prob: sup,
        truncated,
        samples,
    })
}

/// Modulus decay curve: `(delta, value)` pairs with `delta` descending.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusCurve {
    pub points: Vec<(f64, f64)>,
}

impl ModulusCurve {
    pub fn is_nonincreasing_in_shrinking_delta(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)
    }
}

/// Statistics backing the three-part tightness diagnostic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TightnessReport {
    /// (a): max over paths of `sup_t |u(t)|_H`.
    pub sup_sup_h: f64,
    /// (b): max over paths of `int ||u||_V^q dt`.
    pub v_energy_max: f64,
    pub q: f64,
    pub epsilon: f64,
    /// (c): per-delta `(1 - epsilon)` quantile of the `U'` modulus,
    /// delta descending.
    pub modulus_quantile: ModulusCurve,
    /// Largest pairwise `H` distance seen on any path.
    pub h_diameter: f64,
    /// Pass threshold for the smallest-delta quantile.
    pub threshold: f64,
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
    pub verdict: bool,
}

/// Compute the tightness statistics of an ensemble: the uniform `H`
/// bound, the `L^q(0,T;V)` bound, and the quantile modulus decay, with
/// the verdict thresholded at `threshold_frac` of the path diameter.
pub fn tightness_report(
    ensemble: &Ensemble,
    q: f64,
    delta_grid: &[f64],
    epsilon: f64,
    threshold_frac: f64,
) -> Result<TightnessReport> {
    if ensemble.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::invalid("epsilon must lie in (0, 1)"));
    }
    let mut deltas: Vec<f64> = delta_grid.to_vec();
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    use rayon::prelude::*;
    let per_path: Vec<(f64, f64, f64, Vec<f64>)> = ensemble
        .paths
        .par_iter()
        .map(|p| {
            let view = MetricView::from_spectral_dual_u(p);
            let mods: Vec<f64> = deltas
                .iter()
                .map(|d| modulus_view(&view, *d, 0, 256).unwrap_or(f64::NAN))
                .collect();
            let diam = MetricView::from_spectral_h(p).diameter();
            (p.sup_h_norm(), p.v_energy(q), diam, mods)
        })
        .collect();
    let sup_sup_h = per_path.iter().map(|x| x.0).fold(0.0, f64::max);
    let v_energy_max = per_path.iter().map(|x| x.1).fold(0.0, f64::max);
    let h_diameter = per_path.iter().map(|x| x.2).fold(0.0, f64::max);
    let m = per_path.len();
    let qidx = (((1.0 - epsilon) * m as f64).ceil() as usize).clamp(1, m) - 1;
    let mut points = Vec::with_capacity(deltas.len());
    for (di, d) in deltas.iter().enumerate() {
        let mut vals: Vec<f64> = per_path.iter().map(|x| x.3[di]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.push((*d, vals[qidx]));
    }
    let curve = ModulusCurve { points };
    let threshold = threshold_frac * h_diameter;
    let cond_a = sup_sup_h.is_finite();
    let cond_b = v_energy_max.is_finite();
    let smallest = curve.points.last().map(|p| p.1).unwrap_or(f64::NAN);
    let cond_c = curve.is_nonincreasing_in_shrinking_delta()
        && smallest.is_finite()
        && (smallest <= threshold || h_diameter == 0.0);
    Ok(TightnessReport {
        sup_sup_h,
        v_energy_max,
        q,
        epsilon,
        modulus_quantile: curve,
        h_diameter,
        threshold,
        cond_a,
        cond_b,
        cond_c,
        verdict: cond_a && cond_b && cond_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{GalerkinConfig, GalerkinRun, InitialField};
    use crate::spectral::BasisTable;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn jumpy_path(times_vals: &[(f64, f64)], t: f64) -> RealCadlagPath {
        let mut bp = vec![(0.0, 0.0)];
        bp.extend_from_slice(times_vals);
        RealCadlagPath::new(bp, t).unwrap()
    }

    #[test]
    fn constant_path_has_zero_modulus() {
        let p = RealCadlagPath::constant(2.5, 1.0);
        for d in [0.1, 0.5, 1.0] {
            assert_eq!(modulus_real(&p, d).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_jump_is_isolated_by_a_partition() {
        let p = jumpy_path(&[(0.4, 1.0)], 1.0);
        assert_eq!(modulus_real(&p, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn close_jumps_cost_the_smaller_one() {
        // two jumps 0.05 apart with delta = 0.2: only one boundary fits
        // between them, leaving the smaller jump inside a segment
        let p = jumpy_path(&[(0.5, 1.0), (0.55, 1.6)], 1.0);
        let w = modulus_real(&p, 0.2).unwrap();
        let bf = modulus_bruteforce_real(&p, 0.2).unwrap();
        assert_eq!(w, bf);
        assert!((w - 0.6).abs() < 1e-12, "w = {w}");
    }

    #[test]
    fn dp_matches_bruteforce_on_random_paths() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..300 {
            let k = rng.gen_range(1..=9);
            let mut times: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..0.99)).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let mut bp = vec![(0.0, 0.0)];
            let mut v = 0.0;
            for t in times {
                v += rng.gen_range(-1.0..1.0);
                bp.push((t, v));
            }
            let p = RealCadlagPath::new(bp, 1.0).unwrap();
            for delta in [0.05, 0.17, 0.33, 0.8] {
                let a = modulus_real(&p, delta).unwrap();
                let b = modulus_bruteforce_real(&p, delta).unwrap();
                assert_eq!(a, b, "delta = {delta}, path = {:?}", p.breakpoints);
            }
        }
    }

    #[test]
    fn modulus_monotone_in_delta() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let k = rng.gen_range(1..=10);
            let mut bp = vec![(0.0, 0.0)];
            let mut v = 0.0;
            let mut t = 0.0;
            for _ in 0..k {
                t += rng.gen_range(0.02..0.15);
                v += rng.gen_range(-1.0..1.0);
                if t < 1.0 {
                    bp.push((t, v));
                }
            }
            let p = RealCadlagPath::new(bp, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for delta in [0.9, 0.5, 0.25, 0.12, 0.05] {
                let w = modulus_real(&p, delta).unwrap();
                assert!(w <= prev + 1e-15);
                prev = w;
            }
        }
    }

    #[test]
    fn modulus_rejects_delta_beyond_horizon() {
        let p = RealCadlagPath::constant(0.0, 1.0);
        assert!(modulus_real(&p, 1.5).is_err());
    }

    #[test]
    fn whole_interval_partition_reproduces_global_oscillation() {
        // delta close to T forces the single-segment partition
        let p = jumpy_path(&[(0.3, 1.0), (0.6, -0.5)], 1.0);
        let w = modulus_real(&p, 0.95).unwrap();
        assert!((w - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_rejects_large_instances() {
        let bp: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.04, i as f64)).collect();
        let p = RealCadlagPath::new(bp, 1.0).unwrap();
        assert!(matches!(
            modulus_bruteforce_real(&p, 0.1),
            Err(Error::OracleTooLarge(_))
        ));
    }

    #[test]
    fn skorokhod_self_distance_is_zero() {
        let p = jumpy_path(&[(0.2, 1.0), (0.7, 0.4)], 1.0);
        let d = skorokhod_distance_real(&p, &p, &TimeChangeOpts::default()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn constant_paths_measure_their_gap() {
        let u = RealCadlagPath::constant(1.0, 1.0);
        let v = RealCadlagPath::constant(-0.5, 1.0);
        let d = skorokhod_distance_real(&u, &v, &TimeChangeOpts::default()).unwrap();
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shifted_jump_beats_uniform_distance_and_matches_bruteforce() {
        let u = jumpy_path(&[(0.5, 1.0)], 1.0);
        let v = jumpy_path(&[(0.58, 1.0)], 1.0);
        let opts = TimeChangeOpts::default();
        let d = skorokhod_distance_real(&u, &v, &opts).unwrap();
        // the uniform distance is 1 over the mismatch window
        assert!(d < 1.0, "d = {d}");
        let bf = skorokhod_bruteforce_real(&u, &v, &opts).unwrap();
        assert!((d - bf).abs() <= 1e-9, "dp = {d}, bf = {bf}");
    }

    #[test]
    fn skorokhod_is_bounded_by_uniform_distance_and_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..40 {
            let mk = |rng: &mut ChaCha12Rng| {
                let k = rng.gen_range(0..5);
                let mut bp = vec![(0.0, rng.gen_range(-1.0..1.0))];
                let mut t = 0.0;
                for _ in 0..k {
                    t += rng.gen_range(0.05..0.3);
                    if t < 1.0 {
                        bp.push((t, rng.gen_range(-1.0..1.0)));
                    }
                }
                RealCadlagPath::new(bp, 1.0).unwrap()
            };
            let u = mk(&mut rng);
            let v = mk(&mut rng);
            let d = skorokhod_distance_real(&u, &v, &TimeChangeOpts::default()).unwrap();
            let mut uniform: f64 = 0.0;
            for t in u.breakpoints.iter().chain(v.breakpoints.iter()).map(|b| b.0) {
                uniform = uniform.max((u.value_at(t) - v.value_at(t)).abs());
            }
            assert!(d <= uniform + 1e-12, "d = {d}, uniform = {uniform}");
            let dr = skorokhod_distance_real(&v, &u, &TimeChangeOpts::default()).unwrap();
            assert!((d - dr).abs() <= 1e-9);
        }
    }

    #[test]
    fn weak_projection_extracts_coefficient_traces() {
        let b = BasisTable::build(2, 2, 3.0).unwrap();
        let mut cfg = GalerkinConfig::basic(
            4,
            0.5,
            0.05,
            InitialField::Combination { terms: vec![(0, 1.0), (2, 0.5)] },
            1,
        );
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let path = run.simulate_path().unwrap();
        let h = SpectralField::mode(&b, 2, 1.0);
        let proj = weak_projection_path(&path, &h).unwrap();
        for e in &path.events {
            assert!((proj.value_at(e.time) - e.state[2]).abs() < 1e-15);
        }
        // orthogonal direction gives the zero path
        let h2 = SpectralField::mode(&b, 3, 1.0);
        let proj2 = weak_projection_path(&path, &h2).unwrap();
        assert!(proj2.breakpoints.iter().all(|(_, v)| *v == 0.0));
        // linearity in h
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let h3 = SpectralField::random_primal(&b, b.len(), 1.0, &mut rng);
        let h4 = SpectralField::random_primal(&b, b.len(), 1.0, &mut rng);
        let mut hsum = h3.clone();
        hsum.add_scaled(1.0, &h4);
        let p3 = weak_projection_path(&path, &h3).unwrap();
        let p4 = weak_projection_path(&path, &h4).unwrap();
        let psum = weak_projection_path(&path, &hsum).unwrap();
        for ((t, v), (_, v3)) in psum.breakpoints.iter().zip(&p3.breakpoints) {
            let v4 = p4.value_at(*t);
            assert!((v - (v3 + v4)).abs() < 1e-12);
        }
    }

    #[test]
    fn q_r_of_first_mode_against_zero() {
        assert!((q_r_state(&[1.0, 0.0], &[0.0, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weak_ball_metric_zero_iff_equal_on_grid() {
        let b = BasisTable::build(2, 2, 3.0).unwrap();
        let mut cfg = GalerkinConfig::basic(
            4,
            0.5,
            0.05,
            InitialField::Mode { index: 0, amplitude: 0.8 },
            1,
        );
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let u = run.simulate_path().unwrap();
        let v = u.clone();
        let opts = TimeChangeOpts::default();
        assert_eq!(weak_ball_metric(&u, &v, 1.0, &opts).unwrap(), 0.0);
        assert!(weak_ball_metric(&u, &v, 0.5, &opts).is_err());
        let mut cfg2 = GalerkinConfig::basic(
            4,
            0.5,
            0.05,
            InitialField::Mode { index: 0, amplitude: 0.4 },
            1,
        );
        cfg2.enable_nonlinearity = false;
        let w = GalerkinRun::new(&b, cfg2).unwrap().simulate_path().unwrap();
        assert!(weak_ball_metric(&u, &w, 1.0, &opts).unwrap() > 0.0);
    }

    #[test]
    fn projections_converge_in_the_weak_ball_metric() {
        // u_n = P_n u for a fixed simulated path: the distance to u
        // decreases along n in {4, 8, 16}
        let b = BasisTable::build(2, 3, 3.0).unwrap();
        let mut cfg = GalerkinConfig::basic(
            20,
            0.5,
            0.05,
            InitialField::RandomGaussian { active: 20, scale: 0.7, seed: 4 },
            4,
        );
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let full = run.simulate_path().unwrap();
        let project = |path: &CadlagPath, n: usize| {
            let mut p = path.clone();
            for e in &mut p.events {
                for c in e.state.iter_mut().skip(n) {
                    *c = 0.0;
                }
            }
            p
        };
        let r = full.sup_h_norm() + 1.0;
        let opts = TimeChangeOpts::default();
        let mut prev = f64::INFINITY;
        for n in [4usize, 8, 16] {
            let d = weak_ball_metric(&project(&full, n), &full, r, &opts).unwrap();
            assert!(d <= prev + 1e-12, "n = {n}: {d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn frozen_paths_have_empty_aldous_table() {
        let paths: Vec<RealCadlagPath> = (0..50)
            .map(|i| RealCadlagPath::constant(i as f64, 1.0))
            .collect();
        let table = aldous_estimate(
            &paths,
            &StoppingRule::Deterministic { times: vec![0.0, 0.3] },
            &[0.05, 0.1, 0.2],
            &[0.1, 1.0],
        )
        .unwrap();
        for row in &table.prob {
            assert!(row.iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn horizon_overruns_are_capped_and_counted() {
        let paths = vec![jumpy_path(&[(0.95, 1.0)], 1.0); 10];
        let table = aldous_estimate(
            &paths,
            &StoppingRule::Deterministic { times: vec![0.9] },
            &[0.05, 0.3],
            &[0.5],
        )
        .unwrap();
        // theta = 0.3 overruns the horizon for every path
        assert_eq!(table.truncated, 10);
        // tau = 0.9, capped lookup at T = 1.0 still sees the jump at 0.95
        assert_eq!(table.prob[0][1], 1.0);
    }

    #[test]
    fn poisson_counting_paths_match_exponential_law() {
        use crate::noise::{sample_jumps, FiniteAtom, MarkSpaceSpec};
        let mu = 2.0;
        let spec = MarkSpaceSpec::finite(vec![FiniteAtom { value: vec![1.0], weight: mu }]);
        let n = 10_000;
        let paths: Vec<RealCadlagPath> = (0..n as u64)
            .map(|seed| {
                let s = sample_jumps(&spec, 1.0, seed).unwrap();
                let times: Vec<f64> = s.events.iter().map(|(t, _)| *t).collect();
                RealCadlagPath::counting(&times, 1.0).unwrap()
            })
            .collect();
        let thetas = [0.05, 0.1, 0.2, 0.3, 0.5];
        let table = aldous_estimate(
            &paths,
            &StoppingRule::Deterministic { times: vec![0.0] },
            &thetas,
            &[1.0],
        )
        .unwrap();
        for (ti, theta) in thetas.iter().enumerate() {
            let expect = 1.0 - (-mu * theta).exp();
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            let got = table.prob[0][ti];
            assert!(
                (got - expect).abs() <= 3.0 * sigma,
                "theta = {theta}: {got} vs {expect}"
            );
        }
        // monotone in theta for counting processes
        for w in table.prob[0].windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn tightness_report_trivial_for_constant_ensemble() {
        let b = BasisTable::build(2, 2, 3.0).unwrap();
        let mut cfg = GalerkinConfig::basic(
            4,
            1.0,
            0.1,
            InitialField::Mode { index: 0, amplitude: 1.0 },
            0,
        );
        cfg.enable_stokes = false;
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let ens = run.simulate_ensemble(20, 9).unwrap();
        let report = tightness_report(&ens, 2.0, &[0.4, 0.2, 0.1], 0.05, 0.1).unwrap();
        assert!(report.verdict);
        assert!(report.modulus_quantile.points.iter().all(|(_, w)| *w == 0.0));
        assert!((report.sup_sup_h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_large_jump_still_passes_the_modulus_decay() {
        // jumps are partition-isolatable, so the decay condition holds
        // even with an O(1) jump on the path
        let b = BasisTable::build(2, 2, 3.0).unwrap();
        use crate::noise::{
            FiniteAtom, GaussCoefficient, JumpCoefficient, MarkScalar, MarkSpaceSpec,
            NoiseCoefficients,
        };
        let marks = MarkSpaceSpec::finite(vec![FiniteAtom { value: vec![1.0], weight: 1.2 }]);
        let mut cfg = GalerkinConfig::basic(
            4,
            1.0,
            0.05,
            InitialField::Mode { index: 0, amplitude: 0.5 },
            21,
        );
        cfg.enable_nonlinearity = false;
        cfg.noise = crate::galerkin::NoiseSpec {
            coeffs: NoiseCoefficients::with_derived_constants(
                JumpCoefficient::Additive {
                    amplitude: 1.0,
                    mode: 1,
                    scalar: MarkScalar::Constant { value: 1.0 },
                },
                GaussCoefficient::none(),
                Some(&marks),
                1.0,
            )
            .unwrap(),
            marks: Some(marks),
        };
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let mut path = None;
        for seed in 0..50 {
            let p = run.simulate_path_with_seed(seed).unwrap();
            if p.events.iter().any(|e| e.kind == crate::galerkin::EventKind::Jump) {
                path = Some(p);
                break;
            }
        }
        let p = path.unwrap();
        let mut prev = f64::INFINITY;
        let mut smallest = f64::INFINITY;
        for delta in [0.5, 0.25, 0.12, 0.06, 0.03] {
            let w = modulus_dual_u(&p, delta).unwrap();
            assert!(w <= prev + 1e-12);
            prev = w;
            smallest = w;
        }
        let diam = MetricView::from_spectral_h(&p).diameter();
        assert!(smallest <= 0.1 * diam.max(1e-9), "w = {smallest}, diam = {diam}");
    }
}
