//! Monte Carlo verification of the a priori moment bounds and the
//! auxiliary inequalities behind them: `sup_t |u|_H^p` statistics with
//! bootstrap intervals, the `V`-energy integral, the Taylor remainder
//! inequality for `|x|^p`, the discrete p = 2 energy identity, and the
//! across-level uniformity scan.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{CadlagPath, Ensemble, EventKind, GalerkinRun};

/// Mean with a bootstrap percentile interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn bootstrap_mean(samples: &[f64], resamples: usize, seed: u64) -> MomentEstimate {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MomentEstimate { mean, ci_low: mean, ci_high: mean };
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += samples[rng.gen_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = means[(resamples as f64 * 0.025) as usize];
    let hi = means[((resamples as f64 * 0.975) as usize).min(resamples - 1)];
    MomentEstimate { mean, ci_low: lo, ci_high: hi }
}

/// How the `V`-energy integral is evaluated along a path record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VQuadrature {
    /// Left-endpoint sum over the piecewise-constant record.
    PiecewiseConstant,
    /// Per-segment reconstruction by the Stokes integrating factor,
    /// exact for runs whose only continuous drift is the Stokes term.
    StokesDecay,
}

/// `int_0^T ||u||_V^2 dt` for one path.
pub fn v_energy_path(path: &CadlagPath, quad: VQuadrature) -> f64 {
    let ev = path.basis().eigenvalues();
    let mut acc = 0.0;
    for (i, e) in path.events.iter().enumerate() {
        let t_next = path
            .events
            .get(i + 1)
            .map(|nx| nx.time)
            .unwrap_or(path.t_horizon());
        let h = t_next - e.time;
        if h <= 0.0 {
            continue;
        }
        match quad {
            VQuadrature::PiecewiseConstant => {
                let sq: f64 = e
                    .state
                    .iter()
                    .zip(ev)
                    .map(|(a, l)| (1.0 + l) * a * a)
                    .sum();
                acc += h * sq;
            }
            VQuadrature::StokesDecay => {
                // int_0^h (1 + l) a^2 e^{-2 l s} ds, exact per mode
                for (a, l) in e.state.iter().zip(ev) {
                    if *a == 0.0 {
                        continue;
                    }
                    let w = if *l > 0.0 {
                        -(-2.0 * l * h).exp_m1() / (2.0 * l)
                    } else {
                        h
                    };
                    acc += (1.0 + l) * a * a * w;
                }
            }
        }
    }
    acc
}

/// `sup_t |u(t)|_H^p` over the recorded events of one path.
pub fn sup_moment_path(path: &CadlagPath, p: f64) -> f64 {
    path.sup_h_norm().powf(p)
}

/// Per-level moment statistics of an ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub level: usize,
    pub path_count: usize,
    pub base_seed: u64,
    /// `(p, estimate of E[sup_t |u|_H^p])` per requested order.
    pub sup_moments: Vec<(f64, MomentEstimate)>,
    /// Estimate of `E[int_0^T ||u||_V^2 dt]`.
    pub v_energy: MomentEstimate,
    /// Raw per-path sup-moment samples, keyed like `sup_moments`; kept
    /// so across-level scans can bootstrap honestly.
    pub sup_samples: Vec<(f64, Vec<f64>)>,
    pub confidence: f64,
}

/// Moment estimates of an ensemble for the orders in `p_list`; requires
/// `p` within `[1, 4 + gamma]`.
pub fn moment_estimates(
    ensemble: &Ensemble,
    p_list: &[f64],
    gamma: f64,
    quad: VQuadrature,
) -> Result<MomentReport> {
    if ensemble.paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    for &p in p_list {
        if !(1.0..=4.0 + gamma).contains(&p) {
            return Err(Error::invalid(format!(
                "moment order p = {p} outside [1, {}]",
                4.0 + gamma
            )));
        }
    }
    let mut sup_moments = Vec::with_capacity(p_list.len());
    let mut sup_samples = Vec::with_capacity(p_list.len());
    for (pi, &p) in p_list.iter().enumerate() {
        let samples: Vec<f64> = ensemble
            .paths
            .iter()
            .map(|path| sup_moment_path(path, p))
            .collect();
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid(
                "non-finite moment sample; failed paths must be excluded",
            ));
        }
        let est = bootstrap_mean(&samples, 400, ensemble.base_seed ^ (pi as u64 + 1));
        sup_moments.push((p, est));
        sup_samples.push((p, samples));
    }
    let energies: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|path| v_energy_path(path, quad))
        .collect();
    let v_energy = bootstrap_mean(&energies, 400, ensemble.base_seed ^ 0xE);
    Ok(MomentReport {
        level: ensemble.level,
        path_count: ensemble.paths.len(),
        base_seed: ensemble.base_seed,
        sup_moments,
        v_energy,
        sup_samples,
        confidence: 0.95,
    })
}

/// Result of fitting the Taylor remainder constant `c_p` in
/// `| |x+h|^p - |x|^p - p |x|^{p-2} <x,h> | <= c_p (|x|^{p-2} + |h|^{p-2}) |h|^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaylorAudit {
    pub p: f64,
    pub c_p: f64,
    /// Violations of the fitted constant on the fresh validation sample.
    pub violations: usize,
    pub validation_size: usize,
    pub refitted: bool,
}

fn taylor_ratio(x: &[f64], h: &[f64], p: f64) -> Option<f64> {
    let nh2: f64 = h.iter().map(|v| v * v).sum();
    if nh2 == 0.0 {
        return None;
    }
    let nx2: f64 = x.iter().map(|v| v * v).sum();
    let dot: f64 = x.iter().zip(h).map(|(a, b)| a * b).sum();
    let nxh2: f64 = x.iter().zip(h).map(|(a, b)| (a + b) * (a + b)).sum();
    let nx = nx2.sqrt();
    let nh = nh2.sqrt();
    let lhs = (nxh2.sqrt().powf(p) - nx.powf(p) - p * nx.powf(p - 2.0) * dot).abs();
    let denom = (nx.powf(p - 2.0) + nh.powf(p - 2.0)) * nh2;
    Some(lhs / denom)
}

/// Fit `c_p` on random coefficient pairs, then validate on a fresh
/// sample; more than 1% violations triggers one refit over the combined
/// sample.
pub fn taylor_inequality_audit(
    p: f64,
    dim: usize,
    fit_samples: usize,
    validate_samples: usize,
    seed: u64,
) -> Result<TaylorAudit> {
    if p < 2.0 {
        return Err(Error::invalid("Taylor audit needs p >= 2"));
    }
    if dim == 0 || fit_samples == 0 || validate_samples == 0 {
        return Err(Error::invalid("empty Taylor audit sample"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha12Rng| -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(rng)).collect()
    };
    let mut c_p: f64 = 0.0;
    for _ in 0..fit_samples {
        let x = draw(&mut rng);
        let h = draw(&mut rng);
        if let Some(r) = taylor_ratio(&x, &h, p) {
            c_p = c_p.max(r);
        }
    }
    let mut violations = 0usize;
    let mut worst = c_p;
    for _ in 0..validate_samples {
        let x = draw(&mut rng);
        let h = draw(&mut rng);
        if let Some(r) = taylor_ratio(&x, &h, p) {
            if r > c_p {
                violations += 1;
                worst = worst.max(r);
            }
        }
    }
    let mut refitted = false;
    if violations * 100 > validate_samples {
        c_p = worst;
        refitted = true;
        violations = 0;
    }
    Ok(TaylorAudit {
        p,
        c_p,
        violations,
        validation_size: validate_samples,
        refitted,
    })
}

/// One entry of the discrete p = 2 energy identity audit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyDefect {
    pub time: f64,
    pub kind: EventKind,
    pub defect: f64,
}

/// Audit the discrete Ito identity for `|u|_H^2` along a path: the
/// realized change per stage against
/// `-2 ||u||^2 dt + 2 <f, u> dt + ||P_n G||_HS^2 dt` plus the realized
/// martingale increments, and the pure jump algebra
/// `|u- + F|^2 - |u-|^2` at jump events.
pub fn energy_balance(run: &GalerkinRun, path: &CadlagPath) -> Result<Vec<EnergyDefect>> {
    let n = path.level();
    let ev = path.basis().eigenvalues();
    let mut out = Vec::new();
    let mut prev = path.events[0].state.clone();
    let mut t_prev = path.events[0].time;
    for event in path.events.iter().skip(1) {
        if event.kind == EventKind::Stop {
            continue;
        }
        let h = event.time - t_prev;
        let (replayed, terms) = run.replay_transition(&prev, t_prev, event)?;
        let mid = &terms.pre_jump_state;
        // continuous stage
        let h2_prev: f64 = prev.iter().map(|a| a * a).sum();
        let h2_mid: f64 = mid.iter().map(|a| a * a).sum();
        let grad2: f64 = prev.iter().zip(ev).map(|(a, l)| l * a * a).sum();
        let fz = run.forcing_at(t_prev);
        let work: f64 = prev.iter().zip(fz.iter()).map(|(a, f)| a * f).sum();
        let u_prev = run.field_from(&prev);
        let mut qv = 0.0;
        for k in 0..run.config().noise.coeffs.gauss.columns.len() {
            let col = run
                .config()
                .noise
                .coeffs
                .gauss
                .column(k, &u_prev, run.basis())?;
            qv += col.coeffs()[..n].iter().map(|c| c * c).sum::<f64>();
        }
        let mart: f64 = prev
            .iter()
            .zip(terms.wiener.iter().zip(&terms.compensator))
            .map(|(a, (w, c))| 2.0 * a * (w + c))
            .sum();
        let stokes_rate = if run.config().enable_stokes { -2.0 * grad2 } else { 0.0 };
        let model = (stokes_rate + 2.0 * work + qv) * h + mart;
        out.push(EnergyDefect {
            time: event.time,
            kind: EventKind::Grid,
            defect: (h2_mid - h2_prev) - model,
        });
        // jump stage: |u- + F|^2 - |u-|^2 against the realized change
        if event.kind == EventKind::Jump {
            let jumped2: f64 = mid
                .iter()
                .zip(&terms.jump)
                .map(|(a, j)| (a + j) * (a + j))
                .sum();
            let h2_post: f64 = event.state.iter().map(|a| a * a).sum();
            out.push(EnergyDefect {
                time: event.time,
                kind: EventKind::Jump,
                defect: (h2_post - h2_mid) - (jumped2 - h2_mid),
            });
        }
        prev = replayed;
        t_prev = event.time;
    }
    Ok(out)
}

/// Across-level uniformity verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub levels: Vec<usize>,
    pub means: Vec<f64>,
    /// Least-squares slope of the mean against `ln n`, with its
    /// bootstrap interval.
    pub slope: f64,
    pub slope_ci: (f64, f64),
    /// Consecutive-level ratios with bootstrap lower/upper bounds.
    pub ratios: Vec<(f64, f64, f64)>,
    pub ratio_limit: f64,
    pub pass: bool,
}

fn slope_of(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Detect statistically significant growth of a moment statistic across
/// Galerkin levels. `samples_per_level` holds the per-path statistic for
/// each level, innermost level first. The verdict passes when the
/// bootstrap slope interval reaches zero or below and no consecutive
/// ratio is above `ratio_limit` even at its lower confidence bound.
pub fn constant_scan(
    samples_per_level: &[(usize, Vec<f64>)],
    ratio_limit: f64,
    seed: u64,
) -> Result<ScanResult> {
    if samples_per_level.len() < 3 {
        return Err(Error::invalid("uniformity scan needs at least 3 levels"));
    }
    if samples_per_level.iter().any(|(_, s)| s.is_empty()) {
        return Err(Error::EmptyEnsemble);
    }
    let levels: Vec<usize> = samples_per_level.iter().map(|(n, _)| *n).collect();
    let xs: Vec<f64> = levels.iter().map(|n| (*n as f64).ln()).collect();
    let means: Vec<f64> = samples_per_level
        .iter()
        .map(|(_, s)| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let slope = slope_of(&xs, &means);

    let b = 500;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(b);
    let mut ratio_boots: Vec<Vec<f64>> = vec![Vec::with_capacity(b); levels.len() - 1];
    for _ in 0..b {
        let res_means: Vec<f64> = samples_per_level
            .iter()
            .map(|(_, s)| {
                let mut acc = 0.0;
                for _ in 0..s.len() {
                    acc += s[rng.gen_range(0..s.len())];
                }
                acc / s.len() as f64
            })
            .collect();
        slopes.push(slope_of(&xs, &res_means));
        for i in 0..res_means.len() - 1 {
            ratio_boots[i].push(res_means[i + 1] / res_means[i]);
        }
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let slope_ci = (
        slopes[(b as f64 * 0.025) as usize],
        slopes[((b as f64 * 0.975) as usize).min(b - 1)],
    );
    let mut ratios = Vec::new();
    for (i, boots) in ratio_boots.iter_mut().enumerate() {
        boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = boots[(b as f64 * 0.025) as usize];
        let hi = boots[((b as f64 * 0.975) as usize).min(b - 1)];
        ratios.push((means[i + 1] / means[i], lo, hi));
    }
    // growth is significant when the whole slope interval is positive or
    // some ratio exceeds the limit even at its lower confidence bound
    let slope_ok = slope_ci.0 <= 0.0;
    let ratios_ok = ratios.iter().all(|(_, lo, _)| *lo <= ratio_limit);
    Ok(ScanResult {
        levels,
        means,
        slope,
        slope_ci,
        ratios,
        ratio_limit,
        pass: slope_ok && ratios_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{ForcingTable, GalerkinConfig, GalerkinRun, InitialField, NoiseSpec};
    use crate::noise::{
        FiniteAtom, GaussCoefficient, JumpCoefficient, MarkScalar, MarkSpaceSpec,
        NoiseCoefficients, WienerColumn,
    };
    use crate::spectral::BasisTable;
    use std::sync::Arc;

    fn basis() -> Arc<BasisTable> {
        BasisTable::build(2, 2, 3.0).unwrap()
    }

    #[test]
    fn frozen_dynamics_moments_are_exact() {
        let b = basis();
        let mut cfg = GalerkinConfig::basic(
            4,
            1.0,
            0.1,
            InitialField::Mode { index: 0, amplitude: 0.8 },
            3,
        );
        cfg.enable_stokes = false;
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let ens = run.simulate_ensemble(10, 1).unwrap();
        let report =
            moment_estimates(&ens, &[2.0, 4.0], 1.0, VQuadrature::PiecewiseConstant).unwrap();
        let (p, est) = report.sup_moments[0];
        assert_eq!(p, 2.0);
        assert!((est.mean - 0.64).abs() < 1e-12);
        let (_, est4) = report.sup_moments[1];
        assert!((est4.mean - 0.8f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn heat_flow_v_energy_matches_closed_form() {
        // u0 = e_1: int ||u||^2 dt = (1 - e^{-2T})/2 for the gradient
        // part; the V-norm doubles it on the unit-eigenvalue mode
        let b = basis();
        let mut cfg = GalerkinConfig::basic(
            4,
            1.0,
            0.01,
            InitialField::Mode { index: 0, amplitude: 1.0 },
            5,
        );
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let path = run.simulate_path().unwrap();
        let got = v_energy_path(&path, VQuadrature::StokesDecay);
        let grad_integral = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!(
            (got - 2.0 * grad_integral).abs() < 1e-8,
            "got {got}, expect {}",
            2.0 * grad_integral
        );
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        let ens = crate::galerkin::Ensemble {
            paths: Vec::new(),
            failures: Vec::new(),
            base_seed: 0,
            level: 4,
        };
        assert!(matches!(
            moment_estimates(&ens, &[2.0], 1.0, VQuadrature::PiecewiseConstant),
            Err(crate::error::Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn moment_orders_outside_range_are_rejected() {
        let b = basis();
        let mut cfg = GalerkinConfig::basic(4, 0.2, 0.1, InitialField::Zero, 0);
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let ens = run.simulate_ensemble(2, 0).unwrap();
        assert!(moment_estimates(&ens, &[6.0], 1.0, VQuadrature::PiecewiseConstant).is_err());
        assert!(moment_estimates(&ens, &[0.5], 1.0, VQuadrature::PiecewiseConstant).is_err());
    }

    #[test]
    fn lyapunov_moment_ordering_across_orders() {
        // E[sup |u|^p]^{1/p} nondecreasing in p
        let b = basis();
        let marks = MarkSpaceSpec::finite(vec![FiniteAtom { value: vec![0.4], weight: 1.0 }]);
        let mut cfg = GalerkinConfig::basic(
            4,
            0.5,
            0.02,
            InitialField::Mode { index: 0, amplitude: 1.0 },
            2,
        );
        cfg.noise = NoiseSpec {
            coeffs: NoiseCoefficients::with_derived_constants(
                JumpCoefficient::Multiplicative {
                    amplitude: 1.0,
                    scalar: MarkScalar::Coordinate { axis: 0, coupling: 1.0 },
                },
                GaussCoefficient { columns: vec![WienerColumn::Multiplicative { sigma: 0.4 }] },
                Some(&marks),
                1.0,
            )
            .unwrap(),
            marks: Some(marks),
        };
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let ens = run.simulate_ensemble(100, 40).unwrap();
        let report =
            moment_estimates(&ens, &[1.0, 2.0, 4.0], 1.0, VQuadrature::StokesDecay).unwrap();
        let mut prev = 0.0;
        for (p, est) in &report.sup_moments {
            let root = est.mean.powf(1.0 / p);
            assert!(root + 1e-12 >= prev, "p = {p}");
            prev = root;
        }
    }

    #[test]
    fn taylor_identity_at_p_two() {
        // |x+h|^2 - |x|^2 - 2<x,h> = |h|^2 exactly, so the ratio is 1/2
        let audit = taylor_inequality_audit(2.0, 8, 20_000, 20_000, 9).unwrap();
        assert!(audit.c_p <= 1.0 + 1e-9, "c_2 = {}", audit.c_p);
        assert!((audit.c_p - 0.5).abs() < 1e-9);
        assert_eq!(audit.violations, 0);
    }

    #[test]
    fn taylor_skips_zero_increments() {
        assert!(taylor_ratio(&[1.0, 2.0], &[0.0, 0.0], 4.0).is_none());
    }

    #[test]
    fn taylor_constant_is_stable_across_fits() {
        for p in [4.0, 5.0] {
            let a = taylor_inequality_audit(p, 8, 100_000, 1000, 1).unwrap();
            let b = taylor_inequality_audit(p, 8, 100_000, 1000, 2).unwrap();
            let rel = (a.c_p - b.c_p).abs() / a.c_p.max(b.c_p);
            assert!(rel <= 0.20, "p = {p}: {} vs {}", a.c_p, b.c_p);
        }
    }

    #[test]
    fn taylor_validates_on_fresh_sample() {
        let audit = taylor_inequality_audit(4.0, 8, 100_000, 100_000, 3).unwrap();
        assert!(
            audit.refitted || audit.violations * 100 <= audit.validation_size,
            "violations = {}",
            audit.violations
        );
    }

    #[test]
    fn energy_defect_is_zero_without_dynamics() {
        let b = basis();
        let mut cfg =
            GalerkinConfig::basic(4, 1.0, 0.1, InitialField::Mode { index: 0, amplitude: 1.0 }, 0);
        cfg.enable_stokes = false;
        cfg.enable_nonlinearity = false;
        let run = GalerkinRun::new(&b, cfg).unwrap();
        let path = run.simulate_path().unwrap();
        for d in energy_balance(&run, &path).unwrap() {
            assert_eq!(d.defect, 0.0);
        }
    }

    #[test]
    fn deterministic_energy_defect_is_second_order() {
        let b = basis();
        let max_defect = |dt: f64| {
            let mut cfg = GalerkinConfig::basic(
                4,
                1.0,
                dt,
                InitialField::Combination { terms: vec![(0, 0.7), (2, -0.4)] },
                0,
            );
            cfg.enable_nonlinearity = false;
            cfg.forcing = ForcingTable::constant_mode(1, 0.3);
            let run = GalerkinRun::new(&b, cfg).unwrap();
            let path = run.simulate_path().unwrap();
            energy_balance(&run, &path)
                .unwrap()
                .iter()
                .map(|d| d.defect.abs())
                .fold(0.0, f64::max)
        };
        let d1 = max_defect(0.02);
        let d2 = max_defect(0.01);
        let ratio = d1 / d2;
        assert!((3.2..=4.8).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn jump_energy_identity_is_exact() {
        let b = basis();
        let marks = MarkSpaceSpec::finite(vec![FiniteAtom { value: vec![1.0], weight: 3.0 }]);
        let mut cfg = GalerkinConfig::basic(
            4,
            1.0,
            0.1,
            InitialField::Mode { index: 0, amplitude: 0.6 },
            8,
        );
        cfg.enable_stokes = false;
        cfg.enable_nonlinearity = false;
        cfg.noise = NoiseSpec {
            coeffs: NoiseCoefficients::with_derived_constants(
                JumpCoefficient::Additive {
                    amplitude: 0.5,
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
        let path = run.simulate_path_with_seed(4).unwrap();
        let defects = energy_balance(&run, &path).unwrap();
        let jump_defects: Vec<&EnergyDefect> = defects
            .iter()
            .filter(|d| d.kind == EventKind::Jump)
            .collect();
        assert!(!jump_defects.is_empty());
        for d in jump_defects {
            assert!(d.defect.abs() <= 1e-12);
        }
    }

    #[test]
    fn scan_requires_three_levels() {
        let s = vec![(4usize, vec![1.0, 1.1]), (8, vec![1.0, 0.9])];
        assert!(constant_scan(&s, 2.0, 0).is_err());
    }

    #[test]
    fn scan_passes_flat_and_flags_growth() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut noisy = |center: f64| -> Vec<f64> {
            (0..150)
                .map(|_| center * (1.0 + 0.05 * rng.gen::<f64>()))
                .collect()
        };
        let flat = vec![(4usize, noisy(1.0)), (8, noisy(1.0)), (16, noisy(1.0))];
        assert!(constant_scan(&flat, 2.0, 3).unwrap().pass);
        let growing = vec![(4usize, noisy(1.0)), (8, noisy(4.0)), (16, noisy(16.0))];
        let scan = constant_scan(&growing, 2.0, 3).unwrap();
        assert!(!scan.pass);
        assert!(scan.ratios.iter().any(|(_, lo, _)| *lo > 2.0));
    }
}
