//! Time-homogeneous Poisson random measure sampling, compensated
//! integrals, cylindrical Wiener increments, and validators for the
//! noise assumptions placed on the jump coefficient `F` and the
//! Gaussian coefficient `G`.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{gauss_legendre, BasisTable, SpectralField};

/// One atom of a finite mark space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteAtom {
    pub value: Vec<f64>,
    pub weight: f64,
}

/// Concrete mark space `Y` with a finite intensity measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkSpace {
    /// Finitely many marks with intensity weights.
    Finite { atoms: Vec<FiniteAtom> },
    /// A box in `R^j` with a uniform intensity density (events per unit
    /// time per unit mark volume).
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        rate_density: f64,
        /// Gauss-Legendre points per axis for mark-space quadrature.
        quad_points: usize,
    },
}

/// Mark space plus the bookkeeping for sigma-finite intensities that
/// were truncated to finite mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkSpaceSpec {
    pub space: MarkSpace,
    /// Present when the configured intensity is a truncation of a
    /// sigma-finite measure; the discarded small-jump compensator is not
    /// re-added as drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_note: Option<String>,
}

impl MarkSpaceSpec {
    pub fn finite(atoms: Vec<FiniteAtom>) -> Self {
        MarkSpaceSpec { space: MarkSpace::Finite { atoms }, truncation_note: None }
    }

    /// Total intensity mass `nu(Y)`.
    pub fn total_mass(&self) -> f64 {
        match &self.space {
            MarkSpace::Finite { atoms } => atoms.iter().map(|a| a.weight).sum(),
            MarkSpace::Box { lower, upper, rate_density, .. } => {
                let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
                rate_density * vol
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.space {
            MarkSpace::Finite { atoms } => {
                if atoms.is_empty() || atoms.iter().any(|a| a.weight < 0.0) {
                    return Err(Error::invalid("finite mark space needs nonnegative weights"));
                }
            }
            MarkSpace::Box { lower, upper, rate_density, quad_points } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::invalid("mark box bounds mismatch"));
                }
                if lower.iter().zip(upper).any(|(l, u)| l >= u) {
                    return Err(Error::invalid("mark box must have positive volume"));
                }
                if *rate_density < 0.0 {
                    return Err(Error::invalid("negative intensity density"));
                }
                if *quad_points < 2 {
                    return Err(Error::invalid("mark quadrature needs at least 2 points"));
                }
            }
        }
        if !(self.total_mass() > 0.0) {
            return Err(Error::invalid("intensity measure has zero mass"));
        }
        Ok(())
    }

    /// `integral over Y of f dnu`.
    pub fn integrate_scalar(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        match &self.space {
            MarkSpace::Finite { atoms } => atoms.iter().map(|a| a.weight * f(&a.value)).sum(),
            MarkSpace::Box { lower, upper, rate_density, quad_points } => {
                let (nodes, weights) = tensor_gl(lower, upper, *quad_points);
                rate_density
                    * nodes
                        .iter()
                        .zip(&weights)
                        .map(|(y, w)| w * f(y))
                        .sum::<f64>()
            }
        }
    }

    /// Field-valued mark integral, coefficientwise.
    pub fn integrate_field(
        &self,
        basis: &Arc<BasisTable>,
        f: &dyn Fn(&[f64]) -> SpectralField,
    ) -> Result<SpectralField> {
        let mut acc = SpectralField::zero(basis);
        let mut add = |w: f64, y: &[f64]| {
            let val = f(y);
            acc.add_scaled(w, &val);
        };
        match &self.space {
            MarkSpace::Finite { atoms } => {
                for a in atoms {
                    add(a.weight, &a.value);
                }
            }
            MarkSpace::Box { lower, upper, rate_density, quad_points } => {
                let (nodes, weights) = tensor_gl(lower, upper, *quad_points);
                for (y, w) in nodes.iter().zip(&weights) {
                    add(rate_density * w, y);
                }
            }
        }
        if !acc.is_finite() {
            return Err(Error::QuadratureFailure("non-finite mark integral".into()));
        }
        Ok(acc)
    }

    fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.space {
            MarkSpace::Finite { atoms } => {
                let dist = WeightedIndex::new(atoms.iter().map(|a| a.weight)).expect("validated");
                atoms[dist.sample(rng)].value.clone()
            }
            MarkSpace::Box { lower, upper, .. } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.gen_range(*l..*u))
                .collect(),
        }
    }
}

fn tensor_gl(lower: &[f64], upper: &[f64], pts: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(pts);
    let d = lower.len();
    let n = pts.pow(d as u32);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for p in 0..n {
        let mut rem = p;
        let mut y = vec![0.0; d];
        let mut w = 1.0;
        for ax in 0..d {
            let i = rem % pts;
            rem /= pts;
            let half = (upper[ax] - lower[ax]) / 2.0;
            y[ax] = lower[ax] + half * (xs[i] + 1.0);
            w *= ws[i] * half;
        }
        nodes.push(y);
        weights.push(w);
    }
    (nodes, weights)
}

/// Ordered marked-point realisation of the Poisson random measure on
/// `(0, T] x Y`.
#[derive(Clone, Debug)]
pub struct JumpStream {
    pub events: Vec<(f64, Vec<f64>)>,
    pub seed: u64,
    pub t_horizon: f64,
}

impl JumpStream {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mark\n");
        for (t, y) in &self.events {
            let m: Vec<String> = y.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{}\n", t, m.join(" ")));
        }
        out
    }
}

/// Sample a jump stream: event count `Poisson(T * nu(Y))`, times uniform
/// on `(0, T]` sorted, marks i.i.d. `nu / nu(Y)`.
pub fn sample_jumps(spec: &MarkSpaceSpec, t_horizon: f64, seed: u64) -> Result<JumpStream> {
    if !(t_horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    spec.validate()?;
    let lam = spec.total_mass() * t_horizon;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let count = Poisson::new(lam)
        .map_err(|e| Error::invalid(format!("poisson parameter: {e}")))?
        .sample(&mut rng) as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| (1.0 - rng.gen::<f64>()) * t_horizon)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // ties have probability zero; nudge by one ulp if the RNG ever
    // produces one so downstream code can rely on strict ordering
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = f64::from_bits(times[i - 1].to_bits() + 1);
        }
    }
    let events = times
        .into_iter()
        .map(|t| (t, spec.sample_mark(&mut rng)))
        .collect();
    Ok(JumpStream { events, seed, t_horizon })
}

/// `sum_j xi(t_j, y_j) - int_0^T int_Y xi dnu ds`, the compensator by
/// midpoint quadrature in time (exact for integrands piecewise constant
/// between the `comp_steps` nodes) and exact mark-space integration.
pub fn compensated_integral<F>(
    xi: F,
    jumps: &JumpStream,
    spec: &MarkSpaceSpec,
    basis: &Arc<BasisTable>,
    comp_steps: usize,
) -> Result<SpectralField>
where
    F: Fn(f64, &[f64]) -> SpectralField,
{
    if comp_steps == 0 {
        return Err(Error::invalid("compensator needs at least one time step"));
    }
    let mut acc = SpectralField::zero(basis);
    for (t, y) in &jumps.events {
        acc.add_scaled(1.0, &xi(*t, y));
    }
    let h = jumps.t_horizon / comp_steps as f64;
    for s in 0..comp_steps {
        let tm = (s as f64 + 0.5) * h;
        let slice = spec.integrate_field(basis, &|y| xi(tm, y))?;
        acc.add_scaled(-h, &slice);
    }
    if !acc.is_finite() {
        return Err(Error::QuadratureFailure("non-finite compensated integral".into()));
    }
    Ok(acc)
}

/// Retained cylindrical Wiener modes on a uniform step grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WienerConfig {
    pub modes: usize,
    pub t_horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// Per-step, per-mode Gaussian increments `N(0, dt)`, deterministic per
/// seed.
pub fn wiener_increments(cfg: &WienerConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.modes < 1 {
        return Err(Error::invalid("need at least one Wiener mode"));
    }
    if !(cfg.dt > 0.0) || !(cfg.t_horizon > 0.0) {
        return Err(Error::invalid("invalid Wiener grid"));
    }
    let steps = (cfg.t_horizon / cfg.dt).round() as usize;
    if steps == 0 {
        return Err(Error::invalid("horizon shorter than one step"));
    }
    let normal = Normal::new(0.0, cfg.dt.sqrt()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    Ok((0..steps)
        .map(|_| (0..cfg.modes).map(|_| normal.sample(&mut rng)).collect())
        .collect())
}

/// Scalar function of the mark used inside the coefficient presets.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkScalar {
    Constant { value: f64 },
    /// `s(y) = coupling * y[axis]`.
    Coordinate { axis: usize, coupling: f64 },
}

impl MarkScalar {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            MarkScalar::Constant { value } => *value,
            MarkScalar::Coordinate { axis, coupling } => {
                coupling * y.get(*axis).copied().unwrap_or(0.0)
            }
        }
    }
}

/// Jump coefficient `F(t, u; y)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum JumpCoefficient {
    /// No jump forcing.
    None,
    /// `F = amplitude * s(y) * e_mode`, independent of the state.
    Additive { amplitude: f64, mode: usize, scalar: MarkScalar },
    /// `F = amplitude * s(y) * u`.
    Multiplicative { amplitude: f64, scalar: MarkScalar },
}

impl JumpCoefficient {
    pub fn is_none(&self) -> bool {
        matches!(self, JumpCoefficient::None)
    }

    pub fn field(
        &self,
        _t: f64,
        u: &SpectralField,
        y: &[f64],
        basis: &Arc<BasisTable>,
    ) -> SpectralField {
        match self {
            JumpCoefficient::None => SpectralField::zero(basis),
            JumpCoefficient::Additive { amplitude, mode, scalar } => {
                SpectralField::mode(basis, *mode, amplitude * scalar.eval(y))
            }
            JumpCoefficient::Multiplicative { amplitude, scalar } => {
                u.scaled(amplitude * scalar.eval(y))
            }
        }
    }
}

/// One Hilbert-Schmidt column of the Gaussian coefficient, i.e. the
/// image of one Wiener mode.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WienerColumn {
    /// `u -> sigma * u`.
    Multiplicative { sigma: f64 },
    /// `u -> beta * du/dx_axis`; the column is `V'`-valued on `H`.
    Gradient { beta: f64, axis: usize },
    /// Constant column `amp * e_mode`.
    Additive { amp: f64, mode: usize },
}

/// Gaussian coefficient `G(t, u)` as a finite block of columns.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GaussCoefficient {
    pub columns: Vec<WienerColumn>,
}

impl GaussCoefficient {
    pub fn none() -> Self {
        GaussCoefficient { columns: Vec::new() }
    }

    pub fn column(
        &self,
        k: usize,
        u: &SpectralField,
        basis: &Arc<BasisTable>,
    ) -> Result<SpectralField> {
        match &self.columns[k] {
            WienerColumn::Multiplicative { sigma } => Ok(u.scaled(*sigma)),
            WienerColumn::Gradient { beta, axis } => Ok(u.derivative(*axis)?.scaled(*beta)),
            WienerColumn::Additive { amp, mode } => Ok(SpectralField::mode(basis, *mode, *amp)),
        }
    }

    /// `||G(t, u)||^2` Hilbert-Schmidt into `H`.
    pub fn hs_norm_sq_h(&self, u: &SpectralField, basis: &Arc<BasisTable>) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..self.columns.len() {
            let col = self.column(k, u, basis)?;
            let n = col.norm_h()?;
            acc += n * n;
        }
        Ok(acc)
    }

    /// `||G(t, u)||^2` Hilbert-Schmidt into `V'`.
    pub fn hs_norm_sq_dual_v(&self, u: &SpectralField, basis: &Arc<BasisTable>) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..self.columns.len() {
            let n = self.column(k, u, basis)?.norm_dual_v();
            acc += n * n;
        }
        Ok(acc)
    }
}

/// Constants declared alongside the coefficients; the validators check
/// samples against them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeclaredConstants {
    /// Lipschitz constant of the mark-integrated jump coefficient.
    pub lipschitz_l: f64,
    /// Growth constants per moment order `p in {2, 4, 4+gamma, 8+2gamma}`.
    pub growth_c: Vec<(f64, f64)>,
    pub gamma: f64,
    /// Coercivity fraction, must lie in `(2 - 2/(3+gamma), 2]`.
    pub a: f64,
    pub lambda: f64,
    pub kappa: f64,
    /// Growth constant of `G` into `HS(V')`.
    pub gauss_growth_c: f64,
}

impl DeclaredConstants {
    pub fn moment_orders(gamma: f64) -> [f64; 4] {
        [2.0, 4.0, 4.0 + gamma, 8.0 + 2.0 * gamma]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        let lo = 2.0 - 2.0 / (3.0 + self.gamma);
        if !(self.a > lo && self.a <= 2.0) {
            return Err(Error::invalid(format!(
                "coercivity fraction a = {} outside ({lo}, 2]",
                self.a
            )));
        }
        Ok(())
    }
}

/// The full noise specification: jump coefficient, Gaussian coefficient
/// and their declared constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseCoefficients {
    pub jump: JumpCoefficient,
    pub gauss: GaussCoefficient,
    pub declared: DeclaredConstants,
}

impl NoiseCoefficients {
    /// Derive tight declared constants for the preset coefficient shapes
    /// over the given mark space.
    pub fn with_derived_constants(
        jump: JumpCoefficient,
        gauss: GaussCoefficient,
        spec: Option<&MarkSpaceSpec>,
        gamma: f64,
    ) -> Result<Self> {
        let orders = DeclaredConstants::moment_orders(gamma);
        let (lipschitz_l, growth_c): (f64, Vec<(f64, f64)>) = match (&jump, spec) {
            (JumpCoefficient::None, _) => (0.0, orders.iter().map(|&p| (p, 0.0)).collect()),
            (_, None) => {
                return Err(Error::invalid("jump coefficient declared without a mark space"))
            }
            (JumpCoefficient::Additive { amplitude, scalar, .. }, Some(sp)) => {
                let growth = orders
                    .iter()
                    .map(|&p| {
                        let c =
                            sp.integrate_scalar(&|y| (amplitude * scalar.eval(y)).abs().powf(p));
                        (p, c)
                    })
                    .collect();
                (0.0, growth)
            }
            (JumpCoefficient::Multiplicative { amplitude, scalar }, Some(sp)) => {
                let l = sp.integrate_scalar(&|y| (amplitude * scalar.eval(y)).powi(2));
                let growth = orders
                    .iter()
                    .map(|&p| {
                        let c =
                            sp.integrate_scalar(&|y| (amplitude * scalar.eval(y)).abs().powf(p));
                        (p, c)
                    })
                    .collect();
                (l, growth)
            }
        };
        let mut grad = 0.0;
        let mut lambda = 0.0;
        let mut kappa = 0.0;
        let mut growth = 0.0;
        for col in &gauss.columns {
            match col {
                WienerColumn::Multiplicative { sigma } => {
                    lambda += sigma * sigma;
                    growth += sigma * sigma;
                }
                WienerColumn::Gradient { beta, .. } => {
                    grad += beta * beta;
                    growth += beta * beta;
                }
                WienerColumn::Additive { amp, .. } => {
                    kappa += amp * amp;
                    growth += amp * amp;
                }
            }
        }
        let lo = 2.0 - 2.0 / (3.0 + gamma);
        let a = (2.0 - grad).min(2.0);
        if a <= lo {
            return Err(Error::assumption(
                "(G.2)",
                format!("gradient noise energy {grad} forces a = {a} <= {lo}"),
            ));
        }
        let declared = DeclaredConstants {
            lipschitz_l,
            growth_c,
            gamma,
            a,
            lambda,
            kappa,
            gauss_growth_c: growth.max(f64::MIN_POSITIVE),
        };
        declared.validate()?;
        Ok(NoiseCoefficients { jump, gauss, declared })
    }
}

/// One named inequality check with the worst observed ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub worst: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub witness: Option<String>,
}

/// Result of validating a coefficient block on a sample set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseAudit {
    pub checks: Vec<AuditCheck>,
    pub passed: bool,
}

impl NoiseAudit {
    fn from_checks(checks: Vec<AuditCheck>) -> Self {
        let passed = checks.iter().all(|c| c.satisfied);
        NoiseAudit { checks, passed }
    }

    pub fn into_result(self) -> Result<NoiseAudit> {
        if self.passed {
            Ok(self)
        } else {
            let failed = self
                .checks
                .iter()
                .filter(|c| !c.satisfied)
                .map(|c| {
                    format!(
                        "{} worst {} > bound {}{}",
                        c.name,
                        c.worst,
                        c.bound,
                        c.witness
                            .as_deref()
                            .map(|w| format!(" [{w}]"))
                            .unwrap_or_default()
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::assumption("noise", failed))
        }
    }
}

const AUDIT_SLACK: f64 = 1e-9;

/// Check the jump-coefficient assumptions on a sample set: the
/// square-integrated Lipschitz bound, the moment growth bounds for every
/// declared order, and the requirement that `F` does not vanish on a set
/// of positive intensity.
pub fn audit_f(
    coeffs: &NoiseCoefficients,
    spec: &MarkSpaceSpec,
    samples: &[SpectralField],
    t: f64,
) -> Result<NoiseAudit> {
    if samples.is_empty() {
        return Err(Error::invalid("need at least one sample field"));
    }
    let basis = samples[0].basis();
    let mut checks = Vec::new();

    // side condition: nu{ F(t, x; y) = 0 } must vanish. Checked on
    // nonzero states: every state-linear coefficient vanishes at the
    // origin, and the condition targets degenerate coefficients, not
    // that single state.
    let mut zero_mass: f64 = 0.0;
    let mut zero_witness = None;
    for u in samples {
        if u.coeffs().iter().all(|&c| c == 0.0) {
            continue;
        }
        let mass = spec.integrate_scalar(&|y| {
            let f = coeffs.jump.field(t, u, y, basis);
            if f.coeffs().iter().all(|&c| c == 0.0) {
                1.0
            } else {
                0.0
            }
        });
        if mass > zero_mass {
            zero_mass = mass;
            zero_witness = Some(format!("|u|_H = {:.3}", u.norm_h().unwrap_or(f64::NAN)));
        }
    }
    checks.push(AuditCheck {
        name: "(F.2) nonvanishing".into(),
        worst: zero_mass,
        bound: 0.0,
        satisfied: zero_mass <= AUDIT_SLACK,
        witness: zero_witness.filter(|_| zero_mass > AUDIT_SLACK),
    });

    // Lipschitz in the H norm, over all sample pairs
    let mut worst_l: f64 = 0.0;
    let mut l_witness = None;
    for (i, u1) in samples.iter().enumerate() {
        for u2 in samples.iter().skip(i + 1) {
            let denom = u1.sub(u2).norm_h()?.powi(2);
            if denom == 0.0 {
                continue;
            }
            let num = spec.integrate_scalar(&|y| {
                let df = coeffs
                    .jump
                    .field(t, u1, y, basis)
                    .sub(&coeffs.jump.field(t, u2, y, basis));
                df.coeffs().iter().map(|c| c * c).sum::<f64>()
            });
            let ratio = num / denom;
            if ratio > worst_l {
                worst_l = ratio;
                l_witness = Some(format!(
                    "|u1|_H = {:.3}, |u2|_H = {:.3}",
                    u1.norm_h()?,
                    u2.norm_h()?
                ));
            }
        }
    }
    checks.push(AuditCheck {
        name: "(F.2) Lipschitz".into(),
        worst: worst_l,
        bound: coeffs.declared.lipschitz_l,
        satisfied: worst_l <= coeffs.declared.lipschitz_l + AUDIT_SLACK,
        witness: l_witness.filter(|_| worst_l > coeffs.declared.lipschitz_l + AUDIT_SLACK),
    });

    // moment growth per declared order
    for &(p, cp) in &coeffs.declared.growth_c {
        let mut worst: f64 = 0.0;
        let mut witness = None;
        for u in samples {
            let lhs = spec.integrate_scalar(&|y| {
                let f = coeffs.jump.field(t, u, y, basis);
                f.coeffs().iter().map(|c| c * c).sum::<f64>().powf(p / 2.0)
            });
            let rhs = 1.0 + u.norm_h()?.powf(p);
            let ratio = lhs / rhs;
            if ratio > worst {
                worst = ratio;
                witness = Some(format!("|u|_H = {:.3}", u.norm_h()?));
            }
        }
        checks.push(AuditCheck {
            name: format!("(F.2) growth p = {p}"),
            worst,
            bound: cp,
            satisfied: worst <= cp + AUDIT_SLACK,
            witness: witness.filter(|_| worst > cp + AUDIT_SLACK),
        });
    }

    Ok(NoiseAudit::from_checks(checks))
}

/// `audit_f` that reports a violation as a named assumption failure.
pub fn validate_f(
    coeffs: &NoiseCoefficients,
    spec: &MarkSpaceSpec,
    samples: &[SpectralField],
    t: f64,
) -> Result<NoiseAudit> {
    audit_f(coeffs, spec, samples, t)?.into_result()
}

/// Check the Gaussian coefficient: the coercivity inequality
/// `2 <Au, u> - ||G||_HS^2 >= a ||u||^2 - lambda |u|_H^2 - kappa`
/// and the growth of `G` into `HS(V')`.
pub fn audit_g_coercivity(
    coeffs: &NoiseCoefficients,
    samples: &[SpectralField],
    _t: f64,
) -> Result<NoiseAudit> {
    if samples.is_empty() {
        return Err(Error::invalid("need at least one sample field"));
    }
    coeffs.declared.validate()?;
    let basis = samples[0].basis();
    let d = &coeffs.declared;
    let mut checks = Vec::new();

    let mut worst_gap: f64 = 0.0;
    let mut gap_witness = None;
    for u in samples {
        let grad2 = u.seminorm_grad()?.powi(2);
        let h2 = u.norm_h()?.powi(2);
        let hs = coeffs.gauss.hs_norm_sq_h(u, basis)?;
        let lhs = 2.0 * grad2 - hs;
        let rhs = d.a * grad2 - d.lambda * h2 - d.kappa;
        let gap = rhs - lhs;
        if gap > worst_gap {
            worst_gap = gap;
            gap_witness = Some(format!(
                "|u|_H = {:.3}, ||u|| = {:.3}",
                h2.sqrt(),
                grad2.sqrt()
            ));
        }
    }
    checks.push(AuditCheck {
        name: "(G.2) coercivity".into(),
        worst: worst_gap,
        bound: 0.0,
        satisfied: worst_gap <= AUDIT_SLACK,
        witness: gap_witness.filter(|_| worst_gap > AUDIT_SLACK),
    });

    let mut worst_growth: f64 = 0.0;
    let mut growth_witness = None;
    for u in samples {
        let lhs = coeffs.gauss.hs_norm_sq_dual_v(u, basis)?;
        let rhs = 1.0 + u.norm_h()?.powi(2);
        let ratio = lhs / rhs;
        if ratio > worst_growth {
            worst_growth = ratio;
            growth_witness = Some(format!("|u|_H = {:.3}", u.norm_h()?));
        }
    }
    checks.push(AuditCheck {
        name: "(G.3) growth".into(),
        worst: worst_growth,
        bound: d.gauss_growth_c,
        satisfied: worst_growth <= d.gauss_growth_c + AUDIT_SLACK,
        witness: growth_witness.filter(|_| worst_growth > d.gauss_growth_c + AUDIT_SLACK),
    });

    Ok(NoiseAudit::from_checks(checks))
}

pub fn validate_g_coercivity(
    coeffs: &NoiseCoefficients,
    samples: &[SpectralField],
    t: f64,
) -> Result<NoiseAudit> {
    audit_g_coercivity(coeffs, samples, t)?.into_result()
}
