//! The Stokes form, the convection form `b(u, w, v)` and the bilinear
//! map `B`, together with the truncated Galerkin nonlinearity
//! `B_n(u) = P_n B(chi_n(u), u)`.
//!
//! The convection form is computed pseudo-spectrally: velocity and
//! gradient are evaluated on a grid fine enough that the quadrature of
//! the triple product is exact for every retained triad, then paired
//! with the test field. Antisymmetry and the cancellation
//! `<B(u, v), v> = 0` therefore hold to rounding.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, Rep, SpectralField};

/// Smooth cutoff profile for `theta_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffProfile {
    /// `3x^2 - 2x^3` blend on the unit transition interval.
    Cubic,
    /// `6x^5 - 15x^4 + 10x^3` blend.
    Quintic,
}

/// Cutoff `theta_n`: equal to 1 for `r <= n`, 0 for `r >= n + 1`,
/// nonincreasing in between.
#[derive(Clone, Copy, Debug)]
pub struct CutoffSpec {
    pub level: usize,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn new(level: usize) -> Self {
        CutoffSpec { level, profile: CutoffProfile::Cubic }
    }

    pub fn theta(&self, r: f64) -> f64 {
        let n = self.level as f64;
        if r <= n {
            1.0
        } else if r >= n + 1.0 {
            0.0
        } else {
            let x = r - n;
            let s = match self.profile {
                CutoffProfile::Cubic => x * x * (3.0 - 2.0 * x),
                CutoffProfile::Quintic => x * x * x * (10.0 + x * (-15.0 + 6.0 * x)),
            };
            1.0 - s
        }
    }
}

/// One checked inequality instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorAudit {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub satisfied: bool,
    pub skipped: bool,
    /// Radius band the pair was assigned to, for Lipschitz audits.
    pub band: Option<f64>,
}

impl OperatorAudit {
    pub fn check(lhs: f64, rhs: f64, constant: f64) -> Self {
        OperatorAudit {
            lhs,
            rhs,
            constant,
            satisfied: lhs <= constant * rhs + 1e-12,
            skipped: false,
            band: None,
        }
    }

    pub fn skipped() -> Self {
        OperatorAudit { lhs: 0.0, rhs: 0.0, constant: 0.0, satisfied: true, skipped: true, band: None }
    }
}

/// `A u = ((u, .))` as a dual element: coefficients multiplied by the
/// Stokes eigenvalues.
pub fn stokes_apply(u: &SpectralField) -> Result<SpectralField> {
    if u.rep() != Rep::Primal {
        return Err(Error::RepresentationMismatch("stokes_apply needs a primal field".into()));
    }
    let ev = u.basis().eigenvalues();
    let coeffs: Vec<f64> = u.coeffs().iter().zip(ev).map(|(a, l)| l * a).collect();
    let out = SpectralField::from_coeffs(u.basis(), coeffs, Rep::Dual)?;
    debug_assert!(out.norm_dual_v() <= u.seminorm_grad()? * (1.0 + 1e-12) + 1e-300);
    Ok(out)
}

fn check_trilinear_grid(grid: &Grid) -> Result<()> {
    let required = 3 * grid.basis().n_max() as usize + 1;
    if grid.res() < required {
        return Err(Error::GridUnderResolved { required, got: grid.res() });
    }
    Ok(())
}

fn check_inputs(grid: &Grid, fields: &[&SpectralField]) -> Result<()> {
    for f in fields {
        if !std::sync::Arc::ptr_eq(f.basis(), grid.basis()) {
            return Err(Error::BasisMismatch);
        }
        if f.rep() != Rep::Primal {
            return Err(Error::RepresentationMismatch("convection operands must be primal".into()));
        }
    }
    Ok(())
}

/// Samples of `(u . grad) w` on the grid, layout `[point * d + component]`.
fn convection_samples(u: &SpectralField, w: &SpectralField, grid: &Grid) -> Result<Vec<f64>> {
    let d = grid.basis().dim();
    let np = grid.npoints();
    let us = grid.evaluate(u)?;
    let mut q = vec![0.0; np * d];
    for j in 0..d {
        let dw = w.derivative(j)?;
        let dws = grid.evaluate(&dw)?;
        for p in 0..np {
            let uj = us[p * d + j];
            for c in 0..d {
                q[p * d + c] += uj * dws[p * d + c];
            }
        }
    }
    Ok(q)
}

/// The three-linear convection form `b(u, w, v)` by dealiased quadrature.
pub fn trilinear_b(u: &SpectralField, w: &SpectralField, v: &SpectralField, grid: &Grid) -> Result<f64> {
    check_trilinear_grid(grid)?;
    check_inputs(grid, &[u, w, v])?;
    let d = grid.basis().dim();
    let np = grid.npoints();
    let q = convection_samples(u, w, grid)?;
    let vs = grid.evaluate(v)?;
    let mut acc = 0.0;
    for p in 0..np {
        for c in 0..d {
            acc += q[p * d + c] * vs[p * d + c];
        }
    }
    Ok(acc / np as f64)
}

/// The bilinear map `B(u, w)` as a dual element:
/// `<B(u, w), e_i> = b(u, w, e_i)` for every retained mode.
pub fn b_op(u: &SpectralField, w: &SpectralField, grid: &Grid) -> Result<SpectralField> {
    check_trilinear_grid(grid)?;
    check_inputs(grid, &[u, w])?;
    let q = convection_samples(u, w, grid)?;
    Ok(grid.project(&q)?.with_rep(Rep::Dual))
}

/// `B(u) = B(u, u)`.
pub fn b_diag(u: &SpectralField, grid: &Grid) -> Result<SpectralField> {
    b_op(u, u, grid)
}

/// Truncated Galerkin nonlinearity `B_n(u) = P_n B(chi_n(u), u)` with
/// `chi_n(u) = theta_n(|u|_{U'}) u`. By bilinearity this is
/// `theta_n(|u|_{U'}) P_n B(u, u)`, and the cutoff factor is evaluated
/// first so the result is exactly zero above the outer threshold.
pub fn truncated_bn(u: &SpectralField, spec: &CutoffSpec, grid: &Grid) -> Result<SpectralField> {
    if spec.level < 1 || spec.level > grid.basis().len() {
        return Err(Error::invalid(format!("cutoff level {} out of range", spec.level)));
    }
    let theta = spec.theta(u.norm_dual_u());
    if theta == 0.0 {
        return Ok(SpectralField::zero(grid.basis()));
    }
    let mut bn = b_diag(u, grid)?.project_pn(spec.level)?.with_rep(Rep::Primal);
    if theta != 1.0 {
        bn.scale(theta);
    }
    Ok(bn)
}

/// Per-radius fitted local Lipschitz constants for `B: V -> V'`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzBands {
    bands: Vec<f64>,
    constants: Vec<f64>,
}

impl LipschitzBands {
    pub fn bands(&self) -> &[f64] {
        &self.bands
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// Band a pair of radius `r` falls into: the smallest fitted band
    /// at least `r`.
    pub fn band_for(&self, r: f64) -> Option<(f64, f64)> {
        self.bands
            .iter()
            .zip(&self.constants)
            .find(|(b, _)| **b >= r)
            .map(|(b, c)| (*b, *c))
    }
}

fn lipschitz_ratio(u: &SpectralField, ut: &SpectralField, grid: &Grid) -> Result<Option<f64>> {
    let diff = u.sub(ut);
    let denom = diff.norm_v()?;
    if denom == 0.0 {
        return Ok(None);
    }
    let num = b_diag(u, grid)?.sub(&b_diag(ut, grid)?).norm_dual_v();
    Ok(Some(num / denom))
}

/// Fit `L_r` per radius band from random pairs, then validate on a fresh
/// sample; more than 1% validation violations triggers one refit over
/// the combined sample.
pub fn fit_b_lipschitz(grid: &Grid, bands: &[f64], pairs_per_band: usize, seed: u64) -> Result<LipschitzBands> {
    if bands.is_empty() || bands.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("bands must be strictly increasing and nonempty"));
    }
    let basis = grid.basis();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sample_pair = |rng: &mut ChaCha12Rng, r: f64| {
        // Scale two random fields into the radius-r V-ball.
        let mk = |rng: &mut ChaCha12Rng| {
            let f = SpectralField::random_primal(basis, basis.len(), 1.0, rng);
            let nv = f.norm_v().unwrap();
            let target: f64 = rng.gen::<f64>() * r;
            if nv == 0.0 {
                f
            } else {
                f.scaled(target / nv)
            }
        };
        (mk(rng), mk(rng))
    };
    let mut constants = vec![0.0f64; bands.len()];
    for (bi, &r) in bands.iter().enumerate() {
        for _ in 0..pairs_per_band {
            let (u, ut) = sample_pair(&mut rng, r);
            if let Some(ratio) = lipschitz_ratio(&u, &ut, grid)? {
                constants[bi] = constants[bi].max(ratio);
            }
        }
    }
    // Validation pass with fresh draws.
    for (bi, &r) in bands.iter().enumerate() {
        let mut violations = 0usize;
        let mut worst: f64 = 0.0;
        for _ in 0..pairs_per_band {
            let (u, ut) = sample_pair(&mut rng, r);
            if let Some(ratio) = lipschitz_ratio(&u, &ut, grid)? {
                if ratio > constants[bi] {
                    violations += 1;
                    worst = worst.max(ratio);
                }
            }
        }
        if violations * 100 > pairs_per_band {
            constants[bi] = constants[bi].max(worst);
        }
    }
    Ok(LipschitzBands { bands: bands.to_vec(), constants })
}

/// Audit one pair against the fitted local Lipschitz constant for its
/// radius band. Identical fields give a skipped record.
pub fn lipschitz_audit_b(
    u: &SpectralField,
    ut: &SpectralField,
    table: &LipschitzBands,
    grid: &Grid,
) -> Result<OperatorAudit> {
    let r = u.norm_v()?.max(ut.norm_v()?);
    let (band, constant) = table
        .band_for(r)
        .ok_or_else(|| Error::invalid(format!("no fitted band covers radius {r}")))?;
    match lipschitz_ratio(u, ut, grid)? {
        None => Ok(OperatorAudit::skipped()),
        Some(ratio) => {
            let mut audit = OperatorAudit::check(ratio, 1.0, constant);
            audit.band = Some(band);
            Ok(audit)
        }
    }
}
