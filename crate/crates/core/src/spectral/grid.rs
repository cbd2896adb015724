use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::basis::{BasisTable, Phase};
use crate::spectral::field::{Rep, SpectralField};

/// Uniform periodic evaluation grid with cached per-mode trig tables.
///
/// The scalar part of mode `i` at point `p` is cached once, so field
/// evaluation and projection are plain matrix products. The rectangle
/// rule on `res` points per axis integrates trig polynomials of
/// bandwidth `res - 1` exactly, which is what makes the transforms and
/// the convection quadrature exact at the resolutions used here.
pub struct Grid {
    basis: Arc<BasisTable>,
    res: usize,
    npoints: usize,
    /// `tables[i * npoints + p]` = `sqrt(2) * trig(k_i . x_p)`.
    tables: Vec<f64>,
}

impl Grid {
    pub fn new(basis: &Arc<BasisTable>, res: usize) -> Result<Self> {
        let required = 2 * basis.n_max() as usize + 1;
        if res < required {
            return Err(Error::GridUnderResolved { required, got: res });
        }
        Ok(Self::new_unchecked(basis, res))
    }

    /// Grid sized for exact quadrature of triple products of basis
    /// fields (bandwidth `3 n_max`).
    pub fn dealiased(basis: &Arc<BasisTable>) -> Self {
        Self::new_unchecked(basis, 3 * basis.n_max() as usize + 1)
    }

    /// Smallest grid on which coefficient round trips are exact.
    pub fn for_transform(basis: &Arc<BasisTable>) -> Self {
        Self::new_unchecked(basis, 2 * basis.n_max() as usize + 1)
    }

    fn new_unchecked(basis: &Arc<BasisTable>, res: usize) -> Self {
        let d = basis.dim();
        let npoints = res.pow(d as u32);
        let h = std::f64::consts::TAU / res as f64;
        let nmodes = basis.len();
        let mut tables = vec![0.0; nmodes * npoints];
        let sqrt2 = 2f64.sqrt();
        let mut x = [0.0f64; 3];
        for p in 0..npoints {
            let mut rem = p;
            for ax in 0..d {
                x[ax] = (rem % res) as f64 * h;
                rem /= res;
            }
            for (i, md) in basis.modes().iter().enumerate() {
                let mut kx = 0.0;
                for ax in 0..d {
                    kx += md.wave.comp(ax) as f64 * x[ax];
                }
                tables[i * npoints + p] = sqrt2
                    * match md.phase {
                        Phase::Cos => kx.cos(),
                        Phase::Sin => kx.sin(),
                    };
            }
        }
        Grid { basis: Arc::clone(basis), res, npoints, tables }
    }

    pub fn basis(&self) -> &Arc<BasisTable> {
        &self.basis
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn npoints(&self) -> usize {
        self.npoints
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if !Arc::ptr_eq(u.basis(), &self.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    /// Physical-space velocity samples, layout `[point * d + component]`.
    pub fn evaluate(&self, u: &SpectralField) -> Result<Vec<f64>> {
        self.check_field(u)?;
        let d = self.basis.dim();
        let mut out = vec![0.0; self.npoints * d];
        self.evaluate_into(u.coeffs(), &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let d = self.basis.dim();
        out.fill(0.0);
        for (i, md) in self.basis.modes().iter().enumerate() {
            let a = coeffs[i];
            if a == 0.0 {
                continue;
            }
            let tab = &self.tables[i * self.npoints..(i + 1) * self.npoints];
            for c in 0..d {
                let ac = a * md.pol_unit[c];
                if ac == 0.0 {
                    continue;
                }
                for (p, t) in tab.iter().enumerate() {
                    out[p * d + c] += ac * t;
                }
            }
        }
    }

    /// Recover coefficients from velocity samples by quadrature against
    /// each basis mode. Exact (to rounding) for fields in the basis span.
    pub fn project(&self, samples: &[f64]) -> Result<SpectralField> {
        let d = self.basis.dim();
        if samples.len() != self.npoints * d {
            return Err(Error::invalid("sample count does not match grid"));
        }
        let inv = 1.0 / self.npoints as f64;
        let mut coeffs = vec![0.0; self.basis.len()];
        for (i, md) in self.basis.modes().iter().enumerate() {
            let tab = &self.tables[i * self.npoints..(i + 1) * self.npoints];
            let mut acc = 0.0;
            for (p, t) in tab.iter().enumerate() {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += samples[p * d + c] * md.pol_unit[c];
                }
                acc += dot * t;
            }
            coeffs[i] = acc * inv;
        }
        SpectralField::from_coeffs(&self.basis, coeffs, Rep::Primal)
    }

    /// Mean of `|u(x)|^2` over the box, by the same quadrature as the
    /// transforms. Equals `|u|_H^2` for resolved fields (Parseval).
    pub fn mean_square(&self, u: &SpectralField) -> Result<f64> {
        let d = self.basis.dim();
        let samples = self.evaluate(u)?;
        let sum: f64 = samples.iter().map(|s| s * s).sum();
        let _ = d;
        Ok(sum / self.npoints as f64)
    }

    /// Pointwise divergence via spectral differentiation of each
    /// component, then evaluation. Identically zero on the basis span.
    pub fn divergence(&self, u: &SpectralField) -> Result<Vec<f64>> {
        self.check_field(u)?;
        let d = self.basis.dim();
        let mut div = vec![0.0; self.npoints];
        for ax in 0..d {
            let du = u.derivative(ax)?;
            let samples = self.evaluate(&du)?;
            for p in 0..self.npoints {
                div[p] += samples[p * d + ax];
            }
        }
        Ok(div)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Evaluate a field at arbitrary points (no cache); points layout
/// `[point][axis]`, output `[point * d + component]`.
pub(crate) fn evaluate_at_points(u: &SpectralField, points: &[Vec<f64>]) -> Vec<f64> {
    let basis = u.basis();
    let d = basis.dim();
    let sqrt2 = 2f64.sqrt();
    let mut out = vec![0.0; points.len() * d];
    for (i, md) in basis.modes().iter().enumerate() {
        let a = u.coeffs()[i];
        if a == 0.0 {
            continue;
        }
        for (p, x) in points.iter().enumerate() {
            let kx: f64 = (0..d).map(|ax| md.wave.comp(ax) as f64 * x[ax]).sum();
            let t = sqrt2
                * match md.phase {
                    Phase::Cos => kx.cos(),
                    Phase::Sin => kx.sin(),
                };
            for c in 0..d {
                out[p * d + c] += a * md.pol_unit[c] * t;
            }
        }
    }
    out
}
