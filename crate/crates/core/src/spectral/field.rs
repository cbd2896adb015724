use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::basis::{BasisTable, Phase};

/// Whether the coefficients represent an element of `H`/`V` or of a dual
/// space (`V'`, `V_m'`, `U'`). Dual coefficients are duality pairings
/// against the same basis.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rep {
    Primal,
    Dual,
}

/// A velocity field (or dual element) as real coefficients on the
/// enumerated divergence-free basis.
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: Arc<BasisTable>,
    coeffs: Vec<f64>,
    rep: Rep,
}

impl SpectralField {
    pub fn zero(basis: &Arc<BasisTable>) -> Self {
        SpectralField {
            basis: Arc::clone(basis),
            coeffs: vec![0.0; basis.len()],
            rep: Rep::Primal,
        }
    }

    pub fn from_coeffs(basis: &Arc<BasisTable>, coeffs: Vec<f64>, rep: Rep) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::invalid(format!(
                "coefficient count {} does not match basis size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(SpectralField { basis: Arc::clone(basis), coeffs, rep })
    }

    /// The basis mode `e_i` scaled by `amp`.
    pub fn mode(basis: &Arc<BasisTable>, i: usize, amp: f64) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[i] = amp;
        f
    }

    /// Gaussian coefficients on the first `active` modes, scaled by
    /// `scale / sqrt(active)` so the expected `H` norm is about `scale`.
    pub fn random_primal<R: Rng + ?Sized>(
        basis: &Arc<BasisTable>,
        active: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let active = active.min(basis.len());
        let mut f = Self::zero(basis);
        let s = scale / (active.max(1) as f64).sqrt();
        for c in f.coeffs.iter_mut().take(active) {
            let z: f64 = StandardNormal.sample(rng);
            *c = s * z;
        }
        f
    }

    pub fn basis(&self) -> &Arc<BasisTable> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn rep(&self) -> Rep {
        self.rep
    }

    pub fn with_rep(mut self, rep: Rep) -> Self {
        self.rep = rep;
        self
    }

    pub fn same_basis(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.coeffs {
            *a *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn add_scaled(&mut self, c: f64, other: &SpectralField) {
        debug_assert!(self.same_basis(other));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    /// `H` scalar product of two primal fields, or the duality pairing
    /// `<u*, v>` when one side is dual.
    pub fn inner_h(&self, other: &SpectralField) -> Result<f64> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    fn require_primal(&self, what: &str) -> Result<()> {
        if self.rep != Rep::Primal {
            return Err(Error::RepresentationMismatch(format!(
                "{what} is defined for primal fields; dual elements use dual norms"
            )));
        }
        Ok(())
    }

    /// `|u|_H`.
    pub fn norm_h(&self) -> Result<f64> {
        self.require_primal("norm_H")?;
        Ok(self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt())
    }

    /// The Dirichlet seminorm `||u|| = |grad u|_{L^2}`.
    pub fn seminorm_grad(&self) -> Result<f64> {
        self.require_primal("seminorm_grad")?;
        let ev = self.basis.eigenvalues();
        Ok(self
            .coeffs
            .iter()
            .zip(ev)
            .map(|(a, l)| l * a * a)
            .sum::<f64>()
            .sqrt())
    }

    /// `||u||_V^2 = |u|_H^2 + ||u||^2`, accumulated in one pass so the
    /// Pythagoras identity holds to the last bit.
    pub fn norm_v(&self) -> Result<f64> {
        self.require_primal("norm_V")?;
        let ev = self.basis.eigenvalues();
        Ok(self
            .coeffs
            .iter()
            .zip(ev)
            .map(|(a, l)| (1.0 + l) * a * a)
            .sum::<f64>()
            .sqrt())
    }

    /// `V_m` norm with explicit Sobolev order `m`.
    pub fn norm_vm(&self, m: f64) -> Result<f64> {
        self.require_primal("norm_Vm")?;
        let ev = self.basis.eigenvalues();
        Ok(self
            .coeffs
            .iter()
            .zip(ev)
            .map(|(a, l)| (1.0 + l).powf(m) * a * a)
            .sum::<f64>()
            .sqrt())
    }

    /// Holly-Wiciak `U` norm `|x|_U^2 = sum (1/r_n^2) x_n^2`.
    pub fn norm_u(&self) -> Result<f64> {
        self.require_primal("norm_U")?;
        let w = self.basis.u_weights();
        Ok(self
            .coeffs
            .iter()
            .zip(w)
            .map(|(a, wi)| wi * a * a)
            .sum::<f64>()
            .sqrt())
    }

    /// `V'` norm; defined for dual elements and for primal fields via the
    /// embedding `H` into `V'`.
    pub fn norm_dual_v(&self) -> f64 {
        let ev = self.basis.eigenvalues();
        self.coeffs
            .iter()
            .zip(ev)
            .map(|(a, l)| a * a / (1.0 + l))
            .sum::<f64>()
            .sqrt()
    }

    /// `V_m'` norm.
    pub fn norm_dual_vm(&self, m: f64) -> f64 {
        let ev = self.basis.eigenvalues();
        self.coeffs
            .iter()
            .zip(ev)
            .map(|(a, l)| a * a / (1.0 + l).powf(m))
            .sum::<f64>()
            .sqrt()
    }

    /// `U'` norm `|x|_{U'}^2 = sum r_n^2 x_n^2`; this is the norm the
    /// Galerkin cutoff is driven by.
    pub fn norm_dual_u(&self) -> f64 {
        let r = self.basis.hw_r();
        self.coeffs
            .iter()
            .zip(r)
            .map(|(a, ri)| (ri * a) * (ri * a))
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral projection `P_n`: zeroes all coefficients beyond the
    /// first `n` modes. Works on primal and dual elements alike.
    pub fn project_pn(&self, n: usize) -> Result<SpectralField> {
        if n < 1 || n > self.basis.len() {
            return Err(Error::invalid(format!(
                "projection level n = {n} outside 1..={}",
                self.basis.len()
            )));
        }
        let mut out = self.clone();
        for c in out.coeffs.iter_mut().skip(n) {
            *c = 0.0;
        }
        Ok(out)
    }

    /// Exact derivative along `axis` within the basis span: each mode
    /// maps to its trig partner scaled by the wavenumber component.
    pub fn derivative(&self, axis: usize) -> Result<SpectralField> {
        self.require_primal("derivative")?;
        if axis >= self.basis.dim() {
            return Err(Error::invalid(format!("axis {axis} out of range")));
        }
        let mut out = SpectralField::zero(&self.basis);
        for (i, md) in self.basis.modes().iter().enumerate() {
            let kj = md.wave.comp(axis) as f64;
            if kj == 0.0 || self.coeffs[i] == 0.0 {
                continue;
            }
            let sign = match md.phase {
                Phase::Cos => -1.0,
                Phase::Sin => 1.0,
            };
            out.coeffs[md.partner] += sign * kj * self.coeffs[i];
        }
        Ok(out)
    }
}
