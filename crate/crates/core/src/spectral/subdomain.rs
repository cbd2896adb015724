use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::spectral::field::SpectralField;
use crate::spectral::grid::{evaluate_at_points, gauss_legendre};

/// Nested axis-aligned boxes `O_1 c O_2 c ... c O_Rmax = [0, 2*pi)^d`,
/// emulating the exhaustion of an unbounded domain by bounded subsets.
/// Each box carries a tensor Gauss-Legendre rule for the local seminorm
/// quadrature.
#[derive(Clone, Debug)]
pub struct SubdomainFamily {
    d: usize,
    /// `(lower, upper)` per box, innermost first.
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
    quad_points: usize,
}

impl SubdomainFamily {
    /// Centered cubes with side `2*pi * R / count`; the outermost box is
    /// the full torus.
    pub fn nested(d: usize, count: usize, quad_points: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::invalid("dimension must be 2 or 3"));
        }
        if count < 1 {
            return Err(Error::invalid("need at least one subdomain"));
        }
        let mut boxes = Vec::with_capacity(count);
        let c = TAU / 2.0;
        for r in 1..=count {
            let half = TAU * r as f64 / (2.0 * count as f64);
            let lower = vec![c - half; d];
            let upper = vec![c + half; d];
            boxes.push((lower, upper));
        }
        Self::from_boxes(d, boxes, quad_points)
    }

    pub fn from_boxes(
        d: usize,
        boxes: Vec<(Vec<f64>, Vec<f64>)>,
        quad_points: usize,
    ) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::invalid("empty subdomain family"));
        }
        for (lo, hi) in &boxes {
            if lo.len() != d || hi.len() != d {
                return Err(Error::invalid("box dimension mismatch"));
            }
            for ax in 0..d {
                if !(lo[ax] < hi[ax]) || lo[ax] < -1e-12 || hi[ax] > TAU + 1e-12 {
                    return Err(Error::invalid("box not inside the fundamental domain"));
                }
            }
        }
        for w in boxes.windows(2) {
            let (li, hi_) = &w[0];
            let (lo, ho) = &w[1];
            for ax in 0..d {
                if !(lo[ax] < li[ax] && ho[ax] > hi_[ax]) {
                    return Err(Error::invalid("subdomains must be strictly nested"));
                }
            }
        }
        let (lo, hi) = boxes.last().unwrap();
        for ax in 0..d {
            if (lo[ax] - 0.0).abs() > 1e-9 || (hi[ax] - TAU).abs() > 1e-9 {
                return Err(Error::invalid("outermost subdomain must be the full box"));
            }
        }
        Ok(SubdomainFamily { d, boxes, quad_points })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn bounds(&self, r: usize) -> (&[f64], &[f64]) {
        let (lo, hi) = &self.boxes[r];
        (lo, hi)
    }

    /// Tensor quadrature nodes and weights for box `r`; weights carry the
    /// normalising factor `1 / (2*pi)^d` used throughout the crate.
    pub fn quadrature(&self, r: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if r >= self.boxes.len() {
            return Err(Error::invalid(format!("subdomain index {r} out of range")));
        }
        let (lo, hi) = &self.boxes[r];
        let (xs, ws) = gauss_legendre(self.quad_points);
        let d = self.d;
        let npts = self.quad_points.pow(d as u32);
        let mut nodes = Vec::with_capacity(npts);
        let mut weights = Vec::with_capacity(npts);
        let vol_norm = TAU.powi(d as i32);
        for p in 0..npts {
            let mut rem = p;
            let mut x = vec![0.0; d];
            let mut w = 1.0;
            for ax in 0..d {
                let i = rem % self.quad_points;
                rem /= self.quad_points;
                let half = (hi[ax] - lo[ax]) / 2.0;
                x[ax] = lo[ax] + half * (xs[i] + 1.0);
                w *= ws[i] * half;
            }
            nodes.push(x);
            weights.push(w / vol_norm);
        }
        Ok((nodes, weights))
    }
}

/// Space integral `(1/(2*pi)^d) * integral over O_R of |u(x)|^q dx` for a
/// single field.
pub fn space_integral_q(u: &SpectralField, family: &SubdomainFamily, r: usize, q: f64) -> Result<f64> {
    let basis = u.basis();
    let required = 2 * basis.n_max() as usize + 1;
    if family.quad_points < required {
        return Err(Error::GridUnderResolved { required, got: family.quad_points });
    }
    let (nodes, weights) = family.quadrature(r)?;
    let d = basis.dim();
    let samples = evaluate_at_points(u, &nodes);
    let mut acc = 0.0;
    for (p, w) in weights.iter().enumerate() {
        let mut s2 = 0.0;
        for c in 0..d {
            let v = samples[p * d + c];
            s2 += v * v;
        }
        acc += w * s2.powf(q / 2.0);
    }
    if !acc.is_finite() {
        return Err(Error::QuadratureFailure("non-finite subdomain integral".into()));
    }
    Ok(acc)
}

/// Local seminorm `p_{T,R}(u) = (int_0^T int_{O_R} |u|^q dx dt)^(1/q)` of
/// a piecewise-constant-in-time record, supplied as `(duration, state)`
/// segments.
pub fn local_seminorm<'a, I>(segments: I, family: &SubdomainFamily, r: usize, q: f64) -> Result<f64>
where
    I: IntoIterator<Item = (f64, &'a SpectralField)>,
{
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::invalid(format!("exponent q = {q} outside (1, inf)")));
    }
    let mut acc = 0.0;
    for (dt, state) in segments {
        if dt < 0.0 {
            return Err(Error::invalid("negative segment duration"));
        }
        if dt == 0.0 {
            continue;
        }
        acc += dt * space_integral_q(state, family, r, q)?;
    }
    Ok(acc.powf(1.0 / q))
}
