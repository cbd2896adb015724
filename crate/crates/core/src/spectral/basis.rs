use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Integer wave vector of a Fourier mode. Mean-zero fields only, so the
/// zero vector is rejected.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct WaveVector {
    comps: [i64; 3],
    d: u8,
}

impl WaveVector {
    pub fn new(comps: &[i64]) -> Result<Self> {
        let d = comps.len();
        if d != 2 && d != 3 {
            return Err(Error::invalid(format!("wave vector dimension {d}, want 2 or 3")));
        }
        if comps.iter().all(|&c| c == 0) {
            return Err(Error::invalid("zero wave vector (mean-zero fields only)"));
        }
        let mut a = [0i64; 3];
        a[..d].copy_from_slice(comps);
        Ok(WaveVector { comps: a, d: d as u8 })
    }

    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn comp(&self, j: usize) -> i64 {
        self.comps[j]
    }

    /// `|k|^2`, the Stokes eigenvalue of the mode.
    pub fn norm_sq(&self) -> i64 {
        self.comps.iter().map(|c| c * c).sum()
    }

    pub fn inf_norm(&self) -> i64 {
        self.comps.iter().map(|c| c.abs()).max().unwrap()
    }
}

/// Trigonometric phase of a real mode.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Phase {
    Cos,
    Sin,
}

/// One real divergence-free basis mode
/// `e(x) = sqrt(2) * trig(k . x) * sigma_hat`.
#[derive(Clone, Debug)]
pub struct Mode {
    pub wave: WaveVector,
    pub pol_index: u8,
    pub phase: Phase,
    /// Unnormalised integer polarization vector; `k . pol_int = 0` exactly.
    pub pol_int: [i64; 3],
    /// Unit polarization vector used for field values.
    pub pol_unit: [f64; 3],
    /// Stokes eigenvalue `|k|^2`.
    pub eigenvalue: f64,
    /// Index of the mode with the other phase and the same `(k, pol)`.
    pub partner: usize,
}

/// Enumerated divergence-free Fourier basis with the derived norm tables.
///
/// Modes are sorted by `(|k|^2, k components, polarization, phase)` so the
/// enumeration is deterministic and the eigenvalues are nondecreasing. The
/// table also carries the `V_m` norms `(1 + |k|^2)^(m/2)` and the
/// Holly-Wiciak weights `1/r_n^2` that define the compactly embedded
/// space `U`.
#[derive(Debug)]
pub struct BasisTable {
    d: usize,
    n_max: i64,
    m: f64,
    eta0: f64,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    vm_norms: Vec<f64>,
    hw_r: Vec<f64>,
    u_weights: Vec<f64>,
}

fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Integer polarization vectors orthogonal to `k`: one in 2D, two in 3D.
fn polarizations(k: &WaveVector) -> Vec<[i64; 3]> {
    match k.dim() {
        2 => vec![[-k.comp(1), k.comp(0), 0]],
        3 => {
            let kv = [k.comp(0), k.comp(1), k.comp(2)];
            // Reference axis: e_z unless k is parallel to it.
            let axis = if kv[0] == 0 && kv[1] == 0 {
                [1, 0, 0]
            } else {
                [0, 0, 1]
            };
            let s1 = cross(kv, axis);
            let s2 = cross(kv, s1);
            vec![s1, s2]
        }
        _ => unreachable!(),
    }
}

impl BasisTable {
    /// Build the basis of all real divergence-free modes with
    /// `0 < |k| <= n_max`, with the default Holly-Wiciak parameter
    /// `eta0 = 1/2`.
    pub fn build(d: usize, n_max: i64, m: f64) -> Result<Arc<Self>> {
        Self::build_with_eta0(d, n_max, m, 0.5)
    }

    pub fn build_with_eta0(d: usize, n_max: i64, m: f64, eta0: f64) -> Result<Arc<Self>> {
        if d != 2 && d != 3 {
            return Err(Error::invalid(format!("dimension {d}, want 2 or 3")));
        }
        if n_max < 1 {
            return Err(Error::invalid("n_max must be >= 1"));
        }
        // The bounded extension of the convection form to H x H x V_m
        // requires m > d/2 + 1.
        if m <= d as f64 / 2.0 + 1.0 {
            return Err(Error::invalid(format!(
                "Sobolev order m = {m} must exceed d/2 + 1 = {}",
                d as f64 / 2.0 + 1.0
            )));
        }

        // Lexicographically positive representative per antipodal pair
        // {k, -k}; |k| <= n_max keeps the eigenvalue ordering aligned
        // with the truncation.
        let mut reps: Vec<WaveVector> = Vec::new();
        let range = -n_max..=n_max;
        let mut scan = |comps: &[i64]| {
            let positive = comps.iter().find(|&&c| c != 0).map(|&c| c > 0).unwrap_or(false);
            if !positive {
                return;
            }
            let k = WaveVector::new(comps).expect("nonzero by construction");
            if k.norm_sq() <= n_max * n_max {
                reps.push(k);
            }
        };
        if d == 2 {
            for k0 in range.clone() {
                for k1 in range.clone() {
                    scan(&[k0, k1]);
                }
            }
        } else {
            for k0 in range.clone() {
                for k1 in range.clone() {
                    for k2 in range.clone() {
                        scan(&[k0, k1, k2]);
                    }
                }
            }
        }

        let mut modes: Vec<Mode> = Vec::new();
        for k in &reps {
            for (pi, raw) in polarizations(k).into_iter().enumerate() {
                let norm = ((raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]) as f64).sqrt();
                let unit = [raw[0] as f64 / norm, raw[1] as f64 / norm, raw[2] as f64 / norm];
                for phase in [Phase::Cos, Phase::Sin] {
                    modes.push(Mode {
                        wave: *k,
                        pol_index: pi as u8,
                        phase,
                        pol_int: raw,
                        pol_unit: unit,
                        eigenvalue: k.norm_sq() as f64,
                        partner: usize::MAX,
                    });
                }
            }
        }

        modes.sort_by(|a, b| {
            let ka = (a.wave.norm_sq(), a.wave.comps, a.pol_index, a.phase as u8);
            let kb = (b.wave.norm_sq(), b.wave.comps, b.pol_index, b.phase as u8);
            ka.cmp(&kb)
        });
        // Link cos/sin partners; after sorting they are adjacent.
        for i in (0..modes.len()).step_by(2) {
            debug_assert_eq!(modes[i].wave, modes[i + 1].wave);
            debug_assert_eq!(modes[i].pol_index, modes[i + 1].pol_index);
            modes[i].partner = i + 1;
            modes[i + 1].partner = i;
        }

        let eigenvalues: Vec<f64> = modes.iter().map(|md| md.eigenvalue).collect();
        let vm_norms: Vec<f64> = eigenvalues.iter().map(|l| (1.0 + l).powf(m / 2.0)).collect();
        let hw_r = holly_wiciak_weights(&vm_norms, eta0)?;
        let u_weights: Vec<f64> = hw_r.iter().map(|r| 1.0 / (r * r)).collect();

        Ok(Arc::new(BasisTable {
            d,
            n_max,
            m,
            eta0,
            modes,
            eigenvalues,
            vm_norms,
            hw_r,
            u_weights,
        }))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    pub fn sobolev_order(&self) -> f64 {
        self.m
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.modes[i]
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vm_norms(&self) -> &[f64] {
        &self.vm_norms
    }

    /// Holly-Wiciak radii `r_n`; the `U'` norm weights are `r_n^2`.
    pub fn hw_r(&self) -> &[f64] {
        &self.hw_r
    }

    /// `U` norm weights `1/r_n^2`.
    pub fn u_weights(&self) -> &[f64] {
        &self.u_weights
    }

    /// Canonical description used for provenance hashing.
    pub fn describe(&self) -> String {
        let mut s = format!(
            "basis v1 d={} n_max={} m={} eta0={}\n",
            self.d, self.n_max, self.m, self.eta0
        );
        for md in &self.modes {
            let _ = writeln!(
                s,
                "{:?};{};{:?};{:?}",
                &md.wave.comps[..self.d],
                md.pol_index,
                md.phase,
                &md.pol_int[..self.d],
            );
        }
        s
    }

    /// Versioned CSV dump: mode index, wave vector, polarization,
    /// eigenvalue, `V_m` norm and `U` weight.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# basis-table v1\n");
        out.push_str("index,k,polarization,phase,eigenvalue,vm_norm,u_weight\n");
        for (i, md) in self.modes.iter().enumerate() {
            let k: Vec<String> = (0..self.d).map(|j| md.wave.comp(j).to_string()).collect();
            let p: Vec<String> = (0..self.d).map(|j| md.pol_int[j].to_string()).collect();
            let phase = match md.phase {
                Phase::Cos => "cos",
                Phase::Sin => "sin",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i,
                k.join(" "),
                p.join(" "),
                phase,
                self.eigenvalues[i],
                self.vm_norms[i],
                self.u_weights[i],
            );
        }
        out
    }
}

/// Holly-Wiciak weight sequence.
///
/// Given the norms `|h_n|_Phi` of an `H`-orthonormal sequence in the
/// target space and a seed `eta0` in `(0, 1)`, runs the recursion
/// `eta_n = (eta_{n-1} + 1) / 2` and returns
/// `r_n = (1 - eta_n) / (2 |h_n|_Phi)`. The weighted space
/// `|x|_U^2 = sum (1/r_n^2) (x|h_n)_H^2` embeds compactly into `Phi`
/// with embedding norm at most `1 - eta0`.
pub fn holly_wiciak_weights(phi_norms: &[f64], eta0: f64) -> Result<Vec<f64>> {
    if !(0.0 < eta0 && eta0 < 1.0) {
        return Err(Error::invalid(format!("eta0 = {eta0} outside (0, 1)")));
    }
    if let Some(bad) = phi_norms.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::invalid(format!("nonpositive |h_n|_Phi = {bad}")));
    }
    let mut eta = eta0;
    let mut r = Vec::with_capacity(phi_norms.len());
    for &p in phi_norms {
        eta = (eta + 1.0) / 2.0;
        r.push((1.0 - eta) / (2.0 * p));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_low_modes_2d() {
        // |k| <= 1 leaves k = (1,0) and (0,1) up to sign; one polarization
        // each in 2D, cos and sin phases.
        let basis = BasisTable::build(2, 1, 3.0).unwrap();
        assert_eq!(basis.len(), 4);
        for md in basis.modes() {
            assert_eq!(md.wave.norm_sq(), 1);
        }
    }

    #[test]
    fn counts_low_modes_3d() {
        let basis = BasisTable::build(3, 1, 3.0).unwrap();
        // Three axis pairs, two polarizations, two phases.
        assert_eq!(basis.len(), 12);
    }

    #[test]
    fn modes_are_divergence_free_in_integer_arithmetic() {
        let basis = BasisTable::build(3, 3, 3.0).unwrap();
        for md in basis.modes() {
            let dot: i64 = (0..3).map(|j| md.wave.comp(j) * md.pol_int[j]).sum();
            assert_eq!(dot, 0);
        }
    }

    #[test]
    fn eigenvalues_nondecreasing_and_first_is_one() {
        let basis = BasisTable::build(2, 4, 3.0).unwrap();
        let ev = basis.eigenvalues();
        assert_eq!(ev[0], 1.0);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_low_sobolev_order() {
        assert!(BasisTable::build(2, 2, 2.0).is_err());
        assert!(BasisTable::build(3, 2, 2.5).is_err());
        assert!(BasisTable::build(3, 2, 2.6).is_ok());
    }

    #[test]
    fn eta_recursion_from_half() {
        let r = holly_wiciak_weights(&[1.0, 1.0, 1.0], 0.5).unwrap();
        // eta = 3/4, 7/8, 15/16 -> r = 1/8, 1/16, 1/32.
        assert_eq!(r, vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]);
    }

    #[test]
    fn constant_phi_norms_scale_r() {
        let c = 2.5;
        let r = holly_wiciak_weights(&[c], 0.5).unwrap();
        assert!((r[0] - 1.0 / (8.0 * c)).abs() < 1e-15);
    }

    #[test]
    fn hw_rejects_bad_eta0() {
        assert!(holly_wiciak_weights(&[1.0], 0.0).is_err());
        assert!(holly_wiciak_weights(&[1.0], 1.0).is_err());
    }

    #[test]
    fn dual_u_norms_of_modes_strictly_decrease() {
        let basis = BasisTable::build(2, 3, 3.0).unwrap();
        let r = basis.hw_r();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn csv_dump_is_versioned_and_complete() {
        let basis = BasisTable::build(2, 1, 3.0).unwrap();
        let csv = basis.to_csv();
        assert!(csv.starts_with("# basis-table v1\n"));
        // header + one row per mode
        assert_eq!(csv.lines().count(), 2 + basis.len());
        assert!(csv.contains("index,k,polarization,phase,eigenvalue,vm_norm,u_weight"));
    }

    #[test]
    fn wave_vector_rejects_zero() {
        assert!(WaveVector::new(&[0, 0]).is_err());
        assert!(WaveVector::new(&[0, 0, 0]).is_err());
    }
}
