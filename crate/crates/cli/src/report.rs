//! Run reports: the JSON schema produced by `analyze` and the
//! human-readable summary plus CSV bundle produced by `report`.

use serde::{Deserialize, Serialize};
use snse_core::estimates::{MomentReport, ScanResult};
use snse_core::noise::NoiseAudit;
use snse_core::paths::{AldousTable, TightnessReport};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timing {
    pub simulate_ms: u64,
    pub analyze_ms: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub moments: MomentReport,
    pub tightness: TightnessReport,
    pub aldous: AldousTable,
    pub failure_count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub basis_hash: String,
    #[serde(default)]
    pub audits: Vec<NoiseAudit>,
    pub levels: Vec<LevelReport>,
    /// Across-level uniformity scans, one per moment order.
    pub scans: Vec<(f64, ScanResult)>,
    pub timing: Timing,
}

impl RunReport {
    /// Human-readable summary, one block per section.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("config hash : {}\n", self.config_hash));
        s.push_str(&format!("basis hash  : {}\n", self.basis_hash));
        for lr in &self.levels {
            s.push_str(&format!(
                "\nlevel n = {} ({} paths, {} failures)\n",
                lr.level, lr.moments.path_count, lr.failure_count
            ));
            for (p, est) in &lr.moments.sup_moments {
                s.push_str(&format!(
                    "  E[sup |u|^{:<4}] = {:.6e}  [{:.6e}, {:.6e}]\n",
                    p, est.mean, est.ci_low, est.ci_high
                ));
            }
            s.push_str(&format!(
                "  E[int ||u||_V^2] = {:.6e}  [{:.6e}, {:.6e}]\n",
                lr.moments.v_energy.mean, lr.moments.v_energy.ci_low, lr.moments.v_energy.ci_high
            ));
            let t = &lr.tightness;
            s.push_str(&format!(
                "  tightness: sup-sup H = {:.4e}, V-energy = {:.4e}, verdict = {}\n",
                t.sup_sup_h, t.v_energy_max, if t.verdict { "pass" } else { "FAIL" }
            ));
            for (d, w) in &t.modulus_quantile.points {
                s.push_str(&format!("    modulus q{:.2} at delta {:.4}: {:.6e}\n", 1.0 - t.epsilon, d, w));
            }
            s.push_str(&format!(
                "  aldous: {} samples, {} truncated\n",
                lr.aldous.samples, lr.aldous.truncated
            ));
        }
        for (p, scan) in &self.scans {
            s.push_str(&format!(
                "\nuniformity scan p = {p}: slope = {:.3e} in [{:.3e}, {:.3e}], {}\n",
                scan.slope,
                scan.slope_ci.0,
                scan.slope_ci.1,
                if scan.pass { "pass" } else { "FAIL" }
            ));
            for (i, (r, lo, hi)) in scan.ratios.iter().enumerate() {
                s.push_str(&format!(
                    "  ratio n{} -> n{}: {:.3} [{:.3}, {:.3}] (limit {})\n",
                    scan.levels[i],
                    scan.levels[i + 1],
                    r,
                    lo,
                    hi,
                    scan.ratio_limit
                ));
            }
        }
        s
    }

    /// Moment table CSV: level, p, mean, ci_low, ci_high.
    pub fn moments_csv(&self) -> String {
        let mut s = String::from("level,p,mean,ci_low,ci_high\n");
        for lr in &self.levels {
            for (p, est) in &lr.moments.sup_moments {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    lr.level, p, est.mean, est.ci_low, est.ci_high
                ));
            }
            s.push_str(&format!(
                "{},v_energy,{},{},{}\n",
                lr.level, lr.moments.v_energy.mean, lr.moments.v_energy.ci_low, lr.moments.v_energy.ci_high
            ));
        }
        s
    }

    /// Modulus quantile curves CSV: level, delta, quantile value.
    pub fn modulus_csv(&self) -> String {
        let mut s = String::from("level,delta,modulus_quantile\n");
        for lr in &self.levels {
            for (d, w) in &lr.tightness.modulus_quantile.points {
                s.push_str(&format!("{},{},{}\n", lr.level, d, w));
            }
        }
        s
    }

    /// Aldous table CSV: level, eta, theta, prob, wilson_low, wilson_high.
    pub fn aldous_csv(&self) -> String {
        let mut s = String::from("level,eta,theta,prob,wilson_low,wilson_high,sup_prob\n");
        for lr in &self.levels {
            let a = &lr.aldous;
            for (ei, eta) in a.eta.iter().enumerate() {
                for (ti, theta) in a.theta.iter().enumerate() {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        lr.level,
                        eta,
                        theta,
                        a.prob[ei][ti],
                        a.wilson_low[ei][ti],
                        a.wilson_high[ei][ti],
                        a.sup_prob[ei][ti]
                    ));
                }
            }
        }
        s
    }
}
