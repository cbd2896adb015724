//! Command implementations: validate, simulate, analyze, report.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use snse_core::estimates::{constant_scan, moment_estimates, VQuadrature};
use snse_core::galerkin::GalerkinRun;
use snse_core::noise::{audit_f, audit_g_coercivity, NoiseAudit};
use snse_core::paths::{aldous_estimate, tightness_report};
use snse_core::spectral::{BasisTable, Grid, SpectralField};

use crate::config::ExperimentConfig;
use crate::persist::{read_ensemble, sha256_hex, write_ensemble};
use crate::report::{LevelReport, RunReport, Timing};
use crate::CliError;

pub struct OutDirs {
    pub root: PathBuf,
}

impl OutDirs {
    pub fn resolve(cli_out: Option<PathBuf>, cfg: &ExperimentConfig) -> OutDirs {
        let root = cli_out
            .or_else(|| cfg.run.out_dir.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var("SNSE_OUT").ok().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("snse-out"));
        OutDirs { root }
    }

    fn ensure(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Ingestion(format!("cannot create output dir: {e}")))
    }

    fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn basis_hash(basis: &Arc<BasisTable>) -> String {
    sha256_hex(&basis.describe())
}

/// Deterministic validation sample: the zero field, low modes, gradient
/// witnesses aligned with each axis, and random fields over several
/// scales.
fn validation_fields(basis: &Arc<BasisTable>) -> Vec<SpectralField> {
    let mut out = vec![SpectralField::zero(basis)];
    for i in 0..basis.len().min(4) {
        out.push(SpectralField::mode(basis, i, 1.0));
    }
    for ax in 0..basis.dim() {
        if let Some(idx) = basis.modes().iter().position(|m| {
            (0..basis.dim()).all(|j| (j == ax) == (m.wave.comp(j) != 0))
        }) {
            out.push(SpectralField::mode(basis, idx, 2.0));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED);
    for scale in [0.5, 1.0, 2.0, 5.0] {
        for _ in 0..5 {
            out.push(SpectralField::random_primal(basis, basis.len(), scale, &mut rng));
        }
    }
    out
}

fn basis_self_checks(basis: &Arc<BasisTable>) -> Result<(), CliError> {
    // orthonormality through the grid transform
    let grid = Grid::for_transform(basis);
    let mut rng = ChaCha12Rng::seed_from_u64(0xBA515);
    for _ in 0..3 {
        let u = SpectralField::random_primal(basis, basis.len(), 1.0, &mut rng);
        let back = grid.project(&grid.evaluate(&u).map_err(CliError::from_core)?)
            .map_err(CliError::from_core)?;
        for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
            if (a - b).abs() > 1e-12 {
                return Err(CliError::Assumption(
                    "basis transform round trip exceeded 1e-12".into(),
                ));
            }
        }
    }
    for md in basis.modes() {
        let dot: i64 = (0..basis.dim())
            .map(|j| md.wave.comp(j) * md.pol_int[j])
            .sum();
        if dot != 0 {
            return Err(CliError::Assumption("non-solenoidal basis mode".into()));
        }
    }
    if !basis.hw_r().windows(2).all(|w| w[1] < w[0]) {
        return Err(CliError::Assumption("Holly-Wiciak radii not decreasing".into()));
    }
    Ok(())
}

fn print_audit(name: &str, audit: &NoiseAudit) {
    println!("{name}: {}", if audit.passed { "pass" } else { "FAIL" });
    for c in &audit.checks {
        println!(
            "  {:<24} worst {:>12.5e}  bound {:>12.5e}  {}{}",
            c.name,
            c.worst,
            c.bound,
            if c.satisfied { "ok" } else { "VIOLATED" },
            c.witness
                .as_deref()
                .map(|w| format!("  [{w}]"))
                .unwrap_or_default()
        );
    }
}

/// `validate`: assumption audits over a deterministic sample set plus
/// basis self-checks; assumption failures exit with code 2.
pub fn cmd_validate(config_path: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let basis = cfg.build_basis()?;
    basis_self_checks(&basis)?;
    println!(
        "basis: d = {}, n_max = {}, N = {} modes, m = {}",
        basis.dim(),
        basis.n_max(),
        basis.len(),
        basis.sobolev_order()
    );
    for l in &cfg.galerkin.levels {
        if *l < 1 || *l > basis.len() {
            return Err(CliError::Ingestion(format!(
                "level {l} exceeds basis size {}",
                basis.len()
            )));
        }
    }
    let noise = cfg.resolve_noise()?;
    let samples = validation_fields(&basis);
    let mut failed = false;
    if let Some(marks) = &noise.marks {
        let fa = audit_f(&noise.coeffs, marks, &samples, 0.0).map_err(CliError::from_core)?;
        print_audit("(F.1)-(F.2) jump coefficient", &fa);
        failed |= !fa.passed;
    } else {
        println!("(F.1)-(F.2) jump coefficient: not configured");
    }
    let ga = audit_g_coercivity(&noise.coeffs, &samples, 0.0).map_err(CliError::from_core)?;
    print_audit("(G.2)-(G.3) Gaussian coefficient", &ga);
    failed |= !ga.passed;
    let forcing = cfg.load_forcing(config_path)?;
    let f_l2 = forcing.l2_dual_v_norm_sq(&basis, cfg.galerkin.t_horizon);
    println!("(A.1) forcing: ||f||^2 in L2(0,T;V') = {f_l2:.6e}");
    if !f_l2.is_finite() {
        return Err(CliError::Assumption("forcing is not square integrable".into()));
    }
    if failed {
        return Err(CliError::Assumption("noise assumption audit failed".into()));
    }
    println!("validate: all assumption audits passed");
    Ok(())
}

fn with_pool<T>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Other(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// `simulate`: one persisted ensemble per configured level.
pub fn cmd_simulate(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    level: Option<usize>,
    csv: bool,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let dirs = OutDirs::resolve(out, &cfg);
    dirs.ensure()?;
    let basis = cfg.build_basis()?;
    let config_hash = sha256_hex(&cfg.canonical_json());
    let bhash = basis_hash(&basis);
    let forcing = cfg.load_forcing(config_path)?;
    let base_seed = seed.unwrap_or(cfg.run.base_seed);
    let levels: Vec<usize> = match level {
        Some(l) => {
            if !cfg.galerkin.levels.contains(&l) {
                return Err(CliError::Ingestion(format!(
                    "level {l} is not in the configured level list"
                )));
            }
            vec![l]
        }
        None => cfg.galerkin.levels.clone(),
    };
    std::fs::write(dirs.file("basis.csv"), basis.to_csv())
        .map_err(|e| CliError::Ingestion(format!("cannot write basis.csv: {e}")))?;
    let t0 = Instant::now();
    let mut total_failures = 0usize;
    for l in &levels {
        let gcfg = cfg.galerkin_config(&basis, *l, forcing.clone(), base_seed)?;
        let run = GalerkinRun::new(&basis, gcfg).map_err(CliError::from_core)?;
        let workers = workers.unwrap_or(cfg.run.workers);
        let ensemble = with_pool(workers, || run.simulate_ensemble(cfg.run.paths, base_seed))?
            .map_err(CliError::from_core)?;
        total_failures += ensemble.failures.len();
        let fname = format!("ensemble_n{l}.bin");
        write_ensemble(&dirs.file(&fname), &ensemble, &config_hash, &bhash)?;
        if csv {
            let csv_name = format!("paths_n{l}.csv");
            std::fs::write(
                dirs.file(&csv_name),
                crate::persist::ensemble_csv(&ensemble, &config_hash),
            )
            .map_err(|e| CliError::Ingestion(format!("cannot write {csv_name}: {e}")))?;
        }
        println!(
            "level {l}: {} paths, {} failures -> {}",
            ensemble.paths.len(),
            ensemble.failures.len(),
            dirs.file(&fname).display()
        );
        for (idx, err) in &ensemble.failures {
            eprintln!("  path {idx}: {err}");
        }
    }
    let manifest = serde_json::json!({
        "config_hash": config_hash,
        "basis_hash": bhash,
        "levels": levels,
        "paths": cfg.run.paths,
        "base_seed": base_seed,
        "t_horizon": cfg.galerkin.t_horizon,
        "dt": cfg.galerkin.dt,
    });
    std::fs::write(
        dirs.file("run.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest"),
    )
    .map_err(|e| CliError::Ingestion(format!("cannot write run.json: {e}")))?;
    println!("simulate: done in {} ms", t0.elapsed().as_millis());
    if total_failures > 0 {
        return Err(CliError::Integration(format!(
            "{total_failures} paths failed integration"
        )));
    }
    Ok(())
}

/// `analyze`: moment, tightness and Aldous sections per level plus the
/// across-level uniformity scans, written as a JSON run report.
pub fn cmd_analyze(
    config_path: &Path,
    ensembles: &Path,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let dirs = OutDirs::resolve(out.or(Some(ensembles.to_path_buf())), &cfg);
    dirs.ensure()?;
    let basis = cfg.build_basis()?;
    let config_hash = sha256_hex(&cfg.canonical_json());
    let bhash = basis_hash(&basis);
    let t0 = Instant::now();
    let mut levels = Vec::new();
    type LevelSamples = Vec<(usize, Vec<f64>)>;
    let mut per_p_samples: Vec<(f64, LevelSamples)> = cfg
        .analysis
        .p_list
        .iter()
        .map(|p| (*p, Vec::new()))
        .collect();
    for l in &cfg.galerkin.levels {
        let fname = ensembles.join(format!("ensemble_n{l}.bin"));
        if !fname.exists() {
            return Err(CliError::Ingestion(format!("missing ensemble file {fname:?}")));
        }
        let loaded = read_ensemble(&fname, &basis, cfg.galerkin.t_horizon)?;
        if loaded.config_hash != config_hash {
            return Err(CliError::Ingestion(format!(
                "config hash mismatch for level {l}: file {} vs config {}",
                loaded.config_hash, config_hash
            )));
        }
        if loaded.basis_hash != bhash {
            return Err(CliError::Ingestion(format!("basis hash mismatch for level {l}")));
        }
        let ens = loaded.ensemble;
        let quad = if cfg.galerkin.enable_stokes {
            VQuadrature::StokesDecay
        } else {
            VQuadrature::PiecewiseConstant
        };
        let moments = moment_estimates(&ens, &cfg.analysis.p_list, cfg.noise.gamma, quad)
            .map_err(CliError::from_core)?;
        for (p, samples) in &moments.sup_samples {
            if let Some(slot) = per_p_samples.iter_mut().find(|(pp, _)| pp == p) {
                slot.1.push((*l, samples.clone()));
            }
        }
        let tightness = tightness_report(
            &ens,
            cfg.analysis.q,
            &cfg.analysis.delta_grid,
            cfg.analysis.epsilon,
            cfg.analysis.tightness_threshold_frac,
        )
        .map_err(CliError::from_core)?;
        let aldous = aldous_estimate(
            &ens.paths,
            &cfg.analysis.stopping,
            &cfg.analysis.theta_grid,
            &cfg.analysis.eta_grid,
        )
        .map_err(CliError::from_core)?;
        levels.push(LevelReport {
            level: *l,
            moments,
            tightness,
            aldous,
            failure_count: cfg.run.paths.saturating_sub(ens.paths.len()),
        });
    }
    let mut scans = Vec::new();
    if cfg.galerkin.levels.len() >= 3 {
        for (p, samples) in &per_p_samples {
            let scan = constant_scan(samples, cfg.analysis.ratio_limit, cfg.run.base_seed)
                .map_err(CliError::from_core)?;
            scans.push((*p, scan));
        }
    }
    let report = RunReport {
        config_hash,
        basis_hash: bhash,
        audits: Vec::new(),
        levels,
        scans,
        timing: Timing { simulate_ms: 0, analyze_ms: t0.elapsed().as_millis() as u64 },
    };
    let path = dirs.file("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report"))
        .map_err(|e| CliError::Ingestion(format!("cannot write report: {e}")))?;
    println!("analyze: wrote {}", path.display());
    Ok(())
}

/// `report`: human-readable summary plus the plot-ready CSV bundle.
pub fn cmd_report(report_path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| CliError::Ingestion(format!("cannot read report: {e}")))?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Ingestion(format!("report schema error: {e}")))?;
    if report.levels.is_empty() {
        return Err(CliError::Ingestion("empty report: no level sections".into()));
    }
    print!("{}", report.summary());
    let root = out
        .or_else(|| report_path.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&root)
        .map_err(|e| CliError::Ingestion(format!("cannot create output dir: {e}")))?;
    let pairs = [
        ("moments.csv", report.moments_csv()),
        ("modulus_quantiles.csv", report.modulus_csv()),
        ("aldous.csv", report.aldous_csv()),
    ];
    for (name, content) in pairs {
        let stamped = format!("# config {}\n{content}", report.config_hash);
        std::fs::write(root.join(name), stamped)
            .map_err(|e| CliError::Ingestion(format!("cannot write {name}: {e}")))?;
    }
    println!("\nreport: CSV bundle in {}", root.display());
    Ok(())
}
