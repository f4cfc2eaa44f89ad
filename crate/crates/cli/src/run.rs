//! Dispatch of a [`RunConfig`] to the core library and artifact writing.

use std::fs;
use std::path::Path;

use deltaloop_core::bracketing::{
    bracket_sweep, counts_of, write_asymptotics_csv, write_bracket_csv, write_count_csv,
    write_fit_summary, AsymptoticsReport,
};
use deltaloop_core::curve::{collision_scan, write_curvature_csv};
use deltaloop_core::strip::write_eigenfunction_csv;
use deltaloop_core::transverse::write_transverse_csv;
use deltaloop_core::{
    assemble_strip, build_curve, build_s, build_u, certify_tubular_radius, choose_a,
    curvature_profile, eigenvalues_1d, lowest_eigenvalues, pushforward_eigenfunction,
    sweep_theorem1, sweep_theorem2, ArcCurve, Boundary, BracketConfig, Grid1D, Sign, StripForm,
    StripGeometry, StripGrid, TransverseProblem, TransverseResult, Variant,
};
use rayon::prelude::*;

use crate::config::{BoundaryChoice, FormChoice, Kind, OperatorChoice, RunConfig, VariantChoice};
use crate::error::CliError;

const STRIP_NS: usize = 256;
const STRIP_NU: usize = 64;

/// Collects output files and the manifest lines.
struct Artifacts<'a> {
    dir: &'a Path,
    manifest: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let mut manifest = vec![format!("kind = {}", cfg.kind.as_str())];
        if let Some(c) = &cfg.curve {
            manifest.push(format!("curve = {:?}", c.shape));
        }
        if !cfg.betas.is_empty() {
            let b: Vec<String> = cfg.betas.iter().map(|b| b.to_string()).collect();
            manifest.push(format!("beta = [{}]", b.join(", ")));
        }
        Ok(Self { dir, manifest })
    }

    fn csv<F>(&mut self, name: &str, units: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> deltaloop_core::Result<()>,
    {
        let mut buf = format!("# units: {units}\n").into_bytes();
        write(&mut buf)?;
        self.file(name, &buf)
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.manifest.push(format!("output = {name}"));
        Ok(())
    }

    fn line(&mut self, s: String) {
        self.manifest.push(s);
    }

    fn finish(mut self) -> Result<(), CliError> {
        let mut text = self.manifest.join("\n");
        text.push('\n');
        let path = self.dir.join("manifest.txt");
        self.manifest.clear();
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }
}

fn flag(violation: Option<&str>) -> String {
    match violation {
        None => "certified=true".to_string(),
        Some(v) => format!("certified=false violation=\"{v}\""),
    }
}

fn curve_of(cfg: &RunConfig) -> Result<ArcCurve, CliError> {
    let spec = cfg.curve.as_ref().ok_or_else(|| {
        CliError::Usage(format!("kind {} needs a [curve] table", cfg.kind.as_str()))
    })?;
    Ok(build_curve(spec)?)
}

fn bracket_config(cfg: &RunConfig, curve: ArcCurve) -> Result<BracketConfig, CliError> {
    let mut bc = BracketConfig::new(curve, cfg.betas.clone(), cfg.n)?;
    if let Some(n) = cfg.grid.n1d {
        bc.n1d = n;
    }
    if let Some(n) = cfg.grid.transverse {
        bc.transverse_grid = n;
    }
    Ok(bc)
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut art = Artifacts::new(&cfg.out, cfg)?;
    match cfg.kind {
        Kind::Geometry => geometry(cfg, &mut art)?,
        Kind::Spectrum1D => spectrum_1d(cfg, &mut art)?,
        Kind::Transverse => transverse(cfg, &mut art)?,
        Kind::Bracket => bracket(cfg, &mut art)?,
        Kind::Strip => strip(cfg, &mut art)?,
        Kind::SweepThm1 | Kind::SweepThm2 => sweep(cfg, &mut art)?,
        Kind::Count => count(cfg, &mut art)?,
    }
    art.finish()
}

fn geometry(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let profile = curvature_profile(&curve, cfg.profile_points)?;
    art.csv(
        "curvature.csv",
        "s [length], gamma [1/length], dgamma [1/length^2], ddgamma [1/length^3]",
        |b| write_curvature_csv(b, &profile),
    )?;
    let r = certify_tubular_radius(&curve, 2000)?;
    let scan = collision_scan(&curve, r.a1, 2000, 50);
    let mut table = String::from("# units: length\nquantity,value\n");
    for (name, v) in [
        ("length", curve.length),
        ("gamma_plus", curve.gamma_plus),
        ("a0", r.a0),
        ("tau", r.tau),
        ("a1", r.a1),
        ("a_scan", r.a_scan),
    ] {
        table.push_str(&format!("{name},{v:.15e}\n"));
    }
    art.file("tubular.csv", table.as_bytes())?;
    art.line(format!("gamma_plus = {:.15e} [1/length]", curve.gamma_plus));
    art.line(format!("a1 = {:.15e} [length]", r.a1));
    art.line(format!(
        "collision scan at a1 (2000x50): {}",
        if scan.is_clean() { "clean" } else { "OVERLAP" }
    ));
    Ok(())
}

fn spectrum_1d(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let boundary = match cfg.boundary {
        BoundaryChoice::Periodic => Boundary::Periodic,
        BoundaryChoice::Dirichlet => Boundary::Dirichlet,
        BoundaryChoice::Neumann => Boundary::Neumann,
    };
    let n = cfg.grid.n1d.unwrap_or(BracketConfig::DEFAULT_N1D);
    let grid = Grid1D::new(n, curve.length, boundary)?;
    let (op, name) = match cfg.operator {
        OperatorChoice::S => (build_s(&curve, grid)?, "S".to_string()),
        OperatorChoice::UPlus | OperatorChoice::UMinus => {
            let a = cfg.a.expect("checked when loading");
            let sign = if cfg.operator == OperatorChoice::UPlus {
                Sign::Plus
            } else {
                Sign::Minus
            };
            (
                build_u(&curve, a, sign, grid)?,
                format!("U{}(a={a})", sign.as_str()),
            )
        }
    };
    let spec = eigenvalues_1d(&op, cfg.n_eigs)?;
    art.csv(
        "spectrum.csv",
        "mu [1/length^2], err_est [1/length^2]",
        |b| spec.write_csv(b),
    )?;
    art.line(format!(
        "operator = {name}, N = {}, boundary = {:?}",
        spec.n_grid, boundary
    ));
    Ok(())
}

fn variants(choice: VariantChoice) -> Vec<Variant> {
    match choice {
        VariantChoice::Plus => vec![Variant::Plus],
        VariantChoice::Minus => vec![Variant::Minus],
        VariantChoice::Both => vec![Variant::Plus, Variant::Minus],
    }
}

fn transverse(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let a = cfg.a.expect("checked when loading");
    let gamma = match (cfg.gamma_plus, &cfg.curve) {
        (Some(g), _) => g,
        (None, Some(_)) => curve_of(cfg)?.gamma_plus,
        (None, None) => 0.0,
    };
    let problems: Vec<TransverseProblem> = cfg
        .betas
        .iter()
        .flat_map(|&b| {
            variants(cfg.variant).into_iter().map(move |v| match v {
                Variant::Plus => TransverseProblem::plus(a, b),
                Variant::Minus => TransverseProblem::minus(a, b, gamma),
            })
        })
        .collect();
    let rows: Vec<TransverseResult> = problems
        .par_iter()
        .map(|p| p.solve())
        .collect::<deltaloop_core::Result<_>>()?;
    art.csv(
        "transverse.csv",
        "a [length], beta [1/length], gamma_plus [1/length], zeta [1/length^2], k [1/length], bounds [1/length^2]",
        |b| write_transverse_csv(b, &rows),
    )?;
    for r in &rows {
        art.line(format!(
            "beta={} variant={} {}",
            r.problem.beta,
            r.problem.variant.as_str(),
            flag(r.violation())
        ));
    }
    Ok(())
}

const BRACKET_UNITS: &str = "beta [1/length], a [length], tau [1/length^2], width [1/length^2]";
const COUNT_UNITS: &str =
    "beta [1/length], counts [dimensionless], L_beta_over_2pi [dimensionless]";

fn bracket(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let length = curve.length;
    let bc = bracket_config(cfg, curve)?;
    let tables = bracket_sweep(&bc)?;
    let counts: Vec<_> = tables.iter().map(|t| counts_of(t, length)).collect();
    art.csv("bracket.csv", BRACKET_UNITS, |b| {
        write_bracket_csv(b, &tables)
    })?;
    art.csv("count.csv", COUNT_UNITS, |b| write_count_csv(b, &counts))?;
    for t in &tables {
        art.line(format!(
            "beta={} a={:.6e} clamp={} {} count_route={:?}",
            t.beta,
            t.a.a,
            t.a.clamp.as_str(),
            flag(t.first_violation()),
            t.count_route
        ));
    }
    Ok(())
}

fn count(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let length = curve.length;
    let bc = bracket_config(cfg, curve)?;
    let tables = bracket_sweep(&bc)?;
    let counts: Vec<_> = tables.iter().map(|t| counts_of(t, length)).collect();
    art.csv("count.csv", COUNT_UNITS, |b| write_count_csv(b, &counts))?;
    for (t, c) in tables.iter().zip(&counts) {
        let v = t
            .first_violation()
            .or((!c.certified).then_some("no certified bound on the second transverse band"));
        art.line(format!("beta={} a={:.6e} {}", t.beta, t.a.a, flag(v)));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let bc = bracket_config(cfg, curve)?;
    let report: AsymptoticsReport = if cfg.kind == Kind::SweepThm1 {
        sweep_theorem1(&bc)?
    } else {
        sweep_theorem2(&bc)?
    };
    let units = if cfg.kind == Kind::SweepThm1 {
        "beta [1/length], remainder and width [1/length^2], scale log(beta)/beta [length]"
    } else {
        "beta [1/length], remainder and width [dimensionless], scale log(beta) [dimensionless]"
    };
    art.csv("asymptotics.csv", units, |b| {
        write_asymptotics_csv(b, &report)
    })?;
    if cfg.kind == Kind::SweepThm2 {
        art.csv("count.csv", COUNT_UNITS, |b| {
            write_count_csv(b, &report.counts)
        })?;
    }
    let mut fit = Vec::new();
    write_fit_summary(&mut fit, &report)?;
    art.file("fit.txt", &fit)?;
    for (beta, v) in &report.violations {
        art.line(format!("beta={beta} {}", flag(*v)));
    }
    Ok(())
}

struct StripRow {
    beta: f64,
    a: f64,
    variant: Variant,
    j: usize,
    kappa: f64,
    raw: f64,
    err_est: f64,
    residual: f64,
}

fn strip(cfg: &RunConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let curve = curve_of(cfg)?;
    let radius = certify_tubular_radius(&curve, 2000)?;
    let geometry = StripGeometry::from_curve(&curve, &radius);
    let form = match cfg.form {
        FormChoice::Exact => StripForm::Exact,
        FormChoice::Separated => StripForm::Separated,
    };
    let ns = cfg.grid.ns.unwrap_or(STRIP_NS);
    let nu = cfg.grid.nu.unwrap_or(STRIP_NU);
    let jobs: Vec<(f64, Variant)> = cfg
        .betas
        .iter()
        .flat_map(|&b| variants(cfg.variant).into_iter().map(move |v| (b, v)))
        .collect();
    type Job = (f64, f64, Variant, Vec<StripRow>, Option<Vec<[f64; 3]>>);
    let results: Vec<Job> = jobs
        .par_iter()
        .map(|&(beta, variant)| -> Result<Job, CliError> {
            let a = match cfg.a {
                Some(a) => a,
                None => choose_a(beta, &curve, &radius)?.a,
            };
            let mut grid = StripGrid::new(ns, nu, a, curve.length)?;
            if let Some(g) = cfg.grid.grading {
                grid = grid.with_grading(g)?;
            }
            let op = assemble_strip(&geometry, beta, &grid, variant, form)?;
            let spec = lowest_eigenvalues(&op, cfg.n_eigs)?;
            let rows = (0..cfg.n_eigs)
                .map(|i| StripRow {
                    beta,
                    a,
                    variant,
                    j: i + 1,
                    kappa: spec.values[i],
                    raw: spec.raw[i],
                    err_est: spec.err_est[i],
                    residual: spec.residuals[i],
                })
                .collect();
            let psi = if cfg.eigenfunction {
                Some(pushforward_eigenfunction(&op, &spec.vectors[0])?)
            } else {
                None
            };
            Ok((beta, a, variant, rows, psi))
        })
        .collect::<Result<_, _>>()?;

    let mut text = String::from(
        "# units: beta [1/length], a [length], kappa and err_est [1/length^2], residual [1/length^2]\n\
         beta,a,variant,j,kappa,kappa_raw,err_est,residual\n",
    );
    for (_, _, _, rows, _) in &results {
        for r in rows {
            text.push_str(&format!(
                "{},{:.15e},{},{},{:.15e},{:.15e},{:.3e},{:.3e}\n",
                r.beta,
                r.a,
                r.variant.as_str(),
                r.j,
                r.kappa,
                r.raw,
                r.err_est,
                r.residual
            ));
        }
    }
    art.file("strip.csv", text.as_bytes())?;
    for (beta, a, variant, _, psi) in &results {
        art.line(format!(
            "beta={beta} variant={} a={a:.6e} grid={ns}x{nu}",
            variant.as_str()
        ));
        if let Some(points) = psi {
            let name = format!("eigenfunction_beta{beta}_{}.csv", variant.as_str());
            art.csv(&name, "x [length], y [length], psi [1/length]", |b| {
                write_eigenfunction_csv(b, points)
            })?;
        }
    }
    Ok(())
}
