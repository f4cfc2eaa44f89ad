//! Run configuration: a TOML file overlaid by command-line flags.

use std::ops::Range;
use std::path::PathBuf;

use deltaloop_core::curve::CurveShape;
use deltaloop_core::CurveSpec;
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

pub const KINDS: [&str; 8] = [
    "geometry",
    "spectrum-1d",
    "transverse",
    "bracket",
    "strip",
    "sweep-thm1",
    "sweep-thm2",
    "count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Geometry,
    Spectrum1D,
    Transverse,
    Bracket,
    Strip,
    SweepThm1,
    SweepThm2,
    Count,
}

impl Kind {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "geometry" => Kind::Geometry,
            "spectrum-1d" => Kind::Spectrum1D,
            "transverse" => Kind::Transverse,
            "bracket" => Kind::Bracket,
            "strip" => Kind::Strip,
            "sweep-thm1" => Kind::SweepThm1,
            "sweep-thm2" => Kind::SweepThm2,
            "count" => Kind::Count,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown kind '{other}'; valid kinds: {}",
                    KINDS.join(", ")
                )))
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        KINDS[self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantChoice {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorChoice {
    /// `−d²/ds² − γ²/4`.
    S,
    UPlus,
    UMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryChoice {
    Periodic,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormChoice {
    Exact,
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub geometric: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub ns: Option<usize>,
    pub nu: Option<usize>,
    pub n1d: Option<usize>,
    pub transverse: Option<usize>,
    pub grading: Option<f64>,
}

/// The file as written, with spans kept for diagnostics.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<Spanned<String>>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    curve: Option<Spanned<toml::Table>>,
    beta: Option<Spanned<Vec<f64>>>,
    beta_range: Option<Spanned<BetaRange>>,
    a: Option<Spanned<f64>>,
    gamma_plus: Option<Spanned<f64>>,
    variant: Option<VariantChoice>,
    operator: Option<OperatorChoice>,
    boundary: Option<BoundaryChoice>,
    form: Option<FormChoice>,
    n: Option<usize>,
    n_eigs: Option<usize>,
    profile_points: Option<usize>,
    eigenfunction: Option<bool>,
    #[serde(default)]
    grid: GridSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub kind: Option<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub beta_list: Option<Vec<f64>>,
    pub grid_ns: Option<usize>,
    pub grid_nu: Option<usize>,
    pub grid_n1d: Option<usize>,
    pub n_eigs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: Kind,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub curve: Option<CurveSpec>,
    pub betas: Vec<f64>,
    pub a: Option<f64>,
    pub gamma_plus: Option<f64>,
    pub variant: VariantChoice,
    pub operator: OperatorChoice,
    pub boundary: BoundaryChoice,
    pub form: FormChoice,
    pub n: usize,
    pub n_eigs: usize,
    pub profile_points: usize,
    pub eigenfunction: bool,
    pub grid: GridSection,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    path: &'a str,
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: Range<usize>, msg: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.to_string(),
            line: line_of(self.text, span),
            message: msg.into(),
        }
    }
}

fn parse_curve(ctx: &Ctx, table: &Spanned<toml::Table>) -> Result<CurveSpec, CliError> {
    let mut rest = table.get_ref().clone();
    let samples = match rest.remove("samples") {
        None => CurveSpec::DEFAULT_SAMPLES,
        Some(toml::Value::Integer(n)) if n >= 16 => n as usize,
        Some(v) => {
            return Err(ctx.err(
                table.span(),
                format!("curve.samples must be an integer >= 16, got {v}"),
            ))
        }
    };
    let shape = CurveShape::deserialize(toml::Value::Table(rest))
        .map_err(|e| ctx.err(table.span(), format!("[curve]: {}", e.message())))?;
    Ok(CurveSpec { shape, samples })
}

fn beta_range(r: &BetaRange) -> Result<Vec<f64>, String> {
    if r.count == 0 || !(r.start > 0.0) || r.stop < r.start {
        return Err("beta_range needs 0 < start <= stop and count >= 1".into());
    }
    if r.count == 1 {
        return Ok(vec![r.start]);
    }
    let m = (r.count - 1) as f64;
    Ok((0..r.count)
        .map(|i| {
            let t = i as f64 / m;
            if r.geometric {
                r.start * (r.stop / r.start).powf(t)
            } else {
                r.start + (r.stop - r.start) * t
            }
        })
        .collect())
}

fn check_betas(betas: &[f64]) -> Result<(), String> {
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(format!("beta values must be positive, got {b}"));
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err("beta values must be strictly increasing".into());
    }
    Ok(())
}

fn required_keys(kind: Kind, cfg: &RunConfig) -> Result<(), String> {
    let need_curve = !matches!(kind, Kind::Transverse);
    if need_curve && cfg.curve.is_none() {
        return Err(format!("kind {} needs a [curve] table", kind.as_str()));
    }
    let need_beta = !matches!(kind, Kind::Geometry | Kind::Spectrum1D);
    if need_beta && cfg.betas.is_empty() {
        return Err(format!(
            "kind {} needs beta, beta_range or --beta-list",
            kind.as_str()
        ));
    }
    if kind == Kind::Transverse && cfg.a.is_none() {
        return Err("kind transverse needs the half-width a".into());
    }
    if kind == Kind::Transverse
        && cfg.variant != VariantChoice::Plus
        && cfg.gamma_plus.is_none()
        && cfg.curve.is_none()
    {
        return Err("the minus variant needs gamma_plus or a [curve] table".into());
    }
    if kind == Kind::Spectrum1D && cfg.operator != OperatorChoice::S && cfg.a.is_none() {
        return Err("operators u-plus and u-minus need the half-width a".into());
    }
    if matches!(kind, Kind::SweepThm1 | Kind::SweepThm2) && cfg.betas.len() < 4 {
        return Err("sweeps need at least 4 beta values".into());
    }
    if cfg.n == 0 || cfg.n_eigs == 0 {
        return Err("n and n_eigs must be at least 1".into());
    }
    Ok(())
}

/// Parses `text` (read from `path`) and applies `over`.
pub fn load(path: Option<&str>, text: &str, over: Overrides) -> Result<RunConfig, CliError> {
    let path = path.unwrap_or("<none>");
    let ctx = Ctx { path, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config {
        path: path.to_string(),
        line: e.span().map(|s| line_of(text, s)).unwrap_or(1),
        message: e.message().to_string(),
    })?;

    let kind_name = match (&over.kind, &raw.kind) {
        (Some(k), _) => k.clone(),
        (None, Some(k)) => k.get_ref().clone(),
        (None, None) => {
            return Err(CliError::Usage(format!(
                "no kind given; valid kinds: {}",
                KINDS.join(", ")
            )))
        }
    };
    let kind = match (&over.kind, &raw.kind) {
        (None, Some(k)) => Kind::parse(&kind_name).map_err(|e| ctx.err(k.span(), e.to_string()))?,
        _ => Kind::parse(&kind_name)?,
    };

    let curve = raw
        .curve
        .as_ref()
        .map(|c| parse_curve(&ctx, c))
        .transpose()?;

    let betas = if let Some(list) = over.beta_list.clone() {
        check_betas(&list).map_err(|m| CliError::Usage(format!("--beta-list: {m}")))?;
        list
    } else if let Some(b) = &raw.beta {
        check_betas(b.get_ref()).map_err(|m| ctx.err(b.span(), m))?;
        b.get_ref().clone()
    } else if let Some(r) = &raw.beta_range {
        let list = beta_range(r.get_ref()).map_err(|m| ctx.err(r.span(), m))?;
        check_betas(&list).map_err(|m| ctx.err(r.span(), m))?;
        list
    } else {
        Vec::new()
    };
    if raw.beta.is_some() && raw.beta_range.is_some() {
        let span = raw.beta_range.as_ref().map(|r| r.span()).unwrap_or(0..0);
        return Err(ctx.err(span, "give either beta or beta_range, not both"));
    }
    for (name, v) in [("a", &raw.a), ("gamma_plus", &raw.gamma_plus)] {
        if let Some(v) = v {
            let ok = if name == "a" {
                *v.get_ref() > 0.0
            } else {
                *v.get_ref() >= 0.0
            };
            if !(ok && v.get_ref().is_finite()) {
                return Err(ctx.err(v.span(), format!("{name} out of range: {}", v.get_ref())));
            }
        }
    }

    let mut grid = raw.grid;
    grid.ns = over.grid_ns.or(grid.ns);
    grid.nu = over.grid_nu.or(grid.nu);
    grid.n1d = over.grid_n1d.or(grid.n1d);

    let cfg = RunConfig {
        kind,
        out: over.out.or(raw.out).unwrap_or_else(|| PathBuf::from("out")),
        workers: over.workers.or(raw.workers),
        curve,
        betas,
        a: raw.a.map(|v| *v.get_ref()),
        gamma_plus: raw.gamma_plus.map(|v| *v.get_ref()),
        variant: raw.variant.unwrap_or(VariantChoice::Both),
        operator: raw.operator.unwrap_or(OperatorChoice::S),
        boundary: raw.boundary.unwrap_or(BoundaryChoice::Periodic),
        form: raw.form.unwrap_or(FormChoice::Exact),
        n: raw.n.unwrap_or(5),
        n_eigs: over.n_eigs.or(raw.n_eigs).unwrap_or(5),
        profile_points: raw.profile_points.unwrap_or(256),
        eigenfunction: raw.eigenfunction.unwrap_or(false),
        grid,
    };
    required_keys(kind, &cfg).map_err(|m| CliError::Config {
        path: path.to_string(),
        line: 1,
        message: m,
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Result<RunConfig, CliError> {
        load(Some("test.toml"), text, Overrides::default())
    }

    #[test]
    fn parses_a_bracket_config() {
        let cfg = load_str(
            "kind = \"bracket\"\nbeta = [40.0, 80.0]\nn = 3\n[curve]\nkind = \"circle\"\nradius = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Bracket);
        assert_eq!(cfg.betas, vec![40.0, 80.0]);
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.curve.unwrap().shape, CurveShape::Circle { radius: 1.0 });
    }

    #[test]
    fn flags_win_over_the_file() {
        let over = Overrides {
            kind: Some("count".into()),
            beta_list: Some(vec![10.0, 20.0]),
            n_eigs: Some(7),
            grid_n1d: Some(2048),
            ..Overrides::default()
        };
        let text = "kind = \"bracket\"\nbeta = [40.0]\nn_eigs = 2\n[grid]\nn1d = 512\n[curve]\nkind = \"circle\"\nradius = 1.0\n";
        let cfg = load(None, text, over).unwrap();
        assert_eq!(cfg.kind, Kind::Count);
        assert_eq!(cfg.betas, vec![10.0, 20.0]);
        assert_eq!(cfg.n_eigs, 7);
        assert_eq!(cfg.grid.n1d, Some(2048));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let e = load_str("kind = \"bracket\"\nbeta = [40.0]\nbogus = 1\n").unwrap_err();
        match e {
            CliError::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let e = load_str(
            "kind = \"count\"\nbeta = [40.0, 20.0]\n[curve]\nkind = \"circle\"\nradius = 1.0\n",
        )
        .unwrap_err();
        match e {
            CliError::Config { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("increasing"));
            }
            other => panic!("{other:?}"),
        }
        let e = load_str("kind = \"count\"\nbeta = [40.0]\n\n[curve]\nkind = \"square\"\n")
            .unwrap_err();
        match e {
            CliError::Config { line, .. } => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_kind_lists_valid_kinds() {
        let e = load(
            None,
            "",
            Overrides {
                kind: Some("nope".into()),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        for k in KINDS {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn beta_range_geometric() {
        let cfg = load_str(
            "kind = \"count\"\nbeta_range = { start = 10.0, stop = 1000.0, count = 3, geometric = true }\n[curve]\nkind = \"circle\"\nradius = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.betas.len(), 3);
        assert!((cfg.betas[1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn missing_keys_are_reported() {
        assert!(load_str("kind = \"transverse\"\nbeta = [10.0]\n").is_err());
        assert!(load_str(
            "kind = \"sweep-thm1\"\nbeta = [1.0, 2.0]\n[curve]\nkind = \"circle\"\nradius = 1.0\n"
        )
        .is_err());
        let cfg = load_str("kind = \"transverse\"\nbeta = [10.0]\na = 1.0\nvariant = \"plus\"\n")
            .unwrap();
        assert_eq!(cfg.variant, VariantChoice::Plus);
    }

    #[test]
    fn curve_samples_override() {
        let cfg = load_str(
            "kind = \"geometry\"\n[curve]\nkind = \"ellipse\"\na = 2.0\nb = 1.0\nsamples = 1024\n",
        )
        .unwrap();
        assert_eq!(cfg.curve.unwrap().samples, 1024);
    }
}
