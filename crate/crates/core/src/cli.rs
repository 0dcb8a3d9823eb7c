//! Experiment harness: run configs, subcommand dispatch and artifacts.
//!
//! A run reads a TOML config, resolves the model, runs one experiment and
//! writes CSV/JSON artifacts plus `manifest.json` into the output
//! directory. The manifest holds the resolved config (seed included), so a
//! run can be repeated from the manifest alone. Wall-clock timings go to a
//! separate `timings.txt` to keep the other artifacts byte-reproducible.

use std::fmt;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ids::{
    bracket_ids, comparison_check, estimate_ids, geometric_grid, linear_grid, realization_config, CurveData,
    IdsCurve,
};
use crate::lifshitz::{fit_lifshitz, fit_power, FitReport};
use crate::model::{BoxSpec, Boundary, DisorderLaw};
use crate::operator::DEFAULT_MAX_ORDER;
use crate::parallel::Execution;
use crate::profiles::PotentialSpec;
use crate::single_site::{ground_curve, spectral_bottom};
use crate::vanhove::{
    build_phi, dirichlet_test_energy, second_eigenvalue_floor, vanhove_bounds, vanhove_law, verify_patchwork_ground_state,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SingleSite,
    Ids,
    Bracket,
    Compare,
    LifshitzFit,
    PowerFit,
    Vanhove,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SingleSite => "single-site",
            Command::Ids => "ids",
            Command::Bracket => "bracket",
            Command::Compare => "compare",
            Command::LifshitzFit => "lifshitz-fit",
            Command::PowerFit => "power-fit",
            Command::Vanhove => "vanhove",
        }
    }
}

/// A one-dimensional grid of energies or couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    Linear {
        lo: f64,
        hi: f64,
        points: usize,
    },
    /// `edge + t` with `t` geometric from `lo` to `hi`.
    Geometric {
        #[serde(default)]
        edge: f64,
        lo: f64,
        hi: f64,
        points: usize,
    },
    List {
        values: Vec<f64>,
    },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Linear { lo, hi, points } => linear_grid(*lo, *hi, *points),
            GridSpec::Geometric { edge, lo, hi, points } => geometric_grid(*edge, *lo, *hi, *points),
            GridSpec::List { values } => values.clone(),
        }
    }

    fn problems(&self) -> Option<String> {
        match self {
            GridSpec::Linear { points, .. } | GridSpec::Geometric { points, .. } if *points == 0 => {
                Some("grid needs at least one point".into())
            }
            GridSpec::Geometric { lo, hi, .. } if !(*lo > 0.0 && *hi >= *lo) => {
                Some("geometric offsets need 0 < lo <= hi".into())
            }
            _ => {
                let v = self.values();
                if v.is_empty() {
                    Some("grid is empty".into())
                } else if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[0] < w[1])) {
                    Some("grid must be finite and strictly ascending".into())
                } else {
                    None
                }
            }
        }
    }
}

fn default_boundary() -> Boundary {
    Boundary::Neumann
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    /// Half-width: the box has `2L + 1` cells per side.
    #[serde(rename = "L")]
    pub half_width: usize,
    /// Grid points per unit length.
    pub n: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<DisorderLaw>,
    pub potential: PotentialSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    /// Coupling grid for `single-site` (default: 21 points on `[a, b]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Stored IDS curve for the fit subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Spectral edge for the fits; computed from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_minus: Option<f64>,
    /// Box half-widths for the `vanhove` sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Scheduling only; never recorded in the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub model: ModelConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    /// Reads a TOML config, or a JSON manifest written by an earlier run.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        if path.extension().is_some_and(|x| x == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let config = value.get("config").cloned().unwrap_or(value);
            return serde_json::from_value(config).map_err(|e| format!("{}: {e}", path.display()));
        }
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn box_spec(&self) -> Result<BoxSpec, Error> {
        let m = &self.model;
        BoxSpec::centered(m.dimension, m.half_width, m.n, m.boundary)
    }

    pub fn max_order(&self) -> usize {
        self.experiment.max_order.unwrap_or(DEFAULT_MAX_ORDER)
    }

    fn law(&self) -> Option<DisorderLaw> {
        match (self.model.law, self.command) {
            (Some(l), _) => Some(l),
            (None, Some(Command::Vanhove)) => vanhove_law(0.5).ok(),
            _ => None,
        }
    }

    fn half_widths(&self) -> Vec<usize> {
        self.experiment
            .half_widths
            .clone()
            .unwrap_or_else(|| vec![self.model.half_width])
    }
}

/// Static checks; no solves.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = &config.model;
    let command = config.command;
    if config.seed.is_none() {
        out.push(violation("seed", "missing; every run needs an explicit seed"));
    }
    if command.is_none() {
        out.push(violation("command", "no subcommand given"));
    }
    if !(1..=3).contains(&m.dimension) {
        out.push(violation("model.dimension", format!("{} not in 1..=3", m.dimension)));
    }
    if m.n < 3 {
        out.push(violation("model.n", "mesh order must be at least 3"));
    }
    if let Some(law) = config.model.law {
        if let Err(e) = law.validated() {
            out.push(violation("model.law", e.to_string()));
        }
    }
    if let PotentialSpec::Vanhove { delta, .. } = m.potential {
        if delta * (m.n as f64) < 2.0 - 1e-12 {
            out.push(violation(
                "model.potential.delta",
                format!("resolution: delta * n = {} < 2 leaves the flat zone unresolved", delta * m.n as f64),
            ));
        }
    }
    if let PotentialSpec::Tabulated { values } = &m.potential {
        let want = m.n.checked_pow(m.dimension as u32).unwrap_or(usize::MAX);
        if values.len() != want {
            out.push(violation(
                "model.potential.values",
                format!("{} values for {} cell nodes", values.len(), want),
            ));
        }
    }
    let max = config.max_order();
    for l in config.half_widths().into_iter().chain([m.half_width]) {
        let side = (2 * l as u128 + 1) * m.n as u128;
        let order = side.checked_pow(m.dimension as u32).unwrap_or(u128::MAX);
        if order > max as u128 {
            out.push(violation(
                "model.L",
                format!("size: L = {l}, n = {}, d = {} gives matrix order {order} above the cap {max}", m.n, m.dimension),
            ));
            break;
        }
    }
    let e = &config.experiment;
    for f in &config.output.formats {
        if f != "csv" && f != "json" {
            out.push(violation("output.formats", format!("unknown format `{f}`")));
        }
    }
    let needs_energies = matches!(
        command,
        Some(Command::Ids | Command::Bracket | Command::Compare | Command::Vanhove)
    );
    let needs_law = needs_energies && command != Some(Command::Vanhove);
    if needs_energies {
        match &e.energies {
            None => out.push(violation("experiment.energies", "missing")),
            Some(g) => {
                if let Some(p) = g.problems() {
                    out.push(violation("experiment.energies", p));
                }
            }
        }
        match e.realizations {
            None => out.push(violation("experiment.realizations", "missing")),
            Some(0) => out.push(violation("experiment.realizations", "must be at least 1")),
            _ => {}
        }
    }
    if needs_law && m.law.is_none() {
        out.push(violation("model.law", "missing"));
    }
    if command == Some(Command::Ids) && m.boundary == Boundary::Periodic {
        out.push(violation("model.boundary", "IDS estimates use neumann or dirichlet"));
    }
    if let Some(g) = &e.lambdas {
        if let Some(p) = g.problems() {
            out.push(violation("experiment.lambdas", p));
        }
    }
    if command == Some(Command::SingleSite) && e.lambdas.is_none() && m.law.is_none() {
        out.push(violation("experiment.lambdas", "missing (and no law to default it from)"));
    }
    if matches!(command, Some(Command::LifshitzFit | Command::PowerFit)) {
        if e.input.is_none() {
            out.push(violation("experiment.input", "missing curve file"));
        }
        if e.e_minus.is_none() && m.law.is_none() {
            out.push(violation("experiment.e_minus", "missing (and no law to compute it from)"));
        }
    }
    if matches!(command, Some(Command::LifshitzFit | Command::PowerFit | Command::Vanhove)) {
        match e.window {
            None => out.push(violation("experiment.window", "missing")),
            Some([lo, hi]) if !(lo < hi) => out.push(violation("experiment.window", "needs lo < hi")),
            _ => {}
        }
    }
    if command == Some(Command::Vanhove) {
        if !matches!(m.potential, PotentialSpec::Vanhove { .. }) {
            out.push(violation("model.potential", "the vanhove pipeline needs the `vanhove` potential"));
        }
        if !(1..=2).contains(&m.dimension) {
            out.push(violation("model.dimension", "the vanhove pipeline runs in d = 1 or 2"));
        }
        if let Some(law) = m.law {
            if !(law.a == 0.0 && law.b == 1.0 && law.kind == crate::model::LawKind::Bernoulli) {
                out.push(violation("model.law", "the vanhove pipeline needs a Bernoulli law on {0, 1}"));
            }
        }
    }
    if let Some(hw) = &e.half_widths {
        if hw.is_empty() {
            out.push(violation("experiment.half_widths", "empty list"));
        }
    }
    out
}

/// A failed run: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Invalid(_)
            | Error::MeshMismatch { .. }
            | Error::SizeOverflow { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotSymmetric { .. }
            | Error::Degenerate { .. }
            | Error::Unsupported(_) => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::solver(format!("writing artifacts: {e}"))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    code_version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    seeds: SeedRecord,
    artifacts: Vec<ArtifactRecord>,
}

#[derive(Serialize)]
struct SeedRecord {
    base: u64,
    derivation: &'static str,
}

#[derive(Clone, Serialize)]
struct ArtifactRecord {
    file: String,
    columns: Vec<&'static str>,
}

/// Collects artifacts of one run and the manifest that describes them.
struct Outputs {
    dir: PathBuf,
    csv: bool,
    json: bool,
    artifacts: Vec<ArtifactRecord>,
    timings: Vec<(String, f64)>,
}

const IDS_COLUMNS: [&str; 8] = ["E", "estimate", "stderr", "R", "L", "n", "d", "boundary"];

impl Outputs {
    fn write(&mut self, name: &str, columns: Vec<&'static str>, body: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.artifacts.push(ArtifactRecord {
            file: name.to_string(),
            columns,
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        if !self.json {
            return Ok(());
        }
        let mut body = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        body.push(b'\n');
        self.write(name, Vec::new(), &body)
    }

    fn ids_csv(&mut self, name: &str, curve: &IdsCurve) -> io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let mut body = Vec::new();
        curve.write_csv(&mut body)?;
        self.write(name, IDS_COLUMNS.to_vec(), &body)
    }

    fn time(&mut self, phase: &str, start: Instant) {
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
    }
}

fn resolve_out(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| config.output.directory.clone())
}

fn curve_failures(curve: &IdsCurve) -> Option<String> {
    curve.aborted.first().map(|a| {
        format!(
            "{} realization(s) aborted; first at index {}: {}",
            curve.aborted.len(),
            a.index,
            a.message
        )
    })
}

/// Runs the configured subcommand and writes its artifacts. Returns the
/// lines to print on success.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<Vec<String>, Failure> {
    let violations = validate(config);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure::config(lines.join("\n")));
    }
    let command = config.command.expect("validated");
    let seed = config.seed.expect("validated");
    let exec = Execution::from_workers(config.workers.unwrap_or(1));
    let dir = resolve_out(config, out);
    fs::create_dir_all(&dir)?;
    let mut o = Outputs {
        dir,
        csv: config.output.formats.iter().any(|f| f == "csv"),
        json: config.output.formats.iter().any(|f| f == "json"),
        artifacts: Vec::new(),
        timings: Vec::new(),
    };
    let m = &config.model;
    let start = Instant::now();
    let v = m.potential.build(m.dimension, m.n)?;
    let bx = config.box_spec()?;
    let law = config.law();
    let mut lines = Vec::new();
    let mut failure: Option<String> = None;

    match command {
        Command::SingleSite => {
            let lambdas = match &config.experiment.lambdas {
                Some(g) => g.values(),
                None => {
                    let l = law.expect("validated");
                    linear_grid(l.a, l.b, 21)
                }
            };
            let curve = ground_curve(&v, &lambdas)?;
            if o.csv {
                let mut body = Vec::new();
                curve.write_csv(&mut body)?;
                o.write("ground_curve.csv", vec!["lambda", "E_minus", "residual"], &body)?;
            }
            lines.push(format!(
                "ground curve: {} points, concave: {} (max second difference {:.3e})",
                lambdas.len(),
                curve.concave,
                curve.max_second_difference
            ));
            if let Some(law) = law {
                let sb = spectral_bottom(&v, &law)?;
                o.json("spectral_bottom.json", &sb)?;
                lines.push(format!(
                    "spectral bottom E- = {} at edge {:?}{}",
                    sb.e_minus,
                    sb.edge,
                    if sb.degenerate { " (degenerate)" } else { "" }
                ));
            }
        }
        Command::Ids => {
            let energies = config.experiment.energies.as_ref().expect("validated").values();
            let r = config.experiment.realizations.expect("validated");
            let curve = estimate_ids(&v, &law.expect("validated"), &bx, &energies, r, seed, exec)?;
            o.ids_csv("ids.csv", &curve)?;
            failure = curve_failures(&curve);
            lines.push(format!("ids: {} energies, {} realizations", energies.len(), curve.used()));
        }
        Command::Bracket => {
            let energies = config.experiment.energies.as_ref().expect("validated").values();
            let r = config.experiment.realizations.expect("validated");
            let br = bracket_ids(&v, &law.expect("validated"), &bx, &energies, r, seed, exec)?;
            o.ids_csv("ids_dirichlet.csv", &br.lower)?;
            o.ids_csv("ids_neumann.csv", &br.upper)?;
            o.json("bracket.json", &BracketSummary::new(&br))?;
            failure = curve_failures(&br.lower).or_else(|| curve_failures(&br.upper));
            lines.push(format!(
                "bracket: dirichlet <= neumann on every realization: {}",
                br.ordered()
            ));
        }
        Command::Compare => {
            let energies = config.experiment.energies.as_ref().expect("validated").values();
            let r = config.experiment.realizations.expect("validated");
            let check = comparison_check(&v, &law.expect("validated"), &bx, &energies, r, seed, exec)?;
            o.ids_csv("ids.csv", &check.curve)?;
            o.ids_csv("ids_comparison.csv", &check.comparison)?;
            o.json("comparison.json", &ComparisonSummary::new(&check))?;
            failure = curve_failures(&check.curve).or_else(|| curve_failures(&check.comparison));
            lines.push(format!(
                "comparison constant C = {} (beta = {}, delta = {}); N(E) <= N_m(C(E - E-(a))) holds: {}",
                check.constant.c,
                check.constant.beta,
                check.constant.delta,
                check.holds()
            ));
        }
        Command::LifshitzFit | Command::PowerFit => {
            let path = config.experiment.input.as_ref().expect("validated");
            let file = fs::File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let data = CurveData::read_csv(BufReader::new(file))?;
            let e_minus = match config.experiment.e_minus {
                Some(e) => e,
                None => spectral_bottom(&v, &law.expect("validated"))?.e_minus,
            };
            let window = config.experiment.window.expect("validated");
            let report: FitReport = if command == Command::LifshitzFit {
                fit_lifshitz(&data, e_minus, window)?
            } else {
                fit_power(&data, e_minus, window)?
            };
            o.json("fit.json", &report)?;
            lines.push(report.verdict());
        }
        Command::Vanhove => {
            let PotentialSpec::Vanhove { delta, kappa } = m.potential else {
                unreachable!("validated")
            };
            let law = law.expect("defaulted");
            let energies = config.experiment.energies.as_ref().expect("validated").values();
            let r = config.experiment.realizations.expect("validated");
            let window = config.experiment.window.expect("validated");
            let half_widths = config.half_widths();
            let phi = build_phi(m.dimension, m.n, delta, kappa)?;
            let e0 = crate::single_site::ground_energy(&v, 0.0)?.energy;
            let e1 = crate::single_site::ground_energy(&v, 1.0)?.energy;
            let neumann = bx.with_boundary(Boundary::Neumann);
            let patch = exec.map(r, |i| {
                verify_patchwork_ground_state(&phi, &v, &realization_config(&law, &neumann, seed, i))
                    .map(|p| p.residual)
            });
            let mut patchwork_max = 0.0f64;
            for (index, p) in patch.into_iter().enumerate() {
                let p = p.map_err(|e| Failure::solver(format!("realization {index}: {e}")))?;
                patchwork_max = patchwork_max.max(p);
            }
            let t0 = Instant::now();
            let floor = second_eigenvalue_floor(&v, &law, &half_widths, r, seed, exec)?;
            o.time("second eigenvalue sweep", t0);
            let mut test_energies = Vec::new();
            for &l in &half_widths {
                let bxd = BoxSpec::centered(m.dimension, l, m.n, Boundary::Dirichlet)?;
                let q = exec.map(r, |i| dirichlet_test_energy(&phi, &v, &realization_config(&law, &bxd, seed, i)));
                let mut maxq = f64::NEG_INFINITY;
                for (index, qi) in q.into_iter().enumerate() {
                    let qi = qi.map_err(|e| Failure::solver(format!("realization {index}: {e}")))?;
                    maxq = maxq.max(qi);
                }
                test_energies.push(TestEnergyRow {
                    half_width: l,
                    max_quotient: maxq,
                    max_scaled: maxq * (l * l) as f64,
                });
            }
            let t0 = Instant::now();
            let bounds = vanhove_bounds(&v, &law, &half_widths, &energies, window, r, seed, exec)?;
            o.time("bracket sweep", t0);
            for (i, (lo, up)) in bounds.curves.iter().enumerate() {
                let suffix = if half_widths.len() > 1 {
                    format!("_L{}", half_widths[i])
                } else {
                    String::new()
                };
                o.ids_csv(&format!("vanhove_dirichlet{suffix}.csv"), lo)?;
                o.ids_csv(&format!("vanhove_neumann{suffix}.csv"), up)?;
                failure = failure.or_else(|| curve_failures(lo)).or_else(|| curve_failures(up));
            }
            for row in &bounds.rows {
                lines.push(format!(
                    "L = {}: power slopes dirichlet {:.4}, neumann {:.4}; constant ratios {:.3}, {:.3}",
                    row.half_width, row.lower.slope, row.upper.slope, row.lower_ratio, row.upper_ratio
                ));
            }
            lines.push(format!("patchwork residual max {patchwork_max:.3e}; E-(0) = {e0:.3e}, E-(1) = {e1:.3e}"));
            let report = VanHoveReport {
                phi: PhiSummary {
                    delta,
                    kappa,
                    c0: phi.c0,
                    contrast: phi.contrast(),
                    profile: "raised cosine bump on a constant",
                },
                e_minus_at_0: e0,
                e_minus_at_1: e1,
                patchwork_residual_max: patchwork_max,
                second_eigenvalue: floor,
                dirichlet_test_energy: test_energies,
                bounds,
            };
            o.json("vanhove_report.json", &report)?;
        }
    }
    o.time("total", start);

    let manifest_config = RunConfig {
        workers: None,
        command: Some(command),
        output: OutputConfig {
            directory: PathBuf::from("."),
            ..config.output.clone()
        },
        ..config.clone()
    };
    let mut artifacts = o.artifacts.clone();
    artifacts.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION"),
        command: command.as_str(),
        config: &manifest_config,
        seeds: SeedRecord {
            base: seed,
            derivation: "realization r uses derive_seed(base, r); site couplings are keyed by absolute lattice coordinates",
        },
        artifacts,
    };
    let mut body = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
    body.push(b'\n');
    fs::write(o.dir.join("manifest.json"), body)?;
    let mut timings = String::new();
    for (phase, secs) in &o.timings {
        timings.push_str(&format!("{phase}\t{secs:.3}\n"));
    }
    timings.push_str(&format!("workers\t{}\n", config.workers.unwrap_or(1)));
    fs::write(o.dir.join("timings.txt"), timings)?;

    match failure {
        Some(msg) => Err(Failure::solver(msg)),
        None => Ok(lines),
    }
}

#[derive(Serialize)]
struct BracketSummary {
    ordered: bool,
    violations: usize,
    realizations: usize,
    publishable: bool,
}

impl BracketSummary {
    fn new(br: &crate::ids::Bracket) -> Self {
        BracketSummary {
            ordered: br.ordered(),
            violations: br.violations.len(),
            realizations: br.lower.counts.len(),
            publishable: br.lower.publishable() && br.upper.publishable(),
        }
    }
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    constant: &'a crate::ids::ComparisonConstant,
    e_minus_a: f64,
    holds: bool,
    violations: &'a [crate::ids::ComparisonViolation],
}

impl<'a> ComparisonSummary<'a> {
    fn new(check: &'a crate::ids::ComparisonCheck) -> Self {
        ComparisonSummary {
            constant: &check.constant,
            e_minus_a: check.e_a,
            holds: check.holds(),
            violations: &check.violations,
        }
    }
}

#[derive(Serialize)]
struct PhiSummary {
    delta: f64,
    kappa: f64,
    c0: f64,
    contrast: f64,
    profile: &'static str,
}

#[derive(Serialize)]
struct TestEnergyRow {
    half_width: usize,
    max_quotient: f64,
    max_scaled: f64,
}

#[derive(Serialize)]
struct VanHoveReport {
    phi: PhiSummary,
    e_minus_at_0: f64,
    e_minus_at_1: f64,
    patchwork_residual_max: f64,
    second_eigenvalue: crate::vanhove::SecondEigenvalueFloor,
    dirichlet_test_energy: Vec<TestEnergyRow>,
    bounds: crate::vanhove::VanHoveBounds,
}

#[derive(Parser, Debug)]
#[command(name = "alloy-lab", version, about = "Spectral edge experiments for alloy-type random Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Run config (TOML) or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for realization-level parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Ground-energy curve of the single cell and the spectral bottom.
    SingleSite(CommonArgs),
    /// Disorder-averaged IDS on one box.
    Ids(CommonArgs),
    /// Dirichlet and Neumann IDS on shared disorder.
    Bracket(CommonArgs),
    /// Comparison constant and the monotone comparison model.
    Compare(CommonArgs),
    /// Double-log edge fit of a stored IDS curve.
    LifshitzFit(CommonArgs),
    /// Power-law edge fit of a stored IDS curve.
    PowerFit(CommonArgs),
    /// The van Hove example end to end.
    Vanhove(CommonArgs),
    /// Static checks of a config; lists every violation.
    Validate(CommonArgs),
}

fn apply_overrides(config: &mut RunConfig, args: &CommonArgs) {
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    let (command, args, validate_only) = match &cli.command {
        CliCommand::SingleSite(a) => (Some(Command::SingleSite), a, false),
        CliCommand::Ids(a) => (Some(Command::Ids), a, false),
        CliCommand::Bracket(a) => (Some(Command::Bracket), a, false),
        CliCommand::Compare(a) => (Some(Command::Compare), a, false),
        CliCommand::LifshitzFit(a) => (Some(Command::LifshitzFit), a, false),
        CliCommand::PowerFit(a) => (Some(Command::PowerFit), a, false),
        CliCommand::Vanhove(a) => (Some(Command::Vanhove), a, false),
        CliCommand::Validate(a) => (None, a, true),
    };
    let mut config = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut config, args);
    if let Some(c) = command {
        config.command = Some(c);
    }
    if validate_only {
        let violations = validate(&config);
        for v in &violations {
            let _ = writeln!(stdout, "{v}");
        }
        if violations.is_empty() {
            let _ = writeln!(stdout, "ok");
            return EXIT_OK;
        }
        return EXIT_CONFIG;
    }
    match run(&config, args.out.as_deref()) {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(stdout, "{l}");
            }
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
