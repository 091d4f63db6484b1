//! Command-line front end: flat key=value configuration files, built-in
//! figure presets and CSV output.
//!
//! One invocation runs exactly one task and writes exactly one CSV file.
//! Output is deterministic: rerunning the same configuration produces a
//! byte-identical file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_complex::Complex64;

use crate::correlations::{
    amplitude_autocorrelation, commutators, intensity_kernel, linewidth, phase_delay_variance,
    phase_drift_correlation, phase_sum_variance, quadrature_asymmetry, BeamKernels, KernelSet,
};
use crate::gaussian::GaussianParams;
use crate::model::{pump_parameter, NormalizedParams, OpoParams};
use crate::oracle::{max_stable_step, sde_psd, SdeConfig};
use crate::resonances::{charpoly, emax_boundary, roots, RootClass, DEFAULT_SNAP_TOL};
use crate::spectra::{
    difference_spectrum, sigma_mu_internal, single_beam_spectrum, NoiseWeights, Target,
};
use crate::transfer::{k_eval, Route};
use crate::{Error, Result};

/// Version string embedded in every CSV header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const TASKS: &[&str] = &[
    "roots",
    "boundary",
    "transfer",
    "spectrum",
    "difference",
    "correlations",
    "linewidth",
    "gaussian",
    "sde",
];

/// Parsed command line.
#[derive(Debug, Clone)]
pub struct Cli {
    /// Task to run.
    pub task: String,
    /// Configuration file, merged over the preset when both are given.
    pub config: Option<PathBuf>,
    /// Built-in preset name (`fig1` .. `fig8`).
    pub preset: Option<String>,
    /// Output path override.
    pub out: Option<PathBuf>,
    /// Seed override for the stochastic task.
    pub seed: Option<u64>,
}

/// What the command line asks for.
#[derive(Debug, Clone)]
pub enum CliAction {
    /// Run a task.
    Run(Cli),
    /// Print usage.
    Help,
    /// Print the version.
    Version,
}

/// Parses the argument list (without the program name).
pub fn parse_args(args: &[String]) -> Result<CliAction> {
    let mut task = None;
    let mut config = None;
    let mut preset = None;
    let mut out = None;
    let mut seed = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "-h" | "--help" => return Ok(CliAction::Help),
            "-V" | "--version" => return Ok(CliAction::Version),
            "--config" | "--preset" | "--out" | "--seed" => {
                let value = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("{arg} expects a value")))?;
                match arg.as_str() {
                    "--config" => set_once(&mut config, arg, PathBuf::from(value))?,
                    "--preset" => set_once(&mut preset, arg, value.clone())?,
                    "--out" => set_once(&mut out, arg, PathBuf::from(value))?,
                    _ => set_once(
                        &mut seed,
                        arg,
                        value.parse::<u64>().map_err(|_| {
                            Error::Config(format!("--seed expects an unsigned integer, got `{value}`"))
                        })?,
                    )?,
                }
            }
            other if other.starts_with('-') => {
                return Err(Error::Config(format!("unknown flag `{other}`")));
            }
            other => {
                if task.is_some() {
                    return Err(Error::Config(format!(
                        "unexpected extra argument `{other}`; one task per invocation"
                    )));
                }
                task = Some(other.to_string());
            }
        }
    }
    let task = task.ok_or_else(|| {
        Error::Config(format!("no task given; expected one of {}", TASKS.join(", ")))
    })?;
    if !TASKS.contains(&task.as_str()) {
        return Err(Error::Config(format!(
            "unknown task `{task}`; expected one of {}",
            TASKS.join(", ")
        )));
    }
    if config.is_none() && preset.is_none() {
        return Err(Error::Config(
            "provide --config <path>, --preset <name> or both".into(),
        ));
    }
    Ok(CliAction::Run(Cli {
        task,
        config,
        preset,
        out,
        seed,
    }))
}

fn set_once<T>(slot: &mut Option<T>, flag: &str, value: T) -> Result<()> {
    if slot.is_some() {
        return Err(Error::Config(format!("{flag} given twice")));
    }
    *slot = Some(value);
    Ok(())
}

/// Flat `[section]` / `key = value` configuration.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<(String, String), String>,
}

impl ConfigMap {
    /// Parses one configuration text.
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::Config(format!("line {lineno}: empty section name")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {lineno}: expected `key = value`, got `{line}`"))
            })?;
            let section = section
                .clone()
                .ok_or_else(|| Error::Config(format!("line {lineno}: key before any [section]")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty key")));
            }
            let prev = entries.insert((section.clone(), key.clone()), value.trim().to_string());
            if prev.is_some() {
                return Err(Error::Config(format!(
                    "line {lineno}: duplicate key `{key}` in section [{section}]"
                )));
            }
        }
        Ok(ConfigMap { entries })
    }

    /// Overlays `other` on top of this map; keys in `other` win.
    pub fn merge(&mut self, other: ConfigMap) {
        self.entries.extend(other.entries);
    }
}

/// Typed reader over a merged configuration, tracking key consumption so
/// that leftovers can be reported as mistakes.
struct Reader {
    entries: BTreeMap<(String, String), String>,
    used: BTreeSet<(String, String)>,
}

impl Reader {
    fn new(cfg: ConfigMap) -> Reader {
        Reader {
            entries: cfg.entries,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<String> {
        let id = (section.to_string(), key.to_string());
        let v = self.entries.get(&id).cloned();
        if v.is_some() {
            self.used.insert(id);
        }
        v
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.entries
            .contains_key(&(section.to_string(), key.to_string()))
    }

    fn str_opt(&mut self, section: &str, key: &str) -> Option<String> {
        self.raw(section, key)
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{section}.{key}: expected a number, got `{v}`"))),
        }
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    fn f64_req(&mut self, section: &str, key: &str) -> Result<f64> {
        self.f64_opt(section, key)?
            .ok_or_else(|| Error::Config(format!("missing required key {section}.{key}")))
    }

    fn u64_or(&mut self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v.parse::<u64>().map_err(|_| {
                Error::Config(format!("{section}.{key}: expected an unsigned integer, got `{v}`"))
            }),
        }
    }

    fn usize_or(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(section, key, default as u64)? as usize)
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!(
                    "{section}.{key}: expected true or false, got `{v}`"
                ))),
            },
        }
    }

    fn list_f64(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => {
                let items: Result<Vec<f64>> = v
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            Error::Config(format!("{section}.{key}: `{s}` is not a number"))
                        })
                    })
                    .collect();
                let items = items?;
                if items.is_empty() {
                    return Err(Error::Config(format!("{section}.{key}: empty list")));
                }
                Ok(Some(items))
            }
        }
    }

    fn finish(self) -> Result<()> {
        let leftover: Vec<String> = self
            .entries
            .keys()
            .filter(|id| !self.used.contains(*id))
            .map(|(s, k)| format!("{s}.{k}"))
            .collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "configuration keys not understood by this task: {}",
                leftover.join(", ")
            )))
        }
    }
}

/// One CSV cell.
#[derive(Debug)]
enum Cell {
    F(f64),
    I(i64),
    S(&'static str),
}

/// A complete result table ready to be serialized.
#[derive(Debug)]
pub struct Table {
    header: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: Vec<String>) -> Table {
        Table {
            header: BTreeMap::new(),
            columns,
            rows: Vec::new(),
        }
    }

    fn echo(&mut self, key: &str, value: impl std::fmt::Display) {
        self.header.insert(key.to_string(), value.to_string());
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Number of data rows.
    #[must_use]
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Serializes the table: `#`-prefixed header echoing the resolved
    /// parameters, one column-name line, then the data rows.  Floats carry
    /// 17 significant digits, complex values occupy paired re/im columns.
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# opo {VERSION}\n"));
        for (k, v) in &self.header {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                match cell {
                    Cell::F(v) => out.push_str(&format!("{v:.16e}")),
                    Cell::I(v) => out.push_str(&v.to_string()),
                    Cell::S(v) => out.push_str(v),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Writes `table` to `path` atomically (temporary file plus rename).
pub fn write_csv(path: &std::path::Path, table: &Table) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, table.to_csv())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

const PRESETS: &[(&str, &str)] = &[
    ("fig1", PRESET_FIG1),
    ("fig2", PRESET_FIG2),
    ("fig3", PRESET_FIG3),
    ("fig4", PRESET_FIG4),
    ("fig5", PRESET_FIG5),
    ("fig6", PRESET_FIG6),
    ("fig7", PRESET_FIG7),
    ("fig8", PRESET_FIG8),
];

/// Returns the text of a built-in preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!(
                "unknown preset `{name}`; expected one of {}",
                names.join(", ")
            ))
        })
}

const PRESET_FIG1: &str = "\
# Resonance trajectories of a detuned, mismatched cavity.
[task]
name = roots
[params]
g0 = 2.0
delta = 0.1
psi = 0.3
[roots]
# grid defaults of this preset
e_min = 1.001
e_max = 10.0
e_count = 400
";

const PRESET_FIG2: &str = "\
# Relaxation-oscillation boundary over the pump decay rate.
[task]
name = boundary
[params]
delta = 0.05
psi = 0.0
[boundary]
g0_min = 0.05
g0_max = 8.0
g0_count = 320
e_cap = 100.0
";

const PRESET_FIG3: &str = "\
# Matched resonant cavity: root trajectories for several pump decay rates.
[task]
name = roots
[params]
delta = 0.0
psi = 0.0
[roots]
g0_list = 0.5, 2.5, 4.5, 6.5
e_min = 1.001
e_max = 12.0
e_count = 400
";

const PRESET_FIG4: &str = "\
# Squared amplitude-quadrature transfer moduli of beam 1.
[task]
name = transfer
[params]
g0 = 1.0
delta = 0.05
psi = 0.0
[transfer]
j = 1
squared = true
e_list = 2.0, 3.0, 4.0
omega_min = 0.0
omega_max = 6.0
omega_count = 400
";

const PRESET_FIG5: &str = "\
# Time-domain quadrature observables of one beam.
# c_sq fixes the photon-number scale; observables scale with its inverse.
[task]
name = correlations
[params]
g0 = 4.0
delta = 0.2
psi = 0.1
[drive]
script_e = 1.5
[correlations]
j = 1
kind = observables
c_sq = 1.0
tau_min = 0.0
tau_max = 6.0
tau_count = 300
";

const PRESET_FIG6: &str = "\
# Single-beam amplitude spectrum at the output mirror, shot-noise units.
[task]
name = spectrum
[params]
g0 = 4.0
delta = 0.05
psi = 0.0
crystal_1 = 0.3
crystal_2 = 0.3
crystal_0 = 0.1
[drive]
e = 3.0
[noise]
s_eps = 0.0
dnu_l = 0.0
[spectrum]
j = 1
target = output
normalize = true
omega_min = 0.05
omega_max = 8.0
omega_count = 400
";

const PRESET_FIG7: &str = "\
# Pump excess-noise transfer into the single-beam spectrum.
[task]
name = spectrum
[params]
g0 = 4.0
delta = 0.05
psi = 0.0
crystal_1 = 0.3
crystal_2 = 0.3
crystal_0 = 0.1
[drive]
e = 3.0
[noise]
s_eps = 1.0
dnu_l = 0.0
[spectrum]
j = 1
target = output
normalize = true
omega_min = 0.05
omega_max = 8.0
omega_count = 400
";

const PRESET_FIG8: &str = "\
# Weighted intensity-difference spectrum, difference shot-noise units.
[task]
name = difference
[params]
g0 = 4.0
delta = 0.05
psi = 0.0
crystal_1 = 0.3
crystal_2 = 0.3
crystal_0 = 0.1
[drive]
e = 3.0
[noise]
s_eps = 0.0
dnu_l = 0.0
[difference]
normalize = true
omega_min = 0.01
omega_max = 8.0
omega_count = 160
";

/// Usage text for `--help`.
pub const HELP: &str = "\
opo - noise and dynamics of a triply resonant OPO above threshold

USAGE
    opo <task> [--config <path>] [--preset <name>] [--out <path>] [--seed <n>]

TASKS
    roots         resonances of the fluctuation dynamics over a pump grid
    boundary      relaxation-oscillation boundary over the pump decay rate
    transfer      quadrature transfer functions over a frequency grid
    spectrum      single-beam amplitude noise spectrum
    difference    weighted intensity-difference spectrum
    correlations  time-domain kernels or quadrature observables
    linewidth     beam linewidth and its contributions
    gaussian      phase-difference Gaussian state summary
    sde           stochastic-integration estimate of the beam spectra

CONFIGURATION
    Flat `key = value` files grouped by `[section]`.  `--preset` loads a
    built-in figure configuration (fig1 .. fig8); `--config` is merged on
    top of it, key by key.  `--out` overrides `output.path`, `--seed`
    overrides `sde.seed`.  Unknown keys are rejected.

    [params]   g0, delta, psi, crystal_1/2/0  (normalized route), or
               mirror_1/2/0, crystal_1/2/0, chi, psi  (raw-rate route)
    [drive]    e  or  script_e
    [noise]    s_eps, dnu_l
    [precision] eps_shift, snap_tol
    [output]   path

OUTPUT
    CSV, UTF-8, LF line endings.  `#` header lines echo the library version
    and every resolved parameter; floats carry 17 significant digits and
    complex quantities occupy paired re_*/im_* columns.  Files are written
    atomically and reruns are byte-identical.

EXIT CODES
    1 configuration parse error   2 validation error
    3 numerical failure           4 I/O error

ENVIRONMENT
    OPO_THREADS caps the worker-thread count.
";

/// Resolved physical parameters shared by all tasks.
struct ParamSpec {
    g0: Option<f64>,
    delta: f64,
    psi: f64,
    crystal: [f64; 3],
    raw: Option<OpoParams>,
}

impl ParamSpec {
    fn np(&self) -> Result<NormalizedParams> {
        let g0 = self.g0.ok_or_else(|| {
            Error::Config("missing required key params.g0 (or raw mirror/crystal rates)".into())
        })?;
        self.np_at(g0)
    }

    fn np_at(&self, g0: f64) -> Result<NormalizedParams> {
        NormalizedParams::new(g0, self.delta, self.psi)?.with_crystal_loss(self.crystal)
    }
}

fn resolve_params(r: &mut Reader, table: &mut Table) -> Result<ParamSpec> {
    let raw_route = r.has("params", "mirror_1") || r.has("params", "chi");
    let spec = if raw_route {
        let mirror = [
            r.f64_req("params", "mirror_1")?,
            r.f64_req("params", "mirror_2")?,
            r.f64_req("params", "mirror_0")?,
        ];
        let crystal = [
            r.f64_or("params", "crystal_1", 0.0)?,
            r.f64_or("params", "crystal_2", 0.0)?,
            r.f64_or("params", "crystal_0", 0.0)?,
        ];
        let psi = r.f64_or("params", "psi", 0.0)?;
        let chi = r.f64_req("params", "chi")?;
        let raw = OpoParams {
            mirror_loss: mirror,
            crystal_loss: crystal,
            psi,
            chi,
        };
        let np = raw.normalize()?;
        for (k, v) in [
            ("params.mirror_1", mirror[0]),
            ("params.mirror_2", mirror[1]),
            ("params.mirror_0", mirror[2]),
            ("params.chi", chi),
        ] {
            table.echo(k, v);
        }
        table.echo("params.g0", np.gtilde0);
        table.echo("params.delta", np.delta_tilde);
        ParamSpec {
            g0: Some(np.gtilde0),
            delta: np.delta_tilde,
            psi: np.psi,
            crystal: np.crystal_loss,
            raw: Some(raw),
        }
    } else {
        let g0 = r.f64_opt("params", "g0")?;
        let delta = r.f64_or("params", "delta", 0.0)?;
        let psi = r.f64_or("params", "psi", 0.0)?;
        let crystal = [
            r.f64_or("params", "crystal_1", 0.0)?,
            r.f64_or("params", "crystal_2", 0.0)?,
            r.f64_or("params", "crystal_0", 0.0)?,
        ];
        if let Some(g0) = g0 {
            table.echo("params.g0", g0);
        }
        table.echo("params.delta", delta);
        ParamSpec {
            g0,
            delta,
            psi,
            crystal,
            raw: None,
        }
    };
    table.echo("params.psi", spec.psi);
    table.echo("params.crystal_1", spec.crystal[0]);
    table.echo("params.crystal_2", spec.crystal[1]);
    table.echo("params.crystal_0", spec.crystal[2]);
    // Validate eagerly when the decay rate is already known.
    if spec.g0.is_some() {
        spec.np()?;
    }
    Ok(spec)
}

fn resolve_drive(r: &mut Reader, psi: f64, table: &mut Table) -> Result<f64> {
    let e = r.f64_opt("drive", "e")?;
    let script_e = r.f64_opt("drive", "script_e")?;
    let e = match (e, script_e) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either drive.e or drive.script_e, not both".into(),
            ))
        }
        (Some(e), None) => e,
        (None, Some(s)) => pump_parameter(s, psi)?,
        (None, None) => return Err(Error::Config("missing required key drive.e".into())),
    };
    table.echo("drive.e", e);
    Ok(e)
}

fn resolve_noise(r: &mut Reader, table: &mut Table) -> Result<(f64, f64)> {
    let s_eps = r.f64_or("noise", "s_eps", 0.0)?;
    let dnu_l = r.f64_or("noise", "dnu_l", 0.0)?;
    table.echo("noise.s_eps", s_eps);
    table.echo("noise.dnu_l", dnu_l);
    Ok((s_eps, dnu_l))
}

fn linspace(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::Validation("grid endpoints must be finite".into()));
    }
    if !(min < max) {
        return Err(Error::Validation(format!(
            "grid must be strictly increasing; got min {min}, max {max}"
        )));
    }
    if count < 2 {
        return Err(Error::Validation(format!(
            "grid needs at least two points, got {count}"
        )));
    }
    let step = (max - min) / (count - 1) as f64;
    Ok((0..count).map(|i| min + step * i as f64).collect())
}

fn grid(r: &mut Reader, section: &str, axis: &str, defaults: (f64, f64, usize), table: &mut Table) -> Result<Vec<f64>> {
    let min = r.f64_or(section, &format!("{axis}_min"), defaults.0)?;
    let max = r.f64_or(section, &format!("{axis}_max"), defaults.1)?;
    let count = r.usize_or(section, &format!("{axis}_count"), defaults.2)?;
    table.echo(&format!("{section}.{axis}_min"), min);
    table.echo(&format!("{section}.{axis}_max"), max);
    table.echo(&format!("{section}.{axis}_count"), count);
    linspace(min, max, count)
}

fn snap_tol(r: &mut Reader, table: &mut Table) -> Result<f64> {
    let tol = r.f64_or("precision", "snap_tol", DEFAULT_SNAP_TOL)?;
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("snap tolerance must be positive, got {tol}")));
    }
    table.echo("precision.snap_tol", tol);
    Ok(tol)
}

/// Photon-number scale for the correlation prefactors: explicit key first,
/// then the steady state when raw rates fix it, unity otherwise.
fn resolve_c_sq(
    r: &mut Reader,
    section: &str,
    spec: &ParamSpec,
    e: f64,
    table: &mut Table,
) -> Result<f64> {
    let c_sq = match r.f64_opt(section, "c_sq")? {
        Some(v) => v,
        None => match &spec.raw {
            Some(raw) => crate::model::steady_state(raw, e)?.c_sq,
            None => 1.0,
        },
    };
    if !(c_sq > 0.0) {
        return Err(Error::Validation(format!(
            "{section}.c_sq must be positive, got {c_sq}"
        )));
    }
    table.echo(&format!("{section}.c_sq"), c_sq);
    Ok(c_sq)
}

fn beam_index(r: &mut Reader, section: &str, table: &mut Table) -> Result<u8> {
    let j = r.u64_or(section, "j", 1)?;
    if j != 1 && j != 2 {
        return Err(Error::Validation(format!("{section}.j must be 1 or 2, got {j}")));
    }
    table.echo(&format!("{section}.j"), j);
    Ok(j as u8)
}

fn re_im(c: Complex64) -> [Cell; 2] {
    [Cell::F(c.re), Cell::F(c.im)]
}

/// Runs the resolved command line and returns the written table along with
/// its output path.
pub fn run(cli: &Cli) -> Result<(PathBuf, Table)> {
    let mut cfg = ConfigMap::default();
    if let Some(name) = &cli.preset {
        cfg.merge(ConfigMap::parse(preset_text(name)?)?);
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        cfg.merge(ConfigMap::parse(&text)?);
    }
    let mut r = Reader::new(cfg);
    if let Some(name) = r.str_opt("task", "name") {
        if name != cli.task {
            return Err(Error::Config(format!(
                "configuration names task `{name}` but the command line asks for `{}`",
                cli.task
            )));
        }
    }
    let out = match (&cli.out, r.str_opt("output", "path")) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) => PathBuf::from(path),
        (None, None) => {
            return Err(Error::Config(
                "no output path; give --out or set output.path".into(),
            ))
        }
    };

    let mut table = run_task(cli, &mut r)?;
    r.finish()?;
    table.echo("task.name", &cli.task);
    if let Some(name) = &cli.preset {
        table.echo("task.preset", name);
    }
    write_csv(&out, &table)?;
    Ok((out, table))
}

fn run_task(cli: &Cli, r: &mut Reader) -> Result<Table> {
    match cli.task.as_str() {
        "roots" => task_roots(r),
        "boundary" => task_boundary(r),
        "transfer" => task_transfer(r),
        "spectrum" => task_spectrum(r),
        "difference" => task_difference(r),
        "correlations" => task_correlations(r),
        "linewidth" => task_linewidth(r),
        "gaussian" => task_gaussian(r),
        "sde" => task_sde(cli, r),
        _ => unreachable!("task validated in parse_args"),
    }
}

fn task_roots(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        ["g0", "e", "root", "re_omega", "im_omega", "class"]
            .map(String::from)
            .to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    let tol = snap_tol(r, &mut table)?;
    let e_grid = grid(r, "roots", "e", (1.001, 10.0, 400), &mut table)?;
    if e_grid[0] <= 1.0 {
        return Err(Error::Validation(
            "pump-parameter grid must stay above threshold (e > 1)".into(),
        ));
    }
    let g0_values = match r.list_f64("roots", "g0_list")? {
        Some(list) => {
            table.echo(
                "roots.g0_list",
                list.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            list
        }
        None => vec![spec.np()?.gtilde0],
    };
    for &g0 in &g0_values {
        let np = spec.np_at(g0)?;
        for &e in &e_grid {
            let set = roots(&charpoly(&np, e)?, tol)?;
            for (idx, (root, class)) in set.roots.iter().zip(&set.class).enumerate() {
                table.push(vec![
                    Cell::F(g0),
                    Cell::F(e),
                    Cell::I(idx as i64 + 1),
                    Cell::F(root.re),
                    Cell::F(root.im),
                    Cell::S(match class {
                        RootClass::Imaginary => "imaginary",
                        RootClass::ComplexPair => "complex",
                    }),
                ]);
            }
        }
    }
    Ok(table)
}

fn task_boundary(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        ["g0", "segment", "e_lo", "e_hi"].map(String::from).to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    if spec.psi != 0.0 {
        return Err(Error::Validation(
            "the boundary scan is defined for the resonant cavity (psi = 0)".into(),
        ));
    }
    let g0_grid = grid(r, "boundary", "g0", (0.05, 8.0, 320), &mut table)?;
    let e_cap = r.f64_or("boundary", "e_cap", 100.0)?;
    table.echo("boundary.e_cap", e_cap);
    let points = emax_boundary(&g0_grid, spec.delta, e_cap)?;
    for p in &points {
        table.push(vec![
            Cell::F(p.gtilde0),
            Cell::I(0),
            Cell::F(1.0),
            Cell::F(p.e_max),
        ]);
        for (idx, seg) in p.detached.iter().enumerate() {
            table.push(vec![
                Cell::F(p.gtilde0),
                Cell::I(idx as i64 + 1),
                Cell::F(seg.e_lo),
                Cell::F(seg.e_hi),
            ]);
        }
    }
    Ok(table)
}

fn parse_route(r: &mut Reader, table: &mut Table) -> Result<Route> {
    let name = r
        .str_opt("transfer", "route")
        .unwrap_or_else(|| "general".into());
    let route = match name.as_str() {
        "general" => Route::General,
        "resonant" => Route::Resonant,
        "adiabatic" => Route::Adiabatic,
        _ => {
            return Err(Error::Config(format!(
                "transfer.route must be general, resonant or adiabatic, got `{name}`"
            )))
        }
    };
    table.echo("transfer.route", name);
    Ok(route)
}

fn task_transfer(r: &mut Reader) -> Result<Table> {
    let mut probe = Table::new(Vec::new());
    let spec = resolve_params(r, &mut probe)?;
    let np = spec.np()?;
    let route = parse_route(r, &mut probe)?;
    let squared = r.bool_or("transfer", "squared", true)?;
    let j = beam_index(r, "transfer", &mut probe)?;
    let eps_shift = r.f64_or("precision", "eps_shift", 0.0)?;
    if eps_shift < 0.0 {
        return Err(Error::Validation("eps_shift must be nonnegative".into()));
    }
    let e_list = match r.list_f64("transfer", "e_list")? {
        Some(list) => list,
        None => vec![resolve_drive(r, np.psi, &mut probe)?],
    };
    let omega = grid(r, "transfer", "omega", (0.0, 6.0, 400), &mut probe)?;
    if route != Route::General && omega[0] <= 0.0 {
        return Err(Error::Validation(
            "reduced routes need a strictly positive frequency grid".into(),
        ));
    }

    let columns: Vec<String> = if squared {
        let jp = if j == 1 { 2 } else { 1 };
        vec![
            "e".into(),
            "omega".into(),
            format!("k0_{j}{j}_sq"),
            format!("k0_{j}{jp}_sq"),
            format!("k0_{j}0_sq"),
        ]
    } else {
        let mut cols = vec!["e".to_string(), "omega".to_string()];
        for name in [
            "k0_11", "k0_12", "k0_10", "k0_22", "k0_21", "k0_20", "kp_11", "kp_12", "kp_10",
            "kp_22", "kp_21", "kp_20", "k0_01", "k0_02",
        ] {
            cols.push(format!("re_{name}"));
            cols.push(format!("im_{name}"));
        }
        cols
    };
    let mut table = Table::new(columns);
    table.header = probe.header;
    table.echo("transfer.squared", squared);
    table.echo(
        "transfer.e_list",
        e_list
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    table.echo("precision.eps_shift", eps_shift);

    let jp = if j == 1 { 2 } else { 1 };
    for &e in &e_list {
        for &w in &omega {
            let kv = k_eval(&np, e, Complex64::new(w, 0.0), route, eps_shift)?;
            if squared {
                table.push(vec![
                    Cell::F(e),
                    Cell::F(w),
                    Cell::F(kv.amp(j, j).norm_sqr()),
                    Cell::F(kv.amp(j, jp).norm_sqr()),
                    Cell::F(kv.amp(j, 0).norm_sqr()),
                ]);
            } else {
                let nan = Complex64::new(f64::NAN, f64::NAN);
                let mut row = vec![Cell::F(e), Cell::F(w)];
                for v in [
                    kv.k0_11, kv.k0_12, kv.k0_10, kv.k0_22, kv.k0_21, kv.k0_20, kv.kp_11,
                    kv.kp_12, kv.kp_10, kv.kp_22, kv.kp_21, kv.kp_20,
                ] {
                    row.extend(re_im(v));
                }
                row.extend(re_im(kv.k0_01.unwrap_or(nan)));
                row.extend(re_im(kv.k0_02.unwrap_or(nan)));
                table.push(row);
            }
        }
    }
    Ok(table)
}

fn task_spectrum(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        ["omega", "quantum", "pump_amp", "pump_phase", "commutator", "total"]
            .map(String::from)
            .to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    let np = spec.np()?;
    let e = resolve_drive(r, np.psi, &mut table)?;
    let (s_eps, dnu_l) = resolve_noise(r, &mut table)?;
    let j = beam_index(r, "spectrum", &mut table)?;
    let target_name = r
        .str_opt("spectrum", "target")
        .unwrap_or_else(|| "output".into());
    let target = match target_name.as_str() {
        "internal" => Target::Internal,
        "output" => Target::Output,
        _ => {
            return Err(Error::Config(format!(
                "spectrum.target must be internal or output, got `{target_name}`"
            )))
        }
    };
    table.echo("spectrum.target", target_name);
    let normalize = r.bool_or("spectrum", "normalize", true)?;
    table.echo("spectrum.normalize", normalize);
    let omega = grid(r, "spectrum", "omega", (0.05, 8.0, 400), &mut table)?;
    if dnu_l > 0.0 && omega[0] <= 0.0 {
        return Err(Error::Validation(
            "a drive phase spectrum diverges at zero frequency; start the grid above it".into(),
        ));
    }
    let weights = NoiseWeights::new(&np, e, s_eps, dnu_l)?;
    let series = single_beam_spectrum(&np, e, &weights, j, target, &omega, normalize)?;
    table.echo("result.snl", series.snl);
    for p in &series.points {
        table.push(vec![
            Cell::F(p.omega),
            Cell::F(p.quantum),
            Cell::F(p.pump_amp),
            Cell::F(p.pump_phase),
            Cell::F(p.commutator),
            Cell::F(p.total()),
        ]);
    }
    Ok(table)
}

fn task_difference(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        ["omega", "quantum", "pump_amp", "pump_phase", "commutator", "total"]
            .map(String::from)
            .to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    let np = spec.np()?;
    let e = resolve_drive(r, np.psi, &mut table)?;
    let (s_eps, dnu_l) = resolve_noise(r, &mut table)?;
    let normalize = r.bool_or("difference", "normalize", true)?;
    table.echo("difference.normalize", normalize);
    let omega = grid(r, "difference", "omega", (0.01, 8.0, 160), &mut table)?;
    let weights = NoiseWeights::new(&np, e, s_eps, dnu_l)?;
    let series = difference_spectrum(&np, e, &weights, &omega, normalize)?;
    table.echo("result.i1", series.i1);
    table.echo("result.i2", series.i2);
    table.echo("result.snl_d", series.snl_d);
    for p in &series.points {
        table.push(vec![
            Cell::F(p.omega),
            Cell::F(p.quantum),
            Cell::F(p.pump_amp),
            Cell::F(p.pump_phase),
            Cell::F(p.commutator),
            Cell::F(p.total()),
        ]);
    }
    Ok(table)
}

fn task_correlations(r: &mut Reader) -> Result<Table> {
    let mut probe = Table::new(Vec::new());
    let spec = resolve_params(r, &mut probe)?;
    let np = spec.np()?;
    let e = resolve_drive(r, np.psi, &mut probe)?;
    let (_, dnu_l) = resolve_noise(r, &mut probe)?;
    let j = beam_index(r, "correlations", &mut probe)?;
    let kind = r
        .str_opt("correlations", "kind")
        .unwrap_or_else(|| "kernels".into());
    let c_sq = resolve_c_sq(r, "correlations", &spec, e, &mut probe)?;
    let tau = grid(r, "correlations", "tau", (0.0, 6.0, 300), &mut probe)?;
    if tau[0] < 0.0 {
        return Err(Error::Validation("delays must be nonnegative".into()));
    }
    probe.echo("correlations.kind", &kind);

    match kind.as_str() {
        "kernels" => {
            let mut table = Table::new({
                let mut cols = vec!["tau".to_string()];
                for name in ["phi_phi", "mu_mu", "mu_phi", "phi_mu"] {
                    cols.push(format!("re_{name}"));
                    cols.push(format!("im_{name}"));
                }
                cols
            });
            table.header = probe.header;
            let jj = KernelSet::new(&np, e, j, j)?;
            for &t in &tau {
                let v = jj.eval(t)?;
                let mut row = vec![Cell::F(t)];
                row.extend(re_im(v.phi_phi));
                row.extend(re_im(v.mu_mu));
                row.extend(re_im(v.mu_phi));
                row.extend(re_im(v.phi_mu));
                table.push(row);
            }
            Ok(table)
        }
        "observables" => {
            let mut table = Table::new({
                let mut cols = Vec::new();
                cols.push("tau".to_string());
                for name in ["drift", "amp", "asym"] {
                    cols.push(format!("re_{name}"));
                    cols.push(format!("im_{name}"));
                }
                for name in [
                    "comm_phi_phi",
                    "comm_mu_mu",
                    "comm_phi_mu_anti",
                    "comm_phi_mu",
                    "delay_variance",
                    "sum_variance",
                    "intensity",
                ] {
                    cols.push(name.to_string());
                }
                cols
            });
            table.header = probe.header;
            let bk = BeamKernels::new(&np, e, j)?;
            let lw = linewidth(&np, e, j, c_sq, dnu_l)?;
            table.echo("result.dnu", lw.total);
            for &t in &tau {
                let drift = phase_drift_correlation(&bk.jj, t, c_sq, lw.total)?;
                let amp = amplitude_autocorrelation(&bk.jj, t, c_sq)?;
                let asym = quadrature_asymmetry(&bk.jj, t, c_sq)?;
                let comm = commutators(&bk.jj, t, c_sq)?;
                let delay = phase_delay_variance(&bk.jj, t, c_sq, lw.total)?;
                let sum = phase_sum_variance(&bk, t, c_sq, lw.total)?;
                let intensity = intensity_kernel(&bk.jj, t)?;
                let mut row = vec![Cell::F(t)];
                row.extend(re_im(drift));
                row.extend(re_im(amp));
                row.extend(re_im(asym));
                row.push(Cell::F(comm.phi_phi));
                row.push(Cell::F(comm.mu_mu));
                row.push(Cell::F(comm.phi_mu_anti));
                row.push(Cell::F(comm.phi_mu));
                row.push(Cell::F(delay));
                row.push(Cell::F(sum));
                row.push(Cell::F(intensity));
                table.push(row);
            }
            Ok(table)
        }
        _ => Err(Error::Config(format!(
            "correlations.kind must be kernels or observables, got `{kind}`"
        ))),
    }
}

fn task_linewidth(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        ["j", "broadening", "drive", "spontaneous", "total"]
            .map(String::from)
            .to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    let np = spec.np()?;
    let e = resolve_drive(r, np.psi, &mut table)?;
    let (_, dnu_l) = resolve_noise(r, &mut table)?;
    let j = beam_index(r, "linewidth", &mut table)?;
    let c_sq = resolve_c_sq(r, "linewidth", &spec, e, &mut table)?;
    let lw = linewidth(&np, e, j, c_sq, dnu_l)?;
    table.push(vec![
        Cell::I(i64::from(j)),
        Cell::F(lw.broadening),
        Cell::F(lw.drive),
        Cell::F(lw.spontaneous),
        Cell::F(lw.total),
    ]);
    Ok(table)
}

fn task_gaussian(r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        [
            "n_mu",
            "n_phi",
            "k",
            "u",
            "v",
            "w",
            "trace",
            "mu_sq",
            "phi_sq",
            "im_commutator",
            "theta",
            "nu",
            "normalization",
        ]
        .map(String::from)
        .to_vec(),
    );
    let n_mu = r.f64_req("gaussian", "n_mu")?;
    let n_phi = r.f64_req("gaussian", "n_phi")?;
    let k = r.f64_or("gaussian", "k", 1.0)?;
    table.echo("gaussian.n_mu", n_mu);
    table.echo("gaussian.n_phi", n_phi);
    table.echo("gaussian.k", k);
    let gp = GaussianParams::new(n_mu, n_phi, k)?;
    let d = gp.disentangle();
    let m = gp.moments();
    let thermal = gp.squeeze_to_thermal()?;
    table.push(vec![
        Cell::F(n_mu),
        Cell::F(n_phi),
        Cell::F(k),
        Cell::F(d.u),
        Cell::F(d.v),
        Cell::F(d.w),
        Cell::F(gp.trace()),
        Cell::F(m.mu_sq),
        Cell::F(m.phi_sq),
        Cell::F(m.commutator.im),
        Cell::F(thermal.theta),
        Cell::F(thermal.nu),
        Cell::F(thermal.normalization),
    ]);
    Ok(table)
}

fn task_sde(cli: &Cli, r: &mut Reader) -> Result<Table> {
    let mut table = Table::new(
        [
            "omega",
            "s_mu_1",
            "stderr_1",
            "s_mu_2",
            "stderr_2",
            "analytic_1",
            "analytic_2",
        ]
        .map(String::from)
        .to_vec(),
    );
    let spec = resolve_params(r, &mut table)?;
    let np = spec.np()?;
    let e = resolve_drive(r, np.psi, &mut table)?;
    let (s_eps, dnu_l) = resolve_noise(r, &mut table)?;
    if s_eps != 0.0 || dnu_l != 0.0 {
        return Err(Error::Validation(
            "the stochastic run models quantum noise only; set s_eps and dnu_l to zero".into(),
        ));
    }
    let config_seed = r.u64_or("sde", "seed", 1234)?;
    let seed = cli.seed.unwrap_or(config_seed);
    let cfg = SdeConfig {
        dt: r.f64_or("sde", "dt", 0.0)?,
        steps: r.u64_or("sde", "steps", 1_000_000)?,
        seed,
        chunks: r.u64_or("sde", "chunks", 16)? as u32,
        segment_len: r.usize_or("sde", "segment_len", 8192)?,
    };
    let weights = NoiseWeights::new(&np, e, 0.0, 0.0)?;
    let run = sde_psd(&np, e, &weights, &cfg)?;
    table.echo("sde.seed", seed);
    table.echo("sde.steps", cfg.steps);
    table.echo("sde.chunks", cfg.chunks);
    table.echo("sde.segment_len", cfg.segment_len);
    table.echo("sde.dt", run.config.dt);
    table.echo("sde.dt_max", max_stable_step(&np, e));
    table.echo("result.segments", run.segments);
    table.echo("result.k_eff", run.k_eff);
    for (i, &w) in run.omega.iter().enumerate() {
        let analytic = |j: u8| -> Result<f64> {
            Ok(sigma_mu_internal(&np, e, &weights, j, w)?
                + sigma_mu_internal(&np, e, &weights, j, -w)?)
        };
        table.push(vec![
            Cell::F(w),
            Cell::F(run.s_mu[0][i]),
            Cell::F(run.stderr[0][i]),
            Cell::F(run.s_mu[1][i]),
            Cell::F(run.stderr[1][i]),
            Cell::F(analytic(1)?),
            Cell::F(analytic(2)?),
        ]);
    }
    Ok(table)
}

/// Full process entry: parses `args`, runs, reports, returns the exit code.
///
/// Errors are printed to stderr as a single machine-readable line:
/// `opo-error code=<n> kind=<kind> msg="<message>"`.
pub fn main_entry(args: Vec<String>) -> i32 {
    if let Ok(threads) = std::env::var("OPO_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                // A later global pool wins only once; ignore re-initialization.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                report(&Error::Config(format!(
                    "OPO_THREADS must be a positive integer, got `{threads}`"
                )));
                return 1;
            }
        }
    }
    match parse_args(&args) {
        Ok(CliAction::Help) => {
            println!("{HELP}");
            0
        }
        Ok(CliAction::Version) => {
            println!("opo {VERSION}");
            0
        }
        Ok(CliAction::Run(cli)) => match run(&cli) {
            Ok((path, table)) => {
                println!("wrote {} ({} rows)", path.display(), table.row_count());
                0
            }
            Err(e) => {
                report(&e);
                e.exit_code()
            }
        },
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &Error) {
    let msg = e.to_string().replace('"', "'");
    eprintln!("opo-error code={} kind={} msg=\"{}\"", e.exit_code(), e.kind(), msg);
}
