//! Run configuration, single runs and the parameter sweeps behind the result tables.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{
    build_time_grid, compute_tc, trapezoid_stats, MovingDomainSpec, SegmentMode, SpaceTimeMeshStats, TimeGrid,
};
use crate::stackelberg::{fixed_point_solve, nash_gradient_check, NashCheck, PhiTerminal, SNConfig, SNResult, Target};
use crate::wave::{AdjointScheme, FluxMethod};

/// Terminal data for the auxiliary adjoint `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhiTerminalSpec {
    #[default]
    Zero,
    /// `phi(T) = a sin(pi x / alpha(T))`, `phi_t(T) = b sin(pi x / alpha(T))`.
    Sine { a: f64, b: f64 },
}

impl std::str::FromStr for PhiTerminalSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("zero") {
            return Ok(PhiTerminalSpec::Zero);
        }
        let rest = s
            .strip_prefix("sine:")
            .ok_or_else(|| format!("expected `zero` or `sine:A,B`, got `{s}`"))?;
        let (a, b) = rest
            .split_once(',')
            .ok_or_else(|| format!("expected `sine:A,B`, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        Ok(PhiTerminalSpec::Sine {
            a: parse(a)?,
            b: parse(b)?,
        })
    }
}

impl fmt::Display for PhiTerminalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiTerminalSpec::Zero => f.write_str("zero"),
            PhiTerminalSpec::Sine { a, b } => write!(f, "sine:{a:e},{b:e}"),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: f64,
    /// `T = t_multiple * T_c(k)` unless `horizon` is set.
    pub t_multiple: f64,
    /// Absolute horizon; required when `k = 0`.
    pub horizon: Option<f64>,
    /// Spatial cells per level.
    pub n: usize,
    /// Time steps.
    pub m: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub u2: f64,
    pub segments: SegmentMode,
    pub phi_terminal: PhiTerminalSpec,
    pub flux: FluxMethod,
    pub adjoint: AdjointScheme,
    /// Directions used by the optimality check of a single run; 0 disables it.
    pub nash_directions: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 0.25,
            t_multiple: 1.0,
            horizon: None,
            n: 100,
            m: 100,
            sigma: 1e2,
            epsilon: 1e-5,
            max_iter: 100,
            u2: 10.0,
            segments: SegmentMode::DisjointHalves,
            phi_terminal: PhiTerminalSpec::Zero,
            flux: FluxMethod::OneSided,
            adjoint: AdjointScheme::Printed,
            nash_directions: 5,
            seed: 20240101,
            out_dir: None,
        }
    }
}

fn usage(key: &str, reason: impl Into<String>) -> Error {
    Error::Usage {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| usage(key, format!("cannot parse `{}`: {e}", value.trim())))
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`], in file order.
    pub const KEYS: [&'static str; 16] = [
        "k",
        "T_multiple",
        "T",
        "N",
        "M",
        "sigma",
        "epsilon",
        "max_iter",
        "u2",
        "segments",
        "phi_terminal",
        "flux",
        "adjoint",
        "nash_directions",
        "seed",
        "out_dir",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k = parse_value(key, value)?,
            "T_multiple" => self.t_multiple = parse_value(key, value)?,
            "T" => self.horizon = Some(parse_value(key, value)?),
            "N" => self.n = parse_value(key, value)?,
            "M" => self.m = parse_value(key, value)?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "u2" => self.u2 = parse_value(key, value)?,
            "segments" => self.segments = parse_value(key, value)?,
            "phi_terminal" => self.phi_terminal = parse_value(key, value)?,
            "flux" => self.flux = parse_value(key, value)?,
            "adjoint" => self.adjoint = parse_value(key, value)?,
            "nash_directions" => self.nash_directions = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value.trim())),
            _ => return Err(usage(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(line, format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Defaults, then the optional file, then the overrides in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k < 1.0) {
            return Err(usage("k", format!("must lie in [0, 1), got {}", self.k)));
        }
        if !(self.t_multiple.is_finite() && self.t_multiple > 0.0) {
            return Err(usage(
                "T_multiple",
                format!("must be positive, got {}", self.t_multiple),
            ));
        }
        match self.horizon {
            Some(t) if !(t.is_finite() && t > 0.0) => return Err(usage("T", format!("must be positive, got {t}"))),
            None if self.k == 0.0 => return Err(usage("T", "required when k = 0 (T_c is undefined)")),
            _ => {}
        }
        if self.n < 2 {
            return Err(usage("N", format!("need at least 2 cells, got {}", self.n)));
        }
        if self.m < 2 {
            return Err(usage("M", format!("need at least 2 steps, got {}", self.m)));
        }
        if !self.u2.is_finite() {
            return Err(usage("u2", "must be finite"));
        }
        if let PhiTerminalSpec::Sine { a, b } = self.phi_terminal {
            if !(a.is_finite() && b.is_finite()) {
                return Err(usage("phi_terminal", "amplitudes must be finite"));
            }
        }
        self.sn_config().validate()
    }

    pub fn horizon(&self) -> Result<f64> {
        match self.horizon {
            Some(t) => Ok(t),
            None => Ok(self.t_multiple * compute_tc(self.k).map_err(|e| usage("k", e.to_string()))?),
        }
    }

    pub fn spec(&self) -> Result<MovingDomainSpec> {
        MovingDomainSpec::new(self.k, self.horizon()?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        build_time_grid(self.horizon()?, self.m)
    }

    pub fn sn_config(&self) -> SNConfig {
        let phi_terminal = match self.phi_terminal {
            PhiTerminalSpec::Zero => None,
            PhiTerminalSpec::Sine { a, b } => {
                let len = self.spec().and_then(|s| s.alpha(s.horizon())).unwrap_or(1.0);
                let w = std::f64::consts::PI / len;
                Some(PhiTerminal {
                    f0: Arc::new(move |x| a * (w * x).sin()),
                    f1: Arc::new(move |x| b * (w * x).sin()),
                })
            }
        };
        SNConfig {
            sigma: self.sigma,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            target: Target::Constant(self.u2),
            phi_terminal,
            segment_mode: self.segments,
            flux: self.flux,
            adjoint: self.adjoint,
            ..SNConfig::default()
        }
    }

    /// The configuration as `key = value` lines, readable by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("k", format!("{:e}", self.k));
        line("T_multiple", format!("{:e}", self.t_multiple));
        if let Some(t) = self.horizon {
            line("T", format!("{t:e}"));
        }
        line("N", self.n.to_string());
        line("M", self.m.to_string());
        line("sigma", format!("{:e}", self.sigma));
        line("epsilon", format!("{:e}", self.epsilon));
        line("max_iter", self.max_iter.to_string());
        line("u2", format!("{:e}", self.u2));
        line("segments", self.segments.to_string());
        line("phi_terminal", self.phi_terminal.to_string());
        line("flux", self.flux.to_string());
        line("adjoint", self.adjoint.to_string());
        line("nash_directions", self.nash_directions.to_string());
        line("seed", self.seed.to_string());
        if let Some(d) = &self.out_dir {
            line("out_dir", d.display().to_string());
        }
        s
    }
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub horizon: f64,
    pub result: SNResult,
    pub nash: Option<NashCheck>,
    pub summary: String,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes `x,u_T` rows of the final state.
pub fn write_profile_csv<W: Write>(result: &SNResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,u_T")?;
    let last = result.u.last();
    for (x, v) in last.mesh.nodes().iter().zip(&last.values) {
        writeln!(out, "{x:.17e},{v:.17e}")?;
    }
    out.flush()
}

/// Runs the fixed point for `config` and, when `out_dir` is set, writes
/// `iterations.csv`, `profile.csv` and `summary.txt` there.
pub fn run_single(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let spec = config.spec()?;
    let grid = config.grid()?;
    let sn = config.sn_config();
    let result = fixed_point_solve(&sn, &spec, &grid, config.n)?;

    let nash = if config.nash_directions > 0 && result.converged {
        Some(nash_gradient_check(
            &result.w1,
            &result.w2,
            &sn,
            &spec,
            &grid,
            config.n,
            config.nash_directions,
            config.seed,
        )?)
    } else {
        None
    };

    let mut summary = format!(
        "k={:e} T={:.17e} N={} M={} sigma={:e} converged={} iterations={} stop_qty={:.17e}",
        config.k,
        spec.horizon(),
        config.n,
        config.m,
        config.sigma,
        result.converged,
        result.iterations,
        result.final_stop_qty(),
    );
    if let Some(rec) = result.log.records.last() {
        summary.push_str(&format!(" J={:.17e} J2={:.17e}", rec.j, rec.j2));
    }
    if let Some(c) = &nash {
        summary.push_str(&format!(
            " nash_fd_discrepancy={:.17e} follower_residual={:.17e}",
            c.max_rel_discrepancy, c.follower_residual
        ));
    }

    let mut files = Vec::new();
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        let path = dir.join("iterations.csv");
        result.log.write_csv(create(&path)?)?;
        files.push(path);
        let path = dir.join("profile.csv");
        write_profile_csv(&result, create(&path)?)?;
        files.push(path);
        let path = dir.join("summary.txt");
        fs::write(&path, format!("{summary}\n"))?;
        files.push(path);
    }

    Ok(RunOutput {
        horizon: spec.horizon(),
        result,
        nash,
        summary,
        files,
    })
}

/// One row of a sweep. Columns that do not apply to a sweep are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub key: String,
    pub t_multiple: f64,
    pub horizon: f64,
    pub sigma: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub stop_qty: Option<f64>,
    /// Change of `u` over the last sweep, which is also the distance of the
    /// previous iterate to the final one.
    pub du_l2: Option<f64>,
    pub dw_l2: Option<f64>,
    pub j2: Option<f64>,
    pub mesh: Option<SpaceTimeMeshStats>,
}

impl TableRow {
    pub const CSV_HEADER: &'static str =
        "key,T_multiple,T,sigma,iterations,converged,stop_qty,du_L2,dw_L2,J2,vertices,triangles,border_length";

    fn from_run(key: String, config: &RunConfig, horizon: f64, result: &SNResult) -> Self {
        let last = result.log.records.last();
        TableRow {
            key,
            t_multiple: config.t_multiple,
            horizon,
            sigma: config.sigma,
            iterations: Some(result.iterations),
            converged: Some(result.converged),
            stop_qty: Some(result.final_stop_qty()),
            du_l2: last.map(|r| r.du_l2),
            dw_l2: last.map(|r| r.dw_l2),
            j2: last.map(|r| r.j2),
            mesh: None,
        }
    }

    pub fn csv_line(&self) -> String {
        fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
            v.map(f).unwrap_or_default()
        }
        let sci = |v: f64| format!("{v:.17e}");
        [
            self.key.clone(),
            sci(self.t_multiple),
            sci(self.horizon),
            sci(self.sigma),
            opt(self.iterations, |v| v.to_string()),
            opt(self.converged, |v| v.to_string()),
            opt(self.stop_qty, sci),
            opt(self.du_l2, sci),
            opt(self.dw_l2, sci),
            opt(self.j2, sci),
            opt(self.mesh, |m| m.n_vertices.to_string()),
            opt(self.mesh, |m| m.n_triangles.to_string()),
            opt(self.mesh, |m| sci(m.border_length)),
        ]
        .join(",")
    }
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", TableRow::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()
}

/// Runs each configuration on its own thread; rows keep input order.
fn run_all(configs: Vec<(String, RunConfig)>) -> Result<Vec<TableRow>> {
    let outcomes: Vec<Result<TableRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(key, cfg)| {
                s.spawn(move || -> Result<TableRow> {
                    let spec = cfg.spec()?;
                    let grid = cfg.grid()?;
                    let result = fixed_point_solve(&cfg.sn_config(), &spec, &grid, cfg.n)?;
                    Ok(TableRow::from_run(key.clone(), cfg, spec.horizon(), &result))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Config("sweep worker panicked".into())))
            })
            .collect()
    });
    outcomes.into_iter().collect()
}

fn write_table(config: &RunConfig, name: &str, rows: &[TableRow]) -> Result<()> {
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
        write_table_csv(rows, create(&dir.join(name))?)?;
    }
    Ok(())
}

/// `T = 1..10 T_c` at the base configuration's `sigma`.
pub fn run_table_t(config: &RunConfig) -> Result<Vec<TableRow>> {
    config.validate()?;
    let configs = (1..=10)
        .map(|i| {
            let cfg = RunConfig {
                t_multiple: i as f64,
                horizon: None,
                ..config.clone()
            };
            (format!("{i}Tc"), cfg)
        })
        .collect();
    let rows = run_all(configs)?;
    write_table(config, "table_T.csv", &rows)?;
    Ok(rows)
}

/// `sigma = 10^1..10^10` at the base configuration's horizon.
pub fn run_table_sigma(config: &RunConfig) -> Result<Vec<TableRow>> {
    config.validate()?;
    let configs = (1..=10)
        .map(|e| {
            let cfg = RunConfig {
                sigma: 10f64.powi(e),
                ..config.clone()
            };
            (format!("1e{e}"), cfg)
        })
        .collect();
    let rows = run_all(configs)?;
    write_table(config, "table_sigma.csv", &rows)?;
    Ok(rows)
}

/// Space-time mesh statistics for `T = 1..10 T_c`, with target edge `T/M`.
pub fn run_table_mesh(config: &RunConfig) -> Result<Vec<TableRow>> {
    config.validate()?;
    let tc = compute_tc(config.k).map_err(|e| usage("k", e.to_string()))?;
    let rows = (1..=10)
        .map(|i| {
            let horizon = i as f64 * tc;
            let spec = MovingDomainSpec::new(config.k, horizon)?;
            let stats = trapezoid_stats(&spec, horizon / config.m as f64)?;
            Ok(TableRow {
                key: format!("{i}Tc"),
                t_multiple: i as f64,
                horizon,
                sigma: config.sigma,
                iterations: None,
                converged: None,
                stop_qty: None,
                du_l2: None,
                dw_l2: None,
                j2: None,
                mesh: Some(stats),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_table(config, "table_mesh.csv", &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nsigma = 1e3\nN = 40\n\nmax_iter=7\n").unwrap();
        let cfg = RunConfig::resolve(Some(&path), &[("N".into(), "20".into())]).unwrap();
        assert_eq!(cfg.sigma, 1e3);
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.max_iter, 7);
        assert_eq!(cfg.m, 100);
    }

    #[test]
    fn usage_errors_name_the_key() {
        for (key, value) in [("sigma", "-1"), ("N", "1"), ("k", "1.5"), ("M", "x"), ("bogus", "1")] {
            match RunConfig::resolve(None, &[(key.into(), value.into())]) {
                Err(Error::Usage { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{key}={value}: {other:?}"),
            }
        }
        assert!(matches!(
            RunConfig::resolve(None, &[("k".into(), "0".into())]),
            Err(Error::Usage { ref key, .. }) if key == "T"
        ));
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig {
            sigma: 3.5e4,
            phi_terminal: PhiTerminalSpec::Sine { a: 1.0, b: -0.5 },
            adjoint: AdjointScheme::Consistent,
            segments: SegmentMode::AdditiveOverlap,
            horizon: Some(2.0),
            ..RunConfig::default()
        };
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn phi_terminal_parse() {
        assert_eq!("zero".parse::<PhiTerminalSpec>().unwrap(), PhiTerminalSpec::Zero);
        assert_eq!(
            "sine:2,3".parse::<PhiTerminalSpec>().unwrap(),
            PhiTerminalSpec::Sine { a: 2.0, b: 3.0 }
        );
        assert!("sine:2".parse::<PhiTerminalSpec>().is_err());
    }

    #[test]
    fn max_iter_one_reports_not_converged() {
        let cfg = RunConfig {
            n: 20,
            m: 20,
            max_iter: 1,
            ..RunConfig::default()
        };
        let out = run_single(&cfg).unwrap();
        assert!(!out.result.converged);
        assert_eq!(out.result.iterations, 1);
        assert!(out.nash.is_none());
        assert!(out.summary.contains("converged=false"));
    }

    #[test]
    fn mesh_table_rows() {
        let rows = run_table_mesh(&RunConfig::default()).unwrap();
        assert_eq!(rows.len(), 10);
        let b: Vec<f64> = rows.iter().map(|r| r.mesh.unwrap().border_length).collect();
        assert!(b.windows(2).all(|w| w[1] > w[0]));
        assert!(rows[0].csv_line().split(',').count() == TableRow::CSV_HEADER.split(',').count());
    }
}
