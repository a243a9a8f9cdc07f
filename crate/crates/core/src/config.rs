//! Run configuration files.
//!
//! The format is line oriented: `key = value` pairs, optional `[section]`
//! headers and `#` comments. Every key may appear at the top level or inside
//! its own section; anything else is rejected.
//!
//! ```text
//! command = solve
//! [grid]
//! L = 6.283185307179586
//! N = 256
//! [initial]
//! initial = cosine      # constant | cosine | file
//! base = 1.0
//! amplitude = 0.1
//! mode = 1
//! [solver]
//! tau = 1e-4
//! newton_tol = 1e-12
//! [run]
//! T = 3.0
//! record_every = 10
//! output = run.csv
//! ```

use crate::error::{Error, Result};
use crate::grid::{DiffBackend, Field, FieldKind, PeriodicGrid};
use crate::inequalities::QuotientKind;
use crate::solver::{JacobianUpdate, LinearSolver, SolverConfig};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Certify,
    HeatFlow,
    DecayFit,
    Identity,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "solve" => Ok(Command::Solve),
            "certify" => Ok(Command::Certify),
            "heatflow" => Ok(Command::HeatFlow),
            "fit" => Ok(Command::DecayFit),
            "identity" => Ok(Command::Identity),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Constant(f64),
    /// `base + amplitude * cos(2 pi mode x / L)`
    CosinePerturbation {
        base: f64,
        amplitude: f64,
        mode: u32,
    },
    /// One nodal value per line.
    FromFile(PathBuf),
}

impl InitialDatum {
    pub fn field(&self, grid: &PeriodicGrid) -> Result<Field> {
        match self {
            InitialDatum::Constant(c) => Field::constant(grid, *c, FieldKind::Density),
            InitialDatum::CosinePerturbation { base, amplitude, mode } => {
                let k = 2.0 * PI * *mode as f64 / grid.length();
                Field::from_fn(grid, FieldKind::Density, |x| base + amplitude * (k * x).cos())
            }
            InitialDatum::FromFile(path) => crate::io::read_density_file(path, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub length: f64,
    pub n_points: usize,
    pub initial: InitialDatum,
    pub solver: SolverConfig,
    pub t_end: f64,
    pub record_every: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub quotient: Option<QuotientKind>,
    /// Exponent of the heat-type flow.
    pub p: f64,
    pub dt: f64,
    pub trials: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub starts: usize,
    pub input: Option<PathBuf>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.length, self.n_points)
    }
}

/// Sections in which each key may appear besides the top level.
const KEYS: &[(&str, &[&str])] = &[
    ("command", &["run"]),
    ("seed", &["run"]),
    ("output", &["run"]),
    ("record_every", &["run"]),
    ("T", &["run"]),
    ("L", &["grid"]),
    ("N", &["grid"]),
    ("initial", &["initial"]),
    ("value", &["initial"]),
    ("base", &["initial"]),
    ("amplitude", &["initial"]),
    ("mode", &["initial"]),
    ("path", &["initial"]),
    ("tau", &["solver"]),
    ("epsilon", &["solver"]),
    ("newton_tol", &["solver"]),
    ("max_newton", &["solver"]),
    ("damping", &["solver"]),
    ("backend", &["solver"]),
    ("linear_solver", &["solver"]),
    ("jacobian", &["solver"]),
    ("renormalize_mass", &["solver"]),
    ("kind", &["certify"]),
    ("n", &["certify"]),
    ("p", &["certify", "heatflow"]),
    ("max_iters", &["certify"]),
    ("tol", &["certify"]),
    ("starts", &["certify"]),
    ("dt", &["heatflow"]),
    ("trials", &["identity"]),
    ("input", &["fit"]),
];

struct Entry {
    line: usize,
    value: String,
}

fn validation(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

struct Table(BTreeMap<&'static str, Entry>);

impl Table {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| Error::Parse {
                line: e.line,
                reason: format!("invalid value for `{key}`: {err}"),
            }),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn tokenize(text: &str) -> Result<Table> {
    let mut section: Option<String> = None;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse {
                    line,
                    reason: "unterminated section header".into(),
                })?
                .trim();
            if !KEYS.iter().any(|(_, homes)| homes.contains(&name)) {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown section `[{name}]`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            reason: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&(name, homes)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(Error::Parse {
                line,
                reason: format!("unknown key `{key}`"),
            });
        };
        if let Some(s) = &section {
            if !homes.contains(&s.as_str()) {
                return Err(Error::Parse {
                    line,
                    reason: format!("key `{key}` does not belong in `[{s}]`"),
                });
            }
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                reason: format!("empty value for `{key}`"),
            });
        }
        let value = value.trim_matches('"').to_string();
        if out.insert(name, Entry { line, value }).is_some() {
            return Err(Error::Parse {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(Table(out))
}

fn parse_jacobian(s: &str) -> std::result::Result<JacobianUpdate, String> {
    match s {
        "lagged" => Ok(JacobianUpdate::LAGGED),
        "fresh" | "every_iteration" => Ok(JacobianUpdate::EveryIteration),
        other => Err(format!("unknown jacobian policy `{other}` (lagged | fresh)")),
    }
}

/// Parse and validate a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let t = tokenize(text)?;
    let command: Command = t.get("command")?.ok_or_else(|| validation("command", "required"))?;

    let length: f64 = t.get_or("L", 2.0 * PI)?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(validation("L", "must be positive"));
    }
    let n_points: usize = match t.get("N")? {
        Some(n) => n,
        None if command == Command::DecayFit => 0,
        None => return Err(validation("N", "required")),
    };
    if command != Command::DecayFit {
        PeriodicGrid::new(length, n_points).map_err(|e| validation("N", e.to_string()))?;
    }

    let kind = t.get_or::<String>("initial", "cosine".into())?;
    let initial = match kind.as_str() {
        "constant" => {
            let c: f64 = t.get_or("value", 1.0)?;
            if !(c > 0.0) {
                return Err(validation("value", "constant datum must be positive"));
            }
            InitialDatum::Constant(c)
        }
        "cosine" => {
            let base: f64 = t.get_or("base", 1.0)?;
            let amplitude: f64 = t.get_or("amplitude", 0.1)?;
            let mode: u32 = t.get_or("mode", 1)?;
            if !(base > 0.0) {
                return Err(validation("base", "must be positive"));
            }
            if !(amplitude.abs() < base) {
                return Err(validation(
                    "amplitude",
                    "must be smaller than base to keep the datum positive",
                ));
            }
            InitialDatum::CosinePerturbation { base, amplitude, mode }
        }
        "file" => InitialDatum::FromFile(
            t.get::<PathBuf>("path")?
                .ok_or_else(|| validation("path", "required for a file datum"))?,
        ),
        other => {
            let line = t.raw("initial").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                reason: format!("unknown initial datum `{other}` (constant | cosine | file)"),
            });
        }
    };

    let d = SolverConfig::default();
    let jacobian = match t.raw("jacobian") {
        None => d.jacobian,
        Some(e) => parse_jacobian(&e.value).map_err(|reason| Error::Parse { line: e.line, reason })?,
    };
    let solver = SolverConfig {
        tau: t.get_or("tau", d.tau)?,
        epsilon: t.get_or("epsilon", d.epsilon)?,
        newton_tol: t.get_or("newton_tol", d.newton_tol)?,
        max_newton: t.get_or("max_newton", d.max_newton)?,
        damping: t.get_or("damping", d.damping)?,
        backend: t.get_or::<DiffBackend>("backend", d.backend)?,
        linear_solver: t.get_or::<LinearSolver>("linear_solver", d.linear_solver)?,
        jacobian,
        renormalize_mass: t.get_or("renormalize_mass", d.renormalize_mass)?,
    };
    solver.validate().map_err(|e| validation("solver", e.to_string()))?;

    let t_end: f64 = t.get_or("T", 1.0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(validation("T", "must be positive"));
    }
    let record_every: usize = t.get_or("record_every", 1)?;
    if record_every == 0 {
        return Err(validation("record_every", "must be at least 1"));
    }

    let p: f64 = t.get_or("p", 1.0)?;
    let quotient = match t.get::<String>("kind")? {
        None => None,
        Some(k) => {
            let n: u32 = t.get_or("n", 1)?;
            let q = match k.as_str() {
                "poincare" => QuotientKind::Poincare(n),
                "logsob" => QuotientKind::LogSobolev(n),
                "convex" => QuotientKind::ConvexSobolev(p),
                other => return Err(validation("kind", format!("unknown quotient `{other}`"))),
            };
            q.validate().map_err(|e| validation("kind", e.to_string()))?;
            Some(q)
        }
    };
    if command == Command::Certify && quotient.is_none() {
        return Err(validation("kind", "required for certify"));
    }
    if command == Command::HeatFlow && !(1.0..=2.0).contains(&p) {
        return Err(validation("p", "must lie in [1, 2]"));
    }
    let dt: f64 = t.get_or("dt", 0.01)?;
    if !(dt > 0.0) {
        return Err(validation("dt", "must be positive"));
    }
    let trials: usize = t.get_or("trials", 100)?;
    if trials == 0 {
        return Err(validation("trials", "must be at least 1"));
    }
    let input: Option<PathBuf> = t.get("input")?;
    if command == Command::DecayFit && input.is_none() {
        return Err(validation("input", "required for fit"));
    }

    Ok(RunConfig {
        command,
        length,
        n_points,
        initial,
        solver,
        t_end,
        record_every,
        output: t.get("output")?,
        seed: t.get_or("seed", 0)?,
        quotient,
        p,
        dt,
        trials,
        max_iters: t.get_or("max_iters", 3000)?,
        tol: t.get_or("tol", 1e-10)?,
        starts: t.get_or("starts", 3)?,
        input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "L = 6.283185307179586\nN = 256\ncommand = solve\n";

    #[test]
    fn minimal_solve() {
        let c = parse_config(BASIC).unwrap();
        assert_eq!(c.command, Command::Solve);
        assert!((c.length - 2.0 * PI).abs() < 1e-15);
        assert_eq!(c.n_points, 256);
        assert_eq!(
            c.initial,
            InitialDatum::CosinePerturbation {
                base: 1.0,
                amplitude: 0.1,
                mode: 1
            }
        );
        assert_eq!(c.solver, SolverConfig::default());
    }

    #[test]
    fn sections_and_comments() {
        let text = "# run\ncommand = solve  # inline\n[grid]\nL = 1\nN = 32\n[initial]\ninitial = constant\nvalue = 2\n\
                    [solver]\ntau = 1e-3\nbackend = fd4\nlinear_solver = banded\njacobian = fresh\n[run]\nT = 0.5\nrecord_every = 5\noutput = \"out.csv\"\nseed = 7\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.length, 1.0);
        assert_eq!(c.initial, InitialDatum::Constant(2.0));
        assert_eq!(c.solver.tau, 1e-3);
        assert_eq!(c.solver.backend, DiffBackend::FD4);
        assert_eq!(c.solver.linear_solver, LinearSolver::Banded);
        assert_eq!(c.solver.jacobian, JacobianUpdate::EveryIteration);
        assert_eq!((c.t_end, c.record_every, c.seed), (0.5, 5, 7));
        assert_eq!(c.output, Some(PathBuf::from("out.csv")));
    }

    #[test]
    fn missing_n() {
        let e = parse_config("L = 1\ncommand = solve\n").unwrap_err();
        assert_eq!(
            e,
            Error::Validation {
                field: "N".into(),
                reason: "required".into()
            }
        );
        assert!(e.is_validation());
    }

    #[test]
    fn positivity_of_cosine_datum() {
        let e = parse_config(&format!("{BASIC}amplitude = 2\nbase = 1\n")).unwrap_err();
        assert!(matches!(e, Error::Validation { ref field, .. } if field == "amplitude"));
    }

    #[test]
    fn strictness() {
        assert!(matches!(
            parse_config(&format!("{BASIC}colour = red\n")),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse_config(&format!("{BASIC}[solver]\nN = 3\n")),
            Err(Error::Parse { line: 5, .. })
        ));
        assert!(matches!(
            parse_config(&format!("{BASIC}[nowhere]\n")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_config(&format!("{BASIC}N = 64\n")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_config(&format!("{BASIC}tau\n")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_config("L = 1\nN = x\ncommand = solve\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("L = 1\nN = 15\ncommand = solve\n"),
            Err(Error::Validation { .. })
        ));
        assert!(parse_config(&format!("{BASIC}backend = fd4\n")).is_ok());
        assert!(matches!(
            parse_config(&format!("{BASIC}linear_solver = banded\n")),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn certify_and_fit() {
        let c = parse_config("command = certify\nN = 64\n[certify]\nkind = convex\np = 1.5\n").unwrap();
        assert_eq!(c.quotient, Some(QuotientKind::ConvexSobolev(1.5)));
        assert!(parse_config("command = certify\nN = 64\n").is_err());
        assert!(parse_config("command = certify\nN = 64\nkind = logsob\nn = 0\n").is_err());
        let f = parse_config("command = fit\ninput = run.csv\n").unwrap();
        assert_eq!(f.command, Command::DecayFit);
        assert!(parse_config("command = fit\n").is_err());
    }

    #[test]
    fn initial_fields() {
        let g = PeriodicGrid::new(2.0 * PI, 16).unwrap();
        let u = InitialDatum::CosinePerturbation {
            base: 1.0,
            amplitude: 0.5,
            mode: 2,
        }
        .field(&g)
        .unwrap();
        assert!((u.values()[2] - (1.0 + 0.5 * (4.0 * PI / 8.0).cos())).abs() < 1e-15);
        assert_eq!(InitialDatum::Constant(3.0).field(&g).unwrap().values(), &[3.0; 16]);
    }
}
