//! Translation between the user-facing configuration document (ν-convention
//! MHz/kHz, µs) and the validated internal [`ScenarioConfig`].

use std::cell::RefCell;
use std::collections::BTreeSet;

use nalgebra::DMatrix;
use toml::{Table, Value};

use super::{
    khz, mhz, to_mhz, AtomScheme, DephasedLevels, Dephasing,
    DephasingCorrelation, EnsembleGeometry, Interactions, RydbergDecay,
};
use crate::dynamics::{IntegratorSettings, Method};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Full3,
    Full4,
    Restricted,
    Composite,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Full3 => "full-3",
            ModelKind::Full4 => "full-4",
            ModelKind::Restricted => "restricted",
            ModelKind::Composite => "composite",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "full-3" | "full-3-level" => ModelKind::Full3,
            "full-4" | "full-4-level" => ModelKind::Full4,
            "restricted" => ModelKind::Restricted,
            "composite" | "composite-restricted" => ModelKind::Composite,
            _ => return None,
        })
    }
}

/// Interaction structure for an abstract ensemble of `n` atoms with the same
/// coupling on every pair. Values in rad/µs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockadeMode {
    /// Every doubly excited state removed.
    Perfect,
    /// rr and ss pairs removed, rs pairs kept with exchange `v_rs`.
    Hybrid { v_rs: f64 },
    /// Everything finite.
    Finite { v_rr: f64, v_ss: f64, v_rs: f64 },
}

/// Couplings between the two ensembles of a composite model. Every
/// inter-ensemble pair sees the same values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrossSpec {
    /// Explicit values in rad/µs.
    Values { v_rr: f64, v_ss: f64, v_rs: f64 },
    /// Derived from the power laws at `separation` µm.
    Separation {
        separation: f64,
        c6_rr: f64,
        c6_ss: f64,
        c3_rs: f64,
    },
}

impl CrossSpec {
    /// (V_rr, V_ss, V_rs) in rad/µs.
    pub fn values(&self) -> (f64, f64, f64) {
        match *self {
            CrossSpec::Values { v_rr, v_ss, v_rs } => (v_rr, v_ss, v_rs),
            CrossSpec::Separation {
                separation: d,
                c6_rr,
                c6_ss,
                c3_rs,
            } => (c6_rr / d.powi(6), c6_ss / d.powi(6), c3_rs / d.powi(3)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometrySpec {
    Positions(EnsembleGeometry),
    Abstract { n: usize, blockade: BlockadeMode },
    Composite { n_per_ensemble: usize, cross: CrossSpec },
}

impl GeometrySpec {
    pub fn atoms(&self) -> usize {
        match self {
            GeometrySpec::Positions(g) => g.atoms(),
            GeometrySpec::Abstract { n, .. } => *n,
            GeometrySpec::Composite { n_per_ensemble, .. } => 2 * n_per_ensemble,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// All atoms in |g⟩.
    Ground,
    /// The dark state of the configured drives.
    Dark,
    /// Any basis label accepted by the chosen space ("R_1", "grs", ...).
    Label(String),
}

impl InitialState {
    fn parse(s: &str) -> Self {
        match s {
            "G" | "ground" => InitialState::Ground,
            "dark" | "D" => InitialState::Dark,
            other => InitialState::Label(other.to_string()),
        }
    }

    fn name(&self) -> String {
        match self {
            InitialState::Ground => "G".into(),
            InitialState::Dark => "dark".into(),
            InitialState::Label(l) => l.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub dt_out: f64,
}

impl TimeGrid {
    /// Output times 0, dt, 2dt, …, t_end. The last point is t_end exactly.
    pub fn times(&self) -> Vec<f64> {
        let steps = (self.t_end / self.dt_out - 1e-9).ceil().max(0.0) as usize;
        let mut t: Vec<f64> = (0..steps).map(|i| i as f64 * self.dt_out).collect();
        t.push(self.t_end);
        t
    }
}

/// One sweep axis: a dotted config key and the raw values it takes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: AtomScheme,
    pub geometry: GeometrySpec,
    pub model: ModelKind,
    pub initial: InitialState,
    pub grid: TimeGrid,
    pub observables: Vec<String>,
    pub sweep: Vec<SweepAxis>,
    pub integrator: IntegratorSettings,
}

const OBSERVABLES: &[&str] = &["P_D", "purity", "W", "P_G", "pop_r", "pop_s", "pop_e"];

/// Typed, key-tracking view of one section.
struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, table: &'a Table) -> Self {
        Section {
            name,
            table,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        let v = self.table.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| as_f64(v).ok_or_else(|| Error::validation(self.field(key), "expected a number")))
            .transpose()
    }

    fn rate(&self, key: &str) -> Result<Option<f64>> {
        let v = self.f64(key)?;
        if let Some(x) = v {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::validation(
                    self.field(key),
                    format!("{x} must be finite and non-negative"),
                ));
            }
        }
        Ok(v)
    }

    fn str(&self, key: &str) -> Result<Option<&'a str>> {
        self.raw(key)
            .map(|v| v.as_str().ok_or_else(|| Error::validation(self.field(key), "expected a string")))
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| match v.as_integer() {
                Some(n) if n >= 0 => Ok(n as usize),
                _ => Err(Error::validation(self.field(key), "expected a non-negative integer")),
            })
            .transpose()
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.as_array()
                    .and_then(|a| a.iter().map(as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| Error::validation(self.field(key), "expected a list of numbers"))
            })
            .transpose()
    }

    fn rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.raw(key)
            .map(|v| {
                v.as_array()
                    .and_then(|rows| {
                        rows.iter()
                            .map(|r| r.as_array()?.iter().map(as_f64).collect::<Option<Vec<_>>>())
                            .collect::<Option<Vec<_>>>()
                    })
                    .ok_or_else(|| Error::validation(self.field(key), "expected a list of lists of numbers"))
            })
            .transpose()
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.table.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::validation(self.field(k), "unknown key")),
            None => Ok(()),
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn section<'a>(raw: &'a Table, name: &'static str, required: bool) -> Result<Option<&'a Table>> {
    match raw.get(name) {
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::Config(format!("[{name}] must be a section"))),
        None if required => Err(Error::Config(format!("missing section [{name}]"))),
        None => Ok(None),
    }
}

/// Validate a raw configuration document and convert every frequency/rate
/// to rad/µs.
pub fn normalize_units(raw: &Table) -> Result<ScenarioConfig> {
    if let Some(k) = raw
        .keys()
        .find(|k| !["atom", "geometry", "run", "sweep"].contains(&k.as_str()))
    {
        return Err(Error::Config(format!("unknown section or key `{k}`")));
    }
    let atom = Section::new("atom", section(raw, "atom", true)?.unwrap());
    let empty = Table::new();
    let geometry = Section::new("geometry", section(raw, "geometry", true)?.unwrap());
    let run = Section::new("run", section(raw, "run", false)?.unwrap_or(&empty));

    let scheme = parse_atom(&atom)?;
    atom.finish()?;

    let model = match run.str("model")? {
        Some(s) => ModelKind::parse(s)
            .ok_or_else(|| Error::validation("run.model", format!("unknown model `{s}`")))?,
        None => ModelKind::Restricted,
    };
    let geometry_spec = parse_geometry(&geometry, model)?;
    geometry.finish()?;

    let grid = TimeGrid {
        t_end: run.rate("t_end_us")?.unwrap_or(20.0),
        dt_out: run.rate("dt_out_us")?.unwrap_or(0.1),
    };
    if !(grid.dt_out > 0.0) {
        return Err(Error::validation("run.dt_out_us", "must be positive"));
    }
    let observables = match run.raw("observables") {
        None => vec!["P_D".to_string(), "purity".to_string()],
        Some(v) => {
            let list = v
                .as_array()
                .and_then(|a| a.iter().map(|x| x.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::validation("run.observables", "expected a list of names"))?;
            if let Some(bad) = list.iter().find(|o| !OBSERVABLES.contains(&o.as_str())) {
                return Err(Error::validation("run.observables", format!("unknown observable `{bad}`")));
            }
            list
        }
    };
    let initial = run
        .str("initial")?
        .map(InitialState::parse)
        .unwrap_or(InitialState::Ground);

    let mut integrator = IntegratorSettings::default();
    if let Some(m) = run.str("method")? {
        integrator.method = match m {
            "adaptive" => Method::Adaptive,
            "expm" => Method::Expm,
            "rk4" => Method::Rk4 {
                dt: run
                    .rate("fixed_step_us")?
                    .ok_or_else(|| Error::validation("run.fixed_step_us", "required by method rk4"))?,
            },
            other => return Err(Error::validation("run.method", format!("unknown method `{other}`"))),
        };
    }
    if let Some(r) = run.rate("rtol")? {
        integrator.rtol = r;
    }
    if let Some(a) = run.rate("atol")? {
        integrator.atol = a;
    }
    if let Some(h) = run.rate("max_step_us")? {
        integrator.max_step = h;
    }
    integrator.validate()?;
    run.finish()?;

    let sweep = match section(raw, "sweep", false)? {
        Some(t) => parse_sweep(t, raw)?,
        None => vec![],
    };

    check_compatibility(&scheme, model, &geometry_spec)?;
    if let Some(profile) = &scheme.decay_profile {
        if profile.len() != geometry_spec.atoms() {
            return Err(Error::validation(
                "atom.decay_profile",
                format!("has {} entries for {} atoms", profile.len(), geometry_spec.atoms()),
            ));
        }
    }

    Ok(ScenarioConfig {
        scheme,
        geometry: geometry_spec,
        model,
        initial,
        grid,
        observables,
        sweep,
        integrator,
    })
}

fn parse_atom(atom: &Section) -> Result<AtomScheme> {
    let omega_r = mhz(atom.rate("omega_R_MHz")?.unwrap_or(0.0));
    let omega_m = mhz(atom.rate("omega_M_MHz")?.unwrap_or(0.0));
    let gamma_r = atom.rate("gamma_r_MHz")?;
    let omega_e = atom.rate("omega_E_MHz")?;
    let kappa = atom.rate("kappa_MHz")?;
    let r_decay = match (gamma_r, omega_e, kappa) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(Error::validation(
                "atom.gamma_r_MHz",
                "set either gamma_r_MHz or omega_E_MHz + kappa_MHz, not both",
            ))
        }
        (Some(g), None, None) => RydbergDecay::Direct { gamma_r: mhz(g) },
        (None, Some(w), Some(k)) => RydbergDecay::Engineered {
            omega_e: mhz(w),
            kappa: mhz(k),
        },
        (None, Some(_), None) => return Err(Error::validation("atom.kappa_MHz", "required with omega_E_MHz")),
        (None, None, Some(_)) => return Err(Error::validation("atom.omega_E_MHz", "required with kappa_MHz")),
        (None, None, None) => RydbergDecay::None,
    };
    let levels = match atom.str("dephasing_levels")? {
        None | Some("rs") => DephasedLevels::Both,
        Some("r") => DephasedLevels::R,
        Some("s") => DephasedLevels::S,
        Some(o) => return Err(Error::validation("atom.dephasing_levels", format!("`{o}` is not one of rs, r, s"))),
    };
    let correlation = match atom.str("dephasing_correlation")? {
        None | Some("per-atom") => DephasingCorrelation::PerAtom,
        Some("collective") => DephasingCorrelation::Collective,
        Some(o) => {
            return Err(Error::validation(
                "atom.dephasing_correlation",
                format!("`{o}` is not one of per-atom, collective"),
            ))
        }
    };
    let scheme = AtomScheme {
        omega_r,
        omega_m,
        r_decay,
        gamma_s: khz(atom.rate("gamma_s_kHz")?.unwrap_or(0.0)),
        gamma_r_intrinsic: khz(atom.rate("gamma_r_intr_kHz")?.unwrap_or(0.0)),
        gamma_d: khz(atom.rate("gamma_d_kHz")?.unwrap_or(0.0)),
        dephasing: Dephasing { levels, correlation },
        decay_profile: atom.f64_list("decay_profile")?,
    };
    scheme.validate()?;
    Ok(scheme)
}

fn parse_geometry(g: &Section, model: ModelKind) -> Result<GeometrySpec> {
    if model == ModelKind::Composite {
        let n = g
            .usize("N")?
            .ok_or_else(|| Error::validation("geometry.N", "required for the composite model"))?;
        if n == 0 {
            return Err(Error::validation("geometry.N", "must be at least 1"));
        }
        let cross = if let Some(d) = g.rate("separation_um")? {
            if !(d > 0.0) {
                return Err(Error::validation("geometry.separation_um", "must be positive"));
            }
            CrossSpec::Separation {
                separation: d,
                c6_rr: mhz(g.rate("C6_rr")?.unwrap_or(0.0)),
                c6_ss: mhz(g.rate("C6_ss")?.unwrap_or(0.0)),
                c3_rs: mhz(g.rate("C3_rs")?.unwrap_or(0.0)),
            }
        } else {
            CrossSpec::Values {
                v_rr: mhz(g.rate("cross_V_rr_MHz")?.unwrap_or(0.0)),
                v_ss: mhz(g.rate("cross_V_ss_MHz")?.unwrap_or(0.0)),
                v_rs: mhz(g.rate("cross_V_rs_MHz")?.unwrap_or(0.0)),
            }
        };
        return Ok(GeometrySpec::Composite {
            n_per_ensemble: n,
            cross,
        });
    }

    if g.has("positions_um") || (g.has("V_rr_MHz") && g.table["V_rr_MHz"].is_array()) {
        let positions = match g.rows("positions_um")? {
            Some(rows) => rows
                .into_iter()
                .map(|r| match r.as_slice() {
                    [x, y, z] => Ok([*x, *y, *z]),
                    _ => Err(Error::validation("geometry.positions_um", "each position needs 3 coordinates")),
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![],
        };
        let interactions = if g.has("C6_ss") || g.has("C6_rr") || g.has("C3_rs") {
            Interactions::Coefficients {
                c6_rr: mhz(g.rate("C6_rr")?.unwrap_or(0.0)),
                c6_ss: mhz(g.rate("C6_ss")?.unwrap_or(0.0)),
                c3_rs: mhz(g.rate("C3_rs")?.unwrap_or(0.0)),
            }
        } else {
            let matrix = |key: &str| -> Result<DMatrix<f64>> {
                let rows = g
                    .rows(key)?
                    .ok_or_else(|| Error::validation(g.field(key), "explicit pair matrices need V_rr_MHz, V_ss_MHz and V_rs_MHz"))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::validation(g.field(key), "matrix is not square"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| mhz(rows[i][j])))
            };
            Interactions::Explicit {
                v_rr: matrix("V_rr_MHz")?,
                v_ss: matrix("V_ss_MHz")?,
                v_rs: matrix("V_rs_MHz")?,
            }
        };
        let perfect_pairs = g
            .rows("perfect_pairs")?
            .unwrap_or_default()
            .into_iter()
            .map(|p| match p.as_slice() {
                [i, j] if *i >= 0.0 && *j >= 0.0 => Ok((*i as usize, *j as usize)),
                _ => Err(Error::validation("geometry.perfect_pairs", "each pair needs two atom indices")),
            })
            .collect::<Result<Vec<_>>>()?;
        let geometry = EnsembleGeometry {
            positions,
            interactions,
            perfect_pairs,
        };
        if geometry.atoms() == 0 {
            return Err(Error::validation("geometry.positions_um", "no atoms"));
        }
        return Ok(GeometrySpec::Positions(geometry));
    }

    let n = g
        .usize("N")?
        .ok_or_else(|| Error::validation("geometry.N", "give N or positions_um"))?;
    if n == 0 {
        return Err(Error::validation("geometry.N", "must be at least 1"));
    }
    let blockade = match g.str("blockade")?.unwrap_or("perfect") {
        "perfect" => BlockadeMode::Perfect,
        "hybrid" => BlockadeMode::Hybrid {
            v_rs: mhz(g.rate("V_rs_MHz")?.unwrap_or(0.0)),
        },
        "finite" => BlockadeMode::Finite {
            v_rr: mhz(g.rate("V_rr_MHz")?.unwrap_or(0.0)),
            v_ss: mhz(g.rate("V_ss_MHz")?.unwrap_or(0.0)),
            v_rs: mhz(g.rate("V_rs_MHz")?.unwrap_or(0.0)),
        },
        other => {
            return Err(Error::validation(
                "geometry.blockade",
                format!("`{other}` is not one of perfect, hybrid, finite"),
            ))
        }
    };
    Ok(GeometrySpec::Abstract { n, blockade })
}

fn parse_sweep(t: &Table, raw: &Table) -> Result<Vec<SweepAxis>> {
    let s = Section::new("sweep", t);
    let keys: Vec<String> = match (s.raw("axis"), s.raw("axes")) {
        (Some(Value::String(k)), None) => vec![k.clone()],
        (None, Some(Value::Array(a))) => a
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::validation("sweep.axes", "expected a list of keys"))?,
        _ => return Err(Error::validation("sweep.axis", "give `axis = \"section.key\"` or `axes = [...]`")),
    };
    let values = s
        .raw("values")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::validation("sweep.values", "expected a list"))?;
    let per_axis: Vec<Vec<Value>> = if keys.len() == 1 && (values.is_empty() || !values.iter().all(Value::is_array)) {
        vec![values.clone()]
    } else {
        values
            .iter()
            .map(|v| v.as_array().cloned())
            .collect::<Option<_>>()
            .ok_or_else(|| Error::validation("sweep.values", "give one list per axis"))?
    };
    if per_axis.len() != keys.len() {
        return Err(Error::validation("sweep.values", "one value list per axis required"));
    }
    s.finish()?;
    let mut axes = Vec::new();
    for (key, values) in keys.into_iter().zip(per_axis) {
        if values.is_empty() {
            return Err(Error::validation("sweep.values", format!("axis `{key}` has no values")));
        }
        let sec = key.split_once('.').map(|(s, _)| s).unwrap_or("");
        if !["atom", "geometry", "run"].contains(&sec) {
            return Err(Error::validation("sweep.axis", format!("`{key}` does not name a config section")));
        }
        // The key must be valid in its section; probe by normalizing a copy.
        let mut probe = raw.clone();
        probe.remove("sweep");
        set_key(&mut probe, &key, values[0].clone())?;
        normalize_units(&probe).map_err(|e| match e {
            Error::Validation { field, reason } if field == key => {
                Error::validation("sweep.axis", format!("`{key}`: {reason}"))
            }
            other => other,
        })?;
        axes.push(SweepAxis { key, values });
    }
    Ok(axes)
}

/// Set a dotted `section.key` in a raw document.
pub(crate) fn set_key(raw: &mut Table, key: &str, value: Value) -> Result<()> {
    let (sec, name) = key
        .split_once('.')
        .ok_or_else(|| Error::validation("sweep.axis", format!("`{key}` is not of the form section.key")))?;
    let entry = raw
        .entry(sec.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(name.to_string(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("[{sec}] must be a section"))),
    }
}

fn check_compatibility(scheme: &AtomScheme, model: ModelKind, geometry: &GeometrySpec) -> Result<()> {
    match model {
        ModelKind::Full4 if !scheme.is_engineered() => Err(Error::validation(
            "run.model",
            "full-4 requires omega_E_MHz and kappa_MHz in [atom]",
        )),
        ModelKind::Full3 if scheme.is_engineered() => Err(Error::validation(
            "run.model",
            "full-3 has no |e> level; use gamma_r_MHz or model = \"full-4\"",
        )),
        ModelKind::Composite if !matches!(geometry, GeometrySpec::Composite { .. }) => {
            Err(Error::validation("run.model", "composite needs N and cross couplings"))
        }
        ModelKind::Restricted => match geometry {
            GeometrySpec::Abstract {
                blockade: BlockadeMode::Perfect,
                ..
            } => Ok(()),
            _ => Err(Error::validation(
                "geometry.blockade",
                "the restricted model assumes blockade = \"perfect\"",
            )),
        },
        _ => Ok(()),
    }
}

/// Inverse of [`normalize_units`]: the resolved configuration as a raw
/// document in user-facing units.
pub fn denormalize(cfg: &ScenarioConfig) -> Table {
    let mut atom = Table::new();
    let s = &cfg.scheme;
    atom.insert("omega_R_MHz".into(), Value::Float(to_mhz(s.omega_r)));
    atom.insert("omega_M_MHz".into(), Value::Float(to_mhz(s.omega_m)));
    match s.r_decay {
        RydbergDecay::None => {}
        RydbergDecay::Direct { gamma_r } => {
            atom.insert("gamma_r_MHz".into(), Value::Float(to_mhz(gamma_r)));
        }
        RydbergDecay::Engineered { omega_e, kappa } => {
            atom.insert("omega_E_MHz".into(), Value::Float(to_mhz(omega_e)));
            atom.insert("kappa_MHz".into(), Value::Float(to_mhz(kappa)));
        }
    }
    atom.insert("gamma_s_kHz".into(), Value::Float(to_mhz(s.gamma_s) * 1e3));
    atom.insert("gamma_r_intr_kHz".into(), Value::Float(to_mhz(s.gamma_r_intrinsic) * 1e3));
    atom.insert("gamma_d_kHz".into(), Value::Float(to_mhz(s.gamma_d) * 1e3));
    atom.insert(
        "dephasing_levels".into(),
        Value::String(
            match s.dephasing.levels {
                DephasedLevels::Both => "rs",
                DephasedLevels::R => "r",
                DephasedLevels::S => "s",
            }
            .into(),
        ),
    );
    atom.insert(
        "dephasing_correlation".into(),
        Value::String(
            match s.dephasing.correlation {
                DephasingCorrelation::PerAtom => "per-atom",
                DephasingCorrelation::Collective => "collective",
            }
            .into(),
        ),
    );
    if let Some(p) = &s.decay_profile {
        atom.insert("decay_profile".into(), floats(p.iter().copied()));
    }

    let mut geo = Table::new();
    match &cfg.geometry {
        GeometrySpec::Positions(g) => {
            if !g.positions.is_empty() {
                geo.insert(
                    "positions_um".into(),
                    Value::Array(g.positions.iter().map(|p| floats(p.iter().copied())).collect()),
                );
            }
            match &g.interactions {
                Interactions::Coefficients { c6_rr, c6_ss, c3_rs } => {
                    geo.insert("C6_rr".into(), Value::Float(to_mhz(*c6_rr)));
                    geo.insert("C6_ss".into(), Value::Float(to_mhz(*c6_ss)));
                    geo.insert("C3_rs".into(), Value::Float(to_mhz(*c3_rs)));
                }
                Interactions::Explicit { v_rr, v_ss, v_rs } => {
                    for (k, m) in [("V_rr_MHz", v_rr), ("V_ss_MHz", v_ss), ("V_rs_MHz", v_rs)] {
                        geo.insert(
                            k.into(),
                            Value::Array(
                                m.row_iter()
                                    .map(|r| floats(r.iter().map(|v| to_mhz(*v))))
                                    .collect(),
                            ),
                        );
                    }
                }
            }
            if !g.perfect_pairs.is_empty() {
                geo.insert(
                    "perfect_pairs".into(),
                    Value::Array(
                        g.perfect_pairs
                            .iter()
                            .map(|&(i, j)| Value::Array(vec![Value::Integer(i as i64), Value::Integer(j as i64)]))
                            .collect(),
                    ),
                );
            }
        }
        GeometrySpec::Abstract { n, blockade } => {
            geo.insert("N".into(), Value::Integer(*n as i64));
            match *blockade {
                BlockadeMode::Perfect => {
                    geo.insert("blockade".into(), Value::String("perfect".into()));
                }
                BlockadeMode::Hybrid { v_rs } => {
                    geo.insert("blockade".into(), Value::String("hybrid".into()));
                    geo.insert("V_rs_MHz".into(), Value::Float(to_mhz(v_rs)));
                }
                BlockadeMode::Finite { v_rr, v_ss, v_rs } => {
                    geo.insert("blockade".into(), Value::String("finite".into()));
                    geo.insert("V_rr_MHz".into(), Value::Float(to_mhz(v_rr)));
                    geo.insert("V_ss_MHz".into(), Value::Float(to_mhz(v_ss)));
                    geo.insert("V_rs_MHz".into(), Value::Float(to_mhz(v_rs)));
                }
            }
        }
        GeometrySpec::Composite { n_per_ensemble, cross } => {
            geo.insert("N".into(), Value::Integer(*n_per_ensemble as i64));
            match *cross {
                CrossSpec::Values { v_rr, v_ss, v_rs } => {
                    geo.insert("cross_V_rr_MHz".into(), Value::Float(to_mhz(v_rr)));
                    geo.insert("cross_V_ss_MHz".into(), Value::Float(to_mhz(v_ss)));
                    geo.insert("cross_V_rs_MHz".into(), Value::Float(to_mhz(v_rs)));
                }
                CrossSpec::Separation {
                    separation,
                    c6_rr,
                    c6_ss,
                    c3_rs,
                } => {
                    geo.insert("separation_um".into(), Value::Float(separation));
                    geo.insert("C6_rr".into(), Value::Float(to_mhz(c6_rr)));
                    geo.insert("C6_ss".into(), Value::Float(to_mhz(c6_ss)));
                    geo.insert("C3_rs".into(), Value::Float(to_mhz(c3_rs)));
                }
            }
        }
    }

    let mut run = Table::new();
    run.insert("model".into(), Value::String(cfg.model.name().into()));
    run.insert("t_end_us".into(), Value::Float(cfg.grid.t_end));
    run.insert("dt_out_us".into(), Value::Float(cfg.grid.dt_out));
    run.insert(
        "observables".into(),
        Value::Array(cfg.observables.iter().cloned().map(Value::String).collect()),
    );
    run.insert("initial".into(), Value::String(cfg.initial.name()));
    let it = &cfg.integrator;
    match it.method {
        Method::Adaptive => {
            run.insert("method".into(), Value::String("adaptive".into()));
        }
        Method::Expm => {
            run.insert("method".into(), Value::String("expm".into()));
        }
        Method::Rk4 { dt } => {
            run.insert("method".into(), Value::String("rk4".into()));
            run.insert("fixed_step_us".into(), Value::Float(dt));
        }
    }
    run.insert("rtol".into(), Value::Float(it.rtol));
    run.insert("atol".into(), Value::Float(it.atol));
    if it.max_step.is_finite() {
        run.insert("max_step_us".into(), Value::Float(it.max_step));
    }

    let mut out = Table::new();
    out.insert("atom".into(), Value::Table(atom));
    out.insert("geometry".into(), Value::Table(geo));
    out.insert("run".into(), Value::Table(run));
    if !cfg.sweep.is_empty() {
        let mut sw = Table::new();
        sw.insert(
            "axes".into(),
            Value::Array(cfg.sweep.iter().map(|a| Value::String(a.key.clone())).collect()),
        );
        sw.insert(
            "values".into(),
            Value::Array(cfg.sweep.iter().map(|a| Value::Array(a.values.clone())).collect()),
        );
        out.insert("sweep".into(), Value::Table(sw));
    }
    out
}

fn floats(it: impl Iterator<Item = f64>) -> Value {
    Value::Array(it.map(Value::Float).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn parse(s: &str) -> Result<ScenarioConfig> {
        normalize_units(&s.parse::<Table>().unwrap())
    }

    const FIG2: &str = r#"
        [atom]
        omega_R_MHz = 1.0
        omega_M_MHz = 1.0
        gamma_r_MHz = 2.0
        [geometry]
        N = 4
        blockade = "perfect"
        [run]
        model = "restricted"
        t_end_us = 20.0
        dt_out_us = 0.1
    "#;

    #[test]
    fn drives_become_angular() {
        let cfg = parse(FIG2).unwrap();
        assert_relative_eq!(cfg.scheme.omega_r, 2.0 * PI, max_relative = 1e-15);
        assert_eq!(cfg.scheme.r_decay, RydbergDecay::Direct { gamma_r: 4.0 * PI });
    }

    #[test]
    fn kappa_five_mhz() {
        let cfg = parse(
            r#"
            [atom]
            omega_R_MHz = 1
            omega_M_MHz = 1
            omega_E_MHz = 1.25
            kappa_MHz = 5
            [geometry]
            N = 2
            blockade = "finite"
            [run]
            model = "full-4"
            "#,
        )
        .unwrap();
        match cfg.scheme.r_decay {
            RydbergDecay::Engineered { kappa, .. } => assert_relative_eq!(kappa, 10.0 * PI, max_relative = 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_drives_are_valid() {
        let cfg = parse("[atom]\n[geometry]\nN = 1\n").unwrap();
        assert_eq!(cfg.scheme.omega_r, 0.0);
        assert_eq!(cfg.scheme.omega_m, 0.0);
    }

    #[test]
    fn errors_name_the_field() {
        let neg = parse("[atom]\ngamma_s_kHz = -1\n[geometry]\nN = 1\n").unwrap_err();
        assert!(matches!(neg, Error::Validation { ref field, .. } if field == "atom.gamma_s_kHz"));
        let unknown = parse("[atom]\nomega_X_MHz = 1\n[geometry]\nN = 1\n").unwrap_err();
        assert!(matches!(unknown, Error::Validation { ref field, .. } if field == "atom.omega_X_MHz"));
        let missing = parse("[geometry]\nN = 1\n").unwrap_err();
        assert!(missing.to_string().contains("[atom]"));
        let mismatch = parse("[atom]\ngamma_r_MHz = 1\n[geometry]\nN = 2\n[run]\nmodel = \"full-4\"\n").unwrap_err();
        assert!(matches!(mismatch, Error::Validation { ref field, .. } if field == "run.model"));
    }

    #[test]
    fn sweep_axes_are_checked() {
        let ok = parse(&format!("{FIG2}\n[sweep]\naxis = \"atom.omega_M_MHz\"\nvalues = [1.0, 2.0]\n")).unwrap();
        assert_eq!(ok.sweep[0].values.len(), 2);
        let empty = parse(&format!("{FIG2}\n[sweep]\naxis = \"atom.omega_M_MHz\"\nvalues = []\n"));
        assert!(empty.unwrap_err().to_string().contains("no values"));
        let bad = parse(&format!("{FIG2}\n[sweep]\naxis = \"atom.nope\"\nvalues = [1.0]\n"));
        assert!(bad.is_err());
    }

    #[test]
    fn time_grid_ends_exactly() {
        let g = TimeGrid { t_end: 1.0, dt_out: 0.3 };
        let t = g.times();
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        let g = TimeGrid { t_end: 20.0, dt_out: 0.1 };
        assert_eq!(g.times().len(), 201);
    }

    fn numbers(v: &Value, out: &mut Vec<f64>) {
        match v {
            Value::Float(f) => out.push(*f),
            Value::Integer(i) => out.push(*i as f64),
            Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
            _ => {}
        }
    }

    #[test]
    fn unit_round_trip() {
        let docs = [
            FIG2.to_string(),
            r#"
            [atom]
            omega_R_MHz = 1.0
            omega_M_MHz = 4.47213595499958
            omega_E_MHz = 24.0
            kappa_MHz = 6.0
            gamma_s_kHz = 5.0
            gamma_r_intr_kHz = 5.0
            gamma_d_kHz = 10.0
            [geometry]
            N = 2
            blockade = "finite"
            V_rr_MHz = 190.0
            V_ss_MHz = 400.0
            V_rs_MHz = 140.0
            [run]
            model = "full-4"
            "#
            .to_string(),
            r#"
            [atom]
            omega_R_MHz = 1.0
            omega_M_MHz = 1.0
            gamma_r_MHz = 2.0
            [geometry]
            N = 3
            separation_um = 6.0
            C6_ss = 729.0
            C3_rs = 2700.0
            [run]
            model = "composite"
            "#
            .to_string(),
        ];
        for doc in docs {
            let raw: Table = doc.parse().unwrap();
            let cfg = normalize_units(&raw).unwrap();
            let back = denormalize(&cfg);
            assert_eq!(normalize_units(&back).unwrap(), cfg);
            for (sec, table) in &raw {
                for (k, v) in table.as_table().unwrap() {
                    let (mut a, mut b) = (vec![], vec![]);
                    numbers(v, &mut a);
                    numbers(&back[sec.as_str()][k.as_str()], &mut b);
                    assert_eq!(a.len(), b.len(), "{sec}.{k}");
                    for (x, y) in a.iter().zip(&b) {
                        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "{sec}.{k}: {x} vs {y}");
                    }
                }
            }
        }
    }
}
