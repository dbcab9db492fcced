use std::time::Instant;

use crate::dynamics::{evolve, steady_state, validate_state, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{
    composite_space, full_space, restricted_space, restricted_space_engineered, single_excitation_superposition,
    HilbertSpace, Level,
};
use crate::model::{
    denormalize, pairwise_couplings, BlockadeMode, GeometrySpec, InitialState, ModelKind, PairCoupling, PairCouplings,
    ScenarioConfig,
};
use crate::observables::Observable;
use crate::operators::{
    collapse_operators, dark_state, hamiltonian_full, hamiltonian_restricted, liouvillian, CrossCouplings, DensityMatrix,
    Liouvillian, StateVector,
};

use super::{ScenarioResult, Table};

/// A configuration turned into operators.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ScenarioConfig,
    pub space: HilbertSpace,
    pub liouvillian: Liouvillian,
    /// None when both drives vanish.
    pub dark: Option<StateVector>,
}

fn abstract_couplings(n: usize, blockade: BlockadeMode) -> PairCouplings {
    use PairCoupling::{Finite, Perfect};
    match blockade {
        BlockadeMode::Perfect => PairCouplings::uniform(n, Perfect, Perfect, Perfect),
        BlockadeMode::Hybrid { v_rs } => PairCouplings::uniform(n, Perfect, Perfect, Finite(v_rs)),
        BlockadeMode::Finite { v_rr, v_ss, v_rs } => PairCouplings::uniform(n, Finite(v_rr), Finite(v_ss), Finite(v_rs)),
    }
}

impl Model {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Model> {
        let scheme = &cfg.scheme;
        let (space, h) = match (cfg.model, &cfg.geometry) {
            (ModelKind::Restricted, g) => {
                let n = g.atoms();
                let space = if scheme.is_engineered() {
                    restricted_space_engineered(n)?
                } else {
                    restricted_space(n)?
                };
                let h = hamiltonian_restricted(scheme, &space, None)?;
                (space, h)
            }
            (ModelKind::Composite, GeometrySpec::Composite { n_per_ensemble, cross }) => {
                let half = restricted_space(*n_per_ensemble)?;
                let space = composite_space(&half, &half)?;
                let (v_rr, v_ss, v_rs) = cross.values();
                let cross = CrossCouplings::uniform(*n_per_ensemble, *n_per_ensemble, v_rr, v_ss, v_rs);
                let h = hamiltonian_restricted(scheme, &space, Some(&cross))?;
                (space, h)
            }
            (ModelKind::Full3 | ModelKind::Full4, g) => {
                let couplings = match g {
                    GeometrySpec::Positions(geo) => pairwise_couplings(geo)?,
                    GeometrySpec::Abstract { n, blockade } => abstract_couplings(*n, *blockade),
                    GeometrySpec::Composite { .. } => {
                        return Err(Error::Config("composite geometry needs model = \"composite\"".into()))
                    }
                };
                let levels = if cfg.model == ModelKind::Full4 { 4 } else { 3 };
                let space = full_space(g.atoms(), levels)?.blockaded(&couplings)?;
                let h = hamiltonian_full(scheme, &couplings, &space)?;
                (space, h)
            }
            (ModelKind::Composite, _) => {
                return Err(Error::Config("model = \"composite\" needs a composite geometry".into()))
            }
        };
        let channels = collapse_operators(scheme, &space)?;
        let liouvillian = liouvillian(&h, &channels)?;
        let dark = if scheme.omega_r == 0.0 && scheme.omega_m == 0.0 {
            None
        } else {
            Some(dark_state(&space, scheme.omega_r, scheme.omega_m)?)
        };
        Ok(Model {
            config: cfg.clone(),
            space,
            liouvillian,
            dark,
        })
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        let d = self.space.dim();
        match &self.config.initial {
            InitialState::Ground => Ok(DensityMatrix::basis(
                d,
                self.space
                    .ground_index()
                    .ok_or_else(|| Error::IncompatibleSpace("space has no ground state".into()))?,
            )),
            InitialState::Dark => self
                .dark
                .as_ref()
                .map(StateVector::projector)
                .ok_or_else(|| Error::validation("run.initial", "the dark state needs a nonzero drive")),
            InitialState::Label(l) => self
                .space
                .index_of_str(l)
                .map(|i| DensityMatrix::basis(d, i))
                .ok_or_else(|| Error::validation("run.initial", format!("`{l}` is not a basis state of this model"))),
        }
    }

    pub fn observable(&self, name: &str) -> Result<Observable> {
        let d = self.space.dim();
        Ok(match name {
            "P_D" => Observable::projector(
                "P_D",
                self.dark
                    .clone()
                    .ok_or_else(|| Error::validation("run.observables", "P_D needs a nonzero drive"))?,
            ),
            "purity" => Observable::purity(),
            "W" => Observable::projector("W", single_excitation_superposition(&self.space, Level::S)),
            "P_G" => Observable::projector(
                "P_G",
                StateVector::basis(d, self.space.ground_index().expect("every model space has |G>")),
            ),
            "pop_r" => Observable::level("pop_r", &self.space, Level::R),
            "pop_s" => Observable::level("pop_s", &self.space, Level::S),
            "pop_e" => Observable::level("pop_e", &self.space, Level::E),
            other => return Err(Error::validation("run.observables", format!("unknown observable `{other}`"))),
        })
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        self.config.observables.iter().map(|n| self.observable(n)).collect()
    }

    pub fn evolve(&self) -> Result<Trajectory> {
        evolve(
            &self.liouvillian,
            &self.initial_state()?,
            &self.config.grid.times(),
            &self.config.integrator,
            &self.observables()?,
        )
    }
}

/// Trajectory as a table: `t_us` followed by the observables.
pub(crate) fn trajectory_table(name: &str, traj: &Trajectory) -> Table {
    let mut cols = vec!["t_us"];
    cols.extend(traj.names.iter().map(String::as_str));
    let mut t = Table::new(name, &cols);
    for (i, &time) in traj.times.iter().enumerate() {
        let mut row = vec![time];
        row.extend(traj.values.iter().map(|v| v[i]));
        t.push_nums(&row);
    }
    t
}

/// Evolve the model a config describes; one table named `id`.
pub fn run_config(id: &str, cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let start = Instant::now();
    let model = Model::from_config(cfg)?;
    let traj = model.evolve()?;
    let mut res = ScenarioResult::new(id, denormalize(cfg));
    res.tables.push(trajectory_table(id, &traj));
    for (name, v) in traj.names.iter().zip(&traj.values) {
        res.summary.push((format!("{name}_final"), *v.last().unwrap()));
    }
    res.absorb(traj.stats, traj.worst_diagnostics());
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

/// Steady state of the model a config describes.
pub fn run_steady(id: &str, cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let start = Instant::now();
    let model = Model::from_config(cfg)?;
    let ss = steady_state(&model.liouvillian)?;
    let mut res = ScenarioResult::new(id, denormalize(cfg));
    let mut t = Table::new(id, &["observable", "value"]);
    for o in model.observables()? {
        let v = o.evaluate(&ss.state)?;
        t.push(vec![o.name.as_str().into(), v.into()]);
        res.summary.push((o.name.clone(), v));
    }
    t.push(vec!["kernel_dim".into(), (ss.kernel_dim as f64).into()]);
    res.tables.push(t);
    res.summary.push(("kernel_dim".into(), ss.kernel_dim as f64));
    res.summary.push(("residual".into(), ss.residual));
    if ss.is_degenerate() {
        res.notes.push(format!(
            "degenerate steady state: kernel dimension {}; reported state is the projection of the maximally mixed state onto the kernel",
            ss.kernel_dim
        ));
    }
    res.absorb(Default::default(), Some(validate_state(&ss.state)));
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}
