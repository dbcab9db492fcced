use std::time::Instant;

use rayon::prelude::*;
use toml::{Table as Doc, Value};

use crate::dynamics::{evolve, fit_effective_decay, omega_for_rate, steady_state, IntegratorSettings, Method, Trajectory};
use crate::error::Result;
use crate::hilbert::{
    composite_space, full_space, restricted_space, restricted_space_engineered, symmetric_states, HilbertSpace,
};
use crate::model::{mhz, khz, to_mhz, AtomScheme, DephasingCorrelation, PairCoupling, PairCouplings};
use crate::observables::{first_crossing, Observable};
use crate::operators::{
    collapse_operators, dark_state, hamiltonian_full, hamiltonian_restricted, liouvillian, CrossCouplings, DensityMatrix,
    QOperator,
};

use super::model::trajectory_table;
use super::{ScenarioResult, Table};

fn doc(entries: Vec<(&str, Value)>) -> Doc {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn f(x: f64) -> Value {
    Value::Float(x)
}

fn list(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

fn grid(t_end: f64, dt: f64) -> Vec<f64> {
    crate::model::TimeGrid { t_end, dt_out: dt }.times()
}

/// Integrator settings the figure scenarios default to. Tighter than the
/// library default so that every output state passes the positivity check.
pub fn figure_settings() -> IntegratorSettings {
    IntegratorSettings {
        rtol: 1e-11,
        atol: 1e-13,
        ..IntegratorSettings::default()
    }
}

fn settings_doc(s: &IntegratorSettings) -> Value {
    let mut d = doc(vec![("rtol", f(s.rtol)), ("atol", f(s.atol))]);
    let m = match s.method {
        Method::Adaptive => "adaptive".to_string(),
        Method::Expm => "expm".to_string(),
        Method::Rk4 { dt } => {
            d.insert("fixed_step_us".into(), f(dt));
            "rk4".to_string()
        }
    };
    d.insert("method".into(), Value::String(m));
    if s.max_step.is_finite() {
        d.insert("max_step_us".into(), f(s.max_step));
    }
    Value::Table(d)
}

/// Evolve from the ground state of `space` and record P_D (plus extras).
fn run_from_ground(
    scheme: &AtomScheme,
    space: &HilbertSpace,
    h: &QOperator,
    times: &[f64],
    settings: &IntegratorSettings,
    extra: Vec<Observable>,
) -> Result<Trajectory> {
    let l = liouvillian(h, &collapse_operators(scheme, space)?)?;
    let psi = dark_state(space, scheme.omega_r, scheme.omega_m)?;
    let mut obs = vec![Observable::projector("P_D", psi), Observable::purity()];
    obs.extend(extra);
    let rho0 = DensityMatrix::basis(space.dim(), space.ground_index().expect("ground state"));
    evolve(&l, &rho0, times, settings, &obs)
}

fn restricted_trajectory(
    scheme: &AtomScheme,
    n: usize,
    times: &[f64],
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    let space = restricted_space(n)?;
    let h = hamiltonian_restricted(scheme, &space, None)?;
    run_from_ground(scheme, &space, &h, times, settings, vec![])
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct Fig2Params {
    pub n_list: Vec<usize>,
    pub omega_r_mhz: f64,
    pub omega_m_mhz: f64,
    pub gamma_mhz: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub settings: IntegratorSettings,
}

impl Default for Fig2Params {
    fn default() -> Self {
        Fig2Params {
            n_list: (1..=10).collect(),
            omega_r_mhz: 1.0,
            omega_m_mhz: 1.0,
            gamma_mhz: 2.0,
            t_end: 20.0,
            dt_out: 0.1,
            settings: figure_settings(),
        }
    }
}

/// P_D(t) for each N under perfect blockade, plus a single atom driven at
/// √N_max Ω_R.
pub fn run_fig2(p: &Fig2Params) -> Result<ScenarioResult> {
    let start = Instant::now();
    let times = grid(p.t_end, p.dt_out);
    let scheme = AtomScheme::three_level(mhz(p.omega_r_mhz), mhz(p.omega_m_mhz), mhz(p.gamma_mhz));
    let n_max = *p.n_list.iter().max().unwrap_or(&1);
    let scaled = AtomScheme {
        omega_r: scheme.omega_r * (n_max as f64).sqrt(),
        ..scheme.clone()
    };
    let mut jobs: Vec<(AtomScheme, usize)> = p.n_list.iter().map(|&n| (scheme.clone(), n)).collect();
    jobs.push((scaled, 1));
    let trajs = jobs
        .par_iter()
        .map(|(s, n)| restricted_trajectory(s, *n, &times, &p.settings))
        .collect::<Result<Vec<_>>>()?;

    let mut res = ScenarioResult::new(
        "fig2",
        doc(vec![
            ("N", Value::Array(p.n_list.iter().map(|&n| Value::Integer(n as i64)).collect())),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz)),
            ("gamma_r_MHz", f(p.gamma_mhz)),
            ("t_end_us", f(p.t_end)),
            ("dt_out_us", f(p.dt_out)),
            ("rescaled_single_atom_omega_R_MHz", f(p.omega_r_mhz * (n_max as f64).sqrt())),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    let mut summary = Table::new("fig2_summary", &["N", "P_D_final", "t_099_us"]);
    for (&n, t) in p.n_list.iter().zip(&trajs) {
        res.tables.push(trajectory_table(&format!("fig2_N{n}"), t));
        let pd = t.channel("P_D").unwrap();
        summary.push_nums(&[n as f64, *pd.last().unwrap(), first_crossing(&t.times, pd, 0.99).unwrap_or(f64::NAN)]);
    }
    let single = trajs.last().unwrap();
    res.tables.push(trajectory_table(&format!("fig2_N1_sqrt{n_max}"), single));
    res.tables.push(summary);
    if let Some(i) = p.n_list.iter().position(|&n| n == n_max) {
        let dev = max_abs_diff(trajs[i].channel("P_D").unwrap(), single.channel("P_D").unwrap());
        res.summary.push((format!("max_abs_dP_D_N{n_max}_vs_rescaled"), dev));
    }
    for t in &trajs {
        res.absorb(t.stats, t.worst_diagnostics());
    }
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct InsetParams {
    pub n: usize,
    pub v_rs_mhz: Vec<f64>,
    pub tau: f64,
    pub omega_r_mhz: f64,
    pub omega_m_mhz: f64,
    pub gamma_mhz: f64,
    /// Also solve for the steady state at each V_rs and report its kernel.
    pub steady: bool,
    pub settings: IntegratorSettings,
}

impl Default for InsetParams {
    fn default() -> Self {
        InsetParams {
            n: 4,
            v_rs_mhz: vec![0.0, 1.0, 3.0, 10.0, 30.0, 100.0],
            tau: 5.0,
            omega_r_mhz: 1.0,
            omega_m_mhz: 1.0,
            gamma_mhz: 2.0,
            steady: true,
            settings: figure_settings(),
        }
    }
}

/// Space with rr and ss pairs removed and rs pairs kept.
pub fn hybrid_space(n: usize, v_rs: f64) -> Result<(HilbertSpace, PairCouplings)> {
    let c = PairCouplings::uniform(n, PairCoupling::Perfect, PairCoupling::Perfect, PairCoupling::Finite(v_rs));
    Ok((full_space(n, 3)?.blockaded(&c)?, c))
}

/// P_D(τ) and purity(τ) against the exchange coupling V_rs.
pub fn run_fig2_inset(p: &InsetParams) -> Result<ScenarioResult> {
    let start = Instant::now();
    let scheme = AtomScheme::three_level(mhz(p.omega_r_mhz), mhz(p.omega_m_mhz), mhz(p.gamma_mhz));
    let cells = p
        .v_rs_mhz
        .par_iter()
        .map(|&v| -> Result<(Trajectory, Option<(usize, f64, f64)>)> {
            let (space, c) = hybrid_space(p.n, mhz(v))?;
            let h = hamiltonian_full(&scheme, &c, &space)?;
            let t = run_from_ground(&scheme, &space, &h, &[0.0, p.tau], &p.settings, vec![])?;
            let steady = if p.steady {
                let l = liouvillian(&h, &collapse_operators(&scheme, &space)?)?;
                let ss = steady_state(&l)?;
                let psi = dark_state(&space, scheme.omega_r, scheme.omega_m)?;
                let pd = Observable::projector("P_D", psi).evaluate(&ss.state)?;
                Some((ss.kernel_dim, pd, crate::observables::purity(&ss.state)))
            } else {
                None
            };
            Ok((t, steady))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = ScenarioResult::new(
        "fig2-inset",
        doc(vec![
            ("N", Value::Integer(p.n as i64)),
            ("basis", Value::String("G, single excitations and r-s pairs (rr, ss excluded)".into())),
            ("V_rs_MHz", list(&p.v_rs_mhz)),
            ("tau_us", f(p.tau)),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz)),
            ("gamma_r_MHz", f(p.gamma_mhz)),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    let mut cols = vec!["V_rs_MHz", "P_D_tau", "purity_tau"];
    if p.steady {
        cols.extend(["kernel_dim", "P_D_steady", "purity_steady"]);
    }
    let mut table = Table::new("fig2_inset", &cols);
    for (&v, (t, steady)) in p.v_rs_mhz.iter().zip(&cells) {
        let mut row = vec![v, t.channel("P_D").unwrap()[1], t.channel("purity").unwrap()[1]];
        if let Some((k, pd, pur)) = steady {
            row.extend([*k as f64, *pd, *pur]);
        }
        table.push_nums(&row);
        res.absorb(t.stats, t.worst_diagnostics());
    }
    res.tables.push(table);
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct Fig3Params {
    pub n: usize,
    pub kappa_mhz: f64,
    /// Effective decay targets as fractions of κ.
    pub targets: Vec<f64>,
    pub omega_r_mhz: f64,
    pub omega_m_mhz: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub settings: IntegratorSettings,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Fig3Params {
            n: 10,
            kappa_mhz: 5.0,
            targets: vec![0.2, 0.4, 0.5],
            omega_r_mhz: 1.0,
            omega_m_mhz: 1.0,
            t_end: 20.0,
            dt_out: 0.1,
            settings: figure_settings(),
        }
    }
}

/// Engineered decay through |e⟩ with ω chosen to hit each γ/κ target, the
/// three-level run at the first target, and ω = 0.
pub fn run_fig3(p: &Fig3Params) -> Result<ScenarioResult> {
    let start = Instant::now();
    let kappa = mhz(p.kappa_mhz);
    let (or, om) = (mhz(p.omega_r_mhz), mhz(p.omega_m_mhz));
    let times = grid(p.t_end, p.dt_out);
    let omegas = p
        .targets
        .iter()
        .map(|&x| omega_for_rate(x * kappa, kappa))
        .collect::<Result<Vec<_>>>()?;
    let engineered = |omega_e: f64| -> Result<Trajectory> {
        let scheme = AtomScheme::four_level(or, om, omega_e, kappa);
        let space = restricted_space_engineered(p.n)?;
        let h = hamiltonian_restricted(&scheme, &space, None)?;
        run_from_ground(&scheme, &space, &h, &times, &p.settings, vec![])
    };
    let mut jobs: Vec<f64> = omegas.clone();
    jobs.push(0.0);
    let trajs = jobs.par_iter().map(|&w| engineered(w)).collect::<Result<Vec<_>>>()?;
    let fits = omegas.par_iter().map(|&w| fit_effective_decay(w, kappa)).collect::<Result<Vec<_>>>()?;
    let effective = match p.targets.first() {
        Some(&x) => Some(restricted_trajectory(
            &AtomScheme::three_level(or, om, x * kappa),
            p.n,
            &times,
            &p.settings,
        )?),
        None => None,
    };

    let mut res = ScenarioResult::new(
        "fig3",
        doc(vec![
            ("N", Value::Integer(p.n as i64)),
            ("kappa_MHz", f(p.kappa_mhz)),
            ("gamma_targets_over_kappa", list(&p.targets)),
            ("omega_E_MHz", list(&omegas.iter().map(|&w| to_mhz(w)).collect::<Vec<_>>())),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz)),
            ("t_end_us", f(p.t_end)),
            ("dt_out_us", f(p.dt_out)),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    let mut rates = Table::new(
        "fig3_rates",
        &["gamma_target_over_kappa", "omega_E_MHz", "gamma_est_MHz", "gamma_fit_MHz", "P_D_final"],
    );
    for (i, ((&x, &w), fit)) in p.targets.iter().zip(&omegas).zip(&fits).enumerate() {
        let t = &trajs[i];
        res.tables.push(trajectory_table(&format!("fig3_target{}", i + 1), t));
        rates.push_nums(&[x, to_mhz(w), to_mhz(fit.gamma_est), to_mhz(fit.rate), *t.channel("P_D").unwrap().last().unwrap()]);
    }
    res.tables.push(rates);
    let frozen = trajs.last().unwrap();
    res.tables.push(trajectory_table("fig3_omega0", frozen));
    if let Some(e) = &effective {
        res.tables.push(trajectory_table("fig3_effective", e));
        let after: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 1.0).collect();
        let dev = after
            .iter()
            .map(|&i| (e.channel("P_D").unwrap()[i] - trajs[0].channel("P_D").unwrap()[i]).abs())
            .fold(0.0, f64::max);
        res.summary.push(("max_abs_dP_D_effective_after_1us".into(), dev));
        res.absorb(e.stats, e.worst_diagnostics());
    }
    for t in &trajs {
        res.absorb(t.stats, t.worst_diagnostics());
    }
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct Fig4Params {
    pub n_per_ensemble: usize,
    /// (separation in µm, V_rs(R₆) / V_ss(R₆) values swept there).
    pub series: Vec<(f64, Vec<f64>)>,
    /// Distance at which V_ss equals Ω_R.
    pub r6_um: f64,
    pub omega_r_mhz: f64,
    pub omega_m_mhz: f64,
    pub gamma_mhz: f64,
    pub tau: f64,
    pub settings: IntegratorSettings,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Fig4Params {
            n_per_ensemble: 3,
            series: vec![
                (3.0, vec![0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0]),
                (6.0, vec![0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0]),
            ],
            r6_um: 3.0,
            omega_r_mhz: 1.0,
            omega_m_mhz: 1.0,
            gamma_mhz: 2.0,
            tau: 10.0,
            settings: figure_settings(),
        }
    }
}

/// Inter-ensemble (V_ss, V_rs) in rad/µs at `separation`: V_ss = Ω_R (R₆/d)⁶
/// from the 1/r⁶ law, and V_rs = ratio · V_ss(R₆) = ratio · Ω_R applied
/// directly at that separation.
pub fn fig4_couplings(separation: f64, ratio: f64, r6: f64, omega_r: f64) -> (f64, f64) {
    (omega_r * (r6 / separation).powi(6), ratio * omega_r)
}

/// Two perfectly blockaded ensembles coupled only across the gap.
pub fn run_fig4(p: &Fig4Params) -> Result<ScenarioResult> {
    let start = Instant::now();
    let scheme = AtomScheme::three_level(mhz(p.omega_r_mhz), mhz(p.omega_m_mhz), mhz(p.gamma_mhz));
    let half = restricted_space(p.n_per_ensemble)?;
    let space = composite_space(&half, &half)?;
    let cells: Vec<(f64, f64)> = p
        .series
        .iter()
        .flat_map(|(d, xs)| xs.iter().map(move |&x| (*d, x)))
        .collect();
    let trajs = cells
        .par_iter()
        .map(|&(d, x)| {
            let (v_ss, v_rs) = fig4_couplings(d, x, p.r6_um, scheme.omega_r);
            let cross = CrossCouplings::uniform(p.n_per_ensemble, p.n_per_ensemble, 0.0, v_ss, v_rs);
            let h = hamiltonian_restricted(&scheme, &space, Some(&cross))?;
            run_from_ground(&scheme, &space, &h, &[0.0, p.tau], &p.settings, vec![])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = ScenarioResult::new(
        "fig4",
        doc(vec![
            ("N_per_ensemble", Value::Integer(p.n_per_ensemble as i64)),
            ("separation_um", list(&p.series.iter().map(|s| s.0).collect::<Vec<_>>())),
            (
                "V_rs_over_V_ss_at_R6",
                Value::Array(p.series.iter().map(|s| list(&s.1)).collect()),
            ),
            ("R6_ss_um", f(p.r6_um)),
            ("cross_V_rr_MHz", f(0.0)),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz)),
            ("gamma_r_MHz", f(p.gamma_mhz)),
            ("tau_us", f(p.tau)),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    let mut table = Table::new(
        "fig4",
        &["separation_um", "V_rs_ratio", "V_rs_MHz", "V_ss_MHz", "P_D_tau"],
    );
    for (&(d, x), t) in cells.iter().zip(&trajs) {
        let (v_ss, v_rs) = fig4_couplings(d, x, p.r6_um, scheme.omega_r);
        table.push_nums(&[d, x, to_mhz(v_rs), to_mhz(v_ss), t.channel("P_D").unwrap()[1]]);
        res.absorb(t.stats, t.worst_diagnostics());
    }
    for &(d, _) in &p.series {
        let threshold = cells
            .iter()
            .zip(&trajs)
            .filter(|((dd, _), _)| *dd == d)
            .find(|(_, t)| t.channel("P_D").unwrap()[1] >= 0.9)
            .map(|((_, x), _)| *x)
            .unwrap_or(f64::NAN);
        res.summary.push((format!("threshold_ratio_sep{d}"), threshold));
    }
    res.tables.push(table);
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum N20Variant {
    /// Ω_M = Ω_R: the dark state is dominated by the W state.
    WDominated,
    /// Ω_M = √N Ω_R: equal weight on |G⟩ and |S⟩.
    EqualWeight,
}

impl N20Variant {
    pub fn id(self) -> &'static str {
        match self {
            N20Variant::WDominated => "n20-w",
            N20Variant::EqualWeight => "n20-equal",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealisticParams {
    pub variant: N20Variant,
    pub n: usize,
    pub omega_r_mhz: f64,
    pub omega_e_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_d_khz: f64,
    pub gamma_s_khz: f64,
    pub gamma_r_khz: f64,
    pub dephasing: DephasingCorrelation,
    pub t_end: f64,
    pub dt_out: f64,
    pub settings: IntegratorSettings,
}

impl RealisticParams {
    pub fn new(variant: N20Variant) -> Self {
        RealisticParams {
            variant,
            n: 20,
            omega_r_mhz: 1.0,
            omega_e_mhz: 24.0,
            kappa_mhz: 6.0,
            gamma_d_khz: 10.0,
            gamma_s_khz: 5.0,
            gamma_r_khz: 5.0,
            dephasing: DephasingCorrelation::Collective,
            t_end: 20.0,
            dt_out: 0.1,
            settings: figure_settings(),
        }
    }

    pub fn omega_m_mhz(&self) -> f64 {
        match self.variant {
            N20Variant::WDominated => self.omega_r_mhz,
            N20Variant::EqualWeight => self.omega_r_mhz * (self.n as f64).sqrt(),
        }
    }
}

/// N = 20 with engineered decay folded into an effective γ and weak
/// dephasing and intrinsic losses.
pub fn run_realistic_n20(p: &RealisticParams) -> Result<ScenarioResult> {
    let start = Instant::now();
    let fit = fit_effective_decay(mhz(p.omega_e_mhz), mhz(p.kappa_mhz))?;
    let lossless = AtomScheme::three_level(mhz(p.omega_r_mhz), mhz(p.omega_m_mhz()), fit.rate);
    let mut lossy = lossless.clone();
    lossy.gamma_d = khz(p.gamma_d_khz);
    lossy.gamma_s = khz(p.gamma_s_khz);
    lossy.gamma_r_intrinsic = khz(p.gamma_r_khz);
    lossy.dephasing.correlation = p.dephasing;
    let times = grid(p.t_end, p.dt_out);
    let space = restricted_space(p.n)?;
    let (_, w) = symmetric_states(&space)?;
    let trajs = [&lossy, &lossless]
        .par_iter()
        .map(|s| {
            let h = hamiltonian_restricted(s, &space, None)?;
            run_from_ground(s, &space, &h, &times, &p.settings, vec![Observable::projector("W", w.clone())])
        })
        .collect::<Result<Vec<_>>>()?;
    let (t, ideal) = (&trajs[0], &trajs[1]);
    let id = p.variant.id();
    let mut res = ScenarioResult::new(
        id,
        doc(vec![
            ("N", Value::Integer(p.n as i64)),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz())),
            ("omega_E_MHz", f(p.omega_e_mhz)),
            ("kappa_MHz", f(p.kappa_mhz)),
            ("gamma_r_effective_MHz", f(to_mhz(fit.rate))),
            ("gamma_d_kHz", f(p.gamma_d_khz)),
            ("gamma_s_kHz", f(p.gamma_s_khz)),
            ("gamma_r_intr_kHz", f(p.gamma_r_khz)),
            (
                "dephasing_correlation",
                Value::String(
                    match p.dephasing {
                        DephasingCorrelation::PerAtom => "per-atom",
                        DephasingCorrelation::Collective => "collective",
                    }
                    .into(),
                ),
            ),
            ("t_end_us", f(p.t_end)),
            ("dt_out_us", f(p.dt_out)),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    res.tables.push(trajectory_table(&id.replace('-', "_"), t));
    res.tables.push(trajectory_table(&format!("{}_lossless", id.replace('-', "_")), ideal));
    let t_f = first_crossing(&ideal.times, ideal.channel("P_D").unwrap(), 0.99).unwrap_or(f64::NAN);
    let at = |tr: &Trajectory, name: &str, time: f64| tr.value_at(name, time).unwrap_or(f64::NAN);
    res.summary.extend([
        ("gamma_r_effective_MHz".to_string(), to_mhz(fit.rate)),
        ("W_10us".to_string(), at(t, "W", 10.0)),
        ("P_D_10us".to_string(), at(t, "P_D", 10.0)),
        ("P_D_12us".to_string(), at(t, "P_D", 12.0)),
        ("P_D_final".to_string(), *t.channel("P_D").unwrap().last().unwrap()),
        ("T_f_us".to_string(), t_f),
        (
            "loss_scale_gamma_T_f".to_string(),
            (khz(p.gamma_d_khz) + khz(p.gamma_s_khz)) * t_f,
        ),
        ("loss_measured_final".to_string(), ideal.channel("P_D").unwrap().last().unwrap() - t.channel("P_D").unwrap().last().unwrap()),
    ]);
    for tr in &trajs {
        res.absorb(tr.stats, tr.worst_diagnostics());
    }
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct FullVsRestrictedParams {
    pub n: usize,
    pub v_mhz: Vec<f64>,
    pub omega_r_mhz: f64,
    pub omega_m_mhz: f64,
    pub gamma_mhz: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub settings: IntegratorSettings,
}

impl Default for FullVsRestrictedParams {
    fn default() -> Self {
        FullVsRestrictedParams {
            n: 3,
            v_mhz: vec![500.0, 1000.0],
            omega_r_mhz: 1.0,
            omega_m_mhz: 1.0,
            gamma_mhz: 2.0,
            t_end: 10.0,
            dt_out: 0.02,
            settings: IntegratorSettings::with_method(Method::Expm),
        }
    }
}

/// Full three-level model with V_rr = V_ss = V_rs = V on every pair against
/// the perfect-blockade restricted model.
pub fn run_full_vs_restricted(p: &FullVsRestrictedParams) -> Result<ScenarioResult> {
    let start = Instant::now();
    let scheme = AtomScheme::three_level(mhz(p.omega_r_mhz), mhz(p.omega_m_mhz), mhz(p.gamma_mhz));
    let times = grid(p.t_end, p.dt_out);
    let reference = restricted_trajectory(&scheme, p.n, &times, &p.settings)?;
    let space = full_space(p.n, 3)?;
    let fulls = p
        .v_mhz
        .par_iter()
        .map(|&v| {
            let c = PairCoupling::Finite(mhz(v));
            let h = hamiltonian_full(&scheme, &PairCouplings::uniform(p.n, c, c, c), &space)?;
            run_from_ground(&scheme, &space, &h, &times, &p.settings, vec![])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = ScenarioResult::new(
        "full-vs-restricted",
        doc(vec![
            ("N", Value::Integer(p.n as i64)),
            ("V_MHz", list(&p.v_mhz)),
            ("omega_R_MHz", f(p.omega_r_mhz)),
            ("omega_M_MHz", f(p.omega_m_mhz)),
            ("gamma_r_MHz", f(p.gamma_mhz)),
            ("t_end_us", f(p.t_end)),
            ("dt_out_us", f(p.dt_out)),
            ("integrator", settings_doc(&p.settings)),
        ]),
    );
    let pr = reference.channel("P_D").unwrap();
    let mut summary = Table::new("full_vs_restricted", &["V_MHz", "max_abs_dP_D"]);
    for (&v, t) in p.v_mhz.iter().zip(&fulls) {
        let pf = t.channel("P_D").unwrap();
        let mut table = Table::new(format!("full_vs_restricted_V{v}"), &["t_us", "P_D_full", "P_D_restricted"]);
        for i in 0..times.len() {
            table.push_nums(&[times[i], pf[i], pr[i]]);
        }
        res.tables.push(table);
        summary.push_nums(&[v, max_abs_diff(pf, pr)]);
        res.absorb(t.stats, t.worst_diagnostics());
    }
    res.absorb(reference.stats, reference.worst_diagnostics());
    res.tables.push(summary);
    res.wall_time_s = start.elapsed().as_secs_f64();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hybrid_basis_keeps_rs_pairs_only() {
        // G, 4 r, 4 s and the 12 ordered (r_i, s_j) pairs.
        let (space, _) = hybrid_space(4, mhz(10.0)).unwrap();
        assert_eq!(space.dim(), 21);
    }

    #[test]
    fn fig4_coupling_law() {
        let (ss, rs) = fig4_couplings(3.0, 30.0, 3.0, mhz(1.0));
        assert!((ss - mhz(1.0)).abs() < 1e-15 && (rs - mhz(30.0)).abs() < 1e-12);
        let (ss, rs) = fig4_couplings(6.0, 30.0, 3.0, mhz(1.0));
        assert!((ss - mhz(1.0) / 64.0).abs() < 1e-15 && (rs - mhz(30.0)).abs() < 1e-12);
    }

    #[test]
    fn small_fig2_layout() {
        let r = run_fig2(&Fig2Params {
            n_list: vec![1, 2],
            t_end: 1.0,
            ..Fig2Params::default()
        })
        .unwrap();
        let names: Vec<&str> = r.tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["fig2_N1", "fig2_N2", "fig2_N1_sqrt2", "fig2_summary"]);
        assert_eq!(r.table("fig2_N1").unwrap().rows.len(), 11);
        assert!(r.parameters.contains_key("integrator"));
        assert!(r.diagnostics.unwrap().is_valid());
    }

    #[test]
    fn small_fig4_layout() {
        let r = run_fig4(&Fig4Params {
            n_per_ensemble: 1,
            series: vec![(3.0, vec![0.0, 10.0]), (6.0, vec![10.0])],
            tau: 1.0,
            ..Fig4Params::default()
        })
        .unwrap();
        let t = r.table("fig4").unwrap();
        assert_eq!(t.columns, ["separation_um", "V_rs_ratio", "V_rs_MHz", "V_ss_MHz", "P_D_tau"]);
        assert_eq!(t.column("separation_um").unwrap(), [3.0, 3.0, 6.0]);
        assert_eq!(t.column("V_ss_MHz").unwrap()[2], 1.0 / 64.0);
        assert!(t.column("P_D_tau").unwrap().iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
