use serde_json::{json, Value};
use symspace::fit::log_space;
use symspace::hardy::{GaussianBumps, HardyProblem, WeightSpec};
use symspace::ineq::{admissible_check, empirical_best_ratio, lab_grids, FamilyKind, IneqKind, IneqSpec, TestFamily};
use symspace::kernels::{bgr_kernel_at, kernel_asymptotics, KernelSpec};
use symspace::spherical::{
    check_ground_estimate, ground_envelope, ground_spherical, spherical_function, RadialFunction, RadialGridSpec,
    SpectralGridSpec, SphericalTransform,
};
use symspace::wave::{
    critical_decay, energy_decay_rate, gaussian_data, solve_linear, solve_semilinear, wave_grids, z_norm,
    SemilinearOptions, WaveParams,
};
use symspace::{ChamberPoint, SpaceModel};

use crate::error::CliError;
use crate::report::{Report, Table};
use crate::schema::{CommandId, RunConfig};

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let report = match config.command {
        CommandId::SpaceInfo => space_info(config),
        CommandId::SphericalEval => spherical_eval(config),
        CommandId::TransformRoundtrip => transform_roundtrip(config),
        CommandId::KernelTable => kernel_table(config),
        CommandId::KernelAsym => kernel_asym(config),
        CommandId::HardyCheck => hardy_check(config),
        CommandId::IneqRun => ineq_run(config),
        CommandId::WaveLinear => wave_linear(config),
        CommandId::WaveSemilinear => wave_semilinear(config),
    }?;
    if config.flag("fail-on-truncation") && !report.warnings.is_empty() {
        return Err(CliError::Truncation(report.warnings));
    }
    Ok(report)
}

fn float(config: &RunConfig, key: &str) -> Result<f64, CliError> {
    config.float(key).ok_or_else(|| CliError::Missing(key.to_string()))
}

fn count(config: &RunConfig, key: &str) -> Result<usize, CliError> {
    config
        .int(key)
        .map(|v| v as usize)
        .ok_or_else(|| CliError::Missing(key.to_string()))
}

fn space(config: &RunConfig) -> Result<SpaceModel, CliError> {
    let raw = config.list("factors");
    let mut dims = Vec::with_capacity(raw.len());
    for d in raw {
        if d.fract() != 0.0 || d < 1.0 {
            return Err(CliError::Type {
                key: "factors".into(),
                value: d.to_string(),
                expected: "positive integers",
            });
        }
        dims.push(d as usize);
    }
    Ok(SpaceModel::product(&dims)?)
}

/// Point on the ray through `ρ` at distance `r`.
fn ray_point(space: &SpaceModel, r: f64) -> Result<ChamberPoint, CliError> {
    Ok(ChamberPoint::new(space.rho_direction().iter().map(|d| d * r).collect())?)
}

/// Apply `--r-max` and friends on top of a command's default grids.
fn grids(config: &RunConfig, mut radial: RadialGridSpec, mut spectral: SpectralGridSpec) -> (RadialGridSpec, SpectralGridSpec) {
    if let Some(v) = config.float("r-max") {
        radial.r_max = v;
    }
    if let Some(v) = config.float("panel-width") {
        radial.panel_width = v;
    }
    if let Some(v) = config.int("nodes-per-panel") {
        radial.nodes_per_panel = v as usize;
    }
    if let Some(v) = config.float("lam-max") {
        spectral.lam_max = v;
    }
    if let Some(v) = config.int("spectral-count") {
        spectral.count = v as usize;
    }
    (radial, spectral)
}

fn grid_echo(plan: &SphericalTransform) -> Value {
    json!({
        "radial": plan.radial_grid().spec(),
        "radial_nodes": plan.radial_grid().len(),
        "spectral": plan.spectral_grid().spec(),
        "spectral_nodes": plan.spectral_grid().len(),
    })
}

fn warning_strings<T: ToString>(w: &[T]) -> Vec<String> {
    w.iter().map(|x| x.to_string()).collect()
}

fn space_info(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let mut table = Table::new(&["r", "shell_density", "ball_volume"]);
    for k in 1..=20 {
        let r = 0.5 * k as f64;
        table.push(vec![json!(r), json!(s.shell_density(r)), json!(s.ball_volume(r)?)]);
    }
    let mut report = Report::new(json!({
        "factors": s.factors(),
        "dim": s.dim(),
        "rank": s.rank(),
        "rho": s.rho(),
        "rho_norm": s.rho_norm(),
        "rho_direction": s.rho_direction(),
        "roots": s.roots(),
        "indivisible_roots": s.num_indivisible(),
        "pseudo_dim": s.pseudo_dim(),
        "weyl_group_order": s.weyl_order(),
    }));
    report.table = Some(table);
    Ok(report)
}

fn spherical_eval(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let lams = config.list("lam");
    let (lo, hi, n) = (float(config, "r-min")?, float(config, "r-end")?, count(config, "points")?);
    let estimate = check_ground_estimate(&s, lo, hi, n, &lams)?;
    let mut columns = vec!["r".to_string(), "phi0".into(), "envelope".into(), "ratio".into()];
    columns.extend(lams.iter().map(|l| format!("phi_{l}")));
    let mut table = Table {
        columns,
        rows: Vec::new(),
    };
    for r in log_space(lo, hi, n) {
        let h = ray_point(&s, r)?;
        let phi0 = ground_spherical(&s, &h)?;
        let env = ground_envelope(&s, &h)?;
        let mut row = vec![json!(r), json!(phi0), json!(env), json!(phi0 / env)];
        for &l in &lams {
            row.push(json!(spherical_function(&s, &vec![l; s.rank()], &h)?));
        }
        table.push(row);
    }
    let mut report = Report::new(json!({ "ground_estimate": estimate, "lam": lams }));
    report.table = Some(table);
    Ok(report)
}

fn default_transform_grids(s: &SpaceModel) -> (RadialGridSpec, SpectralGridSpec) {
    if s.rank() == 1 {
        (RadialGridSpec::default(), SpectralGridSpec::default())
    } else {
        (
            RadialGridSpec::default().with_r_max(10.0).with_panel_width(0.25),
            SpectralGridSpec {
                lam_max: 20.0,
                count: 320,
            },
        )
    }
}

/// At most this many radial rows in tables.
const MAX_ROWS: usize = 200;

fn transform_roundtrip(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let (width, center) = (float(config, "width")?, float(config, "center")?);
    let (radial, spectral) = grids(config, default_transform_grids(&s).0, default_transform_grids(&s).1);
    let plan = SphericalTransform::build(&s, radial, spectral)?;
    let f = RadialFunction::from_profile(plan.radial_grid().clone(), |r| (-((r - center) / width).powi(2)).exp());
    let g = plan.forward(&f)?;
    let back = plan.inverse(&g)?;
    let sup = f.sup_norm();
    let err = f
        .values
        .iter()
        .zip(&back.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / sup;
    let l2 = f.lp_norm(2.0);
    let spectral_l2 = g.l2_norm();
    let rows = f.rows();
    let stride = rows.len().div_ceil(MAX_ROWS).max(1);
    let mut table = Table::new(&["point", "f", "roundtrip"]);
    for (i, (pt, v)) in rows.iter().enumerate().step_by(stride) {
        table.push(vec![json!(pt), json!(v), json!(back.values[i])]);
    }
    let mut report = Report::new(json!({
        "roundtrip_relative_error": err,
        "l2_radial": l2,
        "l2_spectral": spectral_l2,
        "plancherel_relative_error": (l2 - spectral_l2).abs() / l2,
        "spectral_sup": g.sup_norm(),
    }));
    report.grids = grid_echo(&plan);
    report.warnings = warning_strings(&back.warnings);
    report.table = Some(table);
    Ok(report)
}

fn kernel_spec(config: &RunConfig) -> Result<KernelSpec, CliError> {
    let s = space(config)?;
    Ok(KernelSpec::new(&s, float(config, "sigma")?, config.float("xi"))?)
}

fn kernel_table(config: &RunConfig) -> Result<Report, CliError> {
    let spec = kernel_spec(config)?;
    let (lo, hi, n) = (float(config, "r-min")?, float(config, "r-end")?, count(config, "points")?);
    let mut table = Table::new(&["r", "kernel"]);
    for r in log_space(lo, hi, n) {
        let h = ray_point(&spec.space, r)?;
        table.push(vec![json!(r), json!(bgr_kernel_at(&spec, h.coords())?)]);
    }
    let mut report = Report::new(json!({ "sigma": spec.sigma, "xi": spec.xi, "factors": spec.space.factors() }));
    report.table = Some(table);
    Ok(report)
}

fn kernel_asym(config: &RunConfig) -> Result<Report, CliError> {
    let spec = kernel_spec(config)?;
    let asym = kernel_asymptotics(&spec)?;
    Ok(Report::new(json!({
        "sigma": spec.sigma,
        "xi": spec.xi,
        "factors": spec.space.factors(),
        "asymptotics": asym,
    })))
}

fn rate_or_auto(config: &RunConfig, key: &str, auto: f64) -> Result<f64, CliError> {
    match config.text(key) {
        None | Some("auto") => Ok(auto),
        Some(raw) => raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Type {
            key: key.to_string(),
            value: raw.to_string(),
            expected: "a number or auto",
        }),
    }
}

fn hardy_check(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let (p, q) = (float(config, "p")?, float(config, "q")?);
    if !(p > 1.0) {
        return Err(symspace::Error::InvalidParameter {
            name: "p".into(),
            reason: "must exceed 1".into(),
        }
        .into());
    }
    let pc = p / (p - 1.0);
    let growth = 2.0 * s.rho_norm();
    // decay of u strong enough for U to be finite, growth of v for V in L^1
    let u_decay = rate_or_auto(config, "u-decay", growth * (1.0 + q / pc) + 1.0)?;
    let v_rate = rate_or_auto(config, "v-rate", growth / (pc - 1.0) + 1.0)?;
    let u = WeightSpec::exp_power(float(config, "u-exponent")?, -u_decay);
    let v = WeightSpec::exp_power(float(config, "v-exponent")?, v_rate);
    let problem = HardyProblem::new(&s, u.clone(), v.clone(), p, q)?;
    let report = problem.report(config.float("s"))?;
    let trials = problem.test_inequality(
        &GaussianBumps::default(),
        count(config, "trials")?,
        config.seed(),
        config.flag("adjoint"),
    )?;
    let mut table = Table::new(&["trial", "lhs", "rhs", "ratio", "violation"]);
    for t in &trials.samples {
        table.push(vec![json!(t.trial), json!(t.lhs), json!(t.rhs), json!(t.ratio), json!(t.violation)]);
    }
    let mut out = Report::new(json!({
        "u": u,
        "v": v,
        "conditions": report,
        "test": {
            "adjoint": trials.adjoint,
            "d1": trials.d1,
            "bound": trials.bound,
            "trials": trials.trials,
            "violations": trials.violations,
            "max_ratio": trials.max_ratio,
            "best_trial": trials.best_trial,
        },
    }));
    out.table = Some(table);
    Ok(out)
}

fn ineq_run(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let kind: IneqKind = config.text("kind").unwrap_or_default().parse()?;
    let pairs = config.pairs("params");
    let named: Vec<(&str, f64)> = pairs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let spec = IneqSpec::new(kind, &s, &named)?;
    let verdict = admissible_check(&spec)?;
    if !verdict.admissible {
        return Err(symspace::Error::Inadmissible(verdict.failed()).into());
    }
    let family_kind: FamilyKind = config.text("family").unwrap_or("dilated").parse()?;
    let family = TestFamily::standard(family_kind, &s, count(config, "count")?, config.seed());
    let (radial, spectral) = lab_grids(&s, family.min_width());
    let (radial, spectral) = grids(config, radial, spectral);
    let plan = SphericalTransform::build(&s, radial, spectral)?;
    let result = empirical_best_ratio(&plan, &spec, &family, count(config, "budget")?)?;
    let mut columns: Vec<&str> = family_kind.parameter_names().to_vec();
    columns.extend(["lhs", "rhs", "ratio"]);
    let mut table = Table::new(&columns);
    for m in &result.members {
        let mut row: Vec<Value> = m.params.iter().map(|v| json!(v)).collect();
        row.extend([json!(m.lhs), json!(m.rhs), json!(m.ratio)]);
        table.push(row);
    }
    let mut report = Report::new(json!({
        "kind": kind,
        "params": spec.params,
        "admissibility": verdict,
        "family": result.family,
        "budget": result.budget,
        "evaluations": result.evaluations,
        "initial_max": result.initial_max,
        "max_ratio": result.max_ratio,
        "argmax": result.argmax,
    }));
    report.grids = grid_echo(&plan);
    report.warnings = result.warnings.clone();
    report.table = Some(table);
    Ok(report)
}

fn wave_table(rows: &[symspace::wave::NormRow]) -> Table {
    let mut table = Table::new(&["t", "l2", "h1", "l2_ut", "zweighted"]);
    for r in rows {
        table.push(vec![json!(r.t), json!(r.l2), json!(r.h1), json!(r.l2_ut), json!(r.zweighted)]);
    }
    table
}

fn wave_linear(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let params = WaveParams::linear(float(config, "b")?, float(config, "m")?)?;
    let (t_final, step) = (float(config, "T")?, float(config, "step")?);
    if !(step > 0.0) || !(t_final > 0.0) {
        return Err(symspace::Error::InvalidParameter {
            name: "step".into(),
            reason: "times must be positive".into(),
        }
        .into());
    }
    let (radial, spectral) = wave_grids(&s);
    let (radial, spectral) = grids(config, radial, spectral);
    let plan = SphericalTransform::build(&s, radial, spectral)?;
    let (u0, u1) = gaussian_data(&plan, float(config, "eps")?)?;
    let n = (t_final / step).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let traj = solve_linear(&plan, &params, &u0, &u1, &times)?;
    let window = (5.0, t_final.min(20.0));
    let rate = if window.1 > window.0 {
        Some(energy_decay_rate(&traj, window)?)
    } else {
        None
    };
    let mut report = Report::new(json!({
        "params": params,
        "delta": params.delta(),
        "delta_critical": critical_decay(&params),
        "decay_window": window,
        "h1_squared_decay_rate": rate,
        "required_rate": 0.9 * 2.0 * params.delta(),
        "z_norm": z_norm(&traj, params.delta()),
    }));
    report.grids = grid_echo(&plan);
    report.warnings = warning_strings(&traj.warnings);
    report.table = Some(wave_table(&traj.norms));
    Ok(report)
}

fn wave_semilinear(config: &RunConfig) -> Result<Report, CliError> {
    let s = space(config)?;
    let params = WaveParams::new(
        float(config, "b")?,
        float(config, "m")?,
        float(config, "p")?,
        float(config, "mu")?,
    )?;
    let opts = SemilinearOptions {
        t_final: float(config, "T")?,
        dt: float(config, "dt")?,
        record_every: count(config, "record-every")?,
    };
    let (radial, spectral) = wave_grids(&s);
    let (radial, spectral) = grids(config, radial, spectral);
    let plan = SphericalTransform::build(&s, radial, spectral)?;
    let (u0, u1) = gaussian_data(&plan, float(config, "eps")?)?;
    let run = solve_semilinear(&plan, &params, &u0, &u1, opts)?;
    let mut report = Report::new(json!({
        "params": params,
        "options": opts,
        "delta": params.delta(),
        "data_size": run.data_size,
        "experimental": run.experimental,
        "max_contraction": run.max_contraction(),
        "max_iterations": run.iterations.iter().max(),
        "z_norm": run.z_norm(),
        "final": run.trajectory.final_norms(),
    }));
    report.grids = grid_echo(&plan);
    report.warnings = warning_strings(&run.trajectory.warnings);
    let norms = &run.trajectory.norms;
    let last = norms.len() - 1;
    let every = opts.record_every.max(1);
    let kept: Vec<_> = norms
        .iter()
        .enumerate()
        .filter(|(step, _)| step % every == 0 || *step == last)
        .map(|(_, row)| row.clone())
        .collect();
    report.table = Some(wave_table(&kept));
    Ok(report)
}
