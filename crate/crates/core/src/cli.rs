//! Pipelines behind the `cavsim` subcommands, and their on-disk output.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::{
    chain_lifetime_scaling, classify_interference, photon_lifetime, sweep_lifetime, BaseSystem,
    Cavity, SweepParam, SweepProtocol, DEFAULT_TOLERANCE,
};
use crate::config::{ExperimentConfig, OutputFormat, ProtocolKind, SystemKind};
use crate::dynamics::{
    decay_protocol, eigenmodes, evolve_driven, evolve_driven_with, evolve_free, evolve_free_with,
    resonant_splitting, InitialState, Propagator, Trajectory,
};
use crate::error::{Error, Result};
use crate::lindblad::{lindblad_evolve, lindblad_lifetime_sweep};
use crate::model::{effective_coupling, CavityParams, CouplingSpec};
use crate::ode::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Chain,
    Lindblad,
    Eigen,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Chain => "chain",
            Command::Lindblad => "lindblad",
            Command::Eigen => "eigen",
        }
    }

    /// The pipeline a config asks for on its own.
    pub fn for_config(config: &ExperimentConfig) -> Self {
        if config.protocol == ProtocolKind::Lindblad {
            Command::Lindblad
        } else if config.sweep.is_some() {
            Command::Sweep
        } else {
            Command::Simulate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnData {
    /// `None` marks a missing value (failed point, no crossing).
    Numbers(Vec<Option<f64>>),
    Text(Vec<String>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numbers(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            ColumnData::Numbers(v) => v[row].map(format_number).unwrap_or_default(),
            ColumnData::Text(v) => v[row].clone(),
        }
    }
}

/// Round-trippable double formatting used in every table.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            columns: Vec::new(),
        }
    }

    pub fn numbers(&mut self, name: &str, values: impl IntoIterator<Item = f64>) -> &mut Self {
        let data = values.into_iter().map(|v| v.is_finite().then_some(v)).collect();
        self.push(name, ColumnData::Numbers(data))
    }

    pub fn optional(&mut self, name: &str, values: impl IntoIterator<Item = Option<f64>>) -> &mut Self {
        let data = values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect();
        self.push(name, ColumnData::Numbers(data))
    }

    pub fn text(&mut self, name: &str, values: impl IntoIterator<Item = String>) -> &mut Self {
        self.push(name, ColumnData::Text(values.into_iter().collect()))
    }

    fn push(&mut self, name: &str, data: ColumnData) -> &mut Self {
        self.columns.push(Column {
            name: name.into(),
            data,
        });
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.name == name).map(|c| &c.data)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(io)?;
        for row in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| c.data.cell(row))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub created_unix_s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    #[serde(default)]
    pub extras: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl ResultBundle {
    fn new(command: &str, config: Option<&ExperimentConfig>) -> Self {
        let created_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            metadata: Metadata {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                created_unix_s,
                config: config.cloned(),
                extras: Map::new(),
            },
            tables: Vec::new(),
        }
    }

    fn extra(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.extras.insert(key.into(), v);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Cross-check against the independent propagator.
    pub validate: bool,
}

/// Runs the pipeline selected by the config itself.
pub fn run(config: &ExperimentConfig) -> Result<ResultBundle> {
    run_command(config, Command::for_config(config), RunOptions::default())
}

pub fn run_command(config: &ExperimentConfig, command: Command, opts: RunOptions) -> Result<ResultBundle> {
    match command {
        Command::Simulate => simulate(config, opts),
        Command::Sweep => sweep(config),
        Command::Chain => chain(config),
        Command::Lindblad => lindblad(config, opts),
        Command::Eigen => eigen(config),
    }
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new("trajectory");
    t.numbers("time_s", traj.times.iter().copied());
    for j in 0..traj.dim() {
        let k = j + 1;
        t.numbers(&format!("re_a{k}"), traj.amplitudes[j].iter().map(|a| a.re));
        t.numbers(&format!("im_a{k}"), traj.amplitudes[j].iter().map(|a| a.im));
        t.numbers(&format!("n{k}"), traj.photon_numbers[j].iter().copied());
    }
    t
}

fn rk() -> Propagator {
    Propagator::RungeKutta(Tolerances::default())
}

fn simulate(config: &ExperimentConfig, opts: RunOptions) -> Result<ResultBundle> {
    let model = config.model()?;
    let grid = config.grid()?;
    let mut bundle = ResultBundle::new("simulate", Some(config));
    let (traj, check) = match config.protocol {
        ProtocolKind::FreeDecay => {
            let init = config
                .initial_state()?
                .ok_or_else(|| Error::InvalidConfig("free_decay needs an initial state".into()))?;
            let traj = evolve_free(&model, &init, &grid)?;
            let check = opts
                .validate
                .then(|| evolve_free_with(&model, &init, &grid, rk()))
                .transpose()?;
            (traj, check)
        }
        ProtocolKind::Driven => {
            let drive = config.drive_spec()?.ok_or_else(|| Error::InvalidConfig("driven needs a drive".into()))?;
            let init = InitialState::zeros(model.dim());
            let traj = evolve_driven(&model, &init, &drive, &grid)?;
            let check = opts
                .validate
                .then(|| evolve_driven_with(&model, &init, &drive, &grid, rk()))
                .transpose()?;
            (traj, check)
        }
        ProtocolKind::SteadyDecay => {
            let drive = config
                .drive_spec()?
                .ok_or_else(|| Error::InvalidConfig("steady_decay needs a drive".into()))?;
            let observe = config.observe_port.unwrap_or(model.dim() - 1);
            let run = decay_protocol(&model, &drive, observe, &grid)?;
            let lifetime = photon_lifetime(&run.trajectory, observe)?;
            bundle.extra("observe_port", observe);
            bundle.extra("steady_state", run.steady_state.amplitudes().iter().map(|a| [a.re, a.im]).collect::<Vec<_>>());
            bundle.extra("lifetime", lifetime);
            let check = opts
                .validate
                .then(|| evolve_free_with(&model, &run.steady_state, &grid, rk()))
                .transpose()?;
            let mut table = trajectory_table(&run.trajectory);
            table.numbers("output_power", run.output_power.iter().copied());
            bundle.tables.push(table);
            finish_validation(&mut bundle, &run.trajectory, check);
            return Ok(bundle);
        }
        ProtocolKind::Lindblad => return lindblad(config, opts),
    };
    if config.protocol == ProtocolKind::FreeDecay {
        let lifetimes: Vec<_> = (0..traj.dim())
            .map(|j| photon_lifetime(&traj, j).ok())
            .collect();
        bundle.extra("lifetimes", lifetimes);
    }
    bundle.tables.push(trajectory_table(&traj));
    finish_validation(&mut bundle, &traj, check);
    Ok(bundle)
}

fn finish_validation(bundle: &mut ResultBundle, traj: &Trajectory, check: Option<Trajectory>) {
    if let Some(other) = check {
        let deviation = traj.max_relative_deviation(&other);
        bundle.extra("validation_max_relative_deviation", deviation);
    }
}

fn sweep(config: &ExperimentConfig) -> Result<ResultBundle> {
    if config.protocol == ProtocolKind::Lindblad {
        return lindblad(config, RunOptions::default());
    }
    let spec = config.sweep_spec()?;
    let result = sweep_lifetime(&spec)?;
    let mut bundle = ResultBundle::new("sweep", Some(config));
    let mut table = Table::new("sweep");
    for (a, axis) in result.axes.iter().enumerate() {
        table.numbers(axis.param.name(), result.points.iter().map(|p| p.coords[a]));
    }
    let pair = matches!(spec.base, BaseSystem::Pair { .. });
    if pair {
        table.optional("t1e_cavity1", result.lifetimes(0));
        table.optional("t1e_cavity2", result.lifetimes(1));
        let dphi_axis = result.axes.iter().position(|a| a.param == SweepParam::DeltaPhi);
        let verdicts: Vec<[String; 2]> = result
            .points
            .iter()
            .map(|p| {
                let dphi = match (dphi_axis, spec.protocol) {
                    (Some(a), _) => Some(p.coords[a]),
                    (None, SweepProtocol::FreeDecay { delta_phi, .. }) => Some(delta_phi),
                    _ => None,
                };
                let zeta = p.outcome.as_ref().ok().and_then(|o| o.zeta);
                match (dphi, zeta) {
                    (Some(d), Some(z)) => [Cavity::One, Cavity::Two]
                        .map(|c| classify_interference(d, z, c, DEFAULT_TOLERANCE).verdict.as_str().to_string()),
                    _ => [String::new(), String::new()],
                }
            })
            .collect();
        table.text("verdict_1", verdicts.iter().map(|v| v[0].clone()));
        table.text("verdict_2", verdicts.iter().map(|v| v[1].clone()));
        table.optional("zeta", result.points.iter().map(|p| p.outcome.as_ref().ok().and_then(|o| o.zeta)));
    } else {
        let ends = result.points.iter().map(|p| {
            p.outcome
                .as_ref()
                .ok()
                .and_then(|o| o.lifetimes.last())
                .and_then(|l| l.t_1e)
        });
        table.optional("t1e_last", ends.collect::<Vec<_>>());
    }
    table.text(
        "error",
        result.points.iter().map(|p| match &p.outcome {
            Ok(_) => String::new(),
            Err(e) => format!("{}: {}", e.code, e.message),
        }),
    );
    let modes = if pair { 2 } else { 0 };
    for j in 0..modes {
        if let Some(k) = result.argmax(j) {
            bundle.extra(&format!("argmax_cavity{}", j + 1), &result.points[k].coords);
        }
    }
    bundle.extra("failed_points", result.points.iter().filter(|p| p.outcome.is_err()).count());
    bundle.tables.push(table);
    Ok(bundle)
}

fn chain(config: &ExperimentConfig) -> Result<ResultBundle> {
    let base = config
        .chain_spec()?
        .ok_or_else(|| Error::InvalidConfig("the chain command needs a `chain` block".into()))?;
    let n_values = config
        .chain
        .as_ref()
        .and_then(|c| c.n_values.clone())
        .unwrap_or_else(|| (2..=base.n()).collect());
    let grid = config.grid()?;
    let scaling = chain_lifetime_scaling(&base, &n_values, &grid)?;
    let mut bundle = ResultBundle::new("chain", Some(config));
    let mut table = Table::new("chain");
    table.numbers("N", scaling.points.iter().map(|p| p.n as f64));
    table.optional("t1e", scaling.points.iter().map(|p| p.lifetime.t_1e));
    table.optional("q_equiv", scaling.points.iter().map(|p| p.lifetime.q_equivalent));
    bundle.tables.push(table);
    bundle.extra("fit", scaling.fit);
    Ok(bundle)
}

fn lindblad(config: &ExperimentConfig, opts: RunOptions) -> Result<ResultBundle> {
    let system = config.quantum_system()?;
    let fock = config.fock_config()?;
    let grid = config.grid()?;
    let mut bundle = ResultBundle::new("lindblad", Some(config));
    if config.sweep.is_some() {
        let axes = config.sweep_axes()?;
        let (alpha, base_dphi) = config.coherent_pair()?;
        let mut dphis = vec![base_dphi];
        let mut gs = vec![system.g()];
        for axis in &axes {
            match axis.param {
                SweepParam::DeltaPhi => dphis = axis.values.clone(),
                SweepParam::G => gs = axis.values.clone(),
                other => {
                    return Err(Error::InvalidSweep(format!(
                        "the Lindblad sweep covers delta_phi and g, not `{other}`"
                    )))
                }
            }
        }
        let sweep = lindblad_lifetime_sweep(&system, &dphis, &gs, alpha, &fock, &grid)?;
        let mut table = Table::new("lindblad_sweep");
        let cells: Vec<(f64, f64, usize, usize)> = (0..gs.len())
            .flat_map(|gi| (0..dphis.len()).map(move |pi| (gi, pi)))
            .map(|(gi, pi)| (gs[gi], dphis[pi], gi, pi))
            .collect();
        table.numbers("g", cells.iter().map(|c| c.0));
        table.numbers("delta_phi", cells.iter().map(|c| c.1));
        for j in 0..2 {
            table.optional(
                &format!("t1e_cavity{}", j + 1),
                cells.iter().map(|&(_, _, gi, pi)| sweep.lifetimes[gi][pi][j].t_1e),
            );
        }
        bundle.tables.push(table);
        return Ok(bundle);
    }
    let init = config
        .initial_state()?
        .ok_or_else(|| Error::InvalidConfig("lindblad needs an initial state".into()))?;
    let run = lindblad_evolve(&system, &init, &fock, &grid)?;
    let mut table = Table::new("trajectory");
    table.numbers("time_s", run.times.iter().copied());
    for j in 0..system.modes() {
        let k = j + 1;
        table.numbers(&format!("re_a{k}"), run.mean_field[j].iter().map(|a| a.re));
        table.numbers(&format!("im_a{k}"), run.mean_field[j].iter().map(|a| a.im));
        table.numbers(&format!("n{k}"), run.mean_number[j].iter().copied());
    }
    bundle.tables.push(table);
    let lifetimes: Vec<_> = (0..system.modes())
        .map(|j| run.lifetime(j, system.frame()).ok())
        .collect();
    bundle.extra("lifetimes", lifetimes);
    bundle.extra("max_leakage", run.max_leakage);
    bundle.extra("max_trace_error", run.max_trace_error);
    bundle.extra("max_hermiticity_error", run.max_hermiticity_error);
    bundle.extra("final_min_eigenvalue", run.final_state.min_eigenvalue());
    if opts.validate {
        let traj = evolve_free(&config.model()?, &init, &grid)?;
        let deviation = traj
            .amplitudes
            .iter()
            .zip(&run.mean_field)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max);
        bundle.extra("validation_max_abs_deviation", deviation);
    }
    Ok(bundle)
}

fn eigen(config: &ExperimentConfig) -> Result<ResultBundle> {
    let model = config.model()?;
    let spectrum = eigenmodes(&model);
    let mut bundle = ResultBundle::new("eigen", Some(config));
    let mut table = Table::new("eigen");
    table.numbers("mode", (1..=spectrum.modes.len()).map(|k| k as f64));
    table.numbers("re_lambda", spectrum.modes.iter().map(|m| m.eigenvalue.re));
    table.numbers("im_lambda", spectrum.modes.iter().map(|m| m.eigenvalue.im));
    table.numbers("frequency", spectrum.modes.iter().map(|m| m.frequency));
    table.numbers("decay_rate", spectrum.modes.iter().map(|m| m.decay_rate));
    table.numbers("q_factor", spectrum.modes.iter().map(|m| m.q_factor));
    bundle.tables.push(table);
    if let Some(split) = spectrum.splitting() {
        bundle.extra("splitting", split);
        bundle.extra("delta_f", split / (2.0 * PI));
    }
    let cavities = config.cavity_params()?;
    if let (SystemKind::Direct, [c1, c2], Some(CouplingSpec::Direct { g })) =
        (config.system, cavities.as_slice(), config.coupling_spec()?)
    {
        if c1.omega() == c2.omega() {
            if let (Some(expected), Some(found)) =
                (resonant_splitting(g, c1.kappa(), c2.kappa()), spectrum.splitting())
            {
                bundle.extra(
                    "splitting_check",
                    json!({
                        "expected": expected,
                        "relative_error": (found - expected).abs() / expected,
                    }),
                );
            }
        }
    }
    Ok(bundle)
}

/// Effective coupling of a cable for the given line and port rates.
pub fn zeta_bundle(
    theta: f64,
    gamma0l0: f64,
    gamma1: f64,
    gamma2: f64,
    config: Option<&ExperimentConfig>,
) -> Result<ResultBundle> {
    let coupling = CouplingSpec::cable(theta, gamma0l0)?;
    let (c1, c2) = match config.map(|c| c.cavity_params()).transpose()?.as_deref() {
        Some([a, b]) => (
            CavityParams::new(a.omega(), a.kappa_i(), a.kappa_e(), gamma1)?,
            CavityParams::new(b.omega(), b.kappa_i(), b.kappa_e(), gamma2)?,
        ),
        _ => (
            CavityParams::new(1.0, 0.0, 0.0, gamma1)?,
            CavityParams::new(1.0, 0.0, 0.0, gamma2)?,
        ),
    };
    let eff = effective_coupling(&c1, &c2, &coupling)?;
    let mut bundle = ResultBundle::new("zeta", config);
    let mut table = Table::new("zeta");
    table.numbers("theta", [theta]);
    table.numbers("gamma0l0", [gamma0l0]);
    table.numbers("zeta", [eff.zeta]);
    table.numbers("zeta_over_pi", [eff.zeta / PI]);
    table.numbers("re_g_eff", [eff.g_eff.re]);
    table.numbers("im_g_eff", [eff.g_eff.im]);
    table.numbers("abs_g_eff", [eff.g_eff.norm()]);
    for j in 0..2 {
        table.numbers(&format!("re_delta_omega{}", j + 1), [eff.delta_omega[j].re]);
        table.numbers(&format!("im_delta_omega{}", j + 1), [eff.delta_omega[j].im]);
        table.numbers(&format!("kappa_eff{}", j + 1), [eff.kappa_eff[j]]);
    }
    bundle.tables.push(table);
    Ok(bundle)
}

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

/// A closed reader (`| head`) is not an error.
fn to_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// Writes a bundle; returns the files created. Without a path, tables go to
/// stdout and metadata is dropped.
pub fn write_bundle(bundle: &ResultBundle, path: Option<&Path>, format: OutputFormat) -> Result<Vec<PathBuf>> {
    match (format, path) {
        (OutputFormat::Json, Some(p)) => {
            let text = serde_json::to_string_pretty(bundle).map_err(|e| Error::Io(e.to_string()))?;
            atomic_write(p, &text)?;
            Ok(vec![p.to_path_buf()])
        }
        (OutputFormat::Json, None) => {
            let text = serde_json::to_string_pretty(bundle).map_err(|e| Error::Io(e.to_string()))?;
            to_stdout(&(text + "\n"))?;
            Ok(Vec::new())
        }
        (OutputFormat::Csv, Some(p)) => {
            let mut written = Vec::new();
            for table in &bundle.tables {
                let target = if bundle.tables.len() == 1 {
                    p.to_path_buf()
                } else {
                    with_suffix(p, &format!("_{}.csv", table.name))
                };
                atomic_write(&target, &table.to_csv()?)?;
                written.push(target);
            }
            let meta = with_suffix(p, ".meta.json");
            let text = serde_json::to_string_pretty(&bundle.metadata).map_err(|e| Error::Io(e.to_string()))?;
            atomic_write(&meta, &text)?;
            written.push(meta);
            Ok(written)
        }
        (OutputFormat::Csv, None) => {
            let mut text = String::new();
            for (k, table) in bundle.tables.iter().enumerate() {
                if k > 0 {
                    text.push('\n');
                }
                text.push_str(&table.to_csv()?);
            }
            to_stdout(&text)?;
            Ok(Vec::new())
        }
    }
}

/// Machine-readable error line for stderr.
pub fn error_json(err: &Error, context: Value) -> String {
    json!({
        "code": err.code(),
        "message": err.to_string(),
        "context": context,
    })
    .to_string()
}
