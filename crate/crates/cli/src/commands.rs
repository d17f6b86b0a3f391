use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nhzeno::dynamics::{StateVector, StepPropagator};
use nhzeno::indicators::{evaluate, IndicatorConfig, ZenoThresholds};
use nhzeno::lindblad::{IntegratorOptions, OpenSystemJson, OpenSystemModel};
use nhzeno::model::{DiagonalEntry, NonHermitianHamiltonian};
use nhzeno::numerics::{c, CVec};
use nhzeno::perturbation::compare_with_exact;
use nhzeno::sweep::{run_sweep, Axis, AxisScale, Execution, Family, Indicator, SweepSpec};
use serde_json::json;

use crate::args::{
    Format, GridArgs, IndicatorArgs, LindbladArgs, ModelArgs, OutputArgs, PerturbArgs, PropagateArgs, Scale, SweepArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed model files.
    Usage(String),
    /// Numerical failure, failed check or unwritable output.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<nhzeno::Error> for CliError {
    fn from(e: nhzeno::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(e: nhzeno::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn load_json(path: &Path) -> CliResult<OpenSystemJson> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid model file {}: {e}", path.display())))
}

/// Model file with `--delta/--phi` applied to every decaying level.
fn model_file(args: &ModelArgs, path: &Path) -> CliResult<OpenSystemJson> {
    let mut j = load_json(path)?;
    match (args.delta, args.phi) {
        (Some(d), Some(p)) => {
            let entry = DiagonalEntry::new(d, p).map_err(usage)?;
            j.diag_a.iter_mut().for_each(|e| *e = entry);
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Usage(
                "--delta and --phi must be given together with --model".into(),
            ))
        }
    }
    Ok(j)
}

fn hamiltonian(args: &ModelArgs) -> CliResult<NonHermitianHamiltonian> {
    match &args.model {
        Some(path) => model_file(args, path)?.hamiltonian().map_err(usage),
        None => {
            let delta = args
                .delta
                .ok_or_else(|| CliError::Usage("--delta is required without --model".into()))?;
            let phi = args
                .phi
                .ok_or_else(|| CliError::Usage("--phi is required without --model".into()))?;
            NonHermitianHamiltonian::three_state(delta, phi, args.g1, args.g2, args.epsilon, args.omega).map_err(usage)
        }
    }
}

fn initial_state(args: &ModelArgs, dim: usize, first_b: usize) -> CliResult<StateVector> {
    let Some(spec) = args.initial.as_deref() else {
        return StateVector::basis(dim, first_b).map_err(usage);
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() == 1 {
        let k: usize = parts[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid --initial {spec:?}")))?;
        if k == 0 || k > dim {
            return Err(CliError::Usage(format!("--initial label {k} outside 1..={dim}")));
        }
        return StateVector::basis(dim, k - 1).map_err(usage);
    }
    if parts.len() != dim {
        return Err(CliError::Usage(format!(
            "--initial has {} amplitudes, model dimension is {dim}",
            parts.len()
        )));
    }
    let amps = parts
        .iter()
        .map(|p| p.parse::<f64>().map(|x| c(x, 0.0)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("invalid --initial {spec:?}")))?;
    StateVector::new(CVec::from(amps))
        .and_then(|s| s.normalized())
        .map_err(usage)
}

fn indicator_config(grid: &GridArgs, initial: StateVector) -> CliResult<IndicatorConfig> {
    IndicatorConfig::new(grid.horizon, grid.n_time, initial).map_err(usage)
}

fn emit(out: &OutputArgs, text: &str) -> CliResult {
    match &out.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serialises");
    s.push('\n');
    s
}

pub fn propagate(a: &PropagateArgs) -> CliResult {
    let h = hamiltonian(&a.model)?;
    let cfg = indicator_config(&a.grid, initial_state(&a.model, h.dim(), h.dim_a())?)?;
    let psi = StepPropagator::new(&h.assemble(), cfg.dt())?.trajectory(cfg.initial_state(), cfg.n_time())?;
    let psi0 = StepPropagator::new(&h.unperturbed(), cfg.dt())?.trajectory(cfg.initial_state(), cfg.n_time())?;
    let times = cfg.times();
    let b = h.b_range();
    let norm = |v: &CVec| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let pop = |v: &CVec| b.clone().map(|k| v[k].norm_sqr()).sum::<f64>();

    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("t");
            for name in ["psi", "psi0"] {
                for k in 1..=h.dim() {
                    write!(s, ",re_{name}_{k},im_{name}_{k}").unwrap();
                }
            }
            s.push_str(",norm,norm0,pop_B,pop0_B\n");
            for ((t, v), v0) in times.iter().zip(&psi).zip(&psi0) {
                write!(s, "{t:.16e}").unwrap();
                for z in v.iter().chain(v0.iter()) {
                    write!(s, ",{:.16e},{:.16e}", z.re, z.im).unwrap();
                }
                writeln!(
                    s,
                    ",{:.16e},{:.16e},{:.16e},{:.16e}",
                    norm(v),
                    norm(v0),
                    pop(v),
                    pop(v0)
                )
                .unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({
            "t": times,
            "psi": psi.iter().map(|v| v.to_vec()).collect::<Vec<_>>(),
            "psi0": psi0.iter().map(|v| v.to_vec()).collect::<Vec<_>>(),
            "norm": psi.iter().map(norm).collect::<Vec<_>>(),
            "norm0": psi0.iter().map(norm).collect::<Vec<_>>(),
            "pop_B": psi.iter().map(pop).collect::<Vec<_>>(),
            "pop0_B": psi0.iter().map(pop).collect::<Vec<_>>(),
        })),
    };
    emit(&a.output, &text)
}

pub fn lindblad_check(a: &LindbladArgs) -> CliResult {
    let (model, dim_a) = match &a.model.model {
        Some(path) => {
            let j = model_file(&a.model, path)?;
            let dim_a = j.dim_a;
            (OpenSystemModel::try_from(j)?, dim_a)
        }
        None => {
            let h = hamiltonian(&a.model)?;
            (OpenSystemModel::from_hamiltonian(&h, &[a.ground])?, h.dim_a())
        }
    };
    let rho0 = initial_state(&a.model, model.dim_r(), dim_a)?.projector();
    let opts = IntegratorOptions {
        dt: a.dt,
        ..Default::default()
    };
    let dev = model.equivalence_check(&rho0, a.t_final, a.samples, &opts)?;
    let pass = dev <= a.threshold;
    let text = match a.output.format {
        Format::Csv => format!("max_deviation,threshold,pass\n{dev:.16e},{:.16e},{pass}\n", a.threshold),
        Format::Json => pretty(&json!({ "max_deviation": dev, "threshold": a.threshold, "pass": pass })),
    };
    emit(&a.output, &text)?;
    let verdict = if pass { "PASS" } else { "FAIL" };
    eprintln!("{verdict}: max deviation {dev:.3e} (threshold {:.1e})", a.threshold);
    if pass {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "deviation {dev:.3e} exceeds {:.1e}",
            a.threshold
        )))
    }
}

pub fn perturb(a: &PerturbArgs) -> CliResult {
    let h = hamiltonian(&a.model)?;
    let sep = h.separation()?;
    let rows = compare_with_exact(&h)?;
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from(
                "label,exact_re,exact_im,first_re,first_im,second_re,second_im,first_error,second_error,effective_decay\n",
            );
            for r in &rows {
                let decay = r.effective_decay.map(|d| format!("{d:.16e}")).unwrap_or_default();
                writeln!(
                    s,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{decay}",
                    r.label,
                    r.exact.re,
                    r.exact.im,
                    r.first_order.re,
                    r.first_order.im,
                    r.second_order.re,
                    r.second_order.im,
                    r.first_order_error,
                    r.second_order_error
                )
                .unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({ "separation": sep, "eigenvalues": rows })),
    };
    emit(&a.output, &text)?;
    eprintln!(
        "separation: delta = {:.6e}, max |C| = {:.6e}, ratio = {:.6e}",
        sep.delta_gap, sep.c_max, sep.ratio
    );
    Ok(())
}

pub fn indicators(a: &IndicatorArgs) -> CliResult {
    let h = hamiltonian(&a.model)?;
    let th = ZenoThresholds {
        ezd: a.ezd_threshold,
        anti_zeno: a.anti_zeno_threshold,
    };
    let cfg = indicator_config(&a.grid, initial_state(&a.model, h.dim(), h.dim_a())?)?.with_thresholds(th);
    let tr = evaluate(&h, &cfg)?;
    let f_bar = tr.f_bar.ok();
    let f_bar_error = tr.f_bar.err().map(|l| nhzeno::Error::from(l).to_string());
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("t,f_raw,f_norm,f_zeta\n");
            for k in 0..tr.times.len() {
                let fn_k = tr.f_norm.as_ref().map_or(f64::NAN, |v| v[k]);
                writeln!(
                    s,
                    "{:.16e},{:.16e},{fn_k:.16e},{:.16e}",
                    tr.times[k], tr.f_raw[k], tr.f_tilde_integrand[k]
                )
                .unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({
            "F": tr.f,
            "F_bar": f_bar,
            "F_bar_error": f_bar_error,
            "F_tilde": tr.f_tilde,
            "masked": tr.masked,
            "zeno_class": tr.zeno_class.as_str(),
            "t": tr.times,
            "f_raw": tr.f_raw,
            "f_norm": tr.f_norm,
            "f_zeta": tr.f_tilde_integrand,
        })),
    };
    emit(&a.output, &text)?;
    let fb = f_bar.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
    eprintln!(
        "F = {:.6}, F_bar = {fb}, F_tilde = {:.6}, masked = {:.6}, class = {}",
        tr.f,
        tr.f_tilde,
        tr.masked,
        tr.zeno_class.as_str()
    );
    if let Some(e) = f_bar_error {
        eprintln!("warning: {e}");
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CliResult {
    if a.model.delta.is_some() || a.model.phi.is_some() {
        return Err(CliError::Usage(
            "sweep takes --delta-*/--phi-* axis flags, not --delta/--phi".into(),
        ));
    }
    let family = match &a.model.model {
        Some(path) => Family::Model {
            hamiltonian: load_json(path)?.hamiltonian().map_err(usage)?,
        },
        None => Family::ThreeState {
            g1: a.model.g1,
            g2: a.model.g2,
            epsilon: a.model.epsilon,
            omega: a.model.omega,
        },
    };
    // a probe model fixes the dimension and the B block for the default state
    let probe = family
        .build(
            a.delta_max.max(f64::MIN_POSITIVE),
            a.phi_min.clamp(0.0, std::f64::consts::PI),
        )
        .map_err(usage)?;
    let cfg = indicator_config(&a.grid, initial_state(&a.model, probe.dim(), probe.dim_a())?)?;
    let scale = match a.delta_scale {
        Scale::Linear => AxisScale::Linear,
        Scale::Log => AxisScale::Log,
    };
    let delta = Axis::new(a.delta_min, a.delta_max, a.delta_n, scale).map_err(usage)?;
    let phi = Axis::linear(a.phi_min, a.phi_max, a.phi_n).map_err(usage)?;
    let which = a
        .which
        .iter()
        .map(|w| Indicator::parse(w))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let spec = SweepSpec::new(delta, phi, family, cfg, which).map_err(usage)?;
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let grid = run_sweep(&spec, exec)?;
    let text = match a.output.format {
        Format::Csv => grid.to_csv(),
        Format::Json => grid.to_json()? + "\n",
    };
    emit(&a.output, &text)?;
    let (nd, np) = grid.shape();
    let summary: Vec<String> = grid
        .summary()
        .iter()
        .map(|s| format!("{} in [{:.6}, {:.6}]", s.indicator.name(), s.min, s.max))
        .collect();
    eprintln!(
        "{nd}x{np} cells; {}; {} failed cells",
        summary.join(", "),
        grid.errors.len()
    );
    for e in &grid.errors {
        eprintln!(
            "  cell (delta #{}, phi #{}): {}",
            e.delta_index + 1,
            e.phi_index + 1,
            e.message
        );
    }
    Ok(())
}
