use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use faccs::closure::{analyze_z, AnalysisReport};
use faccs::cones::{analyze_k, default_samples};
use faccs::dynamics::{conservation_drift, integrate_with, ControlLaw, GroupState, IntegrateOptions, Kirchhoff};
use faccs::exec::{init_threads, Execution};
use faccs::liealg::AlgebraVector;
use faccs::selftest;
use faccs::tracking::{sweep, TrackOptions, TrackResult, TrackSummary};
use nalgebra::Matrix3;
use serde::Serialize;

use crate::args::{AnalyzeArgs, SelftestArgs, SimulateArgs, TrackArgs};
use crate::{controls, curves, spec, Cli, CliError, Command, Exit, SCHEMA_VERSION};

type Out<'a> = &'a mut dyn Write;

/// Runs one command, writing the human-readable report to `out`.
pub fn run(cli: Cli, out: Out) -> Result<Exit, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        init_threads(n);
    }
    match cli.command {
        Command::Analyze(a) => analyze(&a, out),
        Command::Simulate(a) => simulate(&a, out),
        Command::Track(a) => track(&a, out),
        Command::Selftest(a) => selftest(&a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn io(e: std::io::Error) -> CliError {
    CliError::Core(e.into())
}

#[derive(Debug, Serialize)]
pub struct AnalysisDocument {
    pub schema: &'static str,
    pub schema_version: u32,
    pub system: String,
    pub dim: usize,
    pub controls: usize,
    pub l_max: usize,
    pub z: AnalysisReport,
    pub k: Option<AnalysisReport>,
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_report(out: Out, r: &AnalysisReport) -> std::io::Result<()> {
    let span = if r.method == "K" { "lin" } else { "span" };
    writeln!(out, "  l  {span:>4}  lie  cond3  drift  members")?;
    for l in &r.levels {
        let c3 = l.condition3_holds.map_or("-", yes);
        writeln!(out, "{:>3}  {:>4}  {:>3}  {:>5}  {:>5}  {:>7}", l.l, l.span_dim, l.lie_dim, c3, yes(l.drift_in_span), l.members)?;
    }
    if let Some(cones) = &r.cones {
        writeln!(out, "  l  rays  lineality  hull  subspace")?;
        for c in cones {
            writeln!(out, "{:>3}  {:>4}  {:>9}  {:>4}  {:>8}", c.l, c.rays, c.lineality_dim, c.hull_dim, yes(c.is_subspace))?;
        }
    }
    let levels: Vec<String> = r.qualifying_levels.iter().map(usize::to_string).collect();
    match r.witness_level {
        Some(w) => writeln!(out, "verdict ({}): {} at level {w} (qualifying: {})", r.method, r.verdict, levels.join(", ")),
        None => writeln!(out, "verdict ({}): {}", r.method, r.verdict),
    }
}

pub fn analyze(a: &AnalyzeArgs, out: Out) -> Result<Exit, CliError> {
    let s = spec::load(&a.spec)?;
    let sys = &s.system;
    let z = analyze_z(sys, a.lmax)?;
    let k = if a.cones {
        let samples = a.samples.unwrap_or_else(|| default_samples(sys.dim()));
        Some(analyze_k(sys, a.lmax.max(1), samples, Execution::Parallel)?)
    } else {
        None
    };
    writeln!(out, "system {} (dim {}, {} controls)", s.name, sys.dim(), sys.controls().len()).map_err(io)?;
    print_report(out, &z).map_err(io)?;
    if let Some(k) = &k {
        print_report(out, k).map_err(io)?;
    }
    let positive = z.verdict.is_positive() || k.as_ref().is_some_and(|k| k.verdict.is_positive());
    if let Some(path) = &a.json {
        let doc = AnalysisDocument {
            schema: "faccs.analysis",
            schema_version: SCHEMA_VERSION,
            system: s.name.clone(),
            dim: sys.dim(),
            controls: sys.controls().len(),
            l_max: a.lmax,
            z,
            k,
        };
        write_json(path, &doc)?;
    }
    Ok(if positive { Exit::Success } else { Exit::Inconclusive })
}

pub fn simulate(a: &SimulateArgs, out: Out) -> Result<Exit, CliError> {
    let s = spec::load(&a.spec)?;
    let model = Kirchhoff::new(&s.system)?;
    let u = controls::parse(a.u.as_deref(), model.controls())?;
    let xi0 = match &a.v0 {
        Some(v) => {
            let v = controls::parse_list(v)?;
            if v.len() != 6 {
                return Err(CliError::Usage(format!("--v0 needs 6 components, got {}", v.len())));
            }
            AlgebraVector::from_slice(&v)
        }
        None => AlgebraVector::zeros(6),
    };
    let (pi, p) = model.impulse_of(&xi0)?.split3();
    let s0 = GroupState::new(Matrix3::identity(), nalgebra::Vector3::zeros(), pi, p)?;
    let opts = IntegrateOptions {
        method: a.method.into(),
        record_every: 1,
    };
    let law: &dyn ControlLaw = u.law();
    let traj = integrate_with(&model, &s0, law, a.t_final, a.dt, opts)?;
    let last = traj.last().expect("trajectory has its initial state");
    writeln!(out, "system {}: {} steps to t = {}", s.name, traj.len() - 1, a.t_final).map_err(io)?;
    writeln!(out, "final position {:.6} {:.6} {:.6}", last.r.x, last.r.y, last.r.z).map_err(io)?;
    if u.is_zero() {
        let d = conservation_drift(&model, &traj);
        writeln!(out, "energy drift {:.3e}", d.energy).map_err(io)?;
        writeln!(out, "|P|^2 drift {:.3e}", d.p_squared).map_err(io)?;
        writeln!(out, "Pi.P drift {:.3e}", d.pi_dot_p).map_err(io)?;
        writeln!(out, "orthogonality defect {:.3e}", d.orthogonality).map_err(io)?;
    }
    if let Some(path) = &a.out {
        let w = create(path)?;
        traj.write_csv(w)?;
    }
    Ok(Exit::Success)
}

/// One entry of the sweep in `summary.json`.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum RunRecord {
    Done(TrackSummary),
    Failed { omega_osc: f64, error: String },
}

#[derive(Debug, Serialize)]
pub struct TrackDocument {
    pub schema: &'static str,
    pub schema_version: u32,
    pub system: String,
    pub curve: String,
    pub epsilon: Option<f64>,
    pub runs: Vec<RunRecord>,
    /// Index of the run with the smallest maximum error.
    pub best: Option<usize>,
    pub best_error: Option<f64>,
    pub within_tolerance: bool,
}

fn write_run(dir: &Path, i: usize, r: &TrackResult) -> Result<(), CliError> {
    let path = dir.join(format!("run-{i}.csv"));
    let w = create(&path)?;
    match &r.trajectory {
        Some(traj) => traj.write_csv(w)?,
        None => {
            // Non-se(3) systems: configuration entries row-major, then controls.
            let mut w = csv::Writer::from_writer(w);
            let n = r.realized.configs.first().map_or(0, |g| g.nrows());
            let k = r.controls.len();
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).flat_map(|i| (1..=n).map(move |j| format!("g{i}{j}"))));
            header.extend((1..=k).map(|a| format!("u{a}")));
            w.write_record(&header).map_err(faccs::Error::from)?;
            for (t, g) in r.realized.times.iter().zip(&r.realized.configs) {
                let mut row = vec![*t];
                row.extend((0..n).flat_map(|i| (0..n).map(move |j| g[(i, j)])));
                row.extend(r.controls.eval(*t));
                w.write_record(row.iter().map(|x| format!("{x:.17e}"))).map_err(faccs::Error::from)?;
            }
            w.flush().map_err(io)?;
        }
    }
    let path = dir.join(format!("run-{i}-error.csv"));
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["t", "error"]).map_err(faccs::Error::from)?;
    for (t, e) in r.times.iter().zip(&r.errors) {
        w.write_record([format!("{t:.17e}"), format!("{e:.17e}")]).map_err(faccs::Error::from)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn track(a: &TrackArgs, out: Out) -> Result<Exit, CliError> {
    if a.sweep == 0 {
        return Err(CliError::Usage("--sweep must be at least 1".into()));
    }
    if !(a.omega > 0.0 && a.omega.is_finite()) {
        return Err(CliError::Usage(format!("--omega must be positive, got {}", a.omega)));
    }
    let s = spec::load(&a.spec)?;
    let sys = &s.system;
    let curve = curves::resolve(sys, &a.curve)?;
    let eps = a.eps.unwrap_or(f64::INFINITY);
    let opts = TrackOptions {
        omega_osc: a.omega,
        mech_factor: a.mech_factor,
        steps_per_period: a.steps_per_period,
        l_max: a.lmax,
        method: a.method.into(),
        route: a.route.map(Into::into),
        ..TrackOptions::default()
    };
    let omegas: Vec<f64> = (0..a.sweep).map(|i| a.omega * f64::powi(2.0, i as i32)).collect();
    let results = sweep(sys, curve, eps, &opts, &omegas, Execution::Parallel);

    if results.iter().all(Result::is_err) {
        let first = results.into_iter().find_map(Result::err).expect("at least one run");
        return Err(first.into());
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.display().to_string(),
            source,
        })?;
    }

    writeln!(out, "system {}, curve {}", s.name, a.curve).map_err(io)?;
    writeln!(out, "{:>12}  {:>12}  {:>10}  {:>10}  route", "omega", "max error", "kinematic", "mechanical").map_err(io)?;
    let mut runs = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, (w, r)) in omegas.iter().zip(&results).enumerate() {
        match r {
            Ok(r) => {
                let m = &r.summary;
                let route = serde_json::to_value(m.route)?;
                writeln!(
                    out,
                    "{:>12.3}  {:>12.4e}  {:>10.3e}  {:>10.3e}  {}",
                    w,
                    m.max_error,
                    m.budget.kinematic,
                    m.budget.mechanical,
                    route.as_str().unwrap_or("")
                )
                .map_err(io)?;
                if best.is_none_or(|(_, e)| m.max_error < e) {
                    best = Some((i, m.max_error));
                }
                if let Some(dir) = &a.out {
                    write_run(dir, i, r)?;
                }
                runs.push(RunRecord::Done(m.clone()));
            }
            Err(e) => {
                writeln!(out, "{w:>12.3}  failed: {e}").map_err(io)?;
                runs.push(RunRecord::Failed {
                    omega_osc: *w,
                    error: e.to_string(),
                });
            }
        }
    }
    let within = best.is_some_and(|(_, e)| e < eps);
    if let Some((i, e)) = best {
        writeln!(out, "best: omega {:.3} with max error {e:.4e}", omegas[i]).map_err(io)?;
    }
    if let Some(dir) = &a.out {
        let doc = TrackDocument {
            schema: "faccs.track",
            schema_version: SCHEMA_VERSION,
            system: s.name.clone(),
            curve: a.curve.clone(),
            epsilon: a.eps,
            runs,
            best: best.map(|b| b.0),
            best_error: best.map(|b| b.1),
            within_tolerance: within,
        };
        write_json(&dir.join("summary.json"), &doc)?;
    }
    Ok(if within { Exit::Success } else { Exit::NumericalFailure })
}

pub fn selftest(a: &SelftestArgs, out: Out) -> Result<Exit, CliError> {
    let report = match &a.spec {
        Some(p) => {
            let s = spec::load(p)?;
            selftest::check(s.exact.algebra(), &selftest::table_inertia(), &selftest::symmetric_inertia())?
        }
        None => selftest::run(),
    };
    for m in &report.mismatches {
        writeln!(out, "mismatch {m}").map_err(io)?;
    }
    if report.passed() {
        writeln!(out, "selftest: {} checks passed", report.checks).map_err(io)?;
        Ok(Exit::Success)
    } else {
        writeln!(out, "selftest: {} of {} checks failed", report.mismatches.len(), report.checks).map_err(io)?;
        Ok(Exit::SelfTestMismatch)
    }
}
