use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::radius::{reference_radius, track_radius};
use super::spec::{ProblemKind, ProblemSpec, RefinementMode};
use crate::error::{invalid, MoltError, Result};
use crate::grid::{uniform_grid, Field, SchemeConfig, TensorGrid};
use crate::reaction::{
    ACParams, AllenCahnSolver, FhnSolver, FixedPointConfig, ImexScheme, StepperConfig,
};
use crate::resolvent::{beta_select, imaginary_axis_samples, BetaPolicy, LaguerreCoeffs};
use crate::splitting::SplitOperator;

/// Exact solution of the problems that have one.
pub fn exact_solution(spec: &ProblemSpec, x: &[f64], t: f64) -> Result<f64> {
    match spec.problem {
        ProblemKind::Heat1D => Ok((-spec.gamma * t).exp() * x[0].sin()),
        ProblemKind::Heat2D => Ok((-2.0 * spec.gamma * t).exp() * x[0].sin() * x[1].sin()),
        ProblemKind::AllenCahn1D => {
            let z = x[0] - spec.wave_delay() - spec.wave_speed() * t;
            Ok(0.5 * (1.0 - (z / (2.0 * 2f64.sqrt() * spec.epsilon)).tanh()))
        }
        other => Err(MoltError::Unsupported(format!(
            "{other} has no exact solution"
        ))),
    }
}

enum Stepper {
    Heat(SplitOperator),
    AllenCahn(AllenCahnSolver),
    Fhn(FhnSolver),
}

/// A problem discretized at one time step.
pub struct Simulation {
    spec: ProblemSpec,
    grid: Arc<TensorGrid>,
    dt: f64,
    steps: usize,
    stepper: Stepper,
}

impl Simulation {
    pub fn new(spec: &ProblemSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {dt}")));
        }
        let steps = (spec.t_end / dt).round() as usize;
        if steps == 0 || (steps as f64 * dt - spec.t_end).abs() > 1e-9 * spec.t_end.max(1.0) {
            return Err(invalid(format!(
                "dt = {dt} does not divide t_end = {}",
                spec.t_end
            )));
        }
        let axes = spec
            .domain
            .iter()
            .zip(&spec.cells)
            .map(|(&(a, b), &n)| uniform_grid(a, b, n))
            .collect::<Result<Vec<_>>>()?;
        let grid = Arc::new(TensorGrid::new(axes)?);
        let reaction_cfg = || -> Result<StepperConfig> {
            let mut cfg = StepperConfig::with_order(spec.order, dt, spec.bc)?;
            if let Some(s) = spec.scheme {
                cfg.scheme = s;
            }
            cfg.policy = spec.policy;
            cfg.spatial_order = spec.spatial_order;
            cfg.mode = spec.split;
            cfg.fixed_point = FixedPointConfig {
                tol: spec.tol,
                max_iter: spec.max_iter,
            };
            Ok(cfg)
        };
        let stepper = match spec.problem {
            ProblemKind::Heat1D | ProblemKind::Heat2D => {
                let cfg = SchemeConfig {
                    gamma: spec.gamma,
                    dt,
                    order: spec.order,
                    beta2: beta_select(spec.order, spec.policy)?,
                    spatial_order: spec.spatial_order,
                    bc: spec.bc,
                };
                Stepper::Heat(SplitOperator::new(&grid, &cfg, spec.split)?)
            }
            ProblemKind::AllenCahn1D | ProblemKind::AllenCahn2D => Stepper::AllenCahn(
                AllenCahnSolver::new(&grid, ACParams::new(spec.epsilon)?, reaction_cfg()?)?,
            ),
            ProblemKind::FitzHughNagumo => {
                let mut cfg = reaction_cfg()?;
                if spec.scheme.is_none() {
                    cfg.scheme = ImexScheme::Trapezoidal;
                }
                Stepper::Fhn(FhnSolver::new(&grid, spec.fhn, cfg)?)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            grid,
            dt,
            steps,
            stepper,
        })
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Initial data, one field per species.
    pub fn initial_state(&self) -> Vec<Field> {
        let spec = &self.spec;
        let g = self.grid.clone();
        match spec.problem {
            ProblemKind::Heat1D | ProblemKind::Heat2D | ProblemKind::AllenCahn1D => {
                vec![Field::from_fn(g, |x| {
                    exact_solution(spec, x, 0.0).expect("exact")
                })]
            }
            ProblemKind::AllenCahn2D => {
                let c = spec.center();
                let w = 2f64.sqrt() * spec.epsilon;
                vec![Field::from_fn(g, |x| {
                    let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
                    ((spec.radius - r) / w).tanh()
                })]
            }
            ProblemKind::FitzHughNagumo => {
                // Broken plane wave: an excited half strip above a refractory quadrant.
                let c = spec.center();
                let u = Field::from_fn(g.clone(), |x| {
                    if x[0] < c[0] && x[1] > c[1] {
                        1.0
                    } else {
                        0.0
                    }
                });
                let v = Field::from_fn(g, |x| {
                    if x[0] < c[0] && x[1] <= c[1] {
                        0.1
                    } else {
                        0.0
                    }
                });
                vec![u, v]
            }
        }
    }

    pub fn step(&self, state: &[Field]) -> Result<Vec<Field>> {
        match &self.stepper {
            Stepper::Heat(op) => Ok(vec![op.step(&state[0])?]),
            Stepper::AllenCahn(s) => Ok(vec![s.step(&state[0])?]),
            Stepper::Fhn(s) => {
                let (u, v) = s.step(&state[0], &state[1])?;
                Ok(vec![u, v])
            }
        }
    }

    /// Runs from the initial data to `t_end`.
    pub fn run(&self) -> Result<Vec<Field>> {
        let mut state = self.initial_state();
        for _ in 0..self.steps {
            state = self.step(&state)?;
        }
        Ok(state)
    }
}

/// One row of a refinement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub dt: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(dt_prev / dt)`; absent on the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub mode: RefinementMode,
    pub rows: Vec<RefinementRow>,
}

impl RefinementReport {
    /// Builds rows from `(dt, error)` pairs.
    pub fn from_errors(mode: RefinementMode, errors: &[(f64, f64)]) -> Self {
        let rows = errors
            .iter()
            .enumerate()
            .map(|(i, &(dt, error))| RefinementRow {
                dt,
                error,
                order: (i > 0).then(|| {
                    let (dt0, e0) = errors[i - 1];
                    (e0 / error).ln() / (dt0 / dt).ln()
                }),
            })
            .collect();
        Self { mode, rows }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dt,error,order")?;
        for r in &self.rows {
            match r.order {
                Some(o) => writeln!(w, "{},{},{}", r.dt, r.error, o)?,
                None => writeln!(w, "{},{},", r.dt, r.error)?,
            }
        }
        Ok(())
    }
}

fn with_dt<T>(dt: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| MoltError::AtTimeStep {
        dt,
        source: Box::new(e),
    })
}

fn max_diff(a: &[Field], b: &[Field]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        m = m.max(x.max_diff(y)?);
    }
    Ok(m)
}

/// Runs the problem at every step in `ladder` and tabulates the error.
pub fn run_refinement(spec: &ProblemSpec, ladder: &[f64]) -> Result<RefinementReport> {
    if ladder.is_empty() {
        return Err(invalid("empty time-step ladder"));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("time-step ladder must be strictly decreasing"));
    }
    let mut cache: HashMap<u64, Vec<Field>> = HashMap::new();
    let mut solve = |dt: f64| -> Result<Vec<Field>> {
        if let Some(s) = cache.get(&dt.to_bits()) {
            return Ok(s.clone());
        }
        let s = with_dt(dt, Simulation::new(spec, dt).and_then(|sim| sim.run()))?;
        cache.insert(dt.to_bits(), s.clone());
        Ok(s)
    };
    let mut errors = Vec::with_capacity(ladder.len());
    for &dt in ladder {
        let u = solve(dt)?;
        let error = match spec.mode {
            RefinementMode::ExactError => {
                let exact = Field::from_fn(u[0].grid().clone(), |x| {
                    exact_solution(spec, x, spec.t_end).expect("exact")
                });
                u[0].max_diff(&exact)?
            }
            RefinementMode::SelfConvergence => max_diff(&u, &solve(0.5 * dt)?)?,
        };
        errors.push((dt, error));
    }
    Ok(RefinementReport::from_errors(spec.mode, &errors))
}

/// What [`run_problem`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub max_norms: Vec<f64>,
    /// Final-time error against the exact solution, when one exists.
    pub error: Option<f64>,
    /// `(t, tracked radius, reference radius)` until the interface is lost.
    pub radius: Vec<(f64, f64, f64)>,
    pub files: Vec<PathBuf>,
}

const SPECIES_NAMES: [&str; 2] = ["u", "v"];

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

/// Runs `spec` at `spec.dt`, writing the manifest, snapshots at the output
/// times, final norms and the radius series into `out`.
pub fn run_problem(spec: &ProblemSpec, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out)?;
    let sim = Simulation::new(spec, spec.dt)?;
    let mut files = Vec::new();
    create(out, "manifest.txt", &mut files)?.write_all(spec.manifest().as_bytes())?;

    let mut pending: Vec<f64> = spec.outputs.clone();
    pending.sort_by(f64::total_cmp);
    let snapshot = |state: &[Field], t: f64, files: &mut Vec<PathBuf>| -> Result<()> {
        for (k, f) in state.iter().enumerate() {
            let mut w = create(out, &format!("{}_t{t}.csv", SPECIES_NAMES[k]), files)?;
            f.write_csv(&mut w)?;
            w.flush()?;
        }
        Ok(())
    };
    let center = spec.center();
    let mut radius = Vec::new();
    let mut tracking = spec.track_radius;
    let mut record = |state: &[Field], t: f64, radius: &mut Vec<(f64, f64, f64)>| -> Result<()> {
        if !tracking {
            return Ok(());
        }
        match track_radius(&state[0], [center[0], center[1]]) {
            Ok(est) => {
                radius.push((
                    t,
                    est.radius(),
                    reference_radius(spec.radius, spec.epsilon, t),
                ));
                Ok(())
            }
            Err(MoltError::InterfaceLost) => {
                tracking = false;
                Ok(())
            }
            Err(e) => Err(e),
        }
    };

    let mut state = sim.initial_state();
    let dt = sim.dt();
    let mut t = 0.0;
    record(&state, t, &mut radius)?;
    while pending.first().is_some_and(|&o| o <= 0.5 * dt) {
        snapshot(&state, pending.remove(0), &mut files)?;
    }
    for n in 1..=sim.steps() {
        state = with_dt(dt, sim.step(&state))?;
        t = n as f64 * dt;
        record(&state, t, &mut radius)?;
        while pending.first().is_some_and(|&o| o <= t + 0.5 * dt) {
            snapshot(&state, pending.remove(0), &mut files)?;
        }
    }

    let max_norms = state
        .iter()
        .map(|f| f.max_norm())
        .collect::<Result<Vec<_>>>()?;
    let error = if spec.problem.has_exact_solution() {
        let exact = Field::from_fn(sim.grid().clone(), |x| {
            exact_solution(spec, x, t).expect("exact")
        });
        Some(state[0].max_diff(&exact)?)
    } else {
        None
    };
    let mut w = create(out, "norms.csv", &mut files)?;
    writeln!(w, "species,max_norm,error")?;
    for (k, m) in max_norms.iter().enumerate() {
        match (k, error) {
            (0, Some(e)) => writeln!(w, "{},{m},{e}", SPECIES_NAMES[k])?,
            _ => writeln!(w, "{},{m},", SPECIES_NAMES[k])?,
        }
    }
    w.flush()?;
    if spec.track_radius {
        let mut w = create(out, "radius.csv", &mut files)?;
        writeln!(w, "t,radius,reference")?;
        for (t, r, e) in &radius {
            writeln!(w, "{t},{r},{e}")?;
        }
        w.flush()?;
    }
    Ok(RunSummary {
        steps: sim.steps(),
        final_time: t,
        max_norms,
        error,
        radius,
        files,
    })
}

/// Writes `|phi(iy)|` on log-spaced `y` in `[1e-3, 1e6]` as CSV rows
/// `P,policy,beta2,y,abs_phi`.
pub fn write_stability_csv<W: Write>(
    mut w: W,
    orders: &[usize],
    policy: BetaPolicy,
    samples: usize,
) -> Result<()> {
    writeln!(w, "P,policy,beta2,y,abs_phi")?;
    for &p in orders {
        let c = LaguerreCoeffs::with_policy(p, policy)?;
        for s in imaginary_axis_samples(&c, 1e-3, 1e6, samples)? {
            writeln!(w, "{p},{policy},{},{},{}", c.beta2(), s.z.im, s.phi.norm())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str, cells: usize) -> ProblemSpec {
        let mut spec = ProblemSpec::preset(name).unwrap();
        spec.cells = vec![cells; spec.problem.ndim()];
        spec
    }

    #[test]
    fn exact_solution_values() {
        let heat = ProblemSpec::preset("heat1d").unwrap();
        let x = 1.234;
        let want = (-0.18f64 * 0.18 * 4.0).exp() * f64::sin(x);
        assert!((exact_solution(&heat, &[x], 4.0).unwrap() - want).abs() < 1e-15);
        let heat2 = ProblemSpec::preset("heat2d").unwrap();
        let p = [0.7, 2.1];
        let v0 = exact_solution(&heat2, &p, 0.0).unwrap();
        assert!((v0 - 0.7f64.sin() * 2.1f64.sin()).abs() < 1e-15);
        let ac = ProblemSpec::preset("ac1d").unwrap();
        assert!((exact_solution(&ac, &[1.5], ac.t_end).unwrap() - 0.5).abs() < 1e-15);
        let fhn = ProblemSpec::preset("fhn").unwrap();
        assert!(matches!(
            exact_solution(&fhn, &[0.0, 0.0], 1.0),
            Err(MoltError::Unsupported(_))
        ));
    }

    #[test]
    fn orders_are_log_ratios() {
        let r = RefinementReport::from_errors(
            RefinementMode::ExactError,
            &[(0.1, 1.6255e-6), (0.05, 4.0841e-7), (0.02, 1e-8)],
        );
        assert_eq!(r.rows[0].order, None);
        let o1 = r.rows[1].order.unwrap();
        assert!((o1 - (1.6255e-6f64 / 4.0841e-7).log2()).abs() < 1e-12);
        let o2 = r.rows[2].order.unwrap();
        assert!((o2 - (40.841f64).ln() / 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_rung_has_no_order() {
        let mut spec = small("heat1d", 64);
        spec.t_end = 0.2;
        let r = run_refinement(&spec, &[0.1]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].order, None);
    }

    #[test]
    fn ladder_must_divide_and_decrease() {
        let spec = small("heat1d", 64);
        assert!(run_refinement(&spec, &[0.05, 0.1]).is_err());
        let err = run_refinement(&spec, &[0.3]).unwrap_err();
        assert!(matches!(err, MoltError::AtTimeStep { .. }));
        assert!(run_refinement(&spec, &[]).is_err());
    }

    #[test]
    fn run_problem_is_deterministic_and_writes_outputs() {
        let mut spec = small("ac_circle", 64);
        spec.t_end = 0.256;
        spec.outputs = vec![0.0, 0.128];
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = run_problem(&spec, a.path()).unwrap();
        run_problem(&spec, b.path()).unwrap();
        assert_eq!(sa.steps, 10);
        for name in [
            "manifest.txt",
            "u_t0.csv",
            "u_t0.128.csv",
            "norms.csv",
            "radius.csv",
        ] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        assert_eq!(sa.radius.len(), 11);
        assert!(sa.radius.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn empty_schedule_writes_only_norms() {
        let mut spec = small("heat2d", 32);
        spec.t_end = 0.1;
        let dir = tempfile::tempdir().unwrap();
        let s = run_problem(&spec, dir.path()).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["manifest.txt", "norms.csv"]);
        assert!(s.error.unwrap() < 1e-3);
    }

    #[test]
    fn stability_csv_shape() {
        let mut buf = Vec::new();
        write_stability_csv(&mut buf, &[1, 2], BetaPolicy::StiffDecay, 16).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 33);
        assert_eq!(lines[0], "P,policy,beta2,y,abs_phi");
        assert!(lines[1].starts_with("1,stiff_decay,1,0.001"));
    }
}
