//! Scenario execution and suite runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use fixpoint_core::bellman::{check_im_condition, value_iterate, BellmanError, BoundedFunction};
use fixpoint_core::certify::{
    certify_banach, certify_caristi, certify_gauge_contraction, certify_mt, certify_multi_pair_potential,
    certify_multivalued_gauge, certify_nonexpansive, certify_pair_potential, certify_weak_contraction, Certificate,
    CertifyError, CertifyOptions, Condition, MapKind, MapSpec,
};
use fixpoint_core::gauge::{complement_gauge, product_gauge, Gauge};
use fixpoint_core::metric::{FiniteMetricSpace, Point};
use fixpoint_core::potential::{build_potential_from_gauge, Upgrade};
use fixpoint_core::random;
use fixpoint_core::solver::{
    brute_force_fixed_points, caristi_descent_solve, multi_orbit_solve, picard_solve, verify_telescoping,
    OrbitStatus, OrbitTrace, SolveError,
};

use crate::report::{
    BellmanRecord, CertificateRecord, ConditionRecord, OracleRecord, Report, SolveRecord, TelescopeRecord,
};
use crate::scenario::{
    resolve_bellman, resolve_map, resolve_potential, resolve_space, Action, Expect, Overrides, ResolvedPotential,
    ResolvedSpace, Scenario, ScenarioError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_GATE: i32 = 4;

#[derive(Debug)]
enum Failure {
    Assertion(String),
    Validation(String),
    Gate(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<CertifyError> for Failure {
    fn from(e: CertifyError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Gate(_) => Failure::Gate(e.to_string()),
            SolveError::Selection { .. } | SolveError::CaristiStep { .. } | SolveError::CaristiTotal { .. } => {
                Failure::Assertion(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<BellmanError> for Failure {
    fn from(e: BellmanError) -> Self {
        match e {
            BellmanError::Contraction { .. } => Failure::Assertion(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// What a scenario run produced, for exit codes and suite rows.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub name: String,
    pub action: String,
    pub exit_code: i32,
    pub passed: bool,
    pub key_constant: Option<f64>,
    pub iterations: Option<usize>,
    pub message: Option<String>,
    pub report_path: Option<PathBuf>,
    pub wall_ms: f64,
}

struct Run<'a> {
    sc: &'a Scenario,
    report: Report,
    trace: Vec<serde_json::Value>,
    key_constant: Option<f64>,
    iterations: Option<usize>,
}

pub fn run_scenario(path: &Path, out_dir: &Path, overrides: &Overrides) -> RunResult {
    let started = Instant::now();
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let fail = |name: String, action: String, code: i32, msg: String| RunResult {
        name,
        action,
        exit_code: code,
        passed: false,
        key_constant: None,
        iterations: None,
        message: Some(msg),
        report_path: None,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let (mut sc, bytes) = match Scenario::load(path) {
        Ok(v) => v,
        Err(e) => return fail(stem, String::new(), EXIT_PARSE, e.to_string()),
    };
    sc.apply(overrides);
    if let Err(e) = fs::create_dir_all(out_dir) {
        return fail(sc.name.clone(), sc.action.name().into(), EXIT_PARSE, e.to_string());
    }
    let sha = hex::encode(Sha256::digest(&bytes));
    let mut run = Run {
        sc: &sc,
        report: Report::new(&sc.name, &sha, sc.action.name()),
        trace: Vec::new(),
        key_constant: None,
        iterations: None,
    };
    let outcome = match sc.action {
        Action::Certify => run.certify(),
        Action::Solve => run.solve(),
        Action::Bellman => run.bellman(),
        Action::Oracle => run.oracle(),
    };
    let (code, label, message) = match outcome {
        Ok(None) => (EXIT_OK, "ok", None),
        Ok(Some(msg)) => (EXIT_ASSERTION, "assertion_failure", Some(msg)),
        Err(Failure::Assertion(m)) => (EXIT_ASSERTION, "assertion_failure", Some(m)),
        Err(Failure::Validation(m)) => (EXIT_VALIDATION, "validation_error", Some(m)),
        Err(Failure::Gate(m)) => (EXIT_GATE, "gate_refusal", Some(m)),
    };
    let Run {
        mut report,
        trace,
        key_constant,
        iterations,
        ..
    } = run;
    report.passed = code == EXIT_OK;
    report.exit_code = code;
    report.outcome = label.to_owned();
    report.message = message.clone();

    let io = (|| -> std::io::Result<PathBuf> {
        if !trace.is_empty() {
            let name = sc.trace_name();
            let mut text = String::new();
            for line in &trace {
                text.push_str(&line.to_string());
                text.push('\n');
            }
            fs::write(out_dir.join(&name), text)?;
            report.trace = Some(name);
        }
        let report_path = out_dir.join(sc.report_name());
        report.write(&report_path)?;
        Ok(report_path)
    })();
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    match io {
        Ok(report_path) => RunResult {
            name: sc.name.clone(),
            action: sc.action.name().into(),
            exit_code: code,
            passed: code == EXIT_OK,
            key_constant,
            iterations,
            message,
            report_path: Some(report_path),
            wall_ms,
        },
        Err(e) => fail(sc.name.clone(), sc.action.name().into(), EXIT_PARSE, e.to_string()),
    }
}

fn point_json(rs: &ResolvedSpace, p: Point) -> serde_json::Value {
    match rs.coord(p) {
        Some(c) => json!({ "index": p.0, "coord": c }),
        None => json!({ "index": p.0, "label": rs.space.label(p) }),
    }
}

impl Run<'_> {
    fn options(&self) -> Result<CertifyOptions, Failure> {
        Ok(CertifyOptions {
            slack: self.sc.slack(),
            grid: self.sc.check_grid()?,
        })
    }

    fn space_and_map(&self) -> Result<(ResolvedSpace, MapSpec), Failure> {
        let space = self
            .sc
            .space
            .as_ref()
            .ok_or_else(|| Failure::Validation("scenario needs `space`".into()))?;
        let map = self
            .sc
            .map
            .as_ref()
            .ok_or_else(|| Failure::Validation("scenario needs `map`".into()))?;
        let rs = resolve_space(space)?;
        let map = resolve_map(map, &rs)?;
        Ok((rs, map))
    }

    fn gauge(&self, space: &FiniteMetricSpace, opts: &CertifyOptions) -> Result<Gauge, Failure> {
        let spec = self
            .sc
            .gauge
            .as_ref()
            .ok_or_else(|| Failure::Validation("condition needs `gauge`".into()))?;
        Ok(spec.build(&opts.grid_for(space))?)
    }

    fn potential(&self, rs: &ResolvedSpace, opts: &CertifyOptions) -> Result<ResolvedPotential, Failure> {
        let spec = self
            .sc
            .potential
            .as_ref()
            .ok_or_else(|| Failure::Validation("condition needs `potential`".into()))?;
        Ok(resolve_potential(spec, rs, &opts.grid_for(&rs.space))?)
    }

    fn run_certificate(
        &self,
        condition: Condition,
        rs: &ResolvedSpace,
        map: &MapSpec,
        opts: &CertifyOptions,
    ) -> Result<Certificate, Failure> {
        let space = &rs.space;
        let cert = match condition {
            Condition::Banach => certify_banach(space, map)?,
            Condition::NonExpansive => certify_nonexpansive(space, map, opts)?,
            Condition::GaugeContraction => certify_gauge_contraction(space, map, &self.gauge(space, opts)?, opts)?,
            Condition::MultivaluedGauge => certify_multivalued_gauge(space, map, &self.gauge(space, opts)?, opts)?,
            Condition::MizoguchiTakahashi => certify_mt(space, map, &self.gauge(space, opts)?, opts)?,
            Condition::WeakContraction => certify_weak_contraction(space, map, &self.gauge(space, opts)?, opts)?,
            Condition::Caristi => match self.potential(rs, opts)? {
                ResolvedPotential::Point(phi) => certify_caristi(space, map, &phi, opts)?,
                ResolvedPotential::Pair(_) => return Err(Failure::Validation("caristi needs a point potential".into())),
            },
            Condition::PairPotential | Condition::MultiPairPotential => match self.potential(rs, opts)? {
                ResolvedPotential::Pair(phi) if condition == Condition::PairPotential => {
                    certify_pair_potential(space, map, &phi, opts)?
                }
                ResolvedPotential::Pair(phi) => certify_multi_pair_potential(space, map, &phi, opts)?,
                ResolvedPotential::Point(_) => {
                    return Err(Failure::Validation(format!("{condition} needs a pair potential")))
                }
            },
        };
        Ok(cert)
    }

    fn certify(&mut self) -> Result<Option<String>, Failure> {
        let condition = self.sc.condition()?;
        let (rs, map) = self.space_and_map()?;
        let opts = self.options()?;
        let cert = self.run_certificate(condition, &rs, &map, &opts)?;
        self.key_constant = Some(cert.constant);
        self.report.certificate = Some(CertificateRecord::new(&cert, &rs.space));
        let expected = self.sc.expect == Expect::Pass;
        Ok((cert.passed != expected).then(|| {
            format!(
                "{condition} certificate {} but scenario expects it to {}",
                if cert.passed { "passed" } else { "failed" },
                if expected { "pass" } else { "fail" }
            )
        }))
    }

    fn start(&self, rs: &ResolvedSpace) -> Result<Point, Failure> {
        let p = match (self.sc.start_index, self.sc.start, &rs.grid) {
            (Some(i), None, _) => Point(i),
            (None, Some(c), Some(grid)) => grid.snap(c),
            (None, Some(_), None) => return Err(Failure::Validation("`start` needs a grid; use `start_index`".into())),
            _ => return Err(Failure::Validation("solve needs exactly one of `start` or `start_index`".into())),
        };
        rs.space.check_point(p).map_err(|e| Failure::Validation(e.to_string()))?;
        Ok(p)
    }

    fn solve(&mut self) -> Result<Option<String>, Failure> {
        let condition = self.sc.condition()?;
        let (rs, map) = self.space_and_map()?;
        let opts = self.options()?;
        let stop = self.sc.stop_rule()?;
        let x0 = self.start(&rs)?;
        let space = &rs.space;
        let grid = opts.grid_for(space);

        // the orbit gauge for selection orbits
        let multi_gauge = match condition {
            Condition::MultivaluedGauge => Some(self.gauge(space, &opts)?),
            Condition::MizoguchiTakahashi => Some(
                product_gauge(&self.gauge(space, &opts)?, &grid).map_err(|e| Failure::Validation(e.to_string()))?,
            ),
            Condition::WeakContraction => Some(
                complement_gauge(&self.gauge(space, &opts)?, &grid)
                    .map_err(|e| Failure::Validation(e.to_string()))?,
            ),
            _ => None,
        };

        let (method, trace) = if let Some(eta) = &multi_gauge {
            let cert = self.run_certificate(condition, &rs, &map, &opts)?;
            self.key_constant = Some(cert.constant);
            self.report.certificate = Some(CertificateRecord::new(&cert, space));
            if !cert.passed {
                return Err(SolveError::Gate(Box::new(cert)).into());
            }
            ("multi_orbit", multi_orbit_solve(space, &map, x0, eta, &stop, &opts)?)
        } else if condition == Condition::Caristi {
            let phi = match self.potential(&rs, &opts)? {
                ResolvedPotential::Point(phi) => phi,
                ResolvedPotential::Pair(_) => return Err(Failure::Validation("caristi needs a point potential".into())),
            };
            let cert = certify_caristi(space, &map, &phi, &opts)?;
            self.key_constant = Some(cert.constant);
            self.report.certificate = Some(CertificateRecord::new(&cert, space));
            ("caristi_descent", caristi_descent_solve(space, &map, &phi, x0, &stop, &opts)?)
        } else if map.kind() == MapKind::Single && condition != Condition::MultiPairPotential {
            let cert = self.run_certificate(condition, &rs, &map, &opts)?;
            self.key_constant = Some(cert.constant);
            self.report.certificate = Some(CertificateRecord::new(&cert, space));
            if !cert.passed {
                return Err(SolveError::Gate(Box::new(cert)).into());
            }
            ("picard", picard_solve(space, &map, x0, &stop)?)
        } else {
            return Err(Failure::Validation(format!(
                "no solver for condition `{condition}` on a {} map",
                if map.kind() == MapKind::Single { "single-valued" } else { "multi-valued" }
            )));
        };

        self.iterations = Some(trace.steps());
        self.record_trace(&rs, &trace);
        let fixed = brute_force_fixed_points(space, &map);
        let last = trace.last();
        let is_fixed = map.image(last).contains(last);
        let in_set = fixed.contains(&last);
        self.report.solve = Some(SolveRecord {
            method: method.into(),
            start: x0.0,
            status: trace.status.name().into(),
            steps: trace.steps(),
            last: last.0,
            last_label: space.label(last).to_owned(),
            last_coord: rs.coord(last),
            is_fixed,
            fixed_points: fixed.iter().map(|p| p.0).collect(),
            in_fixed_point_set: in_set,
        });

        if let Some(eta) = &multi_gauge {
            let phi = build_potential_from_gauge(eta, Upgrade::Midpoint, &grid)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            let tele = verify_telescoping(space, &trace, &phi, &opts.slack)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            self.report.telescoping = Some(TelescopeRecord::new(phi.label(), &tele));
            if !tele.passed {
                return Ok(Some(format!("telescoping bound fails at {:?}", tele.witness)));
            }
        }
        if trace.status != OrbitStatus::Converged {
            return Ok(Some(format!("orbit stopped with status {}", trace.status.name())));
        }
        if !in_set {
            return Ok(Some(format!("orbit ended at {last}, not a fixed point")));
        }
        Ok(None)
    }

    fn record_trace(&mut self, rs: &ResolvedSpace, trace: &OrbitTrace) {
        for n in 0..trace.steps() {
            let mut line = json!({
                "step": n,
                "x": point_json(rs, trace.iterates[n]),
                "next": point_json(rs, trace.iterates[n + 1]),
                "dist": trace.step_dists[n],
            });
            if let Some(p) = trace.potentials.get(n) {
                line["potential"] = json!(p);
            }
            if let Some(s) = trace.selections.get(n) {
                line["hausdorff"] = json!(s.hausdorff);
                line["theta"] = json!(s.theta);
                line["eps0"] = json!(s.eps0);
            }
            self.trace.push(line);
        }
        self.trace.push(json!({
            "summary": {
                "status": trace.status.name(),
                "steps": trace.steps(),
                "last": point_json(rs, trace.last()),
            }
        }));
    }

    fn bellman(&mut self) -> Result<Option<String>, Failure> {
        let spec = self
            .sc
            .bellman
            .as_ref()
            .ok_or_else(|| Failure::Validation("action `bellman` needs a `bellman` table".into()))?;
        let seed = self.sc.require_seed()?;
        let stop = self.sc.stop_rule()?;
        let grid = self.sc.check_grid()?.unwrap_or_default();
        let inst = resolve_bellman(spec, &grid)?;
        let h0 = match &spec.h0 {
            Some(v) => BoundedFunction::new(v.clone())?,
            None => BoundedFunction::zero(inst.states().len()),
        };
        let cond = check_im_condition(&inst, spec.samples, seed, (spec.range[0], spec.range[1]))?;
        let sol = value_iterate(&inst, &h0, &stop, cond.passed)?;
        for (n, r) in sol.residuals.iter().enumerate() {
            self.trace.push(json!({ "iter": n, "residual": r }));
        }
        self.trace.push(json!({
            "summary": { "converged": sol.converged, "iterations": sol.iterations, "residual": sol.residual() }
        }));
        self.key_constant = Some(sol.residual());
        self.iterations = Some(sol.iterations);
        let expected = spec.expect_condition == Expect::Pass;
        self.report.bellman = Some(BellmanRecord {
            contraction_asserted: cond.passed,
            converged: sol.converged,
            iterations: sol.iterations,
            residual: sol.residual(),
            values: sol.h.values().to_vec(),
            policy: sol.policy.iter().map(|&y| inst.decisions()[y].clone()).collect(),
            condition: ConditionRecord::new(&cond, expected),
        });
        if cond.passed != expected {
            return Ok(Some(format!(
                "recursion condition {} but scenario expects it to {}",
                if cond.passed { "passed" } else { "failed" },
                if expected { "pass" } else { "fail" }
            )));
        }
        if !sol.converged {
            return Ok(Some(format!("value iteration did not converge in {} iterations", sol.iterations)));
        }
        Ok(None)
    }

    fn oracle(&mut self) -> Result<Option<String>, Failure> {
        if let Some(spec) = &self.sc.random {
            return self.random_oracle(spec.instances, spec.max_points, spec.max_image, &spec.eta);
        }
        let (rs, map) = self.space_and_map()?;
        let fixed = brute_force_fixed_points(&rs.space, &map);
        self.key_constant = Some(fixed.len() as f64);
        let mut msg = None;
        if self.sc.condition.is_some() {
            let opts = self.options()?;
            let cert = self.run_certificate(self.sc.condition()?, &rs, &map, &opts)?;
            if cert.passed && fixed.is_empty() {
                msg = Some(format!("{} certificate passed but the map has no fixed point", cert.condition));
            }
            self.report.certificate = Some(CertificateRecord::new(&cert, &rs.space));
        }
        self.report.oracle = Some(OracleRecord {
            mode: "enumerate".into(),
            fixed_points: Some(fixed.iter().map(|p| p.0).collect()),
            instances: None,
            certified: None,
            failures: None,
            first_failure: None,
        });
        Ok(msg)
    }

    /// Random maps that pass the multi-valued gauge certificate must have a
    /// fixed point, and the selection orbit must end in it.
    fn random_oracle(
        &mut self,
        instances: usize,
        max_points: usize,
        max_image: usize,
        eta: &crate::scenario::GaugeSpec,
    ) -> Result<Option<String>, Failure> {
        if max_points < 2 {
            return Err(Failure::Validation("`random.max_points` must be at least 2".into()));
        }
        let seed = self.sc.require_seed()?;
        let stop = self.sc.stop_rule()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut certified, mut failures, mut first_failure) = (0, 0, None);
        for i in 0..instances {
            let (space, map) = random::multi_instance(&mut rng, max_points, max_image);
            let n = space.len();
            let opts = CertifyOptions {
                slack: self.sc.slack(),
                grid: self.sc.check_grid()?,
            };
            let eta = eta.build(&opts.grid_for(&space))?;
            let cert = certify_multivalued_gauge(&space, &map, &eta, &opts)?;
            if !cert.passed {
                continue;
            }
            certified += 1;
            let fixed = brute_force_fixed_points(&space, &map);
            let verdict = match multi_orbit_solve(&space, &map, Point(0), &eta, &stop, &opts) {
                Ok(t) if fixed.contains(&t.last()) => None,
                Ok(t) => Some(format!("instance {i}: orbit ended at {} ({})", t.last(), t.status.name())),
                Err(e) => Some(format!("instance {i}: {e}")),
            };
            self.trace.push(json!({
                "instance": i,
                "points": n,
                "fixed_points": fixed.iter().map(|p| p.0).collect::<Vec<_>>(),
                "ok": verdict.is_none(),
            }));
            if let Some(v) = verdict {
                failures += 1;
                first_failure.get_or_insert(v);
            }
        }
        self.key_constant = Some(certified as f64);
        self.report.oracle = Some(OracleRecord {
            mode: "random_multi_gauge".into(),
            fixed_points: None,
            instances: Some(instances),
            certified: Some(certified),
            failures: Some(failures),
            first_failure: first_failure.clone(),
        });
        Ok(first_failure)
    }
}

/// One summary row per scenario file.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<RunResult>,
    pub summary_path: PathBuf,
}

impl SuiteResult {
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().all(|r| r.passed) {
            EXIT_OK
        } else {
            EXIT_ASSERTION
        }
    }
}

/// Runs every `*.toml` file in `dir` and writes `summary.csv` (sorted by
/// scenario name) into `out_dir`.
pub fn run_suite(dir: &Path, out_dir: &Path, overrides: &Overrides) -> std::io::Result<SuiteResult> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    let mut rows: Vec<RunResult> = files.iter().map(|f| run_scenario(f, out_dir, overrides)).collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));

    fs::create_dir_all(out_dir)?;
    let summary_path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record([
        "name",
        "action",
        "passed",
        "exit_code",
        "key_constant",
        "iterations",
        "wall_ms",
        "message",
    ])?;
    for r in &rows {
        w.write_record([
            r.name.clone(),
            r.action.clone(),
            r.passed.to_string(),
            r.exit_code.to_string(),
            r.key_constant.map(|c| c.to_string()).unwrap_or_default(),
            r.iterations.map(|c| c.to_string()).unwrap_or_default(),
            format!("{:.3}", r.wall_ms),
            r.message.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(SuiteResult { rows, summary_path })
}
