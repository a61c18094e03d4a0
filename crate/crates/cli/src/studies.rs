//! The studies behind each subcommand. Each returns its artifacts and
//! pass/fail checks; nothing touches the filesystem here.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use dtnwave::dispersion::{l0, normal_form_at_depth, q0, solve_z};
use dtnwave::greenfn::{
    assemble_green, exact_green_constant_depth, limiting_absorption_study, source_field, GreenCutoffs, PointFlag,
    SourceModel,
};
use dtnwave::pdo::{Absorber, GridField, ResolventQuery, ScalingGrid, weighted_resolvent_norm};
use dtnwave::rays::{launch_fan, neighbour_spreading_mismatch, FlowOptions, Hamiltonian, Termination};
use dtnwave::strip::{
    adjointness_report, assemble_dtn, solve_mixed, symbol_residual_study, DtnBasis, MixedData, MixedProblem,
    ResidualStudyConfig, StripGrid,
};
use dtnwave::verify::{self, CriterionReport};
use dtnwave::{DepthProfile, Point};
use num_complex::Complex64;
use serde::Serialize;

use crate::artifacts::{Artifacts, Check, RasterHeader, Timing};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct StudyOutput {
    pub artifacts: Artifacts,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
}

impl StudyOutput {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }
}

#[derive(Serialize)]
struct DispersionRow {
    depth: f64,
    energy: f64,
    s: f64,
    z: f64,
    radius: f64,
    conformal: f64,
    potential: f64,
    residual: f64,
}

#[derive(Serialize)]
struct SymbolRow {
    depth: f64,
    rho: f64,
    l0: f64,
    q0: f64,
}

pub fn dispersion(config: &RunConfig) -> Result<StudyOutput, CliError> {
    let spec = &config.dispersion;
    let mut out = StudyOutput::default();
    let mut rows = Vec::new();
    let mut symbols = Vec::new();
    out.timed("tables", || {
        for &depth in &spec.depths {
            for energy in spec.energies() {
                let s = energy * depth;
                let z = solve_z(s)?;
                let nf = normal_form_at_depth(depth, energy)?;
                rows.push(DispersionRow {
                    depth,
                    energy,
                    s,
                    z,
                    radius: nf.radius,
                    conformal: nf.conformal,
                    potential: nf.potential,
                    residual: (z * z.tanh() - s).abs() / s.max(1.0),
                });
            }
            for k in 0..spec.rho_count {
                let rho = spec.rho_max * k as f64 / (spec.rho_count - 1) as f64;
                symbols.push(SymbolRow {
                    depth,
                    rho,
                    l0: l0(depth, rho),
                    q0: q0(depth, rho),
                });
            }
        }
        Ok(())
    })?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    out.check(
        "dispersion root",
        worst <= 1e-12,
        format!("max |Z tanh Z - s| / max(1, s) = {worst:.1e} over {} rows (<= 1e-12)", rows.len()),
    );
    out.artifacts.csv("dispersion.csv", &rows)?;
    out.artifacts.csv("symbols.csv", &symbols)?;
    Ok(out)
}

#[derive(Serialize)]
struct ResidualCsvRow {
    h: f64,
    n: usize,
    nz: usize,
    residual: f64,
    discretization: f64,
    in_fit: bool,
}

#[derive(Serialize)]
struct AdjointRow {
    relation: &'static str,
    ratio: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct TraceRow {
    x: f64,
    top_value: f64,
    top_flux: f64,
    bottom_value: f64,
    bottom_flux: f64,
}

#[derive(Serialize)]
struct StripHeader {
    n: usize,
    nz: usize,
    half_width: f64,
    h: f64,
    problem: MixedProblem,
    /// Value at node `q`, level `j` is entry `q·nz + j`; level `j` sits at
    /// `σ = -1 + j/(nz - 1)`.
    layout: &'static str,
    residual: f64,
    dtype: &'static str,
}

pub fn strip_verify(config: &RunConfig, profile: &DepthProfile) -> Result<StudyOutput, CliError> {
    let mut out = StudyOutput::default();
    let residual_config = ResidualStudyConfig {
        half_width: config.strip.half_width,
        ..ResidualStudyConfig::default()
    };
    let study = out.timed("residual study", || {
        Ok(symbol_residual_study(profile, &config.h_list, &residual_config, None)?)
    })?;
    let rows: Vec<ResidualCsvRow> = study
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| ResidualCsvRow {
            h: r.h,
            n: r.n,
            nz: r.nz,
            residual: r.residual,
            discretization: r.discretization,
            in_fit: (study.fit.0..study.fit.1).contains(&i),
        })
        .collect();
    out.artifacts.csv("residual.csv", &rows)?;
    if profile.is_constant() {
        let worst = study.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        out.check(
            "symbol residual",
            worst <= 1e-4,
            format!("constant depth: residual {worst:.1e} at the discretization floor (<= 1e-4)"),
        );
    } else {
        out.check(
            "symbol residual",
            study.slope >= 1.8,
            format!("slope {:.2} of log residual vs log h (>= 1.8)", study.slope),
        );
    }

    let strip = &config.strip;
    let grid = StripGrid::new(1, strip.half_width, strip.n, strip.nz)?;
    let basis = DtnBasis::Fourier {
        max_mode: config.strip.max_mode,
    };
    let report = out.timed("adjointness", || {
        let m = assemble_dtn(profile, grid, strip.h, basis)?;
        Ok(adjointness_report(&m, &m.weights, config.strip.tolerance)?)
    })?;
    let tol = config.strip.tolerance;
    out.artifacts.csv(
        "adjointness.csv",
        [
            ("L11 = L11*", report.l11_ratio),
            ("L22 = L22*", report.l22_ratio),
            ("L21* = -L12", report.cross_ratio),
        ]
        .map(|(relation, ratio)| AdjointRow {
            relation,
            ratio,
            tolerance: tol,
        }),
    )?;
    out.check(
        "adjointness",
        report.passes,
        format!("worst relative defect {:.2e} (<= {tol})", report.worst()),
    );

    let packet = residual_config.packet;
    let solution = out.timed("strip solve", || {
        let data = MixedData {
            top: (0..grid.n).map(|q| packet.value(grid.coordinate(q), strip.h)).collect(),
            bottom: vec![0.0; grid.n],
            source: None,
        };
        Ok(solve_mixed(profile, grid, strip.h, &data, MixedProblem::DirichletTop)?)
    })?;
    out.artifacts.raster(
        "strip_potential",
        &solution.potential,
        &StripHeader {
            n: grid.n,
            nz: grid.nz,
            half_width: grid.half_width,
            h: strip.h,
            problem: solution.problem,
            layout: "node-major",
            residual: solution.residual,
            dtype: "f64le",
        },
    )?;
    out.artifacts.csv(
        "strip_traces.csv",
        (0..grid.n).map(|q| TraceRow {
            x: grid.coordinate(q),
            top_value: solution.top_value[q],
            top_flux: solution.top_flux[q],
            bottom_value: solution.bottom_value[q],
            bottom_flux: solution.bottom_flux[q],
        }),
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct TrajectoryRow {
    ray: usize,
    angle: f64,
    t: f64,
    x1: f64,
    x2: f64,
    p1: f64,
    p2: f64,
    action: f64,
    spreading: f64,
    maslov: u32,
}

#[derive(Serialize)]
struct FanSummary {
    source: Point,
    energy: f64,
    hamiltonian: Hamiltonian,
    radius: f64,
    n_angles: usize,
    t_max: f64,
    dt: f64,
    stride: usize,
    max_energy_drift: f64,
    max_symplectic_defect: f64,
    /// Rays whose Maslov count is positive at the final time.
    rays_past_caustic: usize,
    max_maslov: u32,
    left_domain: usize,
    /// Variational vs neighbour-differenced spreading, away from caustics.
    neighbour_mismatch: f64,
}

pub fn rays(config: &RunConfig, profile: &DepthProfile) -> Result<StudyOutput, CliError> {
    let spec = &config.rays;
    let mut out = StudyOutput::default();
    let mut opts = FlowOptions::new(spec.t_max, spec.dt);
    opts.stride = spec.stride;
    let hamiltonian = spec.hamiltonian.hamiltonian(config.energy);
    let fan = out.timed("fan", || {
        Ok(launch_fan(profile, config.source.center, config.energy, spec.n_angles, hamiltonian, &opts)?)
    })?;
    let mut rows = Vec::new();
    for (i, ray) in fan.rays.iter().enumerate() {
        for s in &ray.samples {
            rows.push(TrajectoryRow {
                ray: i,
                angle: ray.angle,
                t: s.t,
                x1: s.x[0],
                x2: s.x[1],
                p1: s.p[0],
                p2: s.p[1],
                action: s.action,
                spreading: s.spreading,
                maslov: s.maslov,
            });
        }
    }
    let last_maslov = |r: &dtnwave::rays::FanRay| r.samples.last().map_or(0, |s| s.maslov);
    let summary = FanSummary {
        source: fan.source,
        energy: fan.energy,
        hamiltonian,
        radius: fan.radius,
        n_angles: spec.n_angles,
        t_max: spec.t_max,
        dt: spec.dt,
        stride: spec.stride,
        max_energy_drift: fan.rays.iter().map(|r| r.energy_drift).fold(0.0, f64::max),
        max_symplectic_defect: fan.rays.iter().map(|r| r.symplectic_defect).fold(0.0, f64::max),
        rays_past_caustic: fan.rays.iter().filter(|r| last_maslov(r) > 0).count(),
        max_maslov: fan.rays.iter().map(last_maslov).max().unwrap_or(0),
        left_domain: fan.rays.iter().filter(|r| r.termination == Termination::LeftDomain).count(),
        neighbour_mismatch: neighbour_spreading_mismatch(&fan, 0.2, 0.5),
    };
    out.check(
        "energy conservation",
        summary.max_energy_drift <= 1e-8,
        format!("max relative drift {:.1e} (<= 1e-8)", summary.max_energy_drift),
    );
    out.check(
        "symplectic volume",
        summary.max_symplectic_defect <= 1e-6,
        format!("max |det M - 1| {:.1e} (<= 1e-6)", summary.max_symplectic_defect),
    );
    out.artifacts.csv("trajectories.csv", &rows)?;
    out.artifacts.json("fan.json", &summary)?;
    Ok(out)
}

#[derive(Serialize)]
struct GreenHeader {
    #[serde(flatten)]
    raster: RasterHeader,
    energy: f64,
    h: f64,
    /// The assembled field is the `ε → 0` limit.
    epsilon: f64,
    cutoffs: GreenCutoffs,
    cutoff_time: f64,
    calibration: [f64; 2],
    source: SourceModel,
    caustic_points: usize,
    shadow_points: usize,
    /// Number of ray branches reaching each raster node, same layout as the values.
    branch_counts: Vec<usize>,
}

#[derive(Serialize)]
struct OracleRow {
    x1: f64,
    x2: f64,
    distance: f64,
    re: f64,
    im: f64,
    exact_re: f64,
    exact_im: f64,
    modulus_error: f64,
    phase_error: f64,
    flag: PointFlag,
}

#[derive(Serialize)]
struct AbsorptionRow {
    epsilon: f64,
    /// Weighted difference to the previous entry of the schedule.
    weighted_difference: Option<f64>,
    iterations: usize,
}

#[derive(Serialize)]
struct AbsorptionHeader {
    #[serde(flatten)]
    raster: RasterHeader,
    energy: f64,
    h: f64,
    epsilons: Vec<f64>,
    absorber: Option<Absorber>,
    /// `2u(ε/2) - u(ε)` from the last two solves when they differ by two.
    extrapolated: bool,
}

/// Annulus `1 <= |x - x₀| <= 3` in steps of 0.1 with 32 angles.
fn annulus(center: Point) -> Vec<Point> {
    let mut pts = Vec::new();
    for i in 0..=20 {
        let r = 1.0 + 0.1 * i as f64;
        for k in 0..32 {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 32.0;
            pts.push([center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    pts
}

pub struct GreenOptions {
    pub verify: bool,
    pub absorption: bool,
}

pub fn green(config: &RunConfig, profile: &DepthProfile, options: &GreenOptions) -> Result<StudyOutput, CliError> {
    let mut out = StudyOutput::default();
    let center = config.source.center;
    let mut model = SourceModel::new(profile, center, config.energy, config.h)?;
    model.support = config.source.support;
    let cutoffs = config.cutoffs.cutoffs();
    let calibration = Complex64::new(config.green.calibration[0], config.green.calibration[1]);
    let header = RasterHeader::square(config.grid.n, config.grid.half_width);
    let points: Vec<Point> = (0..header.len()).map(|q| header.node(q)).collect();

    // the fan must reach every raster node at the slowest Finsler speed 1/r(x)
    let distance = |x: &Point| (x[0] - center[0]).hypot(x[1] - center[1]);
    let mut reach = points.iter().map(distance).fold(0.0, f64::max);
    if options.verify {
        reach = reach.max(3.0);
    }
    let shallowest = points
        .iter()
        .filter_map(|x| profile.depth(*x).ok())
        .fold(profile.depth(center)?, f64::min);
    let slowest = normal_form_at_depth(shallowest, config.energy)?.radius;
    let mut opts = FlowOptions::new(slowest * (reach + 0.5), config.green.dt);
    opts.stride = 2;
    let hamiltonian = Hamiltonian::Finsler { energy: config.energy };
    let fan = out.timed("fan", || {
        Ok(launch_fan(profile, center, config.energy, config.green.n_angles, hamiltonian, &opts)?)
    })?;
    let field = out.timed("assembly", || {
        Ok(assemble_green(profile, &fan, &model, &points, &cutoffs, calibration)?)
    })?;
    let values = field.values();
    let finite = values.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    let count = |flag: PointFlag| field.flags.iter().filter(|f| **f == flag).count();
    out.check(
        "finite field",
        finite,
        format!(
            "{} nodes, {} caustic, {} shadow",
            values.len(),
            count(PointFlag::Caustic),
            count(PointFlag::Shadow)
        ),
    );
    let green_header = GreenHeader {
        raster: header.clone(),
        energy: config.energy,
        h: config.h,
        epsilon: 0.0,
        cutoffs,
        cutoff_time: field.cutoff_time,
        calibration: config.green.calibration,
        source: model,
        caustic_points: count(PointFlag::Caustic),
        shadow_points: count(PointFlag::Shadow),
        branch_counts: field.branch_counts.clone(),
    };
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    out.artifacts.raster("green_re", &re, &green_header)?;
    out.artifacts.raster("green_im", &im, &green_header)?;

    if options.verify {
        let pts = annulus(center);
        let (assembled, exact) = out.timed("oracle", || {
            let assembled = assemble_green(profile, &fan, &model, &pts, &cutoffs, calibration)?;
            let exact: Vec<Complex64> = exact_green_constant_depth(&model, 0.0, &pts)?.iter().map(|q| q.value).collect();
            Ok((assembled, exact))
        })?;
        let mut rows = Vec::with_capacity(pts.len());
        let (mut modulus, mut phase) = (0.0f64, 0.0f64);
        for (i, x) in pts.iter().enumerate() {
            let (u, v) = (assembled.value(i), exact[i]);
            let m = (u.norm() / v.norm() - 1.0).abs();
            let p = (u / v).arg().abs();
            if assembled.flags[i] != PointFlag::Caustic {
                modulus = modulus.max(m);
                phase = phase.max(p);
            }
            rows.push(OracleRow {
                x1: x[0],
                x2: x[1],
                distance: distance(x),
                re: u.re,
                im: u.im,
                exact_re: v.re,
                exact_im: v.im,
                modulus_error: m,
                phase_error: p,
                flag: assembled.flags[i],
            });
        }
        let mask: Vec<bool> = assembled.flags.iter().map(|f| *f == PointFlag::Regular).collect();
        let fitted = assembled.fit_calibration(&exact, &mask)?;
        out.artifacts.csv("green_verify.csv", &rows)?;
        out.check(
            "green vs constant-depth oracle",
            modulus <= 0.1 && phase <= 0.1,
            format!(
                "modulus {:.2}% (<= 10%), phase {phase:.4} rad (<= 0.1) on 1 <= |x - x0| <= 3; best-fit calibration {:.4}{:+.4}i",
                100.0 * modulus,
                fitted.re,
                fitted.im
            ),
        );
    }

    if options.absorption {
        let template = GridField::zeros(2, config.grid.n, config.grid.half_width, config.h)?;
        let schedule = config.epsilons();
        let absorber = config.absorber.absorber();
        let report = out.timed("absorption", || {
            let f = source_field(&model, &template)?;
            Ok(limiting_absorption_study(profile, &f, center, config.energy, &schedule, absorber, 1e-8)?)
        })?;
        let rows = schedule.iter().enumerate().map(|(i, &epsilon)| AbsorptionRow {
            epsilon,
            weighted_difference: i.checked_sub(1).map(|j| report.differences[j]),
            iterations: report.iterations[i],
        });
        out.artifacts.csv("absorption.csv", rows)?;
        let k = schedule.len();
        let absorption_header = AbsorptionHeader {
            raster: header,
            energy: config.energy,
            h: config.h,
            epsilons: schedule.clone(),
            absorber,
            extrapolated: (schedule[k - 2] / schedule[k - 1] - 2.0).abs() < 1e-9,
        };
        let data = &report.extrapolated.data;
        out.artifacts.raster("absorption_re", &data.iter().map(|z| z.re).collect::<Vec<_>>(), &absorption_header)?;
        out.artifacts.raster("absorption_im", &data.iter().map(|z| z.im).collect::<Vec<_>>(), &absorption_header)?;
        let diffs: Vec<String> = report.differences.iter().map(|d| format!("{d:.3e}")).collect();
        out.check(
            "limiting absorption",
            report.monotone,
            format!("weighted differences [{}]", diffs.join(", ")),
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct ScatterRow {
    h: f64,
    n: usize,
    epsilon: f64,
    norm: f64,
    power_iterations: usize,
}

#[derive(Serialize)]
struct ScatterSummary {
    dim: usize,
    energy: f64,
    weight_exponent: f64,
    absorber: Option<Absorber>,
    seed: u64,
    norms: Vec<f64>,
    slope: f64,
}

pub fn scatter_norm(config: &RunConfig, profile: &DepthProfile) -> Result<StudyOutput, CliError> {
    let mut out = StudyOutput::default();
    let base = config.h_list[0];
    let grids: Vec<ScalingGrid> = config
        .h_list
        .iter()
        .map(|&h| ScalingGrid {
            h,
            n: ((config.grid.n as f64 * base / h).round() as usize).next_power_of_two(),
            half_width: config.grid.half_width,
            epsilon: h * h,
        })
        .collect();
    let mut query = ResolventQuery::new(config.energy, 1.0);
    query.weight_exponent = config.scatter.weight_exponent;
    query.absorber = config.absorber.absorber();
    let report = out.timed("power iteration", || {
        Ok(weighted_resolvent_norm(profile, config.scatter.dim, &query, &grids, config.seed)?)
    })?;
    let rows = grids.iter().enumerate().map(|(i, g)| ScatterRow {
        h: g.h,
        n: g.n,
        epsilon: g.epsilon,
        norm: report.norms[i],
        power_iterations: report.power_iterations[i],
    });
    out.artifacts.csv("scatter.csv", rows)?;
    out.artifacts.json(
        "scatter.json",
        &ScatterSummary {
            dim: config.scatter.dim,
            energy: config.energy,
            weight_exponent: config.scatter.weight_exponent,
            absorber: query.absorber,
            seed: config.seed,
            norms: report.norms.clone(),
            slope: report.slope,
        },
    )?;
    out.check(
        "resolvent scaling",
        (0.7..=1.3).contains(&report.slope),
        format!("slope {:.3} of log norm vs log(1/h) (in [0.7, 1.3])", report.slope),
    );
    Ok(out)
}

#[derive(Serialize)]
struct CriterionRow<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    detail: &'a str,
}

#[derive(Serialize)]
struct CriterionSummary<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    detail: &'a str,
    metrics: serde_json::Map<String, serde_json::Value>,
}

/// Runs the acceptance criteria `ids` on up to `threads` workers; reports
/// come back in id order.
pub fn verify_all(ids: &[u8], threads: usize) -> Result<StudyOutput, CliError> {
    let next = AtomicUsize::new(0);
    let reports: Mutex<Vec<CriterionReport>> = Mutex::new(Vec::with_capacity(ids.len()));
    let failure: Mutex<Option<dtnwave::Error>> = Mutex::new(None);
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, ids.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&id) = ids.get(i) else { break };
                match verify::run(id) {
                    Ok(r) => reports.lock().expect("report lock").push(r),
                    Err(e) => {
                        failure.lock().expect("failure lock").get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e.into());
    }
    let mut reports = reports.into_inner().expect("report lock");
    reports.sort_by_key(|r| r.id);

    let mut out = StudyOutput::default();
    for r in &reports {
        out.timings.push(Timing {
            stage: format!("criterion {}", r.id),
            seconds: r.seconds,
        });
        out.check(&format!("{:02} {}", r.id, r.name), r.passed, r.detail.clone());
    }
    out.artifacts.csv(
        "verify.csv",
        reports.iter().map(|r| CriterionRow {
            id: r.id,
            name: &r.name,
            passed: r.passed,
            detail: &r.detail,
        }),
    )?;
    let summaries: Vec<CriterionSummary> = reports
        .iter()
        .map(|r| CriterionSummary {
            id: r.id,
            name: &r.name,
            passed: r.passed,
            detail: &r.detail,
            metrics: r.metrics.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect(),
        })
        .collect();
    out.artifacts.json("verify.json", &summaries)?;
    Ok(out)
}
