//! One function per subcommand. Each computes everything first and returns
//! the rendered artifacts; nothing is written here.

use std::io::Write;

use omega_limit::csv::write_rows;
use omega_limit::equilibria::{
    bifurcation_scan, find_equilibrium, hopf_threshold_analytic, hopf_threshold_with, lorenz_equilibria,
    EquilibriumReport,
};
use omega_limit::integrate::{flow_map, integrate};
use omega_limit::invariance::{min_enclosing_c, sphere_samples, verify_trapping, zero_set_ellipsoid};
use omega_limit::omega::{bounding_box, cloud_distance, equilibria_on_set, estimate_omega_set, euler_advisor, PointCloud};
use omega_limit::section::{
    find_crossings, regularity_score, return_map, write_crossings_csv, zmax_map, DirectionFilter, Observable,
    ReturnMapData,
};
use omega_limit::systems::SystemParams;
use omega_limit::{Error, IntegratorConfig, LorenzParams, Result, StateVec, SystemSpec, VectorField};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BifurcationStudy, OmegaStudy, Resolved, SectionStudy, SimulateStudy, Study, TrappingStudy};
use crate::output::Artifacts;

pub fn run(cfg: &Resolved) -> Result<Artifacts> {
    match &cfg.study {
        Study::Simulate(s) => simulate(cfg, s),
        Study::Equilibria {} => equilibria(cfg),
        Study::Bifurcation(s) => bifurcation(cfg, s),
        Study::Trapping(s) => trapping(cfg, s),
        Study::Omega(s) => omega(cfg, s),
        Study::Section(s) => section(cfg, s),
        Study::ReproduceFigures {} => reproduce_figures(cfg),
    }
}

fn lorenz_params(cfg: &Resolved) -> Result<LorenzParams> {
    cfg.spec
        .lorenz_params()
        .ok_or_else(|| Error::RejectedInput(format!("system `{}` is not lorenz", cfg.system)))
}

fn simulate(cfg: &Resolved, s: &SimulateStudy) -> Result<Artifacts> {
    let traj = integrate(&cfg.spec, StateVec::new(&s.ic)?, 0.0, s.t_end, &cfg.integrator)?;
    let mut out = Artifacts::new();
    match s.dt_output {
        Some(dt) => {
            let n = (s.t_end / dt + 1e-9).floor() as usize;
            let times: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(s.t_end)).collect();
            let states = traj.resample(&times)?;
            let mut header = vec!["t".to_string()];
            header.extend((1..=traj.dimension()).map(|i| format!("x{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.add_with("trajectory.csv", |w| {
                write_rows(w, &header, times.iter().zip(&states).map(|(t, st)| {
                    let mut row = vec![*t];
                    row.extend_from_slice(st.as_slice());
                    row
                }))
            });
        }
        None => out.add_with("trajectory.csv", |w| traj.write_csv(w)),
    }
    out.add_json(
        "simulate.json",
        &json!({
            "config": cfg,
            "samples": traj.len(),
            "t_end": traj.t_end(),
            "final_state": traj.final_state(),
            "step_stats": traj.stats(),
        }),
    );
    Ok(out)
}

/// Every equilibrium of a built-in system: closed form plus Newton for
/// Lorenz, Newton from a grid of starting points otherwise.
pub fn all_equilibria(spec: &SystemSpec) -> Result<Vec<EquilibriumReport>> {
    if let SystemParams::Lorenz(p) = spec.params() {
        return lorenz_equilibria(p);
    }
    let guesses: Vec<StateVec> = match spec.dimension() {
        1 => (0..=40).map(|i| StateVec::scalar(-2.0 + 0.25 * i as f64)).collect(),
        _ => (0..=12)
            .flat_map(|i| (0..=12).map(move |j| StateVec::xy(-6.0 + i as f64, -6.0 + j as f64)))
            .collect(),
    };
    let mut found: Vec<EquilibriumReport> = Vec::new();
    for g in guesses {
        if let Ok(rep) = find_equilibrium(spec, g, 1e-12) {
            if !found.iter().any(|f| f.location.distance(&rep.location) < 1e-6) {
                found.push(rep);
            }
        }
    }
    found.sort_by(|a, b| {
        a.location.as_slice().iter().zip(b.location.as_slice()).fold(std::cmp::Ordering::Equal, |acc, (x, y)| {
            acc.then(x.total_cmp(y))
        })
    });
    Ok(found)
}

fn equilibria(cfg: &Resolved) -> Result<Artifacts> {
    let eqs = all_equilibria(&cfg.spec)?;
    let mut out = Artifacts::new();
    out.add_json("equilibria.json", &json!({ "config": cfg, "equilibria": eqs }));
    Ok(out)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn bifurcation(cfg: &Resolved, s: &BifurcationStudy) -> Result<Artifacts> {
    let p = lorenz_params(cfg)?;
    let scan = bifurcation_scan(p.sigma, p.b, &linspace(s.r_min, s.r_max, s.r_steps))?;
    let hopf = match hopf_threshold_with(p.sigma, p.b, s.hopf_lo, s.hopf_hi, s.hopf_tol) {
        Ok(r) => Some(r),
        Err(Error::NoBracket { .. }) => None,
        Err(e) => return Err(e),
    };
    let analytic = (p.sigma > p.b + 1.0).then(|| hopf_threshold_analytic(p.sigma, p.b));
    let mut out = Artifacts::new();
    out.add_with("bifurcation.csv", |w| scan.write_csv(w));
    out.add_json(
        "bifurcation.json",
        &json!({
            "config": cfg,
            "pitchfork_threshold": 1.0,
            "hopf_threshold": hopf,
            "hopf_threshold_analytic": analytic,
            "scan_brackets": scan.thresholds,
            "grid_points": scan.rows.len(),
        }),
    );
    Ok(out)
}

fn trapping_files(out: &mut Artifacts, prefix: &str, cfg: &Resolved, p: &LorenzParams, s: &TrappingStudy) -> Result<()> {
    let report = verify_trapping(s.c, p, s.samples, cfg.seed)?;
    let ellipsoid = zero_set_ellipsoid(p);
    let points = sphere_samples(s.c, p, s.sphere_points, cfg.seed);
    out.add_json(
        format!("{prefix}trapping.json"),
        &json!({
            "config": cfg,
            "certificate": "sampled",
            "report": report,
            "zero_set_ellipsoid": ellipsoid,
        }),
    );
    out.add_with(format!("{prefix}ellipsoid_mesh.csv"), |w| ellipsoid.write_mesh_csv(w, s.mesh_theta, s.mesh_phi));
    out.add_with(format!("{prefix}sphere_samples.csv"), |w| {
        write_rows(w, &["x", "y", "z"], points.iter().map(|q| q.to_vec()))
    });
    Ok(())
}

fn trapping(cfg: &Resolved, s: &TrappingStudy) -> Result<Artifacts> {
    let p = lorenz_params(cfg)?;
    let mut out = Artifacts::new();
    trapping_files(&mut out, "", cfg, &p, s)?;
    Ok(out)
}

fn cloud_files(out: &mut Artifacts, prefix: &str, cloud: &PointCloud) {
    match cloud.dimension() {
        3 => {
            out.add_with(format!("{prefix}xyz.csv"), |w| cloud.write_csv(w));
            for (name, axes) in [("xy", (0, 1)), ("xz", (0, 2)), ("yz", (1, 2))] {
                out.add_with(format!("{prefix}{name}.csv"), |w| cloud.write_projection_csv(w, axes));
            }
        }
        2 => out.add_with(format!("{prefix}xy.csv"), |w| cloud.write_csv(w)),
        _ => out.add_with(format!("{prefix}y.csv"), |w| cloud.write_csv(w)),
    }
}

#[derive(Serialize)]
struct Axis {
    min: f64,
    max: f64,
}

fn omega_summary(cfg: &Resolved, s: &OmegaStudy, cloud: &PointCloud) -> Result<Value> {
    let eqs = all_equilibria(&cfg.spec)?;
    let distances = equilibria_on_set(cloud, &eqs, s.on_set_eps)?;
    let on_set = distances.iter().filter(|d| d.on_set).count();
    let bbox: Vec<Axis> = bounding_box(cloud)?.into_iter().map(|(min, max)| Axis { min, max }).collect();
    let comparison = match &s.compare_ic {
        Some(other) => {
            let b = estimate_omega_set(&cfg.spec, StateVec::new(other)?, s.t_transient, s.t_sample, s.dt_sample, &cfg.integrator)?;
            Some(cloud_distance(cloud, &b)?)
        }
        None => None,
    };
    Ok(json!({
        "config": cfg,
        "points": cloud.len(),
        "bounding_box": bbox,
        "equilibria": distances,
        "equilibria_on_set": on_set,
        "topology": euler_advisor(on_set),
        "cloud_distance_to_compare_ic": comparison,
    }))
}

fn omega(cfg: &Resolved, s: &OmegaStudy) -> Result<Artifacts> {
    let cloud = estimate_omega_set(&cfg.spec, StateVec::new(&s.ic)?, s.t_transient, s.t_sample, s.dt_sample, &cfg.integrator)?;
    let summary = omega_summary(cfg, s, &cloud)?;
    let mut out = Artifacts::new();
    cloud_files(&mut out, "", &cloud);
    out.add_json("summary.json", &summary);
    Ok(out)
}

fn score_or_null(data: std::result::Result<ReturnMapData, Error>, k: usize) -> Value {
    data.and_then(|d| regularity_score(&d, k)).map(Value::from).unwrap_or(Value::Null)
}

fn section(cfg: &Resolved, s: &SectionStudy) -> Result<Artifacts> {
    let start = flow_map(&cfg.spec, StateVec::new(&s.ic)?, s.t_transient, &cfg.integrator)?;
    let traj = integrate(&cfg.spec, start, s.t_transient, s.t_transient + s.t_sample, &cfg.integrator)?;
    let all = find_crossings(&traj, s.axis, s.offset, DirectionFilter::Both)?;
    let observable = Observable::parse(&s.observable)?;
    let positions = return_map(&all, observable, s.direction)?;
    let times = return_map(&all, Observable::TInterval, s.direction)?;
    let position_score = regularity_score(&positions, s.k)?;
    let time_score = regularity_score(&times, s.k)?;

    let per_direction: serde_json::Map<String, Value> = [("up", DirectionFilter::Up), ("down", DirectionFilter::Down), ("both", DirectionFilter::Both)]
        .into_iter()
        .map(|(name, f)| {
            let n = all.iter().filter(|e| f.admits(e.direction)).count();
            let v = json!({
                "crossings": n,
                "position_score": score_or_null(return_map(&all, observable, f), s.k),
                "time_score": score_or_null(return_map(&all, Observable::TInterval, f), s.k),
            });
            (name.to_string(), v)
        })
        .collect();

    let kept: Vec<_> = all.iter().copied().filter(|e| s.direction.admits(e.direction)).collect();
    let mut out = Artifacts::new();
    out.add_with("crossings.csv", |w| write_crossings_csv(w, &kept));
    out.add_with("return_map_positions.csv", |w| positions.write_csv(w));
    out.add_with("return_map_times.csv", |w| times.write_csv(w));
    let zmax = if traj.dimension() == 3 {
        let map = zmax_map(&traj)?;
        out.add_with("zmax_map.csv", |w| map.write_csv(w));
        json!({ "pairs": map.pairs.len(), "score": regularity_score(&map, s.k).ok() })
    } else {
        Value::Null
    };
    out.add_json(
        "section.json",
        &json!({
            "config": cfg,
            "crossings": kept.len(),
            "observable": positions.observable,
            "position_score": position_score,
            "time_score": time_score,
            "positions_more_regular_than_times": position_score < time_score,
            "position_fit_residual_rms": positions.fit_residual_rms,
            "time_fit_residual_rms": times.fit_residual_rms,
            "by_direction": per_direction,
            "zmax_map": zmax,
        }),
    );
    Ok(out)
}

const FIG1_ICS: [f64; 13] = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0];

fn reproduce_figures(cfg: &Resolved) -> Result<Artifacts> {
    let mut out = Artifacts::new();

    let quintic = SystemSpec::quintic1d();
    let qcfg = IntegratorConfig::default();
    let grid = linspace(0.0, 6.0, 601);
    out.add_with("fig1/phase_line.csv", |w| {
        write_rows(w, &["y", "dy_dt"], grid.iter().map(|&y| [y, quintic.rhs(&StateVec::scalar(y))[0]]))
    });
    let times = linspace(0.0, 10.0, 201);
    let mut rows = Vec::new();
    let mut basins = Vec::new();
    for y0 in FIG1_ICS {
        let traj = integrate(&quintic, StateVec::scalar(y0), 0.0, 10.0, &qcfg)?;
        for (t, st) in times.iter().zip(traj.resample(&times)?) {
            rows.push([y0, *t, st[0]]);
        }
        basins.push(json!({ "y0": y0, "y_at_50": flow_map(&quintic, StateVec::scalar(y0), 50.0, &qcfg)?[0] }));
    }
    out.add_with("fig1/trajectories.csv", |w| write_rows(w, &["y0", "t", "y"], &rows));
    out.add_json("fig1/equilibria.json", &json!({ "equilibria": all_equilibria(&quintic)?, "basins": basins }));

    let p = LorenzParams::default();
    let trap = TrappingStudy { c: 45.0, samples: 1_000_000, sphere_points: 2000, mesh_theta: 40, mesh_phi: 80 };
    trapping_files(&mut out, "fig2/", cfg, &p, &trap)?;
    let c_min = min_enclosing_c(&p, 256)?;

    let study = OmegaStudy {
        ic: vec![5.0, 5.0, 5.0],
        compare_ic: Some(vec![-3.0, 7.0, 20.0]),
        t_transient: 50.0,
        t_sample: 500.0,
        dt_sample: 0.01,
        on_set_eps: omega_limit::omega::DEFAULT_ON_SET_EPS,
    };
    let cloud = estimate_omega_set(&cfg.spec, StateVec::new(&study.ic)?, study.t_transient, study.t_sample, study.dt_sample, &cfg.integrator)?;
    let mut summary = omega_summary(cfg, &study, &cloud)?;
    summary["study"] = serde_json::to_value(&study).expect("serializable");
    cloud_files(&mut out, "fig3/", &cloud);
    out.add_json("fig3/summary.json", &summary);

    let hopf = hopf_threshold_with(p.sigma, p.b, 1.5, 100.0, 1e-10)?;
    out.add_json(
        "numbers.json",
        &json!({
            "config": cfg,
            "equilibria_r28": lorenz_equilibria(&p)?,
            "hopf_threshold": hopf,
            "hopf_threshold_analytic": hopf_threshold_analytic(p.sigma, p.b),
            "min_enclosing_c": c_min,
        }),
    );

    let files = |prefix: &str| -> Vec<String> {
        out.paths().iter().filter_map(|p| p.to_str()).filter(|p| p.starts_with(prefix)).map(String::from).collect()
    };
    let manifest = json!({
        "config": cfg,
        "seed": cfg.seed,
        "figures": {
            "fig1": {
                "content": "quintic dy/dt = (1-y)(2-y)(3-y)(4-y)(5-y): phase line, trajectories from 13 initial values, equilibria and basins",
                "files": files("fig1/"),
            },
            "fig2": {
                "content": "lorenz r=28: zero set of d(c^2)/dt (ellipsoid centred at (0,0,19)) and sampled trapping sphere c=45 about (0,0,38)",
                "files": files("fig2/"),
            },
            "fig3": {
                "content": "lorenz r=28 omega-limit cloud from (5,5,5): full cloud and xy, xz, yz projections",
                "files": files("fig3/"),
            },
        },
        "numbers": "numbers.json",
    });
    out.add_json("manifest.json", &manifest);
    Ok(out)
}

/// Short human-readable listing for stdout.
pub fn describe(out: &Artifacts, w: &mut impl Write) -> std::io::Result<()> {
    for p in out.paths() {
        writeln!(w, "{}", p.display())?;
    }
    Ok(())
}
