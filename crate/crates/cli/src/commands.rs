//! One function per subcommand: resolve knobs, call the core, emit artifacts.

use bcspec_core::bc::{manifold_distance, ClassicalBC, Family, Isometry, Reflectivity};
use bcspec_core::classical::{self, Domain, Termination};
use bcspec_core::propagator::{
    self, image_kernel, kernel_distance, path_kernel_grid, representability_report, spectral_kernel, HeatKernel,
    KernelDistance, PathMethod, PathRules, ReportBudget,
};
use bcspec_core::spectral::{edge_state_scan, lowest_levels, DEFAULT_KAPPA_MAX};
use serde_json::{json, Map, Value};

use crate::config::{parse_list, positive, select_bc, Command, Effective, Options, Selection};
use crate::output::{csv, fmt17, json_doc, json_num, Sink};
use crate::CliError;

pub fn run(cmd: Command, o: &Options) -> Result<(), CliError> {
    let sink = Sink { dir: o.out.clone() };
    match cmd {
        Command::Spectrum => spectrum(o, &sink),
        Command::Edge => edge(o, &sink),
        Command::Kernel => kernel(o, &sink),
        Command::Compare => compare(o, &sink),
        Command::Classical => classical_run(o, &sink),
        Command::Distance => distance(o, &sink),
    }
}

fn grid_n(o: &Options, eff: &mut Effective, default: usize) -> Result<usize, CliError> {
    let n = o.grid_n.unwrap_or(default);
    if n < 2 {
        return Err(CliError::Config(format!("--grid-n must be at least 2, got {n}")));
    }
    eff.set("grid_n", n);
    Ok(n)
}

fn tau(o: &Options, eff: &mut Effective) -> Result<f64, CliError> {
    let t = positive("tau", o.tau.unwrap_or(0.1))?;
    eff.num("tau", t);
    Ok(t)
}

fn spectrum(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let sel = select_bc(o, &mut eff)?;
    let levels = o.levels.unwrap_or(10);
    if levels == 0 {
        return Err(CliError::Config("--levels must be positive".into()));
    }
    eff.set("levels", levels);
    let n = grid_n(o, &mut eff, 201)?;
    let sol = lowest_levels(&sel.unitary, levels, n)?;
    let mut rows = Vec::new();
    let mut samples: Vec<&Vec<bcspec_core::Complex64>> = Vec::new();
    for l in &sol.levels {
        for f in &l.eigenfunctions {
            if rows.len() < levels {
                rows.push(vec![(rows.len() + 1).to_string(), fmt17(l.energy), l.multiplicity.to_string()]);
                samples.push(f);
            }
        }
    }
    let text = csv("spectrum", &eff, None, &["n", "energy", "multiplicity"], &rows);
    sink.emit("spectrum.csv", &text, true)?;

    let mut cols: Vec<String> = vec!["x".into()];
    for k in 1..=samples.len() {
        cols.push(format!("re_psi{k}"));
        cols.push(format!("im_psi{k}"));
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let frows: Vec<Vec<String>> = sol
        .grid
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut r = vec![fmt17(*x)];
            for s in &samples {
                r.push(fmt17(s[i].re));
                r.push(fmt17(s[i].im));
            }
            r
        })
        .collect();
    sink.emit("eigenfunctions.csv", &csv("spectrum", &eff, None, &col_refs, &frows), false)?;
    Ok(())
}

fn edge(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let sel = select_bc(o, &mut eff)?;
    let ts = parse_list("t", o.t.as_deref().unwrap_or("0.4,0.2,0.1,0.05"))?;
    eff.set("t", ts.iter().map(|t| json_num(*t)).collect::<Vec<_>>());
    let kmax = positive("kappa-max", o.kappa_max.unwrap_or(DEFAULT_KAPPA_MAX))?;
    eff.num("kappa_max", kmax);
    let table = edge_state_scan(&sel.unitary, &ts, kmax)?;
    let mut rows = Vec::new();
    for row in &table {
        let tan2 = (0.5 * row.t).tan().powi(2);
        for (k, e) in row.levels.iter().enumerate() {
            rows.push(vec![fmt17(row.t), (k + 1).to_string(), fmt17(*e), fmt17(e * tan2)]);
        }
    }
    sink.emit("edge.csv", &csv("edge", &eff, None, &["t", "level", "energy", "energy_tan2_half_t"], &rows), true)?;
    Ok(())
}

/// Path rules reproducing a named family, where one exists.
fn path_rules(sel: &Selection) -> Result<PathRules, CliError> {
    let unsupported = |name: &str| CliError::Module {
        kind: "UnsupportedFamily",
        msg: format!("no path-sum rules for {name}"),
    };
    match sel.family {
        Some(Family::Dirichlet) => Ok(PathRules::dirichlet()),
        Some(Family::Neumann) => Ok(PathRules::neumann()),
        Some(Family::Periodic) => Ok(PathRules::wrap(0.0)),
        Some(Family::PseudoPeriodic { eps }) => Ok(PathRules::wrap(eps)),
        Some(Family::DeltaCircle { a }) => Ok(PathRules::wrap(0.0).with_site_potential(0.0, a)),
        Some(Family::RobinM0 { rho0, rho1 }) => {
            Ok(PathRules::new(ClassicalBC { alpha: Isometry::Identity, rho: Reflectivity::Endpoints([rho0, rho1]) }))
        }
        Some(f @ Family::RobinM1 { .. }) => Err(unsupported(f.name())),
        None => Err(unsupported("a raw matrix")),
    }
}

fn mc_method(o: &Options, eff: &mut Effective, paths: usize) -> Result<PathMethod, CliError> {
    let seed = o.seed.ok_or_else(|| CliError::Config("Monte Carlo needs --seed".into()))?;
    let steps = o.steps.unwrap_or(16);
    if paths == 0 || steps == 0 {
        return Err(CliError::Config("--paths and --steps must be positive".into()));
    }
    eff.set("paths", paths);
    eff.set("steps", steps);
    Ok(PathMethod::MonteCarlo { paths, steps, seed: Some(seed) })
}

fn kernel_csv(k: &HeatKernel, eff: &Effective, seed: Option<u64>) -> String {
    let n = k.n();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = k.at(i, j);
            rows.push(vec![fmt17(k.grid[i]), fmt17(k.grid[j]), fmt17(v.re), fmt17(v.im)]);
        }
    }
    csv("kernel", eff, seed, &["x", "y", "re_K", "im_K"], &rows)
}

fn kernel(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let sel = select_bc(o, &mut eff)?;
    let tau = tau(o, &mut eff)?;
    let n = grid_n(o, &mut eff, 41)?;
    let method = o.method.as_deref().unwrap_or("spectral").to_ascii_lowercase();
    eff.set("method", method.as_str());
    let mut seed = None;
    let k = match method.as_str() {
        "spectral" => {
            if let Some(m) = o.modes {
                eff.set("modes", m);
            }
            spectral_kernel(&sel.unitary, tau, n, o.modes)?
        }
        "images" => {
            let fam = sel.family.ok_or_else(|| CliError::Module {
                kind: "UnsupportedFamily",
                msg: "images need a named family".into(),
            })?;
            image_kernel(&fam, tau, n, None)?
        }
        "lattice" => {
            let sites = o.sites.unwrap_or(2000);
            eff.set("sites", sites);
            path_kernel_grid(&path_rules(&sel)?, tau, n, PathMethod::Lattice { sites })?
        }
        "monte_carlo" | "mc" => {
            let m = mc_method(o, &mut eff, o.paths.unwrap_or(100_000))?;
            seed = o.seed;
            path_kernel_grid(&path_rules(&sel)?, tau, n, m)?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown --method '{other}' (spectral, images, lattice, monte_carlo)"
            )))
        }
    };
    sink.emit("kernel.csv", &kernel_csv(&k, &eff, seed), true)?;
    Ok(())
}

fn distance_json(d: &KernelDistance) -> Value {
    json!({ "l2": json_num(d.l2), "sup": json_num(d.sup) })
}

fn params_json(params: &[(impl AsRef<str>, f64)]) -> Value {
    Value::Object(params.iter().map(|(k, v)| (k.as_ref().to_string(), json_num(*v))).collect::<Map<_, _>>())
}

fn compare(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let sel = select_bc(o, &mut eff)?;
    let tau = tau(o, &mut eff)?;
    let n = grid_n(o, &mut eff, 41)?;
    let scale = o.budget_scale.unwrap_or(1);
    if scale == 0 {
        return Err(CliError::Config("--budget-scale must be positive".into()));
    }
    eff.set("budget_scale", scale);
    let budget = ReportBudget { grid_n: n, ..ReportBudget::default() }.scaled(scale);

    let spectral = spectral_kernel(&sel.unitary, tau, n, None)?;
    let mut checks = Map::new();
    if let Some(f) = sel.family {
        if let Ok(img) = image_kernel(&f, tau, n, None) {
            checks.insert("images".into(), distance_json(&kernel_distance(&spectral, &img)?));
        }
    }
    if let Ok(rules) = path_rules(&sel) {
        let sites = o.sites.unwrap_or(1000);
        eff.set("sites", sites);
        let lat = path_kernel_grid(&rules, tau, n, PathMethod::Lattice { sites })?;
        checks.insert("lattice".into(), distance_json(&kernel_distance(&spectral, &lat)?));
        if let Some(paths) = o.paths {
            if rules.site_potential.is_none() {
                let m = mc_method(o, &mut eff, paths)?;
                let mc = path_kernel_grid(&rules, tau, n, m)?;
                checks.insert("monte_carlo".into(), distance_json(&kernel_distance(&spectral, &mc)?));
            }
        }
    }
    let seed = o.seed;

    let r = representability_report(&sel.unitary, tau, &budget)?;
    let candidates: Vec<Value> = r
        .candidates
        .iter()
        .map(|c| {
            json!({
                "family": c.family,
                "params": params_json(&c.params),
                "residual_L2": json_num(c.residual_l2),
                "residual_sup": json_num(c.residual_sup),
            })
        })
        .collect();
    let body = json!({
        "kernel_distances": Value::Object(checks),
        "best_family": r.best.family,
        "best_params": params_json(&r.best.params),
        "residual_L2": json_num(r.best.residual_l2),
        "residual_sup": json_num(r.best.residual_sup),
        "manifold_distance": json_num(r.manifold_distance),
        "budget": {
            "grid_n": budget.grid_n,
            "eps_points": budget.eps_points,
            "a_points": budget.a_points,
            "a_range": json_num(budget.a_range),
            "rho_points": budget.rho_points,
            "delta_channel": budget.delta_channel,
        },
        "seed": seed,
        "candidates": candidates,
    });
    sink.emit("compare.json", &json_doc("compare", &eff, seed, body), true)?;
    Ok(())
}

fn pair(name: &str, s: &str, dim: usize) -> Result<[f64; 2], CliError> {
    let v = parse_list(name, s)?;
    match (dim, v.as_slice()) {
        (1, [x]) => Ok([*x, 0.0]),
        (2, [x, y]) => Ok([*x, *y]),
        _ => Err(CliError::Config(format!("--{name} needs {dim} component(s), got {}", v.len()))),
    }
}

fn classical_run(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let kind = o.domain.as_deref().unwrap_or("interval").to_ascii_lowercase();
    let size = parse_list("size", o.size.as_deref().unwrap_or(if kind == "rectangle" { "1,1" } else { "1" }))?;
    let domain = match (kind.as_str(), size.as_slice()) {
        ("interval", [l]) => Domain::Interval { length: *l },
        ("disk", [r]) => Domain::Disk { radius: *r },
        ("rectangle", [w, h]) => Domain::Rectangle { width: *w, height: *h },
        ("interval" | "disk" | "rectangle", _) => {
            return Err(CliError::Config(format!("--size has the wrong number of values for {kind}")))
        }
        (other, _) => return Err(CliError::Config(format!("unknown --domain '{other}' (interval, disk, rectangle)"))),
    };
    eff.set("domain", kind.as_str());
    eff.set("size", size.iter().map(|v| json_num(*v)).collect::<Vec<_>>());
    let dim = if kind == "interval" { 1 } else { 2 };

    let alpha_name = o.alpha.as_deref().unwrap_or("identity").to_ascii_lowercase();
    let alpha = match alpha_name.as_str() {
        "identity" => Isometry::Identity,
        "swap" => Isometry::Swap,
        "rotation" => {
            let t = o.turn.ok_or_else(|| CliError::Config("--alpha rotation needs --turn".into()))?;
            eff.num("turn", t);
            Isometry::Rotation(t)
        }
        other => return Err(CliError::Config(format!("unknown --alpha '{other}' (identity, swap, rotation)"))),
    };
    eff.set("alpha", alpha_name.as_str());
    let rho_v = parse_list("rho", o.rho.as_deref().unwrap_or("1"))?;
    let rho = match rho_v.as_slice() {
        [r] => Reflectivity::Uniform(*r),
        [a, b] => Reflectivity::Endpoints([*a, *b]),
        [a, b, c, d] => Reflectivity::Sides([*a, *b, *c, *d]),
        _ => return Err(CliError::Config("--rho takes 1, 2 or 4 values".into())),
    };
    eff.set("rho", rho_v.iter().map(|v| json_num(*v)).collect::<Vec<_>>());
    let cbc = ClassicalBC::new(alpha, rho)?;

    let (x0, v0) = match (&o.x0, &o.v0, dim) {
        (Some(x), Some(v), _) => (pair("x0", x, dim)?, pair("v0", v, dim)?),
        (None, None, 1) => ([0.25, 0.0], [1.0, 0.0]),
        _ => return Err(CliError::Config("--x0 and --v0 are required in 2D (and go together)".into())),
    };
    eff.set("x0", x0[..dim].iter().map(|v| json_num(*v)).collect::<Vec<_>>());
    eff.set("v0", v0[..dim].iter().map(|v| json_num(*v)).collect::<Vec<_>>());
    let t_final = positive("t-final", o.t_final.unwrap_or(2.0))?;
    eff.num("t_final", t_final);
    let max_bounces = o.max_bounces.unwrap_or(10_000);
    eff.set("max_bounces", max_bounces);

    let tr = classical::evolve(&domain, &cbc, x0, v0, t_final, max_bounces)?;
    let rows: Vec<Vec<String>> = tr
        .rows()
        .iter()
        .map(|r| {
            vec![
                fmt17(r.t),
                fmt17(r.position[0]),
                fmt17(r.position[1]),
                fmt17(r.velocity[0]),
                fmt17(r.velocity[1]),
                r.event.name().to_string(),
            ]
        })
        .collect();
    sink.emit("trajectory.csv", &csv("classical", &eff, None, &["t", "x", "y", "vx", "vy", "event"], &rows), true)?;

    let audit: Vec<Value> = classical::momentum_audit(&tr)
        .iter()
        .map(|a| {
            json!({
                "t": json_num(a.t),
                "rho": json_num(a.rho),
                "normal_ratio": json_num(a.normal_ratio),
                "tangential_ratio": json_num(a.tangential_ratio),
                "tangential_turn": json_num(a.tangential_turn),
                "energy_factor": json_num(a.energy_factor()),
            })
        })
        .collect();
    let termination = match tr.termination {
        Termination::Time => "time",
        Termination::Absorbed => "absorbed",
        Termination::MaxBounces => "max_bounces",
    };
    let body = json!({
        "action": json_num(classical::action(&tr)),
        "bounces": tr.bounces.len(),
        "termination": termination,
        "audit": audit,
    });
    sink.emit("classical.json", &json_doc("classical", &eff, None, body), false)?;
    Ok(())
}

fn distance(o: &Options, sink: &Sink) -> Result<(), CliError> {
    let mut eff = Effective::default();
    let sel = select_bc(o, &mut eff)?;
    let d = manifold_distance(&sel.unitary);
    let body = json!({
        "manifold_distance": json_num(d.distance),
        "argmin": { "branch": d.argmin.name(), "params": params_json(&d.argmin.params()) },
    });
    sink.emit("distance.json", &json_doc("distance", &eff, None, body), true)?;
    Ok(())
}

impl From<propagator::PropagatorError> for CliError {
    fn from(e: propagator::PropagatorError) -> Self {
        CliError::Module { kind: e.kind(), msg: e.to_string() }
    }
}
