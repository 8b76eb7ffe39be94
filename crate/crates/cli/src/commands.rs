use std::io::Write;
use std::path::{Path, PathBuf};

use samdiag_core::datagen::{
    init_balanced, init_gaussian, load_dataset_csv, one_point, two_cluster, GeneratorSpec, InitScale,
};
use samdiag_core::experiments::{
    dominant_index, heatmap, lb_curve, write_heatmap_csv, write_heatmap_json, write_lb_csv,
    write_trajectory_csv, HeatmapConfig,
};
use samdiag_core::l2::{estimate_alpha1, regime_certificate, thresholds, Alpha1Config, RegimeLabel};
use samdiag_core::maxmargin::{angle_to, kkt_residual, l1_maxmargin, l2_maxmargin, separability_check};
use samdiag_core::numeric::{fmt17, linspace, norm2, parse_f64};
use samdiag_core::{
    integrate, FeatureVector, FlowKind, LabeledDataset, PerturbationKind, SimConfig, TrajectoryOutcome,
};

use crate::args::{
    Flow, HeatmapArgs, Init, LbArgs, MaxmarginArgs, Method, MuRho, Norm, RegimeArgs, SimulateArgs,
    ThresholdsArgs,
};
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn features(mr: &MuRho) -> Res<FeatureVector> {
    Ok(FeatureVector::new(mr.mu.clone())?)
}

/// A dataset plus the feature vector it was generated from, if any.
struct Data {
    data: LabeledDataset,
    mu: Option<FeatureVector>,
}

fn parse_list(s: &str, what: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|v| parse_f64(v.trim()).ok_or_else(|| CliError::Usage(format!("bad number {v:?} in {what}"))))
        .collect()
}

fn load_data(spec: &str, seed: u64) -> Res<Data> {
    if let Some(rest) = spec.strip_prefix("onepoint:") {
        let mu = FeatureVector::new(parse_list(rest, "onepoint")?)?;
        return Ok(Data { data: one_point(&mu), mu: Some(mu) });
    }
    if let Some(rest) = spec.strip_prefix("twocluster:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [m, sigma, n] = parts[..] else {
            return Err(CliError::Usage(format!("expected twocluster:MU:SIGMA:N, got {spec:?}")));
        };
        let mu = FeatureVector::new(parse_list(m, "twocluster")?)?;
        let sigma = parse_f64(sigma).ok_or_else(|| CliError::Usage(format!("bad sigma {sigma:?}")))?;
        let n = n.parse().map_err(|_| CliError::Usage(format!("bad n {n:?}")))?;
        let data = two_cluster(&GeneratorSpec { mu: mu.clone(), sigma, n, seed })?;
        return Ok(Data { data, mu: Some(mu) });
    }
    Ok(Data { data: load_dataset_csv(Path::new(spec))?, mu: None })
}

/// Position of canonical coordinate `k` in the caller's order.
fn user_index(mu: Option<&FeatureVector>, k: usize) -> usize {
    mu.map_or(k, |m| m.user_order()[k])
}

fn to_user(mu: Option<&FeatureVector>, v: &[f64]) -> Vec<f64> {
    mu.map_or_else(|| v.to_vec(), |m| m.to_user_order(v))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn threads() -> Res<Option<usize>> {
    match std::env::var("SAMDIAG_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("SAMDIAG_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

fn alpha1_of(mu: &FeatureVector, rho: f64) -> Res<f64> {
    Ok(estimate_alpha1(mu, rho, &Alpha1Config::default())?.alpha1)
}

pub fn simulate(a: &SimulateArgs) -> Res<()> {
    let Data { data, mu } = match &a.dataset {
        Some(spec) => load_data(spec, a.seed)?,
        None => {
            let mu = features(&a.mr)?;
            Data { data: one_point(&mu), mu: Some(mu) }
        }
    };
    let d = data.dim();
    let state = match (a.init, &a.alpha_vec) {
        (Init::Gaussian, Some(_)) => {
            return Err(CliError::Usage("--alpha-vec only applies to balanced initialization".into()))
        }
        (Init::Gaussian, None) => init_gaussian(d, a.depth, a.alpha, a.seed)?,
        (Init::Balanced, None) => init_balanced(d, a.depth, &InitScale::Scalar(a.alpha))?,
        (Init::Balanced, Some(v)) => {
            if v.len() != d {
                return Err(CliError::Usage(format!("--alpha-vec has {} entries, need {d}", v.len())));
            }
            let canonical = (0..d).map(|k| v[user_index(mu.as_ref(), k)]).collect();
            init_balanced(d, a.depth, &InitScale::Vector(canonical))?
        }
    };
    let kind = match a.method {
        Method::Gd => PerturbationKind::None,
        Method::SamL2 => PerturbationKind::L2(a.mr.rho),
        Method::SamLinf => PerturbationKind::LInf(a.mr.rho),
    };
    let flow = match a.flow {
        Flow::Discrete => FlowKind::Discrete { eta: a.eta },
        Flow::Original => FlowKind::OriginalFlow,
        Flow::Rescaled => FlowKind::RescaledFlow,
    };
    let cfg = SimConfig {
        dt: a.dt,
        t_max: a.t_max,
        sample_stride: a.stride,
        blowup_threshold: a.blowup_threshold,
        collapse_threshold: a.collapse_threshold,
        log_domain: false,
    };
    let tr = integrate(&state, &data, kind, flow, &cfg)?;
    if let Some(out) = &a.out {
        write_trajectory_csv(&tr, out)?;
    }

    let last = tr.len() - 1;
    let beta = tr.beta(last);
    let outcome = match &tr.outcome {
        TrajectoryOutcome::Collapsed { time } => format!("collapsed at t = {time}"),
        TrajectoryOutcome::BlownUp { time, indices } => {
            let idx: Vec<String> = indices.iter().map(|&k| (user_index(mu.as_ref(), k) + 1).to_string()).collect();
            format!("blown-up at t = {time} (coordinates {})", idx.join(","))
        }
        TrajectoryOutcome::HorizonReached | TrajectoryOutcome::Running => "horizon".to_string(),
    };
    println!("outcome: {outcome}");
    println!("t: {}", tr.times[last]);
    println!("tau: {}", tr.tau_samples[last]);
    println!("loss: {}", tr.loss_samples[last]);
    match dominant_index(&beta, a.collapse_threshold) {
        Some(k) => println!("dominant: {}", user_index(mu.as_ref(), k) + 1),
        None => println!("dominant: none"),
    }
    let n = norm2(&beta);
    if n > 0.0 && n.is_finite() {
        let dir: Vec<f64> = beta.iter().map(|b| b / n).collect();
        println!("direction: {}", fmt_vec(&to_user(mu.as_ref(), &dir)));
    }
    let angle = |sol: samdiag_core::Result<samdiag_core::maxmargin::MaxMarginSolution>| match sol {
        Ok(s) => angle_to(&beta, &s).map_or_else(|e| format!("n/a ({e})"), |v| v.to_string()),
        Err(e) => format!("n/a ({e})"),
    };
    if matches!(separability_check(&data), Ok(true)) {
        println!("angle_l1: {}", angle(l1_maxmargin(&data)));
        println!("angle_l2: {}", angle(l2_maxmargin(&data)));
    }
    Ok(())
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn heatmap_cmd(a: &HeatmapArgs) -> Res<()> {
    let mu = features(&a.mr)?;
    if a.alpha_steps == 0 || a.t_steps == 0 || !(a.alpha_min > 0.0 && a.alpha_min <= a.alpha_max) {
        return Err(CliError::Usage("need 0 < alpha-min <= alpha-max and nonzero step counts".into()));
    }
    if !(a.t_max > 0.0) {
        return Err(CliError::Usage("t-max must be positive".into()));
    }
    let mut cfg = HeatmapConfig::new(
        mu,
        a.mr.rho,
        linspace(a.alpha_min, a.alpha_max, a.alpha_steps),
        (1..=a.t_steps).map(|k| a.t_max * k as f64 / a.t_steps as f64).collect(),
        a.method,
    );
    cfg.depth = a.depth;
    cfg.sim.dt = a.dt;
    cfg.sim.collapse_threshold = a.collapse_threshold;
    cfg.sim.blowup_threshold = a.blowup_threshold;
    cfg.eta = a.eta;
    cfg.estimate_alpha1 = !a.no_alpha1;
    cfg.threads = threads()?;
    cfg.seed = a.seed;
    let grid = heatmap(&cfg)?;
    let (csv, json) = (with_ext(&a.out, "csv"), with_ext(&a.out, "json"));
    write_heatmap_csv(&grid, &csv)?;
    write_heatmap_json(&grid, &json)?;

    println!("method: {}", a.method);
    println!("grid: {} alpha x {} t", grid.alpha_grid.len(), grid.t_grid.len());
    let d = cfg.mu.dim();
    let mut counts = vec![0usize; d + 1];
    for row in &grid.dominant {
        for c in row {
            counts[c.map_or(0, |k| k + 1)] += 1;
        }
    }
    println!("gray cells: {}", counts[0]);
    for (j, c) in counts.iter().enumerate().skip(1) {
        if *c > 0 {
            println!("dominant {j}: {c} cells");
        }
    }
    for line in &grid.regime_lines {
        println!("{}: {}", line.label, line.alpha);
    }
    println!("jstar dots: {}", grid.jstar_dots.len());
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

pub fn thresholds_cmd(a: &ThresholdsArgs) -> Res<()> {
    let mu = features(&a.mr)?;
    let mut rep = thresholds(&mu, a.mr.rho)?;
    if !a.no_alpha1 {
        rep.alpha1 = Some(alpha1_of(&mu, a.mr.rho)?);
    }
    if a.json {
        let s = serde_json::to_string_pretty(&rep).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("{s}");
        return Ok(());
    }
    println!("alpha0: {}", rep.alpha0);
    match rep.alpha1 {
        Some(v) => println!("alpha1: {v}"),
        None => println!("alpha1: not computed"),
    }
    println!("alpha_hb: {}", rep.alpha_hb);
    println!("alpha2: {}", rep.alpha2);
    println!("alpha_crit: {}", rep.alpha_crit);
    println!("alpha_r3: {}", rep.alpha_r3);
    println!("alpha_max: {}", rep.alpha_max);
    for s in &rep.staircase {
        println!("staircase: {} -> {} at alpha {}", s.index + 1, s.index + 2, s.alpha);
    }
    Ok(())
}

pub fn lb(a: &LbArgs) -> Res<()> {
    let mu = features(&a.mr)?;
    let lo = match a.alpha_lo {
        Some(v) => v,
        None => alpha1_of(&mu, a.mr.rho)?,
    };
    let table = lb_curve(&mu, a.mr.rho, lo, a.points)?;
    if let Some(note) = &table.note {
        eprintln!("note: {note}");
    }
    if let Some(out) = &a.out {
        write_lb_csv(&table, out)?;
        return Ok(());
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    let header: Vec<String> = std::iter::once("alpha".to_string())
        .chain((1..=mu.dim()).map(|j| format!("lb{j}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (alpha, row) in table.alphas.iter().zip(&table.values) {
        let cells: Vec<String> = std::iter::once(fmt17(*alpha)).chain(row.iter().map(|v| fmt17(*v))).collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    Ok(())
}

pub fn regime(a: &RegimeArgs) -> Res<()> {
    let mu = features(&a.mr)?;
    let alpha1 = match a.alpha1 {
        Some(v) => v,
        None => alpha1_of(&mu, a.mr.rho)?,
    };
    let c = regime_certificate(&mu, a.mr.rho, a.alpha, alpha1)?;
    println!("regime: {}", c.label.name());
    let (mc, ml, mh, top) = (c.m_c0, c.m_l, c.m_h0, c.m_top);
    let why = match c.label {
        RegimeLabel::Regime1a => format!("m_c(0) = {mc} <= m_L = {ml}"),
        RegimeLabel::Regime1b => format!("m_c(0) = {mc} > m_L = {ml} and alpha = {} <= alpha1 = {alpha1}", a.alpha),
        RegimeLabel::Regime2a => format!("alpha = {} > alpha1 = {alpha1} and m_c(0) = {mc} <= m_H(0) = {mh}", a.alpha),
        RegimeLabel::Regime2b => format!("m_H(0) = {mh} < m_c(0) = {mc} <= (mu_(d-1) + mu_d)/2 = {top}"),
        RegimeLabel::Regime3 => format!("m_c(0) = {mc} > (mu_(d-1) + mu_d)/2 = {top}"),
    };
    println!("certificate: {why}");
    println!(
        "thresholds: alpha0 = {}, alpha1 = {}, alpha_hb = {}, alpha2 = {}",
        c.alpha0, c.alpha1, c.alpha_hb, c.alpha2
    );
    Ok(())
}

pub fn maxmargin(a: &MaxmarginArgs) -> Res<()> {
    let Data { data, mu } = load_data(&a.dataset, a.seed)?;
    if !separability_check(&data)? {
        return Err(CliError::Runtime("dataset is not linearly separable".into()));
    }
    let mut sols = Vec::new();
    if matches!(a.norm, Norm::L1 | Norm::Both) {
        sols.push(("l1", l1_maxmargin(&data)?));
    }
    if matches!(a.norm, Norm::L2 | Norm::Both) {
        sols.push(("l2", l2_maxmargin(&data)?));
    }
    for (name, s) in &sols {
        println!("{name} direction: {}", fmt_vec(&to_user(mu.as_ref(), &s.direction)));
        println!("{name} primal: {}", fmt_vec(&to_user(mu.as_ref(), &s.primal)));
        println!("{name} objective: {}", s.objective);
        let support: Vec<String> = if *name == "l1" {
            let mut v: Vec<usize> = s.support.iter().map(|&k| user_index(mu.as_ref(), k) + 1).collect();
            v.sort_unstable();
            v.iter().map(usize::to_string).collect()
        } else {
            s.support.iter().map(|k| (k + 1).to_string()).collect()
        };
        let what = if *name == "l1" { "coordinates" } else { "examples" };
        println!("{name} support ({what}): {}", support.join(","));
        println!("{name} multiple optima: {}", s.multiple_optima);
        println!("{name} kkt residual: {:e}", kkt_residual(&data, s));
    }
    Ok(())
}

pub fn selftest() -> Res<()> {
    let results = samdiag_core::selftest::run_all();
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        println!("{} {} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} checks failed", results.len())));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
