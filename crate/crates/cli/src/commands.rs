use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use threshold_lab::chains::{
    burst_laws, density_laws, normalization_constant, simulate_direct, simulate_reduced, sink_at_epicenter_law,
    sink_at_epicenter_limit, theoretical_joint, theta_z, DriveDistribution, ReducedChain, TableFreeChain,
    ThresholdSample,
};
use threshold_lab::decompose::decompose_without_table;
use threshold_lab::io::{
    generator_csv, parse_alpha, parse_chain, parse_graph, parse_graph_spec, parse_sandpile, rec_table_csv, write_graph,
};
use threshold_lab::recurrent::RecTable;
use threshold_lab::renewal::{aperiodicity_gcd, limit_law, simulate_crossing, stationary};
use threshold_lab::replicas::run_replicas;
use threshold_lab::stats::{
    chi_square, law_to_f64, mutual_information, rational_to_f64, tv_distance, Histogram, MeanEstimate,
};
use threshold_lab::verify::{run_suite, Suite};
use threshold_lab::waves::{
    enumerate_forests, refined_limit_law, simulate_refined, toppling_set_histogram, toppling_set_law, wave_counts,
    WaveTable, MAX_FOREST_VERTICES,
};
use threshold_lab::{MultiGraph, Sandpile, VertexId};

use crate::output::Output;
use crate::{
    DecomposeArgs, DriveArgs, EnumerateArgs, GenArgs, GraphArgs, LawsArgs, Mode, RenewalArgs, SimulateArgs,
    VerificationFailed, VerifyArgs, WavesArgs,
};

const SEED_ENV: &str = "THRESHOLD_LAB_SEED";
const DEFAULT_H: i64 = -40;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(a: &GraphArgs) -> Result<(MultiGraph, VertexId)> {
    let g = match (&a.graph, &a.gen) {
        (Some(src), None) => match src.strip_prefix("gen:") {
            Some(spec) => parse_graph_spec(spec)?,
            None => parse_graph(&read(Path::new(src))?)?,
        },
        (None, Some(spec)) => parse_graph_spec(spec)?,
        _ => bail!("give exactly one of --graph or --gen"),
    };
    let z = a.sink.unwrap_or(g.n() - 1);
    g.check_vertex(z)?;
    Ok((g, z))
}

fn load_alpha(spec: &str, n: usize) -> Result<DriveDistribution> {
    let alpha = if spec == "uniform" { DriveDistribution::uniform(n) } else { parse_alpha(&read(Path::new(spec))?)? };
    if alpha.n() != n {
        bail!("alpha has {} entries but the graph has {n} vertices", alpha.n());
    }
    Ok(alpha)
}

fn load_s0(h: Option<i64>, s0: Option<&Path>, n: usize, default_h: Option<i64>) -> Result<Sandpile> {
    let s = match (h, s0) {
        (_, Some(path)) => parse_sandpile(&read(path)?)?,
        (Some(h), None) => Sandpile::constant(n, h),
        (None, None) => match default_h {
            Some(h) => Sandpile::constant(n, h),
            None => bail!("give --h or --s0"),
        },
    };
    if s.len() != n {
        bail!("initial sandpile has {} entries but the graph has {n} vertices", s.len());
    }
    Ok(s)
}

fn drive_inputs(d: &DriveArgs, n: usize) -> Result<(DriveDistribution, Sandpile)> {
    Ok((load_alpha(&d.alpha, n)?, load_s0(d.h, d.s0.as_deref(), n, Some(DEFAULT_H))?))
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not a seed")),
        Err(_) => Ok(0),
    }
}

fn s<T: Display>(x: T) -> String {
    x.to_string()
}

fn check_tv(tv: f64, max: Option<f64>, what: &str) -> Result<()> {
    match max {
        Some(m) if tv >= m || tv.is_nan() => {
            Err(VerificationFailed(format!("{what} TV distance {tv} is not below {m}")).into())
        }
        _ => Ok(()),
    }
}

/// Rows `key.., count, frequency, mass` over the union of both supports.
fn compare_rows<K: Ord + Clone>(
    hist: &Histogram<K>,
    law: &BTreeMap<K, f64>,
    key: impl Fn(&K) -> Vec<String>,
) -> Vec<Vec<String>> {
    let total = hist.total().max(1) as f64;
    let keys: BTreeSet<K> = law.keys().cloned().chain(hist.iter().map(|(k, _)| k.clone())).collect();
    keys.iter()
        .map(|k| {
            let mut row = key(k);
            let c = hist.count(k);
            row.extend([s(c), s(c as f64 / total), s(law.get(k).copied().unwrap_or(0.0))]);
            row
        })
        .collect()
}

fn graph_json(g: &MultiGraph, z: VertexId, kappa: Option<usize>) -> Value {
    json!({ "n": g.n(), "sink": z, "edges": g.edge_count(), "undirected": g.is_bidirected(), "kappa": kappa })
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let text = write_graph(&parse_graph_spec(&a.gen)?);
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn enumerate(a: &EnumerateArgs) -> Result<()> {
    let start = Instant::now();
    let (g, z) = load_graph(&a.graph)?;
    let t = RecTable::enumerate_with_cap(&g, z, a.cap)?;
    let mut out = Output::new(a.out.clone(), false, false)?;
    out.write_file("rec_states.csv", rec_table_csv(&t).as_bytes())?;
    out.write_file("generators.csv", generator_csv(&t).as_bytes())?;
    let totals: BTreeMap<i64, usize> = (0..t.kappa()).fold(BTreeMap::new(), |mut m, r| {
        *m.entry(t.total(r)).or_insert(0) += 1;
        m
    });
    out.summary(&json!({
        "graph": graph_json(&g, z, Some(t.kappa())),
        "matrix_tree_kappa": g.spanning_tree_count(z)?.to_string(),
        "states_by_total": totals,
    }))?;
    out.manifest("enumerate", a, None, start.elapsed().as_secs_f64())
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let (g, z) = load_graph(&a.graph)?;
    let s0 = load_s0(a.h, a.s0.as_deref(), g.n(), None)?;
    let d = decompose_without_table(&g, &s0, z)?;
    let doc = json!({
        "sink": z,
        "s": s0.values(),
        "rho": d.rho.values(),
        "m": d.m,
        "v": d.v,
        "stabilizable": d.is_stabilizable(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn threshold_summary(
    g: &MultiGraph,
    t: &RecTable,
    alpha: &DriveDistribution,
    samples: &[ThresholdSample],
    out: &mut Output,
) -> Result<(Value, f64)> {
    let n = g.n();
    let at_zero = samples.iter().filter(|x| x.epicenter.is_none()).count();
    let moved: Vec<&ThresholdSample> = samples.iter().filter(|x| x.epicenter.is_some()).collect();

    let joint_law = theoretical_joint(t, alpha)?;
    let joint_f = law_to_f64(&joint_law.mass);
    let joint: Histogram<(VertexId, usize, u64)> =
        moved.iter().map(|x| (x.epicenter.unwrap(), x.rho_index, x.m_tau as u64)).collect();
    let tv_joint = tv_distance(&joint, &joint_f);
    out.table(
        "joint",
        &["i", "state_index", "m", "count", "frequency", "mass"],
        &compare_rows(&joint, &joint_f, |&(i, r, m)| vec![s(i), s(r), s(m)]),
    )?;

    let epi_law: BTreeMap<VertexId, f64> = (0..n).map(|i| (i, rational_to_f64(alpha.prob(i)))).collect();
    let epi = joint.map_keys(|k| k.0);
    let epi_counts: Vec<u64> = (0..n).map(|i| epi.count(&i)).collect();
    let epi_chi = chi_square(&epi_counts, &epi_law.values().copied().collect::<Vec<_>>());
    out.table("epicenter", &["i", "count", "frequency", "mass"], &compare_rows(&epi, &epi_law, |i| vec![s(i)]))?;

    let theta: BTreeMap<usize, f64> = theta_z(t, alpha)?.iter().map(rational_to_f64).enumerate().collect();
    let rho_hist = joint.map_keys(|k| k.1);
    out.table("rho", &["state_index", "count", "frequency", "mass"], &compare_rows(&rho_hist, &theta, |r| vec![s(r)]))?;

    let bursts = burst_laws(t, alpha)?;
    let q: BTreeMap<u64, f64> =
        bursts.q_limit.iter().enumerate().map(|(b, p)| (b as u64, rational_to_f64(p))).collect();
    let burst_hist: Histogram<u64> = moved.iter().filter_map(|x| x.burst).collect();
    out.table("burst", &["b", "count", "frequency", "q_limit"], &compare_rows(&burst_hist, &q, |b| vec![s(b)]))?;

    let dens = density_laws(t);
    let s_law = law_to_f64(&dens.s_tau_law);
    let s_hist: Histogram<i64> = samples.iter().map(|x| x.s_tau_total).collect();
    out.table("s_tau", &["total", "count", "frequency", "mass"], &compare_rows(&s_hist, &s_law, |v| vec![s(v)]))?;

    let zeta_s = rational_to_f64(&dens.zeta_s);
    let zeta = MeanEstimate::from_samples(&samples.iter().map(|x| x.s_tau_total as f64 / n as f64).collect::<Vec<_>>());
    let prev: Histogram<(VertexId, (VertexId, usize, i64))> = moved
        .iter()
        .filter_map(|x| x.prev_epicenter.map(|p| (p, (x.epicenter.unwrap(), x.rho_index, x.m_tau))))
        .collect();
    let tau = MeanEstimate::from_samples(&samples.iter().map(|x| x.tau as f64).collect::<Vec<_>>());

    let summary = json!({
        "graph": graph_json(g, t.sink(), Some(t.kappa())),
        "replicas": samples.len(),
        "threshold_at_time_zero": at_zero,
        "tau": tau,
        "zeta_tau": zeta,
        "zeta_s": zeta_s,
        "zeta_z_score": zeta.z_score(zeta_s),
        "tv": {
            "joint": tv_joint,
            "epicenter": tv_distance(&epi, &epi_law),
            "rho": tv_distance(&rho_hist, &theta),
            "burst": tv_distance(&burst_hist, &q),
            "s_tau": tv_distance(&s_hist, &s_law),
        },
        "chi_square": { "epicenter": epi_chi },
        "mutual_information_prev_epicenter": mutual_information(&prev),
    });
    Ok((summary, tv_joint))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let (g, z) = load_graph(&a.graph)?;
    let (alpha, s0) = drive_inputs(&a.drive, g.n())?;
    let seed = resolve_seed(a.run.seed)?;
    let mut out = Output::new(a.run.out.clone(), a.run.plot, false)?;
    let replicas = a.run.replicas;

    let mut tv_gate = None;
    let summary = if a.no_table {
        if a.mode != Mode::Reduced {
            bail!("--no-table only supports --mode reduced");
        }
        let chain = TableFreeChain::new(&g, z, &alpha, &s0)?;
        let samples = chain.simulate(replicas, seed)?;
        let n = g.n() as f64;
        let zeta = MeanEstimate::from_samples(&samples.iter().map(|x| x.s_tau_total as f64 / n).collect::<Vec<_>>());
        let s_hist: Histogram<i64> = samples.iter().map(|x| x.s_tau_total).collect();
        out.table(
            "s_tau",
            &["total", "count", "frequency", "mass"],
            &compare_rows(&s_hist, &BTreeMap::new(), |v| vec![s(v)]),
        )?;
        json!({
            "graph": graph_json(&g, z, None),
            "mode": a.mode,
            "replicas": replicas,
            "seed": seed,
            "m0": chain.initial().m,
            "zeta_tau": zeta,
        })
    } else {
        let t = RecTable::enumerate(&g, z)?;
        let mut summary = match a.mode {
            Mode::Reduced | Mode::Direct => {
                let samples = if a.mode == Mode::Reduced {
                    simulate_reduced(&ReducedChain::new(&g, &t, &alpha, &s0)?, replicas, seed)?
                } else {
                    simulate_direct(&g, &t, &alpha, &s0, replicas, seed)?
                };
                let (mut summary, tv) = threshold_summary(&g, &t, &alpha, &samples, &mut out)?;
                tv_gate = Some(("joint", tv));
                if a.mode == Mode::Direct {
                    let tables = (0..g.n()).map(|i| RecTable::enumerate(&g, i)).collect::<Result<Vec<_>, _>>()?;
                    let hist = sink_at_epicenter_law(&g, &samples, &tables)?;
                    let law = law_to_f64(&sink_at_epicenter_limit(&alpha, t.kappa()));
                    summary["tv"]["sink_at_epicenter"] = json!(tv_distance(&hist, &law));
                }
                summary
            }
            Mode::Refined => {
                let (summary, tv) = refined_summary(&g, &t, &alpha, &s0, replicas, seed, &mut out)?;
                tv_gate = Some(("toppling-set", tv));
                summary
            }
        };
        summary["mode"] = json!(a.mode);
        summary["seed"] = json!(seed);
        summary
    };
    out.summary(&summary)?;
    out.manifest("simulate", a, Some(seed), start.elapsed().as_secs_f64())?;
    if let Some((what, tv)) = tv_gate {
        check_tv(tv, a.max_tv, what)?;
    }
    Ok(())
}

fn refined_summary(
    g: &MultiGraph,
    t: &RecTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    replicas: u64,
    seed: u64,
    out: &mut Output,
) -> Result<(Value, f64)> {
    if !g.is_bidirected() {
        bail!("refined mode needs an undirected graph");
    }
    let waves = WaveTable::build(g, t)?;
    let samples = simulate_refined(g, t, &waves, alpha, s0, replicas, seed)?;
    let mut summary = json!({
        "graph": graph_json(g, t.sink(), Some(t.kappa())),
        "replicas": samples.len(),
        "threshold_at_time_zero": samples.iter().filter(|x| x.epicenter.is_none()).count(),
    });

    let law = law_to_f64(&refined_limit_law(t, &waves, alpha)?);
    let hist: Histogram<(VertexId, Sandpile, u64)> =
        samples.iter().filter_map(|x| x.epicenter.map(|i| (i, x.eta.clone(), x.m_tau as u64))).collect();
    summary["tv_refined_joint"] = json!(tv_distance(&hist, &law));
    out.table(
        "refined_joint",
        &["i", "eta", "m", "count", "frequency", "mass"],
        &compare_rows(&hist, &law, |(i, eta, m)| vec![s(i), s(eta), s(m)]),
    )?;

    let tv = if g.n() <= MAX_FOREST_VERTICES {
        let law = law_to_f64(&toppling_set_law(g, t.sink(), alpha)?);
        let hist = toppling_set_histogram(&samples);
        let tv = tv_distance(&hist, &law);
        out.table(
            "toppling_sets",
            &["i", "set", "count", "frequency", "mass"],
            &compare_rows(&hist, &law, |(i, set)| vec![s(i), format!("{set:?}")]),
        )?;
        summary["tv_toppling_set"] = json!(tv);
        tv
    } else {
        f64::NAN
    };
    Ok((summary, tv))
}

pub fn laws(a: &LawsArgs) -> Result<()> {
    let start = Instant::now();
    let (g, z) = load_graph(&a.graph)?;
    let alpha = load_alpha(&a.alpha, g.n())?;
    let t = RecTable::enumerate(&g, z)?;
    let mut out = Output::new(a.out.clone(), a.plot, true)?;

    let joint = theoretical_joint(&t, &alpha)?;
    let rows: Vec<Vec<String>> = joint.mass.iter().map(|(&(i, r, m), p)| vec![s(i), s(r), s(m), s(p)]).collect();
    out.table("joint_law", &["i", "state_index", "m", "mass"], &rows)?;

    let theta = theta_z(&t, &alpha)?;
    let rows: Vec<Vec<String>> =
        theta.iter().enumerate().map(|(r, p)| vec![s(r), s(t.state(r)), s(t.total(r)), s(p)]).collect();
    out.table("theta", &["state_index", "state", "total", "theta"], &rows)?;

    let epi = joint.epicenter_law();
    let rows: Vec<Vec<String>> = epi.iter().enumerate().map(|(i, p)| vec![s(i), s(p)]).collect();
    out.table("epicenter_law", &["i", "mass"], &rows)?;

    let bursts = burst_laws(&t, &alpha)?;
    let rows: Vec<Vec<String>> =
        bursts.p.iter().zip(&bursts.q_limit).enumerate().map(|(b, (p, q))| vec![s(b), s(p), s(q)]).collect();
    out.table("burst_law", &["b", "p", "q_limit"], &rows)?;

    let dens = density_laws(&t);
    let rows: Vec<Vec<String>> = dens.s_tau_law.iter().map(|(n, p)| vec![s(n), s(p)]).collect();
    out.table("s_tau_law", &["total", "mass"], &rows)?;

    let z_norm = normalization_constant(&t, &alpha)?;
    if a.out.is_some() {
        out.summary(&json!({
            "graph": graph_json(&g, z, Some(t.kappa())),
            "normalization": s(&z_norm),
            "zeta_s": s(&dens.zeta_s),
            "zeta_s_float": rational_to_f64(&dens.zeta_s),
        }))?;
    }
    out.manifest("laws", a, None, start.elapsed().as_secs_f64())
}

pub fn waves(a: &WavesArgs) -> Result<()> {
    let start = Instant::now();
    let (g, z) = load_graph(&a.graph)?;
    if !g.is_bidirected() {
        bail!("waves are defined for undirected graphs only");
    }
    let mut out = Output::new(a.run.out.clone(), a.run.plot, false)?;
    let tables = (0..g.n()).map(|v| RecTable::enumerate(&g, v)).collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    let forests_ok = g.n() <= MAX_FOREST_VERTICES;
    for t in &tables {
        let sink = t.sink();
        for i in (0..g.n()).filter(|&i| i != sink) {
            let dynamic = wave_counts(&g, t, i)?;
            let mut row =
                vec![s(i), s(sink), s(dynamic.zeroth), s(dynamic.nonzero), s(dynamic.last), s(dynamic.bursting)];
            if forests_ok {
                let f = enumerate_forests(&g, i, sink)?;
                if f != dynamic {
                    mismatches.push(format!("i = {i}, z = {sink}"));
                }
                row.extend([s(f.zeroth), s(f.nonzero), s(f.last), s(f.bursting), s(f == dynamic)]);
            }
            rows.push(row);
        }
    }
    let mut header = vec!["i", "z", "zeroth", "nonzero", "last", "bursting"];
    if forests_ok {
        header.extend(["trees", "forests", "forests_i_adj_tz", "forests_z_adj_ti", "match"]);
    }
    out.table("wave_counts", &header, &rows)?;

    let mut summary = json!({
        "graph": graph_json(&g, z, Some(tables[0].kappa())),
        "pairs": rows.len(),
        "forest_check": forests_ok,
        "mismatches": mismatches,
    });
    let mut tv = None;
    let seed = resolve_seed(a.run.seed)?;
    if a.run.replicas > 0 {
        let (alpha, s0) = drive_inputs(&a.drive, g.n())?;
        let (refined, t) = refined_summary(&g, &tables[z], &alpha, &s0, a.run.replicas, seed, &mut out)?;
        summary["threshold_wave"] = refined;
        summary["seed"] = json!(seed);
        tv = Some(t);
    }
    out.summary(&summary)?;
    out.manifest("waves", a, Some(seed), start.elapsed().as_secs_f64())?;
    if !mismatches.is_empty() {
        return Err(
            VerificationFailed(format!("wave counts differ from forest counts at {}", mismatches.join("; "))).into()
        );
    }
    if let Some(tv) = tv {
        check_tv(tv, a.max_tv, "toppling-set")?;
    }
    Ok(())
}

pub fn renewal(a: &RenewalArgs) -> Result<()> {
    let start = Instant::now();
    let chain = parse_chain(&read(&a.chain)?)?;
    if a.x0 >= chain.k() {
        bail!("start state {} out of range for {} states", a.x0, chain.k());
    }
    if a.n == 0 {
        bail!("crossing level must be positive");
    }
    let seed = resolve_seed(a.run.seed)?;
    let mut out = Output::new(a.run.out.clone(), a.run.plot, false)?;
    let gcd = aperiodicity_gcd(&chain);
    let law = limit_law(&chain)?;
    let law_f: BTreeMap<(usize, usize, u64), f64> = law_to_f64(&law.mass);
    let crossings = run_replicas(a.run.replicas, seed, |_, rng| simulate_crossing(&chain, a.x0, a.n, rng))?;
    let hist: Histogram<(usize, usize, u64)> = crossings.iter().map(|c| (c.prev, c.at, c.overshoot)).collect();
    let tv = tv_distance(&hist, &law_f);
    out.table(
        "crossing",
        &["x", "y", "m", "count", "frequency", "mass"],
        &compare_rows(&hist, &law_f, |&(x, y, m)| vec![s(x), s(y), s(m)]),
    )?;
    out.summary(&json!({
        "states": chain.k(),
        "gcd": gcd,
        "normalization": s(&law.z),
        "stationary": stationary(&chain)?,
        "n": a.n,
        "x0": a.x0,
        "replicas": a.run.replicas,
        "seed": seed,
        "tv": tv,
    }))?;
    out.manifest("renewal", a, Some(seed), start.elapsed().as_secs_f64())?;
    check_tv(tv, a.max_tv, "crossing")
}

pub fn verify(a: &VerifyArgs) -> Result<()> {
    let (g, _) = load_graph(&a.graph)?;
    let suite: Suite = a.suite.parse()?;
    let seed = resolve_seed(a.seed)?;
    let report = run_suite(suite, &g, seed)?;
    print!("{report}");
    let failed: Vec<&str> = report.failures().map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(VerificationFailed(format!("violated invariants: {}", failed.join(", "))).into());
    }
    let passed: u64 = report.checks.iter().map(|c| c.passed).sum();
    println!("{} checks, {passed} cases passed", report.checks.len());
    Ok(())
}
