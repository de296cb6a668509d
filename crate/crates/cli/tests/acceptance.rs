//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use causality_lab_cli::scenario::Scenario;
use causality_lab_cli::{gallery, output, render, run, Format, TaskResult};
use causality_lab_core::{
    apply_conformal, build_spacetime, connect_null, distance, excise, hausdorff_distance, null_directions_at,
    relation, semicontinuity_check, skies_intersect, sky, DistanceBackend, Event, Hole, LightRay, ModelSpec,
    Relation, ScalarField, Settings, SpacetimeModel, Verdict,
};

type Check = Result<String, String>;

fn halton(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic point in the box `[lo, hi]^dim`, index `i`, stream `s`.
fn point(i: u64, s: usize, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..dim)
        .map(|a| lo + (hi - lo) * halton(i + 1, PRIMES[(s * dim + a) % PRIMES.len()]))
        .collect()
}

fn ev(c: &[f64]) -> Event {
    Event::new(c.to_vec())
}

fn flat(m: usize) -> SpacetimeModel {
    build_spacetime(&ModelSpec::minkowski(m)).unwrap()
}

fn punctured() -> SpacetimeModel {
    excise(&flat(1), vec![Hole::point([1.0, 1.0])]).unwrap()
}

fn gallery_report(file: &str) -> Result<TaskResult, String> {
    let entry = gallery::find(file).ok_or(format!("{file} missing from gallery"))?;
    let sc = Scenario::from_toml(entry.text).map_err(|e| e.to_string())?;
    run(&sc).map(|r| r.result).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_counterexample() -> Check {
    let TaskResult::Counterexample(r) = gallery_report("counterexample.cfg")? else {
        return Err("wrong result kind".into());
    };
    ensure(r.ambient.verdict == Verdict::TheoremConfirmed, "ambient verdict")?;
    ensure((r.ambient.tau_hat - 0.5).abs() <= 1e-3, format!("ambient tau_hat {}", r.ambient.tau_hat))?;
    let miss = r.ambient_certificate_hole_miss.ok_or("no ambient certificate")?;
    ensure(miss <= 1e-6, format!("certificate misses (1,1) by {miss:e}"))?;
    ensure(
        r.punctured.verdict == Verdict::CounterexampleNoCommonNullGeodesic,
        "punctured verdict",
    )?;
    ensure(r.punctured.blocking_hole == Some(0), "blocking hole is not (1,1)")?;
    Ok(format!(
        "tau_hat = {}, certificate miss {miss:.1e}, punctured blocked by hole {:?} after {} attempts",
        r.ambient.tau_hat,
        r.hole,
        r.punctured.attempts.len()
    ))
}

fn c2_theorem_scan() -> Check {
    let TaskResult::Scan(r) = gallery_report("theorem-minkowski-2+1.cfg")? else {
        return Err("wrong result kind".into());
    };
    let [lo, hi] = r.tau_bracket;
    let residual = r.certificate.as_ref().map_or(f64::INFINITY, |c| c.residual);
    ensure(hi - lo <= 1e-6, format!("bracket width {}", hi - lo))?;
    ensure(lo <= 0.5 && 0.5 <= hi, format!("bracket [{lo}, {hi}]"))?;
    ensure(residual <= 1e-6, format!("certificate residual {residual:e}"))?;
    ensure(r.verdict == Verdict::TheoremConfirmed, "verdict")?;
    Ok(format!("bracket [{lo}, {hi}], residual {residual:.1e}"))
}

fn c3_distance_oracle() -> Check {
    let s = Settings::default();
    let mut summary = Vec::new();
    for m in [1usize, 2] {
        let model = flat(m);
        let d = m + 1;
        let (mut pairs, mut i) = (Vec::new(), 0u64);
        while pairs.len() < 100 {
            let (p, q) = (point(i, 0, d, 0.0, 1.0), point(i, 1, d, 0.0, 1.0));
            i += 1;
            let rho: f64 = (0..m).map(|k| (q[k] - p[k]).powi(2)).sum::<f64>().sqrt();
            if q[m] - p[m] > rho + 1e-3 {
                pairs.push((p, q));
            }
        }
        let (mut worst_rel, mut worst_graph, mut checked) = (0.0f64, 0.0f64, 0);
        for (p, q) in &pairs {
            let rho2: f64 = (0..m).map(|k| (q[k] - p[k]).powi(2)).sum();
            let exact = ((q[m] - p[m]).powi(2) - rho2).sqrt();
            let analytic = distance(&model, &ev(p), &ev(q), DistanceBackend::Analytic, &s).map_err(|e| e.to_string())?;
            worst_rel = worst_rel.max((analytic - exact).abs() / exact);
            let graph = distance(&model, &ev(p), &ev(q), DistanceBackend::Graph { nodes: s.graph_nodes }, &s)
                .map_err(|e| e.to_string())?;
            ensure(graph <= analytic + 1e-12, format!("graph {graph} exceeds analytic {analytic}"))?;
            if analytic >= 0.5 {
                checked += 1;
                worst_graph = worst_graph.max((analytic - graph) / analytic);
            }
        }
        ensure(worst_rel <= 1e-12, format!("m={m}: analytic relative error {worst_rel:e}"))?;
        ensure(worst_graph <= 0.05, format!("m={m}: graph relative error {worst_graph}"))?;
        summary.push(format!(
            "m={m}: analytic err {worst_rel:.1e}, graph err {:.2}% on {checked} pairs",
            100.0 * worst_graph
        ));
    }
    Ok(summary.join("; "))
}

/// Future null displacement of time extent `dt` along spatial unit `u`.
fn null_step(x: &[f64], u: &[f64], dt: f64) -> Vec<f64> {
    let m = u.len();
    let mut y = x.to_vec();
    for k in 0..m {
        y[k] += dt * u[k];
    }
    y[m] += dt;
    y
}

fn unit(i: u64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![if i % 2 == 0 { 1.0 } else { -1.0 }];
    }
    let a = 2.0 * PI * halton(i + 1, 5);
    let mut u = vec![a.cos(), a.sin()];
    u.resize(m, 0.0);
    u
}

fn c4_relation_properties() -> Check {
    let s = Settings::default();
    let models: Vec<(&str, SpacetimeModel, f64, f64)> = vec![
        ("minkowski(1)", flat(1), -2.0, 2.0),
        ("minkowski(2)", flat(2), -2.0, 2.0),
        ("cylinder(1)", build_spacetime(&ModelSpec::cylinder(1)).unwrap(), -1.2, 1.2),
        ("punctured", punctured(), -2.0, 2.0),
    ];
    let mut summary = Vec::new();
    for (name, model, lo, hi) in &models {
        let m = model.spatial_dim();
        let d = m + 1;
        let rel = |p: &Event, q: &Event| relation(model, p, q, &s).map(|r| r.relation).map_err(|e| e.to_string());
        let dist = |p: &Event, q: &Event| {
            distance(model, p, q, DistanceBackend::Analytic, &s).map_err(|e| e.to_string())
        };
        let inside = |x: &[f64]| model.contains(x).unwrap_or(false) && x[m].abs() < 3.0;

        // Pairs: quasi-random, plus every fifth one null separated by construction.
        let mut pairs = Vec::new();
        let mut i = 0u64;
        while pairs.len() < 500 {
            let mut p = point(i, 0, d, *lo, *hi);
            if m == 1 && name.starts_with("cyl") {
                p[0] = p[0].rem_euclid(2.0 * PI);
            }
            let q = if i % 5 == 0 {
                null_step(&p, &unit(i, m), 0.3 + halton(i + 1, 7))
            } else {
                point(i, 1, d, *lo, *hi)
            };
            i += 1;
            if inside(&p) && inside(&q) && model.chart_distance(&p, &q) > 1e-9 {
                pairs.push((ev(&model.normalize(p)), ev(&model.normalize(q))));
            }
        }
        let mut antisym = 0;
        for (p, q) in &pairs {
            let forward = rel(p, q)?;
            let d_pq = dist(p, q)?;
            ensure(
                (d_pq > s.delta_d) == (forward == Relation::Chronological),
                format!("{name}: d = {d_pq} but relation {forward:?} for {p:?} {q:?}"),
            )?;
            if forward != Relation::Unrelated {
                ensure(rel(q, p)? == Relation::Unrelated, format!("{name}: {p:?} and {q:?} precede each other"))?;
                antisym += 1;
            }
        }

        // Push-up on constructed triples p ≪ q ≤ r and p ≤ q ≪ r.
        let mut pushups = 0;
        for j in 0..40u64 {
            let p = point(j + 1000, 2, d, *lo, *hi);
            let timelike = {
                let mut v = unit(j + 7, m).iter().map(|c| 0.4 * c).collect::<Vec<_>>();
                v.push(0.6);
                v
            };
            let shift = |x: &[f64], v: &[f64]| x.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>();
            let (q, r) = if j % 2 == 0 {
                let q = shift(&p, &timelike);
                let r = null_step(&q, &unit(j, m), 0.5);
                (q, r)
            } else {
                let q = null_step(&p, &unit(j, m), 0.5);
                let r = shift(&q, &timelike);
                (q, r)
            };
            if !(inside(&p) && inside(&q) && inside(&r)) {
                continue;
            }
            let (p, q, r) = (ev(&model.normalize(p)), ev(&model.normalize(q)), ev(&model.normalize(r)));
            let (pq, qr) = (rel(&p, &q)?, rel(&q, &r)?);
            let premise = (pq == Relation::Chronological && qr != Relation::Unrelated)
                || (pq != Relation::Unrelated && qr == Relation::Chronological);
            if premise {
                pushups += 1;
                ensure(rel(&p, &r)? == Relation::Chronological, format!("{name}: push-up fails at {p:?}"))?;
            }
        }
        ensure(pushups >= 20, format!("{name}: only {pushups} push-up triples"))?;

        // Reverse triangle inequality on chronological chains.
        let mut chains = 0;
        let mut j = 0u64;
        while chains < 100 {
            let p = point(j + 5000, 3, d, *lo, *hi);
            let step = |x: &[f64], k: u64| {
                let mut y = x.to_vec();
                let u = unit(k, m);
                let dt = 0.2 + 0.6 * halton(k + 1, 3);
                for a in 0..m {
                    y[a] += 0.9 * dt * halton(k + 1, 11) * u[a];
                }
                y[m] += dt;
                y
            };
            let q = step(&p, 2 * j);
            let r = step(&q, 2 * j + 1);
            j += 1;
            if !(inside(&p) && inside(&q) && inside(&r)) {
                continue;
            }
            let (p, q, r) = (ev(&model.normalize(p)), ev(&model.normalize(q)), ev(&model.normalize(r)));
            let (a, b, c) = (dist(&p, &q)?, dist(&q, &r)?, dist(&p, &r)?);
            ensure(a > 0.0 && b > 0.0, format!("{name}: chain is not chronological"))?;
            ensure(c + 1e-12 >= a + b, format!("{name}: reverse triangle fails: {c} < {a} + {b}"))?;
            chains += 1;
        }
        summary.push(format!("{name}: 500 pairs ({antisym} related), {pushups} push-ups, 100 chains"));
    }
    Ok(summary.join("; "))
}

fn c5_conformal_invariance() -> Check {
    let s = Settings::default();
    let base = flat(2);
    let deformed = apply_conformal(&base, ScalarField::ExpLinear { coeffs: vec![0.3, 0.0, 0.0] })
        .map_err(|e| e.to_string())?;
    let mut labels = BTreeMap::new();
    for i in 0..200u64 {
        let p = point(i, 0, 3, -1.0, 1.0);
        let q = if i % 10 == 0 {
            null_step(&p, &unit(i, 2), 0.4 + 0.5 * halton(i + 1, 7))
        } else {
            point(i, 1, 3, -1.0, 1.0)
        };
        let (p, q) = (ev(&p), ev(&q));
        let a = relation(&base, &p, &q, &s).map_err(|e| e.to_string())?.relation;
        let b = relation(&deformed, &p, &q, &s).map_err(|e| e.to_string())?.relation;
        ensure(a == b, format!("labels differ at {p:?} {q:?}: {a:?} vs {b:?}"))?;
        *labels.entry(format!("{a:?}")).or_insert(0) += 1;
    }
    let mut worst = 0.0f64;
    let anchor = ev(&[0.1, -0.2, 0.0]);
    let dirs = null_directions_at(&base, &anchor, 20).map_err(|e| e.to_string())?;
    for v in &dirs {
        let a = LightRay::through(&base, &anchor, &v.components, 5.0, s.step).map_err(|e| e.to_string())?;
        let b = LightRay::through(&deformed, &anchor, &v.components, 5.0, s.step).map_err(|e| e.to_string())?;
        worst = worst.max(hausdorff_distance(&base, &a, &b, s.hausdorff_samples));
    }
    ensure(worst <= 1e-4, format!("Hausdorff distance {worst:e}"))?;
    Ok(format!("labels {labels:?}; worst Hausdorff {worst:.1e} over 20 rays"))
}

fn c6_cylinder_refocus() -> Check {
    let TaskResult::Refocus(r) = gallery_report("cylinder-refocus.cfg")? else {
        return Err("wrong result kind".into());
    };
    ensure(r.probe.pass, "refocus probe fails at x=(0,0), eps=0.1")?;
    let witness = &r.strong[0];
    ensure(
        witness.report.pass && witness.report.worst_residual <= 1e-6,
        format!("strong witness residual {:e}", witness.report.worst_residual),
    )?;
    let grid = &r.strong[1..];
    ensure(grid.len() == 50, format!("{} grid points", grid.len()))?;
    ensure(grid.iter().all(|c| !c.report.pass), "strong probe passes on the theta = pi grid")?;
    let closest = grid.iter().map(|c| c.report.worst_residual).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "weak pass; strong witness residual {:.1e}; 50/50 grid failures (closest {closest:.3})",
        witness.report.worst_residual
    ))
}

fn c7_sky_coherence() -> Check {
    let s = Settings::default();
    let model = flat(2);
    let k = s.fan_for(2);
    let (mut agree, mut null_pairs) = (0, 0);
    for i in 0..50u64 {
        let p = point(i, 0, 3, -1.0, 1.0);
        let q = match i % 3 {
            0 => null_step(&p, &unit(i, 2), 0.3 + halton(i + 1, 7)),
            1 => null_step(&p, &unit(i, 2), -(0.3 + halton(i + 1, 7))),
            _ => point(i, 1, 3, -1.0, 1.0),
        };
        let (p, q) = (ev(&p), ev(&q));
        let dt = (q.t() - p.t()).abs();
        let dx = ((q.coords()[0] - p.coords()[0]).powi(2) + (q.coords()[1] - p.coords()[1]).powi(2)).sqrt();
        let closed_form = (dt - dx).abs() <= s.delta_d;
        null_pairs += closed_form as usize;
        let skies = skies_intersect(
            &model,
            &sky(&model, &p, k, &s).map_err(|e| e.to_string())?,
            &sky(&model, &q, k, &s).map_err(|e| e.to_string())?,
            s.tol_hit,
            &s,
        )
        .map_err(|e| e.to_string())?;
        let shot = connect_null(&model, &p, &q, k, s.tol_hit, &s).map_err(|e| e.to_string())?;
        ensure(
            skies.intersects == closed_form && shot.is_connected() == closed_form,
            format!("pair {i}: skies {}, shooting {}, closed form {closed_form}", skies.intersects, shot.is_connected()),
        )?;
        agree += 1;
    }
    Ok(format!("{agree}/50 agree ({null_pairs} null pairs)"))
}

fn c8_split_and_condition2() -> Check {
    let TaskResult::Split(split) = gallery_report("ray-split.cfg")? else {
        return Err("wrong result kind".into());
    };
    ensure(split.split.count == 2, format!("split count {}", split.split.count))?;
    let TaskResult::AmbientCompare(punct) = gallery_report("punctured-condition2.cfg")? else {
        return Err("wrong result kind".into());
    };
    ensure(punct.pairs.len() == 1 && punct.pairs[0].comparison.condition2_violated, "punctured pair not flagged")?;
    let TaskResult::AmbientCompare(diamond) = gallery_report("diamond-condition2.cfg")? else {
        return Err("wrong result kind".into());
    };
    ensure(diamond.pairs.len() == 20, "diamond pair count")?;
    for pair in &diamond.pairs {
        let (p, q) = (pair.p.coords(), pair.q.coords());
        ensure((q[1] - p[1]).abs() < (q[0] - p[0]).abs(), format!("pair {p:?} {q:?} is not spacelike"))?;
        ensure(!pair.comparison.condition2_violated, format!("pair {p:?} {q:?} flagged"))?;
    }
    Ok("split count 2; punctured pair flagged; 20 diamond pairs unflagged".into())
}

fn c9_semicontinuity() -> Check {
    let s = Settings::default();
    let cases: [(&str, SpacetimeModel, fn(u64) -> Vec<f64>, [f64; 2]); 3] = [
        ("flat timelike", flat(1), |n| vec![0.0, 2.0 + 1.0 / n as f64], [0.0, 2.0]),
        ("punctured null", punctured(), |n| vec![2.0 - 1.0 / n as f64, 2.0], [2.0, 2.0]),
        ("flat spacelike", flat(1), |n| vec![4.0 - 1.0 / n as f64, 2.0], [4.0, 2.0]),
    ];
    let mut out = Vec::new();
    for (name, model, q_seq, q) in cases {
        let r = semicontinuity_check(&model, &|_| vec![0.0, 0.0], &q_seq, &ev(&[0.0, 0.0]), &ev(&q), &s)
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(r.pass, format!("{name}: d = {} > liminf {}", r.d_at_limit, r.d_limit_inferior))?;
        out.push(format!("{name} d={} liminf={:.3e}", r.d_at_limit, r.d_limit_inferior));
    }
    Ok(out.join("; "))
}

fn gallery_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in gallery::GALLERY {
        let sc = Scenario::from_toml(entry.text).map_err(|e| e.to_string())?;
        let report = run(&sc).map_err(|e| e.to_string())?;
        let rendered = render(&report, &[Format::Json, Format::Csv, Format::Svg]);
        for path in output::write_all(dir, &rendered).map_err(|e| e.to_string())? {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn c10_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = gallery_files(&dir.path().join("a"))?;
    let b = gallery_files(&dir.path().join("b"))?;
    ensure(a.len() == b.len(), "different file sets")?;
    for (name, bytes) in &a {
        ensure(b.get(name) == Some(bytes), format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical", a.len()))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Check); 10] = [
        ("counterexample reproduction", 30.0, c1_counterexample),
        ("theorem scan, flat 2+1", 60.0, c2_theorem_scan),
        ("distance oracle equivalence", 120.0, c3_distance_oracle),
        ("relation classifier properties", 60.0, c4_relation_properties),
        ("conformal invariance", 120.0, c5_conformal_invariance),
        ("cylinder refocussing", 60.0, c6_cylinder_refocus),
        ("sky/certificate coherence", 60.0, c7_sky_coherence),
        ("splitting and condition 2", 30.0, c8_split_and_condition2),
        ("semicontinuity", 10.0, c9_semicontinuity),
        ("determinism", f64::INFINITY, c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (title, limit, check)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| f == &id || title.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(d) if secs < *limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        let budget = if limit.is_finite() { format!(" < {limit} s") } else { String::new() };
        println!(
            "criterion {id:>2} {} {title}: {detail} [{secs:.1} s{budget}]",
            if ok { "PASS" } else { "FAIL" }
        );
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
