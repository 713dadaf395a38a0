//! The five subcommands: mechanism construction, privacy evaluation, curve
//! emission, scheme comparison, and the self-verification suite.

use serde_json::{json, Value};

use rho_privacy::bounds::{
    bernoulli_kl, binom_tail_at_half, converse_upper_bound, paired_block_lower_bound,
    predicate_privacy_closed_form, privacy_closed_form, uniform_block_privacy,
};
use rho_privacy::chernoff::{chernoff_radius, chernoff_report, compare_schemes};
use rho_privacy::mechanisms::{
    canonical_relabel, collapse_to_addnoise, lift_addnoise, optimal_addnoise, optimal_lifted,
    optimal_predicate_lifted, paired_block_addnoise, predicate_reduction_lifted,
    uniform_block_addnoise, Mechanism,
};
use rho_privacy::model::{support_stats, SupportStats};
use rho_privacy::oracle::{
    rational_crosscheck, rational_to_f64, search_optimal_mechanism, search_optimal_predicate,
    simulate_protocol, SearchConfig,
};
use rho_privacy::privacy::{
    predicate_privacy, privacy_iid, privacy_iid_addnoise, privacy_multi_naive, privacy_single,
    ComputeMethod, PrivacyReport,
};
use rho_privacy::{AddNoise64, Mechanism64, Model64};

use crate::emit::{jmatrix, jnum, render, write_output};
use crate::error::CliError;
use crate::instance::{exact_level, exact_model, LoadedInstance};
use crate::Scheme;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn metadata(loaded: &LoadedInstance, rho: f64) -> Vec<(&'static str, Value)> {
    vec![
        ("tool_version", Value::String(TOOL_VERSION.into())),
        ("instance_digest", Value::String(loaded.digest.clone())),
        ("rho", jnum(rho)),
    ]
}

fn check_unit_rho(rho: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(CliError::Realm(format!("rho {rho} outside [0, 1]")));
    }
    Ok(())
}

/// Built channel in whichever form the scheme produces.
enum BuiltScheme {
    Lifted(Mechanism64),
    AddNoise(AddNoise64),
}

fn build_scheme(
    scheme: Scheme,
    model: &Model64,
    stats: &SupportStats<f64>,
    rho: f64,
) -> Result<BuiltScheme, CliError> {
    Ok(match scheme {
        Scheme::Wo => BuiltScheme::Lifted(optimal_lifted(model, stats, &rho)?),
        Scheme::Vo => BuiltScheme::AddNoise(optimal_addnoise(model, stats, &rho)?),
        Scheme::WoPred => BuiltScheme::Lifted(optimal_predicate_lifted(model, stats, &rho)?),
        Scheme::WoDblprime => BuiltScheme::Lifted(predicate_reduction_lifted(model, stats, &rho)?),
        Scheme::V1 => {
            let (canon, perm) = canonical_relabel(model, stats);
            let v = paired_block_addnoise(canon.k(), &rho)?;
            BuiltScheme::AddNoise(perm.restore_addnoise(&v))
        }
        Scheme::V2 => {
            let (canon, perm) = canonical_relabel(model, stats);
            let v = uniform_block_addnoise(canon.k(), &rho)?;
            BuiltScheme::AddNoise(perm.restore_addnoise(&v))
        }
    })
}

pub fn cmd_mechanism(
    loaded: &LoadedInstance,
    rho: f64,
    scheme: Scheme,
    out: Option<&str>,
) -> Result<(), CliError> {
    check_unit_rho(rho)?;
    let stats = support_stats(&loaded.model);
    let built = build_scheme(scheme, &loaded.model, &stats, rho)?;
    let (kind, matrix, level) = match &built {
        BuiltScheme::Lifted(w) => (
            "row-lifted",
            jmatrix(w.rows()),
            w.recoverability_level(loaded.model.f()),
        ),
        BuiltScheme::AddNoise(v) => ("add-noise", jmatrix(v.rows()), v.recoverability_level()),
    };
    let mut report = json!({
        "kind": kind,
        "matrix": matrix,
        "recoverability_level": jnum(level),
        "scheme": scheme.as_str(),
    });
    attach(&mut report, metadata(loaded, rho));
    write_output(out, &render(&report))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_privacy(
    loaded: &LoadedInstance,
    rho: f64,
    scheme: Scheme,
    n: usize,
    simulate: bool,
    trials: u64,
    seed: u64,
    cap: u64,
    workers: usize,
    out: Option<&str>,
) -> Result<(), CliError> {
    check_unit_rho(rho)?;
    let model = &loaded.model;
    let stats = support_stats(model);
    let built = build_scheme(scheme, model, &stats, rho)?;

    let mut report = json!({
        "scheme": scheme.as_str(),
        "n": n,
        "cap": cap,
    });

    if simulate {
        let lifted = match &built {
            BuiltScheme::Lifted(w) => w.clone(),
            BuiltScheme::AddNoise(v) => lift_addnoise(v, model),
        };
        let mechs = vec![lifted; n];
        let sim = simulate_protocol(model, &mechs, trials, seed, workers);
        attach(
            &mut report,
            vec![
                ("mode", Value::String("simulate".into())),
                ("value", jnum(sim.empirical_error)),
                ("success", jnum(1.0 - sim.empirical_error)),
                (
                    "simulation",
                    json!({
                        "trials": sim.trials,
                        "errors": sim.errors,
                        "std_error": jnum(sim.std_error),
                        "seed": sim.seed,
                        "workers": sim.workers,
                        "rng": sim.rng_algorithm,
                    }),
                ),
            ],
        );
    } else {
        // Single responses go through the direct path so the report carries
        // per-output win/error masses; repetitions use the count-vector paths.
        let result: PrivacyReport<f64> = match (&built, n) {
            (BuiltScheme::Lifted(w), 1) => privacy_single(model, w),
            (BuiltScheme::AddNoise(v), 1) => privacy_single(model, &lift_addnoise(v, model)),
            (BuiltScheme::Lifted(w), _) => privacy_iid(model, w, n, cap)?,
            (BuiltScheme::AddNoise(v), _) => privacy_iid_addnoise(model, &stats, v, n, cap)?,
        };
        attach(
            &mut report,
            vec![
                ("mode", Value::String("exact".into())),
                ("value", jnum(result.value)),
                ("success", jnum(result.success)),
                ("method", Value::String(method_name(result.method).into())),
            ],
        );
        if let Some(stats_out) = &result.per_output {
            let rows: Vec<Value> = stats_out
                .iter()
                .map(|s| {
                    json!({
                        "response": s.response,
                        "estimate": s.estimate,
                        "win_mass": jnum(s.win_mass),
                        "error_mass": jnum(s.error_mass),
                    })
                })
                .collect();
            attach(&mut report, vec![("per_output", Value::Array(rows))]);
        }
        if n == 1 && model.h().is_some() {
            if let BuiltScheme::Lifted(w) = &built {
                let pred = predicate_privacy(model, w)?;
                attach(&mut report, vec![("predicate_value", jnum(pred.value))]);
            }
        }
    }
    attach(&mut report, metadata(loaded, rho));
    write_output(out, &render(&report))
}

fn method_name(method: ComputeMethod) -> &'static str {
    method.as_str()
}

pub fn cmd_curve(
    loaded: &LoadedInstance,
    grid: &str,
    n: u64,
    out: Option<&str>,
) -> Result<(), CliError> {
    let (start, stop, step) = parse_grid(grid)?;
    let stats = support_stats(&loaded.model);
    let mut csv = String::from("rho,pi_rho,converse_upper,achiev_lower_v1,closed_v2\n");
    let points = ((stop - start) / step).round() as u64;
    for i in 0..=points {
        let rho = (start + i as f64 * step).clamp(0.0, 1.0);
        let pi = privacy_closed_form(&stats, &rho);
        let upper = converse_upper_bound(&stats, n, rho);
        let lower = if rho > 0.5 {
            Some(paired_block_lower_bound(&stats, n, rho)?)
        } else {
            None
        };
        let v2 = if rho <= 0.5 {
            Some(uniform_block_privacy(&stats, &rho)?)
        } else {
            None
        };
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            crate::emit::float_repr(rho),
            crate::emit::float_repr(pi),
            crate::emit::float_repr(upper),
            lower.map(crate::emit::float_repr).unwrap_or_default(),
            v2.map(crate::emit::float_repr).unwrap_or_default(),
        ));
    }
    write_output(out, &csv)
}

fn parse_grid(spec: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Validation(format!(
            "grid spec `{spec}` is not start:stop:step"
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Validation(format!("bad grid number `{s}`")))
    };
    let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) || step <= 0.0 || stop < start
    {
        return Err(CliError::Validation(format!(
            "grid `{spec}` outside [0,1] or empty"
        )));
    }
    Ok((start, stop, step))
}

pub fn cmd_compare(
    loaded: &LoadedInstance,
    rho: f64,
    nmax: usize,
    cap: u64,
    out: Option<&str>,
) -> Result<(), CliError> {
    check_unit_rho(rho)?;
    let model = &loaded.model;
    let stats = support_stats(model);
    let (canon, _perm) = canonical_relabel(model, &stats);
    let canon_stats = support_stats(&canon);

    let comparison = compare_schemes(model, &stats, rho);
    let optimal = optimal_addnoise(model, &stats, &rho)?;
    let universal = if comparison.low_realm {
        uniform_block_addnoise(canon.k(), &rho)?
    } else {
        paired_block_addnoise(canon.k(), &rho)?
    };

    let mut rows = Vec::new();
    for count in 1..=nmax {
        let optimal_exact = privacy_iid_addnoise(model, &stats, &optimal, count, cap)?.value;
        let universal_exact =
            privacy_iid_addnoise(&canon, &canon_stats, &universal, count, cap)?.value;
        let upper = converse_upper_bound(&stats, count as u64, rho);
        let lower = if comparison.low_realm {
            None
        } else {
            Some(paired_block_lower_bound(&stats, count as u64, rho)?)
        };
        rows.push(json!({
            "n": count,
            "optimal_exact": jnum(optimal_exact),
            "universal_exact": jnum(universal_exact),
            "converse_upper": jnum(upper),
            "achiev_lower_v1": lower.map(jnum).unwrap_or(Value::Null),
        }));
    }

    let chernoff = chernoff_report(&stats, &optimal);
    let pairwise: Vec<Value> = chernoff
        .pairwise
        .iter()
        .map(|p| {
            json!({
                "j": p.j,
                "j_prime": p.j_prime,
                "value_bits": jnum(p.value_bits),
                "lambda_star": jnum(p.lambda_star),
            })
        })
        .collect();

    let mut report = json!({
        "nmax": nmax,
        "universal_scheme": if comparison.low_realm { "v2" } else { "v1" },
        "verdict": comparison.verdict.as_str(),
        "same_channel": comparison.same_channel,
        "universal_rate_bits": comparison.universal_rate_bits.map(jnum).unwrap_or(Value::Null),
        "optimal_rate_bits": jnum(comparison.optimal_rate_bits),
        "universal_limit": jnum(comparison.universal_limit),
        "optimal_limit": jnum(comparison.optimal_limit),
        "rows": Value::Array(rows),
        "chernoff_optimal": {
            "pairwise": Value::Array(pairwise),
            "radius_bits": jnum(chernoff.radius_bits),
            "argmin_pair": [chernoff.argmin_pair.0, chernoff.argmin_pair.1],
            "identical_row_groups": chernoff.identical_row_groups,
            "reduced_support": chernoff.reduced_support,
            "reduced_radius_bits": jnum(chernoff.reduced_radius_bits),
            "asymptotic_limit": jnum(chernoff.asymptotic_limit),
        },
    });
    attach(&mut report, metadata(loaded, rho));
    write_output(out, &render(&report))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_verify(
    loaded: &LoadedInstance,
    rho: f64,
    step: f64,
    seeds: u64,
    trials: u64,
    cap: u64,
    workers: usize,
    out: Option<&str>,
) -> Result<(), CliError> {
    check_unit_rho(rho)?;
    let model = &loaded.model;
    let stats = support_stats(model);
    let mut suites: Vec<(String, Option<bool>, String)> = Vec::new();

    // Support statistics stay inside their proven ranges.
    {
        let k = model.k() as f64;
        let ok = stats.critical_level >= 1.0 / k - 1e-12 && stats.critical_level < 1.0;
        let pred_ok = stats.predicate.as_ref().is_none_or(|p| {
            let m = model.m().unwrap() as f64;
            p.critical_level >= (1.0 / m).max(1.0 / k) - 1e-12 && p.critical_level <= 1.0 + 1e-12
        });
        suites.push((
            "critical-level-range".into(),
            Some(ok && pred_ok),
            format!("critical level {:.6}", stats.critical_level),
        ));
    }

    // The optimal mechanism achieves the closed form across a level grid.
    {
        let mut worst = 0.0f64;
        for pct in 0..=10 {
            let level = pct as f64 / 10.0;
            let w = optimal_lifted(model, &stats, &level)?;
            let achieved = privacy_single(model, &w).value;
            worst = worst.max((achieved - privacy_closed_form(&stats, &level)).abs());
        }
        suites.push((
            "closed-form-achieved".into(),
            Some(worst <= 1e-12),
            format!("worst gap {worst:.2e}"),
        ));
    }

    // Grid-search oracle: nothing feasible beats the closed form.
    {
        let config = SearchConfig {
            grid_step: step,
            rho,
            max_cells: 20_000_000,
            workers,
        };
        match search_optimal_mechanism(model, &config) {
            Ok(outcome) => {
                let closed = privacy_closed_form(&stats, &rho);
                let ok = outcome.best_value <= closed + 1e-9
                    && outcome.best_value >= closed - outcome.slack;
                suites.push((
                    "grid-oracle-dominance".into(),
                    Some(ok),
                    format!(
                        "grid best {:.6} vs closed {closed:.6} (slack {:.3})",
                        outcome.best_value, outcome.slack
                    ),
                ));
            }
            Err(err @ rho_privacy::oracle::OracleError::SearchSpaceTooLarge { .. }) => {
                suites.push(("grid-oracle-dominance".into(), None, err.to_string()));
            }
            Err(err) => return Err(err.into()),
        }
    }

    // Predicate closed form, its mechanism, and the data-privacy dominance.
    if model.h().is_some() {
        let w = optimal_predicate_lifted(model, &stats, &rho)?;
        let achieved = predicate_privacy(model, &w)?.value;
        let closed = predicate_privacy_closed_form(&stats, &rho)?;
        let plain = privacy_single(model, &w).value;
        let ok = (achieved - closed).abs() <= 1e-12 && achieved <= plain + 1e-12;
        suites.push((
            "predicate-closed-form".into(),
            Some(ok),
            format!("achieved {achieved:.6} vs closed {closed:.6}"),
        ));
        match search_optimal_predicate(
            model,
            &SearchConfig {
                grid_step: step,
                rho,
                max_cells: 20_000_000,
                workers,
            },
        ) {
            Ok(outcome) => {
                let ok = outcome.best_value <= closed + 1e-9
                    && outcome.best_value >= closed - outcome.slack;
                suites.push((
                    "predicate-grid-oracle".into(),
                    Some(ok),
                    format!("grid best {:.6}", outcome.best_value),
                ));
            }
            Err(err @ rho_privacy::oracle::OracleError::SearchSpaceTooLarge { .. }) => {
                suites.push(("predicate-grid-oracle".into(), None, err.to_string()));
            }
            Err(err) => return Err(err.into()),
        }
    } else {
        suites.push((
            "predicate-closed-form".into(),
            None,
            "instance has no predicate".into(),
        ));
    }

    // Collapse between the two channel forms preserves privacy.
    {
        let w = optimal_lifted(model, &stats, &rho)?;
        let v = collapse_to_addnoise(&w, model)?;
        let direct = optimal_addnoise(model, &stats, &rho)?;
        let w_value = privacy_single(model, &w).value;
        let v_value = privacy_iid_addnoise(model, &stats, &v, 1, cap)?.value;
        let ok = v == direct && (w_value - v_value).abs() <= 1e-12;
        suites.push((
            "collapse-equivalence".into(),
            Some(ok),
            format!("lifted {w_value:.6} vs add-noise {v_value:.6}"),
        ));
    }

    // Converse bound dominates random feasible tuples.
    {
        use rand::Rng;
        let mut rng = rand_chacha_rng(11);
        let mut ok = true;
        let mut smallest = f64::INFINITY;
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let mechs: Vec<Mechanism<f64>> = (0..n)
                .map(|_| random_feasible_channel(&mut rng, model, rho))
                .collect();
            let value = privacy_multi_naive(model, &mechs, cap)?.value;
            let upper = converse_upper_bound(&stats, n as u64, rho);
            smallest = smallest.min(upper - value);
            ok &= value <= upper + 1e-10;
        }
        suites.push((
            "converse-dominance".into(),
            Some(ok),
            format!("50 random tuples, min margin {smallest:.3e}"),
        ));
    }

    // Realm-appropriate block scheme sits inside its bounds.
    {
        let (canon, _) = canonical_relabel(model, &stats);
        let canon_stats = support_stats(&canon);
        let mut ok = true;
        let detail = if rho > 0.5 {
            let v1 = paired_block_addnoise(canon.k(), &rho)?;
            for count in 1..=4u64 {
                let exact =
                    privacy_iid_addnoise(&canon, &canon_stats, &v1, count as usize, cap)?.value;
                let lower = paired_block_lower_bound(&canon_stats, count, rho)?;
                let upper = converse_upper_bound(&canon_stats, count, rho);
                ok &= exact >= lower - 1e-10 && exact <= upper + 1e-10;
            }
            "paired-block within bounds for n <= 4".to_string()
        } else {
            let v2 = uniform_block_addnoise(canon.k(), &rho)?;
            let closed = uniform_block_privacy(&canon_stats, &rho)?;
            for count in 1..=4 {
                let exact = privacy_iid_addnoise(&canon, &canon_stats, &v2, count, cap)?.value;
                ok &= (exact - closed).abs() <= 1e-10;
            }
            format!("uniform-block constant at {closed:.6} for n <= 4")
        };
        suites.push(("block-scheme-bounds".into(), Some(ok), detail));
    }

    // Binomial tail sandwich at desk scale.
    {
        let mut ok = true;
        for n in 1..=64u64 {
            for level in [0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
                let tail: f64 = binom_tail_at_half(n, level);
                let divergence = bernoulli_kl((n / 2) as f64 / n as f64, level);
                let decay = (-(n as f64) * divergence).exp2();
                ok &= tail >= decay / (n as f64 + 1.0) - 1e-15;
                ok &= tail <= ((n / 2) as f64 + 1.0) * decay + 1e-12;
            }
        }
        suites.push((
            "binomial-tail-sandwich".into(),
            Some(ok),
            "n <= 64, levels 0.5..1.0".into(),
        ));
    }

    // Chernoff closed forms at this alphabet size.
    {
        let mut ok = true;
        for pct in [55, 65, 75, 85, 95] {
            let level = pct as f64 / 100.0;
            let v1 = paired_block_addnoise(model.k(), &level)?;
            let radius = chernoff_radius(&v1).radius_bits;
            ok &= (radius - bernoulli_kl(0.5, level)).abs() <= 1e-9;
        }
        if rho > 0.5 && rho < 1.0 {
            let vo = optimal_addnoise(model, &stats, &rho)?;
            let radius = chernoff_radius(&vo).radius_bits;
            let level = rho.max(stats.critical_level);
            let closed = -(2.0 * (level * (1.0 - level)).sqrt()).log2();
            if model.k() == 2 {
                ok &= (radius - closed).abs() <= 1e-9;
            } else {
                ok &= radius > closed + 1e-9;
            }
        }
        suites.push((
            "chernoff-closed-forms".into(),
            Some(ok),
            "paired-block radius and optimal-channel comparison".into(),
        ));
    }

    // Monte-Carlo consistency at the requested seed count.
    if seeds > 0 {
        let w = optimal_lifted(model, &stats, &rho)?;
        let exact = privacy_single(model, &w).value;
        let mut passes = 0;
        for seed in 0..seeds {
            let sim = simulate_protocol(model, std::slice::from_ref(&w), trials, seed, workers);
            if (sim.empirical_error - exact).abs() <= 4.0 * sim.std_error {
                passes += 1;
            }
        }
        let needed = seeds - seeds / 20; // at least 95%
        suites.push((
            "simulation-consistency".into(),
            Some(passes >= needed),
            format!("{passes}/{seeds} seeds within 4 sigma of {exact:.6}"),
        ));
    } else {
        suites.push((
            "simulation-consistency".into(),
            None,
            "disabled (--seeds 0)".into(),
        ));
    }

    // Exact-rational twin agrees with the float path.
    {
        match (exact_model(&loaded.file), exact_level(rho)) {
            (Ok(exact), Some(level)) => {
                let exact_stats = support_stats(&exact);
                let w_exact = optimal_lifted(&exact, &exact_stats, &level)?;
                let exact_value = rational_to_f64(&rational_crosscheck(&exact, &w_exact));
                let w = optimal_lifted(model, &stats, &rho)?;
                let float_value = privacy_single(model, &w).value;
                let ok = (float_value - exact_value).abs() <= 1e-12;
                suites.push((
                    "rational-crosscheck".into(),
                    Some(ok),
                    format!("float {float_value:.15} vs exact {exact_value:.15}"),
                ));
            }
            _ => suites.push((
                "rational-crosscheck".into(),
                None,
                "instance not expressible as short decimals".into(),
            )),
        }
    }

    let mut failures = 0;
    let mut lines = String::new();
    let mut suite_values = Vec::new();
    for (name, status, detail) in &suites {
        let status_str = match status {
            Some(true) => "PASS",
            Some(false) => {
                failures += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        lines.push_str(&format!("{status_str} {name}: {detail}\n"));
        suite_values.push(json!({
            "name": name,
            "status": status_str,
            "detail": detail,
        }));
    }
    print!("{lines}");
    let mut report = json!({
        "suites": Value::Array(suite_values),
        "failures": failures,
        "step": jnum(step),
        "seeds": seeds,
        "trials": trials,
    });
    attach(&mut report, metadata(loaded, rho));
    if let Some(path) = out {
        write_output(Some(path), &render(&report))?;
    }
    if failures > 0 {
        return Err(CliError::Invariant(format!("{failures} suite(s) failed")));
    }
    Ok(())
}

fn rand_chacha_rng(seed: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha12Rng::seed_from_u64(seed)
}

fn random_feasible_channel(
    rng: &mut rand_chacha::ChaCha12Rng,
    model: &Model64,
    rho: f64,
) -> Mechanism<f64> {
    use rand::Rng;
    let k = model.k();
    let rows = model
        .f()
        .iter()
        .map(|&fx| {
            let diag = rho + (1.0 - rho) * rng.random::<f64>();
            let off: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.02..1.0)).collect();
            let total: f64 = off.iter().sum();
            let mut row = vec![0.0; k];
            row[fx] = diag;
            let mut oi = off.iter();
            for (i, cell) in row.iter_mut().enumerate() {
                if i != fx {
                    *cell = (1.0 - diag) * (oi.next().unwrap() / total);
                }
            }
            row
        })
        .collect();
    Mechanism::from_rows(rows).expect("feasible rows are stochastic")
}

fn attach(report: &mut Value, fields: Vec<(&'static str, Value)>) {
    let map = report.as_object_mut().expect("report is an object");
    for (key, value) in fields {
        map.insert(key.to_string(), value);
    }
}
