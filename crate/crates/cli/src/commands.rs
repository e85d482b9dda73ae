use std::fmt;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crowdsearch::asymptotics::{estimate_rate, geometric_grid, limit, optimal_prize_limit, RateQuantity};
use crowdsearch::equilibrium::{
    check_interiority, dpdn_holds, phi, solve_threshold, solve_threshold_with_tol, ContestConfig,
};
use crowdsearch::expert::{critical_expertise, phi_expert, solve_threshold_expert, ExpertConfig, RewardMode};
use crowdsearch::hetero::{best_response_scan_n2, psi_i, solve_principal_hetero, solve_thresholds, HeteroContest};
use crowdsearch::montecarlo::{deviation_gain, simulate as run_simulation, SimConfig, Thresholds, Variant};
use crowdsearch::multiprize::{
    optimal_prize_structure, phi_m, principal_value_multi, solve_threshold_multi, PrizeStructure,
};
use crowdsearch::principal::{optimal_prize, verify_against_grid, w_bounds};
use crowdsearch::{CostDistribution, DistributionSpec, Error};

use crate::output::{Cell, Report, Table};
use crate::tables::{reproduce, TableName};
use crate::{Opts, SweepParam};

/// Bad or missing command-line input.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
        if cause.is::<Usage>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Usage(format!("missing required flag {flag}")).into())
}

fn dist(o: &Opts) -> Result<(CostDistribution, DistributionSpec)> {
    let raw = o.dist.as_deref().ok_or_else(|| Usage("missing required flag --dist".into()))?;
    let spec: DistributionSpec = serde_json::from_str(raw).context("parsing --dist")?;
    Ok((CostDistribution::from_spec(&spec)?, spec))
}

fn json_reals(raw: &str, flag: &str) -> Result<Vec<f64>> {
    serde_json::from_str(raw).with_context(|| format!("parsing {flag} as a JSON array of numbers"))
}

fn integer_n(n: f64) -> Result<usize> {
    if n < 1.0 || n.fract() != 0.0 || !n.is_finite() {
        return Err(Usage(format!("--n must be a positive integer here, got {n}")).into());
    }
    Ok(n as usize)
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

pub fn solve(o: &Opts) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let cfg = ContestConfig::new(need(o.n, "--n")?, need(o.q, "--q")?, need(o.prize, "--V")?)?;
    let r = solve_threshold_with_tol(&d, &cfg, o.tol)?;
    let interiority = check_interiority(&d, &cfg);
    let mut table = Table::new(&["n", "q", "V", "threshold", "success_prob", "expected_searchers", "win_prob", "interior"]);
    table.push(vec![
        cfg.n.into(),
        cfg.q.into(),
        cfg.prize.into(),
        r.threshold.into(),
        r.success_prob.into(),
        r.expected_searchers.into(),
        r.win_prob.into(),
        r.interior.into(),
    ]);
    Ok(Report::new(
        json!({"dist": spec, "n": cfg.n, "q": cfg.q, "V": cfg.prize, "tol": o.tol}),
        json!({"equilibrium": to_json(&r), "interiority": to_json(&interiority)}),
        table,
    ))
}

pub fn sweep(o: &Opts, over: SweepParam, values: &str) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let values = json_reals(values, "--values")?;
    if values.is_empty() {
        return Err(Usage("--values must not be empty".into()).into());
    }
    let base = (o.n, o.q, o.prize);
    let mut headers = vec!["n", "q", "V", "threshold", "success_prob", "expected_searchers", "interior", "dpdn_nonnegative"];
    if o.w.is_some() {
        headers.extend(["optimal_prize", "optimal_threshold"]);
    }
    let mut table = Table::new(&headers);
    let mut rows = Vec::new();
    for &x in &values {
        let (n, q, prize) = match over {
            SweepParam::N => (x, need(base.1, "--q")?, need(base.2, "--V")?),
            SweepParam::Q => (need(base.0, "--n")?, x, need(base.2, "--V")?),
            SweepParam::Prize => (need(base.0, "--n")?, need(base.1, "--q")?, x),
        };
        let cfg = ContestConfig::new(n, q, prize)?;
        let r = solve_threshold_with_tol(&d, &cfg, o.tol)?;
        let dpdn = if r.interior { dpdn_holds(&d, q, r.threshold).ok() } else { None };
        let mut row: Vec<Cell> = vec![
            n.into(),
            q.into(),
            prize.into(),
            r.threshold.into(),
            r.success_prob.into(),
            r.expected_searchers.into(),
            r.interior.into(),
            dpdn.into(),
        ];
        let mut record = json!({
            "n": n, "q": q, "V": prize, "equilibrium": to_json(&r), "dpdn_nonnegative": dpdn,
        });
        if let Some(w) = o.w {
            let sol = optimal_prize(&d, q, n, w)?;
            row.extend([sol.prize.into(), sol.threshold.into()]);
            record["principal"] = to_json(&sol);
        }
        table.push(row);
        rows.push(record);
    }
    let over_name = match over {
        SweepParam::N => "n",
        SweepParam::Q => "q",
        SweepParam::Prize => "V",
    };
    Ok(Report::new(
        json!({"dist": spec, "over": over_name, "values": values, "n": o.n, "q": o.q, "V": o.prize, "W": o.w, "tol": o.tol}),
        json!({"rows": rows}),
        table,
    ))
}

pub fn tables(name: TableName) -> Result<Report> {
    let rep = reproduce(name)?;
    let mut table = Table::new(&rep.headers);
    for row in &rep.rows {
        table.push(row.iter().map(|&x| Cell::Num(x)).collect());
    }
    let failed_checks = rep
        .failures()
        .iter()
        .map(|c| format!("{} {}: computed {} vs reference {} (tol {})", rep.name, c.label, c.computed, c.reference, c.tolerance))
        .collect();
    let mut report = Report::new(json!({"name": name.as_str()}), to_json(&rep), table);
    report.failed_checks = failed_checks;
    Ok(report)
}

pub fn principal(o: &Opts, grid: usize) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let (q, n, w) = (need(o.q, "--q")?, need(o.n, "--n")?, need(o.w, "--W")?);
    let sol = optimal_prize(&d, q, n, w)?;
    let bounds = w_bounds(&d, q, n).ok();
    let check = verify_against_grid(&d, q, n, w, grid)?;
    let implemented = solve_threshold(&d, &ContestConfig::new(n, q, sol.prize)?)?;
    let mut table = Table::new(&[
        "W", "n", "q", "threshold", "prize", "regime", "objective", "certified", "w_lower", "w_upper", "grid_threshold", "grid_agrees",
    ]);
    table.push(vec![
        w.into(),
        n.into(),
        q.into(),
        sol.threshold.into(),
        sol.prize.into(),
        to_json(&sol.regime).as_str().unwrap_or_default().into(),
        sol.objective_value.into(),
        sol.certified.into(),
        bounds.map(|b| b.lower).into(),
        bounds.map(|b| b.upper).into(),
        check.grid_threshold.into(),
        check.agrees.into(),
    ]);
    Ok(Report::new(
        json!({"dist": spec, "q": q, "n": n, "W": w, "grid": grid}),
        json!({
            "solution": to_json(&sol),
            "w_bounds": bounds.map(|b| to_json(&b)),
            "grid_check": to_json(&check),
            "threshold_at_prize": implemented.threshold,
        }),
        table,
    ))
}

pub fn prize_structure(o: &Opts) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let (q, w, budget) = (need(o.q, "--q")?, need(o.w, "--W")?, need(o.prize, "--V")?);
    let n = integer_n(need(o.n, "--n")?)?;
    let best = optimal_prize_structure(&d, q, n, w, budget)?;
    let mut table = Table::new(&["structure", "threshold", "principal_value", "regime", "lambda", "prizes"]);
    let prizes_text = |v: &PrizeStructure| serde_json::to_string(v).expect("prize vectors serialize");
    table.push(vec![
        "optimal".into(),
        best.threshold.into(),
        best.value.into(),
        to_json(&best.regime).as_str().unwrap_or_default().into(),
        best.lambda.into(),
        Cell::Text(prizes_text(&best.structure)),
    ]);
    let mut results = json!({"optimal": to_json(&best)});
    if let Some(raw) = &o.v {
        let v = PrizeStructure::with_budget(json_reals(raw, "--v")?, budget)?;
        if v.len() != n {
            return Err(Usage(format!("--v has {} prizes but --n is {n}", v.len())).into());
        }
        let eq = solve_threshold_multi(&d, q, &v)?;
        let value = principal_value_multi(&d, q, w, &v)?;
        table.push(vec![
            "given".into(),
            eq.threshold.into(),
            value.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Text(prizes_text(&v)),
        ]);
        results["given"] = json!({"prizes": to_json(&v), "equilibrium": to_json(&eq), "principal_value": value});
    }
    Ok(Report::new(
        json!({"dist": spec, "q": q, "n": n, "W": w, "V": budget, "v": o.v}),
        results,
        table,
    ))
}

pub fn expert(o: &Opts, mode: &str) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let cfg = ContestConfig::new(need(o.n, "--n")?, need(o.q, "--q")?, need(o.prize, "--V")?)?;
    let mode: RewardMode = mode.parse()?;
    let e = ExpertConfig::new(need(o.qe, "--qe")?, mode)?;
    let with = solve_threshold_expert(&d, &cfg, &e)?;
    let without = solve_threshold(&d, &cfg)?;
    let q_hat = critical_expertise(&d, &cfg).ok();
    let mut table = Table::new(&[
        "n", "q", "V", "qe", "threshold", "success_prob", "win_prob", "baseline_threshold", "baseline_success_prob", "critical_expertise",
    ]);
    table.push(vec![
        cfg.n.into(),
        cfg.q.into(),
        cfg.prize.into(),
        e.q_e.into(),
        with.threshold.into(),
        with.success_prob.into(),
        with.win_prob.into(),
        without.threshold.into(),
        without.success_prob.into(),
        q_hat.into(),
    ]);
    Ok(Report::new(
        json!({"dist": spec, "n": cfg.n, "q": cfg.q, "V": cfg.prize, "qe": e.q_e, "mode": to_json(&mode)}),
        json!({"expert": to_json(&with), "baseline": to_json(&without), "critical_expertise": q_hat}),
        table,
    ))
}

pub fn hetero(o: &Opts, scan: Option<usize>) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let prize = need(o.prize, "--V")?;
    if let Some(grid) = scan {
        let q = need(o.q, "--q")?;
        let result = best_response_scan_n2(&d, q, prize, grid)?;
        let mut table = Table::new(&["c1_start", "c1_end", "c2_start", "c2_end"]);
        for &(a, b) in &result.segments {
            let (ca, cb) = (result.pairs.iter().find(|p| p.0 == a), result.pairs.iter().find(|p| p.0 == b));
            table.push(vec![a.into(), b.into(), ca.map(|p| p.1).into(), cb.map(|p| p.1).into()]);
        }
        return Ok(Report::new(
            json!({"dist": spec, "q": q, "V": prize, "scan": grid}),
            json!({"segments": result.segments, "symmetric": result.symmetric, "spacing": result.spacing, "pair_count": result.pairs.len()}),
            table,
        ));
    }
    let raw = o.qvec.as_deref().ok_or_else(|| Usage("missing required flag --qvec".into()))?;
    let q_vec = json_reals(raw, "--qvec")?;
    let contest = HeteroContest::new(d, &q_vec, prize)?;
    let t = solve_thresholds(&contest)?;
    if !t.converged {
        return Err(Error::NonConvergence(format!(
            "best-response sweeps did not settle (last change above tolerance after {} sweeps)",
            t.iterations
        ))
        .into());
    }
    let p = crowdsearch::hetero::success_probability_hetero(&contest, &t.c_vec)?;
    let psi: Vec<f64> = (0..contest.n()).map(|i| psi_i(&contest, i, &t.c_vec)).collect::<crowdsearch::Result<_>>()?;
    let thresholds = contest.unsort(&t.c_vec);
    let win = contest.unsort(&psi);
    let mut table = Table::new(&["agent", "q", "threshold", "win_prob"]);
    for (i, &qi) in q_vec.iter().enumerate() {
        table.push(vec![i.into(), qi.into(), thresholds[i].into(), win[i].into()]);
    }
    let mut results = json!({
        "thresholds": thresholds, "win_prob": win, "success_prob": p,
        "iterations": t.iterations, "max_residual": t.max_residual,
    });
    if let Some(w) = o.w {
        let sol = solve_principal_hetero(&contest, w)?;
        results["principal"] = json!({
            "prize": sol.prize,
            "thresholds": contest.unsort(&sol.thresholds.c_vec),
            "implied_prizes": contest.unsort(&sol.implied_prizes),
        });
    }
    Ok(Report::new(json!({"dist": spec, "qvec": q_vec, "V": prize, "W": o.w}), results, table))
}

pub fn asymptotics(o: &Opts, quantity: &str, values: Option<&str>) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let (q, prize) = (need(o.q, "--q")?, need(o.prize, "--V")?);
    let quantity: RateQuantity = quantity.parse()?;
    let grid = match values {
        Some(raw) => json_reals(raw, "--values")?,
        None => geometric_grid(2, 6, 1),
    };
    let lim = limit(&d, q, prize)?;
    let fit = estimate_rate(&d, q, prize, &grid, quantity)?;
    let prize_limit = o.w.map(|w| optimal_prize_limit(d.lower(), q, w)).transpose()?;
    let mut table = Table::new(&["kappa", "p_infinity", "regime", "quantity", "slope", "intercept", "r_squared", "prize_limit"]);
    table.push(vec![
        lim.kappa.into(),
        lim.p_infinity.into(),
        to_json(&lim.regime).as_str().unwrap_or_default().into(),
        to_json(&quantity).as_str().unwrap_or_default().into(),
        fit.slope.into(),
        fit.intercept.into(),
        fit.r_squared.into(),
        prize_limit.into(),
    ]);
    Ok(Report::new(
        json!({"dist": spec, "q": q, "V": prize, "W": o.w, "grid": grid}),
        json!({"limit": to_json(&lim), "rate": to_json(&fit), "prize_limit": prize_limit}),
        table,
    ))
}

pub fn simulate(o: &Opts, threshold: Option<f64>, deviation_at: Option<f64>) -> Result<Report> {
    let (d, spec) = dist(o)?;
    let cfg = ContestConfig::new(need(o.n, "--n")?, need(o.q, "--q")?, need(o.prize, "--V")?)?;
    let n = integer_n(cfg.n)?;

    // variant, thresholds and the closed forms they should reproduce
    let (variant, thresholds, success_cf, win_cf) = if let Some(raw) = &o.v {
        let v = PrizeStructure::with_budget(json_reals(raw, "--v")?, cfg.prize)?;
        let c = match threshold {
            Some(c) => c,
            None => solve_threshold_multi(&d, cfg.q, &v)?.threshold,
        };
        let p = crowdsearch::equilibrium::success_probability(&d, &cfg, c)?;
        let w = phi_m(&d, cfg.q, n, 1, c)?;
        (Variant::Multiprize { v }, Thresholds::Symmetric(c), p, w)
    } else if let Some(raw) = &o.qvec {
        let q_vec = json_reals(raw, "--qvec")?;
        let contest = HeteroContest::new(d.clone(), &q_vec, cfg.prize)?;
        let c_vec = match threshold {
            Some(c) => vec![c; q_vec.len()],
            None => contest.unsort(&solve_thresholds(&contest)?.c_vec),
        };
        let sorted: Vec<f64> = contest.order().iter().map(|&i| c_vec[i]).collect();
        let p = crowdsearch::hetero::success_probability_hetero(&contest, &sorted)?;
        (Variant::Hetero { q_vec }, Thresholds::PerAgent(c_vec), p, f64::NAN)
    } else if let Some(qe) = o.qe {
        let e = ExpertConfig::shared(qe)?;
        let c = match threshold {
            Some(c) => c,
            None => solve_threshold_expert(&d, &cfg, &e)?.threshold,
        };
        let base = crowdsearch::equilibrium::success_probability(&d, &cfg, c)?;
        let w = phi_expert(&d, &cfg, &e, c)?;
        (Variant::Expert(e), Thresholds::Symmetric(c), (1.0 - qe) * base + qe, w)
    } else {
        let c = match threshold {
            Some(c) => c,
            None => solve_threshold(&d, &cfg)?.threshold,
        };
        let p = crowdsearch::equilibrium::success_probability(&d, &cfg, c)?;
        (Variant::Baseline, Thresholds::Symmetric(c), p, phi(&d, &cfg, c)?)
    };
    let sim = SimConfig {
        replications: o.reps,
        seed: o.seed,
        variant,
        thresholds,
    };
    let est = run_simulation(&d, &cfg, &sim)?;
    let deviation = deviation_at.map(|c| deviation_gain(&d, &cfg, &sim, c)).transpose()?;

    let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
    let z = |value: f64, se: f64, target: f64| if se > 0.0 { finite((value - target) / se) } else { None };
    let mut table = Table::new(&["metric", "estimate", "std_error", "closed_form", "z_score"]);
    table.push(vec![
        "success_rate".into(),
        est.success_rate.value.into(),
        est.success_rate.std_error.into(),
        finite(success_cf).into(),
        z(est.success_rate.value, est.success_rate.std_error, success_cf).into(),
    ]);
    table.push(vec![
        "searcher_win_rate".into(),
        est.searcher_win_rate.value.into(),
        est.searcher_win_rate.std_error.into(),
        finite(win_cf).into(),
        z(est.searcher_win_rate.value, est.searcher_win_rate.std_error, win_cf).into(),
    ]);
    table.push(vec![
        "payoff_at_threshold".into(),
        est.mean_payoff_at_threshold.value.into(),
        est.mean_payoff_at_threshold.std_error.into(),
        Cell::Empty,
        Cell::Empty,
    ]);
    if let Some(g) = deviation {
        table.push(vec!["deviation_gain".into(), g.value.into(), g.std_error.into(), Cell::Empty, Cell::Empty]);
    }
    Ok(Report::new(
        json!({
            "dist": spec, "n": n, "q": cfg.q, "V": cfg.prize, "reps": o.reps, "seed": o.seed,
            "variant": to_json(&sim.variant), "thresholds": to_json(&sim.thresholds),
        }),
        json!({
            "estimate": to_json(&est),
            "closed_form": {"success_rate": finite(success_cf), "searcher_win_rate": finite(win_cf)},
            "deviation_gain": deviation.map(|g| to_json(&g)),
            "deviation_at": deviation_at,
        }),
        table,
    ))
}
