use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use univport::fgp::{
    dense_family, portfolio_from_generator, verify_fg_inequality, AffinePiece, GeneratingFunction, PairRegion,
};
use univport::io::{self as csvio, fmt_float};
use univport::ldp::{
    concentration_diagnostic, rate_profile, two_atom_scenario, Concentration, ConcentrationRow, FiniteStateModel,
    RateSource, SolverOptions,
};
use univport::market::{counterexample_path, markov_grid_path, MarketPath, MarkovChain};
use univport::portfolio::{ConstantWeights, MarketPortfolio, SharedMap};
use univport::universal::{
    counterexample_cover_value, counterexample_cylinder_log_mass, cover_value_identity_check, random_cylinders, Prior,
    TraceRow, WealthTracker,
};
use univport::SimplexPoint;

use crate::config::{CounterexampleConfig, FamilySpec, FgpVerifyConfig, LdpConfig, MarketSpec, UniversalityConfig};
use crate::{CliError, Outcome, Scenario};

pub(crate) enum Prepared {
    Counterexample(CounterexampleConfig),
    Universality(UniversalityConfig),
    Ldp(LdpConfig),
    FgpVerify(FgpVerifyConfig),
}

pub(crate) fn prepare(scenario: Scenario, text: &str, seed: Option<u64>) -> Result<Prepared, CliError> {
    let mut prepared = match scenario {
        Scenario::Counterexample => Prepared::Counterexample(CounterexampleConfig::parse(text)?),
        Scenario::Universality => Prepared::Universality(UniversalityConfig::parse(text)?),
        Scenario::Ldp => Prepared::Ldp(LdpConfig::parse(text)?),
        Scenario::FgpVerify => Prepared::FgpVerify(FgpVerifyConfig::parse(text)?),
    };
    if let Some(s) = seed {
        *prepared.seed_mut() = s;
    }
    Ok(prepared)
}

impl Prepared {
    fn seed_mut(&mut self) -> &mut u64 {
        match self {
            Prepared::Counterexample(c) => &mut c.seed,
            Prepared::Universality(c) => &mut c.seed,
            Prepared::Ldp(c) => &mut c.seed,
            Prepared::FgpVerify(c) => &mut c.seed,
        }
    }

    pub(crate) fn seed(&self) -> u64 {
        match self {
            Prepared::Counterexample(c) => c.seed,
            Prepared::Universality(c) => c.seed,
            Prepared::Ldp(c) => c.seed,
            Prepared::FgpVerify(c) => c.seed,
        }
    }

    pub(crate) fn execute(&self, out: &Path) -> Result<Outcome, CliError> {
        match self {
            Prepared::Counterexample(c) => run_counterexample(c, out),
            Prepared::Universality(c) => run_universality(c, out),
            Prepared::Ldp(c) => run_ldp(c, out),
            Prepared::FgpVerify(c) => run_fgp_verify(c, out),
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(&path, e))
}

/// Writes rows of plain strings with a header.
fn write_rows(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

pub(crate) fn write_summary(out: &Path, outcome: &Outcome) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = outcome
        .summary
        .iter()
        .map(|(k, v)| vec![k.clone(), fmt_float(*v)])
        .collect();
    write_rows(out, "summary.csv", &["metric".into(), "value".into()], &rows)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn market_path(market: &MarketSpec, horizon: usize, seed: u64) -> Result<MarketPath, CliError> {
    Ok(match market {
        MarketSpec::Counterexample { delta } => counterexample_path(*delta, horizon)?,
        _ => markov_grid_path(&market.chain()?, market.start(), seed, horizon)?,
    })
}

fn family_prior(family: &FamilySpec, n: usize) -> Result<Prior, CliError> {
    Ok(match family {
        FamilySpec::DenseFgp { size } => Prior::from_dense_family(dense_family(n, *size)?)?,
        FamilySpec::ConstantCloud { size } => Prior::constant_cloud(n, *size)?,
        FamilySpec::Market => Prior::single(Arc::new(MarketPortfolio)),
        FamilySpec::TwoAtom { .. } | FamilySpec::ProductUniform { .. } => {
            return Err(CliError::Config("family needs a model-specific construction".into()))
        }
    })
}

fn run_counterexample(c: &CounterexampleConfig, out: &Path) -> Result<Outcome, CliError> {
    let horizon = *c.run.horizons.last().unwrap();
    let cv = counterexample_cover_value(c.delta(), horizon)?;
    let target = cv.limiting_log_ratio();
    let header: Vec<String> = [
        "t",
        "V_hat",
        "V_star",
        "logV_hat",
        "logV_star",
        "log_ratio",
        "logV_hat_closed_form",
        "target_log_ratio",
        "pi_hat_1",
        "pi_hat_2",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::with_capacity(horizon + 1);
    let mut final_rate = 0.0;
    for t in 0..=horizon {
        let row = TraceRow {
            t,
            log_v_hat: cv.sequential.log_value(t),
            log_v_star: cv.log_best[t],
            pi_hat: None,
        };
        final_rate = row.log_ratio_rate();
        let pi = if t < horizon { fmt_float(0.5) } else { String::new() };
        rows.push(vec![
            t.to_string(),
            fmt_float(row.log_v_hat.exp()),
            fmt_float(row.log_v_star.exp()),
            fmt_float(row.log_v_hat),
            fmt_float(row.log_v_star),
            fmt_float(final_rate),
            fmt_float(cv.closed_form.log_value(t)),
            fmt_float(target),
            pi.clone(),
            pi,
        ]);
    }
    write_rows(out, "trace.csv", &header, &rows)?;
    let error = (final_rate - target).abs();
    let passed = error <= c.check.tolerance && cv.max_relative_gap <= c.check.agreement_tolerance;
    Ok(Outcome {
        passed,
        summary: vec![
            ("final_log_ratio".into(), final_rate),
            ("target_log_ratio".into(), target),
            ("abs_error".into(), error),
            ("max_relative_gap".into(), cv.max_relative_gap),
        ],
        notes: Vec::new(),
    })
}

fn run_universality(c: &UniversalityConfig, out: &Path) -> Result<Outcome, CliError> {
    let horizon = *c.run.horizons.last().unwrap();
    let path = market_path(&c.market, horizon, c.seed)?;
    let prior = family_prior(&c.family, path.dim())?;
    let mut tracker = WealthTracker::new(&prior);
    let mut rows = Vec::new();
    let mut member_values: Vec<Vec<f64>> = vec![Vec::new(); prior.len()];
    for &t in &c.run.horizons {
        while tracker.t() < t {
            tracker.step(&path)?;
        }
        let wd = tracker.distribution();
        for (v, lv) in member_values.iter_mut().zip(wd.log_values()) {
            v.push(*lv);
        }
        rows.push(TraceRow {
            t,
            log_v_hat: wd.log_mixture_value(),
            log_v_star: wd.log_best_value(),
            pi_hat: if t < path.horizon() {
                Some(wd.cover_portfolio(path.point(t))?)
            } else {
                None
            },
        });
    }
    let wd = tracker.distribution();
    csvio::write_trace(&rows, path.dim(), create(out, "trace.csv")?)?;
    csvio::write_posterior(&wd, create(out, "posterior.csv")?)?;
    csvio::write_family_report(
        &prior.labels(),
        &c.run.horizons,
        &member_values,
        create(out, "family.csv")?,
    )?;

    let final_rate = rows.last().unwrap().log_ratio_rate();
    let mut passed = final_rate.abs() < c.check.tolerance;
    let mut summary = vec![("final_log_ratio".into(), final_rate)];
    if let Some(max_slope) = c.check.max_regret_slope {
        let xs: Vec<f64> = rows.iter().map(|r| (r.t as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.log_v_star - r.log_v_hat).collect();
        let slope = fit_slope(&xs, &ys);
        passed &= slope <= max_slope;
        summary.push(("regret_slope".into(), slope));
    }
    Ok(Outcome {
        passed,
        summary,
        notes: Vec::new(),
    })
}

fn run_ldp(c: &LdpConfig, out: &Path) -> Result<Outcome, CliError> {
    let horizon = *c.run.horizons.last().unwrap();
    if let FamilySpec::ProductUniform { cylinders, max_factors } = &c.family {
        let MarketSpec::Counterexample { delta } = c.market else {
            unreachable!("validated on parse")
        };
        let visited = c.run.horizons[0];
        let sets = random_cylinders(*cylinders, visited, *max_factors, c.seed)?;
        let dir = out.join("cylinders");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut worst: f64 = 0.0;
        for (k, cylinder) in sets.iter().enumerate() {
            let rows = c
                .run
                .horizons
                .iter()
                .map(|&t| {
                    let log_set_mass = counterexample_cylinder_log_mass(delta, t, cylinder)?;
                    Ok(ConcentrationRow {
                        t,
                        log_set_mass,
                        empirical_rate: -log_set_mass / t as f64,
                        target_rate: 0.0,
                    })
                })
                .collect::<Result<Vec<_>, univport::Error>>()?;
            worst = worst.max(rows.last().unwrap().empirical_rate.abs());
            csvio::write_concentration(&rows, create(&dir, &format!("cylinder_{k:03}.csv"))?)?;
        }
        return Ok(Outcome {
            passed: worst < c.check.tolerance,
            summary: vec![("max_abs_rate".into(), worst), ("target_rate".into(), 0.0)],
            notes: Vec::new(),
        });
    }

    let chain = c.market.chain()?;
    let model = FiniteStateModel::from_chain(&chain)?;
    let prior = match &c.family {
        FamilySpec::TwoAtom { gap, lambda } => {
            two_atom_scenario(&model, *gap, SolverOptions::default())?.prior(*lambda)?
        }
        other => family_prior(other, chain.dim())?,
    };
    let path = markov_grid_path(&chain, c.market.start(), c.seed, horizon)?;
    let profile = rate_profile(prior.atoms(), &model)?;
    csvio::write_profile(&profile, create(out, "profile.csv")?)?;
    match concentration_diagnostic(
        &prior,
        &path,
        c.check.epsilon,
        &c.run.horizons,
        RateSource::Exact(&model),
    )? {
        Concentration::NotApplicable => {
            csvio::write_concentration(&[], create(out, "concentration.csv")?)?;
            Ok(Outcome {
                passed: true,
                summary: vec![("set_size".into(), 0.0)],
                notes: vec!["no member is epsilon-suboptimal; concentration check not applicable".into()],
            })
        }
        Concentration::Table { members, rows } => {
            csvio::write_concentration(&rows, create(out, "concentration.csv")?)?;
            let last = rows.last().unwrap();
            let error = (last.empirical_rate - last.target_rate).abs();
            Ok(Outcome {
                passed: error <= c.check.tolerance,
                summary: vec![
                    ("set_size".into(), members.len() as f64),
                    ("final_empirical_rate".into(), last.empirical_rate),
                    ("target_rate".into(), last.target_rate),
                    ("abs_error".into(), error),
                ],
                notes: Vec::new(),
            })
        }
    }
}

/// `Phi = G^2 / min_i(n p_i)` with `G` the equal-weight geometric mean; not
/// concave (for two stocks it is `max(p_1, p_2)` up to scale).
fn non_concave_generator(n: usize) -> Result<GeneratingFunction, CliError> {
    let center = GeneratingFunction::geometric_mean(SimplexPoint::barycenter(n))?;
    let pieces = (0..n)
        .map(|i| {
            let mut slope = vec![0.0; n];
            slope[i] = n as f64;
            AffinePiece::new(slope, 0.0)
        })
        .collect();
    let floor = GeneratingFunction::min_affine(pieces)?;
    Ok(GeneratingFunction::log_blend_unchecked(vec![
        (center, 2.0),
        (floor, -1.0),
    ])?)
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> Result<MarkovChain, CliError> {
    use rand_chacha::rand_core::RngCore;
    let unit = |rng: &mut ChaCha8Rng| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let k = 2 + (rng.next_u64() % 3) as usize;
    let states = (0..k)
        .map(|_| SimplexPoint::sample_uniform_with_floor(rng, n, 0.02))
        .collect();
    let transition = (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| unit(rng) + 0.05).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    Ok(MarkovChain::new(states, transition)?)
}

fn run_fgp_verify(c: &FgpVerifyConfig, out: &Path) -> Result<Outcome, CliError> {
    use rand_chacha::rand_core::RngCore;
    let f = &c.fgp;
    let n = f.dim;
    let region = PairRegion {
        bound_m: f.bound_m,
        floor: f.floor,
    };
    let mut generators: Vec<GeneratingFunction> = dense_family(n, f.family_size)?
        .into_iter()
        .map(|m| m.generator)
        .collect();
    if f.inject_non_concave {
        generators.push(non_concave_generator(n)?);
    }
    let mut notes = Vec::new();
    let mut fg_rows = Vec::new();
    let mut worst_slack = f64::INFINITY;
    let mut fg_failures = 0usize;
    for (k, g) in generators.iter().enumerate() {
        let pi = portfolio_from_generator(g.clone())?;
        let report = verify_fg_inequality(&pi, g, f.samples, c.seed.wrapping_add(k as u64), region)?;
        worst_slack = worst_slack.min(report.min_slack);
        let mut row = vec![
            format!("\"{}\"", g.describe()),
            f.samples.to_string(),
            fmt_float(report.min_slack),
            report.passed.to_string(),
        ];
        match &report.worst_pair {
            Some((p, q)) => row.extend(p.iter().chain(q.iter()).map(|&x| fmt_float(x))),
            None => row.extend(std::iter::repeat_n(String::new(), 2 * n)),
        }
        if !report.passed {
            fg_failures += 1;
            if let Some((p, q)) = &report.worst_pair {
                notes.push(format!(
                    "defining inequality fails for {} at p = {:?}, q = {:?} (slack {:e})",
                    g.describe(),
                    p.coords(),
                    q.coords(),
                    report.min_slack
                ));
            }
            if let Some(p) = &report.invalid_output_at {
                notes.push(format!(
                    "{} returns invalid weights at p = {:?}",
                    g.describe(),
                    p.coords()
                ));
            }
        }
        fg_rows.push(row);
    }
    let mut header: Vec<String> = ["label", "samples", "min_slack", "passed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n).map(|i| format!("worst_p_{i}")));
    header.extend((1..=n).map(|i| format!("worst_q_{i}")));
    write_rows(out, "fg_inequality.csv", &header, &fg_rows)?;

    let id = &c.identity;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let pool = dense_family(n, 64)?;
    let mut id_rows = Vec::new();
    let mut worst_gap: f64 = 0.0;
    let mut id_failures = 0usize;
    for case in 0..id.cases {
        let atoms = 1 + (rng.next_u64() % id.max_atoms as u64) as usize;
        let maps: Vec<SharedMap> = (0..atoms)
            .map(|_| -> Result<SharedMap, CliError> {
                Ok(if rng.next_u64() % 2 == 0 {
                    Arc::new(ConstantWeights::new(SimplexPoint::sample_uniform(&mut rng, n)))
                } else {
                    let g = pool[(rng.next_u64() % pool.len() as u64) as usize].generator.clone();
                    Arc::new(portfolio_from_generator(g)?)
                })
            })
            .collect::<Result<_, _>>()?;
        let prior = if atoms == 1 {
            Prior::uniform(maps)?
        } else {
            let log_weights = SimplexPoint::sample_uniform(&mut rng, atoms)
                .iter()
                .map(|w| w.ln())
                .collect();
            Prior::from_log_weights(maps, log_weights)?
        };
        let chain = random_chain(&mut rng, n)?;
        let path = markov_grid_path(&chain, 0, rng.next_u64(), id.horizon)?;
        let gap = cover_value_identity_check(&prior, &path, id.horizon)?;
        let ok = gap < id.tolerance;
        if !ok {
            id_failures += 1;
            notes.push(format!("value identity gap {gap:e} in case {case}"));
        }
        worst_gap = worst_gap.max(gap);
        id_rows.push(vec![
            case.to_string(),
            atoms.to_string(),
            id.horizon.to_string(),
            fmt_float(gap),
            ok.to_string(),
        ]);
    }
    write_rows(
        out,
        "identity.csv",
        &["case", "atoms", "horizon", "max_log_gap", "passed"].map(String::from),
        &id_rows,
    )?;
    Ok(Outcome {
        passed: fg_failures == 0 && id_failures == 0,
        summary: vec![
            ("fg_members".into(), generators.len() as f64),
            ("fg_failures".into(), fg_failures as f64),
            ("fg_min_slack".into(), worst_slack),
            ("identity_cases".into(), id.cases as f64),
            ("identity_failures".into(), id_failures as f64),
            ("identity_max_gap".into(), worst_gap),
        ],
        notes,
    })
}
