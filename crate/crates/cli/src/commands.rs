use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bwshare_core::experiments::table1;
use bwshare_core::learning::{ControllerConfig, ControllerRegistry, FairDrift};
use bwshare_core::mdp::{
    evaluate_policy, solve_constrained, solve_constrained_fair, CellModel, EqualSharePolicy,
    FairPolicy, Policy, ThresholdPolicy, TieAction,
};
use bwshare_core::radio::FadingProcess;
use bwshare_core::simulator::{
    run_replications, write_estimates_csv, write_snapshots_csv, Replication, SimConfig,
};
use bwshare_core::{Error, Result, Scenario};

use crate::{Command, Common, EvalArgs, FadingChoice, LearnArgs, PolicyKind, SolveArgs, Tie};

const BUNDLED_SCENARIO: &str = include_str!("../scenarios/table1.json");

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Table1(c) => run_table1(&c),
        Command::Eval(a) => run_eval(&a),
        Command::SolveConstrained(a) => run_solve(&a),
        Command::Learn1(a) => run_learn("learn1", &a),
        Command::Learn2(a) => run_learn("learn2", &a),
        Command::Learn3(a) => run_learn("learn3", &a),
        Command::Learn4(a) => run_learn("learn4", &a),
        Command::ExportScenario(c) => {
            let scenario = load_scenario(&c)?;
            let path = output(&c.out, "scenario.json")?;
            scenario.save(&path)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn load_scenario(c: &Common) -> Result<Scenario> {
    let mut scenario = match &c.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::from_json_str(BUNDLED_SCENARIO)?,
    };
    if let Some(theta) = c.theta {
        scenario = scenario.with_arrival_prob(theta);
    }
    scenario = match c.fading {
        FadingChoice::Scenario => scenario,
        FadingChoice::None => scenario.with_fading(None),
        FadingChoice::TwoState => scenario.with_fading(Some(FadingProcess::default_two_state())),
    };
    scenario.validate()?;
    Ok(scenario)
}

fn output(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = output(dir, name)?;
    let file = BufWriter::new(File::create(&path)?);
    Ok((path, file))
}

fn finish(path: PathBuf, mut file: BufWriter<File>) -> Result<()> {
    file.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn run_table1(c: &Common) -> Result<()> {
    let rows = table1(&load_scenario(c)?)?;
    let (path, mut out) = create(&c.out, "table1.csv")?;
    writeln!(
        out,
        "alpha,theta,xi,equal_mobile,equal_static,optimal_mobile,optimal_static"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.alpha,
            r.theta,
            r.xi,
            r.equal_mobile,
            r.equal_static,
            r.optimal_mobile,
            r.optimal_static
        )?;
    }
    finish(path, out)
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let model = CellModel::new(load_scenario(&a.common)?)?;
    let tie = match a.tie {
        Tie::Static => TieAction::Static,
        Tie::Mobile => TieAction::Mobile,
    };
    let (name, policy) = match a.policy {
        PolicyKind::Threshold => (
            "threshold",
            Policy::Threshold(ThresholdPolicy { xi: a.xi, tie }),
        ),
        PolicyKind::Fair => (
            "fair",
            Policy::Fair(FairPolicy {
                xi: a.xi,
                alpha: a.alpha,
            }),
        ),
        PolicyKind::EqualShare => (
            "equal-share",
            Policy::EqualShare(EqualSharePolicy { alpha: a.alpha }),
        ),
    };
    let e = evaluate_policy(&model, &policy)?;
    let (path, mut out) = create(&a.common.out, "eval.csv")?;
    writeln!(out, "policy,xi,alpha,mu_throughput,su_throughput,lambda")?;
    writeln!(
        out,
        "{name},{},{},{},{},{}",
        a.xi, a.alpha, e.mu_throughput, e.su_throughput, e.lambda
    )?;
    finish(path, out)
}

fn run_solve(a: &SolveArgs) -> Result<()> {
    let model = CellModel::new(load_scenario(&a.common)?)?;
    let (path, mut out) = create(&a.common.out, "solve_constrained.csv")?;
    match a.alpha {
        None => {
            let s = solve_constrained(&model, a.r0)?;
            writeln!(out, "r0,xi,p,delta,achieved")?;
            writeln!(out, "{},{},{},{},{}", a.r0, s.xi, s.p, s.delta, s.achieved)?;
        }
        Some(alpha) => {
            let s = solve_constrained_fair(&model, a.r0, alpha)?;
            writeln!(out, "r0,alpha,xi,achieved,iterations")?;
            writeln!(
                out,
                "{},{},{},{},{}",
                a.r0, alpha, s.xi, s.achieved, s.iterations
            )?;
        }
    }
    finish(path, out)
}

fn run_learn(name: &str, a: &LearnArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(Error::Validation {
            field: "reps".into(),
            reason: "must be >= 1".into(),
        });
    }
    let model = CellModel::new(load_scenario(&a.common)?)?;
    let config = ControllerConfig {
        xi: a.xi,
        alpha: a.alpha,
        r0: a.r0,
        epsilon: a.epsilon,
        delta: a.delta,
        n1: a.n1,
        n2: a.n2,
        lower: a.lower,
        upper: a.upper,
        drift: if a.literal_drift {
            FairDrift::Literal
        } else {
            FairDrift::Weighted
        },
        ..Default::default()
    };
    let sim = SimConfig {
        horizon: a.slots,
        seed: a.seed,
        metrics_window: a.window,
        snapshot_stride: a.snapshot_stride,
        record_series: false,
    };
    let registry = ControllerRegistry::with_builtins();
    // Fail on bad parameters before spawning replications.
    registry.build(name, &model, &config)?;

    let reps = run_replications(
        &model,
        |_| registry.build(name, &model, &config),
        &sim,
        a.reps,
    )?;

    let dir = &a.common.out;
    for (rep, r) in reps.iter().enumerate() {
        let suffix = if a.reps == 1 {
            String::new()
        } else {
            format!("_rep{rep}")
        };
        let (path, mut out) = create(dir, &format!("{name}_metrics{suffix}.csv"))?;
        write_snapshots_csv(&r.metrics, &mut out)?;
        finish(path, out)?;
        if let Some(l) = &r.learner {
            let (path, mut out) = create(dir, &format!("{name}_estimates{suffix}.csv"))?;
            write_estimates_csv(l, &mut out)?;
            finish(path, out)?;
        }
    }
    let (path, mut out) = create(dir, &format!("{name}_summary.csv"))?;
    write_summary(&reps, &mut out)?;
    finish(path, out)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_summary(reps: &[Replication], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "rep,slots,mobile_tput,static_tput,trailing_mobile_tput,trailing_static_tput,trailing_xi,trailing_p"
    )?;
    for (rep, r) in reps.iter().enumerate() {
        let m = &r.metrics;
        writeln!(
            out,
            "{rep},{},{},{},{},{},{},{}",
            m.slots,
            m.mobile_tput,
            m.static_tput,
            m.trailing_mobile_tput,
            m.trailing_static_tput,
            opt(m.trailing_xi),
            opt(m.trailing_p)
        )?;
    }
    Ok(())
}
