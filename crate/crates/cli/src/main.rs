//! `hypergns`: exponent tables, inequality ratio sweeps, semilinear wave
//! evolutions on hyperboloidal ladders, and combined reports.
//!
//! Exit codes: 0 = all checks passed, 1 = a check failed, 2 = usage or
//! configuration error.

mod closed_forms;
mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hypergns_core::exponents::{distinct_weight_count, weight_table, Rational, WeightStyle};
use hypergns_core::report::{fmt_f64, Json};
use hypergns_core::simulator::{fit_growth, FitModel};
use hypergns_core::verifier::{
    check_lemma_tech, default_catalog, sweep, CaseId, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "hypergns",
    about = "weighted Sobolev inequalities and energy hierarchies on hyperboloidal slices",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Weight tables and closed-form checks of the exponent systems.
    Exponents {
        /// Spatial dimension (2, 3 or 4).
        #[arg(long)]
        d: u32,
        /// Table style: `kg`, `kg-borderline` or `wave`.
        #[arg(long)]
        style: String,
        /// Evaluation exponents as rationals, e.g. `5,7,12,101/10`.
        #[arg(long, value_delimiter = ',')]
        r: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sweep inequality cases and report LHS/RHS ratio statistics.
    Verify {
        /// Case ids (e.g. GNS1, MORREY); all catalog cases when absent.
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Restrict the catalog to one dimension.
        #[arg(long)]
        d: Option<usize>,
        /// Lemma exponent(s) for LEMMA_TECH.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Sweep every catalog case.
        #[arg(long)]
        all: bool,
        /// Smaller ladders and grids.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evolve the semilinear model and emit the energy trace plus fits.
    Simulate {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Combined report: exponent tables plus a quick verification sweep.
    Report {
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Exponents { d, style, r, output } => cmd_exponents(d, &style, &r, &output),
        Command::Verify { cases, d, p, all, quick, output } => {
            cmd_verify(&cases, d, &p, all, quick, &output)
        }
        Command::Simulate { config, output } => cmd_simulate(&config, &output),
        Command::Report { quick, output } => cmd_report(quick, &output),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `HYPERGNS_THREADS` caps the worker count; 0 or unset means automatic.
fn configure_threads() {
    if let Ok(v) = std::env::var("HYPERGNS_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn emit(output: &OutputArgs, content: &str) -> Result<(), String> {
    match &output.out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            std::io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| format!("stdout: {e}"))
        }
    }
}

fn parse_style(s: &str) -> Result<WeightStyle, String> {
    match s {
        "kg" => Ok(WeightStyle::KgNonBorderline),
        "kg-borderline" => Ok(WeightStyle::KgBorderline),
        "wave" => Ok(WeightStyle::Wave),
        other => Err(format!("unknown style '{other}' (use kg, kg-borderline, wave)")),
    }
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    use hypergns_core::exponents::rat;
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| format!("bad rational '{s}'"))?;
        let d: i64 = den.trim().parse().map_err(|_| format!("bad rational '{s}'"))?;
        if d == 0 {
            return Err(format!("zero denominator in '{s}'"));
        }
        Ok(rat(n, d))
    } else {
        let n: i64 = s.parse().map_err(|_| format!("bad rational '{s}'"))?;
        Ok(rat(n, 1))
    }
}

fn cmd_exponents(
    d: u32,
    style: &str,
    r_args: &[String],
    output: &OutputArgs,
) -> Result<bool, String> {
    if !(2..=4).contains(&d) {
        return Err(format!("dimension must be 2, 3 or 4, got {d}"));
    }
    // the d = 2 Klein-Gordon tables only exist in borderline form
    let style = match (parse_style(style)?, d) {
        (WeightStyle::KgNonBorderline, 2) => WeightStyle::KgBorderline,
        (s, _) => s,
    };
    let rows = weight_table(d, style).map_err(|e| e.to_string())?;
    let r_values: Vec<Rational> = if r_args.is_empty() {
        closed_forms::DEFAULT_R.iter().map(|s| parse_rational(s).unwrap()).collect()
    } else {
        r_args.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>()?
    };
    let checks = closed_forms::run_closed_form_checks(&r_values);
    let all_pass = checks.iter().all(|c| c.pass);

    let content = match output.format {
        OutputFormat::Text => {
            let mut s = String::new();
            s.push_str(&format!(
                "weight table d={d} style={:?} ({} rows, {} distinct weights)\n",
                style,
                rows.len(),
                distinct_weight_count(&rows)
            ));
            for row in &rows {
                s.push_str(&format!(
                    "  {:<24} weight = {}\n",
                    row.label,
                    poly_string(&row.slope, &row.intercept)
                ));
            }
            s.push_str(&format!("\nclosed-form checks at r in {{{}}}:\n", join_r(&r_values)));
            for c in &checks {
                s.push_str(&format!(
                    "  [{}] {}\n",
                    if c.pass { "pass" } else { "FAIL" },
                    c.label
                ));
            }
            s
        }
        OutputFormat::Json | OutputFormat::Csv => {
            let mut obj = Json::object();
            obj.push("d", Json::Int(d as i64));
            obj.push("style", Json::Str(format!("{style:?}")));
            obj.push("distinct_weights", Json::Int(distinct_weight_count(&rows) as i64));
            let rows_json = rows
                .iter()
                .map(|row| {
                    let mut r = Json::object();
                    r.push("label", Json::Str(row.label.clone()));
                    r.push("weight", Json::Str(poly_string(&row.slope, &row.intercept)));
                    r
                })
                .collect();
            obj.push("rows", Json::Array(rows_json));
            let checks_json = checks
                .iter()
                .map(|c| {
                    let mut r = Json::object();
                    r.push("label", Json::Str(c.label.clone()));
                    r.push("pass", Json::Bool(c.pass));
                    r
                })
                .collect();
            obj.push("closed_form_checks", Json::Array(checks_json));
            obj.push("all_checks_pass", Json::Bool(all_pass));
            obj.render()
        }
    };
    emit(output, &content)?;
    Ok(all_pass)
}

fn join_r(rs: &[Rational]) -> String {
    rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
}

fn poly_string(slope: &Rational, intercept: &Rational) -> String {
    use num_traits::Zero;
    if slope.is_zero() {
        return intercept.to_string();
    }
    let s = if slope == &Rational::from_integer(1.into()) {
        "r".to_string()
    } else {
        format!("{slope}*r")
    };
    if intercept.is_zero() {
        s
    } else if intercept > &Rational::zero() {
        format!("{s} + {intercept}")
    } else {
        format!("{s} - {}", -intercept.clone())
    }
}

fn cmd_verify(
    case_args: &[String],
    d_filter: Option<usize>,
    lemma_p: &[f64],
    all: bool,
    quick: bool,
    output: &OutputArgs,
) -> Result<bool, String> {
    let mut selected: Vec<CaseId> = Vec::new();
    if all || case_args.is_empty() {
        selected.extend(CaseId::ALL);
    } else {
        for arg in case_args {
            let id = CaseId::parse(arg).ok_or_else(|| format!("unknown case '{arg}'"))?;
            selected.push(id);
        }
    }
    let sweep_cfg = if quick { SweepConfig::quick() } else { SweepConfig::default() };
    let catalog = default_catalog();
    let mut all_pass = true;
    let mut reports = Vec::new();
    let mut csv = String::from("case_id,family,tau,scale,lhs,rhs,ratio\n");
    let mut lemma_json = Vec::new();
    for id in &selected {
        if *id == CaseId::LemmaTech {
            let ps = if lemma_p.is_empty() { vec![0.5, 1.0, 2.0, 5.0] } else { lemma_p.to_vec() };
            for p in ps {
                let rows = check_lemma_tech(p, &[1.0, std::f64::consts::E, 10.0, 100.0])
                    .map_err(|e| e.to_string())?;
                let pass = rows.iter().all(|r| r.pass);
                all_pass &= pass;
                let mut obj = Json::object();
                obj.push("p", Json::Float(p));
                obj.push("pass", Json::Bool(pass));
                let rows_json = rows
                    .iter()
                    .map(|r| {
                        let mut row = Json::object();
                        row.push("tau", Json::Float(r.tau));
                        row.push("integral", Json::Float(r.integral));
                        row.push("bound", Json::Float(r.bound));
                        row.push("pass", Json::Bool(r.pass));
                        row
                    })
                    .collect();
                obj.push("rows", Json::Array(rows_json));
                lemma_json.push(obj);
            }
            continue;
        }
        for case in catalog.iter().filter(|c| c.id == *id) {
            if let Some(d) = d_filter {
                if case.params.d != d {
                    continue;
                }
            }
            let report = sweep(case, &sweep_cfg).map_err(|e| e.to_string())?;
            all_pass &= report.bounded();
            csv.push_str(
                report
                    .to_csv()
                    .lines()
                    .skip(1)
                    .map(|l| format!("{l}\n"))
                    .collect::<String>()
                    .as_str(),
            );
            reports.push(report);
        }
    }
    let content = match output.format {
        OutputFormat::Csv => csv,
        OutputFormat::Text => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&format!(
                    "[{}] {:<10} max_ratio = {:.6e}  scale_slope = {:+.3}  tau_slope = {:+.3}\n",
                    if r.bounded() { "pass" } else { "FAIL" },
                    r.case_id,
                    r.max_ratio,
                    r.scaling_slope,
                    r.tau_slope,
                ));
            }
            for l in &lemma_json {
                s.push_str(&format!("{}\n", l.render().trim_end()));
            }
            s.push_str(if all_pass { "all checks passed\n" } else { "CHECK FAILURES\n" });
            s
        }
        OutputFormat::Json => {
            let mut obj = Json::object();
            obj.push("all_pass", Json::Bool(all_pass));
            obj.push("reports", Json::Array(reports.iter().map(|r| r.to_json()).collect()));
            obj.push("lemma_tech", Json::Array(lemma_json));
            obj.render()
        }
    };
    emit(output, &content)?;
    Ok(all_pass)
}

fn cmd_simulate(config_path: &PathBuf, output: &OutputArgs) -> Result<bool, String> {
    let setup = config::load_simulation_config(config_path)?;
    let (trace, stats) =
        hypergns_core::simulator::simulate_trace(&setup).map_err(|e| e.to_string())?;
    // fit summary over the requested models
    let mut fits = Vec::new();
    for (name, col) in [
        ("E0", trace.points(|r| r.e0)),
        ("E1", trace.points(|r| r.e1)),
        ("F0", trace.points(|r| r.f0)),
        ("F1", trace.points(|r| r.f1)),
    ] {
        for model in [FitModel::Power, FitModel::Log, FitModel::LogSq] {
            if let Ok(fit) = fit_growth(&col, model) {
                let mut obj = Json::object();
                obj.push("column", Json::Str(name.into()));
                obj.push("model", Json::Str(fit.model.name().into()));
                obj.push("exponent", Json::Float(fit.exponent));
                obj.push("residual", Json::Float(fit.residual));
                fits.push(obj);
            }
        }
    }
    let content = match output.format {
        OutputFormat::Csv => trace.to_csv(),
        OutputFormat::Json | OutputFormat::Text => {
            let mut obj = Json::object();
            obj.push("trace", trace.to_json());
            obj.push("fits", Json::Array(fits));
            obj.push("steps", Json::Int(stats.steps as i64));
            obj.push("final_time", Json::Float(stats.final_time));
            obj.push("boundary_max_abs", Json::Float(stats.boundary_max_abs));
            obj.render()
        }
    };
    emit(output, &content)?;
    Ok(true)
}

fn cmd_report(quick: bool, output: &OutputArgs) -> Result<bool, String> {
    let mut all_pass = true;
    let mut obj = Json::object();
    // exponent tables for every dimension and style
    let mut tables = Vec::new();
    for (d, style, style_name) in [
        (2u32, WeightStyle::KgBorderline, "kg"),
        (3, WeightStyle::KgNonBorderline, "kg"),
        (4, WeightStyle::KgNonBorderline, "kg"),
        (3, WeightStyle::KgBorderline, "kg-borderline"),
        (4, WeightStyle::KgBorderline, "kg-borderline"),
        (2, WeightStyle::Wave, "wave"),
        (3, WeightStyle::Wave, "wave"),
        (4, WeightStyle::Wave, "wave"),
    ] {
        let rows = weight_table(d, style).map_err(|e| e.to_string())?;
        let mut t = Json::object();
        t.push("d", Json::Int(d as i64));
        t.push("style", Json::Str(style_name.into()));
        t.push("distinct_weights", Json::Int(distinct_weight_count(&rows) as i64));
        t.push(
            "rows",
            Json::Array(
                rows.iter()
                    .map(|row| {
                        let mut r = Json::object();
                        r.push("label", Json::Str(row.label.clone()));
                        r.push("weight", Json::Str(poly_string(&row.slope, &row.intercept)));
                        r
                    })
                    .collect(),
            ),
        );
        tables.push(t);
    }
    obj.push("exponent_tables", Json::Array(tables));
    let r_values: Vec<Rational> =
        closed_forms::DEFAULT_R.iter().map(|s| parse_rational(s).unwrap()).collect();
    let checks = closed_forms::run_closed_form_checks(&r_values);
    all_pass &= checks.iter().all(|c| c.pass);
    obj.push(
        "closed_form_checks",
        Json::Array(
            checks
                .iter()
                .map(|c| {
                    let mut r = Json::object();
                    r.push("label", Json::Str(c.label.clone()));
                    r.push("pass", Json::Bool(c.pass));
                    r
                })
                .collect(),
        ),
    );
    // quick sweep over a representative subset (the full catalog comes from
    // `verify --all`)
    let sweep_cfg = if quick { SweepConfig::quick() } else { SweepConfig::default() };
    let subset = [CaseId::Gns1, CaseId::GnsPqr, CaseId::Morrey, CaseId::KgD2];
    let mut reports = Vec::new();
    for case in default_catalog().iter().filter(|c| subset.contains(&c.id)) {
        let report = sweep(case, &sweep_cfg).map_err(|e| e.to_string())?;
        all_pass &= report.bounded();
        let mut r = Json::object();
        r.push("case_id", Json::Str(report.case_id.clone()));
        r.push("max_ratio", Json::Float(report.max_ratio));
        r.push("bounded", Json::Bool(report.bounded()));
        reports.push(r);
    }
    obj.push("sweeps", Json::Array(reports));
    obj.push("all_pass", Json::Bool(all_pass));
    let content = match output.format {
        OutputFormat::Text => {
            format!(
                "combined report: {}\n{}",
                if all_pass { "all checks passed" } else { "CHECK FAILURES" },
                obj.render()
            )
        }
        _ => obj.render(),
    };
    emit(output, &content)?;
    Ok(all_pass)
}

// silence the unused-import lint when fmt_f64 is only used by text output
#[allow(dead_code)]
fn _keep(x: f64) -> String {
    fmt_f64(x)
}
