//! Command-line front end: inspect brackets and bases, evaluate flows and
//! approximate exponentials, estimate distances/volumes/seminorms, and run
//! verification suites with cached reports.
//!
//! Exit codes: 0 success, 1 schema/usage errors, 2 numerical failures,
//! 3 verification suites below threshold.

use carnot_lab::ballbox::{lambda_i, maximal_annulus, select_maximal, volume_proxy};
use carnot_lab::error::Error;
use carnot_lab::flows::approx_exp;
use carnot_lab::metric::{box_distance, cc_distance_upper, rho_distance_upper};
use carnot_lab::report::Report;
use carnot_lab::scenario::{bundled, bundled_names, Scenario};
use carnot_lab::seminorms::{seminorm_d, seminorm_dir, DirConfig};
use carnot_lab::verify::run_suite;
use carnot_lab::vf::{commutator_field, Word};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "carnot-lab", version, about = "Numerical sub-Riemannian geometry lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Scenario: a bundled name or a path to a scenario JSON file
    #[arg(long, global = true, default_value = "heisenberg")]
    scenario: String,

    /// Output directory for cached reports
    #[arg(long, global = true, env = "CARNOT_LAB_OUT", default_value = "out")]
    out: PathBuf,

    /// Override the scenario seed (changes the cache key)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Recompute even when a cached report exists
    #[arg(long, global = true)]
    force: bool,

    /// Reserved; the estimators are currently single-threaded
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the commutator field X_w of the scenario generators
    Bracket {
        /// Word over generator letters, e.g. 12 for [X1,X2]
        #[arg(long)]
        word: String,
    },
    /// List the pruned commutator basis Y_1..Y_q
    Basis,
    /// Flow along basis field Y_j from a point
    Flow {
        /// 1-based basis index
        #[arg(long)]
        j: usize,
        #[arg(long)]
        t: f64,
        /// Start point, comma-separated
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Apply the approximate exponential exp_ap(t X_w) to a point
    Approxexp {
        #[arg(long)]
        word: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Maximal tuple, proxy volume and maximality annulus at (x, r)
    Ballbox {
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long)]
        r: f64,
    },
    /// Upper-bound estimates of d(x,y) and rho(x,y)
    Distance {
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<f64>,
    },
    /// Ball-volume proxy at the domain center across dyadic radii
    Volume,
    /// Estimate a fractional seminorm of the scenario function
    Seminorm {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        /// Directional seminorm along X_w instead of the metric seminorm
        #[arg(long)]
        word: Option<String>,
        /// Upper cutoff radius (defaults to the scenario r0)
        #[arg(long)]
        max_d: Option<f64>,
        /// Integrate over negative flow times too (directional only)
        #[arg(long)]
        symmetric_t: bool,
    },
    /// Run a verification suite ("all" runs every suite in the scenario)
    Verify { suite: String },
    /// Print a cached verification report
    Report { suite: String },
}

fn load_scenario(cli: &Cli) -> Result<Scenario, Error> {
    let mut sc = match bundled(&cli.scenario) {
        Some(sc) => sc,
        None => {
            let path = Path::new(&cli.scenario);
            if !path.exists() {
                return Err(Error::Schema(format!(
                    "unknown scenario `{}`; bundled: {:?}",
                    cli.scenario,
                    bundled_names()
                )));
            }
            Scenario::load(path)?
        }
    };
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}

/// Write a report under out/<scenario-hash>/<suite>.json via a temp file and
/// rename, so readers never observe a partial file.
fn write_cached(report: &Report, dir: &Path, suite: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{suite}.json"));
    let tmp = dir.join(format!(".{suite}.json.tmp"));
    std::fs::write(&tmp, report.to_json()?)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

fn read_cached(dir: &Path, suite: &str) -> Option<Report> {
    let text = std::fs::read_to_string(dir.join(format!("{suite}.json"))).ok()?;
    serde_json::from_str(&text).ok()
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let sc = load_scenario(cli)?;
    let basis = sc.basis()?;
    let gens = sc.generator_fields()?;
    let icfg = sc.integrator();
    let consts = sc.consts()?;
    let cache_dir = cli.out.join(sc.hash());

    match &cli.cmd {
        Cmd::Bracket { word } => {
            let w = Word::parse(word, gens.len())?;
            let field = commutator_field(&gens, &w)?;
            let parts: Vec<String> = field.coeffs().iter().map(|c| c.to_string()).collect();
            println!("({})", parts.join(", "));
        }
        Cmd::Basis => {
            println!("j\tword\tell\tfield");
            for j in 1..=basis.len() {
                let parts: Vec<String> =
                    basis.field(j).coeffs().iter().map(|c| c.to_string()).collect();
                println!("{j}\t{}\t{}\t({})", basis.word(j), basis.ell(j), parts.join(", "));
            }
        }
        Cmd::Flow { j, t, x } => {
            if *j == 0 || *j > basis.len() {
                return Err(Error::Schema(format!(
                    "basis index must be in 1..={}, got {j}",
                    basis.len()
                )));
            }
            let y = carnot_lab::flows::flow(basis.field(*j), x, *t, &icfg)?;
            println!("{}", fmt_point(&y));
        }
        Cmd::Approxexp { word, t, x } => {
            let w = Word::parse(word, gens.len())?;
            let y = approx_exp(&gens, &w, *t, x, &icfg)?;
            println!("{}", fmt_point(&y));
        }
        Cmd::Ballbox { x, r } => {
            let index = select_maximal(&basis, x, *r)?;
            println!("index: {index}");
            println!("lambda: {}", lambda_i(&basis, &index, x));
            println!("ell: {}", carnot_lab::ballbox::ell(&basis, &index));
            println!("volume_proxy: {}", volume_proxy(&basis, x, *r));
            match maximal_annulus(&basis, &index, x, &consts) {
                Some((lo, hi)) => println!("maximal_annulus: [{lo}, {hi}]"),
                None => println!("maximal_annulus: none"),
            }
        }
        Cmd::Distance { x, y } => {
            let cfg = sc.metric_config();
            let d = cc_distance_upper(&basis, x, y, &cfg, sc.seed)?;
            let rho = rho_distance_upper(&basis, x, y, &cfg, sc.seed)?;
            let bd = box_distance(&basis, x, y, &consts, &icfg)?;
            println!("d_upper: {}", d.value);
            println!("rho_upper: {}", rho.value);
            println!("box_distance: {bd}");
        }
        Cmd::Volume => {
            let x = sc.omega.center();
            println!("r\tvolume_proxy");
            for k in 0..6 {
                let r = sc.r0 * 0.5f64.powi(k);
                println!("{r}\t{}", volume_proxy(&basis, &x, r));
            }
        }
        Cmd::Seminorm {
            s,
            p,
            word,
            max_d,
            symmetric_t,
        } => {
            let s = s.unwrap_or(sc.s_values[0]);
            let p = p.unwrap_or(sc.p_values[0]);
            let r0 = max_d.unwrap_or(sc.r0);
            let f = sc.f_expr()?;
            match word {
                Some(wtext) => {
                    let w = Word::parse(wtext, gens.len())?;
                    let z = commutator_field(&gens, &w)?;
                    let cfg = DirConfig {
                        x_count: sc.counts.x_count,
                        t_points: sc.counts.t_points,
                        symmetric_t: *symmetric_t,
                        seed: sc.seed,
                        ..Default::default()
                    };
                    let eps = s / w.len() as f64;
                    let v = seminorm_dir(&f, &z, &sc.omega, eps, p, r0, &cfg, &icfg)?;
                    println!("seminorm_dir: {v}");
                }
                None => {
                    let mut consts = consts;
                    consts.r0 = r0;
                    let mut dist = |a: &[f64], b: &[f64]| {
                        box_distance(&basis, a, b, &consts, &icfg)
                            .ok()
                            .filter(|&d| d > 0.0)
                    };
                    let v = seminorm_d(
                        &basis,
                        &f,
                        &sc.omega,
                        &consts,
                        s,
                        p,
                        sc.counts.shells,
                        sc.counts.pairs,
                        sc.seed,
                        &icfg,
                        &mut dist,
                    )?;
                    println!("seminorm_d: {v}");
                }
            }
        }
        Cmd::Verify { suite } => {
            let names: Vec<String> = if suite == "all" {
                sc.suites.clone()
            } else {
                vec![suite.clone()]
            };
            if names.is_empty() {
                return Err(Error::Schema("scenario lists no suites".into()));
            }
            let mut all_pass = true;
            for name in &names {
                let (report, cached) = match read_cached(&cache_dir, name) {
                    Some(r) if !cli.force => (r, true),
                    _ => {
                        let r = run_suite(&sc, name)?;
                        write_cached(&r, &cache_dir, name)?;
                        (r, false)
                    }
                };
                let pass = report.passed.unwrap_or(false);
                all_pass &= pass;
                println!(
                    "{name}: {}{}",
                    if pass { "PASS" } else { "FAIL" },
                    if cached { " (cached)" } else { "" }
                );
            }
            println!("reports: {}", cache_dir.display());
            if !all_pass {
                return Ok(3);
            }
        }
        Cmd::Report { suite } => match read_cached(&cache_dir, suite) {
            Some(report) => println!("{}", report.to_json()?),
            None => {
                return Err(Error::Schema(format!(
                    "no cached report for `{suite}` under {}",
                    cache_dir.display()
                )))
            }
        },
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Schema(_) | Error::Io(_) | Error::Json(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
