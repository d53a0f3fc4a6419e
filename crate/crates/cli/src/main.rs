use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use g2wave::field::{norm_sq, weighted_inner_product, Field, GridField3, GridSpec3, WeightKind};
use g2wave::verify::{run_suite, Suite, VerifyConfig};
use g2wave::wavelet::{
    admissibility_integral, analyze, default_admissibility_grid, synthesize, weak_test_fields, CoeffSet, QuadConfig,
    QuadSpecG2, WaveletSpec,
};
use g2wave::{Error, Exec};
use serde::Serialize;
use serde_json::json;

const EXIT_FAIL: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "g2wave", version, about = "Continuous wavelet analysis on the affine group of the plane")]
struct Cli {
    /// Worker threads (default: available cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded property suite and print a JSON report.
    Verify {
        /// cocycle, group, semiinv, homomorphism, unitary, intertwine, ortho or g1.
        #[arg(long)]
        suite: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Replaces every per-check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Also write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Admissibility integral of a wavelet and the factor normalizing it to 1.
    Admissibility {
        /// Inline JSON, a JSON file, or `psi_star` / `rho_star`.
        #[arg(long, default_value = "psi_star")]
        wavelet: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Voice coefficients of a G2F1 volume, written as G2C1.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "psi_star")]
        wavelet: String,
        /// `q1`, `q2`, `q3`, inline JSON or a JSON file.
        #[arg(long, default_value = "q1")]
        quad: String,
    },
    /// Weak reconstruction from G2C1 coefficients, written as G2F1.
    Synthesize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Output grid as JSON; defaults to the grid the coefficients were computed on.
        #[arg(long)]
        grid: Option<String>,
        /// Volume to compare weak pairings against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Compare an original and a reconstructed G2F1 volume.
    Report {
        /// Original, then reconstruction.
        #[arg(long, num_args = 2, required = true, value_names = ["ORIG", "RECON"])]
        input: Vec<PathBuf>,
        /// Per-slice CSV export.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    let exec = Exec::Parallel;
    match command {
        Command::Verify { suite, samples, seed, tol, output } => {
            let suite: Suite = suite.parse()?;
            check_output(output.as_deref())?;
            let report = run_suite(suite, &VerifyConfig { samples, seed, tol, exec })?;
            emit(&report, output.as_deref())?;
            Ok(if report.passed { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Admissibility { wavelet, output } => {
            let spec = parse_wavelet(&wavelet)?;
            check_output(output.as_deref())?;
            let psi = spec.build()?;
            match admissibility_integral(&psi, &default_admissibility_grid(), exec) {
                Ok(a) => {
                    let factor = if a.integral > 0.0 { Some(1.0 / a.integral.sqrt()) } else { None };
                    let report = json!({
                        "integral": a.integral,
                        "converged": a.converged,
                        "normalizationFactor": factor,
                        "coarse": a.coarse,
                        "refined": a.refined,
                    });
                    emit(&report, output.as_deref())?;
                    Ok(if a.converged && factor.is_some() { Outcome::Pass } else { Outcome::Fail })
                }
                Err(Error::NonConvergent { coarse, refined }) => {
                    let report = json!({
                        "integral": null,
                        "converged": false,
                        "normalizationFactor": null,
                        "coarse": coarse,
                        "refined": refined,
                    });
                    emit(&report, output.as_deref())?;
                    Ok(Outcome::Fail)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Analyze { input, output, wavelet, quad } => {
            let spec = parse_wavelet(&wavelet)?;
            let config = parse_quad(&quad)?;
            check_input(&input)?;
            check_output(Some(&output))?;
            let grid = GridField3::load(&input).with_context(|| format!("reading {}", input.display()))?;
            let tag = spec.tag()?;
            if grid.tag() != tag {
                bail!("volume is {} but the wavelet is {}", grid.tag(), tag);
            }
            let inner = *grid.spec();
            let quad = Arc::new(QuadSpecG2::build(&config)?);
            let xi: Field = grid.into();
            let coeffs = analyze(&xi, &spec, &quad, &inner, exec)?;
            coeffs.save(&output)?;
            let energy = coeffs.partial_energy();
            let norm = norm_sq(&xi, WeightKind::Lebesgue, &inner, exec)?;
            let adm = admissibility_integral(&spec.build()?, &default_admissibility_grid(), exec)?.integral;
            let ratio = if norm > 0.0 { Some(energy / (norm * adm)) } else { None };
            let alias_free = alias_free(&quad, &inner);
            if !alias_free {
                eprintln!("warning: the input grid is too coarse for the translation box; voices alias in x");
            }
            emit(
                &json!({
                    "output": output,
                    "nodes": coeffs.len(),
                    "partialEnergy": energy,
                    "normSquared": norm,
                    "admissibility": adm,
                    "ratio": ratio,
                    "aliasFree": alias_free,
                }),
                None,
            )?;
            Ok(Outcome::Pass)
        }
        Command::Synthesize { input, output, grid, reference } => {
            check_input(&input)?;
            if let Some(r) = &reference {
                check_input(r)?;
            }
            check_output(Some(&output))?;
            let grid: Option<GridSpec3> = grid.map(|g| parse_json_arg(&g)).transpose()?;
            let coeffs = CoeffSet::load(&input).with_context(|| format!("reading {}", input.display()))?;
            let reference = reference
                .map(|r| GridField3::load(&r).with_context(|| format!("reading {}", r.display())))
                .transpose()?;
            let out_grid = grid.unwrap_or(coeffs.meta().source.grid);
            if let Some(r) = &reference {
                if *r.spec() != out_grid || r.tag() != coeffs.meta().source.tag {
                    bail!("reference volume does not match the output grid");
                }
            }
            let recon = synthesize(&coeffs, &coeffs.meta().wavelet, &out_grid, exec)?;
            recon.save(&output)?;
            let pairings = match reference {
                Some(r) => Some(weak_pairings(&recon.into(), &r.into(), &out_grid, exec)?),
                None => None,
            };
            emit(&json!({ "output": output, "pairings": pairings }), None)?;
            Ok(Outcome::Pass)
        }
        Command::Report { input, output } => {
            let [orig, recon] = <[PathBuf; 2]>::try_from(input).map_err(|_| anyhow!("report takes two inputs"))?;
            check_input(&orig)?;
            check_input(&recon)?;
            check_output(output.as_deref())?;
            let a = GridField3::load(&orig).with_context(|| format!("reading {}", orig.display()))?;
            let b = GridField3::load(&recon).with_context(|| format!("reading {}", recon.display()))?;
            a.check_compatible(&b)?;
            let report = compare(&a, &b);
            if let Some(path) = &output {
                write_slices_csv(path, &report.slices)?;
            }
            emit(&report, None)?;
            Ok(Outcome::Pass)
        }
    }
}

/// Voices computed on `inner` repeat in `x` with period `1 / step`; the translation box must fit in one period.
fn alias_free(quad: &QuadSpecG2, inner: &GridSpec3) -> bool {
    let fits = |xs: &[f64], step: f64| match (xs.first(), xs.last()) {
        (Some(lo), Some(hi)) => hi - lo + quad.x_cell().sqrt() <= 1.0 / step,
        _ => true,
    };
    fits(quad.x1(), inner.axes[0].step()) && fits(quad.x2(), inner.axes[1].step())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Pairing {
    field: usize,
    reconstructed: [f64; 2],
    reference: [f64; 2],
    rel_error: Option<f64>,
}

fn weak_pairings(recon: &Field, reference: &Field, grid: &GridSpec3, exec: Exec) -> Result<Vec<Pairing>> {
    let mut out = Vec::new();
    for (i, h) in weak_test_fields(reference.tag())?.into_iter().enumerate() {
        let h: Field = h.into();
        let p = weighted_inner_product(recon, &h, WeightKind::Lebesgue, grid, exec)?;
        let e = weighted_inner_product(reference, &h, WeightKind::Lebesgue, grid, exec)?;
        let rel_error = if e.norm() > 0.0 { Some((p - e).norm() / e.norm()) } else { None };
        out.push(Pairing { field: i, reconstructed: [p.re, p.im], reference: [e.re, e.im], rel_error });
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Slice {
    index: usize,
    third: f64,
    orig_energy: f64,
    recon_energy: f64,
    error_energy: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Comparison {
    relative_l2_error: Option<f64>,
    energy_ratio: Option<f64>,
    orig_energy: f64,
    recon_energy: f64,
    #[serde(skip)]
    slices: Vec<Slice>,
}

fn compare(a: &GridField3, b: &GridField3) -> Comparison {
    let spec = a.spec();
    let [n1, n2, n3] = spec.dims();
    let cell = spec.cell_volume();
    let mut slices: Vec<Slice> = (0..n3)
        .map(|k| Slice { index: k, third: spec.axes[2].coord(k), orig_energy: 0.0, recon_energy: 0.0, error_energy: 0.0 })
        .collect();
    for i in 0..n1 {
        for j in 0..n2 {
            for (k, (x, y)) in a.line(i, j).iter().zip(b.line(i, j)).enumerate() {
                let s = &mut slices[k];
                s.orig_energy += x.norm_sqr() * cell;
                s.recon_energy += y.norm_sqr() * cell;
                s.error_energy += (x - y).norm_sqr() * cell;
            }
        }
    }
    let orig: f64 = slices.iter().map(|s| s.orig_energy).sum();
    let recon: f64 = slices.iter().map(|s| s.recon_energy).sum();
    let err: f64 = slices.iter().map(|s| s.error_energy).sum();
    let positive = |x: f64| if orig > 0.0 { Some(x) } else { None };
    Comparison {
        relative_l2_error: positive((err / orig).sqrt()),
        energy_ratio: positive(recon / orig),
        orig_energy: orig,
        recon_energy: recon,
        slices,
    }
}

fn write_slices_csv(path: &Path, slices: &[Slice]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    w.write_record(["index", "third", "orig_energy", "recon_energy", "error_energy", "relative_error"])?;
    for s in slices {
        let rel = if s.orig_energy > 0.0 { (s.error_energy / s.orig_energy).sqrt().to_string() } else { String::new() };
        w.write_record([
            s.index.to_string(),
            s.third.to_string(),
            s.orig_energy.to_string(),
            s.recon_energy.to_string(),
            s.error_energy.to_string(),
            rel,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = path {
        fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn check_input(p: &Path) -> Result<()> {
    if !p.is_file() {
        bail!("input {} does not exist", p.display());
    }
    Ok(())
}

fn check_output(p: Option<&Path>) -> Result<()> {
    if let Some(p) = p {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            bail!("output directory {} does not exist", parent.display());
        }
    }
    Ok(())
}

/// Inline JSON when the argument starts with `{`, otherwise a path to a JSON file.
fn parse_json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))
}

fn parse_wavelet(arg: &str) -> Result<WaveletSpec> {
    let spec = match arg {
        "psi_star" => WaveletSpec::psi_star(),
        "rho_star" => WaveletSpec::rho_star(),
        _ => parse_json_arg(arg)?,
    };
    spec.build()?;
    Ok(spec)
}

fn parse_quad(arg: &str) -> Result<QuadConfig> {
    let level = match arg {
        "q1" => Some(1),
        "q2" => Some(2),
        "q3" => Some(3),
        _ => None,
    };
    match level {
        Some(l) => Ok(QuadConfig::reference(l)?),
        None => parse_json_arg(arg),
    }
}
