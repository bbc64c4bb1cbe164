use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use wnlgo::experiments::{
    emit_results, gaussian_amplitudes, run, simulate_trajectory, ExperimentConfig, ExperimentKind,
    ModelConfig, ProfileKind, SobolevConfig,
};
use wnlgo::grid::{write_snapshot, SpectralGrid};
use wnlgo::resonance::{close_phase_set, resonant_tuples, Signature, WaveVector};
use wnlgo::transport::{evolve_profiles, ProfileSet};
use wnlgo::{ConfigCode, Error, Result};

#[derive(Parser)]
#[command(
    name = "wnlgo",
    version,
    about = "Multiphase geometric optics laboratory for NLS-type equations"
)]
struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for eps-sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Nls,
    Ds,
    Dgp,
}

#[derive(Subcommand)]
enum Command {
    /// Close a phase set under resonance and list the resonant tuples.
    Resonance {
        #[arg(long, default_value = "(1,0);(1,1);(0,1)")]
        phi0: String,
        /// Signature such as `++` or `-+`; elliptic when absent.
        #[arg(long, allow_hyphen_values = true)]
        eta: Option<String>,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        #[arg(long = "box", default_value_t = 4)]
        box_radius: i64,
        #[arg(long, default_value_t = 8)]
        generations: usize,
    },
    /// Evolve the profile system of a config and write snapshots.
    Profiles,
    /// Compare the exact field with its multiphase approximation at one eps.
    Simulate {
        #[arg(long, value_enum, default_value = "nls")]
        model: Model,
        #[arg(long, default_value_t = 0.125)]
        eps: f64,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long = "box-L")]
        box_l: Option<f64>,
        #[arg(long = "T", default_value_t = 0.5)]
        t_final: f64,
        #[arg(long, default_value_t = 2e-3)]
        dt: f64,
        /// Config supplying the data and grid sections.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Approximation error sweep over eps.
    Converge,
    /// Creation of the zero mode from three resonant waves.
    ZeroMode,
    /// H^s norms for the more weakly nonlinear scaling J > 1.
    MoreWeakly,
    /// Norm inflation sequence read off the semiclassical solution.
    Inflate,
    /// Fitted eps-slopes of Sobolev norms of oscillating Gaussians.
    SobolevAsymptotics {
        #[arg(long, value_enum)]
        profile: Option<CliProfile>,
        #[arg(long, allow_hyphen_values = true)]
        s: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliProfile {
    Wkb,
    Coherent,
    Scaled,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        code: ConfigCode::MissingKey,
        message: "--config is required".into(),
    })?;
    load_raw(path)
}

// Parsed but not yet validated; the subcommand may still fill in the kind.
fn load_raw(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let kind = match &cli.command {
        Command::Resonance {
            phi0,
            eta,
            nu,
            box_radius,
            generations,
        } => return resonance(cli, phi0, eta.as_deref(), *nu, *box_radius, *generations),
        Command::Profiles => return profiles(cli),
        Command::Simulate {
            model,
            eps,
            grid_n,
            box_l,
            t_final,
            dt,
            data,
        } => {
            return simulate(
                cli,
                *model,
                *eps,
                *grid_n,
                *box_l,
                *t_final,
                *dt,
                data.as_deref(),
            )
        }
        Command::Converge => ExperimentKind::Converge,
        Command::ZeroMode => ExperimentKind::ZeroMode,
        Command::MoreWeakly => ExperimentKind::MoreWeakly,
        Command::Inflate => ExperimentKind::Inflate,
        Command::SobolevAsymptotics { .. } => ExperimentKind::SobolevAsymptotics,
    };
    let mut cfg = match (&cli.command, &cli.config) {
        (Command::SobolevAsymptotics { .. }, None) => ExperimentConfig::new(kind),
        _ => require_config(cli)?,
    };
    match cfg.experiment {
        None => cfg.experiment = Some(kind),
        Some(k) if k != kind => {
            return Err(Error::Config {
                code: ConfigCode::InvalidValue,
                message: format!("config is for `{}`, not `{}`", k.name(), kind.name()),
            })
        }
        Some(_) => {}
    }
    if let Command::SobolevAsymptotics {
        profile,
        s,
        beta,
        kappa,
        eps_list,
        dim,
    } = &cli.command
    {
        if let Some(p) = profile {
            let profile = match p {
                CliProfile::Wkb => ProfileKind::Wkb,
                CliProfile::Coherent => ProfileKind::Coherent,
                CliProfile::Scaled => ProfileKind::Scaled,
            };
            let kappa = kappa
                .clone()
                .or_else(|| cfg.sobolev.as_ref().and_then(|s| s.kappa.clone()));
            cfg.sobolev = Some(SobolevConfig { profile, kappa });
        } else if let (Some(k), Some(sob)) = (kappa, cfg.sobolev.as_mut()) {
            sob.kappa = Some(k.clone());
        }
        cfg.s = s.or(cfg.s);
        cfg.beta = beta.or(cfg.beta);
        if let Some(e) = eps_list {
            cfg.eps_list = Some(e.clone());
        }
        if let Some(d) = dim {
            cfg.model.dim = *d;
        }
    }
    cfg.validate()?;
    let result = run(&cfg)?;
    let (csv, json) = emit_results(&result, &out_dir(cli, Some(&cfg)))?;
    for c in &result.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(result.passed())
}

fn resonance(
    cli: &Cli,
    phi0: &str,
    eta: Option<&str>,
    nu: usize,
    box_radius: i64,
    generations: usize,
) -> Result<bool> {
    let phi0 = WaveVector::parse_list(phi0)?;
    let dim = phi0.first().map(WaveVector::dim).unwrap_or(2);
    let sig = match eta {
        Some(e) => Signature::parse(e)?,
        None => Signature::elliptic(dim),
    };
    let set = close_phase_set(&phi0, &sig, nu, generations, box_radius)?;
    let mut tuples = BTreeMap::new();
    for j in 0..set.len() {
        let list: Vec<Vec<usize>> = resonant_tuples(&set, j)?
            .into_iter()
            .map(|t| t.indices)
            .collect();
        tuples.insert(j.to_string(), list);
    }
    let doc = json!({
        "phi": set.vectors(),
        "tuples": tuples,
        "truncated": set.truncated(),
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("resonance.json"), &text)?;
    }
    Ok(true)
}

fn profiles(cli: &Cli) -> Result<bool> {
    let cfg = require_config(cli)?;
    let t_final = cfg.t_final()?;
    let samples = cfg.samples();
    let set = cfg.phase_set()?;
    let grid = SpectralGrid::new(cfg.model.dim, cfg.half_length(), cfg.profile_points())?;
    let params = cfg.model_params()?.transport_params();
    let alphas = gaussian_amplitudes(&cfg, &grid);
    let mut state = ProfileSet::new(set.clone(), alphas, params)?;
    let dir = out_dir(cli, Some(&cfg)).join("profiles");
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut times = Vec::new();
    let mut mass = Vec::new();
    for k in 0..=samples {
        let t = t_final * k as f64 / samples as f64;
        state = evolve_profiles(&state, t, cfg.dt())?;
        for (j, a) in state.amplitudes().iter().enumerate() {
            let name = format!("a{j}_t{k}.wglf");
            write_snapshot(fs::File::create(dir.join(&name))?, a)?;
            files.push(json!({ "j": j, "k": k, "t": t, "file": name }));
        }
        times.push(t);
        mass.push(state.total_mass());
        println!("t = {t:.6}  total mass = {:.15e}", state.total_mass());
    }
    let index = json!({
        "phases": set.vectors(),
        "times": times,
        "total_mass": mass,
        "snapshots": files,
    });
    fs::write(
        dir.join("index.json"),
        serde_json::to_string_pretty(&index).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cli: &Cli,
    model: Model,
    eps: f64,
    grid_n: Option<usize>,
    box_l: Option<f64>,
    t_final: f64,
    dt: f64,
    data: Option<&Path>,
) -> Result<bool> {
    let mut cfg = match data {
        Some(p) => load_raw(p)?,
        None => ExperimentConfig::new(ExperimentKind::Converge),
    };
    cfg.model = match model {
        Model::Nls => ModelConfig {
            dim: 2,
            lambda: 0.0,
            mu: 1.0,
            ..ModelConfig::default()
        },
        Model::Ds => ModelConfig {
            dim: 2,
            lambda: 1.0,
            mu: 0.0,
            kernel: "ds".into(),
            ..ModelConfig::default()
        },
        Model::Dgp => ModelConfig {
            dim: 3,
            lambda: 1.0,
            mu: 1.0,
            kernel: "dipolar:0,0,1".into(),
            ..ModelConfig::default()
        },
    };
    cfg.t_final = Some(t_final);
    cfg.dt = Some(dt);
    if grid_n.is_some() {
        cfg.grid.n = grid_n;
    }
    if box_l.is_some() {
        cfg.grid.half_length = box_l;
    }
    let traj = simulate_trajectory(&cfg, eps)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["t", "mass", "l2_err", "sup_err", "wiener_err"])
        .map_err(fmt)?;
    for p in &traj {
        w.serialize([p.t, p.mass, p.errors.l2, p.errors.sup, p.errors.wiener])
            .map_err(fmt)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    let dir = out_dir(cli, Some(&cfg));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("simulate.csv"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(true)
}
