use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{ArgAction, Args};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use reverbkit::baseline::{
    miipher_rir, rt60_drr_from_reference, UniformRoomPrior, DEFAULT_CANDIDATES,
};
use reverbkit::rir::{
    absorption_for_rt60, direct_path_index, drr, energy_decay_curve, random_placement, rt60,
    simulate_rir, DRR_DIRECT_WINDOW_S,
};
use reverbkit::rng::stream_rng;
use reverbkit::signal::DEFAULT_SAMPLE_RATE;
use reverbkit::wav::{read_wav, write_wav, WavEncoding};
use reverbkit::{Point3, Rir, RoomSpec};

use crate::config::{manifest_for_file, write_run_manifest};

const MIN_WALL_DISTANCE: f64 = 0.5;

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Room size in metres, `Lx,Ly,Lz`.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    dims: Vec<f64>,
    /// Target RT60 in seconds; absorption follows from Sabine's formula.
    #[arg(long, required_unless_present = "alpha", conflicts_with = "alpha")]
    rt60: Option<f64>,
    /// Wall absorption coefficient in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Source position `x,y,z`; drawn at random when omitted.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    src: Option<Vec<f64>>,
    /// Microphone position `x,y,z`; drawn at random when omitted.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    mic: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    fs: u32,
    #[arg(long)]
    max_order: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

fn point(v: &[f64], what: &str) -> Result<Point3> {
    ensure!(v.len() == 3, "{what} needs 3 coordinates, got {}", v.len());
    Ok(Point3 {
        x: v[0],
        y: v[1],
        z: v[2],
    })
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    ensure!(
        a.dims.len() == 3,
        "--dims needs 3 values, got {}",
        a.dims.len()
    );
    let dims = [a.dims[0], a.dims[1], a.dims[2]];
    let (alpha, clamped) = match (a.rt60, a.alpha) {
        (Some(t), None) => {
            let s = absorption_for_rt60(dims, t)?;
            (s.alpha, s.clamped)
        }
        (None, Some(alpha)) => (alpha, false),
        _ => bail!("give exactly one of --rt60 and --alpha"),
    };
    let mut room = RoomSpec::new(dims, alpha, a.fs)?;
    if let Some(k) = a.max_order {
        room = room.with_max_order(k);
    }
    let random = a.src.is_none() || a.mic.is_none();
    let (mut src, mut mic) = if random {
        random_placement(&room, &mut stream_rng(a.seed, 0), MIN_WALL_DISTANCE)?
    } else {
        (
            Point3 {
                x: 0.0,
                y: 0.0,
                z: 0.0,
            },
            Point3 {
                x: 0.0,
                y: 0.0,
                z: 0.0,
            },
        )
    };
    if let Some(s) = &a.src {
        src = point(s, "--src")?;
    }
    if let Some(m) = &a.mic {
        mic = point(m, "--mic")?;
    }
    let rir = simulate_rir(&room, &src, &mic)?;
    let mut meta = rir
        .meta()
        .cloned()
        .context("simulated RIR has no metadata")?;
    if random {
        meta.seed = Some(a.seed);
    }
    let rir = rir.with_meta(meta);
    rir.save(&a.output)?;
    println!(
        "{}",
        json!({
            "output": a.output,
            "alpha": alpha,
            "alpha_clamped": clamped,
            "samples": rir.len(),
            "max_order": rir.meta().map(|m| m.max_order),
        })
    );
    write_run_manifest(&manifest_for_file(&a.output), "simulate-rir", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyzeArgs {
    /// RIR WAV file.
    #[arg(value_name = "RIR", required_unless_present = "input")]
    #[serde(skip)]
    positional: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also write the report here (with a run manifest beside it).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the Schroeder decay curve as `time_s,edc_db` rows.
    #[arg(long)]
    edc_csv: Option<PathBuf>,
}

pub fn analyze(mut a: AnalyzeArgs) -> Result<()> {
    a.input = a.positional.take().or(a.input);
    let path = a.input.clone().context("no RIR given")?;
    let rir = Rir::load(&path)?;
    let fs = rir.sample_rate() as f64;
    let direct = direct_path_index(&rir)?;
    if let Some(p) = &a.edc_csv {
        let mut csv = String::from("time_s,edc_db\n");
        for (i, e) in energy_decay_curve(&rir)?.iter().enumerate() {
            writeln!(csv, "{},{e}", i as f64 / fs)?;
        }
        std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    let report = json!({
        "input": path,
        "edc_csv_path": a.edc_csv,
        "rt60_s": rt60(&rir)?,
        "drr_db": drr(&rir, DRR_DIRECT_WINDOW_S)?,
        "direct_index": direct,
        "direct_time_s": direct as f64 / fs,
        "samples": rir.len(),
        "sample_rate": rir.sample_rate(),
    });
    println!("{report}");
    if let Some(out) = &a.output {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
        write_run_manifest(&manifest_for_file(out), "analyze-rir", &a)?;
    }
    Ok(())
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BaselineArgs {
    /// Dry (dereverberated) speech.
    #[arg(long)]
    dry: PathBuf,
    /// Ground-truth RIR supplying the RT60 and DRR targets.
    #[arg(long, alias = "ref-rir", conflicts_with_all = ["rt60", "drr"])]
    reference_rir: Option<PathBuf>,
    #[arg(long, requires = "drr", required_unless_present = "reference_rir")]
    rt60: Option<f64>,
    #[arg(long, requires = "rt60", allow_hyphen_values = true)]
    drr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the chosen RIR.
    #[arg(long)]
    rir_output: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let dry = read_wav(&a.dry)?;
    let (t60, drr_db) = match (&a.reference_rir, a.rt60, a.drr) {
        (Some(p), _, _) => rt60_drr_from_reference(&Rir::load(p)?)?,
        (None, Some(t), Some(d)) => (t, d),
        _ => bail!("give --reference-rir or both --rt60 and --drr"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let out = miipher_rir(
        &dry,
        t60,
        drr_db,
        a.candidates,
        &UniformRoomPrior::default(),
        &mut rng,
    )?;
    write_wav(&a.output, &out.signal, WavEncoding::Float32)?;
    if let Some(p) = &a.rir_output {
        out.chosen_rir().save(p)?;
    }
    let drrs: Vec<f64> = out.candidates.iter().map(|c| c.drr_db).collect();
    println!(
        "{}",
        json!({
            "rt60_target": t60,
            "drr_target_db": drr_db,
            "chosen": out.chosen,
            "chosen_drr_db": drrs[out.chosen],
            "candidate_drr_db": drrs,
        })
    );
    write_run_manifest(&manifest_for_file(&a.output), "baseline", &a)
}
