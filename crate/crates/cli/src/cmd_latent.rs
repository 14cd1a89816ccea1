use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{ArgAction, Args};
use serde::Serialize;
use serde_json::json;

use reverbkit::corpus::write_manifest;
use reverbkit::latent::{interpolate, sample_plane, PcaModel, PlaneRegion, PlaneSampling};
use reverbkit::model::{read_feature, write_feature, ReverbFeature};
use reverbkit::rng::stream_rng;

use crate::config::{manifest_for_dir, manifest_for_file, write_run_manifest};

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct InterpArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// 0 gives `a`, 1 gives `b`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn interp(a: InterpArgs) -> Result<()> {
    let c1 = read_feature(&a.a)?;
    let c2 = read_feature(&a.b)?;
    let c = interpolate(&c1, &c2, a.alpha)?;
    write_feature(&a.output, &c)?;
    println!("{}", json!({ "alpha": a.alpha, "dim": c.dim() }));
    write_run_manifest(&manifest_for_file(&a.output), "interp", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PcaArgs {
    /// Reverb feature files (.rvbf).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required = true)]
    features: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// PCA model file (.rvbp).
    #[arg(short, long)]
    output: PathBuf,
}

pub fn pca(a: PcaArgs) -> Result<()> {
    let rows: Vec<Vec<f64>> = a
        .features
        .iter()
        .map(|p| read_feature(p).map(ReverbFeature::into_values))
        .collect::<reverbkit::Result<_>>()?;
    let model = PcaModel::fit(&rows, a.k)?;
    model.save(&a.output)?;
    let explained: Vec<f64> = model
        .variances
        .iter()
        .map(|v| {
            if model.total_variance > 0.0 {
                v / model.total_variance
            } else {
                0.0
            }
        })
        .collect();
    println!(
        "{}",
        json!({
            "features": rows.len(),
            "components": model.n_components(),
            "explained_variance_ratio": explained,
            "region": model.region,
        })
    );
    write_run_manifest(&manifest_for_file(&a.output), "pca", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SampleArgs {
    /// PCA model file (.rvbp).
    #[arg(long)]
    pca: PathBuf,
    /// `N × N` regular grid over the region.
    #[arg(long, conflicts_with = "uniform", required_unless_present = "uniform")]
    grid: Option<usize>,
    /// Number of uniform random points in the region.
    #[arg(long)]
    uniform: Option<usize>,
    /// Region `min1,min2,max1,max2` in principal coordinates (default: the
    /// bounding box stored with the PCA model).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, allow_hyphen_values = true)]
    region: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `sample_NNNN.rvbf` files and `samples.jsonl`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct SampleRecord {
    index: usize,
    z: [f64; 2],
    path: PathBuf,
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let pca = PcaModel::load(&a.pca)?;
    let region = match &a.region {
        Some(r) => {
            ensure!(r.len() == 4, "--region needs 4 values, got {}", r.len());
            PlaneRegion {
                min: [r[0], r[1]],
                max: [r[2], r[3]],
            }
        }
        None => pca
            .region
            .with_context(|| format!("{} stores no region; pass --region", a.pca.display()))?,
    };
    let sampling = match (a.grid, a.uniform) {
        (Some(n), None) => PlaneSampling::Grid { n },
        (None, Some(count)) => PlaneSampling::Uniform { count },
        _ => bail!("give exactly one of --grid and --uniform"),
    };
    let points = sample_plane(&pca, &region, sampling, &mut stream_rng(a.seed, 0))?;
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut records = Vec::with_capacity(points.len());
    for (i, (z, c)) in points.iter().enumerate() {
        let path = PathBuf::from(format!("sample_{i:04}.rvbf"));
        write_feature(&a.output.join(&path), c)?;
        records.push(SampleRecord {
            index: i,
            z: *z,
            path,
        });
    }
    write_manifest(&a.output.join("samples.jsonl"), &records)?;
    println!("{}", json!({ "samples": records.len(), "region": region }));
    write_run_manifest(&manifest_for_dir(&a.output), "sample", &a)
}
