use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "painformer", version, about = "Spectral/attention backbone for pain assessment: rasterize, embed, fuse, train, evaluate")]
pub struct Cli {
    /// Run seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON file of flat dotted keys (`seed`, `<command>.<flag>`); flags given
    /// on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a 1-D signal as a 224x224 image.
    Rasterize(RasterizeArgs),
    /// Extract 160-dim backbone embeddings from images.
    Embed(EmbedArgs),
    /// Combine embeddings or class probabilities.
    Fuse(FuseArgs),
    /// Train the reduced backbone jointly on synthetic tasks.
    TrainToy(TrainToyArgs),
    /// Leave-one-subject-out evaluation on synthetic data.
    Loso(LosoArgs),
    /// Export an attention heat map of the last stage.
    Attention(AttentionArgs),
    /// Report parameter counts per module.
    Params(ParamsArgs),
}

#[derive(Debug, clap::Args)]
pub struct RasterizeArgs {
    /// Signal file: CSV (one sample per line) or raw little-endian f32 with a
    /// `.json` sidecar.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub kind: String,
    /// Output image; `.png` writes PNG, anything else binary PPM.
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate in Hz, required for CSV input.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    #[arg(long, default_value = "gray")]
    pub colormap: String,
}

#[derive(Debug, clap::Args)]
pub struct EmbedArgs {
    /// One image, or a directory whose `.ppm`/`.png` files are read in name
    /// order.
    #[arg(long)]
    pub image: PathBuf,
    /// Backbone checkpoint; without one the default backbone is initialized
    /// from the seed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Concatenate a directory's frame embeddings into one vector.
    #[arg(long)]
    pub unify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FuseMode {
    Add,
    Concat,
    Decision,
    BiovidMultimodal,
}

#[derive(Debug, clap::Args)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    pub mode: FuseMode,
    /// PFEM inputs. For biovid-multimodal: GSR, RGB, thermal, depth.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Video encoder checkpoint for biovid-multimodal; seeded init otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainToyArgs {
    /// Class count per task.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
    pub classes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub steps_per_epoch: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long, default_value_t = 2)]
    pub cooldown: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 12)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub label_smoothing: f64,
    #[arg(long, default_value_t = 0.1)]
    pub drop_path: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// `standard` or `verbatim` task weighting.
    #[arg(long, default_value = "standard")]
    pub weighting: String,
    /// Highest-numbered subjects held out for the reported accuracy.
    #[arg(long, default_value_t = 2)]
    pub holdout: usize,
    /// JSON-lines metric trace.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Trained parameters (PFCK).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierKind {
    Probe,
    Centroid,
}

#[derive(Debug, clap::Args)]
pub struct LosoArgs {
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Side of the synthetic images.
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Probe)]
    pub classifier: ClassifierKind,
}

#[derive(Debug, clap::Args)]
pub struct AttentionArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub head: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "gray")]
    pub colormap: String,
}

#[derive(Debug, clap::Args)]
pub struct ParamsArgs {
    /// Classes of the Mixer's classifier.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}
