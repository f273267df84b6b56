//! Command-line surface: `analytic`, `extract`, `stability`, `compare`.
//!
//! Each command writes CSV tables, SVG figures with sibling CSVs, and one
//! `manifest.json` into the output directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load_config, ConfigFile, RunConfig};
use crate::domains::{mfd_classify, to_domain, DEFAULT_MFD_THRESHOLD};
use crate::error::{Error, Result};
use crate::extraction::{config_hash, injection_pair, pipeline, ExtractOptions, ExtractionManifest, ModelKind};
use crate::freqresp::{make_grid, read_numeric_csv, Domain, FrequencyGrid, GridKind, Tf1x1, Tf2x2};
use crate::models::analytic_models;
use crate::params::Units;
use crate::report::{bode_figure, nyquist_panel, Figure, Panel, Series};
use crate::stability::{
    det_winding, eig_loci_closed_form, epsilon_norm, nyquist_verdict, Closure, EigenLoci, MinorLoopSet,
    NyquistOptions, NyquistVerdict, DEFAULT_EPS_THRESHOLD,
};
use crate::timesim::InjectionKind;

pub const MANIFEST: &str = "manifest.json";

/// Contour used for Nyquist verdicts on analytic models.
pub const VERDICT_GRID: &str = "0.01:20000:4000:log";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub n: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn build(&self, fundamental_hz: f64) -> Result<FrequencyGrid> {
        make_grid(self.f_min, self.f_max, self.n, self.kind, fundamental_hz)
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let usage = || format!("expected fmin:fmax:n:log|lin, got `{s}`");
        if parts.len() != 4 {
            return Err(usage());
        }
        let num = |x: &str| x.parse::<f64>().map_err(|_| usage());
        let kind = match parts[3] {
            "log" => GridKind::Logarithmic,
            "lin" => GridKind::Linear,
            _ => return Err(usage()),
        };
        Ok(GridSpec {
            f_min: num(parts[0])?,
            f_max: num(parts[1])?,
            n: parts[2].parse().map_err(|_| usage())?,
            kind,
        })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = if self.kind == GridKind::Linear { "lin" } else { "log" };
        write!(f, "{}:{}:{}:{kind}", self.f_min, self.f_max, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Dq,
    Pn,
    Both,
}

impl DomainArg {
    pub fn domains(self) -> Vec<Domain> {
        match self {
            DomainArg::Dq => vec![Domain::Dq],
            DomainArg::Pn => vec![Domain::Pn],
            DomainArg::Both => vec![Domain::Dq, Domain::Pn],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Dec,
    Matrix,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelSource {
    Analytic,
    Extracted,
}

#[derive(Debug, Parser)]
#[command(name = "zcouple", version, about = "Impedance models and stability of grid-connected converters")]
pub struct Cli {
    /// TOML configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub domain: DomainArg,
    /// fmin:fmax:n:log|lin
    #[arg(long, global = true, default_value = "1:2000:200:log")]
    pub grid: GridSpec,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic source and load impedances with Bode figures.
    Analytic,
    /// Time-domain identification with overlays against the analytic models.
    Extract {
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
        /// Injection kinds, e.g. `dq1,dq2`; defaults to both of each domain.
        #[arg(long, value_delimiter = ',')]
        inj: Vec<String>,
        /// Measurement window in seconds.
        #[arg(long)]
        window: Option<f64>,
        /// Number of points repeated at twice the amplitude.
        #[arg(long, default_value_t = 3)]
        linearity_points: usize,
    },
    /// Minor loops, eigenvalue loci, decoupling norm and Nyquist verdicts.
    Stability {
        #[arg(long, value_enum, default_value = "analytic")]
        models: ModelSource,
        #[arg(long, default_value_t = DEFAULT_EPS_THRESHOLD)]
        eps_threshold: f64,
    },
    /// Per-frequency differences of loci and decoupling norms of two runs.
    Compare { a: PathBuf, b: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Extract { .. } => "extract",
            Command::Stability { .. } => "stability",
            Command::Compare { .. } => "compare",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub config: Option<ConfigFile>,
    pub config_hash: Option<String>,
    pub grid: String,
    pub domain: String,
    pub outputs: Vec<String>,
    pub timestamp_unix_s: u64,
    pub details: serde_json::Value,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let f = File::open(&path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

/// What a successful command found.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    /// A Nyquist verdict was withheld because a locus passed too close to -1.
    pub marginal: bool,
}

/// 0 success, 1 usage or configuration, 2 numerical failure, 3 marginal.
pub fn exit_code(r: &Result<Outcome>) -> i32 {
    match r {
        Ok(o) if o.marginal => 3,
        Ok(_) => 0,
        Err(e) if e.is_numerical() => 2,
        Err(_) => 1,
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Out {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn tf(&mut self, name: &str, tf: &Tf2x2) -> Result<()> {
        self.write(name, |w| tf.write_csv(w))
    }

    fn figure(&mut self, stem: &str, fig: &Figure) -> Result<()> {
        for path in fig.save(&self.dir, stem)? {
            if let Some(n) = path.file_name() {
                self.files.push(n.to_string_lossy().into_owned());
            }
        }
        Ok(())
    }

    fn finish(mut self, cli: &Cli, argv: &[String], cfg: Option<&RunConfig>, details: serde_json::Value) -> Result<()> {
        self.files.sort();
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: argv.to_vec(),
            config: cfg.map(ConfigFile::snapshot),
            config_hash: cfg.map(|c| config_hash(&c.sim)),
            grid: cli.grid.to_string(),
            domain: format!("{:?}", cli.domain).to_lowercase(),
            outputs: self.files,
            timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            details,
        };
        let f = File::create(self.dir.join(MANIFEST))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        None => ConfigFile::default().resolve(),
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            let f = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let m: RunManifest = serde_json::from_reader(BufReader::new(f))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            m.config
                .ok_or_else(|| Error::Config(format!("{}: manifest holds no configuration", path.display())))?
                .resolve()
        }
        Some(path) => load_config(path),
    }
}

fn scale_tf1(z: &Tf1x1, k: f64) -> Result<Tf1x1> {
    let v: Vec<Complex64> = z.values().iter().map(|x| x * k).collect();
    Tf1x1::new(z.grid().clone(), v, z.label())
}

/// Parses the given arguments (including the program name) and runs.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    match Cli::try_parse_from(&argv) {
        Ok(cli) => {
            let r = run(&cli, &argv);
            if let Err(e) = &r {
                eprintln!("error: {e}");
            }
            exit_code(&r)
        }
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        // Only the first configuration of the global pool takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Analytic => cmd_analytic(cli, argv),
        Command::Extract {
            model,
            inj,
            window,
            linearity_points,
        } => cmd_extract(cli, argv, *model, inj, *window, *linearity_points),
        Command::Stability { models, eps_threshold } => cmd_stability(cli, argv, *models, *eps_threshold),
        Command::Compare { a, b } => cmd_compare(cli, argv, a, b),
    }
}

fn cmd_analytic(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    let cfg = load(cli)?;
    let p = cfg.params();
    let grid = cli.grid.build(p.f_n)?;
    let m = analytic_models(p, &grid, cfg.pll_enabled(), Units::PerUnit)?;
    let mut out = Out::new(&cli.out)?;
    let mut mfd = serde_json::Map::new();
    for dom in cli.domain.domains() {
        let d = dom.name();
        for (role, z) in [("source", &m.source), ("load", &m.load)] {
            let z = to_domain(z, dom)?;
            out.tf(&format!("z_{role}_{d}.csv"), &z)?;
            let rep = mfd_classify(&z, DEFAULT_MFD_THRESHOLD)?;
            out.write(&format!("mfd_{role}_{d}.csv"), |w| rep.write_csv(w))?;
            mfd.insert(
                format!("{role}_{d}"),
                json!({ "all_mfd": rep.all_mfd(), "max_ratio": rep.max_ratio() }),
            );
            let title = format!("{role} impedance, {d} domain ({})", cfg.sim.case.name());
            out.figure(&format!("bode_{role}_{d}"), &bode_figure(&title, &[(role, &z)], "pu"))?;
        }
    }
    let details = json!({
        "case": cfg.sim.case.name(),
        "units": "pu",
        "operating_point": m.op,
        "operating_point_residual": m.op.residual(p),
        "mfd": mfd,
    });
    out.finish(cli, argv, Some(&cfg), details)?;
    Ok(Outcome::default())
}

fn cmd_extract(
    cli: &Cli,
    argv: &[String],
    model: ModelArg,
    inj: &[String],
    window: Option<f64>,
    linearity_points: usize,
) -> Result<Outcome> {
    let cfg = load(cli)?;
    let p = cfg.params();
    let grid = cli.grid.build(p.f_n)?;
    let domains = cli.domain.domains();
    let kinds = inj
        .iter()
        .map(|s| InjectionKind::parse(s).ok_or_else(|| Error::Usage(format!("unknown injection kind `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(k) = kinds.iter().find(|k| !domains.iter().any(|d| injection_pair(*d).contains(k))) {
        return Err(Error::Usage(format!("injection {} belongs to no selected domain", k.name())));
    }
    let models = match model {
        ModelArg::Dec => vec![ModelKind::Dec],
        ModelArg::Matrix => vec![ModelKind::Matrix],
        ModelArg::Both => vec![ModelKind::Dec, ModelKind::Matrix],
    };
    let to_pu = 1.0 / p.z_base();
    let mut out = Out::new(&cli.out)?;
    let mut manifests = Vec::new();
    for dom in domains {
        let d = dom.name();
        let mut opts = ExtractOptions::new(dom);
        opts.models = models.clone();
        opts.amplitude_pu = cfg.i_inj_pu;
        opts.linearity_points = linearity_points;
        if let Some(w) = window {
            opts.window_s = w;
        }
        if !kinds.is_empty() {
            opts.kinds = injection_pair(dom).into_iter().filter(|k| kinds.contains(k)).collect();
        }
        eprintln!("extract: {d} domain, {} points", grid.len());
        let res = pipeline(&cfg.sim, &grid, dom, &opts)?;
        let an = analytic_models(p, &res.grid, cfg.pll_enabled(), Units::PerUnit)?;
        for (role, ext, model) in [("source", &res.z_source, &an.source), ("load", &res.z_load, &an.load)] {
            if let Some(z) = ext {
                let z = z.scaled(to_pu)?;
                out.write(&format!("z_{role}_{d}_extracted.csv"), |w| {
                    z.write_csv_with(w, &[("cond", &res.cond)])
                })?;
                let a = to_domain(model, dom)?;
                let title = format!("{role} impedance, {d} domain: analytic vs extracted");
                out.figure(
                    &format!("overlay_{role}_{d}"),
                    &bode_figure(&title, &[("analytic", &a), ("extracted", &z)], "pu"),
                )?;
            }
        }
        let channels = [("source", &res.source_channels), ("load", &res.load_channels)];
        let mut fig = Figure::new(format!("decoupled channels, {d} domain"), 2);
        for (role, chans) in channels {
            for ch in chans.iter().flatten() {
                let z = scale_tf1(ch, to_pu)?;
                out.write(&format!("{}_{d}_dec.csv", z.label()), |w| z.write_csv(w))?;
                let hz = z.grid().hz();
                fig.panels.push(
                    Panel::new(format!("|{}| ({role})", z.label()), "f (Hz)", "magnitude (pu)")
                        .log_x()
                        .log_y()
                        .with(Series::line("extracted", hz.clone(), z.values().iter().map(|v| v.norm()).collect())),
                );
                let mut ang = Panel::new(format!("angle {}", z.label()), "f (Hz)", "angle (deg)").log_x().with(
                    Series::line("extracted", hz, z.values().iter().map(|v| v.arg().to_degrees()).collect()),
                );
                ang.y_range = Some((-180.0, 180.0));
                fig.panels.push(ang);
            }
        }
        if !fig.panels.is_empty() {
            out.figure(&format!("dec_{d}"), &fig)?;
        }
        manifests.push(ExtractionManifest::new(&cfg.sim, &opts, &res));
    }
    out.finish(cli, argv, Some(&cfg), json!({ "units": "pu", "extraction": manifests }))?;
    Ok(Outcome::default())
}

#[derive(Clone, Debug, Serialize)]
struct VerdictRow {
    domain: &'static str,
    variant: &'static str,
    verdict: NyquistVerdict,
    det_encirclements: Option<i64>,
    contour: String,
}

fn loop_sets(cfg: &RunConfig, grid: &FrequencyGrid, dom: Domain, source: ModelSource) -> Result<MinorLoopSet> {
    let p = cfg.params();
    match source {
        ModelSource::Analytic => {
            let m = analytic_models(p, grid, cfg.pll_enabled(), Units::PerUnit)?;
            MinorLoopSet::from_impedances(&to_domain(&m.source, dom)?, &to_domain(&m.load, dom)?)
        }
        ModelSource::Extracted => {
            let mut opts = ExtractOptions::new(dom);
            opts.amplitude_pu = cfg.i_inj_pu;
            eprintln!("stability: extracting {} domain, {} points", dom.name(), grid.len());
            let res = pipeline(&cfg.sim, grid, dom, &opts)?;
            let (Some(zs), Some(zl), Some(ch)) = (&res.z_source, &res.z_load, res.decoupled()) else {
                return Err(Error::Usage("extraction produced no matrix model".into()));
            };
            MinorLoopSet::with_channels(zs, zl, &ch)
        }
    }
}

fn variants(set: &MinorLoopSet) -> [(&'static str, &Tf2x2); 3] {
    [("exact", &set.exact), ("semidec", &set.semidec), ("dec", &set.dec)]
}

fn cmd_stability(cli: &Cli, argv: &[String], source: ModelSource, eps_threshold: f64) -> Result<Outcome> {
    if !(eps_threshold > 0.0) {
        return Err(Error::Usage("--eps-threshold must be positive".into()));
    }
    let cfg = load(cli)?;
    let f1 = cfg.params().f_n;
    let grid = cli.grid.build(f1)?;
    let mut out = Out::new(&cli.out)?;
    let mut rows = Vec::new();
    let mut eps_fig = Panel::new("decoupling norm", "f (Hz)", "|eps|").log_x().log_y();
    let mut eps_summary = serde_json::Map::new();
    for dom in cli.domain.domains() {
        let d = dom.name();
        let set = loop_sets(&cfg, &grid, dom, source)?;
        let hz = set.exact.grid().hz();
        let mut loci_panels = [
            Panel::new("|lambda_1|", "f (Hz)", "magnitude").log_x().log_y(),
            Panel::new("|lambda_2|", "f (Hz)", "magnitude").log_x().log_y(),
        ];
        let mut nyq = Figure::new(format!("eigenvalue loci, {d} domain"), 3);
        for (name, l) in variants(&set) {
            out.tf(&format!("l_{name}_{d}.csv"), l)?;
            let loci = eig_loci_closed_form(l)?;
            out.write(&format!("loci_{name}_{d}.csv"), |w| loci.write_csv(w))?;
            for (panel, branch) in loci_panels.iter_mut().zip([&loci.l1, &loci.l2]) {
                panel
                    .series
                    .push(Series::line(name, hz.clone(), branch.iter().map(|z| z.norm()).collect()));
            }
            nyq.panels.push(nyquist_panel(name, &[("lambda_1", &loci.l1), ("lambda_2", &loci.l2)]));
        }
        let [p1, p2] = loci_panels;
        out.figure(
            &format!("loci_{d}"),
            &Figure::new(format!("eigenvalue magnitudes, {d} domain"), 2).with(p1).with(p2),
        )?;
        out.figure(&format!("nyquist_{d}"), &nyq)?;

        let eps = epsilon_norm(&set.exact, eps_threshold)?;
        out.write(&format!("eps_{d}.csv"), |w| eps.write_csv(w))?;
        eps_fig.series.push(Series::line(format!("eps_{d}"), hz.clone(), eps.abs()));
        eps_summary.insert(
            d.to_string(),
            json!({ "max_abs": eps.max_abs(), "violations_hz": eps.violations }),
        );

        // Verdicts need the whole contour; analytic models are re-evaluated on a
        // wide dense grid, extracted ones only cover the sampled band.
        let (vset, contour) = match source {
            ModelSource::Analytic => {
                let spec: GridSpec = VERDICT_GRID.parse().map_err(Error::Usage)?;
                (loop_sets(&cfg, &spec.build(f1)?, dom, source)?, VERDICT_GRID.to_string())
            }
            ModelSource::Extracted => (set.clone(), format!("{} (sampled band only)", cli.grid)),
        };
        for (name, l) in variants(&vset) {
            let loci: EigenLoci = eig_loci_closed_form(l)?;
            rows.push(VerdictRow {
                domain: d,
                variant: name,
                verdict: nyquist_verdict(&loci, NyquistOptions::default()),
                det_encirclements: (name == "exact").then(|| det_winding(l, Closure::ConjugateSymmetric)),
                contour: contour.clone(),
            });
        }
    }
    let eps_fig = eps_fig.hline("threshold", eps_threshold);
    out.figure("eps", &Figure::new("decoupling norm of the exact minor loop", 1).with(eps_fig))?;
    out.write("verdicts.csv", |w| {
        writeln!(w, "domain,variant,enc_1,enc_2,total,min_distance,verdict,det_encirclements")?;
        for r in &rows {
            let v = &r.verdict;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.domain,
                r.variant,
                v.encirclements[0],
                v.encirclements[1],
                v.total,
                crate::freqresp::fmt_num(v.min_distance),
                v.label(),
                r.det_encirclements.map_or(String::new(), |n| n.to_string())
            )?;
        }
        Ok(())
    })?;
    let marginal = rows.iter().any(|r| r.variant == "exact" && r.verdict.marginal);
    for r in rows.iter().filter(|r| r.variant == "exact") {
        eprintln!(
            "{} exact minor loop: {} (encirclements {}, closest approach to -1: {:.4})",
            r.domain,
            r.verdict.label(),
            r.verdict.total,
            r.verdict.min_distance
        );
    }
    let details = json!({
        "case": cfg.sim.case.name(),
        "models": format!("{source:?}").to_lowercase(),
        "eps_threshold": eps_threshold,
        "eps": eps_summary,
        "verdicts": rows,
    });
    out.finish(cli, argv, Some(&cfg), details)?;
    Ok(Outcome { marginal })
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

struct Diff {
    name: String,
    hz: Vec<f64>,
    columns: Vec<(&'static str, Vec<f64>)>,
}

fn diff_tables(a: &Path, b: &Path, file: &str, pairs: &[(&'static str, &str, &str)]) -> Result<Option<Diff>> {
    let (pa, pb) = (a.join(file), b.join(file));
    if !(pa.exists() && pb.exists()) {
        return Ok(None);
    }
    let ta = read_numeric_csv(BufReader::new(File::open(&pa)?), &pa)?;
    let tb = read_numeric_csv(BufReader::new(File::open(&pb)?), &pb)?;
    let hz = ta.column("f_hz")?;
    let hz_b = tb.column("f_hz")?;
    if hz.len() != hz_b.len() || hz.iter().zip(&hz_b).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
        return Err(Error::GridMismatch);
    }
    let mut columns = Vec::new();
    for &(name, re, im) in pairs {
        let (ra, ia, rb, ib) = (ta.column(re)?, ta.column(im)?, tb.column(re)?, tb.column(im)?);
        let d = (0..hz.len())
            .map(|k| relative(Complex64::new(ra[k], ia[k]), Complex64::new(rb[k], ib[k])))
            .collect();
        columns.push((name, d));
    }
    Ok(Some(Diff {
        name: file.trim_end_matches(".csv").to_string(),
        hz,
        columns,
    }))
}

fn cmd_compare(cli: &Cli, argv: &[String], a: &Path, b: &Path) -> Result<Outcome> {
    let ma = RunManifest::read(a)?;
    let mb = RunManifest::read(b)?;
    if ma.grid != mb.grid {
        return Err(Error::GridMismatch);
    }
    let mut diffs = Vec::new();
    for d in ["dq", "pn"] {
        for variant in ["exact", "semidec", "dec"] {
            let pairs = [("rel_l1", "re_l1", "im_l1"), ("rel_l2", "re_l2", "im_l2")];
            diffs.extend(diff_tables(a, b, &format!("loci_{variant}_{d}.csv"), &pairs)?);
        }
        diffs.extend(diff_tables(a, b, &format!("eps_{d}.csv"), &[("rel_eps", "re_eps", "im_eps")])?);
    }
    if diffs.is_empty() {
        return Err(Error::Usage(format!(
            "{} and {} hold no common loci or eps tables; run `stability` on both first",
            a.display(),
            b.display()
        )));
    }
    let mut out = Out::new(&cli.out)?;
    let mut summary = Vec::new();
    for diff in &diffs {
        out.write(&format!("diff_{}.csv", diff.name), |w| {
            write!(w, "f_hz")?;
            for (name, _) in &diff.columns {
                write!(w, ",{name}")?;
            }
            writeln!(w)?;
            for (k, f) in diff.hz.iter().enumerate() {
                write!(w, "{}", crate::freqresp::fmt_num(*f))?;
                for (_, col) in &diff.columns {
                    write!(w, ",{}", crate::freqresp::fmt_num(col[k]))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        for (name, col) in &diff.columns {
            let max = col.iter().copied().fold(0.0, f64::max);
            let mean = col.iter().sum::<f64>() / col.len().max(1) as f64;
            summary.push((format!("{}.{name}", diff.name), max, mean));
        }
    }
    out.write("summary.csv", |w| {
        writeln!(w, "quantity,max_rel_diff,mean_rel_diff")?;
        for (q, max, mean) in &summary {
            writeln!(w, "{q},{},{}", crate::freqresp::fmt_num(*max), crate::freqresp::fmt_num(*mean))?;
        }
        Ok(())
    })?;
    println!("{:<28} {:>14} {:>14}", "quantity", "max rel diff", "mean rel diff");
    for (q, max, mean) in &summary {
        println!("{q:<28} {max:>14.3e} {mean:>14.3e}");
    }
    let details = json!({ "a": a.display().to_string(), "b": b.display().to_string() });
    out.finish(cli, argv, None, details)?;
    Ok(Outcome::default())
}
