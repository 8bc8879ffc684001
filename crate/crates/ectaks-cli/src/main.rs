//! Command-line runner for the key-establishment toolkit: curve discovery,
//! CA provisioning, handshakes and sealed messaging over files, lifecycle
//! operations, and the attack experiments.
//!
//! Exit codes: 0 success, 2 validation error, 3 protocol reject,
//! 4 infeasible or conflicting request.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ectaks::algebra::find_toy_curves;
use ectaks::attacklab;
use ectaks::authority::CaState;
use ectaks::error::Error;
use ectaks::files;
use ectaks::session;
use ectaks::topology::NodeId;

const EXIT_VALIDATION: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "ectaks", version, about = "Topology-authenticated key establishment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curve utilities.
    #[command(subcommand)]
    Curve(CurveCommand),
    /// Provision a whole topology and write LCDs, directory, and CA state.
    Provision(ProvisionArgs),
    /// Check key agreement between two LCDs, or sweep a whole state.
    Handshake(HandshakeArgs),
    /// Seal a message for a peer into a wire-format file.
    Seal(SealArgs),
    /// Open a sealed wire-format file.
    Open(OpenArgs),
    /// Issue a replacement LCD for a node (same parameters, bumped counter).
    Replace(ReplaceArgs),
    /// Admit a new node connected to existing neighbors.
    Admit(AdmitArgs),
    /// Cluster management.
    #[command(subcommand)]
    Cluster(ClusterCommand),
    /// Attack experiments.
    #[command(subcommand)]
    Attack(AttackCommand),
}

#[derive(Subcommand)]
enum CurveCommand {
    /// Exhaustively search toy curves with prime-order subgroups.
    Search(CurveSearchArgs),
}

#[derive(Args)]
struct CurveSearchArgs {
    /// Largest coordinate prime to scan.
    #[arg(long = "max-q")]
    max_q: u64,
    /// Smallest subgroup order to keep.
    #[arg(long = "min-p", default_value_t = 3)]
    min_p: u64,
    /// Directory for the emitted curve files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProvisionArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory: lcd_<i>.json, public_directory.json, ca_state.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HandshakeArgs {
    /// Initiator LCD (single-pair mode).
    #[arg(long, requires = "peer_lcd", conflicts_with = "state")]
    lcd: Option<PathBuf>,
    /// Responder LCD (single-pair mode).
    #[arg(long = "peer-lcd")]
    peer_lcd: Option<PathBuf>,
    /// Curve parameters (single-pair mode).
    #[arg(long, requires = "lcd")]
    curve: Option<PathBuf>,
    /// CA state file (sweep mode, with --all).
    #[arg(long)]
    state: Option<PathBuf>,
    /// Sweep every arrow of the state's topology.
    #[arg(long, requires = "state")]
    all: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SealArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    lcd: PathBuf,
    /// Recipient node id; must be an outbound neighbor of the LCD.
    #[arg(long)]
    peer: NodeId,
    /// Read the plaintext from this file.
    #[arg(long = "in", conflicts_with = "text")]
    input: Option<PathBuf>,
    /// Or take the plaintext from the command line.
    #[arg(long)]
    text: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OpenArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    lcd: PathBuf,
    /// Wire-format message file to open.
    #[arg(long)]
    message: PathBuf,
    /// Where to write the recovered plaintext; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplaceArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    node: NodeId,
    /// File for the replacement device's LCD.
    #[arg(long = "out-lcd")]
    out_lcd: PathBuf,
}

#[derive(Args)]
struct AdmitArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    node: NodeId,
    /// Comma-separated list of provisioned neighbor ids.
    #[arg(long, value_delimiter = ',')]
    neighbors: Vec<NodeId>,
    #[arg(long)]
    seed: Option<u64>,
    /// File for the new node's LCD.
    #[arg(long = "out-lcd")]
    out_lcd: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ClusterCommand {
    /// Form (or extend) a point-to-multipoint cluster under a master node.
    Form(ClusterFormArgs),
}

#[derive(Args)]
struct ClusterFormArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    master: NodeId,
    #[arg(long, value_delimiter = ',')]
    members: Vec<NodeId>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory to (re)write the member LCD files into.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Recover a target's secret from compromised neighbors.
    Recover(AttackRecoverArgs),
    /// Monte Carlo estimate of the attack success probability.
    EstimateSp(EstimateSpArgs),
}

#[derive(Args)]
struct AttackRecoverArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    target: NodeId,
    #[arg(long, value_delimiter = ',')]
    compromised: Vec<NodeId>,
    /// Discrete-log oracle to use; only the guarded exhaustive search exists.
    #[arg(long, default_value = "bruteforce")]
    oracle: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateSpArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file (JSON).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliFailure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct CliFailure {
    code: u8,
    message: String,
}

impl CliFailure {
    fn protocol(message: impl Into<String>) -> Self {
        CliFailure {
            code: EXIT_PROTOCOL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliFailure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::BadTag | Error::InvalidShare => EXIT_PROTOCOL,
            Error::InfeasibleConstraint { .. }
            | Error::ZeroSessionKey(..)
            | Error::ClusterConflict(..)
            | Error::ClusterNotFormed
            | Error::OracleRefused { .. }
            | Error::NotInSubgroup => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        CliFailure {
            code,
            message: err.to_string(),
        }
    }
}

/// Flag beats the `ECTAKS_SEED` environment variable beats fresh entropy;
/// an entropy seed is printed so the run can be reproduced.
fn resolve_seed(flag: Option<u64>) -> u64 {
    if let Some(seed) = flag {
        return seed;
    }
    if let Ok(var) = std::env::var("ECTAKS_SEED") {
        if let Ok(seed) = var.parse() {
            return seed;
        }
    }
    let seed = rand::random();
    println!("seed {seed} (generated; pass --seed to reproduce)");
    seed
}

fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Curve(CurveCommand::Search(args)) => curve_search(args),
        Command::Provision(args) => provision(args),
        Command::Handshake(args) => handshake(args),
        Command::Seal(args) => seal(args),
        Command::Open(args) => open(args),
        Command::Replace(args) => replace(args),
        Command::Admit(args) => admit(args),
        Command::Cluster(ClusterCommand::Form(args)) => cluster_form(args),
        Command::Attack(AttackCommand::Recover(args)) => attack_recover(args),
        Command::Attack(AttackCommand::EstimateSp(args)) => estimate_sp(args),
    }
}

fn curve_search(args: CurveSearchArgs) -> Result<(), CliFailure> {
    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    let curves = find_toy_curves(args.max_q, args.min_p)?;
    for params in &curves {
        let name = format!("curve_q{}_p{}.json", params.q(), params.subgroup_order());
        files::save_curve(&args.out.join(name), params)?;
    }
    println!(
        "found {} curve(s) with prime subgroup order >= {} for q <= {}",
        curves.len(),
        args.min_p,
        args.max_q
    );
    Ok(())
}

fn lcd_path(dir: &Path, node: NodeId) -> PathBuf {
    dir.join(format!("lcd_{node}.json"))
}

fn write_state_outputs(state: &CaState, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    for (&node, lcd) in state.lcds() {
        files::save_lcd(&lcd_path(dir, node), lcd)?;
    }
    files::write_json(
        &dir.join("public_directory.json"),
        &files::directory_to_file(&state.export_public_directory()),
    )?;
    files::save_ca_state(&dir.join("ca_state.json"), state)?;
    Ok(())
}

fn provision(args: ProvisionArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let curve = files::load_curve(&args.curve)?;
    let (topology, roots) = files::load_topology(&args.topology)?;
    let state = CaState::provision(topology, curve, roots.as_deref(), seed)?;
    write_state_outputs(&state, &args.out)?;
    println!(
        "provisioned {} node(s), {} arrow(s); field/node ratio p/N = {:.2}",
        state.lcds().len(),
        state.topology().arrow_count(),
        state.field_to_node_ratio()
    );
    Ok(())
}

fn handshake(args: HandshakeArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let mut rng = rng_from(seed);
    if let Some(state_path) = &args.state {
        if !args.all {
            return Err(CliFailure {
                code: EXIT_VALIDATION,
                message: "--state requires --all (sweep mode)".into(),
            });
        }
        let state = files::load_ca_state(state_path)?;
        let curve = state.curve();
        let mut checked = 0u32;
        for (i, j) in state.topology().arrows() {
            let lcd_i = state.export_lcd(i)?;
            let lcd_j = state.export_lcd(j)?;
            let (share, initiator) = session::initiate(curve, lcd_i, j, &mut rng)?;
            let responder = session::respond(curve, lcd_j, &share)?;
            if initiator != responder {
                println!("arrow ({i}, {j}): reject");
                return Err(CliFailure::protocol(format!(
                    "key disagreement on arrow ({i}, {j})"
                )));
            }
            checked += 1;
        }
        println!("agree on all {checked} arrow(s)");
        return Ok(());
    }
    let (Some(curve_path), Some(lcd_path), Some(peer_path)) =
        (&args.curve, &args.lcd, &args.peer_lcd)
    else {
        return Err(CliFailure {
            code: EXIT_VALIDATION,
            message: "either --state --all or --curve --lcd --peer-lcd is required".into(),
        });
    };
    let curve = files::load_curve(curve_path)?;
    let lcd = files::load_lcd(lcd_path, &curve)?;
    let peer = files::load_lcd(peer_path, &curve)?;
    let (share, initiator) = session::initiate(&curve, &lcd, peer.node, &mut rng)?;
    let responder = session::respond(&curve, &peer, &share)?;
    if initiator == responder {
        println!("agree");
        Ok(())
    } else {
        println!("reject");
        Err(CliFailure::protocol(format!(
            "nodes {} and {} derived different keys",
            lcd.node, peer.node
        )))
    }
}

fn seal(args: SealArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let curve = files::load_curve(&args.curve)?;
    let lcd = files::load_lcd(&args.lcd, &curve)?;
    let message = match (&args.input, &args.text) {
        (Some(path), None) => std::fs::read(path).map_err(Error::from)?,
        (None, Some(text)) => text.clone().into_bytes(),
        _ => {
            return Err(CliFailure {
                code: EXIT_VALIDATION,
                message: "exactly one of --in or --text is required".into(),
            })
        }
    };
    let wire = session::seal(&curve, &lcd, args.peer, &message, &mut rng_from(seed))?;
    std::fs::write(&args.out, wire.to_bytes(&curve)).map_err(Error::from)?;
    println!(
        "sealed {} byte(s) from node {} to node {}",
        message.len(),
        lcd.node,
        args.peer
    );
    Ok(())
}

fn open(args: OpenArgs) -> Result<(), CliFailure> {
    let curve = files::load_curve(&args.curve)?;
    let lcd = files::load_lcd(&args.lcd, &curve)?;
    let bytes = std::fs::read(&args.message).map_err(Error::from)?;
    // Anything wrong with the message itself is a protocol reject, whether
    // it fails to parse or fails the tag.
    let plaintext = session::WireMessage::from_bytes(&curve, &bytes)
        .and_then(|wire| session::open(&curve, &lcd, &wire))
        .map_err(|err| CliFailure::protocol(format!("reject: {err}")))?;
    match &args.out {
        Some(path) => std::fs::write(path, &plaintext).map_err(Error::from)?,
        None => println!("{}", String::from_utf8_lossy(&plaintext)),
    }
    println!("accept: {} byte(s)", plaintext.len());
    Ok(())
}

fn replace(args: ReplaceArgs) -> Result<(), CliFailure> {
    let mut state = files::load_ca_state(&args.state)?;
    let lcd = state.replace_node(args.node)?;
    files::save_lcd(&args.out_lcd, &lcd)?;
    files::save_ca_state(&args.state, &state)?;
    println!(
        "issued replacement LCD for node {} (replacement #{})",
        args.node,
        state.replacement_count(args.node)
    );
    Ok(())
}

fn admit(args: AdmitArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let mut state = files::load_ca_state(&args.state)?;
    state.admit_node(args.node, &args.neighbors, &mut rng_from(seed))?;
    if let Some(path) = &args.out_lcd {
        files::save_lcd(path, state.export_lcd(args.node)?)?;
    }
    files::save_ca_state(&args.state, &state)?;
    println!(
        "admitted node {} with {} neighbor(s)",
        args.node,
        args.neighbors.len()
    );
    Ok(())
}

fn cluster_form(args: ClusterFormArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let mut state = files::load_ca_state(&args.state)?;
    state.form_cluster(args.master, &args.members, &mut rng_from(seed))?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        for &member in &args.members {
            files::save_lcd(&lcd_path(dir, member), state.export_lcd(member)?)?;
        }
        files::save_lcd(&lcd_path(dir, args.master), state.export_lcd(args.master)?)?;
    }
    files::save_ca_state(&args.state, &state)?;
    let cluster = &state.clusters()[&args.master];
    println!(
        "cluster of node {} now has {} member(s)",
        args.master,
        cluster.members.len()
    );
    Ok(())
}

fn attack_recover(args: AttackRecoverArgs) -> Result<(), CliFailure> {
    if args.oracle != "bruteforce" {
        return Err(CliFailure {
            code: EXIT_VALIDATION,
            message: format!(
                "unknown oracle {:?}; only \"bruteforce\" is implemented",
                args.oracle
            ),
        });
    }
    let seed = resolve_seed(args.seed);
    let state = files::load_ca_state(&args.state)?;
    let (_, report) =
        attacklab::recover_secret(&state, args.target, &args.compromised, &mut rng_from(seed))?;
    files::write_json(&args.out, &report)?;
    println!(
        "attack on node {}: {} (rank {}, {} candidate(s))",
        args.target, report.outcome, report.rank, report.solution_count
    );
    Ok(())
}

/// JSON report for `attack estimate-sp`; at p <= 3 the exact census runs too
/// and the Monte Carlo estimate is cross-checked against it.
#[derive(serde::Serialize)]
struct EstimateSpReport {
    monte_carlo: attacklab::SpEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_census: Option<attacklab::ExactCensus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    census_within_3_sigma: Option<bool>,
}

fn estimate_sp(args: EstimateSpArgs) -> Result<(), CliFailure> {
    let seed = resolve_seed(args.seed);
    let monte_carlo = attacklab::estimate_sp(args.p, args.trials, seed)?;
    let exact_census = if args.p <= 3 {
        Some(attacklab::exact_sp_small(args.p)?)
    } else {
        None
    };
    let census_within_3_sigma = exact_census.as_ref().map(|census| {
        let sigma = (census.operational_fraction * (1.0 - census.operational_fraction)
            / monte_carlo.trials as f64)
            .sqrt();
        (monte_carlo.estimate - census.operational_fraction).abs() <= 3.0 * sigma
    });
    println!(
        "S_p estimate at p = {}: {:.4} (99% CI [{:.4}, {:.4}])",
        monte_carlo.p, monte_carlo.estimate, monte_carlo.ci99_low, monte_carlo.ci99_high
    );
    if let Some(census) = &exact_census {
        println!(
            "exact operational fraction {:.4}; Monte Carlo within 3 sigma: {}",
            census.operational_fraction,
            census_within_3_sigma.unwrap()
        );
    }
    let report = EstimateSpReport {
        monte_carlo,
        exact_census,
        census_within_3_sigma,
    };
    files::write_json(&args.out, &report)?;
    Ok(())
}
