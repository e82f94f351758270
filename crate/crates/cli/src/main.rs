//! `sotto`: command-line driver for the anonymous mesh messaging toolkit.
//!
//! Subcommands wrap the core library: identity management, one-shot TCP
//! peer exchanges, message-store manipulation, discrete-event simulations,
//! and the analytics suite. Every randomized run takes an explicit seed via
//! its config file, so file outputs are bit-reproducible.

mod commands;
mod config;
mod experiments;
mod net;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use sotto_core::exchange::Role;

#[derive(Parser)]
#[command(name = "sotto", version, about = "Anonymous mesh messaging toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the local identity and friend store
    Identity {
        #[command(subcommand)]
        action: IdentityAction,
    },
    /// Run one peer exchange over TCP
    Exchange {
        #[command(subcommand)]
        action: ExchangeAction,
    },
    /// Author or list messages in a store file
    Msg {
        #[command(subcommand)]
        action: MsgAction,
    },
    /// Run a simulation described by a config file
    Sim(SimArgs),
    /// Run an analytics computation described by a config file
    Analyze {
        #[command(subcommand)]
        action: AnalyzeAction,
    },
}

#[derive(Subcommand)]
enum IdentityAction {
    /// Generate a fresh identity file
    New {
        #[arg(long)]
        identity: PathBuf,
        /// Friend-store cap (default 40)
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Print the scannable payload (hex) for this identity
    Show {
        #[arg(long)]
        identity: PathBuf,
    },
    /// Record a scanned payload as a friend
    Befriend {
        #[arg(long)]
        identity: PathBuf,
        /// 66 hex characters: version byte then the 32-byte digest
        #[arg(long)]
        payload: String,
        /// Timestamp override (epoch seconds); defaults to now
        #[arg(long)]
        now: Option<u64>,
        /// Friend-store cap to enforce (default 40)
        #[arg(long)]
        cap: Option<usize>,
    },
}

#[derive(Args)]
struct ExchangeCommon {
    /// host:port to listen on / connect to
    #[arg(long)]
    addr: String,
    #[arg(long)]
    identity: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Optional run config for trust/budget parameters
    #[arg(long)]
    config: Option<PathBuf>,
    /// Timestamp override (epoch seconds); defaults to now
    #[arg(long)]
    now: Option<u64>,
}

#[derive(Subcommand)]
enum ExchangeAction {
    /// Wait for one inbound exchange
    Listen(ExchangeCommon),
    /// Connect out and run one exchange
    Connect(ExchangeCommon),
}

#[derive(Subcommand)]
enum MsgAction {
    /// Author a message at priority 1
    Author {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        body: String,
        #[arg(long)]
        now: Option<u64>,
    },
    /// List messages by decayed priority
    List {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 50)]
        limit: usize,
        /// Hide messages below this priority
        #[arg(long)]
        min_priority: Option<f64>,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Run config (TOML)
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the simulated horizon in seconds
    #[arg(long)]
    horizon_s: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run config (TOML)
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeAction {
    /// Anonymity-set curve from the priority recursion
    Anonymity(AnalyzeArgs),
    /// Static graph leakage d_epsilon
    LeakageStatic(AnalyzeArgs),
    /// Dynamic graph leakage: mean field and stochastic simulation
    LeakageDynamic(AnalyzeArgs),
    /// Physical jamming radius from path-loss parameters
    JamRadius {
        /// Optional run config carrying a [jam_radius] section
        config: Option<PathBuf>,
        /// Override the legitimate link distance in meters
        #[arg(long)]
        link_distance_m: Option<f64>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Identity { action } => match action {
            IdentityAction::New { identity, cap, force } => {
                commands::identity_new(&identity, cap, force)
            }
            IdentityAction::Show { identity } => commands::identity_show(&identity),
            IdentityAction::Befriend {
                identity,
                payload,
                now,
                cap,
            } => commands::identity_befriend(&identity, &payload, now, cap),
        },
        Command::Exchange { action } => {
            let (role, common) = match action {
                ExchangeAction::Listen(c) => (Role::Responder, c),
                ExchangeAction::Connect(c) => (Role::Initiator, c),
            };
            commands::exchange(
                role,
                &commands::ExchangeArgs {
                    addr: common.addr,
                    identity: common.identity,
                    store: common.store,
                    config: common.config,
                    now: common.now,
                },
            )
        }
        Command::Msg { action } => match action {
            MsgAction::Author { store, body, now } => commands::msg_author(&store, &body, now),
            MsgAction::List {
                store,
                limit,
                min_priority,
            } => commands::msg_list(&store, limit, min_priority),
        },
        Command::Sim(args) => experiments::cmd_sim(
            &args.config,
            &experiments::Overrides {
                seed: args.seed,
                out_dir: args.out_dir,
                horizon_s: args.horizon_s,
            },
        ),
        Command::Analyze { action } => match action {
            AnalyzeAction::Anonymity(a) => experiments::cmd_analyze_anonymity(
                &a.config,
                &experiments::Overrides {
                    seed: a.seed,
                    out_dir: a.out_dir,
                    horizon_s: None,
                },
            ),
            AnalyzeAction::LeakageStatic(a) => experiments::cmd_analyze_leakage_static(
                &a.config,
                &experiments::Overrides {
                    seed: a.seed,
                    out_dir: a.out_dir,
                    horizon_s: None,
                },
            ),
            AnalyzeAction::LeakageDynamic(a) => experiments::cmd_analyze_leakage_dynamic(
                &a.config,
                &experiments::Overrides {
                    seed: a.seed,
                    out_dir: a.out_dir,
                    horizon_s: None,
                },
            ),
            AnalyzeAction::JamRadius {
                config,
                link_distance_m,
            } => experiments::cmd_analyze_jam_radius(config.as_deref(), link_distance_m),
        },
    }
}
