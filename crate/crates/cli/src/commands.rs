//! Handlers for the identity, message-store, and exchange subcommands.

use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rand::rngs::OsRng;
use sotto_core::exchange::{establish_channel, run_exchange, EncounterBudget, Role};
use sotto_core::identity::{generate_identity, qr_payload, FriendStore, QrPayload, FRIEND_CAP_DEFAULT};
use sotto_core::store::{MessageStore, STORE_CAPACITY_DEFAULT};
use sotto_core::trust::TrustParams;

use crate::config::RunConfig;
use crate::net::TcpByteStream;
use crate::output::write_atomic;

pub fn now_epoch_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_identity(path: &Path, cap: usize) -> Result<FriendStore> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading identity {}", path.display()))?;
    FriendStore::decode(&bytes, cap).map_err(|e| anyhow::anyhow!("{e}"))
}

fn save_identity(path: &Path, store: &FriendStore) -> Result<()> {
    write_atomic(path, &store.encode())
}

fn load_or_new_store(path: &Path, params: TrustParams, now: u64) -> Result<MessageStore> {
    if path.exists() {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading store {}", path.display()))?;
        MessageStore::decode(&bytes, STORE_CAPACITY_DEFAULT, params, now)
            .map_err(|e| anyhow::anyhow!("{e}"))
    } else {
        Ok(MessageStore::new(STORE_CAPACITY_DEFAULT, params))
    }
}

pub fn identity_new(path: &Path, cap: Option<usize>, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists (use --force to overwrite)", path.display());
    }
    let id = generate_identity(&mut OsRng)?;
    let store = FriendStore::new(id, cap.unwrap_or(FRIEND_CAP_DEFAULT));
    save_identity(path, &store)?;
    println!("created {}", path.display());
    println!("{}", qr_payload(store.own_id()).to_hex());
    Ok(())
}

pub fn identity_show(path: &Path) -> Result<()> {
    let store = load_identity(path, usize::MAX)?;
    println!("{}", qr_payload(store.own_id()).to_hex());
    println!("friends {}", store.len());
    Ok(())
}

pub fn identity_befriend(
    path: &Path,
    payload_hex: &str,
    now: Option<u64>,
    cap: Option<usize>,
) -> Result<()> {
    // The cap is policy, not file data: apply the default (or the flag) on
    // every mutation.
    let mut store = load_identity(path, cap.unwrap_or(FRIEND_CAP_DEFAULT))?;
    let payload = QrPayload::from_hex(payload_hex)?;
    store.add_friend(&payload, now.unwrap_or_else(now_epoch_s))?;
    save_identity(path, &store)?;
    println!("friends {}", store.len());
    Ok(())
}

pub fn msg_author(store_path: &Path, body: &str, now: Option<u64>) -> Result<()> {
    let now = now.unwrap_or_else(now_epoch_s);
    let mut store = load_or_new_store(store_path, TrustParams::default(), now)?;
    store.author(body, now)?;
    write_atomic(store_path, &store.encode(now))?;
    println!("messages {}", store.len());
    Ok(())
}

pub fn msg_list(store_path: &Path, limit: usize, min_priority: Option<f64>) -> Result<()> {
    let now = now_epoch_s();
    let store = load_or_new_store(store_path, TrustParams::default(), now)?;
    for msg in store.ordered_view(limit, now) {
        let priority = msg.priority_at(now, store.params()).value();
        if let Some(floor) = min_priority {
            if priority < floor {
                continue;
            }
        }
        println!("{priority:.4}  {}", msg.body());
    }
    Ok(())
}

pub struct ExchangeArgs {
    pub addr: String,
    pub identity: PathBuf,
    pub store: PathBuf,
    pub config: Option<PathBuf>,
    pub now: Option<u64>,
}

/// Runs one full exchange over TCP. The store file is rewritten only after
/// the session commits; any failure leaves it byte-identical.
pub fn exchange(role: Role, args: &ExchangeArgs) -> Result<()> {
    let (trust, budget, max_inputs, include_prob) = match &args.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            (
                cfg.trust.to_params()?,
                cfg.exchange.to_budget(),
                cfg.sim.psi_max_inputs,
                cfg.sim.psi_include_prob,
            )
        }
        None => (
            TrustParams::default(),
            EncounterBudget::default(),
            sotto_core::psi::PSI_INPUT_CAP,
            1.0,
        ),
    };
    let now = args.now.unwrap_or_else(now_epoch_s);
    let identity = load_identity(&args.identity, usize::MAX)?;
    let mut store = load_or_new_store(&args.store, trust, now)?;

    let tcp = match role {
        Role::Responder => {
            let listener = TcpListener::bind(&args.addr)
                .with_context(|| format!("binding {}", args.addr))?;
            println!("listening on {}", listener.local_addr()?);
            // Callers scripting two processes need the address before accept
            // blocks.
            std::io::Write::flush(&mut std::io::stdout()).ok();
            let (stream, peer) = listener.accept().context("accepting connection")?;
            println!("peer {peer}");
            stream
        }
        Role::Initiator => {
            TcpStream::connect(&args.addr).with_context(|| format!("connecting {}", args.addr))?
        }
    };
    let stream = TcpByteStream::new(tcp)?;

    let inputs = identity.select_psi_inputs(max_inputs, include_prob, &mut OsRng);
    let mut session = establish_channel(stream, role, &mut OsRng)?;
    let outcome = run_exchange(
        &mut session,
        &inputs,
        &mut store,
        &trust,
        &budget,
        now,
        &mut OsRng,
    )?;

    write_atomic(&args.store, &store.encode(now))?;
    println!("cardinality {}", outcome.peer_cardinality);
    println!("submitted {}", outcome.own_submitted);
    println!(
        "received {} committed {} sent {}",
        outcome.messages_received, outcome.messages_committed, outcome.messages_sent
    );
    println!(
        "bytes sent {} received {}",
        outcome.bytes_sent, outcome.bytes_received
    );
    Ok(())
}
