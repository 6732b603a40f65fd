//! End-to-end sessions: a trusted server, `K` user nodes and an in-memory
//! broadcast channel.
//!
//! The server is the only party holding the placement record and the demand
//! vector. Each user node holds its cache, its own demand and whatever the
//! channel has delivered to it. Users speak in the fixed order `1..=K`; while
//! one user broadcasts the others only listen.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::analysis::{load_coded, load_uncoded, SchemeTag};
use crate::bits::Bits;
use crate::baselines::{uncoded_deliver, uncoded_place, wc_sl_deliver, wc_sl_place, UncodedPlan};
use crate::combinatorics::{derive_stream, Purpose, StreamLabel};
use crate::decoding::{gf2_decode, peel_decode, recover_file, ReceiverView};
use crate::delivery::{
    build_queries, derive_draws, encode_signal, DeliveryOptions, DemandVector, Query, Signal,
    TransmissionDraws,
};
use crate::error::{Error, Result};
use crate::placement::{build_caches, build_placement, CacheState, Library, PlacementRecord, SchemeParams};
use crate::transcript::{serialize_rational, write_transcript};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Coded,
    Uncoded,
    SharedLinkRef,
}

impl SchemeKind {
    pub fn tag(self) -> SchemeTag {
        match self {
            SchemeKind::Coded => SchemeTag::Coded,
            SchemeKind::Uncoded => SchemeTag::Uncoded,
            SchemeKind::SharedLinkRef => SchemeTag::SharedLinkRef,
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coded" => Ok(SchemeKind::Coded),
            "uncoded" => Ok(SchemeKind::Uncoded),
            "shared-link-ref" => Ok(SchemeKind::SharedLinkRef),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme {other:?} (expected coded, uncoded or shared-link-ref)"
            ))),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag().as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemandMode {
    Explicit(Vec<usize>),
    /// every vector in `[N]^K`, lexicographically
    All,
    /// one vector drawn from the root seed
    Random,
}

impl FromStr for DemandMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(DemandMode::All),
            "random" => Ok(DemandMode::Random),
            list => list
                .split(',')
                .map(|x| {
                    x.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("bad demand entry {x:?} in {list:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(DemandMode::Explicit),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub scheme: SchemeKind,
    pub k: usize,
    pub n: usize,
    /// coded and shared-link schemes
    pub t: Option<usize>,
    /// uncoded scheme
    pub m: Option<Rational>,
    /// file size in bits; the smallest valid size when absent
    pub b: Option<usize>,
    pub seed: u64,
    pub demands: DemandMode,
    pub transcript: Option<PathBuf>,
}

impl SessionConfig {
    pub fn coded(k: usize, n: usize, t: usize, seed: u64, demands: DemandMode) -> Self {
        Self {
            scheme: SchemeKind::Coded,
            k,
            n,
            t: Some(t),
            m: None,
            b: None,
            seed,
            demands,
            transcript: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let (need_t, need_m) = match self.scheme {
            SchemeKind::Coded | SchemeKind::SharedLinkRef => (true, false),
            SchemeKind::Uncoded => (false, true),
        };
        if need_t != self.t.is_some() || need_m != self.m.is_some() {
            let want = if need_t { "t" } else { "M" };
            return Err(Error::InvalidArgument(format!(
                "the {} scheme takes exactly {want}",
                self.scheme
            )));
        }
        Ok(())
    }

    fn demand_vectors(&self) -> Result<Vec<DemandVector>> {
        match &self.demands {
            DemandMode::Explicit(d) => {
                if d.len() != self.k {
                    return Err(Error::InvalidArgument(format!(
                        "{} demands given for K = {}",
                        d.len(),
                        self.k
                    )));
                }
                Ok(vec![DemandVector::new(d.clone(), self.n)?])
            }
            DemandMode::All => Ok(DemandVector::all(self.k, self.n)),
            DemandMode::Random => {
                let mut s = derive_stream(self.seed, StreamLabel::new(Purpose::Demand, 0, 0));
                let files: Vec<usize> = (1..=self.n).collect();
                let d = (0..self.k)
                    .map(|_| *files.choose(&mut s).expect("N >= 1"))
                    .collect();
                Ok(vec![DemandVector::new(d, self.n)?])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserVerdict {
    pub user: usize,
    pub demand: usize,
    /// GF(2) elimination recovered the demanded file bit-exactly
    pub decoded: bool,
    /// peeling alone resolved every demanded piece
    pub peel_complete: bool,
    /// when peeling completed, its output equals the file
    pub peel_agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemandOutcome {
    pub demands: Vec<usize>,
    pub users: Vec<UserVerdict>,
    pub payload_bits: usize,
    #[serde(serialize_with = "serialize_rational")]
    pub measured_load: Rational,
    /// piece references carried in signal metadata; excluded from the load
    pub metadata_entries: usize,
}

impl DemandOutcome {
    pub fn passed(&self, formula: &Rational) -> bool {
        self.users.iter().all(|u| u.decoded && (!u.peel_complete || u.peel_agrees))
            && &self.measured_load == formula
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionReport {
    pub scheme: SchemeKind,
    pub k: usize,
    pub n: usize,
    pub t: Option<usize>,
    #[serde(serialize_with = "serialize_rational")]
    pub m: Rational,
    pub b: usize,
    pub seed: u64,
    #[serde(serialize_with = "serialize_rational")]
    pub formula_load: Rational,
    pub runs: Vec<DemandOutcome>,
    pub transcript: Option<PathBuf>,
    pub passed: bool,
}

/// Total payload bits over all signals divided by `B`. Metadata is not
/// counted.
pub fn measure_load(signals: &[Signal], b: usize) -> Rational {
    let bits: usize = signals.iter().map(Signal::payload_bits).sum();
    Rational::new(bits.into(), b.into())
}

/// The trusted server: knows the placement and, after step 1, the demands.
/// It never carries payload in the D2D schemes.
pub struct Server {
    params: SchemeParams,
    placement: PlacementRecord,
    draws: Vec<TransmissionDraws>,
}

impl Server {
    pub fn new(params: SchemeParams, placement: PlacementRecord, draws: Vec<TransmissionDraws>) -> Self {
        Self {
            params,
            placement,
            draws,
        }
    }

    /// Step 2: one query per user from the submitted demands.
    pub fn queries(&self, submitted: &[usize]) -> Result<Vec<Query>> {
        let d = DemandVector::for_params(submitted.to_vec(), &self.params)?;
        build_queries(&self.params, &self.placement, &d, &self.draws)
    }
}

/// A user device. It sees its own cache, its own demand, and the signals the
/// channel hands it.
#[derive(Debug)]
pub struct UserNode {
    user: usize,
    demand: usize,
    cache: CacheState,
    inbox: Vec<Signal>,
}

impl UserNode {
    pub fn new(cache: CacheState, demand: usize) -> Self {
        Self {
            user: cache.user,
            demand,
            cache,
            inbox: Vec::new(),
        }
    }

    pub fn user(&self) -> usize {
        self.user
    }

    /// Step 1: the index of the demanded file.
    pub fn submit_demand(&self) -> usize {
        self.demand
    }

    /// Step 3: encode `X_k` from the cache and the server's query.
    pub fn transmit(&mut self, query: &Query, piece_bits: usize) -> Result<Signal> {
        let signal = encode_signal(&self.cache, query, piece_bits)?;
        self.inbox.push(signal.clone());
        Ok(signal)
    }

    pub fn receive(&mut self, signal: Signal) {
        self.inbox.push(signal);
    }

    pub fn inbox(&self) -> &[Signal] {
        &self.inbox
    }

    /// Decodes the demanded file from cache and inbox, returning the
    /// recovered file together with the decoder verdicts.
    pub fn decode(&self, pieces_per_file: usize, piece_bits: usize) -> (Result<Bits>, bool, Option<Bits>) {
        let mut signals = self.inbox.clone();
        signals.sort_by_key(|s| s.sender);
        let view = ReceiverView {
            user: self.user,
            demand: self.demand,
            pieces_per_file,
            piece_bits,
            cache: &self.cache,
            signals: &signals,
        };
        let gf2 = gf2_decode(&view).and_then(|dec| recover_file(&view, &dec));
        let peel = peel_decode(&view);
        let peeled = if peel.complete {
            recover_file(&view, &peel.decoded).ok()
        } else {
            None
        };
        (gf2, peel.complete, peeled)
    }
}

/// Synchronous broadcast medium. Every signal goes to every node except its
/// sender; the log records each delivery as `(sender, receiver)`.
#[derive(Debug, Default)]
pub struct BroadcastChannel {
    log: Vec<(usize, usize)>,
    transmitted: Vec<Signal>,
}

impl BroadcastChannel {
    pub fn broadcast(&mut self, signal: Signal, nodes: &mut [UserNode]) {
        for node in nodes.iter_mut().filter(|n| n.user != signal.sender) {
            self.log.push((signal.sender, node.user));
            node.receive(signal.clone());
        }
        self.transmitted.push(signal);
    }

    pub fn deliveries(&self) -> &[(usize, usize)] {
        &self.log
    }

    pub fn transmitted(&self) -> &[Signal] {
        &self.transmitted
    }
}

/// Everything a single demand vector produced, kept for inspection.
#[derive(Debug)]
pub struct SessionTrace {
    pub demands: DemandVector,
    pub nodes: Vec<UserNode>,
    pub channel: BroadcastChannel,
    pub outcome: DemandOutcome,
}

fn verdicts(
    nodes: &[UserNode],
    library: &Library,
    pieces_per_file: usize,
    piece_bits: usize,
) -> Vec<UserVerdict> {
    nodes
        .iter()
        .map(|node| {
            let (gf2, peel_complete, peeled) = node.decode(pieces_per_file, piece_bits);
            let want = library.file(node.demand);
            UserVerdict {
                user: node.user,
                demand: node.demand,
                decoded: gf2.map(|f| f == want).unwrap_or(false),
                peel_complete,
                peel_agrees: peeled.map(|f| f == want).unwrap_or(false),
            }
        })
        .collect()
}

fn outcome(
    d: &DemandVector,
    nodes: &[UserNode],
    channel: &BroadcastChannel,
    library: &Library,
    b: usize,
    pieces_per_file: usize,
    piece_bits: usize,
) -> DemandOutcome {
    let signals = channel.transmitted();
    DemandOutcome {
        demands: d.as_slice().to_vec(),
        users: verdicts(nodes, library, pieces_per_file, piece_bits),
        payload_bits: signals.iter().map(Signal::payload_bits).sum(),
        measured_load: measure_load(signals, b),
        metadata_entries: signals
            .iter()
            .flat_map(|s| &s.messages)
            .map(|m| m.composition.len())
            .sum(),
    }
}

struct Prepared {
    m: Rational,
    b: usize,
    formula: Rational,
    library: Library,
    kind: Instance,
}

enum Instance {
    Coded {
        params: SchemeParams,
        placement: PlacementRecord,
        caches: Vec<CacheState>,
    },
    Uncoded {
        plan: UncodedPlan,
        caches: Vec<CacheState>,
    },
    SharedLink {
        inst: crate::baselines::SharedLinkInstance,
        caches: Vec<CacheState>,
    },
}

fn prepare(config: &SessionConfig) -> Result<Prepared> {
    config.validate()?;
    let (k, n) = (config.k, config.n);
    match config.scheme {
        SchemeKind::Coded => {
            let t = config.t.expect("validated");
            let params = match config.b {
                Some(b) => SchemeParams::new(k, n, t, b)?,
                None => SchemeParams::with_piece_bits(k, n, t, 1)?,
            };
            let library = Library::random(n, params.b, params.piece_bits, config.seed)
                .map_err(|e| e.in_phase("placement"))?;
            let placement = build_placement(&params, config.seed).map_err(|e| e.in_phase("placement"))?;
            let caches = build_caches(&params, &library, &placement).map_err(|e| e.in_phase("placement"))?;
            Ok(Prepared {
                m: params.memory(),
                b: params.b,
                formula: load_coded(k, n, t)?.r,
                library,
                kind: Instance::Coded {
                    params,
                    placement,
                    caches,
                },
            })
        }
        SchemeKind::Uncoded => {
            let m = config.m.clone().expect("validated");
            let b = match config.b {
                Some(b) => b,
                None => UncodedPlan::min_file_bits(k, n, &m)?,
            };
            let plan = UncodedPlan::new(k, n, m.clone(), b)?;
            let library = Library::random(n, b, plan.unit_bits, config.seed)?;
            let caches = uncoded_place(&plan, &library).map_err(|e| e.in_phase("placement"))?;
            Ok(Prepared {
                formula: load_uncoded(k, n, &m)?.r,
                m,
                b,
                library,
                kind: Instance::Uncoded { plan, caches },
            })
        }
        SchemeKind::SharedLinkRef => {
            let t = config.t.expect("validated");
            let pieces = crate::combinatorics::binom((n * k) as i64, t as i64)? as usize;
            let b = config.b.unwrap_or(pieces.max(1));
            if pieces == 0 || !b.is_multiple_of(pieces) {
                return Err(Error::InvalidParams(format!(
                    "file size B={b} is not a positive multiple of C(NK,t)={pieces}"
                )));
            }
            let library = Library::random(n, b, b / pieces, config.seed)?;
            let (inst, caches) =
                wc_sl_place(k, n, t, &library, config.seed).map_err(|e| e.in_phase("placement"))?;
            Ok(Prepared {
                m: inst.memory(),
                b,
                formula: inst.load()?,
                library,
                kind: Instance::SharedLink { inst, caches },
            })
        }
    }
}

fn run_one(prep: &Prepared, config: &SessionConfig, d: &DemandVector) -> Result<SessionTrace> {
    let lib = &prep.library;
    let mut channel = BroadcastChannel::default();
    let (nodes, ppf, pb) = match &prep.kind {
        Instance::Coded {
            params,
            placement,
            caches,
        } => {
            let mut nodes: Vec<UserNode> =
                caches.iter().map(|c| UserNode::new(c.clone(), d.of(c.user))).collect();
            let server = Server::new(
                params.clone(),
                placement.clone(),
                derive_draws(params, config.seed, DeliveryOptions::default()),
            );
            let submitted: Vec<usize> = nodes.iter().map(UserNode::submit_demand).collect();
            let queries = server.queries(&submitted).map_err(|e| e.in_phase("query"))?;
            for (idx, query) in queries.iter().enumerate() {
                let signal = nodes[idx]
                    .transmit(query, params.piece_bits)
                    .map_err(|e| e.in_phase("delivery"))?;
                channel.broadcast(signal, &mut nodes);
            }
            (nodes, params.pieces_per_file, params.piece_bits)
        }
        Instance::Uncoded { plan, caches } => {
            let mut nodes: Vec<UserNode> =
                caches.iter().map(|c| UserNode::new(c.clone(), d.of(c.user))).collect();
            let signals = uncoded_deliver(plan, caches).map_err(|e| e.in_phase("delivery"))?;
            for (idx, signal) in signals.into_iter().enumerate() {
                nodes[idx].inbox.push(signal.clone());
                channel.broadcast(signal, &mut nodes);
            }
            (nodes, plan.pieces_per_file(), plan.unit_bits)
        }
        Instance::SharedLink { inst, caches } => {
            let mut nodes: Vec<UserNode> =
                caches.iter().map(|c| UserNode::new(c.clone(), d.of(c.user))).collect();
            let signal = wc_sl_deliver(inst, lib, d).map_err(|e| e.in_phase("delivery"))?;
            channel.broadcast(signal, &mut nodes);
            (nodes, inst.pieces_per_file, inst.piece_bits)
        }
    };
    let outcome = outcome(d, &nodes, &channel, lib, prep.b, ppf, pb);
    Ok(SessionTrace {
        demands: d.clone(),
        nodes,
        channel,
        outcome,
    })
}

/// Runs every configured demand vector and returns the traces alongside the
/// report. The transcript, if requested, lists the signals of each demand
/// vector in run order.
pub fn run_session_traced(config: &SessionConfig) -> Result<(SessionReport, Vec<SessionTrace>)> {
    let prep = prepare(config)?;
    let demands = config.demand_vectors()?;
    let traces = demands
        .iter()
        .map(|d| run_one(&prep, config, d))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &config.transcript {
        let mut out = BufWriter::new(File::create(path)?);
        for tr in &traces {
            write_transcript(&mut out, config.scheme.tag(), tr.channel.transmitted())?;
        }
        out.flush()?;
    }
    let runs: Vec<DemandOutcome> = traces.iter().map(|t| t.outcome.clone()).collect();
    let passed = runs.iter().all(|r| r.passed(&prep.formula));
    Ok((
        SessionReport {
            scheme: config.scheme,
            k: config.k,
            n: config.n,
            t: config.t,
            m: prep.m,
            b: prep.b,
            seed: config.seed,
            formula_load: prep.formula,
            runs,
            transcript: config.transcript.clone(),
            passed,
        },
        traces,
    ))
}

pub fn run_session(config: &SessionConfig) -> Result<SessionReport> {
    run_session_traced(config).map(|(report, _)| report)
}
