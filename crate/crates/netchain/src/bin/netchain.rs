//! Operator CLI: build chains from edge lists, run queries, verify responses,
//! forge responses for the adversary harness, and benchmark the pipeline.

use clap::{Parser, Subcommand};
use netchain::ingest::{self};
use netchain::ledger::HeaderChain;
use netchain::sp::{self, Query, Response};
use netchain::tamper;
use netchain::{client, Mode, Store};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "netchain",
    version,
    about = "Authenticated top-k graph queries over an append-only block ledger"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an edge list into a new ledger and export its headers.
    Mine {
        /// Protocol: `netchain` or `netchain-plus`.
        #[arg(long)]
        mode: Mode,
        /// SNAP-style edge list (`u v [w]`, `#` comments).
        #[arg(long)]
        dataset: PathBuf,
        /// Ledger file to create.
        #[arg(long)]
        ledger: PathBuf,
        /// Header export file for the light client.
        #[arg(long)]
        headers: PathBuf,
        #[arg(long, default_value_t = 100)]
        objects_per_block: usize,
        /// Edge type label stamped on every parsed edge.
        #[arg(long = "type", default_value = "edge")]
        edge_type: String,
        /// Treat the dataset as undirected (emit both directions).
        #[arg(long)]
        undirected: bool,
        /// Seed for synthetic weights (and --shuffle).
        #[arg(long, env = "NETCHAIN_SEED", default_value_t = 42)]
        seed: u64,
        /// Shuffle parsed objects before batching instead of file order.
        #[arg(long)]
        shuffle: bool,
        /// Ingest at most this many objects.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run a top-k query against a ledger and write the response file.
    Query {
        #[arg(long)]
        ledger: PathBuf,
        /// Query vertex u_q.
        #[arg(long)]
        u: String,
        /// Query edge type type_q.
        #[arg(long = "type")]
        edge_type: String,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        lb: i64,
        #[arg(long)]
        ub: i64,
        /// Response file to write.
        #[arg(long)]
        out: PathBuf,
        /// Timing repeats; the median is reported.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Verify a response file against exported headers.
    ///
    /// By default the query is taken from the response file; pass any of
    /// --u/--type/--k/--lb/--ub to enforce your own query terms instead (a
    /// response answering a different query will then be rejected).
    Verify {
        #[arg(long)]
        headers: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        u: Option<String>,
        #[arg(long = "type")]
        edge_type: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lb: Option<i64>,
        #[arg(long)]
        ub: Option<i64>,
    },
    /// Apply a named forgery strategy to an honest response file.
    Tamper {
        #[arg(long)]
        response: PathBuf,
        /// One of: identity, forge-object, drop-matched-block, shorten-chain,
        /// relabel-valid-as-boundary, swap-weight, reorder-items,
        /// stale-boundary.
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep window sizes and k values, emitting one CSV row per cell.
    Bench {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        u: String,
        #[arg(long = "type")]
        edge_type: String,
        #[arg(long, value_delimiter = ',', default_value = "200,400,600,800,1000")]
        windows: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Mine {
            mode,
            dataset,
            ledger,
            headers,
            objects_per_block,
            edge_type,
            undirected,
            seed,
            shuffle,
            limit,
        } => cmd_mine(
            mode,
            &dataset,
            &ledger,
            &headers,
            objects_per_block,
            &edge_type,
            !undirected,
            seed,
            shuffle,
            limit,
        ),
        Command::Query {
            ledger,
            u,
            edge_type,
            k,
            lb,
            ub,
            out,
            repeats,
        } => cmd_query(&ledger, &u, &edge_type, k, lb, ub, &out, repeats.max(1)),
        Command::Verify {
            headers,
            response,
            repeats,
            u,
            edge_type,
            k,
            lb,
            ub,
        } => {
            let overrides = QueryOverrides {
                u,
                edge_type,
                k,
                lb,
                ub,
            };
            cmd_verify(&headers, &response, repeats.max(1), &overrides)
        }
        Command::Tamper {
            response,
            strategy,
            out,
        } => cmd_tamper(&response, &strategy, &out),
        Command::Bench {
            ledger,
            u,
            edge_type,
            windows,
            ks,
            repeats,
        } => cmd_bench(&ledger, &u, &edge_type, &windows, &ks, repeats.max(1)),
    }
}

fn median_ms(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN timings"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn mean_ms(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

#[allow(clippy::too_many_arguments)]
fn cmd_mine(
    mode: Mode,
    dataset: &PathBuf,
    ledger: &PathBuf,
    headers: &PathBuf,
    objects_per_block: usize,
    edge_type: &str,
    directed: bool,
    seed: u64,
    shuffle: bool,
    limit: Option<usize>,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if objects_per_block == 0 {
        return Err("objects-per-block must be at least 1".into());
    }
    let records = ingest::parse_snap(dataset, edge_type, directed)?;
    let mut objects = ingest::assign_weights(records, seed)
        .take(limit.unwrap_or(usize::MAX))
        .collect::<Result<Vec<_>, _>>()?;
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        objects.shuffle(&mut rng);
    }
    if objects.is_empty() {
        return Err("dataset yielded no objects".into());
    }

    let mut store = Store::create(ledger, mode)?;
    let mut append_secs: Vec<f64> = Vec::new();
    let mut ads_bytes: usize = 0;
    for chunk in objects.chunks(objects_per_block) {
        let t0 = Instant::now();
        let id = store.append(chunk.to_vec())?;
        append_secs.push(t0.elapsed().as_secs_f64());
        ads_bytes += store.get_block(id)?.ads_encoded_len();
    }
    store.export_headers(headers)?;

    let blocks = store.len();
    let t_per_block = append_secs.iter().sum::<f64>() / blocks as f64;
    let kb_per_block = ads_bytes as f64 / blocks as f64 / 1024.0;
    let dataset_name = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    println!("dataset,mode,blocks,t_s_per_block,ads_kb_per_block");
    println!("{dataset_name},{mode},{blocks},{t_per_block:.6},{kb_per_block:.2}");
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_query(
    ledger: &PathBuf,
    u: &str,
    edge_type: &str,
    k: usize,
    lb: i64,
    ub: i64,
    out: &PathBuf,
    repeats: usize,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let store = Store::open(ledger)?;
    let q = Query::new(u, edge_type, k, lb, ub)?;
    let mut samples = Vec::with_capacity(repeats);
    let mut resp: Option<Response> = None;
    for _ in 0..repeats {
        let t0 = Instant::now();
        let r = sp::search(&store, &q)?;
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
        resp = Some(r);
    }
    let resp = resp.expect("at least one repeat");
    let bytes = resp.to_bytes();
    std::fs::write(out, &bytes)?;

    let window = (ub - lb + 1) as usize;
    println!("mode,window,k,search_ms,resp_bytes,n_proofs,n_items");
    println!(
        "{},{window},{k},{:.3},{},{},{}",
        store.mode(),
        median_ms(samples),
        bytes.len(),
        resp.proof_count(),
        resp.item_count()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_headers(path: &PathBuf, mode: Mode) -> Result<HeaderChain, Box<dyn std::error::Error>> {
    let bytes = std::fs::read(path)?;
    let headers = HeaderChain::from_bytes(&bytes, mode)?;
    headers.verify_links()?;
    Ok(headers)
}

#[derive(Default)]
struct QueryOverrides {
    u: Option<String>,
    edge_type: Option<String>,
    k: Option<usize>,
    lb: Option<i64>,
    ub: Option<i64>,
}

fn cmd_verify(
    headers_path: &PathBuf,
    response_path: &PathBuf,
    repeats: usize,
    overrides: &QueryOverrides,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let resp = Response::from_bytes(&std::fs::read(response_path)?)?;
    let headers = load_headers(headers_path, resp.mode)?;
    let embedded = &resp.query;
    let q = Query::new(
        overrides
            .u
            .as_ref()
            .map(|s| s.as_bytes().to_vec())
            .unwrap_or_else(|| embedded.u().to_vec()),
        overrides
            .edge_type
            .as_ref()
            .map(|s| s.as_bytes().to_vec())
            .unwrap_or_else(|| embedded.edge_type().to_vec()),
        overrides.k.unwrap_or_else(|| embedded.k()),
        overrides.lb.unwrap_or_else(|| embedded.lb()),
        overrides.ub.unwrap_or_else(|| embedded.ub()),
    )?;

    let mut samples = Vec::with_capacity(repeats);
    let mut outcome = None;
    for _ in 0..repeats {
        let t0 = Instant::now();
        let r = client::verify(&headers, &q, &resp);
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
        outcome = Some(r);
    }
    let verify_ms = median_ms(samples);

    match outcome.expect("at least one repeat") {
        Ok(result) => {
            for (value, block) in &result.entries {
                println!(
                    "{}\t{}\t{}",
                    String::from_utf8_lossy(&value.v),
                    value.w,
                    block
                );
            }
            println!(
                "ACCEPT mode={} window={} k={} entries={} verify_ms={verify_ms:.3}",
                resp.mode,
                (q.ub() - q.lb() + 1),
                q.k(),
                result.entries.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            eprintln!("REJECT kind={err} verify_ms={verify_ms:.3}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_tamper(
    response_path: &PathBuf,
    strategy: &str,
    out: &PathBuf,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let resp = Response::from_bytes(&std::fs::read(response_path)?)?;
    let forged = tamper::apply_named(&resp, strategy)?;
    std::fs::write(out, forged.to_bytes())?;
    println!("applied {strategy} -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(
    ledger: &PathBuf,
    u: &str,
    edge_type: &str,
    windows: &[usize],
    ks: &[usize],
    repeats: usize,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let store = Store::open(ledger)?;
    let headers = store.headers();
    let len = store.len();
    println!(
        "mode,window,k,search_ms_mean,search_ms_median,verify_ms_mean,verify_ms_median,\
         resp_bytes,n_proofs,n_items"
    );
    for &window in windows {
        if window == 0 || window > len {
            continue;
        }
        let lb = (len - window) as i64;
        let ub = len as i64 - 1;
        for &k in ks {
            let q = Query::new(u, edge_type, k, lb, ub)?;
            let mut search_samples = Vec::with_capacity(repeats);
            let mut resp = None;
            for _ in 0..repeats {
                let t0 = Instant::now();
                resp = Some(sp::search(&store, &q)?);
                search_samples.push(t0.elapsed().as_secs_f64() * 1e3);
            }
            let resp = resp.expect("at least one repeat");
            let mut verify_samples = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let t0 = Instant::now();
                client::verify(&headers, &q, &resp)
                    .map_err(|e| format!("bench verification failed: {e}"))?;
                verify_samples.push(t0.elapsed().as_secs_f64() * 1e3);
            }
            println!(
                "{},{window},{k},{:.3},{:.3},{:.3},{:.3},{},{},{}",
                store.mode(),
                mean_ms(&search_samples),
                median_ms(search_samples.clone()),
                mean_ms(&verify_samples),
                median_ms(verify_samples.clone()),
                resp.to_bytes().len(),
                resp.proof_count(),
                resp.item_count()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
