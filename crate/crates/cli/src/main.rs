use std::io::{self, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use metroslice_cli::metroslice_core::mda::RecordFilter;
use metroslice_cli::metroslice_core::probe::BertType;
use metroslice_cli::*;

#[derive(Parser)]
#[command(name = "metroslice", version, about = "Plan, deploy and measure latency-aware metro network slices")]
struct Cli {
    /// Scenario file; the built-in demonstration scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Report errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place the scenario's NS request and show the ranked chains.
    Plan {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Set up the network service, then commission its circuits.
    Deploy {
        /// Laser warm-up override, seconds.
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long)]
        serial_transponders: bool,
        /// Packets per commissioning train.
        #[arg(long)]
        count: Option<u32>,
    },
    /// QoS table over the calibration and fiber set-ups.
    Table1 {
        #[arg(long)]
        trains: Option<u32>,
        #[arg(long)]
        count: Option<u32>,
    },
    /// Degrade the optical channel and run the soft-failure detector.
    Degrade {
        /// SNR ramp, dB/s.
        #[arg(long)]
        ramp: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Query stored measurement records.
    Records {
        /// Records file; defaults to records.jsonl under --out.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        circuit: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// Run one packet train, simulated or against a live reflector.
    Measure(MeasureArgs),
    /// Echo probe packets back to their sender.
    Reflect {
        #[arg(long, default_value = "0.0.0.0:7878")]
        bind: SocketAddr,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bert {
    Zeros,
    Incrementing,
    Prbs31,
}

impl From<Bert> for BertType {
    fn from(b: Bert) -> Self {
        match b {
            Bert::Zeros => BertType::Zeros,
            Bert::Incrementing => BertType::Incrementing,
            Bert::Prbs31 => BertType::Prbs31,
        }
    }
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    count: Option<u32>,
    /// IP packet size in bytes.
    #[arg(long)]
    size: Option<u32>,
    #[arg(long)]
    vlan: Option<u16>,
    /// Reflector address; selects live mode.
    #[arg(long)]
    dst: Option<Ipv4Addr>,
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, value_enum)]
    bert: Option<Bert>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    csv: bool,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let s = load_scenario(cli.scenario.as_deref(), cli.seed)?;
    match cli.cmd {
        Command::Plan { k, format } => {
            let r = cmd_plan(&s, k)?;
            match format {
                Format::Json => print_json(&r)?,
                Format::Csv => {
                    println!("# {}", describe_decision(&r.decision));
                    write_csv(io::stdout().lock(), &candidate_rows(&r))?;
                }
            }
        }
        Command::Deploy {
            warmup,
            serial_transponders,
            count,
        } => {
            let o = DeployOptions {
                warmup_s: warmup,
                serial_transponders,
                count,
            };
            let d = cmd_deploy(&s, &o, &cli.out)?;
            print_json(&d.summary)?;
        }
        Command::Table1 { trains, count } => {
            let rows = cmd_table1(&s, &Table1Options { trains, count }, &cli.out)?;
            write_csv(io::stdout().lock(), &rows)?;
            if let Ok(b) = budget_from_table(&rows) {
                eprintln!(
                    "latency budget: probe {:.2} us, switches {:.2} us, optical {:.2} us",
                    b.probe_us, b.switches_us, b.optical_us
                );
            }
        }
        Command::Degrade { ramp, duration } => {
            let o = DegradeOptions {
                ramp_db_per_s: ramp,
                duration_s: duration,
            };
            let (_, report) = cmd_degrade(&s, &o, &cli.out)?;
            print_json(&report)?;
        }
        Command::Records {
            file,
            circuit,
            from,
            to,
            csv,
        } => {
            let file = file.unwrap_or_else(|| cli.out.join(RECORDS_FILE));
            let filter = RecordFilter {
                circuit_id: circuit,
                from_s: from,
                to_s: to,
            };
            let recs = cmd_records(&file, &filter)?;
            if csv {
                let rows: Vec<RecordRow> = recs.iter().map(RecordRow::from).collect();
                write_csv(io::stdout().lock(), &rows)?;
            } else {
                let mut out = io::stdout().lock();
                for r in &recs {
                    serde_json::to_writer(&mut out, r)?;
                    writeln!(out)?;
                }
            }
        }
        Command::Measure(a) => {
            let mut cfg = s.probe.clone();
            if let Some(n) = a.count {
                cfg.count = n;
            }
            if let Some(n) = a.size {
                cfg.ip_payload_bytes = n;
            }
            if let Some(v) = a.vlan {
                cfg.vlan_id = v;
            }
            if let Some(b) = a.bert {
                cfg.bert_type = b.into();
            }
            if let Some(t) = a.timeout_ms {
                cfg.timeout_ms = t;
            }
            cfg.dst_port = a.port;
            let target = match a.dst {
                Some(ip) => {
                    cfg.dst_ip = ip;
                    MeasureTarget::Live(SocketAddr::from((ip, a.port)))
                }
                None => MeasureTarget::Simulated,
            };
            let stats = cmd_measure(&s, &cfg, &target)?;
            if a.csv {
                write_csv(io::stdout().lock(), &[stats])?;
            } else {
                print_json(&stats)?;
            }
        }
        Command::Reflect { bind, duration } => {
            let n = cmd_reflect(bind, duration.map(Duration::from_secs_f64), |addr| {
                eprintln!("reflecting on {addr}");
            })?;
            eprintln!("reflected {n} packets");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
                eprintln!("{}", serde_json::json!({ "error": e.to_string(), "causes": chain }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
