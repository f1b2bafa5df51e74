//! Command-line experiments: each subcommand wires the library modules into
//! one reproducible pipeline run. Every artifact is a deterministic function
//! of (config, seed).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use hawkmaker_core::agents::StrategyContext;
use hawkmaker_core::analytics::{
    agent_trading_metrics, lob_summary, prediction_metrics, queue_value_curve, stylized_facts,
    LobSummaryStats,
};
use hawkmaker_core::config::{Config, ResolvedConfig};
use hawkmaker_core::data_io::{parse_itch, reconstruct, split_dataset, SplitResolution};
use hawkmaker_core::dhp::{
    grad_check, load_model, predict_next, save_model, train, DhpConfig, DhpModel, ModelRuntime,
    Stream, StreamEvent,
};
use hawkmaker_core::hawkes::{
    export_events_csv, fit_mle, parse_events_csv, simulate_thinning, time_rescaling_residuals,
    HawkesParams, MarkedEvent,
};
use hawkmaker_core::lob::{export_event_log_csv, parse_event_log_csv, Order, OrderBook};
use hawkmaker_core::market_sim::{
    fills_csv, market_csv, rewards_csv, run_campaign, run_session, snapshots_csv, SessionReport,
};
use hawkmaker_core::stats;

pub mod registry {
    pub use hawkmaker_core::agents::StrategyRegistry;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Clone)]
pub enum Command {
    Reconstruct {
        input: PathBuf,
    },
    Split {
        input: PathBuf,
        ratios: (f64, f64, f64),
        resolution: SplitResolution,
    },
    FitHawkes {
        input: PathBuf,
    },
    TrainDhp {
        input: PathBuf,
        val: Option<PathBuf>,
        neural_hawkes_mode: bool,
    },
    Predict {
        model: PathBuf,
        input: PathBuf,
        burn: usize,
        max_events: Option<usize>,
    },
    Simulate,
    Campaign {
        days: usize,
    },
    AblateCancel {
        days: usize,
    },
    Analyze {
        input: PathBuf,
    },
    Stylized {
        input: Option<PathBuf>,
        days: usize,
        dt_secs: f64,
        tail_sweep: bool,
    },
    Gradcheck,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub overrides: Vec<(String, String)>,
}

fn resolve_config(inv: &Invocation) -> Result<ResolvedConfig, CliError> {
    let mut cfg = match &inv.config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read config {path:?}: {e}")))?;
            Config::parse(&text).map_err(data_err)?
        }
        None => Config::parse("").expect("empty config parses"),
    };
    for (k, v) in &inv.overrides {
        cfg.set(k, v).map_err(data_err)?;
    }
    if let Some(seed) = inv.seed {
        cfg.set("seed", &seed.to_string()).map_err(data_err)?;
    }
    cfg.build().map_err(data_err)
}

fn write_artifact(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(data_err)?;
    fs::write(out.join(name), contents).map_err(data_err)
}

/// Load an event stream from any accepted source: the point-process CSV
/// (`t,component,mark`), a book event-log CSV, or the binary feed.
pub fn load_stream(path: &Path) -> Result<Stream, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {path:?}: {e}")))?;
    if let Ok(text) = std::str::from_utf8(&bytes) {
        let first = text.lines().next().unwrap_or("");
        if first.starts_with("t,component,mark") {
            let events = parse_events_csv(text).map_err(data_err)?;
            let horizon = events.last().map(|e| e.t + 1e-9).unwrap_or(0.0);
            return Ok(Stream::from_marked(&events, horizon));
        }
        if first.starts_with("time_ns,kind") {
            let events = parse_event_log_csv(text).map_err(data_err)?;
            return Ok(stream_from_book_events(&events));
        }
    }
    let (messages, _) = parse_itch(&bytes).map_err(data_err)?;
    Ok(reconstruct(&messages, 0).stream)
}

/// Replay a book event log into a model stream with spread/imbalance
/// features observed just before each event.
pub fn stream_from_book_events(events: &[hawkmaker_core::lob::BookEvent]) -> Stream {
    use hawkmaker_core::lob::BookEventKind;
    let mut book = OrderBook::new(1.0);
    let mut out = Vec::with_capacity(events.len());
    let mut last_t = f64::NEG_INFINITY;
    for ev in events {
        let quotes = book.quotes();
        let snap = book.snapshot(1);
        let bid_q = snap.bids.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let ask_q = snap.asks.first().map(|&(_, q)| q as f64).unwrap_or(0.0);
        let imbalance = if bid_q + ask_q > 0.0 {
            (bid_q - ask_q) / (bid_q + ask_q)
        } else {
            0.0
        };
        let mut t = ev.time_ns as f64 * 1e-9;
        if t <= last_t {
            t = last_t + 1e-9;
        }
        last_t = t;
        out.push(StreamEvent {
            t,
            kind: ev.kind.index(),
            spread: quotes.spread.map(|s| s as f64).unwrap_or(0.0),
            imbalance,
        });
        match ev.kind {
            BookEventKind::LimitBuy | BookEventKind::LimitSell => {
                let _ = book.submit_limit(Order::limit(
                    ev.order_id,
                    ev.agent_id,
                    ev.side,
                    ev.price_ticks.unwrap_or(1),
                    ev.quantity,
                    ev.time_ns,
                ));
            }
            BookEventKind::MarketBuy | BookEventKind::MarketSell => {
                let _ =
                    book.submit_market(ev.order_id, ev.agent_id, ev.side, ev.quantity, ev.time_ns);
            }
            BookEventKind::CancelPartial => {
                book.cancel(ev.order_id, Some(ev.quantity), ev.time_ns);
            }
            BookEventKind::CancelFull => {
                book.cancel(ev.order_id, None, ev.time_ns);
            }
        }
    }
    // rebase to the first event so likelihood windows start at the stream
    if let Some(first) = out.first().map(|e| e.t) {
        for ev in out.iter_mut() {
            ev.t -= first;
        }
    }
    let horizon = out.last().map(|e: &StreamEvent| e.t + 1e-9).unwrap_or(0.0);
    Stream {
        events: out,
        horizon,
    }
}

/// Build the strategy context; market-maker models come from checkpoint
/// paths when configured, otherwise fresh desk-scale models are used.
pub fn build_context(rc: &ResolvedConfig) -> Result<StrategyContext, CliError> {
    let mut models = BTreeMap::new();
    let needs = |name: &str| rc.session.census.iter().any(|(n, _)| n == name);
    if needs("dhmm") {
        let model = match &rc.dhmm_model_path {
            Some(path) => load_checkpoint(Path::new(path))?,
            None => {
                log::warn!("no dhmm model path configured; using an untrained model");
                DhpModel::new(rc.model.clone(), rc.train.seed)
            }
        };
        models.insert("dhmm".to_string(), Arc::new(model));
    }
    if needs("nhmm") {
        let model = match &rc.nhmm_model_path {
            Some(path) => load_checkpoint(Path::new(path))?,
            None => {
                log::warn!("no nhmm model path configured; using an untrained benchmark model");
                DhpModel::new(
                    DhpConfig::neural_hawkes(rc.model.event_types, rc.model.hidden),
                    rc.train.seed,
                )
            }
        };
        models.insert("nhmm".to_string(), Arc::new(model));
    }
    Ok(StrategyContext {
        tick_size: rc.session.tick_size,
        models,
        dhmm: rc.dhmm.clone(),
        pmm: rc.pmm.clone(),
        fundamental: rc.fundamental.clone(),
        chartist: rc.chartist.clone(),
        noise: rc.noise.clone(),
    })
}

fn load_checkpoint(path: &Path) -> Result<DhpModel, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Data(format!("cannot read model {path:?}: {e}")))?;
    load_model(&mut bytes.as_slice()).map_err(data_err)
}

fn agents_csv(report: &SessionReport) -> String {
    let mut out =
        String::from("agent_id,kind,instrument,capital,final_inventory,final_cash_ticks,unfilled_close_residue\n");
    for a in &report.agents {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.agent_id,
            a.kind,
            a.instrument,
            a.capital,
            a.final_inventory,
            a.final_cash_ticks,
            a.unfilled_close_residue
        ));
    }
    out
}

fn write_session_artifacts(out: &Path, report: &SessionReport) -> Result<(), CliError> {
    write_artifact(out, "events.csv", &export_event_log_csv(&report.event_logs[0]))?;
    write_artifact(out, "fills.csv", &fills_csv(report))?;
    write_artifact(out, "rewards.csv", &rewards_csv(report))?;
    write_artifact(out, "market.csv", &market_csv(report))?;
    write_artifact(out, "snapshots.csv", &snapshots_csv(report))?;
    write_artifact(out, "agents.csv", &agents_csv(report))?;
    let summary = format!(
        "fills: {}\nmessages: {}\nincidents: {}\nagents: {}\nevents: {}\n",
        report.fills.len(),
        report.messages_sent,
        report.incidents,
        report.agents.len().saturating_sub(1),
        report.event_logs.iter().map(|l| l.len()).sum::<usize>(),
    );
    write_artifact(out, "summary.txt", &summary)
}

/// Per-market-maker session metrics rows: day,agent,kind,npnl,map,reward.
fn campaign_metrics_csv(reports: &[SessionReport]) -> String {
    let hour_ns = 3_600_000_000_000i64;
    let mut out = String::from("day,agent_id,kind,npnl,map,total_reward\n");
    for (day, report) in reports.iter().enumerate() {
        for a in &report.agents {
            if a.agent_id == 0 {
                continue;
            }
            if !matches!(a.kind.as_str(), "dhmm" | "nhmm" | "pmm") {
                continue;
            }
            let m = agent_trading_metrics(report, a.agent_id, hour_ns);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                day, a.agent_id, a.kind, m.total_npnl, m.map, m.total_reward
            ));
        }
    }
    out
}

fn mean_npnl_by_kind(reports: &[SessionReport]) -> BTreeMap<String, Vec<f64>> {
    let hour_ns = 3_600_000_000_000i64;
    let mut by_kind: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for report in reports {
        for a in &report.agents {
            if matches!(a.kind.as_str(), "dhmm" | "nhmm" | "pmm") {
                let m = agent_trading_metrics(report, a.agent_id, hour_ns);
                by_kind.entry(a.kind.clone()).or_default().push(m.total_npnl);
            }
        }
    }
    by_kind
}

fn summary_row(reports: &[SessionReport]) -> LobSummaryStats {
    // average the per-day summaries
    let mut acc = LobSummaryStats::default();
    let n = reports.len().max(1) as f64;
    for r in reports {
        let s = lob_summary(&r.event_logs[0], None);
        acc.trade_arrival_rate += s.trade_arrival_rate / n;
        acc.avg_trade_size += s.avg_trade_size / n;
        acc.trade_size_std += s.trade_size_std / n;
        acc.cancel_arrival_rate += s.cancel_arrival_rate / n;
        acc.avg_cancel_size += s.avg_cancel_size / n;
        acc.price_jump_rate += s.price_jump_rate / n;
        acc.avg_jump_size += s.avg_jump_size / n;
        acc.market_impact += s.market_impact / n;
        acc.avg_queue_size += s.avg_queue_size / n;
        acc.n_events += s.n_events;
    }
    acc
}

fn median_spread(reports: &[SessionReport]) -> f64 {
    let spreads: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.market.iter().map(|m| m.spread))
        .filter(|s| *s > 0.0)
        .collect();
    stats::median(&spreads)
}

pub fn dispatch(inv: &Invocation) -> Result<(), CliError> {
    match &inv.command {
        Command::Reconstruct { input } => cmd_reconstruct(inv, input),
        Command::Split {
            input,
            ratios,
            resolution,
        } => cmd_split(inv, input, *ratios, *resolution),
        Command::FitHawkes { input } => cmd_fit_hawkes(inv, input),
        Command::TrainDhp {
            input,
            val,
            neural_hawkes_mode,
        } => cmd_train_dhp(inv, input, val.as_deref(), *neural_hawkes_mode),
        Command::Predict {
            model,
            input,
            burn,
            max_events,
        } => cmd_predict(inv, model, input, *burn, *max_events),
        Command::Simulate => cmd_simulate(inv),
        Command::Campaign { days } => cmd_campaign(inv, *days),
        Command::AblateCancel { days } => cmd_ablate_cancel(inv, *days),
        Command::Analyze { input } => cmd_analyze(inv, input),
        Command::Stylized {
            input,
            days,
            dt_secs,
            tail_sweep,
        } => cmd_stylized(inv, input.as_deref(), *days, *dt_secs, *tail_sweep),
        Command::Gradcheck => cmd_gradcheck(inv),
    }
}

fn cmd_reconstruct(inv: &Invocation, input: &Path) -> Result<(), CliError> {
    let bytes = fs::read(input).map_err(data_err)?;
    if let Ok(text) = std::str::from_utf8(&bytes) {
        if text.starts_with("t,component,mark") {
            // CSV fallback is accepted wherever a binary feed is
            let events = parse_events_csv(text).map_err(data_err)?;
            write_artifact(&inv.out_dir, "stream.csv", &export_events_csv(&events))?;
            write_artifact(
                &inv.out_dir,
                "stats.txt",
                &format!("events: {}\nsource: csv\n", events.len()),
            )?;
            return Ok(());
        }
    }
    let (messages, parse_stats) = parse_itch(&bytes).map_err(data_err)?;
    let rec = reconstruct(&messages, 1_000);
    write_artifact(&inv.out_dir, "stream.csv", &export_events_csv(&rec.marked))?;
    let mut features = String::from("t,kind,spread,imbalance\n");
    for ev in &rec.stream.events {
        features.push_str(&format!("{},{},{},{}\n", ev.t, ev.kind, ev.spread, ev.imbalance));
    }
    write_artifact(&inv.out_dir, "features.csv", &features)?;
    let mut snaps = String::from("time_ns,side,level,price_ticks,quantity\n");
    for (t, snap) in &rec.snapshots {
        for (level, (p, q)) in snap.bids.iter().enumerate() {
            snaps.push_str(&format!("{t},B,{level},{p},{q}\n"));
        }
        for (level, (p, q)) in snap.asks.iter().enumerate() {
            snaps.push_str(&format!("{t},S,{level},{p},{q}\n"));
        }
    }
    write_artifact(&inv.out_dir, "snapshots.csv", &snaps)?;
    let stats_txt = format!(
        "messages_parsed: {}\nmessages_skipped: {}\nevents: {}\ndropped_refs: {}\ntokens: {:?}\n",
        parse_stats.parsed,
        parse_stats.skipped,
        rec.stats.stream_length,
        rec.stats.dropped,
        rec.stats.tokens,
    );
    write_artifact(&inv.out_dir, "stats.txt", &stats_txt)
}

fn cmd_split(
    inv: &Invocation,
    input: &Path,
    ratios: (f64, f64, f64),
    resolution: SplitResolution,
) -> Result<(), CliError> {
    if ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 || ratios.0 + ratios.1 + ratios.2 <= 0.0
    {
        return Err(CliError::Usage("ratios must be nonnegative and sum > 0".into()));
    }
    let stream = load_stream(input)?;
    let split = split_dataset(&stream, ratios, resolution);
    for (name, part) in [
        ("train.csv", &split.train),
        ("val.csv", &split.val),
        ("test.csv", &split.test),
    ] {
        let marked: Vec<MarkedEvent> = part
            .events
            .iter()
            .map(|e| MarkedEvent::new(e.t, e.kind, e.kind))
            .collect();
        write_artifact(&inv.out_dir, name, &export_events_csv(&marked))?;
    }
    let windows = format!(
        "train: [{}, {})\nval: [{}, {})\ntest: [{}, {})\n",
        split.windows[0].0,
        split.windows[0].1,
        split.windows[1].0,
        split.windows[1].1,
        split.windows[2].0,
        split.windows[2].1,
    );
    write_artifact(&inv.out_dir, "windows.txt", &windows)
}

fn cmd_fit_hawkes(inv: &Invocation, input: &Path) -> Result<(), CliError> {
    let rc = resolve_config(inv)?;
    let stream = load_stream(input)?;
    if stream.events.len() < 2 {
        return Err(CliError::Data("need at least 2 events to fit".into()));
    }
    let events: Vec<MarkedEvent> = stream
        .events
        .iter()
        .map(|e| MarkedEvent::new(e.t, e.kind, e.kind))
        .collect();
    let dim = events.iter().map(|e| e.component).max().unwrap() + 1;
    let horizon = stream.horizon;
    let mut counts = vec![0usize; dim];
    for e in &events {
        counts[e.component] += 1;
    }
    let mu: Vec<f64> = counts
        .iter()
        .map(|&c| (0.5 * c as f64 / horizon).max(1e-4))
        .collect();
    let init = HawkesParams::new(mu, vec![vec![0.1; dim]; dim], vec![vec![1.0; dim]; dim])
        .map_err(data_err)?;
    let fit = fit_mle(&events, horizon, &init, rc.hawkes_fit).map_err(data_err)?;
    let residuals = time_rescaling_residuals(&fit.params, &events).map_err(data_err)?;
    let (ks_d, ks_p) = stats::ks_test_exp1(&residuals);

    let mut out = String::new();
    out.push_str(&format!(
        "events: {}\nhorizon: {horizon}\ndim: {dim}\nlog_likelihood: {}\ngrad_norm: {}\nconverged: {}\niterations: {}\nks_statistic: {ks_d}\nks_p_value: {ks_p}\nbranching_radius: {}\n",
        events.len(),
        fit.log_likelihood,
        fit.grad_norm,
        fit.converged,
        fit.iterations,
        fit.params.branching_spectral_radius(),
    ));
    write_artifact(&inv.out_dir, "hawkes_fit.txt", &out)?;

    let mut params_csv = String::from("kind,i,j,value\n");
    for (i, m) in fit.params.mu.iter().enumerate() {
        params_csv.push_str(&format!("mu,{i},,{m}\n"));
    }
    for i in 0..dim {
        for j in 0..dim {
            params_csv.push_str(&format!("alpha,{i},{j},{}\n", fit.params.alpha[i][j]));
            params_csv.push_str(&format!("beta,{i},{j},{}\n", fit.params.beta[i][j]));
        }
    }
    write_artifact(&inv.out_dir, "hawkes_params.csv", &params_csv)
}

/// Cut a long stream into independent segments so the gradient tape stays
/// bounded (truncated backpropagation through time across segments).
pub fn segment_stream(stream: &Stream, max_events: usize) -> Vec<Stream> {
    if max_events == 0 || stream.events.len() <= max_events {
        return vec![stream.clone()];
    }
    let mut out = Vec::new();
    let mut start_idx = 0;
    while start_idx < stream.events.len() {
        let end_idx = (start_idx + max_events).min(stream.events.len());
        let chunk = &stream.events[start_idx..end_idx];
        let t0 = if start_idx == 0 { 0.0 } else { stream.events[start_idx - 1].t };
        let horizon_end = if end_idx == stream.events.len() {
            stream.horizon
        } else {
            chunk.last().unwrap().t + 1e-9
        };
        out.push(Stream {
            events: chunk
                .iter()
                .map(|e| StreamEvent { t: e.t - t0, ..*e })
                .collect(),
            horizon: (horizon_end - t0).max(1e-9),
        });
        start_idx = end_idx;
    }
    out
}

fn cmd_train_dhp(
    inv: &Invocation,
    input: &Path,
    val: Option<&Path>,
    neural_hawkes_mode: bool,
) -> Result<(), CliError> {
    let rc = resolve_config(inv)?;
    let full = load_stream(input)?;
    if full.events.is_empty() {
        return Err(CliError::Data("training stream is empty".into()));
    }
    let (train_stream, val_stream) = match val {
        Some(path) => (full, load_stream(path)?),
        None => {
            // chronological 90/10 split
            let split = split_dataset(&full, (0.9, 0.1, 0.0), SplitResolution::Nanosecond);
            (split.train, split.val)
        }
    };
    let max_kind = train_stream
        .events
        .iter()
        .chain(&val_stream.events)
        .map(|e| e.kind)
        .max()
        .unwrap_or(0);
    let mut model_cfg = if neural_hawkes_mode {
        DhpConfig::neural_hawkes(rc.model.event_types, rc.model.hidden)
    } else {
        rc.model.clone()
    };
    if max_kind >= model_cfg.event_types {
        model_cfg.event_types = max_kind + 1;
    }
    let mut model = DhpModel::new(model_cfg, rc.train.seed);
    let segment: usize = rc.train_segment_events;
    let train_segments = segment_stream(&train_stream, segment);
    let val_segments = segment_stream(&val_stream, segment);
    let history = train(&mut model, &train_segments, &val_segments, &rc.train).map_err(data_err)?;

    fs::create_dir_all(&inv.out_dir).map_err(data_err)?;
    let model_path = inv.out_dir.join("model.bin");
    let mut buf = Vec::new();
    save_model(&model, &mut buf).map_err(data_err)?;
    fs::write(&model_path, &buf).map_err(data_err)?;
    write_artifact(&inv.out_dir, "history.csv", &history.to_csv())?;
    let info = format!(
        "best_epoch: {}\nstopped_early: {}\ndiverged: {}\nparams: {}\ntrain_events: {}\nval_events: {}\n",
        history.best_epoch,
        history.stopped_early,
        history.diverged,
        model.n_params(),
        train_stream.events.len(),
        val_stream.events.len(),
    );
    write_artifact(&inv.out_dir, "train_info.txt", &info)
}

fn cmd_predict(
    inv: &Invocation,
    model_path: &Path,
    input: &Path,
    burn: usize,
    max_events: Option<usize>,
) -> Result<(), CliError> {
    let model = load_checkpoint(model_path)?;
    let stream = load_stream(input)?;
    if stream.events.len() <= burn + 1 {
        return Err(CliError::Data(format!(
            "stream has {} events, burn-in {burn} leaves nothing to predict",
            stream.events.len()
        )));
    }
    let mut runtime = ModelRuntime::new(&model);
    for ev in &stream.events[..burn] {
        runtime.observe(&model, ev);
    }
    let mut rows = String::from("n,t_actual,t_hat,k_actual,k_hat\n");
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let end = max_events
        .map(|m| (burn + m).min(stream.events.len()))
        .unwrap_or(stream.events.len());
    for (n, ev) in stream.events[burn..end].iter().enumerate() {
        let pred = predict_next(&model, &runtime);
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            burn + n,
            ev.t,
            pred.t_hat,
            ev.kind,
            pred.k_hat
        ));
        predicted.push((pred.t_hat, pred.k_hat));
        actual.push((ev.t, ev.kind));
        runtime.observe(&model, ev);
    }
    let metrics = prediction_metrics(&predicted, &actual);
    // majority-class baseline on the evaluated slice
    let mut counts = vec![0usize; model.config.event_types];
    for (_, k) in &actual {
        counts[*k] += 1;
    }
    let majority = counts.iter().max().copied().unwrap_or(0) as f64 / actual.len().max(1) as f64;
    write_artifact(&inv.out_dir, "predictions.csv", &rows)?;
    let report = format!(
        "n: {}\nrmse: {}\nerror_rate: {}\nmajority_class_error: {}\n",
        metrics.n,
        metrics.rmse,
        metrics.error_rate,
        1.0 - majority
    );
    write_artifact(&inv.out_dir, "metrics.txt", &report)
}

fn cmd_simulate(inv: &Invocation) -> Result<(), CliError> {
    let rc = resolve_config(inv)?;
    let ctx = build_context(&rc)?;
    let registry = registry::StrategyRegistry::with_builtins();
    let report = run_session(&rc.session, &registry, &ctx).map_err(data_err)?;
    write_session_artifacts(&inv.out_dir, &report)
}

fn cmd_campaign(inv: &Invocation, days: usize) -> Result<(), CliError> {
    if days == 0 {
        return Err(CliError::Usage("campaign needs at least one day".into()));
    }
    let rc = resolve_config(inv)?;
    let ctx = build_context(&rc)?;
    let registry = registry::StrategyRegistry::with_builtins();
    let reports = run_campaign(&rc.session, &registry, &ctx, days).map_err(data_err)?;
    for (day, report) in reports.iter().enumerate() {
        write_session_artifacts(&inv.out_dir.join(format!("day{day:03}")), report)?;
    }
    write_artifact(&inv.out_dir, "metrics.csv", &campaign_metrics_csv(&reports))?;
    let mut aggregate = String::from("kind,mean_npnl,std_npnl,n_days\n");
    for (kind, vals) in mean_npnl_by_kind(&reports) {
        aggregate.push_str(&format!(
            "{kind},{},{},{}\n",
            stats::mean(&vals),
            stats::std_dev(&vals),
            vals.len()
        ));
    }
    write_artifact(&inv.out_dir, "aggregate.csv", &aggregate)
}

fn cmd_ablate_cancel(inv: &Invocation, days: usize) -> Result<(), CliError> {
    if days == 0 {
        return Err(CliError::Usage("ablation needs at least one day".into()));
    }
    let rc = resolve_config(inv)?;
    let ctx = build_context(&rc)?;
    let registry = registry::StrategyRegistry::with_builtins();

    let mut wc_config = rc.session.clone();
    wc_config.cancellations_enabled = true;
    let wc = run_campaign(&wc_config, &registry, &ctx, days).map_err(data_err)?;
    let mut nc_config = rc.session.clone();
    nc_config.cancellations_enabled = false;
    let nc = run_campaign(&nc_config, &registry, &ctx, days).map_err(data_err)?;

    for (day, report) in wc.iter().enumerate() {
        write_session_artifacts(&inv.out_dir.join("wc").join(format!("day{day:03}")), report)?;
    }
    for (day, report) in nc.iter().enumerate() {
        write_session_artifacts(&inv.out_dir.join("nc").join(format!("day{day:03}")), report)?;
    }

    let mut comparison = String::from(LobSummaryStats::csv_header());
    comparison.push_str(&summary_row(&nc).to_csv_row("Simulated NC"));
    comparison.push_str(&summary_row(&wc).to_csv_row("Simulated WC"));
    write_artifact(&inv.out_dir, "comparison.csv", &comparison)?;
    let spreads = format!(
        "median_spread_nc: {}\nmedian_spread_wc: {}\n",
        median_spread(&nc),
        median_spread(&wc)
    );
    write_artifact(&inv.out_dir, "spreads.txt", &spreads)
}

fn cmd_analyze(inv: &Invocation, input: &Path) -> Result<(), CliError> {
    let events_text = fs::read_to_string(input.join("events.csv"))
        .map_err(|e| CliError::Data(format!("cannot read events.csv in {input:?}: {e}")))?;
    let events = parse_event_log_csv(&events_text).map_err(data_err)?;
    let summary = lob_summary(&events, None);
    let mut out = String::from(LobSummaryStats::csv_header());
    out.push_str(&summary.to_csv_row("session"));
    write_artifact(&inv.out_dir, "summary.csv", &out)?;

    let curve = queue_value_curve(&events, 1.0, 10);
    write_artifact(&inv.out_dir, "queue_value.csv", &curve.to_csv())
}

fn cmd_stylized(
    inv: &Invocation,
    input: Option<&Path>,
    days: usize,
    dt_secs: f64,
    tail_sweep: bool,
) -> Result<(), CliError> {
    let mids: Vec<(i64, f64)> = match input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(data_err)?;
            let mut mids = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if i == 0 {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() >= 3 {
                    let t: i64 = cols[0].parse().map_err(data_err)?;
                    let mid: f64 = cols[2].parse().map_err(data_err)?;
                    mids.push((t, mid));
                }
            }
            mids
        }
        None => {
            let rc = resolve_config(inv)?;
            let ctx = build_context(&rc)?;
            let registry = registry::StrategyRegistry::with_builtins();
            let reports = run_campaign(&rc.session, &registry, &ctx, days).map_err(data_err)?;
            // concatenate day mid paths on a continuous clock
            let mut mids = Vec::new();
            let mut offset = 0i64;
            for report in &reports {
                let day_start = report.market.first().map(|m| m.time_ns).unwrap_or(0);
                for m in report.market.iter().filter(|m| m.instrument == 0) {
                    mids.push((offset + m.time_ns - day_start, m.mid));
                }
                if let Some(last) = report.market.last() {
                    offset += last.time_ns - day_start + 1;
                }
            }
            mids
        }
    };
    if mids.len() < 10 {
        return Err(CliError::Data("not enough mid observations".into()));
    }
    let dt_ns = (dt_secs * 1e9) as i64;
    let report = stylized_facts(&mids, dt_ns, 20, 0.05);
    write_artifact(&inv.out_dir, "acf.csv", &report.acf_csv())?;
    write_artifact(&inv.out_dir, "pdf.csv", &report.pdf_csv())?;
    write_artifact(&inv.out_dir, "ccdf.csv", &report.ccdf_csv())?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into());
    let mut text = format!(
        "n_returns: {}\ndt_secs: {dt_secs}\ntail_exponent_pos: {}\ntail_exponent_neg: {}\ntail_exponent_abs: {}\nacf_band: {}\n",
        report.n_returns,
        fmt(report.tail_exponent_pos),
        fmt(report.tail_exponent_neg),
        fmt(report.tail_exponent_abs),
        report.acf_band,
    );
    if tail_sweep {
        for fraction in [0.025, 0.05, 0.10] {
            let sweep = stylized_facts(&mids, dt_ns, 1, fraction);
            text.push_str(&format!(
                "tail_exponent_abs@{fraction}: {}\n",
                fmt(sweep.tail_exponent_abs)
            ));
        }
    }
    write_artifact(&inv.out_dir, "report.txt", &text)
}

fn cmd_gradcheck(inv: &Invocation) -> Result<(), CliError> {
    let rc = resolve_config(inv)?;
    // small synthetic multivariate stream
    let k = rc.model.event_types;
    let truth = HawkesParams::new(
        vec![0.3; k],
        vec![vec![0.4 / k as f64; k]; k],
        vec![vec![1.0; k]; k],
    )
    .map_err(data_err)?;
    let events = simulate_thinning(&truth, 20.0, rc.train.seed).map_err(data_err)?;
    let mut stream = Stream::from_marked(&events, 20.0);
    stream.events.truncate(8);
    stream.horizon = stream.events.last().map(|e| e.t + 0.5).unwrap_or(1.0);

    let model = DhpModel::new(rc.model.clone(), rc.train.seed);
    let report = grad_check(&model, &stream, &rc.train, 1e-5).map_err(data_err)?;
    let tolerance = if rc.model.lstm_layers <= 1 { 1e-4 } else { 1e-3 };
    let mut text = format!(
        "parameters: {}\nchecked: {}\nmax_rel_err: {}\ntolerance: {tolerance}\npass: {}\n",
        model.n_params(),
        report.n_checked,
        report.max_rel_err,
        report.max_rel_err < tolerance,
    );
    for (name, idx, a, fd, rel) in &report.worst {
        text.push_str(&format!("worst: {name}[{idx}] analytic={a} fd={fd} rel={rel}\n"));
    }
    write_artifact(&inv.out_dir, "gradcheck.txt", &text)?;
    if report.max_rel_err < tolerance {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "gradient check failed: max rel err {} over tolerance {tolerance}",
            report.max_rel_err
        )))
    }
}
