//! Ablation cells run on a pool of scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use hsad_core::pipeline::{assemble_ablation, plan_ablation, run_pipeline, AblationMode, AblationRow, AblationSettings, EvalReport, PipelineConfig};
use hsad_core::{ActivationTrace, ExampleMeta, Result};

/// `HSAD_THREADS` if set to a positive integer, else the available parallelism.
pub fn threads_from_env() -> usize {
    std::env::var("HSAD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Same rows as [`hsad_core::pipeline::run_ablation`]; each cell is still
/// trained single-threaded, so the result does not depend on `threads`.
pub fn run_ablation_parallel(
    traces: &[ActivationTrace],
    metas: &[ExampleMeta],
    mode: AblationMode,
    base: &PipelineConfig,
    settings: &AblationSettings,
    threads: usize,
) -> Result<Vec<AblationRow>> {
    let l = traces.first().map_or(1, |t| t.l);
    let cells = plan_ablation(mode, base, settings, l)?;
    let slots: Vec<Mutex<Option<Result<EvalReport>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, cells.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let report = run_pipeline(traces, metas, &cell.config);
                *slots[i].lock().expect("slot lock") = Some(report);
            });
        }
    });
    let reports = slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every cell ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_ablation(mode, &cells, reports))
}
