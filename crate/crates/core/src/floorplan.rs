//! The outer optimization loop: several annealed placements, each checked by
//! the router, keeping the smallest one that routes. Also runs benchmark
//! instances and writes their metrics as CSV.

use std::io::{self, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    compute_bounding_box, compute_metrics, GridConfig, Layout, Metrics, SiteInstance, TemplateId, TemplateLibrary,
};
use crate::placement::{anneal, pack_items, skyline_candidates, sort_largest_first, AnnealParams, CostParams, PackItem};
use crate::routing::{route_all, OrderingStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorplanBudget {
    pub placement_attempts: usize,
    pub routing_attempts: usize,
    /// Stop starting new placement attempts after this many seconds.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl Default for FloorplanBudget {
    fn default() -> Self {
        FloorplanBudget { placement_attempts: 5, routing_attempts: 3, time_limit: None }
    }
}

impl FloorplanBudget {
    pub fn validate(&self) -> Result<()> {
        if self.placement_attempts < 1 || self.routing_attempts < 1 {
            return Err(Error::InvalidParameter("placement and routing attempts must be at least 1".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("time limit {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// What happened in one placement attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt: usize,
    /// Bounding-box area of the placement before routing; `None` when no
    /// feasible initial packing existed for this attempt's order.
    pub area: Option<i64>,
    pub anneal_cost: Option<f64>,
    /// Which routing try succeeded, and with which pin order.
    pub routed: Option<(usize, OrderingStrategy)>,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct FloorplanResult {
    /// Routed layout shifted so its bounding box starts at the origin.
    pub layout: Layout,
    pub metrics: Metrics,
    pub best_attempt: usize,
    pub attempts: Vec<AttemptLog>,
}

/// Anneal up to `placement_attempts` placements and route each; keep the
/// routed one with the smallest pre-routing bounding box (earliest on ties).
///
/// Attempt 1 starts from the descending-area order. Later attempts start from
/// a shuffle seeded with `ap.seed + attempt - 1`, and anneal with that seed too.
pub fn floorplan(
    sites: &[SiteInstance],
    library: &TemplateLibrary,
    grid: &GridConfig,
    budget: &FloorplanBudget,
    ap: &AnnealParams,
    cp: &CostParams,
) -> Result<FloorplanResult> {
    if sites.is_empty() {
        return Err(Error::EmptyLayout);
    }
    grid.validate()?;
    budget.validate()?;
    let started = Instant::now();
    let mut base = pack_items(sites, library, grid)?;
    sort_largest_first(&mut base);

    let mut best: Option<(i64, usize, Layout)> = None;
    let mut attempts = Vec::with_capacity(budget.placement_attempts);
    for attempt in 1..=budget.placement_attempts {
        if attempt > 1 && budget.time_limit.is_some_and(|t| started.elapsed().as_secs_f64() >= t) {
            break;
        }
        let seed = ap.seed.wrapping_add(attempt as u64 - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = if attempt > 1 { shuffled_start(&base, grid, &mut rng) } else { base.clone() };
        let run = match anneal(&order, grid, &AnnealParams { seed, ..*ap }, cp) {
            Ok(run) => run,
            Err(Error::NoInitialLayout) => {
                attempts.push(AttemptLog { attempt, area: None, anneal_cost: None, routed: None, improved: false });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut layout = run.best.layout;
        let area = compute_bounding_box(&layout)?.area();

        let routing = route_all(&layout, budget.routing_attempts, &mut rng);
        let mut log =
            AttemptLog { attempt, area: Some(area), anneal_cost: Some(run.best_cost), routed: None, improved: false };
        if let Some(r) = routing {
            log.routed = Some((r.attempt, r.strategy));
            if best.as_ref().map_or(true, |(a, _, _)| area < *a) {
                log.improved = true;
                layout.routes = r.paths;
                best = Some((area, attempt, layout));
            }
        }
        attempts.push(log);
    }

    let (_, best_attempt, layout) = best.ok_or(Error::FloorplanFailure)?;
    let layout = layout.normalized()?;
    let metrics = compute_metrics(&layout, started.elapsed().as_secs_f64())?;
    Ok(FloorplanResult { layout, metrics, best_attempt, attempts })
}

/// Shuffles tried per attempt before falling back to `base`.
const SHUFFLE_TRIES: usize = 8;

/// First of a few shuffles of `base` that packs with every port reachable,
/// or `base` itself if none does.
fn shuffled_start(base: &[PackItem], grid: &GridConfig, rng: &mut ChaCha8Rng) -> Vec<PackItem> {
    for _ in 0..SHUFFLE_TRIES {
        let mut order = base.to_vec();
        order.shuffle(rng);
        if skyline_candidates(&order, grid).is_ok() {
            return order;
        }
    }
    base.to_vec()
}

/// One benchmark row to reproduce: `site_count` sites drawn round-robin from
/// the first `template_diversity` templates of `library`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub id: String,
    pub site_count: usize,
    pub template_diversity: usize,
    pub library: TemplateLibrary,
    pub seed: u64,
}

impl BenchmarkInstance {
    pub fn validate(&self) -> Result<()> {
        if self.site_count == 0 {
            return Err(Error::InvalidParameter(format!("{}: site_count must be positive", self.id)));
        }
        if self.template_diversity == 0 || self.template_diversity > self.library.len() {
            return Err(Error::InvalidParameter(format!(
                "{}: template_diversity {} must lie in 1..={}",
                self.id,
                self.template_diversity,
                self.library.len()
            )));
        }
        Ok(())
    }

    /// Template of site `k` is the `(k mod diversity)`-th template in library order.
    pub fn template_assignment(&self) -> Vec<TemplateId> {
        let ids: Vec<TemplateId> = self.library.iter().take(self.template_diversity).map(|t| t.id).collect();
        (0..self.site_count).map(|k| ids[k % ids.len()]).collect()
    }

    pub fn sites(&self) -> Vec<SiteInstance> {
        self.template_assignment()
            .into_iter()
            .enumerate()
            .map(|(k, t)| SiteInstance::new(k as u32, t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub id: String,
    pub sites: usize,
    pub diversity: usize,
    pub outcome: std::result::Result<Metrics, String>,
}

/// Mean and sample standard deviation over the successful rows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BenchmarkSummary {
    pub util_mean: Option<f64>,
    pub util_std: Option<f64>,
    pub track_mean: Option<f64>,
    pub track_std: Option<f64>,
}

pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

impl BenchmarkSummary {
    pub fn of(rows: &[BenchmarkRow]) -> Self {
        let ok: Vec<&Metrics> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let (util_mean, util_std) = mean_std(&ok.iter().map(|m| m.util_pct).collect::<Vec<_>>());
        let (track_mean, track_std) = mean_std(&ok.iter().map(|m| m.track_pct).collect::<Vec<_>>());
        BenchmarkSummary { util_mean, util_std, track_mean, track_std }
    }
}

/// Floorplan each instance with its own seed. Failures become rows too.
pub fn run_benchmark(
    instances: &[BenchmarkInstance],
    grid: &GridConfig,
    budget: &FloorplanBudget,
    ap: &AnnealParams,
) -> (Vec<BenchmarkRow>, BenchmarkSummary) {
    let rows: Vec<BenchmarkRow> = instances
        .iter()
        .map(|inst| {
            let outcome = inst
                .validate()
                .and_then(|_| {
                    let sites = inst.sites();
                    let items = pack_items(&sites, &inst.library, grid)?;
                    let cp = CostParams::defaults_for(&items, grid);
                    floorplan(&sites, &inst.library, grid, budget, &AnnealParams { seed: inst.seed, ..*ap }, &cp)
                })
                .map(|r| r.metrics)
                .map_err(|e| e.to_string());
            BenchmarkRow { id: inst.id.clone(), sites: inst.site_count, diversity: inst.template_diversity, outcome }
        })
        .collect();
    let summary = BenchmarkSummary::of(&rows);
    (rows, summary)
}

pub const CSV_HEADER: &str =
    "id,sites,diversity,solver_time_s,chip_area,track_area,bbox_area,chip_track_area,util_pct,track_pct";

/// Write the metrics table. Solver time is wall-clock, so it is only written
/// when `timing` is set; otherwise the column holds `NA` and the file is a
/// pure function of the inputs.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[BenchmarkRow], timing: bool) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        match &r.outcome {
            Ok(m) => {
                let time = if timing { format!("{:.2}", m.solver_time_s) } else { "NA".into() };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{:.2},{:.2}",
                    r.id,
                    r.sites,
                    r.diversity,
                    time,
                    m.chip_site_area,
                    m.track_area,
                    m.bbox_area,
                    m.chip_plus_track_area,
                    m.util_pct,
                    m.track_pct
                )?;
            }
            Err(_) => writeln!(w, "{},{},{},NA,NA,NA,NA,NA,NA,NA", r.id, r.sites, r.diversity)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Template;

    fn lib92() -> TemplateLibrary {
        TemplateLibrary::new(vec![Template::with_north_port(0, 92, 92).unwrap()]).unwrap()
    }

    fn quick() -> AnnealParams {
        AnnealParams { iterations: 200, ..AnnealParams::default() }
    }

    #[test]
    fn single_site_is_nearly_full() {
        let sites = [SiteInstance::new(0, 0)];
        let grid = GridConfig::default();
        let budget = FloorplanBudget { placement_attempts: 1, ..FloorplanBudget::default() };
        let items = pack_items(&sites, &lib92(), &grid).unwrap();
        let cp = CostParams::defaults_for(&items, &grid);
        let r = floorplan(&sites, &lib92(), &grid, &budget, &quick(), &cp).unwrap();
        assert_eq!(r.layout.routes.len(), 1);
        assert!(r.metrics.util_pct > 85.0, "{:?}", r.metrics);
    }

    #[test]
    fn best_area_never_increases() {
        let lib = TemplateLibrary::reference().prefix(2);
        let inst = BenchmarkInstance { id: "t".into(), site_count: 6, template_diversity: 2, library: lib, seed: 3 };
        let grid = GridConfig::default();
        let sites = inst.sites();
        let items = pack_items(&sites, &inst.library, &grid).unwrap();
        let cp = CostParams::defaults_for(&items, &grid);
        let r = floorplan(&sites, &inst.library, &grid, &FloorplanBudget::default(), &quick(), &cp).unwrap();
        let mut best = i64::MAX;
        for a in r.attempts.iter().filter(|a| a.routed.is_some()) {
            let area = a.area.unwrap();
            assert_eq!(a.improved, area < best);
            best = best.min(area);
        }
        let winner = r.attempts.iter().find(|a| a.attempt == r.best_attempt).unwrap();
        assert_eq!(winner.area, Some(best));
    }

    #[test]
    fn empty_sites_are_rejected() {
        let grid = GridConfig::default();
        let cp = CostParams { density_weight: 0.0, aspect_weight: 0.0, max_aspect: 2.0 };
        let e = floorplan(&[], &lib92(), &grid, &FloorplanBudget::default(), &quick(), &cp).unwrap_err();
        assert_eq!(e, Error::EmptyLayout);
    }

    #[test]
    fn round_robin_assignment() {
        let inst = BenchmarkInstance {
            id: "p".into(),
            site_count: 7,
            template_diversity: 3,
            library: TemplateLibrary::reference(),
            seed: 0,
        };
        assert_eq!(inst.template_assignment(), vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn empty_benchmark() {
        let (rows, summary) = run_benchmark(&[], &GridConfig::default(), &FloorplanBudget::default(), &quick());
        assert!(rows.is_empty());
        assert_eq!(summary, BenchmarkSummary::default());
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &rows, false).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn failed_rows_are_kept() {
        let bad = BenchmarkInstance {
            id: "bad".into(),
            site_count: 3,
            template_diversity: 9,
            library: lib92(),
            seed: 0,
        };
        let (rows, summary) = run_benchmark(&[bad], &GridConfig::default(), &FloorplanBudget::default(), &quick());
        assert!(rows[0].outcome.is_err());
        assert_eq!(summary.util_mean, None);
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &rows, false).unwrap();
        assert!(String::from_utf8(out).unwrap().ends_with("bad,3,9,NA,NA,NA,NA,NA,NA,NA\n"));
    }

    #[test]
    fn sample_standard_deviation() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, Some(5.0));
        assert!((s.unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[1.0]), (Some(1.0), None));
    }
}
