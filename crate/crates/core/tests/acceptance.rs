//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! cargo test --release --test acceptance

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sitepack::drc::{enumerate_scenarios, greedy_cover, small_library, verify_coverage, CoverParams};
use sitepack::floorplan::{floorplan, FloorplanBudget};
use sitepack::interconnect::{
    check_deadlock_freedom, Bank, Command as Cmd, H2BMessage, Network, Station, REG_EN_PWR_BAR, REG_RSTN_SOFT,
};
use sitepack::model::Metrics;
use sitepack::placement::{anneal, pack_items, AnnealParams, CostParams, Skyline};
use sitepack::routing::astar_with;
use sitepack::{Cell, ControllerSpec, GridConfig, PortSpec, Rect, Side, SiteInstance, Template, TemplateLibrary};

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- 1

/// id, chip, track, bbox, printed chip+track, printed util %, printed track %.
const REFERENCE_ROWS: [(&str, f64, f64, f64, f64, &str, &str); 25] = [
    ("P1", 50784.0, 470.0, 51985.0, 51254.0, "98.59", "0.90"),
    ("P2", 102306.0, 999.0, 109630.0, 103305.0, "94.23", "0.91"),
    ("P3", 119372.0, 1394.0, 143820.0, 120766.0, "83.97", "0.97"),
    ("P4", 298591.0, 2064.0, 348176.0, 300655.0, "86.35", "0.59"),
    ("P5", 1922365.0, 1880.0, 2118591.0, 1924245.0, "90.83", "0.09"),
    ("P6", 93104.0, 1241.0, 105741.0, 94345.0, "89.22", "1.17"),
    ("P7", 221909.0, 2462.0, 256704.0, 224371.0, "87.40", "0.96"),
    ("P8", 221585.0, 2286.0, 258805.0, 223871.0, "86.50", "0.88"),
    ("P9", 614479.0, 4343.0, 690239.0, 618822.0, "89.65", "0.63"),
    ("P10", 3836266.0, 9011.0, 4054695.0, 3845277.0, "94.84", "0.22"),
    ("P11", 177744.0, 2658.0, 201260.0, 180402.0, "89.64", "1.32"),
    ("P12", 255027.0, 3896.0, 306000.0, 258923.0, "84.62", "1.27"),
    ("P13", 435030.0, 3594.0, 489168.0, 438624.0, "89.67", "0.73"),
    ("P14", 1032580.0, 7262.0, 1168429.5, 1039842.0, "88.99", "0.62"),
    ("P15", 6040294.0, 12602.0, 6731832.0, 6052896.0, "89.91", "0.19"),
    ("P16", 431664.0, 6580.0, 523127.5, 438244.0, "83.77", "1.26"),
    ("P17", 508947.0, 9290.0, 589432.5, 518237.0, "87.92", "1.58"),
    ("P18", 1075365.0, 17196.0, 1269606.2, 1092561.0, "86.06", "1.35"),
    ("P19", 1714770.0, 14783.0, 2056212.0, 1729553.0, "84.11", "0.72"),
    ("P20", 8071690.0, 24762.0, 8622849.0, 8096452.0, "93.90", "0.29"),
    ("P21", 854864.0, 19787.0, 1028180.0, 874651.0, "85.07", "1.92"),
    ("P22", 932147.0, 21198.0, 1175134.0, 953345.0, "81.13", "1.80"),
    ("P23", 2142590.0, 29476.0, 2505321.0, 2172066.0, "86.70", "1.18"),
    ("P24", 2840268.0, 25092.0, 3770833.5, 2865360.0, "75.99", "0.67"),
    ("P25", 11673554.0, 55269.0, 13367399.2, 11728823.0, "87.74", "0.41"),
];

fn metric_arithmetic() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    for &(id, chip, track, bbox, sum, util, tr) in &REFERENCE_ROWS {
        let m = Metrics::from_areas(chip, track, bbox, 0.0).expect("positive bbox");
        if m.chip_plus_track_area != sum || format!("{:.2}", m.util_pct) != util || format!("{:.2}", m.track_pct) != tr {
            bad.push(format!("{id}: {:.2}/{:.2}", m.util_pct, m.track_pct));
        }
    }
    let el = t.elapsed();
    ok(bad.is_empty() && el < Duration::from_secs(1), format!("{}/25 rows match in {el:.2?} {}", 25 - bad.len(), bad.join(" ")))
}

// ---------------------------------------------------------------- 2

fn packing_quality() -> Outcome {
    let lib = TemplateLibrary::reference();
    let grid = GridConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sites, diversity, floor) in [("P1", 5, 1, 90.0), ("P2", 10, 2, 80.0)] {
        let ids: Vec<u32> = lib.iter().take(diversity).map(|t| t.id).collect();
        let sites: Vec<SiteInstance> = (0..sites).map(|k| SiteInstance::new(k as u32, ids[k % ids.len()])).collect();
        let cp = CostParams::defaults_for(&pack_items(&sites, &lib, &grid).unwrap(), &grid);
        for seed in 1..=3u64 {
            let t = Instant::now();
            let ap = AnnealParams { seed, ..AnnealParams::default() };
            let r = floorplan(&sites, &lib, &grid, &FloorplanBudget::default(), &ap, &cp);
            let el = t.elapsed();
            match r {
                Ok(r) => {
                    let good = r.metrics.util_pct >= floor && el < Duration::from_secs(300);
                    pass &= good;
                    parts.push(format!("{name}/s{seed} {:.2}% {:.1}s", r.metrics.util_pct, el.as_secs_f64()));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{name}/s{seed} failed: {e}"));
                }
            }
        }
    }
    ok(pass, parts.join(", "))
}

// ---------------------------------------------------------------- 3

fn bfs_len(start: Cell, goal: Cell, n: i64, blocked: &BTreeSet<Cell>) -> Option<usize> {
    let mut dist: HashMap<Cell, usize> = HashMap::from([(start, 0)]);
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        if c == goal {
            return Some(dist[&c]);
        }
        for nb in [Cell::new(c.x + 1, c.y), Cell::new(c.x - 1, c.y), Cell::new(c.x, c.y + 1), Cell::new(c.x, c.y - 1)] {
            if nb.x < 0 || nb.y < 0 || nb.x >= n || nb.y >= n || blocked.contains(&nb) || dist.contains_key(&nb) {
                continue;
            }
            dist.insert(nb, dist[&c] + 1);
            q.push_back(nb);
        }
    }
    None
}

fn astar_optimality() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 50;
    let (mut found, mut absent, mut bad) = (0, 0, 0);
    for _ in 0..200 {
        let blocked: BTreeSet<Cell> =
            (0..n).flat_map(|x| (0..n).map(move |y| Cell::new(x, y))).filter(|_| rng.gen_bool(0.2)).collect();
        let mut free = || loop {
            let c = Cell::new(rng.gen_range(0..n), rng.gen_range(0..n));
            if !blocked.contains(&c) {
                return c;
            }
        };
        let (s, g) = (free(), free());
        let path = astar_with(s, g, Rect::new(0, 0, n, n), |c| !blocked.contains(&c));
        let oracle = bfs_len(s, g, n, &blocked);
        match (&path, oracle) {
            (Some(p), Some(len)) => {
                let valid = p.first() == Some(&s)
                    && p.last() == Some(&g)
                    && p.windows(2).all(|w| w[0].manhattan(w[1]) == 1)
                    && p.iter().all(|c| !blocked.contains(c));
                if valid && p.len() - 1 == len {
                    found += 1;
                } else {
                    bad += 1;
                }
            }
            (None, None) => absent += 1,
            _ => bad += 1,
        }
    }
    let el = t.elapsed();
    ok(bad == 0 && el < Duration::from_secs(10), format!("{found} equal lengths, {absent} agreed unreachable, {bad} mismatches, {el:.2?}"))
}

// ---------------------------------------------------------------- 4

fn random_template<R: Rng>(id: u32, rng: &mut R) -> Template {
    let (w, h) = (rng.gen_range(3..16), rng.gen_range(3..16));
    let side = Side::ALL[rng.gen_range(0..4)];
    let len = rng.gen_range(1..3);
    Template::new(id, w, h, PortSpec::centered(side, w, h, len)).unwrap()
}

fn placement_legality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut runs, mut layouts, mut violations) = (0, 0, 0);
    while layouts < 500 && runs < 5000 {
        runs += 1;
        let lib = TemplateLibrary::new((0..rng.gen_range(1..4)).map(|i| random_template(i, &mut rng)).collect()).unwrap();
        let ctrl = random_template(99, &mut rng);
        let grid = GridConfig {
            spacing: rng.gen_range(0..3),
            margin_x: rng.gen_range(0..3),
            margin_y: rng.gen_range(0..3),
            max_aspect: rng.gen_range(2.0..4.0),
            controller: ControllerSpec { width: ctrl.width, height: ctrl.height, port: ctrl.port },
            ..GridConfig::default()
        };
        let n = rng.gen_range(1..=19);
        let sites: Vec<SiteInstance> =
            (0..n).map(|k| SiteInstance::new(k, rng.gen_range(0..lib.len() as u32))).collect();
        let items = pack_items(&sites, &lib, &grid).unwrap();
        let ap = AnnealParams { iterations: 60, seed: rng.gen(), ..AnnealParams::default() };
        let Ok(r) = anneal(&items, &grid, &ap, &CostParams::defaults_for(&items, &grid)) else { continue };
        layouts += 1;
        // every cell of every block, its margins and its port lane belongs to one block only
        let mut owner: HashMap<Cell, usize> = HashMap::new();
        for (k, b) in r.best.layout.blocks().enumerate() {
            let (l, rr, bt, tp) = (
                grid.margin_x + if b.port.side == Side::West { 2 * grid.spacing + 1 } else { 0 },
                grid.margin_x + if b.port.side == Side::East { 2 * grid.spacing + 1 } else { 0 },
                grid.margin_y + if b.port.side == Side::South { 2 * grid.spacing + 1 } else { 0 },
                grid.margin_y + if b.port.side == Side::North { 2 * grid.spacing + 1 } else { 0 },
            );
            for x in b.rect.x - l..b.rect.x + b.rect.w + rr {
                for y in b.rect.y - bt..b.rect.y + b.rect.h + tp {
                    if owner.insert(Cell::new(x, y), k).is_some() {
                        violations += 1;
                    }
                }
            }
        }
        if r.best.layout.blocks().count() != n as usize + 1 {
            violations += 1;
        }
    }
    ok(layouts == 500 && violations == 0, format!("{layouts} layouts from {runs} runs, {violations} shared cells"))
}

// ---------------------------------------------------------------- 5

fn skyline_envelope() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..1000 {
        let width = rng.gen_range(5..40);
        let mut sky = Skyline::new(width);
        let mut placed: Vec<Rect> = Vec::new();
        for _ in 0..rng.gen_range(1..=10) {
            let (w, h) = (rng.gen_range(1..=width.min(12)), rng.gen_range(1..10));
            let top_at = |x: i64, placed: &[Rect]| placed.iter().filter(|r| r.x <= x && x < r.x1()).map(|r| r.y1()).max().unwrap_or(0);
            // lowest, then leftmost, over every x
            let want = (0..=width - w).map(|x| ((x..x + w).map(|c| top_at(c, &placed)).max().unwrap(), x)).min().map(|(y, x)| (x, y));
            let got = sky.find_position(w, h, None);
            if got != want {
                bad += 1;
                break;
            }
            let (x, y) = got.unwrap();
            sky.raise(x, w, y + h);
            placed.push(Rect::new(x, y, w, h));
            if (0..width).any(|c| sky.height_at(c) != top_at(c, &placed)) {
                bad += 1;
                break;
            }
        }
    }
    ok(bad == 0, format!("1000 trials, {bad} mismatches"))
}

// ---------------------------------------------------------------- 6

fn drc_coverage() -> Outcome {
    let mut pass = true;
    let mut pts = Vec::new();
    let mut parts = Vec::new();
    for n in [1, 2, 4, 8] {
        let t = Instant::now();
        let lib = small_library(n);
        let scen = enumerate_scenarios(&lib);
        let layout = match greedy_cover(&scen, &lib, &CoverParams::default()) {
            Ok(l) => l,
            Err(e) => return ok(false, format!("N={n}: {e}")),
        };
        let el = t.elapsed();
        let rep = verify_coverage(&layout, &scen);
        let avg = rep.avg_occurrence.unwrap_or(f64::INFINITY);
        pass &= rep.coverage_pct == 100.0 && avg <= 2.0 && rep.overlaps == 0;
        if n == 8 {
            pass &= el < Duration::from_secs(60);
        }
        pts.push((scen.len() as f64, layout.area() as f64));
        parts.push(format!("N={n}: {} scen {:.0}% avg {avg:.2} area {} {el:.2?}", scen.len(), rep.coverage_pct, layout.area()));
    }
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    pass &= r2 >= 0.9;
    ok(pass, format!("{}; R2 {r2:.3}", parts.join(", ")))
}

// ---------------------------------------------------------------- 7

/// Straight-line model of one site's registers and user bank.
#[derive(Default, Clone)]
struct RefSite {
    bank: BTreeMap<u32, u32>,
    reset: bool,
    off: bool,
}

impl RefSite {
    fn apply(&mut self, m: &H2BMessage) -> Option<u32> {
        let live = !self.reset && !self.off;
        match (m.command, m.bank) {
            (Cmd::Read, Bank::User) => Some(if live { self.bank.get(&m.word).copied().unwrap_or(0) } else { 0 }),
            (Cmd::Read, Bank::Periphery) => Some(match m.word {
                0 => u32::from(!self.reset),
                2 => u32::from(self.off),
                _ => 0,
            }),
            (Cmd::Write, Bank::User) => {
                if live {
                    self.bank.insert(m.word, m.data);
                }
                None
            }
            (Cmd::Write, Bank::Periphery) => {
                match m.word {
                    0 => {
                        self.reset = m.data & 1 == 0;
                        if self.reset {
                            self.bank.clear();
                        }
                    }
                    2 => self.off = m.data & 1 == 1,
                    _ => {}
                }
                None
            }
        }
    }
}

fn random_msg<R: Rng>(n: u8, rng: &mut R) -> H2BMessage {
    let site = rng.gen_range(0..=n);
    if rng.gen_bool(0.8) {
        let word = rng.gen_range(0..4);
        if rng.gen_bool(0.5) {
            H2BMessage::read(site, Bank::User, word)
        } else {
            H2BMessage::write(site, Bank::User, word, rng.gen())
        }
    } else {
        let word = [REG_RSTN_SOFT, REG_EN_PWR_BAR, 3][rng.gen_range(0..3)];
        let data = if word == REG_RSTN_SOFT { u32::from(rng.gen_bool(0.8)) } else { u32::from(rng.gen_bool(0.3)) };
        if rng.gen_bool(0.5) {
            H2BMessage::read(site, Bank::Periphery, word)
        } else {
            H2BMessage::write(site, Bank::Periphery, word, data)
        }
    }
}

fn interconnect_properties() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    for n in 1..=3 {
        let r = check_deadlock_freedom(&Network::new(n).unwrap(), 10_000, &mut ChaCha8Rng::seed_from_u64(n as u64));
        pass &= r.exhaustive_complete && r.deadlock_free();
        parts.push(format!("N={n} {} states {}", r.states_explored, if r.deadlock_free() { "no deadlock" } else { "DEADLOCK" }));
    }

    // saturating random traffic against a straight-line model
    let n = 25u8;
    let cycles = 100_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = Network::new(n as usize).unwrap();
    let mut model = vec![RefSite::default(); n as usize];
    let mut expect: Vec<VecDeque<u32>> = vec![VecDeque::new(); n as usize];
    let (mut accepted_late, mut mismatches, mut off_end) = (0u64, 0u64, 0u64);
    let mut offer = random_msg(n, &mut rng);
    let mut check = |d: Option<sitepack::interconnect::B2HMessage>, expect: &mut Vec<VecDeque<u32>>| {
        if let Some(d) = d {
            if expect[d.site as usize].pop_front() != Some(d.data) {
                mismatches += 1;
            }
        }
    };
    for c in 0..cycles {
        let r = net.step(Some(offer));
        check(r.delivered, &mut expect);
        if r.accepted {
            if c >= 1000 {
                accepted_late += 1;
            }
            if offer.site < n {
                if let Some(v) = model[offer.site as usize].apply(&offer) {
                    expect[offer.site as usize].push_back(v);
                }
            } else {
                off_end += 1;
            }
            offer = random_msg(n, &mut rng);
        }
    }
    while !net.is_quiet() {
        let r = net.step(None);
        check(r.delivered, &mut expect);
    }
    let s = net.stats();
    let conserved = s.injected == s.consumed + s.dropped
        && s.dropped == off_end
        && s.applied == s.consumed
        && s.delivered == s.responses
        && mismatches == 0
        && expect.iter().all(VecDeque::is_empty);
    let throughput = accepted_late as f64 / (cycles - 1000) as f64;
    pass &= conserved && (throughput - 0.5).abs() <= 0.02;
    parts.push(format!(
        "N=25 {} requests, {} dropped off the end, {} responses, conservation {}, throughput {throughput:.4}",
        s.injected,
        s.dropped,
        s.delivered,
        if conserved { "ok" } else { "BROKEN" }
    ));

    // activation switching under background traffic
    let mut net = Network::new(n as usize).unwrap();
    let mut switches = 0;
    let mut max_active = 0;
    while net.cycle() < cycles {
        if rng.gen_bool(0.01) {
            net.activate_site(rng.gen_range(0..n)).unwrap();
            switches += 1;
        } else {
            if rng.gen_bool(0.3) {
                net.enqueue(random_msg(n, &mut rng)).unwrap();
            }
            net.tick();
        }
        max_active = max_active.max(net.active_count());
    }
    net.drain(100_000).unwrap();
    let s = net.stats();
    let single = s.active_violations == 0 && max_active <= 1 && net.active_count() == 1;
    let conserved = s.injected == s.consumed + s.dropped && s.delivered == s.responses;
    pass &= single && conserved;
    parts.push(format!("{switches} activations, max enabled {max_active}, violations {}", s.active_violations));

    let widths: BTreeSet<usize> = [1usize, 25, 100]
        .iter()
        .flat_map(|&k| Network::new(k).unwrap().stations().iter().map(Station::state_bits).map(|b| b.len()).collect::<Vec<_>>())
        .collect();
    pass &= widths.len() == 1;
    parts.push(format!("state bits per station {widths:?}"));
    ok(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 8

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    files
}

fn determinism() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path();
    let cfg = base.join("bench.toml");
    std::fs::write(
        &cfg,
        "[[templates]]\nid = 0\nwidth = 92\nheight = 92\n\n[[templates]]\nid = 1\nwidth = 185\nheight = 185\n\n\
         [[instances]]\nid = \"P1\"\nsites = 5\nseed = 7\n\n[[instances]]\nid = \"P2\"\nsites = 10\ndiversity = 2\nseed = 7\n",
    )
    .unwrap();
    let layout = base.join("pack0").join("layout.json");
    let p = |x: &Path| x.display().to_string();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["pack", "route", "drc-cover", "simulate", "bench", "render"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let dir = base.join(format!("{name}{run}"));
            let args: Vec<String> = match name {
                "pack" => vec!["--seed".into(), "7".into(), "--out".into(), p(&dir)],
                "route" => vec!["--layout".into(), p(&layout), "--out".into(), p(&dir)],
                "drc-cover" => vec!["--templates".into(), "2".into(), "--out".into(), p(&dir)],
                "simulate" => vec!["--script".into(), p(&data.join("smoke.ops")), "--out".into(), p(&dir)],
                "bench" => vec!["--instances".into(), p(&cfg), "--out".into(), p(&dir.join("metrics.csv"))],
                _ => vec!["--layout".into(), p(&layout), "--out".into(), p(&dir.join("layout.svg"))],
            };
            let out = Command::new(env!("CARGO_BIN_EXE_sitepack"))
                .arg(name)
                .args(&args)
                .env_remove("SITEPACK_OUT_DIR")
                .output()
                .expect("spawn sitepack");
            if !out.status.success() {
                pass = false;
                parts.push(format!("{name} exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim()));
            }
            outputs.push((snapshot(&dir), out.stdout));
        }
        let same = !outputs[0].0.is_empty() && outputs[0] == outputs[1];
        pass &= same;
        parts.push(format!("{name} {} files {}", outputs[0].0.len(), if same { "identical" } else { "DIFFER" }));
    }
    ok(pass, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric arithmetic", metric_arithmetic),
        ("packing quality", packing_quality),
        ("A* optimality", astar_optimality),
        ("placement legality", placement_legality),
        ("skyline envelope", skyline_envelope),
        ("rule-scenario coverage", drc_coverage),
        ("interconnect properties", interconnect_properties),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("{} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
}
