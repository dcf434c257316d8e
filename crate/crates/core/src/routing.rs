//! Daisy-chain routing from the controller pin through every site pin.
//!
//! Legs are routed one after another with A* on a one-layer grid. Each
//! routed leg becomes an obstacle and is surrounded by a buffer of `spacing`
//! cells (Chebyshev) that later legs may not enter. The exception is a pin's
//! access zone, the cells within `spacing` of it: a leg may use the buffer
//! there around its own two pins, and must keep out of the zones of pins not
//! yet visited so it never seals them off. Pins themselves are never
//! blocked, but a pin is only enterable as the goal of its own leg.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Cell, Rect, Side};
use crate::model::{BlockId, Layout, Pin, RoutePath};

const STATIC: u8 = 1;
const BUFFER: u8 = 2;
const OCCUPIED: u8 = 4;
const PIN: u8 = 8;

/// Obstacles for one routing attempt over a bounded window of the grid.
#[derive(Debug, Clone)]
pub struct RoutingState {
    bounds: Rect,
    flags: Vec<u8>,
    lane: Vec<u8>,
    origin: Cell,
}

impl RoutingState {
    pub fn new(bounds: Rect, origin: Cell) -> Self {
        let n = bounds.area() as usize;
        RoutingState { bounds, flags: vec![0; n], lane: vec![0; n], origin }
    }

    /// Block bodies are static obstacles; every block pin is marked.
    pub fn from_layout(layout: &Layout, bounds: Rect, origin: Cell) -> Self {
        let mut state = RoutingState::new(bounds, origin);
        for b in layout.blocks() {
            for c in b.rect.cells() {
                state.set(c, STATIC);
            }
        }
        state.lane = lane_costs(layout, bounds);
        for b in layout.blocks() {
            if let Ok(p) = b.pin_cell() {
                state.mark_pin(p);
            }
        }
        state
    }

    /// Preference cost of routing through `c`; zero outside port lanes.
    pub fn lane_cost(&self, c: Cell) -> u32 {
        self.index(c).map_or(0, |i| u32::from(self.lane[i]))
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn origin(&self) -> Cell {
        self.origin
    }

    fn index(&self, c: Cell) -> Option<usize> {
        self.bounds
            .contains(c)
            .then(|| ((c.y - self.bounds.y) * self.bounds.w + (c.x - self.bounds.x)) as usize)
    }

    fn flags(&self, c: Cell) -> u8 {
        self.index(c).map_or(0, |i| self.flags[i])
    }

    fn set(&mut self, c: Cell, flag: u8) {
        if let Some(i) = self.index(c) {
            self.flags[i] |= flag;
        }
    }

    pub fn block_static(&mut self, c: Cell) {
        self.set(c, STATIC);
    }

    /// Buffer cells are dynamic obstacles; pins are exempt.
    pub fn add_buffer(&mut self, c: Cell) {
        if !self.is_pin(c) {
            self.set(c, BUFFER);
        }
    }

    pub fn occupy(&mut self, c: Cell) {
        self.set(c, OCCUPIED);
    }

    pub fn mark_pin(&mut self, c: Cell) {
        self.set(c, PIN);
    }

    pub fn is_static(&self, c: Cell) -> bool {
        self.flags(c) & STATIC != 0
    }

    pub fn is_buffer(&self, c: Cell) -> bool {
        self.flags(c) & BUFFER != 0
    }

    pub fn is_pin(&self, c: Cell) -> bool {
        self.flags(c) & PIN != 0
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.flags(c) & OCCUPIED != 0
    }

    /// Static or buffer cell that is not a pin.
    pub fn is_blocked(&self, c: Cell) -> bool {
        let f = self.flags(c);
        f & (STATIC | BUFFER) != 0 && f & PIN == 0
    }

    /// Some unvisited (pin, not occupied) cell lies within `spacing` of `c`.
    pub fn near_pending_pin(&self, c: Cell, spacing: i64) -> bool {
        (-spacing..=spacing).any(|dy| {
            (-spacing..=spacing).any(|dx| self.flags(c.translate(dx, dy)) & (PIN | OCCUPIED) == PIN)
        })
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.bounds.contains(c) && !self.is_blocked(c) && !self.is_occupied(c)
    }
}

/// Soft preferences that keep room for later legs. Lanes in front of a port
/// cost more the closer they are to the body, and any cell within
/// `spacing + 1` of a block costs more the closer it is, so a leg leaves a
/// lane plus spacing free between itself and the wall when it can.
fn lane_costs(layout: &Layout, bounds: Rect) -> Vec<u8> {
    let reach = layout.grid.spacing + 2;
    let depth = layout.grid.port_clearance();
    let (w, n) = (bounds.w, bounds.area() as usize);
    let index = |c: Cell| bounds.contains(c).then(|| ((c.y - bounds.y) * w + (c.x - bounds.x)) as usize);
    let mut lane = vec![0u32; n];
    let mut wall = vec![0u32; n];
    for b in layout.blocks() {
        let r = &b.rect;
        for d in 0..depth {
            let band = match b.port.side {
                Side::North => Rect::new(r.x, r.y1() + d, r.w, 1),
                Side::South => Rect::new(r.x, r.y - 1 - d, r.w, 1),
                Side::East => Rect::new(r.x1() + d, r.y, 1, r.h),
                Side::West => Rect::new(r.x - 1 - d, r.y, 1, r.h),
            };
            for i in band.cells().filter_map(index) {
                lane[i] = lane[i].max(2 * (depth - 1 - d) as u32);
            }
        }
        // Chebyshev rings around the body, nearest ring most expensive.
        for d in 1..reach {
            let ring = r.grow(d);
            let cost = (reach - d) as u32;
            for c in ring.cells().filter(|c| !r.grow(d - 1).contains(*c)) {
                if let Some(i) = index(c) {
                    wall[i] = wall[i].max(cost);
                }
            }
        }
    }
    lane.iter().zip(&wall).map(|(a, b)| (a + b).min(u32::from(u8::MAX)) as u8).collect()
}

/// Shortest 4-connected path from `start` to `goal` through cells accepted
/// by `passable`, using the Manhattan heuristic. Among shortest paths the one
/// with fewest bends wins. `start` itself is never tested.
pub fn astar_with(start: Cell, goal: Cell, bounds: Rect, passable: impl Fn(Cell) -> bool) -> Option<Vec<Cell>> {
    astar_weighted(start, goal, bounds, passable, |_| 0)
}

/// Like [`astar_with`], but among shortest paths prefers the lowest summed
/// `penalty` over entered cells before counting bends.
pub fn astar_weighted(
    start: Cell,
    goal: Cell,
    bounds: Rect,
    passable: impl Fn(Cell) -> bool,
    penalty: impl Fn(Cell) -> u32,
) -> Option<Vec<Cell>> {
    if !bounds.contains(start) || !bounds.contains(goal) {
        return None;
    }
    if start == goal {
        return Some(vec![start]);
    }
    // Search states are (cell, heading). Cost packs length, penalty and bends
    // into one integer, most significant first.
    const STEP: u64 = 1 << 40;
    const PENALTY: u64 = 1 << 20;
    const NONE: u32 = u32::MAX;
    let idx = |c: Cell| ((c.y - bounds.y) * bounds.w + (c.x - bounds.x)) as usize;
    let cell_at = |i: usize| Cell::new(bounds.x + (i as i64 % bounds.w), bounds.y + (i as i64 / bounds.w));
    let h = |c: Cell| c.manhattan(goal) as u64 * STEP;
    let n = bounds.area() as usize * 4;
    let mut g = vec![u64::MAX; n];
    let mut parent = vec![NONE; n];
    let mut open = BinaryHeap::new();

    let s = idx(start);
    for d in 0..4 {
        g[s * 4 + d] = 0;
    }
    // Ties on f prefer deeper states.
    open.push(Reverse((h(start), Reverse(0u64), s * 4, true)));
    let target = idx(goal);

    while let Some(Reverse((_, Reverse(gc), state, fresh))) = open.pop() {
        if gc > g[state] {
            continue;
        }
        let (i, heading) = (state / 4, state % 4);
        if i == target {
            let mut path = vec![goal];
            let mut cur = state;
            while parent[cur] != NONE {
                cur = parent[cur] as usize;
                path.push(cell_at(cur / 4));
            }
            path.reverse();
            return Some(path);
        }
        let here = cell_at(i);
        for (d, nb) in here.neighbors4().into_iter().enumerate() {
            if !bounds.contains(nb) || !passable(nb) {
                continue;
            }
            let bend = u64::from(!fresh && d != heading);
            let next = idx(nb) * 4 + d;
            let ng = gc + STEP + u64::from(penalty(nb)) * PENALTY + bend;
            if ng < g[next] {
                g[next] = ng;
                parent[next] = state as u32;
                open.push(Reverse((ng + h(nb), Reverse(ng), next, false)));
            }
        }
    }
    None
}

/// A* over `state`: avoids blocked and occupied cells. The goal may be a pin
/// or occupied, but never a block body.
pub fn astar(start: Cell, goal: Cell, state: &RoutingState, bounds: Rect) -> Option<RoutePath> {
    let cells = astar_with(start, goal, bounds, |c| {
        if c == goal {
            !state.is_static(c)
        } else {
            state.is_free(c)
        }
    })?;
    Some(RoutePath {
        cells,
        endpoints: (Pin { cell: start, owner: None }, Pin { cell: goal, owner: None }),
    })
}

/// Pin ordering heuristics, tried in this order across routing attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    MstDfs,
    GreedyNearest,
    RandomShuffle,
}

impl OrderingStrategy {
    /// Strategy for 1-based attempt `k`.
    pub fn for_attempt(k: usize) -> Self {
        match k {
            0 | 1 => OrderingStrategy::MstDfs,
            2 => OrderingStrategy::GreedyNearest,
            _ => OrderingStrategy::RandomShuffle,
        }
    }
}

/// Visit order over `points`, where index 0 is the origin. Always starts with 0.
pub fn order_indices<R: Rng + ?Sized>(points: &[Cell], strategy: OrderingStrategy, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    if n <= 1 {
        return (0..n).collect();
    }
    match strategy {
        OrderingStrategy::MstDfs => mst_dfs_order(points),
        OrderingStrategy::GreedyNearest => {
            let mut visited = vec![false; n];
            visited[0] = true;
            let mut order = vec![0];
            let mut cur = 0;
            for _ in 1..n {
                let next = (0..n)
                    .filter(|&j| !visited[j])
                    .min_by_key(|&j| (points[cur].manhattan(points[j]), j))
                    .expect("unvisited point remains");
                visited[next] = true;
                order.push(next);
                cur = next;
            }
            order
        }
        OrderingStrategy::RandomShuffle => {
            let mut rest: Vec<usize> = (1..n).collect();
            rest.shuffle(rng);
            std::iter::once(0).chain(rest).collect()
        }
    }
}

/// Prim's MST over the complete Manhattan graph (ties to the lower index),
/// then DFS preorder from index 0 visiting nearer children first.
fn mst_dfs_order(points: &[Cell]) -> Vec<usize> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut key = vec![i64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    key[0] = 0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by_key(|&v| (key[v], v))
            .expect("vertex remains");
        in_tree[u] = true;
        for v in 0..n {
            if !in_tree[v] {
                let d = points[u].manhattan(points[v]);
                if d < key[v] {
                    key[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        children[parent[v]].push(v);
    }
    for (u, kids) in children.iter_mut().enumerate() {
        kids.sort_by_key(|&v| (points[u].manhattan(points[v]), v));
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        order.push(u);
        stack.extend(children[u].iter().rev());
    }
    order
}

/// Pins in visiting order, origin first.
pub fn order_pins<R: Rng + ?Sized>(pins: &[Cell], origin: Cell, strategy: OrderingStrategy, rng: &mut R) -> Vec<Cell> {
    let points: Vec<Cell> = std::iter::once(origin).chain(pins.iter().copied()).collect();
    order_indices(&points, strategy, rng).into_iter().map(|i| points[i]).collect()
}

/// Cells within Chebyshev distance `spacing` of the path, excluding path
/// cells, block bodies, pins, and anything outside the state bounds.
pub fn buffer_zone(path: &RoutePath, spacing: i64, state: &RoutingState) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    if spacing <= 0 {
        return out;
    }
    let on_path: BTreeSet<Cell> = path.cells.iter().copied().collect();
    for c in &path.cells {
        for dy in -spacing..=spacing {
            for dx in -spacing..=spacing {
                let n = c.translate(dx, dy);
                if on_path.contains(&n) || !state.bounds().contains(n) || state.is_static(n) || state.is_pin(n) {
                    continue;
                }
                out.insert(n);
            }
        }
    }
    out
}

/// Successful routing result.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    pub paths: Vec<RoutePath>,
    /// 1-based attempt that succeeded.
    pub attempt: usize,
    pub strategy: OrderingStrategy,
}

/// Pins of every block, controller first when present.
pub fn layout_pins(layout: &Layout) -> Option<Vec<(BlockId, Cell)>> {
    layout.blocks().map(|b| b.pin_cell().ok().map(|c| (b.id, c))).collect()
}

/// Routing window: the block bounding box grown by `spacing + 1` on every side.
pub fn routing_bounds(layout: &Layout) -> Option<Rect> {
    let mut bb = Rect::new(0, 0, 0, 0);
    for b in layout.blocks() {
        bb = bb.union(&b.rect);
    }
    (!bb.is_empty()).then(|| bb.grow(layout.grid.spacing + 1))
}

/// Route one leg from `from` to `to` over the current state.
fn route_leg(state: &RoutingState, from: Cell, to: Cell, spacing: i64) -> Option<Vec<Cell>> {
    let passable = |c: Cell| {
        if c == to {
            return true;
        }
        if state.is_static(c) || state.is_occupied(c) || state.is_pin(c) {
            return false;
        }
        if c.chebyshev(from) <= spacing || c.chebyshev(to) <= spacing {
            return true;
        }
        !state.is_buffer(c) && !state.near_pending_pin(c, spacing)
    };
    astar_weighted(from, to, state.bounds, passable, |c| state.lane_cost(c))
}

fn commit(state: &mut RoutingState, path: &RoutePath, spacing: i64) {
    for &c in &path.cells {
        state.occupy(c);
    }
    for c in buffer_zone(path, spacing, state) {
        state.add_buffer(c);
    }
}

/// Whether every cell in `targets` can still be reached from `head` through
/// cells a later leg could use.
fn all_reachable(state: &RoutingState, head: Cell, targets: &[Cell], spacing: i64) -> bool {
    let bounds = state.bounds;
    let mut seen = vec![false; bounds.area() as usize];
    let mut left: BTreeSet<Cell> = targets.iter().copied().collect();
    let near_target = |c: Cell| targets.iter().any(|t| t.chebyshev(c) <= spacing);
    let mut queue = std::collections::VecDeque::from([head]);
    seen[state.index(head).expect("head in bounds")] = true;
    while let Some(c) = queue.pop_front() {
        for nb in c.neighbors4() {
            let Some(i) = state.index(nb) else { continue };
            if seen[i] {
                continue;
            }
            seen[i] = true;
            if left.remove(&nb) {
                if left.is_empty() {
                    return true;
                }
                continue;
            }
            let f = state.flags[i];
            if f & (STATIC | OCCUPIED | PIN) != 0 {
                continue;
            }
            if f & BUFFER != 0 && nb.chebyshev(head) > spacing && !near_target(nb) {
                continue;
            }
            queue.push_back(nb);
        }
    }
    left.is_empty()
}

fn leg_path(pins: &[(BlockId, Cell)], a: usize, b: usize, cells: Vec<Cell>) -> RoutePath {
    let (from_id, from) = pins[a];
    let (to_id, to) = pins[b];
    RoutePath { cells, endpoints: (Pin { cell: from, owner: Some(from_id) }, Pin { cell: to, owner: Some(to_id) }) }
}

fn chain_state(layout: &Layout, pins: &[(BlockId, Cell)], origin: usize) -> Option<RoutingState> {
    let bounds = routing_bounds(layout)?;
    let state = RoutingState::from_layout(layout, bounds, pins.get(origin)?.1);
    if pins.iter().any(|&(_, c)| state.is_static(c) || !bounds.contains(c)) {
        return None;
    }
    Some(state)
}

/// Route the daisy chain visiting `pins[order[0]], pins[order[1]], ...` exactly.
pub fn route_in_order(layout: &Layout, pins: &[(BlockId, Cell)], order: &[usize]) -> Option<Vec<RoutePath>> {
    let spacing = layout.grid.spacing;
    let mut state = chain_state(layout, pins, *order.first()?)?;
    let mut paths = Vec::with_capacity(order.len().saturating_sub(1));
    for leg in order.windows(2) {
        let cells = route_leg(&state, pins[leg[0]].1, pins[leg[1]].1, spacing)?;
        let path = leg_path(pins, leg[0], leg[1], cells);
        commit(&mut state, &path, spacing);
        paths.push(path);
    }
    Some(paths)
}

/// Route the daisy chain treating `order` as a preference. The next pin is the
/// earliest unvisited one in `order` whose leg routes and leaves every other
/// unvisited pin reachable. Returns the visit order actually used.
pub fn route_with_lookahead(
    layout: &Layout,
    pins: &[(BlockId, Cell)],
    order: &[usize],
) -> Option<(Vec<usize>, Vec<RoutePath>)> {
    let spacing = layout.grid.spacing;
    let mut head = *order.first()?;
    let mut state = chain_state(layout, pins, head)?;
    let mut pending: Vec<usize> = order[1..].to_vec();
    let mut visited = vec![head];
    let mut paths = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let mut chosen = None;
        for (k, &next) in pending.iter().enumerate() {
            let Some(cells) = route_leg(&state, pins[head].1, pins[next].1, spacing) else { continue };
            let path = leg_path(pins, head, next, cells);
            let mut trial = state.clone();
            commit(&mut trial, &path, spacing);
            let rest: Vec<Cell> = pending.iter().filter(|&&p| p != next).map(|&p| pins[p].1).collect();
            if all_reachable(&trial, pins[next].1, &rest, spacing) {
                chosen = Some((k, path, trial));
                break;
            }
        }
        let (k, path, trial) = chosen?;
        head = pending.remove(k);
        visited.push(head);
        state = trial;
        paths.push(path);
    }
    Some((visited, paths))
}

/// Up to `attempts` daisy-chain routings following the ordering fallback
/// ladder; the first attempt whose legs all succeed wins.
pub fn route_all<R: Rng + ?Sized>(layout: &Layout, attempts: usize, rng: &mut R) -> Option<Routing> {
    let pins = layout_pins(layout)?;
    if pins.is_empty() {
        return None;
    }
    let points: Vec<Cell> = pins.iter().map(|p| p.1).collect();
    for attempt in 1..=attempts {
        let strategy = OrderingStrategy::for_attempt(attempt);
        let order = order_indices(&points, strategy, rng);
        if let Some((_, paths)) = route_with_lookahead(layout, &pins, &order) {
            return Some(Routing { paths, attempt, strategy });
        }
    }
    None
}
