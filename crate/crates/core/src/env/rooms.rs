//! Multi-room gridworld with Minigrid-style dynamics and enumerated missions.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::snapshot::{config_digest, EnvState};
use super::{ActionId, Environment, ObsSpec, Observation, StepOutcome};
use crate::error::{Error, Result};

pub const ROOMS_ACTIONS: [&str; 7] = ["left", "right", "forward", "pickup", "drop", "toggle", "done"];
const LEFT: ActionId = 0;
const RIGHT: ActionId = 1;
const FORWARD: ActionId = 2;
const PICKUP: ActionId = 3;
const DROP: ActionId = 4;
const TOGGLE: ActionId = 5;

const SNAPSHOT_KIND: u32 = 0x524f_4f4d;
const VIEW: usize = 5;
const COLORS: usize = 6;
const KINDS: usize = 4;
const OBJECT_CODES: usize = KINDS * COLORS;
/// 0 unseen, 1 floor, 2 wall, 3 open door, 4 closed door, then objects.
const VIEW_CODES: usize = 5 + OBJECT_CODES;
const SINGLE_MISSIONS: usize = 2 * OBJECT_CODES;
pub const MISSION_COUNT: usize = SINGLE_MISSIONS + OBJECT_CODES * OBJECT_CODES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Key,
    Ball,
    Box,
    Goal,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Key, Kind::Ball, Kind::Box, Kind::Goal];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Key => "key",
            Kind::Ball => "ball",
            Kind::Box => "box",
            Kind::Goal => "goal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Facing direction; east is +x, south is +y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    East,
    South,
    West,
    North,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::South, Dir::West, Dir::North];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Dir::East => (1, 0),
            Dir::South => (0, 1),
            Dir::West => (-1, 0),
            Dir::North => (0, -1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dir::East => "east",
            Dir::South => "south",
            Dir::West => "west",
            Dir::North => "north",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tile {
    Wall,
    Floor,
    Door { open: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target {
    pub kind: Kind,
    pub color: Color,
}

impl Target {
    fn code(self) -> usize {
        self.kind as usize * COLORS + self.color as usize
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color.name(), self.kind.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mission {
    GoTo(Target),
    Pickup(Target),
    /// Two-stage compositional mission.
    PickupThenGoTo(Target, Target),
}

impl Mission {
    /// Enumerated mission identifier in `0..MISSION_COUNT`.
    pub fn id(&self) -> usize {
        match *self {
            Mission::GoTo(t) => t.code(),
            Mission::Pickup(t) => OBJECT_CODES + t.code(),
            Mission::PickupThenGoTo(a, b) => SINGLE_MISSIONS + a.code() * OBJECT_CODES + b.code(),
        }
    }

    fn stage_count(&self) -> usize {
        match self {
            Mission::PickupThenGoTo(..) => 2,
            _ => 1,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let target = |c: &str, k: &str| -> Option<Target> {
            Some(Target {
                color: Color::parse(c)?,
                kind: Kind::parse(k)?,
            })
        };
        match words.as_slice() {
            ["goto", c, k] => Some(Mission::GoTo(target(c, k)?)),
            ["pickup", c, k] => Some(Mission::Pickup(target(c, k)?)),
            ["pickup", c1, k1, "then", "goto", c2, k2] => {
                Some(Mission::PickupThenGoTo(target(c1, k1)?, target(c2, k2)?))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Mission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mission::GoTo(t) => write!(f, "goto {t}"),
            Mission::Pickup(t) => write!(f, "pickup {t}"),
            Mission::PickupThenGoTo(a, b) => write!(f, "pickup {a} then goto {b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ObjectSpec {
    pub kind: Kind,
    pub color: Color,
    pub cell: (usize, usize),
}

/// Validated rooms layout. Construct with [`RoomsConfig::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoomsConfig {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub tiles: Vec<Tile>,
    pub objects: Vec<ObjectSpec>,
    pub mission: Mission,
    pub horizon: usize,
    pub start_cell: (usize, usize),
    /// `None` draws the start direction from the environment RNG on reset.
    pub start_dir: Option<Dir>,
    /// Success at step `t` pays `1 - time_penalty * t / horizon`.
    pub time_penalty: f64,
    room_of: Vec<Option<u32>>,
    room_count: usize,
    hash: u64,
}

impl RoomsConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        width: usize,
        height: usize,
        tiles: Vec<Tile>,
        objects: Vec<ObjectSpec>,
        mission: Mission,
        horizon: usize,
        start_cell: (usize, usize),
        start_dir: Option<Dir>,
        time_penalty: f64,
    ) -> Result<Self> {
        if tiles.len() != width * height {
            return Err(Error::Config(format!(
                "layout has {} cells, expected {width}x{height}",
                tiles.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&time_penalty) {
            return Err(Error::Config("time penalty must lie in [0, 1]".into()));
        }
        let mut cfg = Self {
            name: name.into(),
            width,
            height,
            tiles,
            objects,
            mission,
            horizon,
            start_cell,
            start_dir,
            time_penalty,
            room_of: Vec::new(),
            room_count: 0,
            hash: 0,
        };
        cfg.label_rooms();
        cfg.validate()?;
        cfg.hash = config_digest(&super::text::format_rooms_configs(std::slice::from_ref(&cfg)));
        let env = RoomsEnv::new(cfg.clone(), 0);
        let reachable = Dir::ALL.iter().all(|&d| {
            let mut e = env.clone();
            e.state.dir = d;
            e.plan().is_some()
        });
        if !reachable {
            return Err(Error::Unsatisfiable {
                mission: cfg.mission.to_string(),
                check: format!(
                    "breadth-first search from start {:?} never completes the mission",
                    cfg.start_cell
                ),
            });
        }
        Ok(cfg)
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn tile(&self, x: usize, y: usize) -> Tile {
        self.tiles[self.idx(x, y)]
    }

    pub fn room_of(&self, cell: (usize, usize)) -> Option<u32> {
        self.room_of[self.idx(cell.0, cell.1)]
    }

    pub fn room_count(&self) -> usize {
        self.room_count
    }

    /// Floor cells of `room` that start free of objects.
    pub fn free_cells(&self, room: u32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.room_of((x, y)) == Some(room)
                    && !self.objects.iter().any(|o| o.cell == (x, y))
                {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn config_hash(&self) -> u64 {
        self.hash
    }

    fn label_rooms(&mut self) {
        let mut room_of = vec![None; self.tiles.len()];
        let mut next = 0u32;
        for start in 0..self.tiles.len() {
            if self.tiles[start] != Tile::Floor || room_of[start].is_some() {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            room_of[start] = Some(next);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % self.width, i / self.width);
                for (nx, ny) in neighbours(x, y, self.width, self.height) {
                    let j = self.idx(nx, ny);
                    if self.tiles[j] == Tile::Floor && room_of[j].is_none() {
                        room_of[j] = Some(next);
                        queue.push_back(j);
                    }
                }
            }
            next += 1;
        }
        self.room_of = room_of;
        self.room_count = next as usize;
    }

    fn validate(&self) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                if let Tile::Door { .. } = self.tile(x, y) {
                    let mut rooms: Vec<u32> = neighbours(x, y, self.width, self.height)
                        .filter_map(|c| self.room_of(c))
                        .collect();
                    rooms.sort_unstable();
                    rooms.dedup();
                    if rooms.len() != 2 {
                        return Err(Error::Config(format!(
                            "door at ({x}, {y}) touches {} rooms, expected exactly 2",
                            rooms.len()
                        )));
                    }
                }
            }
        }
        let (sx, sy) = self.start_cell;
        if sx >= self.width || sy >= self.height || self.tile(sx, sy) != Tile::Floor {
            return Err(Error::Config(format!("start cell {:?} is not floor", self.start_cell)));
        }
        for o in &self.objects {
            let (x, y) = o.cell;
            if x >= self.width || y >= self.height || self.tile(x, y) != Tile::Floor {
                return Err(Error::Config(format!("object at {:?} is not on floor", o.cell)));
            }
            if o.cell == self.start_cell {
                return Err(Error::Config(format!("object at {:?} overlaps the start", o.cell)));
            }
        }
        let mut cells: Vec<_> = self.objects.iter().map(|o| o.cell).collect();
        cells.sort_unstable();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(Error::Config("two objects share a cell".into()));
        }
        let present = |t: Target| self.objects.iter().any(|o| o.kind == t.kind && o.color == t.color);
        let targets: Vec<(Target, bool)> = match self.mission {
            Mission::GoTo(t) => vec![(t, false)],
            Mission::Pickup(t) => vec![(t, true)],
            Mission::PickupThenGoTo(a, b) => vec![(a, true), (b, false)],
        };
        for (t, pick) in targets {
            if !present(t) {
                return Err(Error::Unsatisfiable {
                    mission: self.mission.to_string(),
                    check: format!("no {t} in the layout"),
                });
            }
            if pick && t.kind == Kind::Goal {
                return Err(Error::Unsatisfiable {
                    mission: self.mission.to_string(),
                    check: "goal squares cannot be picked up".into(),
                });
            }
        }
        Ok(())
    }
}

fn neighbours(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let (x, y) = (x as i64, y as i64);
    [(1, 0), (-1, 0), (0, 1), (0, -1)]
        .into_iter()
        .map(move |(dx, dy)| (x + dx, y + dy))
        .filter(move |&(nx, ny)| nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
        .map(|(nx, ny)| (nx as usize, ny as usize))
}

/// Reward for completing the mission at step `t` of a `horizon`-step episode.
pub fn success_reward(t: usize, horizon: usize, time_penalty: f64) -> f64 {
    1.0 - time_penalty * t as f64 / horizon as f64
}

/// Mutable part of the environment. Everything needed for exact restore.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct RoomsState {
    pos: (usize, usize),
    dir: Dir,
    carried: Option<usize>,
    /// `None` while carried.
    object_cells: Vec<Option<(usize, usize)>>,
    doors_open: Vec<bool>,
    stage: usize,
    steps: usize,
    done: bool,
    success: bool,
}

impl RoomsState {
    /// Planner key: the state minus the step counter.
    fn plan_key(&self) -> RoomsState {
        let mut k = self.clone();
        k.steps = 0;
        k
    }
}

#[derive(Clone, Debug)]
pub struct RoomsEnv {
    config: RoomsConfig,
    door_cells: Vec<(usize, usize)>,
    state: RoomsState,
    rng: ChaCha8Rng,
    seed: u64,
    /// Draws taken from `rng`; replayed on restore.
    rng_draws: u64,
}

impl RoomsEnv {
    pub fn new(config: RoomsConfig, seed: u64) -> Self {
        let mut door_cells = Vec::new();
        for y in 0..config.height {
            for x in 0..config.width {
                if let Tile::Door { .. } = config.tile(x, y) {
                    door_cells.push((x, y));
                }
            }
        }
        let state = RoomsState {
            pos: config.start_cell,
            dir: Dir::East,
            carried: None,
            object_cells: Vec::new(),
            doors_open: Vec::new(),
            stage: 0,
            steps: 0,
            done: false,
            success: false,
        };
        let mut env = Self {
            config,
            door_cells,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            rng_draws: 0,
        };
        env.reset();
        env
    }

    pub fn config(&self) -> &RoomsConfig {
        &self.config
    }

    pub fn agent(&self) -> ((usize, usize), Dir) {
        (self.state.pos, self.state.dir)
    }

    /// Move the agent to a fresh episode start at `cell` facing `dir`.
    pub fn place_agent(&mut self, cell: (usize, usize), dir: Dir) -> Result<()> {
        if self.config.tile(cell.0, cell.1) != Tile::Floor || self.object_at(cell).is_some() {
            return Err(Error::Invalid(format!("cell {cell:?} is not free floor")));
        }
        self.reset();
        self.state.pos = cell;
        self.state.dir = dir;
        Ok(())
    }

    fn object_at(&self, cell: (usize, usize)) -> Option<usize> {
        self.state.object_cells.iter().position(|c| *c == Some(cell))
    }

    fn door_index(&self, cell: (usize, usize)) -> Option<usize> {
        self.door_cells.iter().position(|&c| c == cell)
    }

    fn front(&self) -> Option<(usize, usize)> {
        let (dx, dy) = self.state.dir.delta();
        let (x, y) = (self.state.pos.0 as i64 + dx, self.state.pos.1 as i64 + dy);
        (x >= 0 && y >= 0 && (x as usize) < self.config.width && (y as usize) < self.config.height)
            .then_some((x as usize, y as usize))
    }

    fn passable(&self, cell: (usize, usize)) -> bool {
        match self.config.tile(cell.0, cell.1) {
            Tile::Wall => false,
            Tile::Door { .. } => {
                let d = self.door_index(cell).expect("door cell is indexed");
                self.state.doors_open[d]
            }
            Tile::Floor => match self.object_at(cell) {
                Some(o) => self.config.objects[o].kind == Kind::Goal,
                None => true,
            },
        }
    }

    fn matches(&self, obj: usize, t: Target) -> bool {
        let o = &self.config.objects[obj];
        o.kind == t.kind && o.color == t.color
    }

    fn goto_satisfied(&self, t: Target) -> bool {
        if t.kind == Kind::Goal {
            self.object_at(self.state.pos).is_some_and(|o| self.matches(o, t))
        } else {
            self.front()
                .and_then(|c| self.object_at(c))
                .is_some_and(|o| self.matches(o, t))
        }
    }

    fn stage_satisfied(&self) -> bool {
        let carrying = |t: Target| self.state.carried.is_some_and(|o| self.matches(o, t));
        match (self.config.mission, self.state.stage) {
            (Mission::GoTo(t), _) => self.goto_satisfied(t),
            (Mission::Pickup(t), _) => carrying(t),
            (Mission::PickupThenGoTo(a, _), 0) => carrying(a),
            (Mission::PickupThenGoTo(_, b), _) => self.goto_satisfied(b),
        }
    }

    /// Apply `action` to the internal state; returns the success flag.
    fn transition(&mut self, action: ActionId) -> bool {
        match action {
            LEFT => self.state.dir = Dir::from_index(self.state.dir.index() + 3),
            RIGHT => self.state.dir = Dir::from_index(self.state.dir.index() + 1),
            FORWARD => {
                if let Some(f) = self.front().filter(|&f| self.passable(f)) {
                    self.state.pos = f;
                }
            }
            PICKUP => {
                if self.state.carried.is_none() {
                    if let Some(o) = self.front().and_then(|f| self.object_at(f)) {
                        if self.config.objects[o].kind != Kind::Goal {
                            self.state.object_cells[o] = None;
                            self.state.carried = Some(o);
                        }
                    }
                }
            }
            DROP => {
                if let (Some(o), Some(f)) = (self.state.carried, self.front()) {
                    if self.config.tile(f.0, f.1) == Tile::Floor && self.object_at(f).is_none() {
                        self.state.object_cells[o] = Some(f);
                        self.state.carried = None;
                    }
                }
            }
            TOGGLE => {
                if let Some(d) = self.front().and_then(|f| self.door_index(f)) {
                    self.state.doors_open[d] = !self.state.doors_open[d];
                }
            }
            _ => {}
        }
        if self.stage_satisfied() {
            self.state.stage += 1;
            self.state.stage >= self.config.mission.stage_count()
        } else {
            false
        }
    }

    /// Shortest action sequence completing the mission from the current state.
    pub fn plan(&self) -> Option<Vec<ActionId>> {
        if self.state.done {
            return None;
        }
        let start = self.state.clone();
        // Node id -> (parent id, action); node 0 is the start.
        let mut parent: Vec<(usize, ActionId)> = vec![(0, 0)];
        let mut nodes: Vec<RoomsState> = vec![start.clone()];
        let mut seen: HashMap<RoomsState, usize> = HashMap::new();
        seen.insert(start.plan_key(), 0);
        let mut queue = VecDeque::from([0usize]);
        let mut probe = self.clone();
        while let Some(n) = queue.pop_front() {
            for action in 0..ROOMS_ACTIONS.len() {
                probe.state = nodes[n].clone();
                let success = probe.transition(action);
                if success {
                    let mut plan = vec![action];
                    let mut cur = n;
                    while cur != 0 {
                        let (prev, a) = parent[cur];
                        plan.push(a);
                        cur = prev;
                    }
                    plan.reverse();
                    return Some(plan);
                }
                let key = probe.state.plan_key();
                if !seen.contains_key(&key) {
                    let id = nodes.len();
                    seen.insert(key, id);
                    parent.push((n, action));
                    nodes.push(probe.state.clone());
                    queue.push_back(id);
                }
            }
        }
        None
    }

    fn view_code(&self, cell: Option<(usize, usize)>) -> i32 {
        let Some(c) = cell else { return 0 };
        if let Some(o) = self.object_at(c) {
            let spec = &self.config.objects[o];
            return 5 + (spec.kind as usize * COLORS + spec.color as usize) as i32;
        }
        match self.config.tile(c.0, c.1) {
            Tile::Floor => 1,
            Tile::Wall => 2,
            Tile::Door { .. } => {
                if self.state.doors_open[self.door_index(c).unwrap()] {
                    3
                } else {
                    4
                }
            }
        }
    }

    fn encode_fields(&self) -> Vec<i64> {
        let s = &self.state;
        let mut f = vec![
            s.pos.0 as i64,
            s.pos.1 as i64,
            s.dir.index() as i64,
            s.carried.map_or(-1, |o| o as i64),
            s.stage as i64,
            s.steps as i64,
            s.done as i64,
            s.success as i64,
            self.seed as i64,
            self.rng_draws as i64,
        ];
        for c in &s.object_cells {
            match c {
                Some((x, y)) => f.extend([*x as i64, *y as i64]),
                None => f.extend([-1, -1]),
            }
        }
        f.extend(s.doors_open.iter().map(|&o| o as i64));
        f
    }
}

impl Environment for RoomsEnv {
    fn num_actions(&self) -> usize {
        ROOMS_ACTIONS.len()
    }

    fn obs_spec(&self) -> ObsSpec {
        let mut cardinalities = vec![
            self.config.width,
            self.config.height,
            4,
            1 + OBJECT_CODES,
            MISSION_COUNT,
            2,
        ];
        cardinalities.extend(std::iter::repeat_n(VIEW_CODES, VIEW * VIEW));
        ObsSpec { cardinalities }
    }

    fn observation(&self) -> Observation {
        let s = &self.state;
        let carried = s.carried.map_or(0, |o| {
            let spec = &self.config.objects[o];
            1 + (spec.kind as usize * COLORS + spec.color as usize) as i32
        });
        let mut v = vec![
            s.pos.0 as i32,
            s.pos.1 as i32,
            s.dir.index() as i32,
            carried,
            self.config.mission.id() as i32,
            s.stage.min(1) as i32,
        ];
        let fwd = s.dir.delta();
        let right = Dir::from_index(s.dir.index() + 1).delta();
        for row in 0..VIEW {
            for col in 0..VIEW {
                let ahead = (VIEW - 1 - row) as i64;
                let lateral = col as i64 - (VIEW / 2) as i64;
                let x = s.pos.0 as i64 + ahead * fwd.0 + lateral * right.0;
                let y = s.pos.1 as i64 + ahead * fwd.1 + lateral * right.1;
                let cell = (x >= 0
                    && y >= 0
                    && (x as usize) < self.config.width
                    && (y as usize) < self.config.height)
                    .then_some((x as usize, y as usize));
                v.push(self.view_code(cell));
            }
        }
        Observation(v)
    }

    fn region(&self) -> Option<u32> {
        self.config.room_of(self.state.pos)
    }

    fn is_terminal(&self) -> bool {
        self.state.done
    }

    fn is_success(&self) -> bool {
        self.state.success
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn elapsed(&self) -> usize {
        self.state.steps
    }

    fn reset_with_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng_draws = 0;
        self.reset();
    }

    fn reset(&mut self) {
        let dir = match self.config.start_dir {
            Some(d) => d,
            None => {
                self.rng_draws += 1;
                Dir::from_index(self.rng.gen_range(0..4))
            }
        };
        self.state = RoomsState {
            pos: self.config.start_cell,
            dir,
            carried: None,
            object_cells: self.config.objects.iter().map(|o| Some(o.cell)).collect(),
            doors_open: self
                .door_cells
                .iter()
                .map(|&(x, y)| matches!(self.config.tile(x, y), Tile::Door { open: true }))
                .collect(),
            stage: 0,
            steps: 0,
            done: false,
            success: false,
        };
    }

    fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::StepAfterTerminal);
        }
        if action >= ROOMS_ACTIONS.len() {
            return Err(Error::Invalid(format!("action {action} outside the rooms action set")));
        }
        let t = self.state.steps;
        let success = self.transition(action);
        self.state.steps += 1;
        let mut reward = 0.0;
        if success {
            reward = success_reward(t, self.config.horizon, self.config.time_penalty);
            self.state.done = true;
            self.state.success = true;
        } else if self.state.steps >= self.config.horizon {
            self.state.done = true;
        }
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            terminal: self.state.done,
            region: self.region(),
        })
    }

    fn snapshot(&self) -> EnvState {
        EnvState::encode(SNAPSHOT_KIND, self.config.hash, &self.encode_fields())
    }

    fn restore(&mut self, state: &EnvState) -> Result<()> {
        let f = state.decode(SNAPSHOT_KIND, self.config.hash)?;
        let n_obj = self.config.objects.len();
        let n_door = self.door_cells.len();
        if f.len() != 10 + 2 * n_obj + n_door {
            return Err(Error::MalformedSnapshot(format!("unexpected field count {}", f.len())));
        }
        let cell = |x: i64, y: i64| -> Result<Option<(usize, usize)>> {
            match (x, y) {
                (-1, -1) => Ok(None),
                (x, y) if x >= 0 && y >= 0 => Ok(Some((x as usize, y as usize))),
                _ => Err(Error::MalformedSnapshot("bad object cell".into())),
            }
        };
        let seed = f[8] as u64;
        let draws = f[9] as u64;
        if seed != self.seed || draws != self.rng_draws {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..draws {
                let _: usize = self.rng.gen_range(0..4);
            }
            self.seed = seed;
            self.rng_draws = draws;
        }
        self.state = RoomsState {
            pos: (f[0] as usize, f[1] as usize),
            dir: Dir::from_index(f[2] as usize),
            carried: (f[3] >= 0).then_some(f[3] as usize),
            stage: f[4] as usize,
            steps: f[5] as usize,
            done: f[6] != 0,
            success: f[7] != 0,
            object_cells: (0..n_obj)
                .map(|i| cell(f[10 + 2 * i], f[11 + 2 * i]))
                .collect::<Result<_>>()?,
            doors_open: f[10 + 2 * n_obj..].iter().map(|&d| d != 0).collect(),
        };
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::two_room_config;

    fn layout(rows: &[&str]) -> (usize, usize, Vec<Tile>) {
        let h = rows.len();
        let w = rows[0].len();
        let tiles = rows
            .iter()
            .flat_map(|r| {
                r.chars().map(|c| match c {
                    '#' => Tile::Wall,
                    'D' => Tile::Door { open: true },
                    'd' => Tile::Door { open: false },
                    _ => Tile::Floor,
                })
            })
            .collect();
        (w, h, tiles)
    }

    fn two_rooms(mission: Mission) -> Result<RoomsConfig> {
        let (w, h, tiles) = layout(&[
            "########",
            "#......#",
            "#......#",
            "#......#",
            "###D####",
            "#......#",
            "#......#",
            "########",
        ]);
        RoomsConfig::new(
            "t",
            w,
            h,
            tiles,
            vec![
                ObjectSpec { kind: Kind::Ball, color: Color::Red, cell: (5, 6) },
                ObjectSpec { kind: Kind::Key, color: Color::Blue, cell: (2, 2) },
            ],
            mission,
            100,
            (1, 1),
            Some(Dir::East),
            0.5,
        )
    }

    fn red_ball() -> Target {
        Target { kind: Kind::Ball, color: Color::Red }
    }

    #[test]
    fn two_room_layout_passes_reachability() {
        let cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        assert_eq!(cfg.room_count(), 2);
    }

    #[test]
    fn same_seed_same_first_observation() {
        let cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        let a = RoomsEnv::new(cfg.clone(), 3).observation();
        let b = RoomsEnv::new(cfg, 3).observation();
        assert_eq!(a, b);
    }

    #[test]
    fn absent_target_is_rejected() {
        let green_box = Target { kind: Kind::Box, color: Color::Green };
        let err = two_rooms(Mission::GoTo(green_box)).unwrap_err();
        assert!(matches!(err, Error::Unsatisfiable { .. }), "{err}");
    }

    #[test]
    fn walled_off_target_is_unsatisfiable() {
        let (w, h, tiles) = layout(&["#####", "#...#", "#####", "#...#", "#####"]);
        let err = RoomsConfig::new(
            "sealed",
            w,
            h,
            tiles,
            vec![ObjectSpec { kind: Kind::Ball, color: Color::Red, cell: (2, 3) }],
            Mission::GoTo(red_ball()),
            50,
            (1, 1),
            Some(Dir::East),
            0.5,
        )
        .unwrap_err();
        match err {
            Error::Unsatisfiable { check, .. } => assert!(check.contains("breadth-first")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn door_must_join_two_rooms() {
        let (w, h, tiles) = layout(&["#####", "#.D.#", "#####"]);
        let err = RoomsConfig::new(
            "one-room-door",
            w,
            h,
            tiles,
            vec![ObjectSpec { kind: Kind::Goal, color: Color::Green, cell: (3, 1) }],
            Mission::GoTo(Target { kind: Kind::Goal, color: Color::Green }),
            10,
            (1, 1),
            Some(Dir::East),
            0.5,
        );
        // (2,1) joins (1,1) and (3,1): two distinct rooms, so this is valid.
        assert!(err.is_ok());
        let (w, h, tiles) = layout(&["#####", "#.D.#", "#...#", "#####"]);
        let err = RoomsConfig::new(
            "bad",
            w,
            h,
            tiles,
            vec![ObjectSpec { kind: Kind::Goal, color: Color::Green, cell: (3, 1) }],
            Mission::GoTo(Target { kind: Kind::Goal, color: Color::Green }),
            10,
            (1, 1),
            Some(Dir::East),
            0.5,
        )
        .unwrap_err();
        assert!(err.to_string().contains("door"), "{err}");
    }

    #[test]
    fn reward_schedule_endpoints() {
        assert_eq!(success_reward(0, 100, 0.5), 1.0);
        assert_eq!(success_reward(100, 100, 0.5), 0.5);
        assert!((success_reward(50, 100, 0.9) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn planner_solves_and_rewards_immediate_success() {
        let cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        let mut env = RoomsEnv::new(cfg, 0);
        let plan = env.plan().unwrap();
        let mut last = None;
        for (t, &a) in plan.iter().enumerate() {
            let out = env.step(a).unwrap();
            assert_eq!(out.terminal, t + 1 == plan.len());
            last = Some((t, out));
        }
        let (t, out) = last.unwrap();
        assert!(env.is_success());
        assert_eq!(out.reward, success_reward(t, 100, 0.5));
        assert!(matches!(env.step(0), Err(Error::StepAfterTerminal)));
    }

    #[test]
    fn unsuccessful_episode_pays_zero_and_ends_at_horizon() {
        let cfg = two_room_config(0, 5).unwrap();
        let mut env = RoomsEnv::new(cfg, 0);
        let mut total = 0.0;
        let mut steps = 0;
        while !env.is_terminal() {
            total += env.step(LEFT).unwrap().reward;
            steps += 1;
        }
        assert_eq!(total, 0.0);
        assert_eq!(steps, 5);
    }

    #[test]
    fn pickup_then_goto_needs_both_stages() {
        let blue_key = Target { kind: Kind::Key, color: Color::Blue };
        let cfg = two_rooms(Mission::PickupThenGoTo(blue_key, red_ball())).unwrap();
        let mut env = RoomsEnv::new(cfg, 0);
        let plan = env.plan().unwrap();
        let mut stages = Vec::new();
        for &a in &plan {
            env.step(a).unwrap();
            stages.push(env.state.stage);
        }
        assert!(env.is_success());
        assert!(stages.contains(&1));
        assert!(plan.contains(&PICKUP));
    }

    #[test]
    fn closed_door_requires_toggle() {
        let (w, h, tiles) = layout(&["#####", "#.d.#", "#####"]);
        let goal = Target { kind: Kind::Goal, color: Color::Green };
        let cfg = RoomsConfig::new(
            "closed",
            w,
            h,
            tiles,
            vec![ObjectSpec { kind: Kind::Goal, color: Color::Green, cell: (3, 1) }],
            Mission::GoTo(goal),
            10,
            (1, 1),
            Some(Dir::East),
            0.5,
        )
        .unwrap();
        let env = RoomsEnv::new(cfg, 0);
        assert_eq!(env.plan().unwrap(), vec![TOGGLE, FORWARD, FORWARD]);
    }

    #[test]
    fn snapshot_restore_replays_identically() {
        let cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        let mut env = RoomsEnv::new(cfg, 1);
        for a in [FORWARD, RIGHT, FORWARD, PICKUP] {
            env.step(a).unwrap();
        }
        let snap = env.snapshot();
        let actions = [FORWARD, LEFT, FORWARD, FORWARD, DROP, TOGGLE, RIGHT];
        let run = |env: &mut RoomsEnv| -> Vec<(Observation, u64)> {
            env.restore(&snap).unwrap();
            actions
                .iter()
                .map(|&a| {
                    let o = env.step(a).unwrap();
                    (o.observation, o.reward.to_bits())
                })
                .collect()
        };
        let first = run(&mut env);
        let second = run(&mut env);
        assert_eq!(first, second);
        env.restore(&snap).unwrap();
        assert_eq!(env.snapshot(), snap);
    }

    #[test]
    fn snapshot_from_other_layout_is_rejected() {
        let a = two_rooms(Mission::GoTo(red_ball())).unwrap();
        let b = two_room_config(4, 100).unwrap();
        let snap = RoomsEnv::new(a, 0).snapshot();
        let err = RoomsEnv::new(b, 0).restore(&snap).unwrap_err();
        assert!(matches!(err, Error::SnapshotMismatch(_)));
    }

    #[test]
    fn random_start_direction_comes_from_env_rng() {
        let mut cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        cfg.start_dir = None;
        let mut a = RoomsEnv::new(cfg.clone(), 9);
        let mut b = RoomsEnv::new(cfg, 9);
        let dirs_a: Vec<Dir> = (0..6).map(|_| { a.reset(); a.agent().1 }).collect();
        let dirs_b: Vec<Dir> = (0..6).map(|_| { b.reset(); b.agent().1 }).collect();
        assert_eq!(dirs_a, dirs_b);
        let snap = a.snapshot();
        a.reset();
        let next = a.agent().1;
        b.restore(&snap).unwrap();
        b.reset();
        assert_eq!(b.agent().1, next);
    }

    #[test]
    fn egocentric_view_sees_wall_ahead() {
        let cfg = two_rooms(Mission::GoTo(red_ball())).unwrap();
        let mut env = RoomsEnv::new(cfg, 0);
        env.place_agent((6, 1), Dir::East).unwrap();
        let obs = env.observation();
        // Row 3 of the view, centre column, is the cell directly ahead.
        assert_eq!(obs.0[6 + 3 * VIEW + 2], 2);
        // Agent's own cell (bottom centre) is floor.
        assert_eq!(obs.0[6 + 4 * VIEW + 2], 1);
        let spec = env.obs_spec();
        assert_eq!(spec.cardinalities.len(), obs.0.len());
        for (v, c) in obs.0.iter().zip(&spec.cardinalities) {
            assert!((*v as usize) < *c);
        }
    }
}
