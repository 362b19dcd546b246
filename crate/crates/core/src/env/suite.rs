//! Seeded configuration generators: two-room layouts and random graphs.

use rand::seq::SliceRandom;
use rand::Rng;

use super::rooms::{Color, Kind, Mission, ObjectSpec, RoomsConfig, Target, Tile};
use super::triangle::TriangleConfig;
use crate::error::{Error, Result};
use crate::rng::substream;

const SIDE: usize = 8;
/// Root seed behind [`two_room_config`].
pub const DEFAULT_SUITE_SEED: u64 = 0x0002_7003;
const ATTEMPTS: usize = 64;

/// The `index`-th layout of the default two-room suite.
pub fn two_room_config(index: usize, horizon: usize) -> Result<RoomsConfig> {
    generate_two_room(DEFAULT_SUITE_SEED, index, horizon)
}

/// `count` seeded 8×8 two-room layouts; entry `i` depends only on `(seed, i)`.
pub fn two_room_suite(count: usize, seed: u64, horizon: usize) -> Result<Vec<RoomsConfig>> {
    (0..count).map(|i| generate_two_room(seed, i, horizon)).collect()
}

fn generate_two_room(seed: u64, index: usize, horizon: usize) -> Result<RoomsConfig> {
    let mut rng = substream(seed, &[index as u64]);
    let mut last = None;
    for _ in 0..ATTEMPTS {
        match sample_two_room(&mut rng, index, horizon) {
            Ok(cfg) => return Ok(cfg),
            Err(e @ Error::Unsatisfiable { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Config("no layout sampled".into())))
}

fn sample_two_room(rng: &mut impl Rng, index: usize, horizon: usize) -> Result<RoomsConfig> {
    let wall_y = rng.gen_range(3..=4);
    let door_x = rng.gen_range(1..SIDE - 1);
    let door_open = rng.gen_bool(0.75);
    let mut tiles = vec![Tile::Floor; SIDE * SIDE];
    for y in 0..SIDE {
        for x in 0..SIDE {
            if x == 0 || y == 0 || x == SIDE - 1 || y == SIDE - 1 || y == wall_y {
                tiles[y * SIDE + x] = Tile::Wall;
            }
        }
    }
    tiles[wall_y * SIDE + door_x] = Tile::Door { open: door_open };

    let top: Vec<(usize, usize)> = cells(1..wall_y);
    let bottom: Vec<(usize, usize)> = cells(wall_y + 1..SIDE - 1);
    let near_door = |c: &(usize, usize)| c.0 == door_x && c.1.abs_diff(wall_y) == 1;
    let start_cell = *top.choose(rng).unwrap();

    let mut targets: Vec<Target> = Vec::new();
    while targets.len() < 3 {
        let t = Target {
            kind: Kind::ALL[rng.gen_range(0..3)],
            color: Color::ALL[rng.gen_range(0..Color::ALL.len())],
        };
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    // One object in the start room, two behind the wall.
    let mut free_top: Vec<_> = top.iter().copied().filter(|c| *c != start_cell && !near_door(c)).collect();
    let mut free_bottom: Vec<_> = bottom.iter().copied().filter(|c| !near_door(c)).collect();
    free_top.shuffle(rng);
    free_bottom.shuffle(rng);
    let mut objects = vec![ObjectSpec { kind: targets[0].kind, color: targets[0].color, cell: free_top[0] }];
    for (t, cell) in targets[1..].iter().zip(free_bottom.iter()) {
        objects.push(ObjectSpec { kind: t.kind, color: t.color, cell: *cell });
    }
    if rng.gen_bool(0.5) {
        let goal = Target { kind: Kind::Goal, color: Color::ALL[rng.gen_range(0..Color::ALL.len())] };
        objects.push(ObjectSpec { kind: goal.kind, color: goal.color, cell: free_bottom[2] });
        targets.push(goal);
    }

    let far = targets[1 + rng.gen_range(0..targets.len() - 1)];
    let mission = match index % 3 {
        0 => Mission::GoTo(far),
        1 if far.kind != Kind::Goal => Mission::Pickup(far),
        1 => Mission::GoTo(far),
        _ => Mission::PickupThenGoTo(targets[0], far),
    };
    RoomsConfig::new(
        format!("two_rooms_{index:02}"),
        SIDE,
        SIDE,
        tiles,
        objects,
        mission,
        horizon,
        start_cell,
        None,
        0.5,
    )
}

fn cells(rows: std::ops::Range<usize>) -> Vec<(usize, usize)> {
    rows.flat_map(|y| (1..SIDE - 1).map(move |x| (x, y))).collect()
}

/// Erdős–Rényi graph on `num_nodes` nodes with edge probability `density`.
pub fn random_graph(graph_id: usize, num_nodes: usize, density: f64, seed: u64) -> Result<TriangleConfig> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Config(format!("edge density {density} outside [0, 1]")));
    }
    let mut rng = substream(seed, &[graph_id as u64, num_nodes as u64]);
    let mut edges = Vec::new();
    for a in 0..num_nodes as u32 {
        for b in a + 1..num_nodes as u32 {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    TriangleConfig::new(graph_id, num_nodes, &edges)
}
