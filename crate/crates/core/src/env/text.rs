//! Structured text formats for environment configurations.
//!
//! Files hold one document per configuration, separated by `---` lines.
//! Blank lines and lines starting with `;` are ignored outside blocks.
//!
//! Rooms document:
//! ```text
//! name: two_rooms_00
//! horizon: 100
//! time_penalty: 0.5
//! mission: pickup blue key then goto red ball
//! start: 1 1 east        ; direction may be `random`
//! object: ball red 5 6
//! layout:
//! ########
//! #......#
//! ###D####
//! #......#
//! ########
//! end
//! ```
//! Layout glyphs: `#` wall, `.` floor, `D` open door, `d` closed door.
//!
//! Graph document: `graph: <id>`, `nodes: <count>`, then an `edges:` block of
//! `u v` pairs and an optional `seen:` block of `a b c` triangles, each closed by `end`.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::rooms::{Color, Dir, Kind, Mission, ObjectSpec, RoomsConfig, Tile};
use super::triangle::TriangleConfig;
use crate::error::{Error, Result};

fn documents(text: &str) -> Vec<Vec<(usize, &str)>> {
    let mut docs = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim() == "---" {
            docs.push(Vec::new());
            continue;
        }
        docs.last_mut().unwrap().push((i + 1, line));
    }
    docs.retain(|d| d.iter().any(|(_, l)| is_content(l)));
    docs
}

fn is_content(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && !t.starts_with(';')
}

fn strip_comment(line: &str) -> &str {
    line.split(';').next().unwrap_or("").trim()
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| perr(line, format!("expected a number, found `{s}`")))
}

pub fn parse_rooms_configs(text: &str) -> Result<Vec<RoomsConfig>> {
    documents(text).into_iter().map(|d| parse_rooms_doc(&d)).collect()
}

fn parse_rooms_doc(lines: &[(usize, &str)]) -> Result<RoomsConfig> {
    let mut name = String::from("unnamed");
    let mut horizon = 100usize;
    let mut penalty = 0.5f64;
    let mut mission = None;
    let mut start = None;
    let mut objects = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let first = lines.first().map_or(0, |l| l.0);
    let mut it = lines.iter();
    while let Some(&(ln, raw)) = it.next() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| perr(ln, format!("expected `key: value`, found `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "name" => name = value.to_string(),
            "horizon" => horizon = num(ln, value)?,
            "time_penalty" => penalty = num(ln, value)?,
            "mission" => {
                mission = Some(
                    Mission::parse(value).ok_or_else(|| perr(ln, format!("unknown mission `{value}`")))?,
                )
            }
            "start" => {
                let w: Vec<&str> = value.split_whitespace().collect();
                if w.len() != 3 {
                    return Err(perr(ln, "start needs `x y direction`"));
                }
                let dir = if w[2] == "random" {
                    None
                } else {
                    Some(Dir::parse(w[2]).ok_or_else(|| perr(ln, format!("unknown direction `{}`", w[2])))?)
                };
                start = Some(((num(ln, w[0])?, num(ln, w[1])?), dir));
            }
            "object" => {
                let w: Vec<&str> = value.split_whitespace().collect();
                if w.len() != 4 {
                    return Err(perr(ln, "object needs `kind color x y`"));
                }
                objects.push(ObjectSpec {
                    kind: Kind::parse(w[0]).ok_or_else(|| perr(ln, format!("unknown kind `{}`", w[0])))?,
                    color: Color::parse(w[1]).ok_or_else(|| perr(ln, format!("unknown color `{}`", w[1])))?,
                    cell: (num(ln, w[2])?, num(ln, w[3])?),
                });
            }
            "layout" => {
                for &(ln2, row) in it.by_ref() {
                    let row = row.trim();
                    if row == "end" {
                        break;
                    }
                    if row.chars().any(|c| !"#.Dd".contains(c)) {
                        return Err(perr(ln2, format!("bad layout row `{row}`")));
                    }
                    rows.push(row.to_string());
                }
            }
            other => return Err(perr(ln, format!("unknown key `{other}`"))),
        }
    }
    let mission = mission.ok_or_else(|| perr(first, "missing `mission`"))?;
    let (start_cell, start_dir) = start.ok_or_else(|| perr(first, "missing `start`"))?;
    if rows.is_empty() {
        return Err(perr(first, "missing `layout` block"));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(perr(first, "layout rows have unequal lengths"));
    }
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
    RoomsConfig::new(
        name,
        width,
        rows.len(),
        tiles,
        objects,
        mission,
        horizon,
        start_cell,
        start_dir,
        penalty,
    )
}

/// Canonical text for `configs`; `parse_rooms_configs` inverts it.
pub fn format_rooms_configs(configs: &[RoomsConfig]) -> String {
    let mut out = String::new();
    for (i, c) in configs.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        let _ = writeln!(out, "name: {}", c.name);
        let _ = writeln!(out, "horizon: {}", c.horizon);
        let _ = writeln!(out, "time_penalty: {}", c.time_penalty);
        let _ = writeln!(out, "mission: {}", c.mission);
        let dir = c.start_dir.map_or("random", |d| d.name());
        let _ = writeln!(out, "start: {} {} {}", c.start_cell.0, c.start_cell.1, dir);
        for o in &c.objects {
            let _ = writeln!(out, "object: {} {} {} {}", o.kind.name(), o.color.name(), o.cell.0, o.cell.1);
        }
        out.push_str("layout:\n");
        for y in 0..c.height {
            for x in 0..c.width {
                out.push(match c.tile(x, y) {
                    Tile::Wall => '#',
                    Tile::Floor => '.',
                    Tile::Door { open: true } => 'D',
                    Tile::Door { open: false } => 'd',
                });
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    out
}

pub fn parse_graph_configs(text: &str) -> Result<Vec<TriangleConfig>> {
    documents(text).into_iter().map(|d| parse_graph_doc(&d)).collect()
}

fn parse_graph_doc(lines: &[(usize, &str)]) -> Result<TriangleConfig> {
    let first = lines.first().map_or(0, |l| l.0);
    let mut graph_id = None;
    let mut nodes = None;
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut it = lines.iter();
    while let Some(&(ln, raw)) = it.next() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| perr(ln, format!("expected `key: value`, found `{line}`")))?;
        match key.trim() {
            "graph" => graph_id = Some(num::<usize>(ln, value)?),
            "nodes" => nodes = Some(num::<usize>(ln, value)?),
            block @ ("edges" | "seen") => {
                for &(ln2, row) in it.by_ref() {
                    let row = strip_comment(row);
                    if row == "end" {
                        break;
                    }
                    if row.is_empty() {
                        continue;
                    }
                    let v: Vec<u32> = row
                        .split_whitespace()
                        .map(|w| num(ln2, w))
                        .collect::<Result<_>>()?;
                    match (block, v.as_slice()) {
                        ("edges", [a, b]) => edges.push((*a, *b)),
                        ("seen", [a, b, c]) => {
                            let mut t = [*a, *b, *c];
                            t.sort_unstable();
                            seen.insert(t);
                        }
                        _ => return Err(perr(ln2, format!("bad `{block}` row `{row}`"))),
                    }
                }
            }
            other => return Err(perr(ln, format!("unknown key `{other}`"))),
        }
    }
    let graph_id = graph_id.ok_or_else(|| perr(first, "missing `graph`"))?;
    let nodes = nodes.ok_or_else(|| perr(first, "missing `nodes`"))?;
    let mut cfg = TriangleConfig::new(graph_id, nodes, &edges)?;
    cfg.pretrain_seen = seen;
    Ok(cfg)
}

pub fn format_graph_configs(configs: &[TriangleConfig]) -> String {
    let mut out = String::new();
    for (i, c) in configs.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        let _ = writeln!(out, "graph: {}", c.graph_id);
        let _ = writeln!(out, "nodes: {}", c.num_nodes);
        out.push_str("edges:\n");
        for (a, b) in c.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out.push_str("end\n");
        if !c.pretrain_seen.is_empty() {
            out.push_str("seen:\n");
            for t in &c.pretrain_seen {
                let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
            }
            out.push_str("end\n");
        }
    }
    out
}
