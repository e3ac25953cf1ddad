//! Map records on the wire.
//!
//! A wall is one `WALL|` line whose point list packs the style into the
//! first two points: `(width, r)` then `(g, b)`, followed by the vertices.
//! An icon is `ICON|oid|name|x,y|icon_id`.

use thiserror::Error;

use super::response::{field, unfield};
use crate::map::{HomeMap, MapIconRecord, MapPolyline};
use crate::model::DeviceId;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("MALFORMED_MAP {0}")]
pub struct MalformedMap(pub String);

fn point(x: i64, y: i64) -> String {
    format!("{x},{y}")
}

pub fn encode_polyline(p: &MapPolyline) -> String {
    let mut pts = vec![
        point(p.width.into(), p.rgb[0].into()),
        point(p.rgb[1].into(), p.rgb[2].into()),
    ];
    pts.extend(p.vertices.iter().map(|&(x, y)| point(x.into(), y.into())));
    format!("WALL|{}", pts.join(";"))
}

pub fn encode_icon(i: &MapIconRecord) -> String {
    format!(
        "ICON|{}|{}|{}|{}",
        i.oid,
        field(&i.name),
        point(i.position.0.into(), i.position.1.into()),
        field(&i.icon_id)
    )
}

pub fn encode_map(map: &HomeMap) -> Vec<String> {
    map.walls
        .iter()
        .map(encode_polyline)
        .chain(map.icons.iter().map(encode_icon))
        .collect()
}

fn parse_point(text: &str) -> Result<(i64, i64), MalformedMap> {
    let bad = || MalformedMap(format!("bad point {text:?}"));
    let (x, y) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    ))
}

fn coord(v: i64) -> Result<i32, MalformedMap> {
    i32::try_from(v).map_err(|_| MalformedMap(format!("coordinate {v} out of range")))
}

fn color(v: i64) -> Result<u8, MalformedMap> {
    u8::try_from(v).map_err(|_| MalformedMap(format!("color component {v} outside 0-255")))
}

pub fn decode_polyline(body: &str) -> Result<MapPolyline, MalformedMap> {
    let pts = body.split(';').map(parse_point).collect::<Result<Vec<_>, _>>()?;
    if pts.len() < 4 {
        return Err(MalformedMap(format!("wall has {} points, needs at least 4", pts.len())));
    }
    let (width, r) = pts[0];
    let (g, b) = pts[1];
    if width < 1 {
        return Err(MalformedMap(format!("width {width} below 1")));
    }
    let width = u32::try_from(width).map_err(|_| MalformedMap(format!("width {width} too large")))?;
    let vertices = pts[2..]
        .iter()
        .map(|&(x, y)| Ok((coord(x)?, coord(y)?)))
        .collect::<Result<Vec<_>, MalformedMap>>()?;
    Ok(MapPolyline {
        width,
        rgb: [color(r)?, color(g)?, color(b)?],
        vertices,
    })
}

pub fn decode_icon(body: &str) -> Result<MapIconRecord, MalformedMap> {
    let parts: Vec<&str> = body.split('|').collect();
    let [oid, name, pos, icon] = parts[..] else {
        return Err(MalformedMap(format!("icon needs 4 fields, got {}", parts.len())));
    };
    let oid = oid.parse().map_err(|_| MalformedMap(format!("bad oid {oid:?}")))?;
    let (x, y) = parse_point(pos)?;
    Ok(MapIconRecord {
        oid: DeviceId(oid),
        name: unfield(name),
        position: (coord(x)?, coord(y)?),
        icon_id: unfield(icon),
    })
}

/// Decode the `WALL` and `ICON` lines of a payload; other records are skipped.
pub fn decode_map<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<HomeMap, MalformedMap> {
    let mut map = HomeMap::default();
    for line in lines {
        if let Some(body) = line.strip_prefix("WALL|") {
            map.walls.push(decode_polyline(body)?);
        } else if let Some(body) = line.strip_prefix("ICON|") {
            map.icons.push(decode_icon(body)?);
        }
    }
    Ok(map)
}
