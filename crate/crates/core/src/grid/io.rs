use std::fmt::Write as _;
use std::path::Path;

use super::{validate_connectivity, Branch, Bus, Generator, Grid, DEFAULT_BASE_MVA};
use crate::error::{Error, Result};
use crate::textio::{data_lines, opt_field, parse_field, read_text, write_text};

/// Reads and validates a network file, including the single-component check.
///
/// Rows are tagged by their first field:
///
/// ```text
/// BASE_MVA,100
/// BUS,id,voltage_kv,kind,region,x_km,y_km
/// BRANCH,id,from,to,kind,susceptance_pu,rating_mw
/// GEN,id,bus,rated_mw,capacity_factor,technology
/// ```
pub fn load_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let grid = parse_grid(&text, &path.display().to_string())?;
    let conn = validate_connectivity(&grid);
    if !conn.is_connected() {
        return Err(Error::Validation(format!(
            "network is not connected: {} components (second starts at bus '{}')",
            conn.count, conn.components[1][0]
        )));
    }
    Ok(grid)
}

/// Parses the network format without the connectivity requirement.
pub fn parse_grid(text: &str, source: &str) -> Result<Grid> {
    let mut base_mva = DEFAULT_BASE_MVA;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut generators = Vec::new();

    for (line_no, fields) in data_lines(text) {
        let err = |msg: String| Error::parse(source, line_no, msg);
        let expect = |n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(err(format!("{} row needs {} fields, found {}", fields[0], n, fields.len())))
            }
        };
        match fields[0] {
            "BASE_MVA" => {
                expect(2)?;
                base_mva = parse_field(fields[1], "base_mva").map_err(err)?;
            }
            "BUS" => {
                expect(7)?;
                let coordinates = match (opt_field(fields[5]), opt_field(fields[6])) {
                    (Some(x), Some(y)) => Some((
                        parse_field(x, "x_km").map_err(err)?,
                        parse_field(y, "y_km").map_err(err)?,
                    )),
                    (None, None) => None,
                    _ => return Err(err("x_km and y_km must both be present or both empty".into())),
                };
                buses.push(Bus {
                    id: fields[1].to_string(),
                    voltage_kv: parse_field(fields[2], "voltage_kv").map_err(err)?,
                    kind: parse_field(fields[3], "bus kind").map_err(err)?,
                    region: opt_field(fields[4]).map(str::to_string),
                    coordinates,
                });
            }
            "BRANCH" => {
                expect(7)?;
                branches.push(Branch {
                    id: fields[1].to_string(),
                    from_bus: fields[2].to_string(),
                    to_bus: fields[3].to_string(),
                    kind: parse_field(fields[4], "branch kind").map_err(err)?,
                    susceptance_pu: parse_field(fields[5], "susceptance_pu").map_err(err)?,
                    rating_mw: parse_field(fields[6], "rating_mw").map_err(err)?,
                });
            }
            "GEN" => {
                expect(6)?;
                generators.push(Generator {
                    id: fields[1].to_string(),
                    bus: fields[2].to_string(),
                    rated_mw: parse_field(fields[3], "rated_mw").map_err(err)?,
                    capacity_factor: parse_field(fields[4], "capacity_factor").map_err(err)?,
                    technology: parse_field(fields[5], "technology").map_err(err)?,
                });
            }
            other => return Err(err(format!("unknown row tag '{other}'"))),
        }
    }
    Grid::new(buses, branches, generators, base_mva)
}

pub fn format_grid(grid: &Grid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "BASE_MVA,{}", grid.base_mva());
    for b in grid.buses() {
        let (x, y) = b
            .coordinates
            .map_or((String::new(), String::new()), |(x, y)| (x.to_string(), y.to_string()));
        let _ = writeln!(
            out,
            "BUS,{},{},{},{},{},{}",
            b.id,
            b.voltage_kv,
            b.kind,
            b.region.as_deref().unwrap_or(""),
            x,
            y
        );
    }
    for br in grid.branches() {
        let _ = writeln!(
            out,
            "BRANCH,{},{},{},{},{},{}",
            br.id, br.from_bus, br.to_bus, br.kind, br.susceptance_pu, br.rating_mw
        );
    }
    for g in grid.generators() {
        let _ = writeln!(
            out,
            "GEN,{},{},{},{},{}",
            g.id, g.bus, g.rated_mw, g.capacity_factor, g.technology
        );
    }
    out
}

pub fn save_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_grid(grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = "\
# three buses
BASE_MVA,100
BUS,a,400,generation,,0,0
BUS,b,400,substation,,1.5,2
BUS,c,132,demand,R1,,
BRANCH,ab,a,b,line,10,500   # trailing comment
BRANCH,bc,b,c,transformer,5,400
GEN,g1,a,300,0.9,thermal
";

    #[test]
    fn parses_and_round_trips() {
        let g = parse_grid(TRIANGLE, "mem").unwrap();
        assert_eq!(g.buses().len(), 3);
        assert_eq!(g.buses()[1].coordinates, Some((1.5, 2.0)));
        assert_eq!(g.buses()[2].region.as_deref(), Some("R1"));
        let again = parse_grid(&format_grid(&g), "mem").unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "BUS,a,400,generation,,0,0\nBRANCH,x,a\n";
        match parse_grid(text, "f.csv") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(path, "f.csv");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_num = "BUS,a,four hundred,generation,,0,0\n";
        assert!(matches!(parse_grid(bad_num, "f"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_bus_is_validation_error() {
        let text = "BUS,a,400,generation,,,\nGEN,g,nowhere,10,1,wind\n";
        assert!(matches!(parse_grid(text, "f"), Err(Error::Validation(_))));
    }
}
