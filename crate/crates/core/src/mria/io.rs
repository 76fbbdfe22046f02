use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{SupplyUseModel, DEFAULT_OVERCAPACITY, DEFAULT_TRADE_COST};
use crate::error::{Error, Result};
use crate::textio::{csv_rows, parse_field, read_text, write_text};

type Row = (String, Vec<String>, usize);

fn read_rows(dir: &Path, file: &str, header: &[&str]) -> Result<Vec<Row>> {
    let path = dir.join(file);
    let text = read_text(&path)?;
    let source = path.display().to_string();
    Ok(csv_rows(&text, header, &source)?
        .into_iter()
        .map(|(line, f)| (source.clone(), f.into_iter().map(str::to_string).collect(), line))
        .collect())
}

fn number(row: &Row, col: usize, what: &str) -> Result<f64> {
    parse_field(&row.1[col], what).map_err(|m| Error::parse(&row.0, row.2, m))
}

fn position(list: &[String], id: &str) -> usize {
    list.iter().position(|x| x == id).expect("id collected from the same rows")
}

/// Reads `supply.csv`, `use.csv`, `final_demand.csv`, `value_added.csv`
/// and, if present, `trade.csv` from `dir`. Region, industry and product
/// lists are the sorted ids found in the files; absent entries are zero and
/// trade not listed as allowed is forbidden.
pub fn load_supply_use(dir: impl AsRef<Path>) -> Result<SupplyUseModel> {
    let dir = dir.as_ref();
    let supply = read_rows(dir, "supply.csv", &["region", "industry", "product", "value"])?;
    let use_ = read_rows(dir, "use.csv", &["region", "product", "industry", "value"])?;
    let final_demand = read_rows(dir, "final_demand.csv", &["region", "product", "value"])?;
    let value_added = read_rows(dir, "value_added.csv", &["region", "industry", "coefficient"])?;
    let trade_path = dir.join("trade.csv");
    let trade = if trade_path.exists() {
        read_rows(dir, "trade.csv", &["from", "to", "product", "allowed"])?
    } else {
        Vec::new()
    };

    let mut regions = BTreeSet::new();
    let mut industries = BTreeSet::new();
    let mut products = BTreeSet::new();
    for r in &supply {
        regions.insert(r.1[0].clone());
        industries.insert(r.1[1].clone());
        products.insert(r.1[2].clone());
    }
    for r in &use_ {
        regions.insert(r.1[0].clone());
        products.insert(r.1[1].clone());
        industries.insert(r.1[2].clone());
    }
    for r in &final_demand {
        regions.insert(r.1[0].clone());
        products.insert(r.1[1].clone());
    }
    let regions: Vec<String> = regions.into_iter().collect();
    let industries: Vec<String> = industries.into_iter().collect();
    let products: Vec<String> = products.into_iter().collect();
    let (nr, ni, np) = (regions.len(), industries.len(), products.len());

    let mut model = SupplyUseModel {
        supply: vec![vec![vec![0.0; np]; ni]; nr],
        use_: vec![vec![vec![0.0; ni]; np]; nr],
        final_demand: vec![vec![0.0; np]; nr],
        value_added_coeff: vec![vec![f64::NAN; ni]; nr],
        trade_allowed: vec![vec![vec![false; np]; nr]; nr],
        overcapacity: DEFAULT_OVERCAPACITY,
        trade_cost: DEFAULT_TRADE_COST,
        regions,
        industries,
        products,
    };
    for row in &supply {
        let (r, i, p) = (
            position(&model.regions, &row.1[0]),
            position(&model.industries, &row.1[1]),
            position(&model.products, &row.1[2]),
        );
        model.supply[r][i][p] += number(row, 3, "value")?;
    }
    for row in &use_ {
        let (r, p, i) = (
            position(&model.regions, &row.1[0]),
            position(&model.products, &row.1[1]),
            position(&model.industries, &row.1[2]),
        );
        model.use_[r][p][i] += number(row, 3, "value")?;
    }
    for row in &final_demand {
        let (r, p) = (position(&model.regions, &row.1[0]), position(&model.products, &row.1[1]));
        model.final_demand[r][p] += number(row, 2, "value")?;
    }
    for row in &value_added {
        let lookup = |list: &[String], id: &str| {
            list.iter()
                .position(|x| x == id)
                .ok_or_else(|| Error::parse(&row.0, row.2, format!("unknown id '{id}'")))
        };
        let r = lookup(&model.regions, &row.1[0])?;
        let i = lookup(&model.industries, &row.1[1])?;
        model.value_added_coeff[r][i] = number(row, 2, "coefficient")?;
    }
    if let Some((r, i)) = (0..nr)
        .flat_map(|r| (0..ni).map(move |i| (r, i)))
        .find(|&(r, i)| model.value_added_coeff[r][i].is_nan())
    {
        return Err(Error::Validation(format!(
            "no value-added coefficient for region '{}', industry '{}'",
            model.regions[r], model.industries[i]
        )));
    }
    for row in &trade {
        let lookup = |list: &[String], id: &str| {
            list.iter()
                .position(|x| x == id)
                .ok_or_else(|| Error::parse(&row.0, row.2, format!("unknown id '{id}'")))
        };
        let from = lookup(&model.regions, &row.1[0])?;
        let to = lookup(&model.regions, &row.1[1])?;
        let p = lookup(&model.products, &row.1[2])?;
        let allowed = match row.1[3].as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(Error::parse(&row.0, row.2, format!("allowed must be true or false, found '{other}'"))),
        };
        model.trade_allowed[from][to][p] = allowed;
    }
    model.validate()?;
    Ok(model)
}

/// Writes the five table files into `dir`; zero entries and forbidden trade
/// are omitted.
pub fn save_supply_use(model: &SupplyUseModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut supply = String::from("region,industry,product,value\n");
    let mut use_ = String::from("region,product,industry,value\n");
    let mut fd = String::from("region,product,value\n");
    let mut va = String::from("region,industry,coefficient\n");
    let mut trade = String::from("from,to,product,allowed\n");
    for (r, rid) in model.regions.iter().enumerate() {
        for (i, iid) in model.industries.iter().enumerate() {
            for (p, pid) in model.products.iter().enumerate() {
                if model.supply[r][i][p] != 0.0 {
                    let _ = writeln!(supply, "{rid},{iid},{pid},{}", model.supply[r][i][p]);
                }
            }
            let _ = writeln!(va, "{rid},{iid},{}", model.value_added_coeff[r][i]);
        }
        for (p, pid) in model.products.iter().enumerate() {
            for (i, iid) in model.industries.iter().enumerate() {
                if model.use_[r][p][i] != 0.0 {
                    let _ = writeln!(use_, "{rid},{pid},{iid},{}", model.use_[r][p][i]);
                }
            }
            let _ = writeln!(fd, "{rid},{pid},{}", model.final_demand[r][p]);
        }
        for (t, tid) in model.regions.iter().enumerate() {
            for (p, pid) in model.products.iter().enumerate() {
                if model.trade_allowed[r][t][p] {
                    let _ = writeln!(trade, "{rid},{tid},{pid},true");
                }
            }
        }
    }
    write_text(&dir.join("supply.csv"), &supply)?;
    write_text(&dir.join("use.csv"), &use_)?;
    write_text(&dir.join("final_demand.csv"), &fd)?;
    write_text(&dir.join("value_added.csv"), &va)?;
    write_text(&dir.join("trade.csv"), &trade)
}
