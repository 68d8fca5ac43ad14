//! Readers and writers for the long-format data CSV, the population CSV
//! and the hierarchy JSON document.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    contiguous_range, Hierarchy, HierarchyConfig, LoadedPanel, PanelTensor, PopulationWeights, Suppression,
    Suppressions, Year,
};

pub const SUPP_NUM: &str = "SUPP_NUM";
pub const SUPP_DEN: &str = "SUPP_DEN";

#[derive(Debug, Deserialize, Serialize)]
struct DataRow {
    unit: String,
    indicator: String,
    year: Year,
    value: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct PopulationRow {
    unit: String,
    year: Year,
    weight: f64,
}

enum CellValue {
    Missing,
    Present(f64),
    Suppressed(Suppression),
}

fn parse_value(raw: &str, row: &DataRow) -> Result<CellValue> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(CellValue::Missing);
    }
    match s {
        SUPP_NUM => return Ok(CellValue::Suppressed(Suppression::Numerator)),
        SUPP_DEN => return Ok(CellValue::Suppressed(Suppression::Denominator)),
        _ => {}
    }
    let v: f64 = s.parse().map_err(|_| {
        Error::Data(format!(
            "unparseable value `{s}` for ({}, {}, {})",
            row.unit, row.indicator, row.year
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Data(format!(
            "non-finite value for ({}, {}, {})",
            row.unit, row.indicator, row.year
        )));
    }
    Ok(CellValue::Present(v))
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Reads the long-format `unit,indicator,year,value` CSV into a raw tensor.
///
/// Units, indicators and years not observed in any row do not appear.
/// Cells with no row, or an empty value, are missing.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<(PanelTensor, Suppressions)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["unit", "indicator", "year", "value"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!(
            "data header must be `unit,indicator,year,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut cells: BTreeMap<(String, String, Year), CellValue> = BTreeMap::new();
    for rec in rdr.deserialize() {
        let row: DataRow = rec?;
        let v = parse_value(&row.value, &row)?;
        let key = (row.unit, row.indicator, row.year);
        if cells.contains_key(&key) {
            return Err(Error::DuplicateKey {
                unit: key.0,
                indicator: key.1,
                year: key.2,
            });
        }
        cells.insert(key, v);
    }
    if cells.is_empty() {
        return Err(Error::Data("data file has no rows".into()));
    }
    let units: BTreeSet<&String> = cells.keys().map(|k| &k.0).collect();
    let indicators: BTreeSet<&String> = cells.keys().map(|k| &k.1).collect();
    let years: BTreeSet<Year> = cells.keys().map(|k| k.2).collect();
    contiguous_range(&years)?;
    let years: Vec<Year> = years.into_iter().collect();
    let mut tensor = PanelTensor::empty(
        units.into_iter().cloned().collect(),
        indicators.into_iter().cloned().collect(),
        &years,
    )?;
    let mut supp = Suppressions::default();
    for ((u, i, y), v) in &cells {
        let c = tensor.unit_index(u).unwrap();
        let k = tensor.indicator_index(i).unwrap();
        let t = tensor.year_index(*y).unwrap();
        match *v {
            CellValue::Missing => {}
            CellValue::Present(x) => tensor.set(c, k, t, Some(x)),
            CellValue::Suppressed(s) => supp.insert(c, k, t, s),
        }
    }
    Ok((tensor, supp))
}

pub fn read_panel_file(path: &Path) -> Result<(PanelTensor, Suppressions)> {
    read_panel_csv(open(path)?).map_err(|e| match e {
        Error::Csv(c) => Error::Data(format!("{}: {c}", path.display())),
        other => other,
    })
}

/// Writes every grid cell, missing ones with an empty value and suppressed
/// ones with their sentinel. Values use the shortest round-trip decimal form.
pub fn write_panel_csv<W: Write>(writer: W, tensor: &PanelTensor, suppressions: Option<&Suppressions>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit", "indicator", "year", "value"])?;
    let years = tensor.years();
    for (c, unit) in tensor.units().iter().enumerate() {
        for (i, ind) in tensor.indicators().iter().enumerate() {
            for (t, year) in years.iter().enumerate() {
                let value = match (tensor.get(c, i, t), suppressions.and_then(|s| s.get(c, i, t))) {
                    (Some(v), _) => format!("{v}"),
                    (None, Some(Suppression::Numerator)) => SUPP_NUM.to_string(),
                    (None, Some(Suppression::Denominator)) => SUPP_DEN.to_string(),
                    (None, None) => String::new(),
                };
                w.write_record([unit.as_str(), ind.as_str(), &year.to_string(), &value])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_panel_file(path: &Path, tensor: &PanelTensor, suppressions: Option<&Suppressions>) -> Result<()> {
    write_panel_csv(create(path)?, tensor, suppressions)
}

pub fn read_population_csv<R: Read>(reader: R) -> Result<PopulationWeights> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["unit", "year", "weight"] {
        return Err(Error::Population("population header must be `unit,year,weight`".into()));
    }
    let mut entries = Vec::new();
    for rec in rdr.deserialize() {
        let row: PopulationRow = rec?;
        entries.push((row.unit, row.year, row.weight));
    }
    PopulationWeights::from_entries(entries)
}

pub fn read_population_file(path: &Path) -> Result<PopulationWeights> {
    read_population_csv(open(path)?)
}

pub fn write_population_file(path: &Path, pop: &PopulationWeights) -> Result<()> {
    write_population_csv(create(path)?, pop)
}

pub fn write_population_csv<W: Write>(writer: W, pop: &PopulationWeights) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit", "year", "weight"])?;
    for (u, y, wt) in pop.entries() {
        w.write_record([u, &y.to_string(), &format!("{wt}")])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_hierarchy_json<R: Read>(reader: R) -> Result<Hierarchy> {
    let cfg: HierarchyConfig =
        serde_json::from_reader(reader).map_err(|e| Error::Hierarchy(format!("malformed hierarchy document: {e}")))?;
    Hierarchy::from_config(&cfg)
}

pub fn read_hierarchy_file(path: &Path) -> Result<Hierarchy> {
    read_hierarchy_json(open(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Combines the three inputs and checks that they agree with each other.
pub fn assemble_panel(
    tensor: PanelTensor,
    suppressions: Suppressions,
    hierarchy: Hierarchy,
    population: PopulationWeights,
) -> Result<LoadedPanel> {
    hierarchy.check_tensor(&tensor)?;
    population.aligned(tensor.units(), &tensor.years())?;
    Ok(LoadedPanel {
        tensor,
        suppressions,
        hierarchy,
        population,
    })
}

/// Loads data, hierarchy and population from readers.
pub fn load_panel<R1: Read, R2: Read, R3: Read>(data: R1, hierarchy: R2, population: R3) -> Result<LoadedPanel> {
    let (tensor, supp) = read_panel_csv(data)?;
    let hierarchy = read_hierarchy_json(hierarchy)?;
    let population = read_population_csv(population)?;
    assemble_panel(tensor, supp, hierarchy, population)
}

pub fn load_panel_files(data: &Path, hierarchy: &Path, population: &Path) -> Result<LoadedPanel> {
    let (tensor, supp) = read_panel_file(data)?;
    let hierarchy = read_hierarchy_file(hierarchy)?;
    let population = read_population_file(population)?;
    assemble_panel(tensor, supp, hierarchy, population)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIER: &str = r#"{"domains": {"d": {"subdomains": {"s": {"indicators": [{"id": "x", "polarity": 0}]}}}},
                            "regions": {"r": ["A", "B"]}}"#;
    const POP: &str = "unit,year,weight\nA,2015,0.5\nB,2015,0.5\nA,2016,0.4\nB,2016,0.6\n";

    #[test]
    fn loads_tiny_panel() {
        let data = "unit,indicator,year,value\nA,x,2015,1\nA,x,2016,2\nB,x,2015,3\nB,x,2016,4\n";
        let p = load_panel(data.as_bytes(), HIER.as_bytes(), POP.as_bytes()).unwrap();
        assert_eq!(p.tensor.missing_count(), 0);
        assert_eq!(p.tensor.get(1, 0, 1), Some(4.0));
    }

    #[test]
    fn deleted_row_becomes_missing() {
        let data = "unit,indicator,year,value\nA,x,2015,1\nA,x,2016,2\nB,x,2015,3\n";
        let p = load_panel(data.as_bytes(), HIER.as_bytes(), POP.as_bytes()).unwrap();
        assert_eq!(p.tensor.missing_count(), 1);
        assert_eq!(p.tensor.get(1, 0, 1), None);
    }

    #[test]
    fn duplicate_row_names_the_key() {
        let data = "unit,indicator,year,value\nA,x,2015,1\nA,x,2015,2\n";
        let err = read_panel_csv(data.as_bytes()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "duplicate row for key (unit=A, indicator=x, year=2015)"
        );
    }

    #[test]
    fn unknown_indicator_is_rejected() {
        let data = "unit,indicator,year,value\nA,x,2015,1\nB,x,2015,1\nA,y,2015,1\nB,y,2015,1\n";
        let pop = "unit,year,weight\nA,2015,0.5\nB,2015,0.5\n";
        let err = load_panel(data.as_bytes(), HIER.as_bytes(), pop.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::UnknownIndicator(ref s) if s == "y"));
    }

    #[test]
    fn sentinels_and_empties() {
        let data = "unit,indicator,year,value\nA,x,2015,SUPP_NUM\nA,x,2016,\nB,x,2015,SUPP_DEN\nB,x,2016,7.5\n";
        let (t, s) = read_panel_csv(data.as_bytes()).unwrap();
        assert_eq!(t.missing_count(), 3);
        assert_eq!(s.get(0, 0, 0), Some(Suppression::Numerator));
        assert_eq!(s.get(1, 0, 0), Some(Suppression::Denominator));
        assert_eq!(s.get(0, 0, 1), None);
    }

    #[test]
    fn bad_header_and_values() {
        assert!(read_panel_csv("a,b,c,d\n1,2,3,4\n".as_bytes()).is_err());
        assert!(read_panel_csv("unit,indicator,year,value\nA,x,2015,abc\n".as_bytes()).is_err());
        assert!(read_panel_csv("unit,indicator,year,value\nA,x,2015,1\nA,x,2017,1\n".as_bytes()).is_err());
    }

    #[test]
    fn population_round_trip() {
        let pop = read_population_csv(POP.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_population_csv(&mut buf, &pop).unwrap();
        assert_eq!(read_population_csv(buf.as_slice()).unwrap(), pop);
    }
}
