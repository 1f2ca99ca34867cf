//! Long-form CSV datasets: one row per cell, 1-based indices.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dims, ExpressionDataset, Person, TargetId};

pub const CSV_HEADER: [&str; 7] = ["person_id", "death_stage", "gene", "region", "stage", "value", "observed"];

struct Row {
    line: usize,
    person: u64,
    death: usize,
    target: TargetId,
    stage: usize,
    value: f64,
    observed: bool,
}

fn parse_row(record: &csv::StringRecord, line: usize, err: &dyn Fn(usize, String) -> Error) -> Result<Row> {
    let field = |i: usize| record.get(i).unwrap_or("");
    let index = |i: usize| -> Result<usize> {
        match field(i).parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(err(line, format!("{} must be a positive integer, got {:?}", CSV_HEADER[i], field(i)))),
        }
    };
    let person = field(0)
        .parse::<u64>()
        .map_err(|_| err(line, format!("person_id must be a nonnegative integer, got {:?}", field(0))))?;
    let death = index(1)?;
    let gene = index(2)?;
    let region = index(3)?;
    let stage = index(4)?;
    let observed = match field(6) {
        "0" => false,
        "1" => true,
        other => return Err(err(line, format!("observed must be 0 or 1, got {other:?}"))),
    };
    let value = match field(5) {
        "" | "NA" | "NaN" | "nan" => f64::NAN,
        s => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => return Err(err(line, format!("value must be a finite number, got {s:?}"))),
        },
    };
    if observed && value.is_nan() {
        return Err(err(line, "observed cell has no value".into()));
    }
    if stage > death {
        return Err(err(line, format!("stage {stage} is after the death stage {death}")));
    }
    Ok(Row {
        line,
        person,
        death,
        target: TargetId::new(gene - 1, region - 1),
        stage,
        value,
        observed,
    })
}

/// Parses a dataset from CSV text. `label` names the source in error
/// messages. The number of stages is `stages` if given, otherwise the
/// largest death stage; genes and regions are the largest indices seen.
pub fn parse_dataset<R: Read>(reader: R, label: &str, stages: Option<usize>) -> Result<ExpressionDataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = csv.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(err(1, format!("header must be {}", CSV_HEADER.join(","))));
    }

    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows.push(parse_row(&record, line, &err)?);
    }
    if rows.is_empty() {
        return Err(err(1, "dataset has no rows".into()));
    }

    let max_death = rows.iter().map(|r| r.death).max().unwrap_or(0);
    let stages = stages.unwrap_or(max_death);
    if let Some(r) = rows.iter().find(|r| r.death > stages) {
        return Err(err(r.line, format!("death stage {} exceeds the {stages} stages", r.death)));
    }
    let genes = rows.iter().map(|r| r.target.gene + 1).max().unwrap_or(0);
    let regions = rows.iter().map(|r| r.target.region + 1).max().unwrap_or(0);
    let k = genes * regions;

    let mut persons: Vec<Person> = Vec::new();
    let mut slot: HashMap<u64, (usize, usize)> = HashMap::new();
    let mut seen: HashMap<(u64, usize, usize), usize> = HashMap::new();
    for r in &rows {
        let &mut (e, first) = slot.entry(r.person).or_insert_with(|| {
            persons.push(Person::new(r.person, r.death, k));
            (persons.len() - 1, r.line)
        });
        if persons[e].death_stage != r.death {
            return Err(err(
                r.line,
                format!(
                    "person {} has death stage {} here but {} on line {first}",
                    r.person, r.death, persons[e].death_stage
                ),
            ));
        }
        let target = r.target.index(regions);
        if let Some(prev) = seen.insert((r.person, target, r.stage), r.line) {
            return Err(err(
                r.line,
                format!(
                    "duplicate cell for person {}, target {}, stage {} (first on line {prev})",
                    r.person, r.target, r.stage
                ),
            ));
        }
        let cell = (r.stage - 1) * k + target;
        persons[e].values[cell] = r.value;
        persons[e].observed[cell] = r.observed;
    }
    persons.sort_by_key(|p| p.id);
    let mut per_stage = vec![0; stages];
    for p in &persons {
        per_stage[p.death_stage - 1] += 1;
    }
    let dims = Dims::new(stages, genes, regions, per_stage).map_err(|e| err(0, e.to_string()))?;
    let dataset = ExpressionDataset { dims, persons };
    dataset.check().map_err(|e| err(0, e.to_string()))?;
    Ok(dataset)
}

pub fn load_dataset(path: &Path, stages: Option<usize>) -> Result<ExpressionDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(std::io::BufReader::new(file), &path.display().to_string(), stages)
}

/// Writes every cell that carries a value or an observation flag; latent
/// values are kept, flagged unobserved.
pub fn write_dataset_to<W: Write>(dataset: &ExpressionDataset, writer: W) -> std::result::Result<(), csv::Error> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    let k = dataset.targets();
    let regions = dataset.dims.regions;
    for p in &dataset.persons {
        for (cell, (&v, &o)) in p.values.iter().zip(&p.observed).enumerate() {
            if v.is_nan() && !o {
                continue;
            }
            let target = TargetId::from_index(cell % k, regions);
            csv.write_record([
                p.id.to_string(),
                p.death_stage.to_string(),
                (target.gene + 1).to_string(),
                (target.region + 1).to_string(),
                (cell / k + 1).to_string(),
                if v.is_nan() { String::new() } else { v.to_string() },
                (o as u8).to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_dataset(dataset: &ExpressionDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(dataset, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    })
}
