//! CSV trace readers. A header row matching the expected column names is
//! optional.

use rackrep::{AccessEvent, AccessSample};

use crate::CliError;

pub const PREDICT_HEADER: [&str; 2] = ["t_seconds", "count"];
pub const ADAPTIVE_HEADER: [&str; 3] = ["t_seconds", "file_id", "accesses"];

fn records(text: &str, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("trace: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && rec.iter().eq(header.iter().copied()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(CliError::input(format!(
                "trace line {line}: expected {} fields ({}), found {}",
                header.len(),
                header.join(","),
                rec.len()
            )));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<T, CliError> {
    rec[idx]
        .parse()
        .map_err(|_| CliError::input(format!("trace line {line}: invalid {name} {:?}", &rec[idx])))
}

pub fn read_samples(text: &str) -> Result<Vec<AccessSample>, CliError> {
    records(text, &PREDICT_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(AccessSample {
                t: field(&rec, 0, line, "t_seconds")?,
                count: field(&rec, 1, line, "count")?,
            })
        })
        .collect()
}

pub fn read_events(text: &str) -> Result<Vec<AccessEvent>, CliError> {
    records(text, &ADAPTIVE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(AccessEvent {
                t: field(&rec, 0, line, "t_seconds")?,
                file_id: field(&rec, 1, line, "file_id")?,
                accesses: field(&rec, 2, line, "accesses")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_with_and_without_header() {
        let a = read_samples("t_seconds,count\n0,0\n10, 5\n").unwrap();
        let b = read_samples("0,0\n10,5\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1], AccessSample { t: 10.0, count: 5.0 });
    }

    #[test]
    fn events_parse() {
        let e = read_events("t_seconds,file_id,accesses\n1.5,7,3\n").unwrap();
        assert_eq!(
            e,
            [AccessEvent {
                t: 1.5,
                file_id: 7,
                accesses: 3
            }]
        );
        assert!(read_events("t_seconds,file_id,accesses\n").unwrap().is_empty());
    }

    #[test]
    fn bad_rows_name_the_line() {
        let err = read_samples("0,0\n1,x\n").unwrap_err();
        assert!(err.message.contains("line 2"), "{}", err.message);
        let err = read_events("1,2\n").unwrap_err();
        assert!(err.message.contains("expected 3 fields"));
        assert_eq!(err.code, 2);
    }
}
