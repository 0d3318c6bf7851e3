use std::io::{Read, Write};

use super::{ConsumerDataset, ConsumptionRecord, ProfileError};

pub const CSV_HEADER: &str = "year,month,day,hour,kwh";

/// Parses the `year,month,day,hour,kwh` format.
///
/// Line numbers in errors are 1-based and count the header as line 1.
pub fn parse_consumption_csv<R: Read>(input: R, consumer_id: &str) -> Result<ConsumerDataset, ProfileError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows: Vec<(usize, ConsumptionRecord)> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut saw_header = false;

    loop {
        let more = reader.read_record(&mut record).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) => ProfileError::Io(io.to_string()),
            _ => ProfileError::MalformedRow(e.position().map_or(0, |p| p.line() as usize)),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            let found: Vec<&str> = record.iter().map(str::trim).collect();
            if found.join(",") != CSV_HEADER {
                return Err(ProfileError::BadHeader { found: found.join(",") });
            }
            saw_header = true;
            continue;
        }
        rows.push((line, parse_row(&record, line)?));
    }

    if rows.is_empty() {
        return Err(ProfileError::EmptyInput);
    }

    rows.sort_by_key(|(line, r)| (r.sort_key(), *line));
    for pair in rows.windows(2) {
        if pair[0].1.sort_key() == pair[1].1.sort_key() {
            return Err(ProfileError::DuplicateTimestamp(pair[0].0.max(pair[1].0)));
        }
    }
    Ok(ConsumerDataset::from_sorted(consumer_id.to_string(), rows.into_iter().map(|(_, r)| r).collect()))
}

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<ConsumptionRecord, ProfileError> {
    if record.len() != 5 {
        return Err(ProfileError::MalformedRow(line));
    }
    let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
    let int = |i: usize| field(i).parse::<i64>().map_err(|_| ProfileError::MalformedRow(line));
    let (year, month, day, hour) = (int(0)?, int(1)?, int(2)?, int(3)?);
    let kwh: f64 = field(4).parse().map_err(|_| ProfileError::MalformedRow(line))?;

    let in_range = |v: i64, lo: i64, hi: i64| (lo..=hi).contains(&v);
    if !in_range(year, i64::from(i32::MIN), i64::from(i32::MAX))
        || !in_range(month, 1, 12)
        || !in_range(day, 1, 31)
        || !in_range(hour, 0, 23)
    {
        return Err(ProfileError::InvalidTimestamp(line));
    }
    let rec = ConsumptionRecord::new(year as i32, month as u32, day as u32, hour as u32, kwh);
    if !rec.is_valid_timestamp() {
        return Err(ProfileError::InvalidTimestamp(line));
    }
    if !rec.is_valid_energy() {
        return Err(ProfileError::InvalidEnergy(line));
    }
    Ok(rec)
}

/// Writes `dataset` in the same format [`parse_consumption_csv`] reads, LF line endings.
pub fn write_consumption_csv<W: Write>(dataset: &ConsumerDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in dataset.records() {
        writeln!(out, "{},{},{},{},{}", r.year, r.month, r.day, r.hour, r.kwh)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<ConsumerDataset, ProfileError> {
        parse_consumption_csv(text.as_bytes(), "c")
    }

    #[test]
    fn single_row() {
        let ds = parse("year,month,day,hour,kwh\n2023,1,1,0,0.42\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].kwh, 0.42);
        assert_eq!(ds.coverage(), 1.0);
    }

    #[test]
    fn full_day_constant() {
        let mut text = String::from("year,month,day,hour,kwh\n");
        for h in 0..24 {
            text.push_str(&format!("2023,1,1,{h},1.0\n"));
        }
        let ds = parse(&text).unwrap();
        assert_eq!(ds.len(), 24);
        assert_eq!(ds.coverage(), 1.0);
        assert_eq!(ds.total_kwh(), 24.0);
    }

    #[test]
    fn february_thirtieth_is_invalid() {
        assert_eq!(parse("year,month,day,hour,kwh\n2023,2,30,0,1.0\n"), Err(ProfileError::InvalidTimestamp(2)));
    }

    #[test]
    fn crlf_and_trailing_blank_line() {
        let ds = parse("year,month,day,hour,kwh\r\n2023,1,1,1,1.5\r\n2023,1,1,0,0.5\r\n\r\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[0].hour, 0);
    }

    #[test]
    fn error_paths() {
        assert_eq!(parse("year,month,day,hour,kwh\n"), Err(ProfileError::EmptyInput));
        assert!(matches!(parse("a,b\n"), Err(ProfileError::BadHeader { .. })));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,x,1\n"), Err(ProfileError::MalformedRow(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,0\n"), Err(ProfileError::MalformedRow(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,0,1,9\n"), Err(ProfileError::MalformedRow(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,24,1\n"), Err(ProfileError::InvalidTimestamp(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,13,1,0,1\n"), Err(ProfileError::InvalidTimestamp(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,0,-1\n"), Err(ProfileError::InvalidEnergy(2)));
        assert_eq!(parse("year,month,day,hour,kwh\n2023,1,1,0,NaN\n"), Err(ProfileError::InvalidEnergy(2)));
        assert_eq!(
            parse("year,month,day,hour,kwh\n2023,1,1,0,1\n2023,1,1,1,1\n2023,1,1,0,2\n"),
            Err(ProfileError::DuplicateTimestamp(4))
        );
    }

    #[test]
    fn empty_stream_is_empty_input() {
        // csv yields no records at all for an empty stream
        assert_eq!(parse(""), Err(ProfileError::EmptyInput));
    }

    proptest! {
        #[test]
        fn write_then_parse_reproduces_records(
            hours in proptest::collection::btree_set(0u32..24 * 60, 1..80),
            kwh in proptest::collection::vec(0.0f64..50.0, 80),
        ) {
            let start = chrono::NaiveDate::from_ymd_opt(2024, 1, 30).unwrap();
            let records: Vec<ConsumptionRecord> = hours
                .iter()
                .zip(&kwh)
                .map(|(&h, &k)| {
                    use chrono::Datelike;
                    let d = start + chrono::Days::new(u64::from(h / 24));
                    ConsumptionRecord::new(d.year(), d.month(), d.day(), h % 24, k)
                })
                .rev()
                .collect();
            let ds = ConsumerDataset::new("p", records).unwrap();
            let mut buf = Vec::new();
            write_consumption_csv(&ds, &mut buf).unwrap();
            let back = parse_consumption_csv(buf.as_slice(), "p").unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
