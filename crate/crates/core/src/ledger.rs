//! Count ledgers: pulses sent and coincidences observed per source
//! combination, plus the error counts, with their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Combo, GainEntry, GainMode, GainTable};

/// Row keys of the error CSV in canonical order.
pub const ERROR_ROWS: [(Combo, &str); 5] = [
    (Combo::Zzz, "ab"),
    (Combo::Zzz, "ac"),
    (Combo::Zzz, "bc"),
    (Combo::Xxx, "all"),
    (Combo::Yyy, "all"),
];

/// Pulses (`N`, float) and coincidences (`M`, integer) per combination, with
/// the error counts. Aggregated rows carry totals over their three members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountLedger {
    pulses: [f64; 12],
    coincidences: [u64; 12],
    /// Z-basis pairwise errors (AB, AC, BC).
    pub errors_zzz: [u64; 3],
    pub errors_xxx: u64,
    pub errors_yyy: u64,
}

impl Default for CountLedger {
    fn default() -> Self {
        CountLedger {
            pulses: [0.0; 12],
            coincidences: [0; 12],
            errors_zzz: [0; 3],
            errors_xxx: 0,
            errors_yyy: 0,
        }
    }
}

impl CountLedger {
    pub fn pulses(&self, c: Combo) -> f64 {
        self.pulses[c.index()]
    }

    /// Pulses sent per member configuration of `c`.
    pub fn pulses_per_member(&self, c: Combo) -> f64 {
        self.pulses[c.index()] / c.member_count() as f64
    }

    pub fn coincidences(&self, c: Combo) -> u64 {
        self.coincidences[c.index()]
    }

    pub fn set(&mut self, c: Combo, pulses: f64, coincidences: u64) {
        self.pulses[c.index()] = pulses;
        self.coincidences[c.index()] = coincidences;
    }

    pub fn validate(&self) -> Result<()> {
        for c in Combo::ALL {
            let n = self.pulses(c);
            if !n.is_finite() || n < 0.0 {
                return Err(Error::invalid(c.token(), format!("pulses {n} must be finite and >= 0")));
            }
            if self.coincidences(c) as f64 > n {
                return Err(Error::invalid(c.token(), "coincidences exceed pulses"));
            }
        }
        let checks = [
            ("zzz/ab", self.errors_zzz[0], Combo::Zzz),
            ("zzz/ac", self.errors_zzz[1], Combo::Zzz),
            ("zzz/bc", self.errors_zzz[2], Combo::Zzz),
            ("xxx/all", self.errors_xxx, Combo::Xxx),
            ("yyy/all", self.errors_yyy, Combo::Yyy),
        ];
        for (name, e, c) in checks {
            if e > self.coincidences(c) {
                return Err(Error::invalid(name, "errors exceed coincidences"));
            }
        }
        Ok(())
    }

    /// Observed frequencies M/N as a plug-in gain table.
    pub fn plug_in_gains(&self) -> GainTable {
        let mut t = GainTable::new(GainMode::PlugIn);
        let freq = |m: f64, n: f64| if n > 0.0 { m / n } else { 0.0 };
        for c in Combo::ALL {
            let n = self.pulses_per_member(c);
            let gain = freq(self.coincidences(c) as f64, n);
            let error_gain = match c {
                Combo::Zzz => freq(*self.errors_zzz.iter().max().unwrap() as f64, n),
                Combo::Xxx => freq(self.errors_xxx as f64, n),
                Combo::Yyy => freq(self.errors_yyy as f64, n),
                _ => 0.0,
            };
            t.set(c, GainEntry { gain, error_gain });
        }
        let n = self.pulses(Combo::Zzz);
        t.zzz_pair_error_gains = self.errors_zzz.map(|e| freq(e as f64, n));
        t
    }

    pub fn read_counts<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        check_header(&mut rdr, &["combo", "pulses", "coincidences"])?;
        let mut seen = [false; 12];
        for (i, rec) in rdr.records().enumerate() {
            let line = format!("row {}", i + 2);
            let rec = rec.map_err(|e| Error::parse(line.clone(), e.to_string()))?;
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected 3 fields"));
            }
            let c = Combo::from_token(&rec[0])
                .ok_or_else(|| Error::parse(line.clone(), format!("unknown combo `{}`", &rec[0])))?;
            if seen[c.index()] {
                return Err(Error::parse(line, format!("duplicate combo `{c}`")));
            }
            seen[c.index()] = true;
            let n: f64 = rec[1]
                .parse()
                .map_err(|_| Error::parse(line.clone(), format!("bad pulse count `{}`", &rec[1])))?;
            if n < 0.0 {
                return Err(Error::parse(line, "negative count"));
            }
            let m = parse_count(&rec[2], &line)?;
            if m as f64 > n {
                return Err(Error::invalid(c.token(), "coincidences exceed pulses"));
            }
            self.set(c, n, m);
        }
        if let Some(c) = Combo::ALL.into_iter().find(|c| !seen[c.index()]) {
            return Err(Error::MissingCombination(c.token().to_string()));
        }
        Ok(())
    }

    pub fn read_errors<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        check_header(&mut rdr, &["combo", "pair", "errors"])?;
        let mut seen = [false; 5];
        for (i, rec) in rdr.records().enumerate() {
            let line = format!("row {}", i + 2);
            let rec = rec.map_err(|e| Error::parse(line.clone(), e.to_string()))?;
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected 3 fields"));
            }
            let slot = ERROR_ROWS
                .iter()
                .position(|(c, p)| c.token() == &rec[0] && *p == &rec[1])
                .ok_or_else(|| {
                    Error::parse(line.clone(), format!("unsupported error row `{},{}`", &rec[0], &rec[1]))
                })?;
            if seen[slot] {
                return Err(Error::parse(line, "duplicate error row"));
            }
            seen[slot] = true;
            let e = parse_count(&rec[2], &line)?;
            match slot {
                0..=2 => self.errors_zzz[slot] = e,
                3 => self.errors_xxx = e,
                _ => self.errors_yyy = e,
            }
        }
        // E_yyy does not enter the analysis and may be omitted.
        if let Some(slot) = (0..4).find(|&s| !seen[s]) {
            let (c, p) = ERROR_ROWS[slot];
            return Err(Error::MissingCombination(format!("{}/{}", c.token(), p)));
        }
        Ok(())
    }

    pub fn write_counts<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::parse("output", e.to_string());
        wtr.write_record(["combo", "pulses", "coincidences"]).map_err(io)?;
        for c in Combo::ALL {
            wtr.write_record([
                c.token().to_string(),
                format!("{:e}", self.pulses(c)),
                self.coincidences(c).to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::parse("output", e.to_string()))
    }

    pub fn write_errors<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::parse("output", e.to_string());
        wtr.write_record(["combo", "pair", "errors"]).map_err(io)?;
        let values = [
            self.errors_zzz[0],
            self.errors_zzz[1],
            self.errors_zzz[2],
            self.errors_xxx,
            self.errors_yyy,
        ];
        for ((c, p), v) in ERROR_ROWS.iter().zip(values) {
            wtr.write_record([c.token(), p, &v.to_string()]).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::parse("output", e.to_string()))
    }

    pub fn counts_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_counts(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn errors_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_errors(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let h = rdr
        .headers()
        .map_err(|e| Error::parse("row 1", e.to_string()))?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            "row 1",
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

fn parse_count(s: &str, line: &str) -> Result<u64> {
    if s.starts_with('-') {
        return Err(Error::parse(line, "negative count"));
    }
    s.parse()
        .map_err(|_| Error::parse(line, format!("bad count `{s}`")))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a counts CSV and, optionally, its companion errors CSV.
pub fn load_ledger(counts: &Path, errors: Option<&Path>) -> Result<CountLedger> {
    let mut ledger = CountLedger::default();
    ledger.read_counts(open(counts)?)?;
    if let Some(p) = errors {
        ledger.read_errors(open(p)?)?;
    }
    ledger.validate()?;
    Ok(ledger)
}

/// Load a counts CSV without error counts.
pub fn load_counts(path: &Path) -> Result<CountLedger> {
    load_ledger(path, None)
}
