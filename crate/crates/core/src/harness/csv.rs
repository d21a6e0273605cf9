use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ComplexityRow, ResultRow};
use crate::error::Result;

pub const RESULT_HEADER: &str =
    "detector,nt,nr,modulation,snr_db,trials,bit_errors,ber,I,P,mults,adds,ops_total,mean_K,mean_L,mean_dstar,wall_seconds";

pub const COMPLEXITY_HEADER: &str = "detector,nt,nr,modulation,snr_db,trials,bit_errors,ber,I,P,mults,adds,ops_total,mean_K,mean_L,mean_dstar,wall_seconds,reduction_pct";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ResultRow {
    pub fn csv_record(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{:e},{},{},{},{},{},{},{},{},{:.6}",
            self.detector,
            self.nt,
            self.nr,
            self.modulation,
            self.snr_db,
            self.trials,
            self.bit_errors,
            self.ber,
            self.iterations,
            self.tabu,
            self.mults,
            self.adds,
            self.ops_total,
            opt(self.mean_k),
            opt(self.mean_l),
            opt(self.mean_dstar),
            self.wall_seconds
        );
        s
    }
}

impl ComplexityRow {
    pub fn csv_record(&self) -> String {
        let reduction = self
            .reduction_pct
            .map(|v| format!("{v:.4}"))
            .unwrap_or_default();
        format!("{},{reduction}", self.row.csv_record())
    }
}

pub(crate) fn write_lines<W: Write>(
    mut w: W,
    header: &str,
    lines: impl Iterator<Item = String>,
) -> Result<()> {
    writeln!(w, "{header}")?;
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_result_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    write_lines(w, RESULT_HEADER, rows.iter().map(ResultRow::csv_record))
}

pub fn write_complexity_csv(path: &Path, rows: &[ComplexityRow]) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    write_lines(
        w,
        COMPLEXITY_HEADER,
        rows.iter().map(ComplexityRow::csv_record),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::OpLedger;
    use crate::detector::DetectorKind;

    fn row() -> ResultRow {
        ResultRow {
            detector: DetectorKind::Ngts,
            nt: 8,
            nr: 8,
            modulation: "64qam",
            snr_db: 16.0,
            trials: 100,
            bit_errors: 3,
            ber: 3.0 / 9600.0,
            iterations: 8000,
            tabu: 4000,
            mults: 10,
            adds: 5,
            ops_total: 15,
            mean_k: Some(7.5),
            mean_l: Some(25.0),
            mean_dstar: None,
            wall_seconds: 1.25,
            ledger: OpLedger::new(),
        }
    }

    #[test]
    fn record_matches_header_layout() {
        let line = row().csv_record();
        assert_eq!(
            line,
            "ngts,8,8,64qam,16,100,3,3.125e-4,8000,4000,10,5,15,7.500000,25.000000,,1.250000"
        );
        assert_eq!(line.split(',').count(), RESULT_HEADER.split(',').count());
        let c = ComplexityRow {
            row: row(),
            reduction_pct: Some(84.61538),
        };
        assert!(c.csv_record().ends_with(",84.6154"));
        assert_eq!(
            c.csv_record().split(',').count(),
            COMPLEXITY_HEADER.split(',').count()
        );
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("out.csv");
        assert!(matches!(
            write_result_csv(&bad, &[row()]),
            Err(crate::Error::Io(_))
        ));
    }
}
